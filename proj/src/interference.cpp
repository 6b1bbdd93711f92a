#include "iqnet/interference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace iqnet {

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::asymmetric: return "ASYMMETRIC";
    case ErrorCode::nonpositive_center: return "NONPOSITIVE_CENTER";
    case ErrorCode::negative_weight: return "NEGATIVE_WEIGHT";
    case ErrorCode::supercritical: return "SUPERCRITICAL";
    case ErrorCode::above_threshold: return "ABOVE_THRESHOLD";
    case ErrorCode::degenerate: return "DEGENERATE";
    case ErrorCode::torus_too_small: return "TORUS_TOO_SMALL";
    case ErrorCode::unsupported_dimension: return "UNSUPPORTED_DIMENSION";
    case ErrorCode::site_out_of_range: return "SITE_OUT_OF_RANGE";
    case ErrorCode::empty_window: return "EMPTY_WINDOW";
    case ErrorCode::frozen_site: return "FROZEN_SITE";
    case ErrorCode::clock_regression: return "CLOCK_REGRESSION";
    case ErrorCode::ordering_violation: return "ORDERING_VIOLATION";
    case ErrorCode::cluster_cap_exceeded: return "CLUSTER_CAP_EXCEEDED";
    case ErrorCode::not_converged: return "NOT_CONVERGED";
    case ErrorCode::insufficient_batches: return "INSUFFICIENT_BATCHES";
    case ErrorCode::step_too_large: return "STEP_TOO_LARGE";
    case ErrorCode::parse_error: return "PARSE_ERROR";
    case ErrorCode::semantic_error: return "SEMANTIC_ERROR";
    }
    return "UNKNOWN";
}

std::string offset_to_string(const Offset& o) {
    std::ostringstream out;
    out << '(';
    for (size_t k = 0; k < o.size(); ++k) {
        if (k) out << ',';
        out << o[k];
    }
    out << ')';
    return out.str();
}

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) fail(ErrorCode::negative_weight, "rational with zero denominator");
    if (den < 0) { num = -num; den = -den; }
    long long g = std::gcd(std::llabs(num), den);
    if (g > 1) { num /= g; den /= g; }
}

namespace {

int sup_norm(const Offset& o) {
    int m = 0;
    for (int c : o) m = std::max(m, std::abs(c));
    return m;
}

Offset negated(const Offset& o) {
    Offset r(o.size());
    for (size_t k = 0; k < o.size(); ++k) r[k] = -o[k];
    return r;
}

void check_offset_dim(const Offset& o, int d) {
    if (static_cast<int>(o.size()) != d)
        fail(ErrorCode::unsupported_dimension,
             "offset " + offset_to_string(o) + " does not have dimension " + std::to_string(d));
}

} // namespace

InterferenceSequence::InterferenceSequence() {
    d_ = 1;
    a0_ = 1.0;
    radius_ = 0;
    total_ = 1.0;
    exact_ = true;
    common_den_ = 1;
    entries_.emplace_back(Offset{0}, 1.0);
    numerators_.push_back(1);
}

void InterferenceSequence::finalize(const std::map<Offset, Rational>& raw, bool exact_input) {
    const Offset zero(static_cast<size_t>(d_), 0);

    for (const auto& [off, w] : raw) {
        check_offset_dim(off, d_);
        if (w.num < 0)
            fail(ErrorCode::negative_weight,
                 "weight at " + offset_to_string(off) + " is negative");
        auto mirror = raw.find(negated(off));
        if (mirror == raw.end() || !(mirror->second == w))
            fail(ErrorCode::asymmetric,
                 "weight at " + offset_to_string(off) + " has no equal mirror entry");
    }

    auto center = raw.find(zero);
    if (center == raw.end() || center->second.num <= 0)
        fail(ErrorCode::nonpositive_center, "weight at the zero offset must be positive");

    // Keep only positive entries; maps iterate lexicographically already.
    long long den = 1;
    for (const auto& [off, w] : raw) {
        if (w.num == 0) continue;
        long long g = std::gcd(den, w.den);
        double scaled = static_cast<double>(den) * static_cast<double>(w.den) / static_cast<double>(g);
        if (scaled > 9.0e15) { // common denominator would overflow exact arithmetic
            exact_input = false;
        } else {
            den = den / g * w.den;
        }
        (void)off;
    }
    if (exact_input) {
        for (const auto& [off, w] : raw) {
            if (w.num == 0) continue;
            (void)off;
            if (static_cast<double>(w.num) * static_cast<double>(den / w.den) > 9.0e15) {
                exact_input = false; // scaled numerator would overflow exact arithmetic
                break;
            }
        }
    }

    total_ = 0.0;
    radius_ = 0;
    for (const auto& [off, w] : raw) {
        if (w.num == 0) continue;
        entries_.emplace_back(off, w.to_double());
        if (exact_input) numerators_.push_back(w.num * (den / w.den));
        total_ += w.to_double();
        radius_ = std::max(radius_, sup_norm(off));
    }
    a0_ = center->second.to_double();
    exact_ = exact_input;
    common_den_ = exact_input ? den : 1;
    if (!exact_input) numerators_.clear();
}

InterferenceSequence InterferenceSequence::validate(const std::map<Offset, Rational>& raw, int d) {
    if (d < 1) fail(ErrorCode::unsupported_dimension, "dimension must be >= 1");
    InterferenceSequence seq{Unset{}};
    seq.d_ = d;
    seq.finalize(raw, true);
    return seq;
}

InterferenceSequence InterferenceSequence::validate(const std::map<Offset, double>& raw, int d) {
    if (d < 1) fail(ErrorCode::unsupported_dimension, "dimension must be >= 1");
    // Doubles with small integral values keep the exact path (covers the
    // common all-ones family); anything else runs in plain binary64.
    bool integral = true;
    for (const auto& [off, w] : raw) {
        (void)off;
        if (!(w == std::floor(w)) || std::fabs(w) > 1048576.0) { integral = false; break; }
    }
    if (integral) {
        std::map<Offset, Rational> as_rational;
        for (const auto& [off, w] : raw) {
            if (w < 0.0)
                fail(ErrorCode::negative_weight,
                     "weight at " + offset_to_string(off) + " is negative");
            as_rational.emplace(off, Rational(static_cast<long long>(w), 1));
        }
        InterferenceSequence seq{Unset{}};
        seq.d_ = d;
        seq.finalize(as_rational, true);
        return seq;
    }

    InterferenceSequence seq{Unset{}};
    seq.d_ = d;
    const Offset zero(static_cast<std::size_t>(d), 0);
    for (const auto& [off, w] : raw) {
        check_offset_dim(off, d);
        if (w < 0.0)
            fail(ErrorCode::negative_weight, "weight at " + offset_to_string(off) + " is negative");
        auto mirror = raw.find(negated(off));
        if (mirror == raw.end() || mirror->second != w)
            fail(ErrorCode::asymmetric,
                 "weight at " + offset_to_string(off) + " has no equal mirror entry");
    }
    auto center = raw.find(zero);
    if (center == raw.end() || !(center->second > 0.0))
        fail(ErrorCode::nonpositive_center, "weight at the zero offset must be positive");

    seq.total_ = 0.0;
    seq.radius_ = 0;
    for (const auto& [off, w] : raw) {
        if (w == 0.0) continue;
        seq.entries_.emplace_back(off, w);
        seq.total_ += w;
        seq.radius_ = std::max(seq.radius_, sup_norm(off));
    }
    seq.a0_ = center->second;
    seq.exact_ = false;
    seq.common_den_ = 1;
    return seq;
}

double InterferenceSequence::weight_at(const Offset& o) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), o,
                               [](const auto& e, const Offset& key) { return e.first < key; });
    if (it != entries_.end() && it->first == o) return it->second;
    return 0.0;
}

bool is_irreducible(const InterferenceSequence& seq) {
    const int d = seq.dimension();
    // Column-style integer elimination on the support vectors: the offsets
    // generate Z^d iff elimination produces a triangular basis whose diagonal
    // entries are all +-1.
    std::vector<Offset> gens;
    for (const auto& [off, w] : seq.entries()) {
        (void)w;
        if (sup_norm(off) > 0) gens.push_back(off);
    }
    if (gens.empty()) return d == 0;

    std::vector<std::vector<long long>> basis; // rows being reduced
    for (const auto& g : gens) basis.emplace_back(g.begin(), g.end());

    int rank = 0;
    std::vector<long long> diag;
    for (int col = 0; col < d; ++col) {
        // gcd-reduce all rows at `col` into a single pivot row.
        int pivot = -1;
        for (size_t r = rank; r < basis.size(); ++r)
            if (basis[r][col] != 0) { pivot = static_cast<int>(r); break; }
        if (pivot < 0) return false; // lattice misses this axis entirely
        std::swap(basis[rank], basis[pivot]);
        for (size_t r = rank + 1; r < basis.size(); ++r) {
            while (basis[r][col] != 0) {
                long long q = basis[rank][col] / basis[r][col];
                for (int c = col; c < d; ++c) basis[rank][c] -= q * basis[r][c];
                std::swap(basis[rank], basis[r]);
            }
        }
        diag.push_back(std::llabs(basis[rank][col]));
        ++rank;
    }
    long long det = 1;
    for (long long v : diag) det *= v;
    return det == 1;
}

double critical_rate(const InterferenceSequence& seq) {
    return 1.0 / seq.total_weight();
}

double closed_form_mean(const InterferenceSequence& seq, double lambda) {
    if (lambda < 0.0) fail(ErrorCode::semantic_error, "lambda must be nonnegative");
    if (lambda >= critical_rate(seq))
        fail(ErrorCode::supercritical,
             "lambda " + std::to_string(lambda) + " is not below the critical rate " +
                 std::to_string(critical_rate(seq)));
    return lambda * seq.a0() / (1.0 - lambda * seq.total_weight());
}

SecondMomentBound second_moment_bound(const InterferenceSequence& seq, double lambda) {
    const double off = seq.offcenter_weight();
    if (off <= 0.0)
        fail(ErrorCode::degenerate, "no off-center weight: the second-moment bound does not apply");
    const double a0 = seq.a0();
    SecondMomentBound r;
    r.c = (std::sqrt(a0 * a0 + a0 * off) - a0) / off;
    const double total = seq.total_weight();
    r.threshold = (2.0 / 3.0) * (1.0 + r.c) / total;
    if (lambda >= r.threshold)
        fail(ErrorCode::above_threshold,
             "lambda " + std::to_string(lambda) + " is not below the second-moment threshold " +
                 std::to_string(r.threshold));
    const double mu = closed_form_mean(seq, lambda);
    r.bound = 2.0 * mu * (lambda + lambda * total + 1.0) / (2.0 * (1.0 + r.c) - 3.0 * lambda * total);
    return r;
}

double k_shifted_mean_bound(const InterferenceSequence& seq, double lambda, long long K) {
    if (K < 0) fail(ErrorCode::semantic_error, "shift level K must be nonnegative");
    if (lambda >= critical_rate(seq))
        fail(ErrorCode::supercritical, "lambda is not below the critical rate");
    return (lambda + static_cast<double>(K)) / (1.0 - lambda * seq.total_weight());
}

InterferenceSequence truncate(const InterferenceSequence& seq, int radius) {
    if (radius < 0) fail(ErrorCode::semantic_error, "truncation radius must be >= 0");
    if (seq.exact()) {
        std::map<Offset, Rational> kept;
        const auto& nums = seq.exact_numerators();
        for (size_t k = 0; k < seq.entries().size(); ++k) {
            const auto& off = seq.entries()[k].first;
            if (sup_norm(off) <= radius)
                kept.emplace(off, Rational(nums[k], seq.common_denominator()));
        }
        return InterferenceSequence::validate(kept, seq.dimension());
    }
    std::map<Offset, double> kept_f;
    for (const auto& [off, w] : seq.entries())
        if (sup_norm(off) <= radius) kept_f.emplace(off, w);
    return InterferenceSequence::validate(kept_f, seq.dimension());
}

namespace {

// Enumerate all offsets with sup-norm <= radius in d dimensions.
void enumerate_ball(int d, int radius, Offset& cur, std::vector<Offset>& out) {
    if (static_cast<int>(cur.size()) == d) { out.push_back(cur); return; }
    for (int c = -radius; c <= radius; ++c) {
        cur.push_back(c);
        enumerate_ball(d, radius, cur, out);
        cur.pop_back();
    }
}

} // namespace

InterferenceSequence ones_sequence(int d, int width) {
    if (width < 1 || width % 2 == 0)
        fail(ErrorCode::semantic_error, "ones(width) needs an odd positive width");
    const int radius = (width - 1) / 2;
    std::vector<Offset> ball;
    Offset cur;
    enumerate_ball(d, radius, cur, ball);
    std::map<Offset, Rational> raw;
    for (const auto& off : ball) raw.emplace(off, Rational(1, 1));
    return InterferenceSequence::validate(raw, d);
}

InterferenceSequence geometric_sequence(int d, const Rational& ratio, int radius) {
    if (ratio.num <= 0 || ratio.num >= ratio.den)
        fail(ErrorCode::semantic_error, "geometric ratio must be in (0,1)");
    std::vector<Offset> ball;
    Offset cur;
    enumerate_ball(d, radius, cur, ball);
    std::map<Offset, Rational> raw;
    for (const auto& off : ball) {
        int m = sup_norm(off);
        long long num = 1, den = 1;
        for (int k = 0; k < m; ++k) {
            num *= ratio.num;
            den *= ratio.den;
            if (den > (1LL << 60)) fail(ErrorCode::semantic_error, "geometric weights underflow exact range");
        }
        raw.emplace(off, Rational(num, den));
    }
    return InterferenceSequence::validate(raw, d);
}

Offset torus_displacement(const Offset& i, const Offset& j, int n) {
    if (i.size() != j.size())
        fail(ErrorCode::unsupported_dimension, "site dimensions differ");
    const long long m = 2LL * n + 1;
    Offset out(i.size());
    for (size_t k = 0; k < i.size(); ++k) {
        long long diff = static_cast<long long>(i[k]) - static_cast<long long>(j[k]);
        long long r = ((diff % m) + m) % m; // in [0, 2n]
        if (r > n) r -= m;                  // centered representative in [-n, n]
        out[k] = static_cast<int>(r);
    }
    return out;
}

void require_torus_fits(int n, int support_radius) {
    if (2 * n + 1 <= 2 * support_radius)
        fail(ErrorCode::torus_too_small,
             "torus circumference " + std::to_string(2 * n + 1) +
                 " must exceed twice the support radius " + std::to_string(support_radius));
}

} // namespace iqnet
