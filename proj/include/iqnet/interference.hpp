#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "iqnet/errors.hpp"

namespace iqnet {

// Offset / site coordinate in Z^d (one entry per dimension).
using Offset = std::vector<int>;

std::string offset_to_string(const Offset& o);

// Exact nonnegative rational, always kept normalized with den > 0.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d);

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
};

// Symmetric, finitely supported nonnegative weights a_i on Z^d together with
// the scalars derived from them.  Weights supplied as rationals keep an exact
// integer representation (numerators over one common denominator), which the
// event engine uses for exact departure-mark comparisons.  Immutable after
// construction; safe to share across threads.
class InterferenceSequence {
public:
    // Default: the trivial center-only sequence (weight 1 at the origin).
    InterferenceSequence();

    // Checks symmetry (a_i == a_{-i}), a_0 > 0 and nonnegativity.
    static InterferenceSequence validate(const std::map<Offset, double>& raw, int d);
    static InterferenceSequence validate(const std::map<Offset, Rational>& raw, int d);

    int dimension() const { return d_; }
    double a0() const { return a0_; }
    int support_radius() const { return radius_; } // max sup-norm over positive weights
    double total_weight() const { return total_; }           // sum of all weights
    double offcenter_weight() const { return total_ - a0_; } // sum over nonzero offsets

    // Entries with positive weight, sorted lexicographically by offset.
    const std::vector<std::pair<Offset, double>>& entries() const { return entries_; }
    double weight_at(const Offset& o) const; // 0 outside the support

    // Exact representation: weight at entries()[k] equals
    // exact_numerators()[k] / common_denominator().  Only meaningful when
    // exact() is true (weights supplied as rationals, or as integral doubles).
    bool exact() const { return exact_; }
    const std::vector<long long>& exact_numerators() const { return numerators_; }
    long long common_denominator() const { return common_den_; }

private:
    struct Unset {};
    explicit InterferenceSequence(Unset) {}
    void finalize(const std::map<Offset, Rational>& raw, bool exact_input);

    int d_ = 1;
    double a0_ = 1.0;
    int radius_ = 0;
    double total_ = 0.0;
    bool exact_ = false;
    long long common_den_ = 1;
    std::vector<std::pair<Offset, double>> entries_;
    std::vector<long long> numerators_;
};

// True iff the integer lattice generated by the support offsets is all of
// Z^d.  (With a symmetric support containing 0 this matches the semigroup
// reachability condition; in d=1 it reduces to gcd of offsets == 1.)
bool is_irreducible(const InterferenceSequence& seq);

// 1 / sum(a_j): arrival rates strictly below this admit a stationary regime.
double critical_rate(const InterferenceSequence& seq);

// Stationary mean of a queue under the minimal stationary regime:
// lambda * a0 / (1 - lambda * sum(a_j)).  Throws `supercritical` at or above
// the critical rate.
double closed_form_mean(const InterferenceSequence& seq, double lambda);

struct SecondMomentBound {
    double c = 0.0;         // in (0, 1/2)
    double threshold = 0.0; // largest lambda the bound applies below
    double bound = 0.0;     // upper bound on the stationary second moment
};

// c = (sqrt(a0^2 + a0*S') - a0) / S' with S' the off-center weight sum;
// threshold = (2/3)(1+c)/S with S the full sum; bound =
// 2*mu*(lambda + lambda*S + 1) / (2(1+c) - 3*lambda*S) with mu the closed-form
// mean.  Throws `degenerate` when S' == 0 and `above_threshold` when lambda
// is not strictly below the threshold.
SecondMomentBound second_moment_bound(const InterferenceSequence& seq, double lambda);

// Mean bound (lambda + K) / (1 - lambda * sum(a_j)) for the dynamics whose
// departures are blocked at or below level K.
double k_shifted_mean_bound(const InterferenceSequence& seq, double lambda, long long K);

// Drops offsets with sup-norm > radius; symmetry is preserved by construction.
InterferenceSequence truncate(const InterferenceSequence& seq, int radius);

// Named presets used by the config format.
InterferenceSequence ones_sequence(int d, int width);                       // "ones(width)", odd width
InterferenceSequence geometric_sequence(int d, const Rational& ratio, int radius); // "geometric(ratio, radius)"

// Centered representative of (i - j) modulo the torus circumference 2n+1,
// i.e. the unique equivalent offset with every coordinate in [-n, n].
Offset torus_displacement(const Offset& i, const Offset& j, int n);

// Wrap-around must not double-count a neighbor: requires 2n+1 > 2L.
void require_torus_fits(int n, int support_radius);

} // namespace iqnet
