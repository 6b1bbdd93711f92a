#include "iqnet/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "iqnet/engine.hpp"
#include "iqnet/errors.hpp"
#include "iqnet/fluid.hpp"
#include "iqnet/io_util.hpp"
#include "iqnet/local_construction.hpp"
#include "iqnet/stationary.hpp"
#include "iqnet/stats.hpp"
#include "json.hpp"

namespace iqnet {

namespace {

using nlohmann::ordered_json;

struct KindName {
    ExperimentKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {ExperimentKind::mean_vs_formula, "mean-vs-formula"},
    {ExperimentKind::covariance_figure, "covariance-figure"},
    {ExperimentKind::moment_bounds, "moment-bounds"},
    {ExperimentKind::coupling_suite, "coupling-suite"},
    {ExperimentKind::loynes, "loynes"},
    {ExperimentKind::local_vs_box, "local-vs-box"},
    {ExperimentKind::frozen_wall, "frozen-wall"},
    {ExperimentKind::bounded_start_convergence, "bounded-start-convergence"},
    {ExperimentKind::supercritical_growth, "supercritical-growth"},
    {ExperimentKind::fluid_transience, "fluid-transience"},
    {ExperimentKind::infinite_support, "infinite-support"},
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

// ---------------------------------------------------------------------------
// Strict key=value config reader.

struct RawEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

class ConfigMap {
public:
    ConfigMap(const std::string& text, std::string source) : source_(std::move(source)) {
        std::istringstream in(text);
        std::string raw;
        int lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            const std::size_t hash = raw.find('#');
            if (hash != std::string::npos) raw.erase(hash);
            const std::string line = trim(raw);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                fail(ErrorCode::parse_error,
                     source_ + ":" + std::to_string(lineno) + ": expected `key = value`, got '" +
                         line + "'");
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) {
                fail(ErrorCode::parse_error,
                     source_ + ":" + std::to_string(lineno) + ": empty key");
            }
            if (entries_.count(key)) {
                fail(ErrorCode::parse_error, source_ + ":" + std::to_string(lineno) +
                                                 ": duplicate key '" + key + "' (first at line " +
                                                 std::to_string(entries_[key].line) + ")");
            }
            entries_[key] = RawEntry{value, lineno, false};
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    const RawEntry* take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }

    [[noreturn]] void bad_value(const std::string& key, const RawEntry& e,
                                const std::string& expected) const {
        fail(ErrorCode::parse_error, source_ + ":" + std::to_string(e.line) + ": key '" + key +
                                         "' = '" + e.value + "': expected " + expected);
    }

    std::string get_string(const std::string& key, const std::string& fallback) {
        const RawEntry* e = take(key);
        return e ? e->value : fallback;
    }

    double get_double(const std::string& key, double fallback) {
        const RawEntry* e = take(key);
        if (!e) return fallback;
        try {
            std::size_t idx = 0;
            const double v = std::stod(e->value, &idx);
            if (idx != e->value.size()) bad_value(key, *e, "a number");
            return v;
        } catch (const std::logic_error&) {
            bad_value(key, *e, "a number");
        }
    }

    long long get_ll(const std::string& key, long long fallback) {
        const RawEntry* e = take(key);
        if (!e) return fallback;
        try {
            std::size_t idx = 0;
            const long long v = std::stoll(e->value, &idx);
            if (idx != e->value.size()) bad_value(key, *e, "an integer");
            return v;
        } catch (const std::logic_error&) {
            bad_value(key, *e, "an integer");
        }
    }

    int get_int(const std::string& key, int fallback) {
        const long long v = get_ll(key, fallback);
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
            fail(ErrorCode::parse_error, source_ + ": key '" + key + "' out of integer range");
        }
        return static_cast<int>(v);
    }

    bool get_bool(const std::string& key, bool fallback) {
        const RawEntry* e = take(key);
        if (!e) return fallback;
        if (e->value == "true" || e->value == "1") return true;
        if (e->value == "false" || e->value == "0") return false;
        bad_value(key, *e, "true or false");
    }

    std::vector<std::uint64_t> get_seed_list(const std::string& key,
                                             std::vector<std::uint64_t> fallback) {
        const RawEntry* e = take(key);
        if (!e) return fallback;
        std::vector<std::uint64_t> out;
        for (const std::string& part : split_list(e->value)) {
            try {
                std::size_t idx = 0;
                out.push_back(std::stoull(part, &idx));
                if (idx != part.size()) bad_value(key, *e, "a comma-separated list of seeds");
            } catch (const std::logic_error&) {
                bad_value(key, *e, "a comma-separated list of seeds");
            }
        }
        return out;
    }

    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) {
        const RawEntry* e = take(key);
        if (!e) return fallback;
        std::vector<int> out;
        for (const std::string& part : split_list(e->value)) {
            try {
                std::size_t idx = 0;
                out.push_back(std::stoi(part, &idx));
                if (idx != part.size()) bad_value(key, *e, "a comma-separated list of integers");
            } catch (const std::logic_error&) {
                bad_value(key, *e, "a comma-separated list of integers");
            }
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) {
        const RawEntry* e = take(key);
        if (!e) return fallback;
        std::vector<double> out;
        for (const std::string& part : split_list(e->value)) {
            try {
                std::size_t idx = 0;
                out.push_back(std::stod(part, &idx));
                if (idx != part.size()) bad_value(key, *e, "a comma-separated list of numbers");
            } catch (const std::logic_error&) {
                bad_value(key, *e, "a comma-separated list of numbers");
            }
        }
        return out;
    }

    Rational get_rational(const std::string& key, const Rational& fallback) {
        const RawEntry* e = take(key);
        if (!e) return fallback;
        const std::size_t slash = e->value.find('/');
        if (slash == std::string::npos) bad_value(key, *e, "a fraction `p/q`");
        try {
            std::size_t i1 = 0, i2 = 0;
            const std::string num = trim(e->value.substr(0, slash));
            const std::string den = trim(e->value.substr(slash + 1));
            const long long p = std::stoll(num, &i1);
            const long long q = std::stoll(den, &i2);
            if (i1 != num.size() || i2 != den.size()) bad_value(key, *e, "a fraction `p/q`");
            return Rational(p, q);
        } catch (const std::logic_error&) {
            bad_value(key, *e, "a fraction `p/q`");
        }
    }

    // Every key must have been consumed by the selected kind.
    void finish(const std::string& kind_name) const {
        const RawEntry* worst = nullptr;
        std::string worst_key;
        for (const auto& [key, entry] : entries_) {
            if (entry.used) continue;
            if (!worst || entry.line < worst->line) {
                worst = &entry;
                worst_key = key;
            }
        }
        if (worst) {
            fail(ErrorCode::parse_error, source_ + ":" + std::to_string(worst->line) +
                                             ": unknown key '" + worst_key + "' (not used by kind '" +
                                             kind_name + "')");
        }
    }

    const std::string& source() const { return source_; }

private:
    std::map<std::string, RawEntry> entries_;
    std::string source_;
};

// Value strings like "ones(3)" / "geometric(1/2, 8)".
InterferenceSequence parse_interference(const std::string& text, int d) {
    const std::string t = trim(text);
    const std::size_t open = t.find('(');
    if (open == std::string::npos || t.back() != ')') {
        fail(ErrorCode::parse_error, "interference value '" + text +
                                         "' not understood; expected ones(width) or "
                                         "geometric(p/q, radius)");
    }
    const std::string name = trim(t.substr(0, open));
    const std::vector<std::string> args = split_list(t.substr(open + 1, t.size() - open - 2));
    try {
        if (name == "ones" && args.size() == 1) {
            std::size_t idx = 0;
            const int width = std::stoi(args[0], &idx);
            if (idx != args[0].size()) throw std::invalid_argument("width");
            return ones_sequence(d, width);
        }
        if (name == "geometric" && args.size() == 2) {
            const std::size_t slash = args[0].find('/');
            if (slash == std::string::npos) throw std::invalid_argument("ratio");
            std::size_t i1 = 0, i2 = 0, i3 = 0;
            const std::string num = trim(args[0].substr(0, slash));
            const std::string den = trim(args[0].substr(slash + 1));
            const long long p = std::stoll(num, &i1);
            const long long q = std::stoll(den, &i2);
            const int radius = std::stoi(args[1], &i3);
            if (i1 != num.size() || i2 != den.size() || i3 != args[1].size()) {
                throw std::invalid_argument("geometric");
            }
            return geometric_sequence(d, Rational(p, q), radius);
        }
    } catch (const std::logic_error&) {
        // fall through to the uniform parse error below
    }
    fail(ErrorCode::parse_error, "interference value '" + text +
                                     "' not understood; expected ones(width) or "
                                     "geometric(p/q, radius)");
}

// Value strings like "zero" / "constant(5)" / "iid_geometric(1.5)" /
// "iid_power(2.5, 100)".
InitialCondition parse_initial(const std::string& text) {
    const std::string t = trim(text);
    if (t == "zero") return InitialCondition::zero();
    const std::size_t open = t.find('(');
    if (open != std::string::npos && t.back() == ')') {
        const std::string name = trim(t.substr(0, open));
        const std::vector<std::string> args = split_list(t.substr(open + 1, t.size() - open - 2));
        try {
            std::size_t idx = 0;
            if (name == "constant" && args.size() == 1) {
                const long long v = std::stoll(args[0], &idx);
                if (idx == args[0].size()) return InitialCondition::constant_level(v);
            } else if (name == "iid_geometric" && args.size() == 1) {
                const double m = std::stod(args[0], &idx);
                if (idx == args[0].size()) return InitialCondition::iid_geometric(m);
            } else if (name == "iid_power" && args.size() == 2) {
                std::size_t i2 = 0;
                const double e = std::stod(args[0], &idx);
                const long long cap = std::stoll(args[1], &i2);
                if (idx == args[0].size() && i2 == args[1].size()) {
                    return InitialCondition::iid_power(e, cap);
                }
            }
        } catch (const std::logic_error&) {
        }
    }
    fail(ErrorCode::parse_error, "initial value '" + text +
                                     "' not understood; expected zero, constant(v), "
                                     "iid_geometric(mean) or iid_power(exponent, cap)");
}

[[noreturn]] void violated(const std::string& what) { fail(ErrorCode::semantic_error, what); }

void validate_config(const ExperimentConfig& c) {
    const std::string kind(experiment_kind_name(c.kind));
    if (c.seeds.empty()) violated(kind + ": seeds must be nonempty");
    if (c.dimension < 1 || c.dimension > 3) violated(kind + ": dimension must be 1, 2 or 3");
    if (!std::isfinite(c.lambda) || c.lambda < 0.0) {
        violated(kind + ": lambda must be finite and >= 0");
    }

    auto require_subcritical = [&](double lambda, const char* label) {
        const double crit = critical_rate(c.seq);
        if (!(lambda < crit)) {
            violated(kind + ": " + label + " must be strictly below the critical rate " +
                     format_double(crit) + "; got " + format_double(lambda));
        }
    };
    auto require_stationary_window = [&]() {
        require_torus_fits(c.n, c.seq.support_radius());
        if (c.burn_in < 0.0) violated(kind + ": burn_in must be >= 0");
        if (!(c.horizon > 0.0)) violated(kind + ": horizon must be > 0");
        if (c.batches < 20) violated(kind + ": batches must be >= 20");
    };

    switch (c.kind) {
        case ExperimentKind::mean_vs_formula:
            require_stationary_window();
            require_subcritical(c.lambda, "lambda");
            if (c.tolerance < 0.0) violated(kind + ": tolerance must be >= 0");
            break;
        case ExperimentKind::covariance_figure:
            require_stationary_window();
            require_subcritical(c.lambda, "lambda");
            if (c.tolerance < 0.0) violated(kind + ": tolerance must be >= 0");
            if (c.max_lag < 0) violated(kind + ": max_lag must be >= 0");
            if (2 * c.max_lag >= 2 * c.n + 1) {
                violated(kind + ": lag window must satisfy 2*max_lag < 2n+1");
            }
            break;
        case ExperimentKind::moment_bounds:
            require_stationary_window();
            second_moment_bound(c.seq, c.lambda);  // throws if outside its domain
            if (c.K < 0) violated(kind + ": K must be >= 0");
            if (c.K > 0) {
                require_torus_fits(c.floor_n, c.seq.support_radius());
                if (!(c.floor_horizon > 0.0)) violated(kind + ": floor_horizon must be > 0");
            }
            break;
        case ExperimentKind::coupling_suite:
            require_torus_fits(c.n, c.seq.support_radius());
            if (!(c.horizon > 0.0)) violated(kind + ": horizon must be > 0");
            if (!(c.min_events > 0.0)) violated(kind + ": min_events must be > 0");
            if (c.initial_high < 0) violated(kind + ": initial_high must be >= 0");
            break;
        case ExperimentKind::loynes:
            if (c.radii.empty()) violated(kind + ": radii must be nonempty");
            for (std::size_t i = 0; i < c.radii.size(); ++i) {
                if (c.radii[i] < 0) violated(kind + ": radii must be >= 0");
                if (i > 0 && c.radii[i] <= c.radii[i - 1]) {
                    violated(kind + ": radii must be strictly increasing");
                }
            }
            if (!(c.base_depth > 0.0)) violated(kind + ": base_depth must be > 0");
            if (c.max_doublings < 0) violated(kind + ": max_doublings must be >= 0");
            if (c.convergence_fraction < 0.0 || c.convergence_fraction > 1.0) {
                violated(kind + ": convergence_fraction must be in [0, 1]");
            }
            break;
        case ExperimentKind::local_vs_box:
            if (!(c.horizon > 0.0)) violated(kind + ": horizon must be > 0");
            if (!(c.safety > 0.0) || !(c.safety < 1.0)) {
                violated(kind + ": safety must be in (0, 1)");
            }
            if (!std::isfinite(c.start_time)) violated(kind + ": start_time must be finite");
            break;
        case ExperimentKind::frozen_wall:
            if (c.dimension != 1) violated(kind + ": requires dimension 1");
            if (c.wall_radius < 1) violated(kind + ": wall_radius must be >= 1");
            if (c.seq.support_radius() < 1) {
                violated(kind + ": interference must reach a neighbor (support radius >= 1)");
            }
            if (!c.wall_infinite && c.wall_magnitude < 0) {
                violated(kind + ": wall_magnitude must be >= 0 or INFINITE");
            }
            if (c.checkpoints.empty()) violated(kind + ": checkpoints must be nonempty");
            for (std::size_t i = 0; i < c.checkpoints.size(); ++i) {
                if (!(c.checkpoints[i] > 0.0)) violated(kind + ": checkpoints must be > 0");
                if (i > 0 && c.checkpoints[i] <= c.checkpoints[i - 1]) {
                    violated(kind + ": checkpoints must be strictly increasing");
                }
            }
            if (!(c.wall_check_time > 0.0)) violated(kind + ": wall_check_time must be > 0");
            break;
        case ExperimentKind::bounded_start_convergence:
            require_stationary_window();
            require_subcritical(c.lambda, "lambda");
            if (c.start_level < 0) violated(kind + ": start_level must be >= 0");
            break;
        case ExperimentKind::supercritical_growth: {
            require_torus_fits(c.n, c.seq.support_radius());
            const double crit = critical_rate(c.seq);
            if (!(c.lambda > crit)) {
                violated(kind + ": lambda must be strictly above the critical rate " +
                         format_double(crit) + "; got " + format_double(c.lambda));
            }
            if (!(c.horizon > 0.0)) violated(kind + ": horizon must be > 0");
            if (c.sample_count < 3) violated(kind + ": sample_count must be >= 3");
            break;
        }
        case ExperimentKind::fluid_transience: {
            if (c.dimension != 1) violated(kind + ": requires dimension 1");
            if (c.N < 1) violated(kind + ": N must be >= 1");
            if (!(c.step > 0.0)) violated(kind + ": step must be > 0");
            if (!(c.fluid_horizon > 0.0)) violated(kind + ": fluid_horizon must be > 0");
            if (!(c.drain_horizon > 0.0)) violated(kind + ": drain_horizon must be > 0");
            if (!(c.sample_interval > 0.0)) violated(kind + ": sample_interval must be > 0");
            const double crit = critical_rate(c.seq);
            if (!(c.lambda > crit)) {
                violated(kind + ": lambda (growth arm) must be strictly above the critical rate " +
                         format_double(crit));
            }
            if (!(c.lambda_sub < crit) || c.lambda_sub < 0.0) {
                violated(kind + ": lambda_sub (drain arm) must be in [0, critical rate " +
                         format_double(crit) + ")");
            }
            if (c.scaling_check) {
                if (c.scales.empty()) violated(kind + ": scales must be nonempty");
                for (std::size_t i = 0; i < c.scales.size(); ++i) {
                    if (c.scales[i] < 1) violated(kind + ": scales must be >= 1");
                    if (i > 0 && c.scales[i] <= c.scales[i - 1]) {
                        violated(kind + ": scales must be strictly increasing");
                    }
                }
                if (!(c.scaling_horizon > 0.0)) violated(kind + ": scaling_horizon must be > 0");
                if (!(c.scaling_tolerance > 0.0)) {
                    violated(kind + ": scaling_tolerance must be > 0");
                }
            }
            break;
        }
        case ExperimentKind::infinite_support: {
            if (c.ratio.num <= 0 || c.ratio.num >= c.ratio.den) {
                violated(kind + ": ratio must satisfy 0 < p/q < 1");
            }
            if (c.trunc_radii.size() < 2) violated(kind + ": need at least two truncation radii");
            for (std::size_t i = 0; i < c.trunc_radii.size(); ++i) {
                if (c.trunc_radii[i] < 1) violated(kind + ": truncation radii must be >= 1");
                if (i > 0 && c.trunc_radii[i] <= c.trunc_radii[i - 1]) {
                    violated(kind + ": truncation radii must be strictly increasing");
                }
            }
            require_torus_fits(c.n, c.trunc_radii.back());
            if (!(c.path_horizon > 0.0)) violated(kind + ": path_horizon must be > 0");
            if (c.burn_in < 0.0) violated(kind + ": burn_in must be >= 0");
            if (!(c.horizon > 0.0)) violated(kind + ": horizon must be > 0");
            if (c.batches < 20) violated(kind + ": batches must be >= 20");
            if (!(c.mean_tolerance > 0.0)) violated(kind + ": mean_tolerance must be > 0");
            if (c.identity_fraction < 0.0 || c.identity_fraction > 1.0) {
                violated(kind + ": identity_fraction must be in [0, 1]");
            }
            if (c.mean_seeds < 1) violated(kind + ": mean_seeds must be >= 1");
            // The reference mean uses the untruncated weight sum; it must be
            // subcritical for the full family.
            const double full_sum =
                1.0 + 2.0 * (static_cast<double>(c.ratio.num) /
                             static_cast<double>(c.ratio.den - c.ratio.num));
            if (!(c.lambda * full_sum < 1.0)) {
                violated(kind + ": lambda must be strictly below 1/" + format_double(full_sum) +
                         " (untruncated weight sum)");
            }
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// Shared report plumbing.

std::string replay_for(const ExperimentConfig& c, std::uint64_t seed) {
    const std::string path = c.source_path.empty() ? "<config>" : c.source_path;
    return "iqnet run " + path + " --seed " + std::to_string(seed);
}

void add_failure(ExperimentReport& report, const ExperimentConfig& c, std::uint64_t seed,
                 const std::string& reason) {
    report.failures.push_back(SeedFailure{seed, reason, replay_for(c, seed)});
}

ordered_json seeds_json(const std::vector<std::uint64_t>& seeds) {
    ordered_json arr = ordered_json::array();
    for (std::uint64_t s : seeds) arr.push_back(std::to_string(s));
    return arr;
}

struct Pooled {
    double estimate = 0.0;
    double half_width = 0.0;
};

// Equal-weight pooling of independent per-seed estimates; half-widths add in
// quadrature.
Pooled pool(const std::vector<std::pair<double, double>>& parts) {
    Pooled p;
    if (parts.empty()) return p;
    double sq = 0.0;
    for (const auto& [est, hw] : parts) {
        p.estimate += est;
        sq += hw * hw;
    }
    p.estimate /= static_cast<double>(parts.size());
    p.half_width = std::sqrt(sq) / static_cast<double>(parts.size());
    return p;
}

void finalize(ExperimentReport& report, ordered_json& j, std::string csv, bool pass) {
    ordered_json fails = ordered_json::array();
    for (const SeedFailure& f : report.failures) {
        fails.push_back(ordered_json{
            {"seed", std::to_string(f.seed)}, {"reason", f.reason}, {"replay", f.replay}});
    }
    j["failures"] = fails;
    j["pass"] = pass;
    report.pass = pass;
    report.json = j.dump(2) + "\n";
    report.csv = std::move(csv);
}

ordered_json base_inputs(const ExperimentConfig& c) {
    ordered_json in;
    in["interference"] = c.interference_text;
    in["dimension"] = c.dimension;
    in["lambda"] = c.lambda;
    in["seeds"] = seeds_json(c.seeds);
    return in;
}

DynamicsConfig torus_config(const ExperimentConfig& c) {
    DynamicsConfig dc;
    dc.seq = c.seq;
    dc.lambda = c.lambda;
    dc.index = IndexSpec::torus(c.n);
    return dc;
}

QueueState materialize(int d, const IndexSpec& index, const InitialCondition& initial,
                       std::uint64_t seed) {
    QueueState st;
    st.d = d;
    st.index = index;
    st.sites = index_sites(index, d);
    st.counts.reserve(st.sites.size());
    for (const Offset& site : st.sites) st.counts.push_back(initial.value_at(site, seed));
    return st;
}

// ---------------------------------------------------------------------------
// Kind runners.

void run_mean_vs_formula(const ExperimentConfig& c, ExperimentReport& report) {
    const double reference = closed_form_mean(c.seq, c.lambda);
    const DynamicsConfig dc = torus_config(c);

    std::ostringstream csv;
    csv << "seed,mean,half_width\n";
    ordered_json per_seed = ordered_json::array();
    std::vector<std::pair<double, double>> parts;
    std::uint64_t worst_seed = c.seeds.front();
    double worst_dev = -1.0;
    for (std::uint64_t seed : c.seeds) {
        const StatReport r = ergodic_estimates(dc, seed, c.burn_in, c.horizon, c.batches, {});
        parts.emplace_back(r.mean, r.mean_half_width);
        csv << seed << "," << format_double(r.mean) << "," << format_double(r.mean_half_width)
            << "\n";
        per_seed.push_back(ordered_json{{"seed", std::to_string(seed)},
                                        {"mean", r.mean},
                                        {"half_width", r.mean_half_width}});
        const double dev = std::abs(r.mean - reference);
        if (dev > worst_dev) {
            worst_dev = dev;
            worst_seed = seed;
        }
    }
    const Pooled p = pool(parts);
    const double rel = std::abs(p.estimate - reference) / std::abs(reference);
    const bool mean_ok = rel <= c.tolerance;
    if (!mean_ok) {
        add_failure(report, c, worst_seed,
                    "pooled mean " + format_double(p.estimate) + " vs reference " +
                        format_double(reference) + ": relative error " + format_double(rel) +
                        " > tolerance " + format_double(c.tolerance));
    }

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["n"] = c.n;
    in["burn_in"] = c.burn_in;
    in["horizon"] = c.horizon;
    in["batches"] = c.batches;
    in["tolerance"] = c.tolerance;
    j["inputs"] = in;
    j["results"] = ordered_json{{"per_seed", per_seed},
                                {"pooled_mean", p.estimate},
                                {"pooled_half_width", p.half_width},
                                {"reference", reference},
                                {"relative_error", rel}};
    j["verdicts"] = ordered_json{{"mean_ok", mean_ok}};
    finalize(report, j, csv.str(), mean_ok);
}

void run_covariance_figure(const ExperimentConfig& c, ExperimentReport& report) {
    const double reference = closed_form_mean(c.seq, c.lambda);
    const DynamicsConfig dc = torus_config(c);
    std::vector<int> lags(static_cast<std::size_t>(c.max_lag) + 1);
    for (int l = 0; l <= c.max_lag; ++l) lags[static_cast<std::size_t>(l)] = l;

    std::vector<std::pair<double, double>> mean_parts;
    std::vector<std::vector<std::pair<double, double>>> lag_parts(lags.size());
    std::vector<std::vector<std::pair<double, double>>> emp_parts(lags.size());
    for (std::uint64_t seed : c.seeds) {
        const StatReport r = ergodic_estimates(dc, seed, c.burn_in, c.horizon, c.batches, lags);
        mean_parts.emplace_back(r.mean, r.mean_half_width);
        for (std::size_t k = 0; k < lags.size(); ++k) {
            lag_parts[k].emplace_back(r.covariance[k].estimate, r.covariance[k].half_width);
            emp_parts[k].emplace_back(r.covariance[k].empirical_estimate,
                                      r.covariance[k].empirical_half_width);
        }
    }
    const Pooled mean = pool(mean_parts);
    std::vector<Pooled> curve(lags.size()), emp(lags.size());
    for (std::size_t k = 0; k < lags.size(); ++k) {
        curve[k] = pool(lag_parts[k]);
        emp[k] = pool(emp_parts[k]);
    }

    std::ostringstream csv;
    csv << "lag,estimate,half_width,empirical_estimate,empirical_half_width\n";
    ordered_json per_lag = ordered_json::array();
    for (std::size_t k = 0; k < lags.size(); ++k) {
        csv << lags[k] << "," << format_double(curve[k].estimate) << ","
            << format_double(curve[k].half_width) << "," << format_double(emp[k].estimate) << ","
            << format_double(emp[k].half_width) << "\n";
        per_lag.push_back(ordered_json{{"lag", lags[k]},
                                       {"estimate", curve[k].estimate},
                                       {"half_width", curve[k].half_width},
                                       {"empirical_estimate", emp[k].estimate},
                                       {"empirical_half_width", emp[k].half_width}});
    }

    const double rel = std::abs(mean.estimate - reference) / std::abs(reference);
    const bool mean_ok = rel <= c.tolerance;
    const bool lag0_positive = curve[0].estimate > 0.0;
    bool lags_ok = true;
    for (std::size_t k = 0; k < lags.size(); ++k) {
        if (curve[k].estimate <= -3.0 * curve[k].half_width) lags_ok = false;
    }
    const bool decay_ok =
        c.max_lag < 10 || curve[0].estimate > curve[10].estimate;
    const bool pass = mean_ok && lag0_positive && lags_ok && decay_ok;
    if (!pass) {
        std::string reason = "covariance verdicts:";
        if (!mean_ok) reason += " pooled mean off by " + format_double(rel);
        if (!lag0_positive) reason += " lag-0 not positive";
        if (!lags_ok) reason += " a lag fell below -3 half-widths";
        if (!decay_ok) reason += " lag-0 <= lag-10";
        add_failure(report, c, c.seeds.front(), reason);
    }

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["n"] = c.n;
    in["burn_in"] = c.burn_in;
    in["horizon"] = c.horizon;
    in["batches"] = c.batches;
    in["tolerance"] = c.tolerance;
    in["max_lag"] = c.max_lag;
    j["inputs"] = in;
    j["results"] = ordered_json{{"pooled_mean", mean.estimate},
                                {"pooled_half_width", mean.half_width},
                                {"reference", reference},
                                {"relative_error", rel},
                                {"curve", per_lag}};
    j["verdicts"] = ordered_json{{"mean_ok", mean_ok},
                                 {"lag0_positive", lag0_positive},
                                 {"lags_above_minus_3hw", lags_ok},
                                 {"lag0_gt_lag10", decay_ok}};
    finalize(report, j, csv.str(), pass);
}

void run_moment_bounds(const ExperimentConfig& c, ExperimentReport& report) {
    const SecondMomentBound bound = second_moment_bound(c.seq, c.lambda);
    const DynamicsConfig dc = torus_config(c);

    std::vector<std::pair<double, double>> second_parts, k_parts;
    std::vector<double> k_means, k_hws;
    long long floor_violations = 0;
    long long floor_events = 0;

    std::ostringstream csv;
    csv << "seed,second_moment,second_half_width,k_mean,k_half_width,floor_violations\n";

    double k_bound = 0.0;
    DynamicsConfig dck = dc;
    dck.K = c.K;
    if (c.K > 0) k_bound = k_shifted_mean_bound(c.seq, c.lambda, c.K);

    for (std::uint64_t seed : c.seeds) {
        const StatReport r = ergodic_estimates(dc, seed, c.burn_in, c.horizon, c.batches, {});
        second_parts.emplace_back(r.second_moment, r.second_moment_half_width);
        std::string k_mean_cell, k_hw_cell, floor_cell;
        if (c.K > 0) {
            const StatReport rk =
                ergodic_estimates(dck, seed, c.burn_in, c.horizon, c.batches, {});
            k_parts.emplace_back(rk.mean, rk.mean_half_width);
            k_mean_cell = format_double(rk.mean);
            k_hw_cell = format_double(rk.mean_half_width);

            // Event-by-event audit: no accepted departure may leave a site at
            // or below the floor.
            DynamicsConfig dcf = dck;
            dcf.index = IndexSpec::torus(c.floor_n);
            const DrivingStream stream(seed, c.lambda);
            QueueState st = materialize(c.dimension, dcf.index, InitialCondition::zero(), seed);
            long long violations = 0;
            for (const Event& e :
                 events_in(stream, st.sites, 0.0, c.floor_horizon)) {
                const long long pre = st.count_at(e.site);
                st = apply_event(st, dcf, e);
                ++floor_events;
                if (e.kind == EventKind::potential_departure && st.count_at(e.site) < pre &&
                    pre <= c.K) {
                    ++violations;
                }
            }
            floor_violations += violations;
            floor_cell = std::to_string(violations);
            if (violations > 0) {
                add_failure(report, c, seed,
                            std::to_string(violations) + " departures below the floor K=" +
                                std::to_string(c.K));
            }
        }
        csv << seed << "," << format_double(r.second_moment) << ","
            << format_double(r.second_moment_half_width) << "," << k_mean_cell << "," << k_hw_cell
            << "," << floor_cell << "\n";
    }

    const Pooled second = pool(second_parts);
    const bool second_ok = second.estimate <= bound.bound + 3.0 * second.half_width;
    if (!second_ok) {
        add_failure(report, c, c.seeds.front(),
                    "pooled second moment " + format_double(second.estimate) + " above bound " +
                        format_double(bound.bound) + " + 3 half-widths");
    }
    bool k_ok = true;
    Pooled kp;
    if (c.K > 0) {
        kp = pool(k_parts);
        k_ok = kp.estimate <= k_bound + 3.0 * kp.half_width;
        if (!k_ok) {
            add_failure(report, c, c.seeds.front(),
                        "pooled floor-shifted mean " + format_double(kp.estimate) +
                            " above bound " + format_double(k_bound) + " + 3 half-widths");
        }
    }
    const bool floor_ok = floor_violations == 0;
    const bool pass = second_ok && k_ok && floor_ok;

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["n"] = c.n;
    in["burn_in"] = c.burn_in;
    in["horizon"] = c.horizon;
    in["batches"] = c.batches;
    in["K"] = c.K;
    in["floor_n"] = c.floor_n;
    in["floor_horizon"] = c.floor_horizon;
    j["inputs"] = in;
    ordered_json results;
    results["second_moment"] = second.estimate;
    results["second_half_width"] = second.half_width;
    results["second_moment_bound"] =
        ordered_json{{"c", bound.c}, {"threshold", bound.threshold}, {"bound", bound.bound}};
    if (c.K > 0) {
        results["k_mean"] = kp.estimate;
        results["k_half_width"] = kp.half_width;
        results["k_bound"] = k_bound;
        results["floor_events"] = floor_events;
        results["floor_violations"] = floor_violations;
    }
    j["results"] = results;
    ordered_json verdicts;
    verdicts["second_moment_ok"] = second_ok;
    if (c.K > 0) {
        verdicts["k_mean_ok"] = k_ok;
        verdicts["floor_ok"] = floor_ok;
    }
    j["verdicts"] = verdicts;
    finalize(report, j, csv.str(), pass);
}

void run_coupling_suite(const ExperimentConfig& c, ExperimentReport& report) {
    const DynamicsConfig dc = torus_config(c);

    // Arrival suppression set: the origin's closed unit ball, clipped to the
    // index set.
    std::set<Offset> suppressed;
    suppressed.insert(Offset(static_cast<std::size_t>(c.dimension), 0));
    for (int axis = 0; axis < c.dimension; ++axis) {
        for (int sgn : {-1, 1}) {
            if (c.n < 1) continue;
            Offset o(static_cast<std::size_t>(c.dimension), 0);
            o[static_cast<std::size_t>(axis)] = sgn;
            suppressed.insert(o);
        }
    }

    struct Check {
        const char* name;
        std::vector<CoupledSpec> specs;
    };
    std::vector<Check> checks;
    checks.push_back({"ordered_initials",
                      {{dc, InitialCondition::zero()},
                       {dc, InitialCondition::constant_level(c.initial_high)}}});
    DynamicsConfig dc_sup = dc;
    dc_sup.suppressed = suppressed;
    checks.push_back(
        {"arrival_suppression",
         {{dc_sup, InitialCondition::zero()}, {dc, InitialCondition::zero()}}});
    DynamicsConfig dc_box = dc;
    dc_box.index = IndexSpec::box(c.n);
    checks.push_back(
        {"box_vs_torus", {{dc_box, InitialCondition::zero()}, {dc, InitialCondition::zero()}}});

    std::ostringstream csv;
    csv << "seed,check,events,violations\n";
    ordered_json per_run = ordered_json::array();
    bool pass = true;
    for (std::uint64_t seed : c.seeds) {
        const DrivingStream stream(seed, c.lambda);
        for (const Check& check : checks) {
            const CoupledResult r =
                coupled_run(check.specs, stream, 0.0, c.horizon, {{0, 1}}, false);
            const long long violations = static_cast<long long>(r.violations.size());
            csv << seed << "," << check.name << "," << r.events_checked << "," << violations
                << "\n";
            per_run.push_back(ordered_json{{"seed", std::to_string(seed)},
                                           {"check", check.name},
                                           {"events", r.events_checked},
                                           {"violations", violations}});
            if (violations > 0) {
                pass = false;
                const OrderingViolation& v = r.violations.front();
                add_failure(report, c, seed,
                            std::string(check.name) + ": ordering violated at t=" +
                                format_double(v.time) + " site " + offset_to_string(v.site));
            }
            if (static_cast<double>(r.events_checked) < c.min_events) {
                pass = false;
                add_failure(report, c, seed,
                            std::string(check.name) + ": only " +
                                std::to_string(r.events_checked) + " events, need >= " +
                                format_double(c.min_events));
            }
        }
    }

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["n"] = c.n;
    in["horizon"] = c.horizon;
    in["min_events"] = c.min_events;
    in["initial_high"] = c.initial_high;
    j["inputs"] = in;
    j["results"] = ordered_json{{"runs", per_run}};
    j["verdicts"] = ordered_json{{"zero_violations", pass}};
    finalize(report, j, csv.str(), pass);
}

void run_loynes(const ExperimentConfig& c, ExperimentReport& report) {
    const Offset origin(static_cast<std::size_t>(c.dimension), 0);

    std::ostringstream csv;
    csv << "seed,radius,depth,value\n";
    long long radius_violations = 0;
    int converged_largest = 0;
    std::map<int, int> converged_by_radius;
    ordered_json per_seed = ordered_json::array();
    bool audit_ok = true;

    for (std::uint64_t seed : c.seeds) {
        std::vector<std::vector<long long>> ladders;
        ordered_json seed_entry;
        seed_entry["seed"] = std::to_string(seed);
        ordered_json radii_json = ordered_json::array();
        for (int radius : c.radii) {
            DynamicsConfig dc;
            dc.seq = c.seq;
            dc.lambda = c.lambda;
            dc.index = IndexSpec::box(radius);
            LoynesSample ls;
            try {
                ls = loynes_sample(dc, {origin}, c.base_depth, c.max_doublings, seed, false);
            } catch (const IqnetError& e) {
                audit_ok = false;
                add_failure(report, c, seed,
                            std::string("backward-sampling audit failed at radius ") +
                                std::to_string(radius) + ": " + e.what());
                continue;
            }
            for (std::size_t k = 0; k < ls.depths.size(); ++k) {
                csv << seed << "," << radius << "," << format_double(ls.depths[k]) << ","
                    << ls.values[0][k] << "\n";
            }
            if (ls.converged[0]) {
                ++converged_by_radius[radius];
                if (radius == c.radii.back()) ++converged_largest;
            }
            radii_json.push_back(ordered_json{{"radius", radius},
                                              {"depths_run", ls.depths.size()},
                                              {"final_value", ls.final_values[0]},
                                              {"converged", static_cast<bool>(ls.converged[0])}});
            ladders.push_back(ls.values[0]);
        }
        // Widening the box can only raise the value at every matching depth.
        for (std::size_t r = 0; r + 1 < ladders.size(); ++r) {
            const std::size_t common = std::min(ladders[r].size(), ladders[r + 1].size());
            for (std::size_t k = 0; k < common; ++k) {
                if (ladders[r][k] > ladders[r + 1][k]) {
                    ++radius_violations;
                    add_failure(report, c, seed,
                                "value decreased from radius " + std::to_string(c.radii[r]) +
                                    " to " + std::to_string(c.radii[r + 1]) + " at depth index " +
                                    std::to_string(k));
                }
            }
        }
        seed_entry["radii"] = radii_json;
        per_seed.push_back(seed_entry);
    }

    const double fraction =
        static_cast<double>(converged_largest) / static_cast<double>(c.seeds.size());
    const bool radius_ok = radius_violations == 0;
    const bool converged_ok = fraction >= c.convergence_fraction;
    if (!converged_ok) {
        add_failure(report, c, c.seeds.front(),
                    "converged fraction " + format_double(fraction) + " below " +
                        format_double(c.convergence_fraction));
    }
    const bool pass = audit_ok && radius_ok && converged_ok;

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    {
        ordered_json radii = ordered_json::array();
        for (int r : c.radii) radii.push_back(r);
        in["radii"] = radii;
    }
    in["base_depth"] = c.base_depth;
    in["max_doublings"] = c.max_doublings;
    in["convergence_fraction"] = c.convergence_fraction;
    j["inputs"] = in;
    ordered_json by_radius;
    for (int r : c.radii) {
        by_radius[std::to_string(r)] =
            static_cast<double>(converged_by_radius[r]) / static_cast<double>(c.seeds.size());
    }
    j["results"] = ordered_json{{"per_seed", per_seed},
                                {"converged_fraction_largest_radius", fraction},
                                {"converged_fraction_by_radius", by_radius},
                                {"radius_violations", radius_violations}};
    j["verdicts"] = ordered_json{{"depth_monotone", audit_ok},
                                 {"radius_monotone", radius_ok},
                                 {"convergence_ok", converged_ok}};
    finalize(report, j, csv.str(), pass);
}

void run_local_vs_box(const ExperimentConfig& c, ExperimentReport& report) {
    const Offset origin(static_cast<std::size_t>(c.dimension), 0);
    const ConstructionParams params =
        block_length(c.lambda, c.seq.support_radius(), c.dimension, c.safety);

    std::ostringstream csv;
    csv << "seed,local_value,box_value,match\n";
    ordered_json per_seed = ordered_json::array();
    long long matches = 0;
    bool wrote_schedule = false;
    for (std::uint64_t seed : c.seeds) {
        const DrivingStream stream(seed, c.lambda);
        const long long local =
            evaluate(stream, origin, c.horizon, c.initial, params, c.seq, c.start_time);
        const DependencySchedule schedule =
            dependency_schedule(stream, origin, c.horizon, params, c.start_time);
        const long long reference = box_reference_value(stream, schedule, c.initial, c.seq);
        const bool match = local == reference;
        if (match) ++matches;
        csv << seed << "," << local << "," << reference << "," << (match ? 1 : 0) << "\n";
        per_seed.push_back(ordered_json{{"seed", std::to_string(seed)},
                                        {"local", local},
                                        {"box", reference},
                                        {"match", match},
                                        {"blocks", schedule.levels.size()},
                                        {"box_radius", covering_box_radius(schedule)}});
        if (!match) {
            add_failure(report, c, seed,
                        "restricted evaluation " + std::to_string(local) +
                            " != box reference " + std::to_string(reference));
        }
        if (!wrote_schedule && !c.schedule_csv.empty()) {
            std::filesystem::path p(c.schedule_csv);
            if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
            std::ofstream out(p);
            if (!out) {
                fail(ErrorCode::semantic_error, "cannot write schedule CSV to " + c.schedule_csv);
            }
            out << schedule_sizes_csv(schedule);
            wrote_schedule = true;
        }
    }
    const bool pass = matches == static_cast<long long>(c.seeds.size());

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["horizon"] = c.horizon;
    in["safety"] = c.safety;
    in["start_time"] = c.start_time;
    in["initial"] = c.initial_text;
    j["inputs"] = in;
    j["results"] = ordered_json{{"per_seed", per_seed},
                                {"matches", matches},
                                {"total", c.seeds.size()},
                                {"block_length", params.t_hat}};
    j["verdicts"] = ordered_json{{"all_match", pass}};
    finalize(report, j, csv.str(), pass);
}

void run_frozen_wall(const ExperimentConfig& c, ExperimentReport& report) {
    const int w = c.wall_radius;
    const Offset origin{0};
    const Offset adjacent{w - 1};
    const Offset adjacent_neg{-(w - 1)};

    std::vector<double> probe_times = c.checkpoints;
    probe_times.push_back(c.wall_check_time);
    std::sort(probe_times.begin(), probe_times.end());
    probe_times.erase(std::unique(probe_times.begin(), probe_times.end()), probe_times.end());
    const double t_end = probe_times.back() + 1.0;

    DynamicsConfig dc;
    dc.seq = c.seq;
    dc.lambda = c.lambda;
    dc.index = IndexSpec::box(w);
    const long long wall_value = c.wall_infinite ? kInfiniteCount : c.wall_magnitude;
    dc.frozen[Offset{-w}] = wall_value;
    dc.frozen[Offset{w}] = wall_value;

    ProbeSpec probes;
    probes.times = probe_times;
    probes.sites = {origin, adjacent};

    const double mean_count = c.lambda * c.wall_check_time;
    const double sd = 3.0 * std::sqrt(mean_count);

    std::ostringstream csv;
    csv << "seed,time,origin_count,wall_adjacent_count\n";
    ordered_json per_seed = ordered_json::array();
    std::map<double, std::vector<double>> origin_by_checkpoint;
    bool poisson_ok = true;
    bool no_wall_departures = true;

    for (std::uint64_t seed : c.seeds) {
        const DrivingStream stream(seed, c.lambda);
        const RunResult rr = run(dc, InitialCondition::zero(), stream, 0.0, t_end, probes);

        long long wall_count = -1;
        ordered_json row_json = ordered_json::array();
        for (const ProbeSample& s : rr.samples) {
            csv << seed << "," << format_double(s.time) << "," << s.counts[0] << ","
                << s.counts[1] << "\n";
            row_json.push_back(ordered_json{
                {"time", s.time}, {"origin", s.counts[0]}, {"wall_adjacent", s.counts[1]}});
            if (s.time == c.wall_check_time) wall_count = s.counts[1];
            origin_by_checkpoint[s.time].push_back(static_cast<double>(s.counts[0]));
        }

        ordered_json entry;
        entry["seed"] = std::to_string(seed);
        entry["samples"] = row_json;
        if (c.wall_infinite) {
            // Next to an infinite wall the departure rate vanishes, so the
            // count is exactly the arrival count: a Poisson(lambda*T) draw.
            const double delta = static_cast<double>(wall_count) - mean_count;
            const bool ok = std::abs(delta) <= sd;
            entry["wall_adjacent_at_check"] = wall_count;
            entry["poisson_ok"] = ok;
            if (!ok) {
                poisson_ok = false;
                add_failure(report, c, seed,
                            "wall-adjacent count " + std::to_string(wall_count) +
                                " outside 3 standard deviations of " + format_double(mean_count));
            }
            for (const Offset& site : {adjacent, adjacent_neg}) {
                const auto it =
                    std::lower_bound(rr.final_state.sites.begin(), rr.final_state.sites.end(), site);
                const std::size_t rank =
                    static_cast<std::size_t>(it - rr.final_state.sites.begin());
                if (rr.departures_by_site[rank] != 0) {
                    no_wall_departures = false;
                    add_failure(report, c, seed,
                                "accepted departure next to an infinite wall at site " +
                                    offset_to_string(site));
                }
            }
        }
        per_seed.push_back(entry);
    }

    std::vector<double> medians;
    bool median_increasing = true;
    for (std::size_t k = 0; k < c.checkpoints.size(); ++k) {
        medians.push_back(median(origin_by_checkpoint[c.checkpoints[k]]));
        if (k > 0 && !(medians[k] > medians[k - 1])) median_increasing = false;
    }
    if (!median_increasing) {
        add_failure(report, c, c.seeds.front(),
                    "median origin count not strictly increasing across checkpoints");
    }

    const bool pass = median_increasing && (!c.wall_infinite || (poisson_ok && no_wall_departures));

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["wall_radius"] = w;
    in["wall_magnitude"] = c.wall_infinite ? ordered_json("INFINITE")
                                           : ordered_json(c.wall_magnitude);
    {
        ordered_json cps = ordered_json::array();
        for (double t : c.checkpoints) cps.push_back(t);
        in["checkpoints"] = cps;
    }
    in["wall_check_time"] = c.wall_check_time;
    j["inputs"] = in;
    ordered_json med = ordered_json::array();
    for (std::size_t k = 0; k < medians.size(); ++k) {
        med.push_back(ordered_json{{"time", c.checkpoints[k]}, {"median_origin", medians[k]}});
    }
    j["results"] = ordered_json{{"per_seed", per_seed},
                                {"medians", med},
                                {"expected_wall_count", mean_count}};
    ordered_json verdicts;
    if (c.wall_infinite) {
        verdicts["wall_poisson_ok"] = poisson_ok;
        verdicts["no_wall_adjacent_departures"] = no_wall_departures;
    }
    verdicts["median_increasing"] = median_increasing;
    j["verdicts"] = verdicts;
    finalize(report, j, csv.str(), pass);
}

void run_bounded_start(const ExperimentConfig& c, ExperimentReport& report) {
    const DynamicsConfig dc = torus_config(c);
    std::ostringstream csv;
    csv << "seed,start_level,mean,half_width\n";
    std::vector<std::pair<double, double>> hi_parts, lo_parts;
    ordered_json per_seed = ordered_json::array();
    for (std::uint64_t seed : c.seeds) {
        const StatReport hi = ergodic_estimates(dc, seed, c.burn_in, c.horizon, c.batches, {},
                                                InitialCondition::constant_level(c.start_level));
        const StatReport lo = ergodic_estimates(dc, seed, c.burn_in, c.horizon, c.batches, {},
                                                InitialCondition::zero());
        hi_parts.emplace_back(hi.mean, hi.mean_half_width);
        lo_parts.emplace_back(lo.mean, lo.mean_half_width);
        csv << seed << "," << c.start_level << "," << format_double(hi.mean) << ","
            << format_double(hi.mean_half_width) << "\n";
        csv << seed << ",0," << format_double(lo.mean) << "," << format_double(lo.mean_half_width)
            << "\n";
        per_seed.push_back(ordered_json{{"seed", std::to_string(seed)},
                                        {"mean_high_start", hi.mean},
                                        {"half_width_high_start", hi.mean_half_width},
                                        {"mean_zero_start", lo.mean},
                                        {"half_width_zero_start", lo.mean_half_width}});
    }
    const Pooled hi = pool(hi_parts);
    const Pooled lo = pool(lo_parts);
    const double gap = std::abs(hi.estimate - lo.estimate);
    const double allowance = 3.0 * (hi.half_width + lo.half_width);
    const bool pass = gap <= allowance;
    if (!pass) {
        add_failure(report, c, c.seeds.front(),
                    "means from level-" + std::to_string(c.start_level) + " and empty starts differ by " +
                        format_double(gap) + " > " + format_double(allowance));
    }

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["n"] = c.n;
    in["burn_in"] = c.burn_in;
    in["horizon"] = c.horizon;
    in["batches"] = c.batches;
    in["start_level"] = c.start_level;
    j["inputs"] = in;
    j["results"] = ordered_json{{"per_seed", per_seed},
                                {"pooled_mean_high_start", hi.estimate},
                                {"pooled_half_width_high_start", hi.half_width},
                                {"pooled_mean_zero_start", lo.estimate},
                                {"pooled_half_width_zero_start", lo.half_width},
                                {"gap", gap},
                                {"allowance", allowance}};
    j["verdicts"] = ordered_json{{"consistent", pass}};
    finalize(report, j, csv.str(), pass);
}

void run_supercritical_growth(const ExperimentConfig& c, ExperimentReport& report) {
    const DynamicsConfig dc = torus_config(c);
    const std::vector<Offset> sites = index_sites(dc.index, c.dimension);
    std::vector<double> times;
    for (int k = 1; k <= c.sample_count; ++k) {
        times.push_back(c.horizon * static_cast<double>(k) /
                        static_cast<double>(c.sample_count + 1));
    }
    ProbeSpec probes;
    probes.times = times;
    probes.sites = sites;

    std::ostringstream csv;
    csv << "seed,slope,intercept,t_stat\n";
    ordered_json per_seed = ordered_json::array();
    bool pass = true;
    double min_t = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed : c.seeds) {
        const DrivingStream stream(seed, c.lambda);
        const RunResult rr = run(dc, InitialCondition::zero(), stream, 0.0, c.horizon, probes);
        std::vector<double> totals;
        for (const ProbeSample& s : rr.samples) {
            long long total = 0;
            for (long long v : s.counts) total += v;
            totals.push_back(static_cast<double>(total));
        }
        const SlopeFit fit = ols_slope(times, totals);
        min_t = std::min(min_t, fit.t_stat);
        const bool ok = fit.slope > 0.0 && fit.t_stat > 10.0;
        if (!ok) {
            pass = false;
            add_failure(report, c, seed,
                        "total count not confidently growing: slope " + format_double(fit.slope) +
                            ", t-stat " + format_double(fit.t_stat));
        }
        csv << seed << "," << format_double(fit.slope) << "," << format_double(fit.intercept)
            << "," << format_double(fit.t_stat) << "\n";
        per_seed.push_back(ordered_json{{"seed", std::to_string(seed)},
                                        {"slope", fit.slope},
                                        {"intercept", fit.intercept},
                                        {"t_stat", fit.t_stat}});
    }

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["n"] = c.n;
    in["horizon"] = c.horizon;
    in["sample_count"] = c.sample_count;
    j["inputs"] = in;
    j["results"] = ordered_json{{"per_seed", per_seed}, {"min_t_stat", min_t}};
    j["verdicts"] = ordered_json{{"linear_growth", pass}};
    finalize(report, j, csv.str(), pass);
}

void run_fluid_transience(const ExperimentConfig& c, ExperimentReport& report) {
    const FluidState initial = triangle_profile(c.N, 1.0);
    std::vector<double> times;
    for (double t = 0.0; t <= c.fluid_horizon + 1e-12; t += c.sample_interval) times.push_back(t);
    if (times.back() < c.fluid_horizon) times.push_back(c.fluid_horizon);

    const FluidTrajectory traj =
        integrate(initial, c.lambda, c.seq, c.step, c.fluid_horizon, times);
    const FluidVerdict fv = check_trajectory(traj, c.seq, c.lambda);

    const FluidTrajectory halved =
        integrate(initial, c.lambda, c.seq, c.step / 2.0, c.fluid_horizon, times);
    double halving_max = 0.0;
    for (std::size_t k = 0; k < traj.samples.size(); ++k) {
        for (std::size_t i = 0; i < traj.samples[k].y.size(); ++i) {
            halving_max =
                std::max(halving_max, std::abs(traj.samples[k].y[i] - halved.samples[k].y[i]));
        }
    }
    const bool halving_ok = halving_max <= 1e-5;

    const FluidTrajectory drain = integrate(triangle_profile(c.N, 1.0), c.lambda_sub, c.seq,
                                            c.step, c.drain_horizon, {c.drain_horizon});
    const double drain_ratio = total_mass(drain.samples[0]) / total_mass(initial);
    const bool drain_ok = drain_ratio < 1e-2;

    bool scaling_ok = true;
    ordered_json scaling_json = ordered_json::array();
    if (c.scaling_check) {
        std::vector<double> fluid_ts;
        for (double t = 0.5; t <= c.scaling_horizon + 1e-12; t += 0.5) fluid_ts.push_back(t);
        if (fluid_ts.empty() || fluid_ts.back() < c.scaling_horizon) {
            fluid_ts.push_back(c.scaling_horizon);
        }
        const FluidTrajectory ref =
            integrate(initial, c.lambda, c.seq, c.step, c.scaling_horizon, fluid_ts);
        DynamicsConfig dcw;
        dcw.seq = c.seq;
        dcw.lambda = c.lambda;
        dcw.index = IndexSpec::box(c.N);
        const std::vector<Offset> sites = index_sites(dcw.index, 1);
        double worst_last = 0.0;
        for (int z : c.scales) {
            std::map<Offset, long long> start;
            for (int i = -c.N; i <= c.N; ++i) {
                start[Offset{i}] =
                    std::llround(static_cast<double>(z) * initial.at(i));
            }
            ProbeSpec probes;
            for (double t : fluid_ts) probes.times.push_back(static_cast<double>(z) * t);
            probes.sites = sites;
            double err = 0.0;
            for (std::uint64_t seed : c.seeds) {
                const DrivingStream stream(seed, c.lambda);
                const RunResult rr =
                    run(dcw, InitialCondition::from_map(start), stream, 0.0,
                        static_cast<double>(z) * c.scaling_horizon + 1.0, probes);
                for (std::size_t k = 0; k < rr.samples.size(); ++k) {
                    for (std::size_t s = 0; s < sites.size(); ++s) {
                        const double rescaled = static_cast<double>(rr.samples[k].counts[s]) /
                                                static_cast<double>(z);
                        const int coord = sites[s][0];
                        err = std::max(err, std::abs(rescaled - ref.samples[k].at(coord)));
                    }
                }
            }
            scaling_json.push_back(ordered_json{{"scale", z}, {"sup_error", err}});
            worst_last = err;
        }
        scaling_ok = worst_last <= c.scaling_tolerance;
        if (!scaling_ok) {
            add_failure(report, c, c.seeds.front(),
                        "rescaled sample paths deviate from the deterministic profile by " +
                            format_double(worst_last) + " > " +
                            format_double(c.scaling_tolerance));
        }
    }

    if (!fv.unimodality_ok) {
        add_failure(report, c, c.seeds.front(), "a sampled profile lost unimodality");
    }
    if (!fv.j_monotone) {
        add_failure(report, c, c.seeds.front(), "energy functional J decreased between samples");
    }
    if (!fv.slope_bound_ok) {
        add_failure(report, c, c.seeds.front(), "finite-difference dJ/dt fell below the bound");
    }
    if (!halving_ok) {
        add_failure(report, c, c.seeds.front(),
                    "step-halving discrepancy " + format_double(halving_max) + " > 1e-5");
    }
    if (!drain_ok) {
        add_failure(report, c, c.seeds.front(),
                    "drain ratio " + format_double(drain_ratio) + " not below 1e-2");
    }

    const bool pass = fv.unimodality_ok && fv.j_monotone && fv.slope_bound_ok && halving_ok &&
                      drain_ok && scaling_ok;

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["N"] = c.N;
    in["lambda_sub"] = c.lambda_sub;
    in["step"] = c.step;
    in["fluid_horizon"] = c.fluid_horizon;
    in["drain_horizon"] = c.drain_horizon;
    in["sample_interval"] = c.sample_interval;
    in["scaling_check"] = c.scaling_check;
    if (c.scaling_check) {
        ordered_json sc = ordered_json::array();
        for (int z : c.scales) sc.push_back(z);
        in["scales"] = sc;
        in["scaling_horizon"] = c.scaling_horizon;
        in["scaling_tolerance"] = c.scaling_tolerance;
    }
    j["inputs"] = in;
    ordered_json results;
    results["drain_ratio"] = drain_ratio;
    results["halving_max_diff"] = halving_max;
    if (c.scaling_check) results["scaling"] = scaling_json;
    j["results"] = results;
    ordered_json verdicts;
    verdicts["unimodality_ok"] = fv.unimodality_ok;
    verdicts["J_monotone"] = fv.j_monotone;
    verdicts["slope_bound_ok"] = fv.slope_bound_ok;
    verdicts["halving_ok"] = halving_ok;
    verdicts["drain_ok"] = drain_ok;
    if (c.scaling_check) verdicts["scaling_ok"] = scaling_ok;
    j["verdicts"] = verdicts;
    finalize(report, j, trajectory_csv(traj, c.seq), pass);
}

void run_infinite_support(const ExperimentConfig& c, ExperimentReport& report) {
    const int r_small = c.trunc_radii.front();
    const int r_large = c.trunc_radii.back();
    const InterferenceSequence seq_small = geometric_sequence(c.dimension, c.ratio, r_small);
    const InterferenceSequence seq_large = geometric_sequence(c.dimension, c.ratio, r_large);
    const double full_sum = 1.0 + 2.0 * (static_cast<double>(c.ratio.num) /
                                         static_cast<double>(c.ratio.den - c.ratio.num));
    const double reference = c.lambda / (1.0 - c.lambda * full_sum);

    DynamicsConfig dc_small;
    dc_small.seq = seq_small;
    dc_small.lambda = c.lambda;
    dc_small.index = IndexSpec::torus(c.n);
    DynamicsConfig dc_large = dc_small;
    dc_large.seq = seq_large;

    const std::vector<Offset> sites = index_sites(dc_small.index, c.dimension);
    const Offset origin(static_cast<std::size_t>(c.dimension), 0);
    const std::size_t origin_rank = static_cast<std::size_t>(
        std::lower_bound(sites.begin(), sites.end(), origin) - sites.begin());
    const std::size_t n_mean =
        std::min<std::size_t>(static_cast<std::size_t>(c.mean_seeds), c.seeds.size());

    std::ostringstream csv;
    csv << "seed,identical_origin,identical_full,first_origin_divergence,mean,half_width\n";
    ordered_json per_seed = ordered_json::array();
    long long identical_count = 0;
    long long identical_full_count = 0;
    std::vector<std::pair<double, double>> mean_parts;
    for (std::size_t si = 0; si < c.seeds.size(); ++si) {
        const std::uint64_t seed = c.seeds[si];
        const DrivingStream stream(seed, c.lambda);

        QueueState a = materialize(c.dimension, dc_small.index, InitialCondition::zero(), seed);
        QueueState b = a;
        // The truncation-convergence statement is site-wise: the verdict
        // tracks the origin's own path; agreement of the full configuration
        // is recorded as supporting data.
        bool identical = true;
        bool identical_full = true;
        double first_div = 0.0;
        for (const Event& e : events_in(stream, sites, 0.0, c.path_horizon)) {
            a = apply_event(a, dc_small, e);
            b = apply_event(b, dc_large, e);
            if (a.counts != b.counts) identical_full = false;
            if (a.counts[origin_rank] != b.counts[origin_rank]) {
                identical = false;
                first_div = e.time;
                break;
            }
        }
        if (identical) ++identical_count;
        if (identical_full) ++identical_full_count;

        std::string mean_cell, hw_cell;
        ordered_json entry;
        entry["seed"] = std::to_string(seed);
        entry["identical_origin"] = identical;
        entry["identical_full"] = identical_full;
        if (!identical) entry["first_origin_divergence"] = first_div;
        if (si < n_mean) {
            const StatReport r =
                ergodic_estimates(dc_large, seed, c.burn_in, c.horizon, c.batches, {});
            mean_parts.emplace_back(r.mean, r.mean_half_width);
            mean_cell = format_double(r.mean);
            hw_cell = format_double(r.mean_half_width);
            entry["mean"] = r.mean;
            entry["half_width"] = r.mean_half_width;
        }
        csv << seed << "," << (identical ? 1 : 0) << "," << (identical_full ? 1 : 0) << ","
            << (identical ? std::string() : format_double(first_div)) << "," << mean_cell << ","
            << hw_cell << "\n";
        per_seed.push_back(entry);
    }

    const double fraction =
        static_cast<double>(identical_count) / static_cast<double>(c.seeds.size());
    const double fraction_full =
        static_cast<double>(identical_full_count) / static_cast<double>(c.seeds.size());
    const bool paths_ok = fraction >= c.identity_fraction;
    if (!paths_ok) {
        add_failure(report, c, c.seeds.front(),
                    "identical origin-path fraction " + format_double(fraction) + " below " +
                        format_double(c.identity_fraction));
    }
    const Pooled mean = pool(mean_parts);
    const double rel = std::abs(mean.estimate - reference) / std::abs(reference);
    const bool mean_ok = rel <= c.mean_tolerance;
    if (!mean_ok) {
        add_failure(report, c, c.seeds.front(),
                    "pooled mean " + format_double(mean.estimate) + " vs reference " +
                        format_double(reference) + ": relative error " + format_double(rel) +
                        " > " + format_double(c.mean_tolerance));
    }
    const bool pass = paths_ok && mean_ok;

    ordered_json j;
    j["kind"] = experiment_kind_name(c.kind);
    ordered_json in = base_inputs(c);
    in["ratio"] = std::to_string(c.ratio.num) + "/" + std::to_string(c.ratio.den);
    {
        ordered_json radii = ordered_json::array();
        for (int r : c.trunc_radii) radii.push_back(r);
        in["trunc_radii"] = radii;
    }
    in["n"] = c.n;
    in["path_horizon"] = c.path_horizon;
    in["burn_in"] = c.burn_in;
    in["horizon"] = c.horizon;
    in["batches"] = c.batches;
    in["mean_seeds"] = c.mean_seeds;
    in["mean_tolerance"] = c.mean_tolerance;
    in["identity_fraction"] = c.identity_fraction;
    j["inputs"] = in;
    j["results"] = ordered_json{{"per_seed", per_seed},
                                {"identical_fraction_origin", fraction},
                                {"identical_fraction_full", fraction_full},
                                {"pooled_mean", mean.estimate},
                                {"pooled_half_width", mean.half_width},
                                {"reference", reference},
                                {"relative_error", rel}};
    j["verdicts"] = ordered_json{{"paths_identical_ok", paths_ok}, {"mean_ok", mean_ok}};
    finalize(report, j, csv.str(), pass);
}

void write_artifact(const std::string& path, const std::string& content) {
    if (path.empty()) return;
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) fail(ErrorCode::semantic_error, "cannot write artifact to " + path);
    out << content;
}

}  // namespace

const char* experiment_kind_name(ExperimentKind kind) {
    for (const KindName& k : kKindNames) {
        if (k.kind == kind) return k.name;
    }
    return "?";
}

ExperimentKind experiment_kind_from(const std::string& name) {
    std::string valid;
    for (const KindName& k : kKindNames) {
        if (name == k.name) return k.kind;
        valid += std::string(valid.empty() ? "" : ", ") + k.name;
    }
    fail(ErrorCode::parse_error, "unknown experiment kind '" + name + "'; expected one of: " + valid);
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name) {
    try {
        ConfigMap cm(text, source_name);
        ExperimentConfig c;
        c.source_path = source_name == "<memory>" ? "" : source_name;

        const RawEntry* kind_entry = cm.take("kind");
        if (!kind_entry) {
            fail(ErrorCode::parse_error, source_name + ": missing required key 'kind'");
        }
        c.kind = experiment_kind_from(kind_entry->value);

        c.dimension = cm.get_int("dimension", 1);
        c.lambda = cm.get_double("lambda", c.lambda);
        c.seeds = cm.get_seed_list("seeds", {1});
        // Reports are merged per seed in ascending order regardless of how
        // the list was written, so artifacts do not depend on list order.
        std::sort(c.seeds.begin(), c.seeds.end());
        c.out_csv = cm.get_string("out_csv", "");
        c.out_json = cm.get_string("out_json", "");

        if (c.kind != ExperimentKind::infinite_support) {
            c.interference_text = cm.get_string("interference", c.interference_text);
            if (c.dimension < 1 || c.dimension > 3) {
                violated("dimension must be 1, 2 or 3");
            }
            c.seq = parse_interference(c.interference_text, c.dimension);
        }

        switch (c.kind) {
            case ExperimentKind::mean_vs_formula:
                c.n = cm.get_int("n", c.n);
                c.burn_in = cm.get_double("burn_in", c.burn_in);
                c.horizon = cm.get_double("horizon", c.horizon);
                c.batches = cm.get_int("batches", c.batches);
                c.tolerance = cm.get_double("tolerance", 0.03);
                break;
            case ExperimentKind::covariance_figure:
                c.n = cm.get_int("n", 25);
                c.burn_in = cm.get_double("burn_in", c.burn_in);
                c.horizon = cm.get_double("horizon", c.horizon);
                c.batches = cm.get_int("batches", c.batches);
                c.tolerance = cm.get_double("tolerance", 0.10);
                c.max_lag = cm.get_int("max_lag", c.max_lag);
                break;
            case ExperimentKind::moment_bounds:
                c.n = cm.get_int("n", c.n);
                c.burn_in = cm.get_double("burn_in", c.burn_in);
                c.horizon = cm.get_double("horizon", c.horizon);
                c.batches = cm.get_int("batches", c.batches);
                c.K = cm.get_ll("K", c.K);
                c.floor_n = cm.get_int("floor_n", c.floor_n);
                c.floor_horizon = cm.get_double("floor_horizon", c.floor_horizon);
                break;
            case ExperimentKind::coupling_suite:
                c.n = cm.get_int("n", 10);
                c.horizon = cm.get_double("horizon", 1e3);
                c.min_events = cm.get_double("min_events", c.min_events);
                c.initial_high = cm.get_ll("initial_high", c.initial_high);
                break;
            case ExperimentKind::loynes:
                c.radii = cm.get_int_list("radii", c.radii);
                c.base_depth = cm.get_double("base_depth", c.base_depth);
                c.max_doublings = cm.get_int("max_doublings", c.max_doublings);
                c.convergence_fraction =
                    cm.get_double("convergence_fraction", c.convergence_fraction);
                break;
            case ExperimentKind::local_vs_box:
                c.horizon = cm.get_double("horizon", 5.0);
                c.safety = cm.get_double("safety", c.safety);
                c.start_time = cm.get_double("start_time", c.start_time);
                c.initial_text = cm.get_string("initial", c.initial_text);
                c.initial = parse_initial(c.initial_text);
                c.schedule_csv = cm.get_string("schedule_csv", "");
                break;
            case ExperimentKind::frozen_wall: {
                c.wall_radius = cm.get_int("wall_radius", c.wall_radius);
                const std::string mag = cm.get_string("wall_magnitude", "INFINITE");
                if (mag == "INFINITE") {
                    c.wall_infinite = true;
                } else {
                    c.wall_infinite = false;
                    try {
                        std::size_t idx = 0;
                        c.wall_magnitude = std::stoll(mag, &idx);
                        if (idx != mag.size()) throw std::invalid_argument("magnitude");
                    } catch (const std::logic_error&) {
                        fail(ErrorCode::parse_error,
                             "wall_magnitude must be INFINITE or an integer, got '" + mag + "'");
                    }
                }
                c.checkpoints = cm.get_double_list("checkpoints", c.checkpoints);
                c.wall_check_time = cm.get_double("wall_check_time", c.wall_check_time);
                break;
            }
            case ExperimentKind::bounded_start_convergence:
                c.n = cm.get_int("n", c.n);
                c.burn_in = cm.get_double("burn_in", c.burn_in);
                c.horizon = cm.get_double("horizon", c.horizon);
                c.batches = cm.get_int("batches", c.batches);
                c.start_level = cm.get_ll("start_level", c.start_level);
                break;
            case ExperimentKind::supercritical_growth:
                c.n = cm.get_int("n", c.n);
                c.horizon = cm.get_double("horizon", 1e4);
                c.sample_count = cm.get_int("sample_count", c.sample_count);
                break;
            case ExperimentKind::fluid_transience:
                c.lambda = cm.has("lambda") ? c.lambda : 0.4;
                c.N = cm.get_int("N", c.N);
                c.lambda_sub = cm.get_double("lambda_sub", c.lambda_sub);
                c.step = cm.get_double("step", c.step);
                c.fluid_horizon = cm.get_double("fluid_horizon", c.fluid_horizon);
                c.drain_horizon = cm.get_double("drain_horizon", c.drain_horizon);
                c.sample_interval = cm.get_double("sample_interval", c.sample_interval);
                c.scaling_check = cm.get_bool("scaling_check", c.scaling_check);
                c.scales = cm.get_int_list("scales", c.scales);
                c.scaling_horizon = cm.get_double("scaling_horizon", c.scaling_horizon);
                c.scaling_tolerance = cm.get_double("scaling_tolerance", c.scaling_tolerance);
                break;
            case ExperimentKind::infinite_support:
                c.ratio = cm.get_rational("ratio", c.ratio);
                c.trunc_radii = cm.get_int_list("trunc_radii", c.trunc_radii);
                c.n = cm.get_int("n", 20);
                c.path_horizon = cm.get_double("path_horizon", c.path_horizon);
                c.burn_in = cm.get_double("burn_in", c.burn_in);
                c.horizon = cm.get_double("horizon", c.horizon);
                c.batches = cm.get_int("batches", c.batches);
                c.mean_tolerance = cm.get_double("mean_tolerance", c.mean_tolerance);
                c.identity_fraction = cm.get_double("identity_fraction", c.identity_fraction);
                c.mean_seeds = cm.get_int("mean_seeds", c.mean_seeds);
                if (c.ratio.num > 0 && c.ratio.num < c.ratio.den && c.trunc_radii.size() >= 1) {
                    c.seq = geometric_sequence(c.dimension, c.ratio, c.trunc_radii.back());
                    c.interference_text = "geometric(" + std::to_string(c.ratio.num) + "/" +
                                          std::to_string(c.ratio.den) + ", " +
                                          std::to_string(c.trunc_radii.back()) + ")";
                }
                break;
        }
        cm.finish(experiment_kind_name(c.kind));
        validate_config(c);
        return c;
    } catch (const IqnetError& e) {
        if (e.code() == ErrorCode::parse_error || e.code() == ErrorCode::semantic_error) throw;
        // Preconditions of delegated constructors surface with their own
        // codes; the config contract promises a semantic error instead.
        fail(ErrorCode::semantic_error, e.what());
    }
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::parse_error, "cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.kind = config.kind;
    switch (config.kind) {
        case ExperimentKind::mean_vs_formula: run_mean_vs_formula(config, report); break;
        case ExperimentKind::covariance_figure: run_covariance_figure(config, report); break;
        case ExperimentKind::moment_bounds: run_moment_bounds(config, report); break;
        case ExperimentKind::coupling_suite: run_coupling_suite(config, report); break;
        case ExperimentKind::loynes: run_loynes(config, report); break;
        case ExperimentKind::local_vs_box: run_local_vs_box(config, report); break;
        case ExperimentKind::frozen_wall: run_frozen_wall(config, report); break;
        case ExperimentKind::bounded_start_convergence: run_bounded_start(config, report); break;
        case ExperimentKind::supercritical_growth:
            run_supercritical_growth(config, report);
            break;
        case ExperimentKind::fluid_transience: run_fluid_transience(config, report); break;
        case ExperimentKind::infinite_support: run_infinite_support(config, report); break;
    }
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_artifact(config.out_csv, report.csv);
    write_artifact(config.out_json, report.json);
    return report;
}

}  // namespace iqnet
