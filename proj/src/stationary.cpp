#include "iqnet/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "json.hpp"

#include "iqnet/engine.hpp"
#include "iqnet/io_util.hpp"
#include "iqnet/stats.hpp"

namespace iqnet {

namespace {

long long wrap_first_coord(long long c, int n) {
    const long long m = 2LL * n + 1;
    return ((c + n) % m + m) % m - n;
}

// Accumulates time integrals of site-averaged count moments, lagged products,
// and the rate-conservation functionals, split into non-overlapping batches
// over the stationary window.
class ErgodicObserver {
public:
    ErgodicObserver(EngineSystem& sys, const Universe& uni, const std::vector<int>& lags,
                    double burn_end, double t_end, int batches)
        : sys_(sys),
          lags_(lags),
          burn_end_(burn_end),
          t_end_(t_end),
          batches_(batches),
          batch_len_((t_end - burn_end) / batches) {
        const int M = static_cast<int>(sys.sites().size());
        M_ = M;
        mirror_.assign(sys.counts().begin(), sys.counts().end());
        for (long long c : mirror_) {
            s1_ += c;
            s2_ += c * c;
        }
        const int n = sys.config().index.n;
        const int d = sys.config().seq.dimension();

        nbr_plus_.assign(lags.size(), std::vector<int>(static_cast<std::size_t>(M)));
        nbr_minus_.assign(lags.size(), std::vector<int>(static_cast<std::size_t>(M)));
        p_.assign(lags.size(), 0);
        for (std::size_t l = 0; l < lags.size(); ++l) {
            for (int i = 0; i < M; ++i) {
                Offset s = uni.sites[static_cast<std::size_t>(i)];
                Offset sp = s, sm = s;
                sp[0] = wrap_first_coord(s[0] + lags[l], n);
                sm[0] = wrap_first_coord(s[0] - lags[l], n);
                nbr_plus_[l][static_cast<std::size_t>(i)] = sys.local_rank(sp);
                nbr_minus_[l][static_cast<std::size_t>(i)] = sys.local_rank(sm);
            }
            if (lags[l] > 0) {
                long long acc = 0;
                for (int i = 0; i < M; ++i)
                    acc += mirror_[static_cast<std::size_t>(i)] *
                           mirror_[nbr_plus_[l][static_cast<std::size_t>(i)]];
                p_[l] = acc;
            }
        }

        origin_.assign(static_cast<std::size_t>(d), 0);
        r0_ = sys.local_rank(origin_);

        for (const auto& [off, w] : sys.config().seq.entries()) {
            Offset site(static_cast<std::size_t>(d));
            for (int k = 0; k < d; ++k)
                site[static_cast<std::size_t>(k)] =
                    wrap_first_coord(off[static_cast<std::size_t>(k)], n);
            // wrap_first_coord is the plain centered residue, valid per axis
            SupportSite ss;
            ss.rank = sys.local_rank(site);
            ss.weight = w;
            ss.is_center = true;
            for (long long c : off) ss.is_center = ss.is_center && c == 0;
            support_.push_back(ss);
        }

        near_.assign(static_cast<std::size_t>(M), 0);
        const int reach = 2 * sys.config().seq.support_radius();
        mark_near(Offset(static_cast<std::size_t>(d), 0), 0, reach, n);

        i_s1_.assign(static_cast<std::size_t>(batches), 0.0);
        i_s2_.assign(static_cast<std::size_t>(batches), 0.0);
        i_p_.assign(lags.size(), std::vector<double>(static_cast<std::size_t>(batches), 0.0));
        i_r0_.assign(static_cast<std::size_t>(batches), 0.0);
        i_lhs_.assign(static_cast<std::size_t>(batches), 0.0);
        i_rhs_.assign(static_cast<std::size_t>(batches), 0.0);
        i_bound_.assign(static_cast<std::size_t>(batches) + 1, 0.0);
        refresh_rates();
    }

    void segment(double a, double b) {
        while (next_boundary_ <= batches_ && boundary(next_boundary_) <= b) {
            if (boundary(next_boundary_) >= a) {
                i_bound_[static_cast<std::size_t>(next_boundary_)] = eval_i();
                ++next_boundary_;
            } else {
                break;
            }
        }
        double lo = std::max(a, burn_end_);
        const double hi_all = std::min(b, t_end_);
        while (lo < hi_all) {
            int ib = static_cast<int>((lo - burn_end_) / batch_len_);
            ib = std::clamp(ib, 0, batches_ - 1);
            const double hi = std::min(hi_all, burn_end_ + batch_len_ * (ib + 1));
            const double dt = hi - lo;
            if (dt <= 0.0) break;
            const auto bi = static_cast<std::size_t>(ib);
            i_s1_[bi] += static_cast<double>(s1_) * dt;
            i_s2_[bi] += static_cast<double>(s2_) * dt;
            for (std::size_t l = 0; l < lags_.size(); ++l)
                i_p_[l][bi] += static_cast<double>(lags_[l] == 0 ? s2_ : p_[l]) * dt;
            i_r0_[bi] += r0_rate_ * dt;
            i_lhs_[bi] += lhs_rate_ * dt;
            i_rhs_[bi] += rhs_rate_ * dt;
            lo = hi;
        }
    }

    void event(const EngineEvent& e, const Universe&) {
        const int i = e.u;
        const auto ii = static_cast<std::size_t>(i);
        const long long c_new = sys_.count_local(i);
        const long long c_old = mirror_[ii];
        const long long delta = c_new - c_old;
        if (delta == 0) return;
        s1_ += delta;
        s2_ += c_new * c_new - c_old * c_old;
        for (std::size_t l = 0; l < lags_.size(); ++l) {
            if (lags_[l] == 0) continue;
            p_[l] += delta * (mirror_[static_cast<std::size_t>(nbr_plus_[l][ii])] +
                              mirror_[static_cast<std::size_t>(nbr_minus_[l][ii])]);
        }
        mirror_[ii] = c_new;
        if (i == r0_ && delta < 0 && e.time >= burn_end_ && e.time < t_end_) ++origin_accepts_;
        if (near_[ii] != 0) refresh_rates();
    }

    // Accessors for report assembly.
    int batches() const { return batches_; }
    double batch_len() const { return batch_len_; }
    int site_count() const { return M_; }
    const std::vector<double>& i_s1() const { return i_s1_; }
    const std::vector<double>& i_s2() const { return i_s2_; }
    const std::vector<std::vector<double>>& i_p() const { return i_p_; }
    const std::vector<double>& i_r0() const { return i_r0_; }
    const std::vector<double>& i_lhs() const { return i_lhs_; }
    const std::vector<double>& i_rhs() const { return i_rhs_; }
    const std::vector<double>& i_bound() const { return i_bound_; }
    long long origin_accepts() const { return origin_accepts_; }

private:
    struct SupportSite {
        int rank = -1;
        double weight = 0.0;
        bool is_center = false;
    };

    double boundary(int k) const {
        return k == batches_ ? t_end_ : burn_end_ + batch_len_ * k;
    }

    // I(t) = x_0 * sum_j a_j x_j with torus neighbor arithmetic.
    double eval_i() const {
        double acc = 0.0;
        for (const SupportSite& ss : support_)
            acc += ss.weight * static_cast<double>(mirror_[static_cast<std::size_t>(ss.rank)]);
        return static_cast<double>(mirror_[static_cast<std::size_t>(r0_)]) * acc;
    }

    void refresh_rates() {
        r0_rate_ = sys_.departure_probability_local(r0_);
        const double x0 = static_cast<double>(mirror_[static_cast<std::size_t>(r0_)]);
        double lhs = 0.0;
        double rhs = 0.0;
        for (const SupportSite& ss : support_) {
            if (ss.is_center) continue;
            lhs += sys_.departure_probability_local(ss.rank) * ss.weight * x0;
            rhs += r0_rate_ * ss.weight *
                   static_cast<double>(mirror_[static_cast<std::size_t>(ss.rank)]);
        }
        lhs_rate_ = lhs;
        rhs_rate_ = rhs;
    }

    // Marks every site within L-infinity distance `reach` of the origin.
    void mark_near(Offset cur, int axis, int reach, int n) {
        const int d = static_cast<int>(cur.size());
        if (axis == d) {
            near_[static_cast<std::size_t>(sys_.local_rank(cur))] = 1;
            return;
        }
        for (int c = -reach; c <= reach; ++c) {
            cur[static_cast<std::size_t>(axis)] = wrap_first_coord(c, n);
            mark_near(cur, axis + 1, reach, n);
        }
    }

    EngineSystem& sys_;
    std::vector<int> lags_;
    double burn_end_;
    double t_end_;
    int batches_;
    double batch_len_;
    int M_ = 0;

    std::vector<long long> mirror_;
    long long s1_ = 0;
    long long s2_ = 0;
    std::vector<long long> p_;
    std::vector<std::vector<int>> nbr_plus_;
    std::vector<std::vector<int>> nbr_minus_;

    Offset origin_;
    int r0_ = -1;
    std::vector<SupportSite> support_;
    std::vector<char> near_;
    double r0_rate_ = 0.0;
    double lhs_rate_ = 0.0;
    double rhs_rate_ = 0.0;

    std::vector<double> i_s1_, i_s2_;
    std::vector<std::vector<double>> i_p_;
    std::vector<double> i_r0_, i_lhs_, i_rhs_;
    std::vector<double> i_bound_;
    int next_boundary_ = 0;
    long long origin_accepts_ = 0;
};

}  // namespace

LoynesSample loynes_sample(const DynamicsConfig& config, const std::vector<Offset>& sites,
                           double base_depth, int max_doublings, std::uint64_t seed,
                           bool require_converged) {
    if (config.index.mode == IndexMode::restricted) {
        fail(ErrorCode::semantic_error, "backward sampling needs a box or torus index set");
    }
    if (sites.empty()) fail(ErrorCode::semantic_error, "no monitored sites given");
    if (!(base_depth > 0.0) || !std::isfinite(base_depth)) {
        fail(ErrorCode::semantic_error, "base depth must be positive and finite");
    }
    if (max_doublings < 0) fail(ErrorCode::semantic_error, "max doublings must be >= 0");

    const int d = config.seq.dimension();
    {
        const std::vector<Offset> all = index_sites(config.index, d);
        for (const Offset& s : sites) {
            if (!std::binary_search(all.begin(), all.end(), s)) {
                fail(ErrorCode::site_out_of_range, "monitored site outside the index set");
            }
        }
    }

    DrivingStream stream(seed, config.lambda);
    LoynesSample out;
    out.sites = sites;
    out.values.assign(sites.size(), {});
    out.converged.assign(sites.size(), 0);

    for (int k = 0; k <= max_doublings; ++k) {
        const double depth = base_depth * std::ldexp(1.0, k);
        const RunResult r = run(config, InitialCondition::zero(), stream, -depth, 0.0);
        out.depths.push_back(depth);
        for (std::size_t s = 0; s < sites.size(); ++s) {
            const long long v = r.final_state.count_at(sites[s]);
            if (!out.values[s].empty() && v < out.values[s].back()) {
                fail(ErrorCode::ordering_violation,
                     "backward-sampling value decreased with past depth at " +
                         offset_to_string(sites[s]));
            }
            out.values[s].push_back(v);
        }
        if (config.lambda == 0.0) {
            // No arrivals can ever occur: the all-zero start stays zero at
            // every depth, so deeper runs are provably identical.
            for (std::size_t s = 0; s < sites.size(); ++s) out.converged[s] = 1;
            break;
        }
        if (k >= 2) {
            bool all = true;
            for (std::size_t s = 0; s < sites.size(); ++s) {
                const auto& v = out.values[s];
                const std::size_t m = v.size();
                out.converged[s] = (v[m - 1] == v[m - 2] && v[m - 2] == v[m - 3]) ? 1 : 0;
                all = all && out.converged[s] != 0;
            }
            if (all) break;
        }
    }

    out.final_values.reserve(sites.size());
    bool all = true;
    for (std::size_t s = 0; s < sites.size(); ++s) {
        out.final_values.push_back(out.values[s].back());
        all = all && out.converged[s] != 0;
    }
    out.all_converged = all;
    if (require_converged && !all) {
        fail(ErrorCode::not_converged,
             "backward-sampling values still growing at maximum past depth " +
                 format_double(out.depths.back()));
    }
    return out;
}

StatReport ergodic_estimates(const DynamicsConfig& config, std::uint64_t seed, double burn_in,
                             double horizon, int batch_count, const std::vector<int>& lags,
                             const InitialCondition& initial) {
    if (config.index.mode != IndexMode::torus) {
        fail(ErrorCode::semantic_error, "long-run estimates need a torus index set");
    }
    if (!config.frozen.empty()) {
        fail(ErrorCode::semantic_error, "long-run estimates do not support pinned sites");
    }
    if (!(burn_in >= 0.0) || !(horizon > 0.0) || !std::isfinite(burn_in) || !std::isfinite(horizon)) {
        fail(ErrorCode::semantic_error, "need burn-in >= 0 and horizon > 0");
    }
    if (batch_count < 20) {
        fail(ErrorCode::insufficient_batches,
             "need at least 20 batches, got " + std::to_string(batch_count));
    }
    const long long m = 2LL * config.index.n + 1;
    for (int lag : lags) {
        if (lag < 0 || 2LL * lag >= m) {
            fail(ErrorCode::semantic_error,
                 "covariance lag " + std::to_string(lag) + " does not fit the torus");
        }
    }

    EngineSystem sys(config, initial, seed);
    std::vector<const std::vector<Offset>*> lists{&sys.sites()};
    const Universe uni = make_universe(lists, config.seq.dimension());
    sys.bind_universe(uni);

    DrivingStream stream(seed, config.lambda);
    const double t_end = burn_in + horizon;
    ErgodicObserver obs(sys, uni, lags, burn_in, t_end, batch_count);
    drive(stream, uni, {&sys}, 0.0, t_end, obs);

    const double bl = obs.batch_len();
    const double msites = static_cast<double>(obs.site_count());
    const int nb = obs.batches();

    std::vector<double> mean_b(static_cast<std::size_t>(nb));
    std::vector<double> second_b(static_cast<std::size_t>(nb));
    std::vector<double> r0_b(static_cast<std::size_t>(nb));
    std::vector<double> lhs_b(static_cast<std::size_t>(nb));
    std::vector<double> rhs_b(static_cast<std::size_t>(nb));
    std::vector<double> resid_b(static_cast<std::size_t>(nb));
    std::vector<double> drift_b(static_cast<std::size_t>(nb));
    for (int b = 0; b < nb; ++b) {
        const auto bi = static_cast<std::size_t>(b);
        mean_b[bi] = obs.i_s1()[bi] / (msites * bl);
        second_b[bi] = obs.i_s2()[bi] / (msites * bl);
        r0_b[bi] = obs.i_r0()[bi] / bl;
        lhs_b[bi] = obs.i_lhs()[bi] / bl;
        rhs_b[bi] = obs.i_rhs()[bi] / bl;
        resid_b[bi] = lhs_b[bi] - rhs_b[bi];
        drift_b[bi] = (obs.i_bound()[bi + 1] - obs.i_bound()[bi]) / bl;
    }

    StatReport rep;
    rep.batch_count = nb;
    rep.burn_in = burn_in;
    rep.horizon = horizon;
    rep.divergent_warning = config.lambda >= critical_rate(config.seq);
    rep.closed_form_mu = std::numeric_limits<double>::quiet_NaN();
    if (!rep.divergent_warning) rep.closed_form_mu = closed_form_mean(config.seq, config.lambda);

    const MeanCI mean_ci = batch_means_ci(mean_b);
    rep.mean = mean_ci.estimate;
    rep.mean_half_width = mean_ci.half_width;
    const MeanCI second_ci = batch_means_ci(second_b);
    rep.second_moment = second_ci.estimate;
    rep.second_moment_half_width = second_ci.half_width;
    const MeanCI r0_ci = batch_means_ci(r0_b);
    rep.origin_departure_rate = r0_ci.estimate;
    rep.origin_departure_rate_half_width = r0_ci.half_width;
    rep.origin_accepted_rate = static_cast<double>(obs.origin_accepts()) / horizon;
    const MeanCI drift_ci = batch_means_ci(drift_b);
    rep.drift_residual = drift_ci.estimate;
    rep.drift_residual_half_width = drift_ci.half_width;
    const MeanCI lhs_ci = batch_means_ci(lhs_b);
    const MeanCI rhs_ci = batch_means_ci(rhs_b);
    rep.mass_transport_lhs = lhs_ci.estimate;
    rep.mass_transport_rhs = rhs_ci.estimate;
    const MeanCI resid_ci = batch_means_ci(resid_b);
    rep.mass_transport_residual = resid_ci.estimate;
    rep.mass_transport_half_width = resid_ci.half_width;

    const double mu_hat = rep.mean;
    const double mu_closed = std::isnan(rep.closed_form_mu) ? mu_hat : rep.closed_form_mu;
    for (std::size_t l = 0; l < lags.size(); ++l) {
        std::vector<double> closed_b(static_cast<std::size_t>(nb));
        std::vector<double> emp_b(static_cast<std::size_t>(nb));
        for (int b = 0; b < nb; ++b) {
            const auto bi = static_cast<std::size_t>(b);
            const double p = obs.i_p()[l][bi] / (msites * bl);
            closed_b[bi] = p - 2.0 * mu_closed * mean_b[bi] + mu_closed * mu_closed;
            emp_b[bi] = p - 2.0 * mu_hat * mean_b[bi] + mu_hat * mu_hat;
        }
        const MeanCI cci = batch_means_ci(closed_b);
        const MeanCI eci = batch_means_ci(emp_b);
        CovariancePoint pt;
        pt.lag = lags[l];
        pt.estimate = cci.estimate;
        pt.half_width = cci.half_width;
        pt.empirical_estimate = eci.estimate;
        pt.empirical_half_width = eci.half_width;
        rep.covariance.push_back(pt);
    }
    return rep;
}

StatReport rate_balance_check(const DynamicsConfig& config, std::uint64_t seed, double burn_in,
                              double horizon) {
    return ergodic_estimates(config, seed, burn_in, horizon, 30, {});
}

std::string stat_report_json(const StatReport& report) {
    nlohmann::ordered_json j;
    j["mean"] = report.mean;
    j["mean_half_width"] = report.mean_half_width;
    j["second_moment"] = report.second_moment;
    j["second_moment_half_width"] = report.second_moment_half_width;
    j["origin_departure_rate"] = report.origin_departure_rate;
    j["origin_departure_rate_half_width"] = report.origin_departure_rate_half_width;
    j["origin_accepted_rate"] = report.origin_accepted_rate;
    j["drift_residual"] = report.drift_residual;
    j["drift_residual_half_width"] = report.drift_residual_half_width;
    j["mass_transport_lhs"] = report.mass_transport_lhs;
    j["mass_transport_rhs"] = report.mass_transport_rhs;
    j["mass_transport_residual"] = report.mass_transport_residual;
    j["mass_transport_half_width"] = report.mass_transport_half_width;
    j["batch_count"] = report.batch_count;
    j["burn_in"] = report.burn_in;
    j["horizon"] = report.horizon;
    j["closed_form_mu"] = report.closed_form_mu;
    j["divergent_warning"] = report.divergent_warning;
    auto arr = nlohmann::ordered_json::array();
    for (const CovariancePoint& pt : report.covariance) {
        nlohmann::ordered_json e;
        e["lag"] = pt.lag;
        e["estimate"] = pt.estimate;
        e["half_width"] = pt.half_width;
        e["empirical_estimate"] = pt.empirical_estimate;
        e["empirical_half_width"] = pt.empirical_half_width;
        arr.push_back(e);
    }
    j["covariance"] = arr;
    return j.dump(2);
}

std::string covariance_csv(const StatReport& report) {
    std::string out = "lag,estimate,half_width\n";
    for (const CovariancePoint& pt : report.covariance) {
        out += std::to_string(pt.lag);
        out += ',';
        out += format_double(pt.estimate);
        out += ',';
        out += format_double(pt.half_width);
        out += '\n';
    }
    return out;
}

}  // namespace iqnet
