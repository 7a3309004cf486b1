#ifndef MEGSIS_GIBBS_HPP
#define MEGSIS_GIBBS_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "megsis/core.hpp"
#include "megsis/rng.hpp"
#include "megsis/sis.hpp"
#include "megsis/state_space.hpp"

namespace megsis {

struct GibbsConfig {
    int n_iter = 2000;
    int burn_in = 500;
    Vec6 sigma3 = Vec6::Constant(0.0225);  // random-walk proposal variances
    std::optional<std::pair<int, int>> block;  // 1-based inclusive [r, s]
    std::uint64_t seed = 0;

    void validate(int T, bool random_walk_variant) const {
        if (n_iter < 1 || burn_in < 0 || burn_in >= n_iter)
            throw ConfigError("GibbsConfig: need 0 <= burn_in < n_iter");
        if (random_walk_variant && !(sigma3.array() > 0.0).all())
            throw ConfigError("GibbsConfig: sigma3 must be > 0 componentwise");
        if (block) {
            const auto [r, s] = *block;
            if (!(1 <= r && r <= s && s <= T)) throw ConfigError("GibbsConfig: block range must satisfy 1 <= r <= s <= T");
        }
    }
};

/// Per-timestep sample sequences of one chain, every iteration recorded.
struct ChainTrace {
    int n_iter = 0;
    int T = 0;
    std::vector<Vec6> samples;           // iteration-major, n_iter * T entries
    std::vector<long> accept_counts;     // per timestep
    std::vector<long> proposal_counts;   // per timestep

    const Vec6& at(int iter, int t) const {
        return samples[static_cast<std::size_t>(iter) * T + (t - 1)];
    }

    /// One scalar chain: the given component (0-based) at a fixed timestep.
    std::vector<double> component_chain(int t, int component, int from_iter = 0) const {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(n_iter - from_iter));
        for (int it = from_iter; it < n_iter; ++it) out.push_back(at(it, t)[component]);
        return out;
    }

    double acceptance_rate(int t) const {
        const auto idx = static_cast<std::size_t>(t - 1);
        return proposal_counts[idx] > 0 ? static_cast<double>(accept_counts[idx]) / proposal_counts[idx] : 0.0;
    }
};

namespace detail {

inline Vec6 sample_within_bounds(const Gaussian6& g, const Bounds6& bounds, RngStream& rng) {
    if (!bounds.active()) return g.sample(rng);
    Vec6 out;
    for (int i = 0; i < 6; ++i) {
        double v = g.var[i] > 0.0 ? g.mean[i] + std::sqrt(g.var[i]) * rng.normal() : g.mean[i];
        int attempts = 1;
        while ((v < bounds.lo[i] || v > bounds.hi[i]) && attempts < 1000 && g.var[i] > 0.0) {
            v = g.mean[i] + std::sqrt(g.var[i]) * rng.normal();
            ++attempts;
        }
        if (v < bounds.lo[i] || v > bounds.hi[i]) {
            v = std::clamp(v, bounds.lo[i], bounds.hi[i]);
            bound_clamp_count().fetch_add(1, std::memory_order_relaxed);
        }
        out[i] = v;
    }
    return out;
}

/// Combines a Gaussian left factor N(x; mean_left, var_left) with a right
/// factor N(target; c x + d, v) into the normalized conditional of x.
inline void combine_factor(double mean_left, double var_left, double c, double d, double v, double target,
                           double& mean_out, double& var_out) {
    if (var_left == 0.0) {
        mean_out = mean_left;
        var_out = 0.0;
        return;
    }
    if (v == 0.0) {
        if (c == 0.0) {
            mean_out = mean_left;
            var_out = var_left;
        } else {
            mean_out = (target - d) / c;
            var_out = 0.0;
        }
        return;
    }
    const double precision = 1.0 / var_left + c * c / v;
    mean_out = (mean_left / var_left + c * (target - d) / v) / precision;
    var_out = 1.0 / precision;
}

/// Conditional of J_t given its left neighbor value (or the marginal initial
/// law when t == 1) and, when anchored, the state at time t + k reached by
/// composing the per-step transitions.
template <StateDynamics Dyn>
Gaussian6 prior_conditional(const Dyn& dyn, int t, const Vec6* left, const Vec6* anchor, int anchor_gap) {
    Gaussian6 left_g;
    if (left != nullptr) {
        const ArModel& in = dyn.at(t);
        left_g.mean = in.deterministic_image(*left);
        left_g.var = in.sigma2;
    } else {
        left_g = first_state_marginal(dyn);
    }
    if (anchor == nullptr) return left_g;

    Gaussian6 out;
    for (int i = 0; i < 6; ++i) {
        // Compose x -> alpha x + beta with accumulated noise v over the gap.
        double alpha = 1.0, beta = 0.0, v = 0.0;
        for (int u = t + 1; u <= t + anchor_gap; ++u) {
            const ArModel& m = dyn.at(u);
            beta = m.m_com[i] * (1.0 - m.rho[i]) + m.rho[i] * beta;
            v = m.rho[i] * m.rho[i] * v + m.sigma2[i];
            alpha *= m.rho[i];
        }
        combine_factor(left_g.mean[i], left_g.var[i], alpha, beta, v, (*anchor)[i], out.mean[i], out.var[i]);
    }
    return out;
}

template <StateDynamics Dyn>
std::vector<DipoleState> prior_path_sample(const Dyn& dyn, int T, RngStream& rng) {
    const Bounds6& bounds = dyn.initial().bounds;
    std::vector<DipoleState> path(static_cast<std::size_t>(T + 1));
    path[1] = DipoleState(sample_within_bounds(first_state_marginal(dyn), bounds, rng));
    for (int t = 2; t <= T; ++t) path[static_cast<std::size_t>(t)] = dyn.at(t).transition_sample(path[static_cast<std::size_t>(t - 1)], rng);
    return path;
}

/// Log prior factors touching time t: the incoming transition (marginal law at
/// t == 1) and the outgoing transition when one exists.
template <StateDynamics Dyn>
double local_prior_logpdf(const Dyn& dyn, const std::vector<DipoleState>& path, int t, int T,
                          const DipoleState& value) {
    const Bounds6& bounds = dyn.initial().bounds;
    if (bounds.active() && !bounds.contains(value.x)) return -kInf;
    double lp = (t == 1) ? first_state_marginal(dyn).logpdf(value.x)
                         : dyn.at(t).transition_logpdf(path[static_cast<std::size_t>(t - 1)], value);
    if (t < T) lp += dyn.at(t + 1).transition_logpdf(value, path[static_cast<std::size_t>(t + 1)]);
    return lp;
}

}  // namespace detail

/// Random-walk MCMC within Gibbs: sweep t = 1..T, propose a Gaussian step of
/// covariance diag(sigma3) around the current state and accept with the
/// likelihood-times-local-prior ratio. Components the model evolves
/// deterministically are never perturbed (any move there has no support).
template <StateDynamics Dyn, ObservationModel Obs>
ChainTrace random_walk_gibbs(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys,
                             const GibbsConfig& cfg) {
    const int T = static_cast<int>(ys.rows());
    cfg.validate(T, true);
    RngStream rng(cfg.seed);

    std::vector<DipoleState> path = detail::prior_path_sample(dyn, T, rng);
    std::vector<double> loglik(static_cast<std::size_t>(T + 1));
    for (int t = 1; t <= T; ++t) loglik[static_cast<std::size_t>(t)] = obs.log_likelihood(path[static_cast<std::size_t>(t)], ys.row(t - 1).transpose());

    ChainTrace trace;
    trace.n_iter = cfg.n_iter;
    trace.T = T;
    trace.samples.reserve(static_cast<std::size_t>(cfg.n_iter) * T);
    trace.accept_counts.assign(static_cast<std::size_t>(T), 0);
    trace.proposal_counts.assign(static_cast<std::size_t>(T), 0);

    for (int it = 0; it < cfg.n_iter; ++it) {
        for (int t = 1; t <= T; ++t) {
            DipoleState cand = path[static_cast<std::size_t>(t)];
            for (int i = 0; i < 6; ++i)
                if (dyn.at(t).sigma2[i] > 0.0) cand.x[i] += std::sqrt(cfg.sigma3[i]) * rng.normal();

            const double cand_prior = detail::local_prior_logpdf(dyn, path, t, T, cand);
            double log_alpha = -kInf;
            double cand_loglik = -kInf;
            if (cand_prior > -kInf) {
                cand_loglik = obs.log_likelihood(cand, ys.row(t - 1).transpose());
                const double cur_prior = detail::local_prior_logpdf(dyn, path, t, T, path[static_cast<std::size_t>(t)]);
                log_alpha = cand_loglik + cand_prior - loglik[static_cast<std::size_t>(t)] - cur_prior;
            }
            ++trace.proposal_counts[static_cast<std::size_t>(t - 1)];
            if (std::log(std::max(rng.uniform(), 1e-300)) < log_alpha) {
                path[static_cast<std::size_t>(t)] = cand;
                loglik[static_cast<std::size_t>(t)] = cand_loglik;
                ++trace.accept_counts[static_cast<std::size_t>(t - 1)];
            }
        }
        for (int t = 1; t <= T; ++t) trace.samples.push_back(path[static_cast<std::size_t>(t)].x);
    }
    return trace;
}

/// Hybrid MCMC within Gibbs: single-site proposals from the exact prior full
/// conditional given both neighbors (one-sided at the ends), accepted with the
/// likelihood ratio alone; every prior factor cancels by construction.
template <StateDynamics Dyn, ObservationModel Obs>
ChainTrace hybrid_gibbs(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys, const GibbsConfig& cfg) {
    const int T = static_cast<int>(ys.rows());
    cfg.validate(T, false);
    RngStream rng(cfg.seed);
    const Bounds6& bounds = dyn.initial().bounds;

    std::vector<DipoleState> path = detail::prior_path_sample(dyn, T, rng);
    std::vector<double> loglik(static_cast<std::size_t>(T + 1));
    for (int t = 1; t <= T; ++t) loglik[static_cast<std::size_t>(t)] = obs.log_likelihood(path[static_cast<std::size_t>(t)], ys.row(t - 1).transpose());

    ChainTrace trace;
    trace.n_iter = cfg.n_iter;
    trace.T = T;
    trace.samples.reserve(static_cast<std::size_t>(cfg.n_iter) * T);
    trace.accept_counts.assign(static_cast<std::size_t>(T), 0);
    trace.proposal_counts.assign(static_cast<std::size_t>(T), 0);

    for (int it = 0; it < cfg.n_iter; ++it) {
        for (int t = 1; t <= T; ++t) {
            const Vec6* left = t > 1 ? &path[static_cast<std::size_t>(t - 1)].x : nullptr;
            const Vec6* anchor = t < T ? &path[static_cast<std::size_t>(t + 1)].x : nullptr;
            const Gaussian6 g = detail::prior_conditional(dyn, t, left, anchor, 1);
            const DipoleState cand(detail::sample_within_bounds(g, bounds, rng));
            const double cand_loglik = obs.log_likelihood(cand, ys.row(t - 1).transpose());
            ++trace.proposal_counts[static_cast<std::size_t>(t - 1)];
            if (std::log(std::max(rng.uniform(), 1e-300)) < cand_loglik - loglik[static_cast<std::size_t>(t)]) {
                path[static_cast<std::size_t>(t)] = cand;
                loglik[static_cast<std::size_t>(t)] = cand_loglik;
                ++trace.accept_counts[static_cast<std::size_t>(t - 1)];
            }
        }
        for (int t = 1; t <= T; ++t) trace.samples.push_back(path[static_cast<std::size_t>(t)].x);
    }
    return trace;
}

/// Hybrid sweep with the configured block updated jointly: the block is drawn
/// forward-sequentially from the conditional prior bridging its fixed
/// neighbors and accepted with the product likelihood ratio over the block.
/// A block of size one reduces to hybrid_gibbs.
template <StateDynamics Dyn, ObservationModel Obs>
ChainTrace block_hybrid_gibbs(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys,
                              const GibbsConfig& cfg) {
    const int T = static_cast<int>(ys.rows());
    cfg.validate(T, false);
    if (!cfg.block) throw ConfigError("block_hybrid_gibbs: cfg.block is required");
    const auto [r, s] = *cfg.block;
    RngStream rng(cfg.seed);
    const Bounds6& bounds = dyn.initial().bounds;

    std::vector<DipoleState> path = detail::prior_path_sample(dyn, T, rng);
    std::vector<double> loglik(static_cast<std::size_t>(T + 1));
    for (int t = 1; t <= T; ++t) loglik[static_cast<std::size_t>(t)] = obs.log_likelihood(path[static_cast<std::size_t>(t)], ys.row(t - 1).transpose());

    ChainTrace trace;
    trace.n_iter = cfg.n_iter;
    trace.T = T;
    trace.samples.reserve(static_cast<std::size_t>(cfg.n_iter) * T);
    trace.accept_counts.assign(static_cast<std::size_t>(T), 0);
    trace.proposal_counts.assign(static_cast<std::size_t>(T), 0);

    auto single_update = [&](int t) {
        const Vec6* left = t > 1 ? &path[static_cast<std::size_t>(t - 1)].x : nullptr;
        const Vec6* anchor = t < T ? &path[static_cast<std::size_t>(t + 1)].x : nullptr;
        const Gaussian6 g = detail::prior_conditional(dyn, t, left, anchor, 1);
        const DipoleState cand(detail::sample_within_bounds(g, bounds, rng));
        const double cand_loglik = obs.log_likelihood(cand, ys.row(t - 1).transpose());
        ++trace.proposal_counts[static_cast<std::size_t>(t - 1)];
        if (std::log(std::max(rng.uniform(), 1e-300)) < cand_loglik - loglik[static_cast<std::size_t>(t)]) {
            path[static_cast<std::size_t>(t)] = cand;
            loglik[static_cast<std::size_t>(t)] = cand_loglik;
            ++trace.accept_counts[static_cast<std::size_t>(t - 1)];
        }
    };

    std::vector<DipoleState> block_cand(static_cast<std::size_t>(s - r + 1));
    std::vector<double> block_loglik(static_cast<std::size_t>(s - r + 1));
    for (int it = 0; it < cfg.n_iter; ++it) {
        for (int t = 1; t < r; ++t) single_update(t);

        const Vec6* anchor = s < T ? &path[static_cast<std::size_t>(s + 1)].x : nullptr;
        double delta = 0.0;
        for (int t = r; t <= s; ++t) {
            const Vec6* left = t == r ? (r > 1 ? &path[static_cast<std::size_t>(r - 1)].x : nullptr)
                                      : &block_cand[static_cast<std::size_t>(t - r - 1)].x;
            const Gaussian6 g = detail::prior_conditional(dyn, t, left, anchor, s + 1 - t);
            auto& cand = block_cand[static_cast<std::size_t>(t - r)];
            cand = DipoleState(detail::sample_within_bounds(g, bounds, rng));
            block_loglik[static_cast<std::size_t>(t - r)] = obs.log_likelihood(cand, ys.row(t - 1).transpose());
            delta += block_loglik[static_cast<std::size_t>(t - r)] - loglik[static_cast<std::size_t>(t)];
            ++trace.proposal_counts[static_cast<std::size_t>(t - 1)];
        }
        if (std::log(std::max(rng.uniform(), 1e-300)) < delta) {
            for (int t = r; t <= s; ++t) {
                path[static_cast<std::size_t>(t)] = block_cand[static_cast<std::size_t>(t - r)];
                loglik[static_cast<std::size_t>(t)] = block_loglik[static_cast<std::size_t>(t - r)];
                ++trace.accept_counts[static_cast<std::size_t>(t - 1)];
            }
        }

        for (int t = s + 1; t <= T; ++t) single_update(t);
        for (int t = 1; t <= T; ++t) trace.samples.push_back(path[static_cast<std::size_t>(t)].x);
    }
    return trace;
}

}  // namespace megsis

#endif
