#ifndef MEGSIS_SIS_HPP
#define MEGSIS_SIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "megsis/core.hpp"
#include "megsis/rng.hpp"
#include "megsis/state_space.hpp"

namespace megsis {

template <typename O>
concept ObservationModel = requires(const O o, const DipoleState& s, const Eigen::VectorXd& y) {
    { o.channels() } -> std::convertible_to<int>;
    { o.log_likelihood(s, y) } -> std::convertible_to<double>;
};

enum class ResampleScheme { multinomial, residual, stratified };
enum class ResampleMode { final_only, ess_threshold, every_step };
enum class SisVariant { rejection, resampling };

struct SisConfig {
    int m = 2000;
    int m_prime = 0;  // retained rows of the final without-replacement resample; 0 means m/3
    SisVariant variant = SisVariant::resampling;
    ResampleMode resample_mode = ResampleMode::ess_threshold;
    double ess_threshold = 0.5;  // fraction of m
    ResampleScheme scheme = ResampleScheme::multinomial;
    std::uint64_t seed = 0;

    int effective_m_prime() const { return m_prime > 0 ? m_prime : std::max(1, m / 3); }

    void validate() const {
        if (m < 1) throw ConfigError("SisConfig: m must be >= 1");
        if (m_prime < 0 || m_prime > m) throw ConfigError("SisConfig: need 0 < m_prime <= m");
        if (!(ess_threshold > 0.0 && ess_threshold <= 1.0))
            throw ConfigError("SisConfig: ess_threshold must be in (0, 1]");
    }
};

/// The stream S_t: m state paths of length t (plus the initial state at slot 0)
/// with per-path log weights.
struct ParticleEnsemble {
    std::vector<std::vector<DipoleState>> paths;
    std::vector<double> log_weights;

    int size() const { return static_cast<int>(paths.size()); }
    int t() const { return paths.empty() ? -1 : static_cast<int>(paths.front().size()) - 1; }

    const DipoleState& state(int particle, int time) const {
        return paths[static_cast<std::size_t>(particle)][static_cast<std::size_t>(time)];
    }
    const DipoleState& current(int particle) const { return paths[static_cast<std::size_t>(particle)].back(); }
};

/// Softmax of the log weights with max subtraction; sums to 1.
inline Eigen::VectorXd normalized_weights(const ParticleEnsemble& ens) {
    const int m = ens.size();
    double max_lw = -kInf;
    for (double lw : ens.log_weights) max_lw = std::max(max_lw, lw);
    if (!std::isfinite(max_lw)) throw CollapseError("ensemble collapse: no particle has finite weight");
    Eigen::VectorXd w(m);
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
        w[j] = std::exp(ens.log_weights[static_cast<std::size_t>(j)] - max_lw);
        sum += w[j];
    }
    w /= sum;
    return w;
}

/// Effective sample size of the weight vector, in [1, m].
inline double ess(const ParticleEnsemble& ens) {
    const Eigen::VectorXd w = normalized_weights(ens);
    return 1.0 / w.squaredNorm();
}

namespace detail {

inline std::vector<int> multinomial_indices(const Eigen::VectorXd& w, int n_out, RngStream& rng) {
    // CDF inversion per i.i.d. uniform draw.
    Eigen::VectorXd cdf(w.size());
    std::partial_sum(w.data(), w.data() + w.size(), cdf.data());
    std::vector<int> idx(static_cast<std::size_t>(n_out));
    for (int i = 0; i < n_out; ++i) {
        const double u = rng.uniform() * cdf[cdf.size() - 1];
        idx[static_cast<std::size_t>(i)] =
            static_cast<int>(std::lower_bound(cdf.data(), cdf.data() + cdf.size(), u) - cdf.data());
    }
    return idx;
}

inline std::vector<int> residual_indices(const Eigen::VectorXd& w, int n_out, RngStream& rng) {
    const int m = static_cast<int>(w.size());
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(n_out));
    Eigen::VectorXd residual(m);
    int assigned = 0;
    for (int j = 0; j < m; ++j) {
        const double target = n_out * w[j];
        const int copies = static_cast<int>(std::floor(target));
        residual[j] = target - copies;
        for (int c = 0; c < copies; ++c) idx.push_back(j);
        assigned += copies;
    }
    if (assigned < n_out) {
        const double rsum = residual.sum();
        if (rsum > 0.0) {
            residual /= rsum;
            const std::vector<int> extra = multinomial_indices(residual, n_out - assigned, rng);
            idx.insert(idx.end(), extra.begin(), extra.end());
        } else {
            while (static_cast<int>(idx.size()) < n_out) idx.push_back(static_cast<int>(rng.below(m)));
        }
    }
    return idx;
}

inline std::vector<int> stratified_indices(const Eigen::VectorXd& w, int n_out, RngStream& rng) {
    Eigen::VectorXd cdf(w.size());
    std::partial_sum(w.data(), w.data() + w.size(), cdf.data());
    const double total = cdf[cdf.size() - 1];
    std::vector<int> idx(static_cast<std::size_t>(n_out));
    int j = 0;
    for (int i = 0; i < n_out; ++i) {
        const double u = total * (i + rng.uniform()) / n_out;
        while (j < static_cast<int>(w.size()) - 1 && cdf[j] < u) ++j;
        idx[static_cast<std::size_t>(i)] = j;
    }
    return idx;
}

inline std::vector<int> resample_indices(const Eigen::VectorXd& w, ResampleScheme scheme, int n_out,
                                         RngStream& rng) {
    switch (scheme) {
        case ResampleScheme::multinomial: return multinomial_indices(w, n_out, rng);
        case ResampleScheme::residual: return residual_indices(w, n_out, rng);
        case ResampleScheme::stratified: return stratified_indices(w, n_out, rng);
    }
    throw ConfigError("unknown resample scheme");
}

}  // namespace detail

/// Draws n_out whole paths with probability proportional to the weights and
/// resets all weights to equal.
inline ParticleEnsemble resample(const ParticleEnsemble& ens, ResampleScheme scheme, RngStream& rng,
                                 int n_out) {
    const Eigen::VectorXd w = normalized_weights(ens);
    const std::vector<int> idx = detail::resample_indices(w, scheme, n_out, rng);
    ParticleEnsemble out;
    out.paths.reserve(idx.size());
    for (int j : idx) out.paths.push_back(ens.paths[static_cast<std::size_t>(j)]);
    out.log_weights.assign(idx.size(), 0.0);
    return out;
}

/// Weighted without-replacement selection of keep rows by exponential keys
/// (largest u^(1/w), computed in log space). Zero-weight rows never win; keep
/// shrinks to the number of supported rows when necessary.
inline ParticleEnsemble without_replacement_select(const ParticleEnsemble& ens, int keep, RngStream& rng) {
    const Eigen::VectorXd w = normalized_weights(ens);
    std::vector<std::pair<double, int>> keys;
    keys.reserve(static_cast<std::size_t>(ens.size()));
    for (int j = 0; j < ens.size(); ++j) {
        if (w[j] <= 0.0) continue;
        const double u = std::max(rng.uniform(), 1e-300);
        keys.emplace_back(std::log(-std::log(u)) - std::log(w[j]), j);
    }
    const int k = std::min(keep, static_cast<int>(keys.size()));
    std::partial_sort(keys.begin(), keys.begin() + k, keys.end());
    ParticleEnsemble out;
    out.paths.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.paths.push_back(ens.paths[static_cast<std::size_t>(keys[static_cast<std::size_t>(i)].second)]);
    out.log_weights.assign(static_cast<std::size_t>(k), 0.0);
    return out;
}

/// Snapshot handed to step observers right after the weight update of time t,
/// before any scheduled resampling.
struct SisStepEvent {
    int t;
    const ParticleEnsemble& ens;
    bool will_resample;
};
using SisObserver = std::function<void(const SisStepEvent&)>;

/// One recursion step with the prior transition as trial distribution: extend
/// every path by a transition draw and add the incremental log likelihood of
/// y_next to its log weight. The step index is taken from the ensemble length.
template <StateDynamics Dyn, ObservationModel Obs>
void sis_step(ParticleEnsemble& ens, const Dyn& dyn, const Obs& obs, const Eigen::VectorXd& y_next,
              RngStream& rng) {
    const int t_next = ens.t() + 1;
    const ArModel& tr = dyn.at(t_next);
    double max_lw = -kInf;
    for (int j = 0; j < ens.size(); ++j) {
        auto& path = ens.paths[static_cast<std::size_t>(j)];
        path.push_back(tr.transition_sample(path.back(), rng));
        double& lw = ens.log_weights[static_cast<std::size_t>(j)];
        lw += obs.log_likelihood(path.back(), y_next);
        max_lw = std::max(max_lw, lw);
    }
    if (!std::isfinite(max_lw))
        throw CollapseError("ensemble collapse at step " + std::to_string(t_next));
}

namespace detail {

inline ParticleEnsemble init_ensemble(const ArModel& init, int m, RngStream& rng) {
    ParticleEnsemble ens;
    ens.paths.resize(static_cast<std::size_t>(m));
    for (auto& path : ens.paths) path.push_back(init.initial_sample(rng));
    ens.log_weights.assign(static_cast<std::size_t>(m), 0.0);
    return ens;
}

inline bool scheduled_resample(const SisConfig& cfg, double step_ess, int t, int T) {
    switch (cfg.resample_mode) {
        case ResampleMode::every_step: return true;
        case ResampleMode::final_only: return t == T;
        case ResampleMode::ess_threshold: return t == T || step_ess < cfg.ess_threshold * cfg.m;
    }
    return false;
}

}  // namespace detail

/// Improved SIS: direct likelihood weights plus the configured resampling
/// schedule (a final-step resample always happens).
template <StateDynamics Dyn, ObservationModel Obs>
ParticleEnsemble sis_resampling_run(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys,
                                    const SisConfig& cfg, RngStream& rng, const SisObserver& observer = {}) {
    cfg.validate();
    const int T = static_cast<int>(ys.rows());
    ParticleEnsemble ens = detail::init_ensemble(dyn.initial(), cfg.m, rng);
    for (int t = 1; t <= T; ++t) {
        sis_step(ens, dyn, obs, ys.row(t - 1).transpose(), rng);
        const bool doit = detail::scheduled_resample(cfg, ess(ens), t, T);
        if (observer) observer(SisStepEvent{t, ens, doit});
        if (doit) ens = resample(ens, cfg.scheme, rng, cfg.m);
    }
    return ens;
}

/// Regular SIS with an embedded rejection step. Per step: draw m local joint
/// samples (ancestor index proportional to the current weights, then a prior
/// transition draw), accept each with probability likelihood / c where c is
/// the largest likelihood in the batch, estimate the new weight of index j by
/// its acceptance frequency, and refresh each path's new state from the
/// accepted pool. The run ends with a without-replacement resample of
/// m_prime rows.
namespace detail {

/// The per-step rejection recursion, leaving the frequency-weighted ensemble
/// of m rows (before the final without-replacement selection).
template <StateDynamics Dyn, ObservationModel Obs>
ParticleEnsemble rejection_pass(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys,
                                const SisConfig& cfg, RngStream& rng, const SisObserver& observer) {
    const int T = static_cast<int>(ys.rows());
    const int m = cfg.m;
    ParticleEnsemble ens = detail::init_ensemble(dyn.initial(), m, rng);

    std::vector<DipoleState> draws(static_cast<std::size_t>(m));
    std::vector<int> draw_index(static_cast<std::size_t>(m));
    std::vector<double> draw_loglik(static_cast<std::size_t>(m));
    for (int t = 1; t <= T; ++t) {
        const ArModel& tr = dyn.at(t);
        const Eigen::VectorXd y = ys.row(t - 1).transpose();
        const Eigen::VectorXd w = normalized_weights(ens);
        const std::vector<int> ancestors = detail::multinomial_indices(w, m, rng);

        double logc = -kInf;
        for (int l = 0; l < m; ++l) {
            const int j = ancestors[static_cast<std::size_t>(l)];
            draw_index[static_cast<std::size_t>(l)] = j;
            draws[static_cast<std::size_t>(l)] = tr.transition_sample(ens.current(j), rng);
            draw_loglik[static_cast<std::size_t>(l)] = obs.log_likelihood(draws[static_cast<std::size_t>(l)], y);
            logc = std::max(logc, draw_loglik[static_cast<std::size_t>(l)]);
        }
        if (!std::isfinite(logc))
            throw CollapseError("rejection step " + std::to_string(t) + ": every local draw lost support");

        // Bernoulli accept/reject; the batch maximum is accepted with probability one.
        std::vector<std::vector<int>> accepted_by_index(static_cast<std::size_t>(m));
        std::vector<int> accepted;
        for (int l = 0; l < m; ++l) {
            if (rng.uniform() < std::exp(draw_loglik[static_cast<std::size_t>(l)] - logc)) {
                accepted.push_back(l);
                accepted_by_index[static_cast<std::size_t>(draw_index[static_cast<std::size_t>(l)])].push_back(l);
            }
        }
        const double n_acc = static_cast<double>(accepted.size());

        for (int j = 0; j < m; ++j) {
            const auto& mine = accepted_by_index[static_cast<std::size_t>(j)];
            int source;
            if (!mine.empty()) {
                source = mine[rng.below(mine.size())];
            } else {
                // Dead index: borrow the new state from a random accepted draw.
                source = accepted[rng.below(accepted.size())];
            }
            ens.paths[static_cast<std::size_t>(j)].push_back(draws[static_cast<std::size_t>(source)]);
            ens.log_weights[static_cast<std::size_t>(j)] =
                mine.empty() ? -kInf : std::log(static_cast<double>(mine.size()) / n_acc);
        }
        if (observer) observer(SisStepEvent{t, ens, t == T});
    }
    return ens;
}

}  // namespace detail

template <StateDynamics Dyn, ObservationModel Obs>
ParticleEnsemble sis_rejection_run(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys,
                                   const SisConfig& cfg, RngStream& rng, const SisObserver& observer = {}) {
    cfg.validate();
    const ParticleEnsemble ens = detail::rejection_pass(dyn, obs, ys, cfg, rng, observer);
    return without_replacement_select(ens, cfg.effective_m_prime(), rng);
}

}  // namespace megsis

#endif
