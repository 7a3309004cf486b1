#ifndef MEGSIS_STATE_SPACE_HPP
#define MEGSIS_STATE_SPACE_HPP

#include <atomic>
#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "megsis/core.hpp"
#include "megsis/forward_model.hpp"
#include "megsis/rng.hpp"

namespace megsis {

/// Componentwise Gaussian over the 6-dim state; var == 0 marks a point mass.
struct Gaussian6 {
    Vec6 mean = Vec6::Zero();
    Vec6 var = Vec6::Zero();

    Vec6 sample(RngStream& rng) const {
        Vec6 out;
        for (int i = 0; i < 6; ++i) out[i] = var[i] > 0.0 ? mean[i] + std::sqrt(var[i]) * rng.normal() : mean[i];
        return out;
    }

    double logpdf(const Vec6& v) const {
        double lp = 0.0;
        for (int i = 0; i < 6; ++i) {
            if (var[i] > 0.0)
                lp += log_normal_pdf(v[i], mean[i], var[i]);
            else if (!point_mass_hit(v[i], mean[i]))
                return -kInf;
        }
        return lp;
    }

    /// Deterministic components tolerate tiny representation drift, nothing more.
    static bool point_mass_hit(double value, double target) {
        return std::abs(value - target) <= 1e-9 * std::max(1.0, std::abs(target));
    }
};

/// Counts how often a bounded draw hit the retry cap and was clamped.
inline std::atomic<std::uint64_t>& bound_clamp_count() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

/// Diagonal first-order autoregression over the 6 dipole parameters:
///   J_t = m_com + rho (J_{t-1} - m_com) + V_t,   V_t ~ N(0, diag(sigma2)),
/// with the initial state J_0 ~ N(m_ini, diag(sigma2)). Components with zero
/// variance evolve deterministically. Optional per-component bounds truncate
/// the support; sampling redraws (clamping after a retry cap) and densities
/// use a support indicator.
struct ArModel {
    Vec6 m_ini = Vec6::Zero();
    Vec6 m_com = Vec6::Zero();
    Vec6 rho = Vec6::Ones();
    Vec6 sigma2 = Vec6::Zero();
    Bounds6 bounds;

    void validate() const {
        if (!m_ini.allFinite() || !m_com.allFinite() || !rho.allFinite() || !sigma2.allFinite())
            throw ConfigError("ArModel: parameters must be finite");
        if ((sigma2.array() < 0.0).any()) throw ConfigError("ArModel: sigma2 must be >= 0");
        if (bounds.active()) bounds.validate();
    }

    Vec6 deterministic_image(const Vec6& prev) const { return m_com + rho.cwiseProduct(prev - m_com); }

    DipoleState initial_sample(RngStream& rng) const {
        return DipoleState(sample_bounded(m_ini, sigma2, rng));
    }

    DipoleState transition_sample(const DipoleState& prev, RngStream& rng) const {
        return DipoleState(sample_bounded(deterministic_image(prev.x), sigma2, rng));
    }

    double initial_logpdf(const DipoleState& s) const {
        if (bounds.active() && !bounds.contains(s.x)) return -kInf;
        return Gaussian6{m_ini, sigma2}.logpdf(s.x);
    }

    double transition_logpdf(const DipoleState& prev, const DipoleState& next) const {
        if (bounds.active() && !bounds.contains(next.x)) return -kInf;
        return Gaussian6{deterministic_image(prev.x), sigma2}.logpdf(next.x);
    }

    /// Exact normalized product p(x | prev) p(next | x), componentwise:
    ///   var_i  = sigma2_i / (1 + rho_i^2)
    ///   mean_i = [rho_i (prev_i + next_i) + (1 - rho_i)^2 m_com_i] / (1 + rho_i^2)
    /// Zero-variance components collapse to their deterministic image.
    Gaussian6 full_conditional(const DipoleState& prev, const DipoleState& next) const {
        Gaussian6 g;
        for (int i = 0; i < 6; ++i) {
            if (sigma2[i] == 0.0) {
                g.mean[i] = m_com[i] + rho[i] * (prev.x[i] - m_com[i]);
                g.var[i] = 0.0;
            } else {
                const double r = rho[i];
                const double denom = 1.0 + r * r;
                g.mean[i] = (r * (prev.x[i] + next.x[i]) + (1.0 - r) * (1.0 - r) * m_com[i]) / denom;
                g.var[i] = sigma2[i] / denom;
            }
        }
        return g;
    }

  private:
    Vec6 sample_bounded(const Vec6& mean, const Vec6& var, RngStream& rng) const {
        Vec6 out;
        for (int i = 0; i < 6; ++i) {
            if (var[i] == 0.0) {
                out[i] = mean[i];
                if (bounds.active() && (out[i] < bounds.lo[i] || out[i] > bounds.hi[i])) {
                    out[i] = std::clamp(out[i], bounds.lo[i], bounds.hi[i]);
                    bound_clamp_count().fetch_add(1, std::memory_order_relaxed);
                }
                continue;
            }
            const double sd = std::sqrt(var[i]);
            double draw = mean[i] + sd * rng.normal();
            if (bounds.active()) {
                int attempts = 1;
                while ((draw < bounds.lo[i] || draw > bounds.hi[i]) && attempts < 1000) {
                    draw = mean[i] + sd * rng.normal();
                    ++attempts;
                }
                if (draw < bounds.lo[i] || draw > bounds.hi[i]) {
                    draw = std::clamp(draw, bounds.lo[i], bounds.hi[i]);
                    bound_clamp_count().fetch_add(1, std::memory_order_relaxed);
                }
            }
            out[i] = draw;
        }
        return out;
    }
};

/// Gaussian observation model around the dipole forward field:
///   Y_t = B(J_t) + U_t,  U_t ~ N(0, sigma1^2 I_L).
struct ObsModel {
    SensorArray sensors;
    FieldGain gain;
    double sigma1 = 0.25;
    double min_separation = kDefaultMinSeparation;

    int channels() const { return sensors.size(); }

    Eigen::VectorXd predict(const DipoleState& s) const {
        return field_vector(s, sensors, gain, min_separation);
    }

    /// Sum of per-channel Gaussian log densities. States violating the
    /// sensor-separation guard have no support (sensors sit outside the head).
    double log_likelihood(const DipoleState& s, const Eigen::VectorXd& y) const {
        if (!(sigma1 > 0.0)) throw ConfigError("ObsModel: sigma1 must be > 0 for likelihood evaluation");
        if (y.size() != channels()) throw DataError("log_likelihood: channel count mismatch");
        Eigen::VectorXd b;
        try {
            b = predict(s);
        } catch (const DataError&) {
            return -kInf;
        }
        const double var = sigma1 * sigma1;
        double lp = -0.5 * channels() * (kLogTwoPi + std::log(var));
        lp -= (y - b).squaredNorm() / (2.0 * var);
        return lp;
    }
};

enum class MoveTag { ar, random_walk };

/// Step-indexed access to the transition model. at(t) is the model for the
/// move into time t (t >= 1); initial() carries m_ini and the J_0 variance.
template <typename D>
concept StateDynamics = requires(const D d, int t) {
    { d.at(t) } -> std::convertible_to<const ArModel&>;
    { d.initial() } -> std::convertible_to<const ArModel&>;
};

struct ConstantDynamics {
    ArModel model;
    const ArModel& at(int) const { return model; }
    const ArModel& initial() const { return model; }
};

/// Case-2 style dynamics: per-step choice between an autoregressive move and
/// a random-walk move (rho = I, same noise scale).
struct ScheduledDynamics {
    ArModel ar;
    ArModel rw;
    std::vector<MoveTag> schedule;

    const ArModel& at(int t) const {
        return schedule.at(static_cast<std::size_t>(t - 1)) == MoveTag::ar ? ar : rw;
    }
    const ArModel& initial() const { return ar; }
};

inline ArModel random_walk_variant(const ArModel& base) {
    ArModel rw = base;
    rw.rho = Vec6::Ones();
    return rw;
}

/// Marginal distribution of J_1 with J_0 integrated out analytically.
template <StateDynamics Dyn>
Gaussian6 first_state_marginal(const Dyn& dyn) {
    const ArModel& init = dyn.initial();
    const ArModel& tr = dyn.at(1);
    Gaussian6 g;
    g.mean = tr.m_com + tr.rho.cwiseProduct(init.m_ini - tr.m_com);
    g.var = tr.rho.cwiseProduct(tr.rho).cwiseProduct(init.sigma2) + tr.sigma2;
    return g;
}

/// Log of the unnormalized posterior over a full path (J_0, ..., J_T) given
/// observations for times 1..T.
template <StateDynamics Dyn, typename Obs>
double joint_log_target(const Dyn& dyn, const Obs& obs, const std::vector<DipoleState>& path,
                        const ObservationSeries& ys) {
    const int T = static_cast<int>(ys.rows());
    if (static_cast<int>(path.size()) != T + 1)
        throw DataError("joint_log_target: path must hold T+1 states for T observations");
    double lp = dyn.initial().initial_logpdf(path[0]);
    for (int t = 1; t <= T; ++t) {
        lp += dyn.at(t).transition_logpdf(path[t - 1], path[t]);
        lp += obs.log_likelihood(path[t], ys.row(t - 1).transpose());
    }
    return lp;
}

}  // namespace megsis

#endif
