#ifndef MEGSIS_TEST_ORACLES_HPP
#define MEGSIS_TEST_ORACLES_HPP

// Independent reference implementations used only by tests. Everything here
// is written against the mathematical definitions directly and must stay
// decoupled from the library code paths it checks.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "megsis/core.hpp"

namespace oracle {

/// Straight-line evaluation of the dipole field expression in plain scalar
/// arithmetic.
inline double field(const double p[3], const double q[3], const double r[3], const double e[3],
                    double kappa) {
    const double a0 = r[0] - p[0];
    const double a1 = r[1] - p[1];
    const double a2 = r[2] - p[2];
    const double c0 = q[1] * a2 - q[2] * a1;
    const double c1 = q[2] * a0 - q[0] * a2;
    const double c2 = q[0] * a1 - q[1] * a0;
    const double dist = std::sqrt(a0 * a0 + a1 * a1 + a2 * a2);
    return kappa * (c0 * e[0] + c1 * e[1] + c2 * e[2]) / (dist * dist * dist);
}

/// Exact filtered moments of a scalar AR(1) state observed through an
/// arbitrary per-step log likelihood, by forward filtering over a fixed grid.
/// grid must comfortably cover the posterior mass.
struct GridFilter {
    std::vector<double> grid;
    std::vector<double> log_density;  // current filtered log density over the grid (unnormalized)

    GridFilter(double lo, double hi, int points) : grid(points) {
        for (int i = 0; i < points; ++i) grid[i] = lo + (hi - lo) * i / (points - 1);
        log_density.assign(grid.size(), 0.0);
    }

    void init_gaussian(double mean, double var) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double d = grid[i] - mean;
            log_density[i] = -0.5 * d * d / var;
        }
    }

    /// One predict step through z' = m + rho (z - m) + noise, then a weight
    /// update by the supplied log likelihood at each grid point.
    template <typename LogLik>
    void step(double rho, double m_com, double var, LogLik&& loglik) {
        const std::size_t n = grid.size();
        std::vector<double> next(n, -1e300);
        const double max_prev = *std::max_element(log_density.begin(), log_density.end());
        std::vector<double> prev_mass(n), pred_mean(n);
        for (std::size_t j = 0; j < n; ++j) {
            prev_mass[j] = std::exp(log_density[j] - max_prev);
            pred_mean[j] = m_com + rho * (grid[j] - m_com);
        }
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = grid[i] - pred_mean[j];
                const double z = 0.5 * d * d / var;
                if (z < 60.0) acc += prev_mass[j] * std::exp(-z);
            }
            next[i] = std::log(std::max(acc, 1e-300)) + loglik(grid[i]);
        }
        log_density = std::move(next);
    }

    double mean() const {
        const double mx = *std::max_element(log_density.begin(), log_density.end());
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double w = std::exp(log_density[i] - mx);
            num += w * grid[i];
            den += w;
        }
        return num / den;
    }

    double variance() const {
        const double mu = mean();
        const double mx = *std::max_element(log_density.begin(), log_density.end());
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double w = std::exp(log_density[i] - mx);
            num += w * (grid[i] - mu) * (grid[i] - mu);
            den += w;
        }
        return num / den;
    }
};

/// Smoothed per-step marginals of a scalar AR(1) state given the whole
/// observation window, by grid forward-backward passes.
struct GridSmoother {
    std::vector<double> grid;
    double rho, m_com, var;
    // log alpha_t (filtered, unnormalized) per step, index 1..T; index 0 is the prior of z_1.
    std::vector<std::vector<double>> forward;
    std::vector<std::vector<double>> backward;

    GridSmoother(double lo, double hi, int points, double rho_, double m_com_, double var_)
        : grid(points), rho(rho_), m_com(m_com_), var(var_) {
        for (int i = 0; i < points; ++i) grid[i] = lo + (hi - lo) * i / (points - 1);
    }

    /// loglik(t, z) with t in 1..T; init is the Gaussian law of z_1.
    template <typename LogLik>
    void run(int T, double init_mean, double init_var, LogLik&& loglik) {
        const std::size_t n = grid.size();
        forward.assign(T + 1, std::vector<double>(n, 0.0));
        backward.assign(T + 1, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            const double d = grid[i] - init_mean;
            forward[1][i] = -0.5 * d * d / init_var + loglik(1, grid[i]);
        }
        for (int t = 2; t <= T; ++t) {
            const double mx = *std::max_element(forward[t - 1].begin(), forward[t - 1].end());
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double mean = m_com + rho * (grid[j] - m_com);
                    const double d = grid[i] - mean;
                    const double z = 0.5 * d * d / var;
                    if (z < 60.0) acc += std::exp(forward[t - 1][j] - mx) * std::exp(-z);
                }
                forward[t][i] = std::log(std::max(acc, 1e-300)) + mx + loglik(t, grid[i]);
            }
        }
        for (int t = T - 1; t >= 1; --t) {
            std::vector<double> next(n);
            double mx = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                next[j] = backward[t + 1][j] + loglik(t + 1, grid[j]);
                mx = std::max(mx, next[j]);
            }
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                const double mean = m_com + rho * (grid[i] - m_com);
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = grid[j] - mean;
                    const double z = 0.5 * d * d / var;
                    if (z < 60.0) acc += std::exp(next[j] - mx) * std::exp(-z);
                }
                backward[t][i] = std::log(std::max(acc, 1e-300)) + mx;
            }
        }
    }

    std::pair<double, double> smoothed_moments(int t) const {
        const std::size_t n = grid.size();
        std::vector<double> lp(n);
        double mx = -1e300;
        for (std::size_t i = 0; i < n; ++i) {
            lp[i] = forward[t][i] + backward[t][i];
            mx = std::max(mx, lp[i]);
        }
        double den = 0.0, num = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = std::exp(lp[i] - mx);
            den += w;
            num += w * grid[i];
        }
        const double mean = num / den;
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += std::exp(lp[i] - mx) * (grid[i] - mean) * (grid[i] - mean);
        return {mean, v / den};
    }
};

/// Exact Kalman filter for x_t = m + diag(rho)(x_{t-1} - m) + w,
/// w ~ N(0, Q diag), y_t = H x_t + v, v ~ N(0, sigma^2 I).
struct KalmanFilter {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::VectorXd rho, m_com;
    Eigen::MatrixXd Q, H;
    double obs_var;

    KalmanFilter(const Eigen::VectorXd& m_ini, const Eigen::VectorXd& rho_, const Eigen::VectorXd& m_com_,
                 const Eigen::VectorXd& q_diag, const Eigen::MatrixXd& H_, double sigma)
        : mean(m_ini),
          cov(q_diag.asDiagonal()),
          rho(rho_),
          m_com(m_com_),
          Q(q_diag.asDiagonal()),
          H(H_),
          obs_var(sigma * sigma) {}

    void step(const Eigen::VectorXd& y) {
        const Eigen::MatrixXd A = rho.asDiagonal();
        mean = m_com + rho.cwiseProduct(mean - m_com);
        cov = A * cov * A.transpose() + Q;
        const Eigen::MatrixXd S =
            H * cov * H.transpose() + obs_var * Eigen::MatrixXd::Identity(y.size(), y.size());
        const Eigen::MatrixXd K = cov * H.transpose() * S.inverse();
        mean += K * (y - H * mean);
        cov = cov - K * H * cov;
    }
};

/// Fixed linear Gaussian observation map over the 6-dim state; drop-in
/// replacement for the dipole observation model in engine-level checks.
struct LinearObs {
    Eigen::MatrixXd H;
    double sigma = 1.0;

    int channels() const { return static_cast<int>(H.rows()); }

    double log_likelihood(const megsis::DipoleState& s, const Eigen::VectorXd& y) const {
        const Eigen::VectorXd resid = y - H * s.x;
        const double var = sigma * sigma;
        return -0.5 * channels() * (std::log(2.0 * M_PI) + std::log(var)) - resid.squaredNorm() / (2.0 * var);
    }
};

/// Two-sample Kolmogorov-Smirnov distance between weighted samples.
inline double weighted_ks(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b) {
    auto norm = [](std::vector<std::pair<double, double>>& v) {
        double s = 0.0;
        for (auto& [x, w] : v) s += w;
        for (auto& [x, w] : v) w /= s;
        std::sort(v.begin(), v.end());
    };
    norm(a);
    norm(b);
    double d = 0.0, ca = 0.0, cb = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        const double xa = i < a.size() ? a[i].first : 1e308;
        const double xb = j < b.size() ? b[j].first : 1e308;
        if (xa <= xb) {
            ca += a[i++].second;
        } else {
            cb += b[j++].second;
        }
        d = std::max(d, std::abs(ca - cb));
    }
    return d;
}

/// Kish effective sample size of a weight vector.
inline double kish_ess(const std::vector<std::pair<double, double>>& sample) {
    double s = 0.0, s2 = 0.0;
    for (const auto& [x, w] : sample) {
        s += w;
        s2 += w * w;
    }
    return s * s / s2;
}

}  // namespace oracle

#endif
