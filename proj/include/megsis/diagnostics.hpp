#ifndef MEGSIS_DIAGNOSTICS_HPP
#define MEGSIS_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "megsis/core.hpp"

namespace megsis::diag {

struct DiagnosticsReport {
    double ess = 0.0;
    double gelman_rubin = 0.0;
    double geweke_z = 0.0;
    double heidelberger_p = 0.0;
    double raftery_lewis_I = 0.0;
    std::vector<double> acf;
};

inline double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Biased-normalized sample autocorrelation for lags 0..max_lag.
inline std::vector<double> acf(std::span<const double> chain, int max_lag) {
    const int n = static_cast<int>(chain.size());
    if (n <= max_lag) throw DataError("acf: chain length must exceed max_lag");
    const double mu = mean_of(chain);
    double ssd = 0.0;
    for (double v : chain) ssd += (v - mu) * (v - mu);
    if (!(ssd > 0.0)) throw DegenerateChainError("acf: chain has no variation");
    std::vector<double> out(static_cast<std::size_t>(max_lag) + 1);
    for (int k = 0; k <= max_lag; ++k) {
        double acc = 0.0;
        for (int i = 0; i + k < n; ++i) acc += (chain[static_cast<std::size_t>(i)] - mu) * (chain[static_cast<std::size_t>(i + k)] - mu);
        out[static_cast<std::size_t>(k)] = acc / ssd;
    }
    return out;
}

namespace detail {

/// Integrated autocorrelation time 1 + 2 sum acf[k], truncated by the initial
/// positive sequence rule on sums of adjacent lag pairs.
inline double ips_tau(std::span<const double> chain, int hard_cap = 5000) {
    const int n = static_cast<int>(chain.size());
    const double mu = mean_of(chain);
    double ssd = 0.0;
    for (double v : chain) ssd += (v - mu) * (v - mu);
    if (!(ssd > 0.0)) throw DegenerateChainError("ips_tau: chain has no variation");

    auto acf_at = [&](int k) {
        double acc = 0.0;
        for (int i = 0; i + k < n; ++i) acc += (chain[static_cast<std::size_t>(i)] - mu) * (chain[static_cast<std::size_t>(i + k)] - mu);
        return acc / ssd;
    };
    const int cap = std::min(n - 2, hard_cap);
    double tau = 1.0;
    for (int k = 1; k + 1 <= cap; k += 2) {
        const double pair = acf_at(k) + acf_at(k + 1);
        if (pair <= 0.0) break;
        tau += 2.0 * pair;
    }
    return tau;
}

/// Spectral density at frequency zero from a Yule-Walker AR fit with AIC
/// order selection: s(0) = innovation variance / (1 - sum of coefficients)^2.
inline double spectrum0_ar(std::span<const double> chain) {
    const int n = static_cast<int>(chain.size());
    const double mu = mean_of(chain);
    const int order_max = std::min(n - 1, static_cast<int>(std::floor(10.0 * std::log10(static_cast<double>(n)))));
    std::vector<double> c(static_cast<std::size_t>(order_max) + 1, 0.0);
    for (int k = 0; k <= order_max; ++k) {
        for (int i = 0; i + k < n; ++i) c[static_cast<std::size_t>(k)] += (chain[static_cast<std::size_t>(i)] - mu) * (chain[static_cast<std::size_t>(i + k)] - mu);
        c[static_cast<std::size_t>(k)] /= static_cast<double>(n);
    }
    if (!(c[0] > 0.0)) throw DegenerateChainError("spectrum0_ar: chain has no variation");

    // Levinson-Durbin recursion, keeping the AIC-best order.
    std::vector<double> phi, best_phi;
    double v = c[0];
    double best_aic = n * std::log(v);
    double best_v = v;
    for (int k = 1; k <= order_max; ++k) {
        double num = c[static_cast<std::size_t>(k)];
        for (int j = 1; j < k; ++j) num -= phi[static_cast<std::size_t>(j - 1)] * c[static_cast<std::size_t>(k - j)];
        const double refl = num / v;
        std::vector<double> next(static_cast<std::size_t>(k));
        for (int j = 1; j < k; ++j) next[static_cast<std::size_t>(j - 1)] = phi[static_cast<std::size_t>(j - 1)] - refl * phi[static_cast<std::size_t>(k - 1 - j)];
        next[static_cast<std::size_t>(k - 1)] = refl;
        phi = std::move(next);
        v *= (1.0 - refl * refl);
        if (!(v > 0.0)) break;
        const double aic = n * std::log(v) + 2.0 * k;
        if (aic < best_aic) {
            best_aic = aic;
            best_v = v;
            best_phi = phi;
        }
    }
    double coef_sum = 0.0;
    for (double p : best_phi) coef_sum += p;
    const double denom = (1.0 - coef_sum) * (1.0 - coef_sum);
    return best_v / std::max(denom, 1e-12);
}

/// Modified Bessel function K_nu(x) by direct quadrature of
/// int_0^inf exp(-x cosh t) cosh(nu t) dt  (x > 0).
inline double bessel_k(double nu, double x) {
    const double t_max = std::acosh(std::max(2.0, 700.0 / x));
    const int steps = 4000;
    const double h = t_max / steps;
    double acc = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double t = i * h;
        const double f = std::exp(-x * std::cosh(t)) * std::cosh(nu * t);
        const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * f;
    }
    return acc * h / 3.0;
}

/// CDF of the Cramer-von Mises limiting distribution (four-term series).
inline double cramer_von_mises_cdf(double q) {
    if (!(q > 0.0)) return 0.0;
    double cdf = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double z = std::tgamma(k + 0.5) * std::sqrt(4.0 * k + 1.0) /
                         (std::tgamma(k + 1.0) * std::pow(M_PI, 1.5) * std::sqrt(q));
        const double x = (4.0 * k + 1.0) * (4.0 * k + 1.0) / (16.0 * q);
        if (x > 350.0) continue;
        cdf += z * std::exp(-x) * bessel_k(0.25, x);
    }
    return std::min(1.0, cdf);
}

}  // namespace detail

/// n / (1 + 2 sum acf) with initial-positive-sequence truncation, clamped to (0, n].
inline double ess(std::span<const double> chain) {
    const double n = static_cast<double>(chain.size());
    const double tau = detail::ips_tau(chain);
    return std::min(n, n / std::max(tau, 1e-12));
}

/// Potential scale reduction factor sqrt([(n-1)/n W + B/n] / W).
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
    const int m = static_cast<int>(chains.size());
    if (m < 2) throw DataError("gelman_rubin: need at least 2 chains");
    const std::size_t n = chains.front().size();
    if (n < 10) throw DataError("gelman_rubin: chains must have length >= 10");
    for (const auto& c : chains)
        if (c.size() != n) throw DataError("gelman_rubin: chains must have equal length");

    std::vector<double> means(static_cast<std::size_t>(m));
    double w_acc = 0.0;
    for (int j = 0; j < m; ++j) {
        const auto& c = chains[static_cast<std::size_t>(j)];
        const double mu = mean_of(c);
        means[static_cast<std::size_t>(j)] = mu;
        double v = 0.0;
        for (double x : c) v += (x - mu) * (x - mu);
        w_acc += v / static_cast<double>(n - 1);
    }
    const double W = w_acc / m;
    const double grand = mean_of(means);
    double b_acc = 0.0;
    for (double mu : means) b_acc += (mu - grand) * (mu - grand);
    const double B = static_cast<double>(n) * b_acc / (m - 1);
    if (W == 0.0) return B == 0.0 ? 1.0 : kInf;
    const double nn = static_cast<double>(n);
    return std::sqrt(((nn - 1.0) / nn * W + B / nn) / W);
}

/// Difference of early/late window means over its spectral standard error.
inline double geweke(std::span<const double> chain, double frac_a = 0.1, double frac_b = 0.5) {
    const int n = static_cast<int>(chain.size());
    const int na = static_cast<int>(std::floor(frac_a * n));
    const int nb = static_cast<int>(std::floor(frac_b * n));
    if (na < 10 || nb < 10) throw DataError("geweke: windows too short");
    const auto a = chain.subspan(0, static_cast<std::size_t>(na));
    const auto b = chain.subspan(static_cast<std::size_t>(n - nb));
    const double se2 = detail::spectrum0_ar(a) / na + detail::spectrum0_ar(b) / nb;
    return (mean_of(a) - mean_of(b)) / std::sqrt(se2);
}

/// Cramer-von Mises stationarity p-value with the usual iterative discard of
/// initial 10% portions (up to half the chain). The zero-frequency spectral
/// density is estimated once from the second half and reused. The p-value of
/// the last portion tested is returned; values below 0.05 signal failure.
inline double heidelberger_welch(std::span<const double> chain) {
    const int n = static_cast<int>(chain.size());
    if (n < 100) throw DataError("heidelberger_welch: need n >= 100");
    const double s0 = detail::spectrum0_ar(chain.subspan(static_cast<std::size_t>(n / 2)));
    if (!(s0 > 0.0)) throw DegenerateChainError("heidelberger_welch: zero spectral density");
    double p = 0.0;
    for (int drop = 0; drop <= 5; ++drop) {
        const int start = static_cast<int>(std::floor(0.1 * drop * n));
        const auto part = chain.subspan(static_cast<std::size_t>(start));
        const int nn = static_cast<int>(part.size());
        const double mu = mean_of(part);
        double cusum = 0.0, stat = 0.0;
        for (int k = 1; k <= nn; ++k) {
            cusum += part[static_cast<std::size_t>(k - 1)];
            const double bridge = (cusum - k * mu) / std::sqrt(nn * s0);
            stat += bridge * bridge;
        }
        stat /= nn;
        p = 1.0 - detail::cramer_von_mises_cdf(stat);
        if (p > 0.05) return p;
    }
    return p;
}

/// Raftery-Lewis dependence factor I for estimating the q-quantile to
/// precision r with confidence s: thin the exceedance indicator until a
/// first-order Markov fit beats a second-order one (BIC), fit the two-state
/// chain, and compare the implied run length against the i.i.d. minimum.
inline double raftery_lewis(std::span<const double> chain, double q = 0.025, double r = 0.005,
                            double s = 0.95) {
    const int n = static_cast<int>(chain.size());
    // Normal quantile for (1+s)/2 via Acklam's rational approximation.
    auto norm_quantile = [](double p) {
        static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
        static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
        static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
        static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
        const double plow = 0.02425;
        if (p < plow) {
            const double u = std::sqrt(-2.0 * std::log(p));
            return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
                   ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
        }
        if (p > 1.0 - plow) {
            const double u = std::sqrt(-2.0 * std::log(1.0 - p));
            return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
                   ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
        }
        const double u = p - 0.5, t = u * u;
        return (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * u /
               (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
    };
    const double phi = norm_quantile(0.5 * (1.0 + s));
    const double nmin = std::ceil(q * (1.0 - q) * phi * phi / (r * r));
    if (n < static_cast<int>(nmin)) throw DataError("raftery_lewis: pilot chain shorter than required minimum");

    // q-quantile exceedance indicator.
    std::vector<double> sorted(chain.begin(), chain.end());
    std::sort(sorted.begin(), sorted.end());
    const double cut = sorted[static_cast<std::size_t>(std::clamp(static_cast<int>(q * n), 0, n - 1))];
    std::vector<int> dichot(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) dichot[static_cast<std::size_t>(i)] = chain[static_cast<std::size_t>(i)] <= cut ? 1 : 0;

    int kthin = 0;
    std::vector<int> thinned;
    double bic = 1.0;
    while (bic >= 0.0) {
        ++kthin;
        thinned.clear();
        for (int i = 0; i < n; i += kthin) thinned.push_back(dichot[static_cast<std::size_t>(i)]);
        const int nt = static_cast<int>(thinned.size());
        if (nt < 3) break;
        double tran[2][2][2] = {};
        for (int i = 2; i < nt; ++i) ++tran[thinned[static_cast<std::size_t>(i - 2)]][thinned[static_cast<std::size_t>(i - 1)]][thinned[static_cast<std::size_t>(i)]];
        double g2 = 0.0;
        for (int i1 = 0; i1 < 2; ++i1)
            for (int i2 = 0; i2 < 2; ++i2)
                for (int i3 = 0; i3 < 2; ++i3) {
                    if (tran[i1][i2][i3] == 0.0) continue;
                    const double row = tran[i1][i2][0] + tran[i1][i2][1];
                    const double col = tran[0][i2][i3] + tran[1][i2][i3];
                    const double mid = tran[0][i2][0] + tran[0][i2][1] + tran[1][i2][0] + tran[1][i2][1];
                    const double fitted = row * col / mid;
                    g2 += 2.0 * tran[i1][i2][i3] * std::log(tran[i1][i2][i3] / fitted);
                }
        bic = g2 - 2.0 * std::log(static_cast<double>(nt - 2));
    }

    const int nt = static_cast<int>(thinned.size());
    double final_tran[2][2] = {};
    for (int i = 1; i < nt; ++i) ++final_tran[thinned[static_cast<std::size_t>(i - 1)]][thinned[static_cast<std::size_t>(i)]];
    const double from0 = final_tran[0][0] + final_tran[0][1];
    const double from1 = final_tran[1][0] + final_tran[1][1];
    if (from0 == 0.0 || from1 == 0.0) return kInf;
    const double alpha = final_tran[0][1] / from0;
    const double beta = final_tran[1][0] / from1;
    if (alpha == 0.0 || beta == 0.0) return kInf;

    const double eps = 0.001;
    const double nburn = std::ceil(std::log(eps * (alpha + beta) / std::max(alpha, beta)) /
                                   std::log(std::abs(1.0 - alpha - beta))) *
                         kthin;
    const double nkeep =
        std::ceil((2.0 - alpha - beta) * alpha * beta * phi * phi / ((alpha + beta) * (alpha + beta) * (alpha + beta) * r * r)) *
        kthin;
    return (nburn + nkeep) / nmin;
}

}  // namespace megsis::diag

#endif
