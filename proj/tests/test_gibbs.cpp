#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "megsis/diagnostics.hpp"
#include "megsis/gibbs.hpp"
#include "megsis/scenario.hpp"
#include "support/oracles.hpp"

using namespace megsis;

namespace {

double chain_mean(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double chain_sd(const std::vector<double>& x) {
    const double mu = chain_mean(x);
    double v = 0.0;
    for (double a : x) v += (a - mu) * (a - mu);
    return std::sqrt(v / (static_cast<double>(x.size()) - 1.0));
}

/// Monte Carlo standard error of the chain mean, autocorrelation-adjusted.
double chain_mcse(const std::vector<double>& x) {
    return chain_sd(x) / std::sqrt(diag::ess(x));
}

ObsModel flat_obs() {
    ObsModel obs;
    obs.sensors = make_sensor_array(SensorKind::hemisphere, 10);
    obs.gain = FieldGain(1.0);
    obs.sigma1 = 1e8;
    return obs;
}

}  // namespace

TEST_CASE("vanishing proposal variance freezes the random-walk chain", "[gibbs]") {
    const Scenario sc = gen_case1(11, 300.0);
    GibbsConfig cfg;
    cfg.n_iter = 200;
    cfg.burn_in = 10;
    cfg.sigma3 = Vec6::Constant(1e-20);
    cfg.seed = 5;
    const ChainTrace trace = random_walk_gibbs(ConstantDynamics{sc.model}, sc.obs, sc.ys, cfg);
    double accept = 0.0;
    for (int t = 1; t <= trace.T; ++t) accept += trace.acceptance_rate(t);
    accept /= trace.T;
    CHECK(accept > 0.999);
    const auto z = trace.component_chain(8, 2);
    for (double v : z) CHECK(std::abs(v - z.front()) < 1e-6);
}

TEST_CASE("flat likelihood lets the random-walk chain recover the prior", "[gibbs]") {
    ArModel model;
    model.m_ini << 1, 1, 5, 3, 3, 3;
    model.m_com.setZero();
    model.rho << 1, 1, 0.9, 1, 1, 1;
    model.sigma2 << 0, 0, 0.0225, 0, 0, 0;
    const ObsModel obs = flat_obs();
    ObservationSeries ys = ObservationSeries::Zero(5, obs.channels());

    GibbsConfig cfg;
    cfg.n_iter = 4000;
    cfg.burn_in = 500;
    cfg.sigma3 = Vec6::Constant(0.0225);
    cfg.seed = 7;
    const ChainTrace trace = random_walk_gibbs(ConstantDynamics{model}, obs, ys, cfg);

    const auto z3 = trace.component_chain(3, 2, cfg.burn_in);
    const double prior_mean = 5.0 * 0.9 * 0.9 * 0.9;
    CHECK(std::abs(chain_mean(z3) - prior_mean) < 3.0 * chain_mcse(z3));
}

TEST_CASE("hybrid moves accept almost surely under a flat likelihood", "[gibbs]") {
    ArModel model;
    model.m_ini << 1, 1, 5, 3, 3, 3;
    model.m_com.setZero();
    model.rho << 1, 1, 0.9, 1, 1, 1;
    model.sigma2 << 0, 0, 0.0225, 0, 0, 0;
    const ObsModel obs = flat_obs();
    ObservationSeries ys = ObservationSeries::Zero(6, obs.channels());
    GibbsConfig cfg;
    cfg.n_iter = 500;
    cfg.burn_in = 100;
    cfg.seed = 13;
    const ChainTrace trace = hybrid_gibbs(ConstantDynamics{model}, obs, ys, cfg);
    for (int t = 1; t <= trace.T; ++t) CHECK(trace.acceptance_rate(t) > 0.999);
}

TEST_CASE("single-step hybrid matches the grid posterior", "[gibbs]") {
    const Scenario sc = gen_case1(21, 300.0);
    const ObservationSeries ys = sc.ys.topRows(1);

    GibbsConfig cfg;
    cfg.n_iter = 20000;
    cfg.burn_in = 1000;
    cfg.seed = 17;
    const ChainTrace trace = hybrid_gibbs(ConstantDynamics{sc.model}, sc.obs, ys, cfg);
    const auto z = trace.component_chain(1, 2, cfg.burn_in);

    // Grid oracle: prior marginal of z_1 times the first-step likelihood.
    const Gaussian6 marg = first_state_marginal(ConstantDynamics{sc.model});
    const int G = 4001;
    double num = 0.0, den = 0.0, mx = -1e300;
    std::vector<double> lp(G), zs(G);
    for (int i = 0; i < G; ++i) {
        const double zv = 2.0 + 5.0 * i / (G - 1);
        Vec6 state = sc.model.m_ini;
        state[2] = zv;
        zs[static_cast<std::size_t>(i)] = zv;
        lp[static_cast<std::size_t>(i)] = log_normal_pdf(zv, marg.mean[2], marg.var[2]) +
                                          sc.obs.log_likelihood(DipoleState(state), ys.row(0).transpose());
        mx = std::max(mx, lp[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < G; ++i) {
        const double w = std::exp(lp[static_cast<std::size_t>(i)] - mx);
        den += w;
        num += w * zs[static_cast<std::size_t>(i)];
    }
    const double oracle_mean = num / den;
    CHECK(std::abs(chain_mean(z) - oracle_mean) < 2.0 * chain_mcse(z));
}

TEST_CASE("block of size one behaves like the single-site hybrid", "[gibbs]") {
    const Scenario sc = gen_case1(31, 300.0);
    const ObservationSeries ys = sc.ys.topRows(3);

    GibbsConfig cfg;
    cfg.n_iter = 15000;
    cfg.burn_in = 1000;
    cfg.seed = 19;
    const ChainTrace hybrid = hybrid_gibbs(ConstantDynamics{sc.model}, sc.obs, ys, cfg);

    GibbsConfig bcfg = cfg;
    bcfg.block = std::make_pair(2, 2);
    bcfg.seed = 23;
    const ChainTrace block = block_hybrid_gibbs(ConstantDynamics{sc.model}, sc.obs, ys, bcfg);

    const auto za = hybrid.component_chain(2, 2, cfg.burn_in);
    const auto zb = block.component_chain(2, 2, cfg.burn_in);
    const double se = std::sqrt(chain_mcse(za) * chain_mcse(za) + chain_mcse(zb) * chain_mcse(zb));
    CHECK(std::abs(chain_mean(za) - chain_mean(zb)) < 2.0 * se);
}

TEST_CASE("whole-path block under a flat likelihood accepts almost surely", "[gibbs]") {
    ArModel model;
    model.m_ini << 1, 1, 5, 3, 3, 3;
    model.m_com.setZero();
    model.rho << 1, 1, 0.9, 1, 1, 1;
    model.sigma2 << 0, 0, 0.0225, 0, 0, 0;
    const ObsModel obs = flat_obs();
    ObservationSeries ys = ObservationSeries::Zero(4, obs.channels());
    GibbsConfig cfg;
    cfg.n_iter = 500;
    cfg.burn_in = 100;
    cfg.block = std::make_pair(1, 4);
    cfg.seed = 29;
    const ChainTrace trace = block_hybrid_gibbs(ConstantDynamics{model}, obs, ys, cfg);
    for (int t = 1; t <= 4; ++t) CHECK(trace.acceptance_rate(t) > 0.999);
}

TEST_CASE("block move matches the grid-smoothed posterior on a three-step toy", "[gibbs]") {
    const Scenario sc = gen_case1(41, 300.0);
    const ObservationSeries ys = sc.ys.topRows(3);

    GibbsConfig cfg;
    cfg.n_iter = 20000;
    cfg.burn_in = 2000;
    cfg.block = std::make_pair(2, 3);
    cfg.seed = 31;
    const ChainTrace trace = block_hybrid_gibbs(ConstantDynamics{sc.model}, sc.obs, ys, cfg);

    const Gaussian6 marg = first_state_marginal(ConstantDynamics{sc.model});
    oracle::GridSmoother smoother(2.0, 7.0, 2001, 0.9, 0.0, 0.0225);
    smoother.run(3, marg.mean[2], marg.var[2], [&](int t, double z) {
        Vec6 state = sc.model.m_ini;
        state[2] = z;
        return sc.obs.log_likelihood(DipoleState(state), ys.row(t - 1).transpose());
    });

    for (int t = 1; t <= 3; ++t) {
        const auto chain = trace.component_chain(t, 2, cfg.burn_in);
        const auto [mean, var] = smoother.smoothed_moments(t);
        CHECK(std::abs(chain_mean(chain) - mean) < 2.0 * chain_mcse(chain));
    }
}

TEST_CASE("single-site hybrid matches the grid-smoothed posterior", "[gibbs]") {
    const Scenario sc = gen_case1(43, 300.0);
    const ObservationSeries ys = sc.ys.topRows(3);

    GibbsConfig cfg;
    cfg.n_iter = 20000;
    cfg.burn_in = 2000;
    cfg.seed = 37;
    const ChainTrace trace = hybrid_gibbs(ConstantDynamics{sc.model}, sc.obs, ys, cfg);

    const Gaussian6 marg = first_state_marginal(ConstantDynamics{sc.model});
    oracle::GridSmoother smoother(2.0, 7.0, 2001, 0.9, 0.0, 0.0225);
    smoother.run(3, marg.mean[2], marg.var[2], [&](int t, double z) {
        Vec6 state = sc.model.m_ini;
        state[2] = z;
        return sc.obs.log_likelihood(DipoleState(state), ys.row(t - 1).transpose());
    });

    for (int t = 1; t <= 3; ++t) {
        const auto chain = trace.component_chain(t, 2, cfg.burn_in);
        const auto [mean, var] = smoother.smoothed_moments(t);
        CHECK(std::abs(chain_mean(chain) - mean) < 2.0 * chain_mcse(chain));
        CHECK(chain_sd(chain) == Catch::Approx(std::sqrt(var)).epsilon(0.10));
    }
}

TEST_CASE("stationary occupancy and reversibility on a discretized single step", "[gibbs]") {
    const Scenario sc = gen_case1(53, 300.0);
    const ObservationSeries ys = sc.ys.topRows(1);

    GibbsConfig cfg;
    cfg.n_iter = 60000;
    cfg.burn_in = 2000;
    cfg.seed = 41;
    const ChainTrace trace = hybrid_gibbs(ConstantDynamics{sc.model}, sc.obs, ys, cfg);
    const auto z = trace.component_chain(1, 2, cfg.burn_in);

    // Grid posterior masses over equal-width bins spanning the chain range.
    const Gaussian6 marg = first_state_marginal(ConstantDynamics{sc.model});
    const double zmin = *std::min_element(z.begin(), z.end()) - 1e-9;
    const double zmax = *std::max_element(z.begin(), z.end()) + 1e-9;
    const int bins = 10;
    std::vector<double> mass(bins, 0.0);
    const int G = 20000;
    double mx = -1e300;
    std::vector<double> lp(G), zg(G);
    for (int i = 0; i < G; ++i) {
        zg[static_cast<std::size_t>(i)] = zmin + (zmax - zmin) * (i + 0.5) / G;
        Vec6 state = sc.model.m_ini;
        state[2] = zg[static_cast<std::size_t>(i)];
        lp[static_cast<std::size_t>(i)] = log_normal_pdf(zg[static_cast<std::size_t>(i)], marg.mean[2], marg.var[2]) +
                                          sc.obs.log_likelihood(DipoleState(state), ys.row(0).transpose());
        mx = std::max(mx, lp[static_cast<std::size_t>(i)]);
    }
    double total = 0.0;
    for (int i = 0; i < G; ++i) {
        const double w = std::exp(lp[static_cast<std::size_t>(i)] - mx);
        const int b = std::min(bins - 1, static_cast<int>((zg[static_cast<std::size_t>(i)] - zmin) / (zmax - zmin) * bins));
        mass[static_cast<std::size_t>(b)] += w;
        total += w;
    }
    for (auto& m : mass) m /= total;

    auto bin_of = [&](double v) {
        return std::min(bins - 1, std::max(0, static_cast<int>((v - zmin) / (zmax - zmin) * bins)));
    };

    SECTION("thinned occupancy matches the grid posterior") {
        const int thin = 10;
        std::vector<double> counts(bins, 0.0);
        int n = 0;
        for (std::size_t i = 0; i < z.size(); i += thin) {
            counts[static_cast<std::size_t>(bin_of(z[i]))] += 1.0;
            ++n;
        }
        double chi2 = 0.0;
        int dof = 0;
        for (int b = 0; b < bins; ++b) {
            const double expected = n * mass[static_cast<std::size_t>(b)];
            if (expected < 5.0) continue;
            chi2 += (counts[static_cast<std::size_t>(b)] - expected) * (counts[static_cast<std::size_t>(b)] - expected) / expected;
            ++dof;
        }
        // 1% critical values for 5..10 dof.
        const double crit[] = {15.09, 16.81, 18.48, 20.09, 21.67, 23.21};
        REQUIRE(dof >= 5);
        CHECK(chi2 < crit[std::min(dof, 10) - 5]);
    }

    SECTION("transition counts are symmetric") {
        std::vector<std::vector<double>> n_ij(bins, std::vector<double>(bins, 0.0));
        for (std::size_t i = 0; i + 1 < z.size(); ++i) ++n_ij[static_cast<std::size_t>(bin_of(z[i]))][static_cast<std::size_t>(bin_of(z[i + 1]))];
        double chi2 = 0.0;
        int dof = 0;
        for (int a = 0; a < bins; ++a)
            for (int b = a + 1; b < bins; ++b) {
                const double f = n_ij[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                const double g = n_ij[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)];
                if (f + g < 10.0) continue;
                chi2 += (f - g) * (f - g) / (f + g);
                ++dof;
            }
        REQUIRE(dof >= 3);
        // Generous 1% bound: critical value grows slower than 3 per dof here.
        CHECK(chi2 < 6.63 + 3.0 * dof);
    }
}

TEST_CASE("identical seeds give bit-identical chains", "[gibbs]") {
    const Scenario sc = gen_case1(61, 300.0);
    GibbsConfig cfg;
    cfg.n_iter = 50;
    cfg.burn_in = 5;
    cfg.seed = 43;
    const ChainTrace a = random_walk_gibbs(ConstantDynamics{sc.model}, sc.obs, sc.ys, cfg);
    const ChainTrace b = random_walk_gibbs(ConstantDynamics{sc.model}, sc.obs, sc.ys, cfg);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}
