#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "megsis/scenario.hpp"
#include "megsis/state_space.hpp"
#include "support/oracles.hpp"

using namespace megsis;

namespace {

ArModel case1_model() {
    ArModel m;
    m.m_ini << 1, 1, 5, 3, 3, 3;
    m.m_com.setZero();
    m.rho << 1, 1, 0.9, 1, 1, 1;
    m.sigma2 << 0, 0, 0.0225, 0, 0, 0;
    return m;
}

// Long-double evaluation of a scalar Gaussian log density, kept separate from
// the library formula.
double scalar_log_normal(double x, double mean, double var) {
    const long double pi = 3.14159265358979323846264338327950288L;
    const long double d = static_cast<long double>(x) - mean;
    return static_cast<double>(-0.5L * std::log(2.0L * pi * static_cast<long double>(var)) -
                               d * d / (2.0L * static_cast<long double>(var)));
}

}  // namespace

TEST_CASE("initial sampling honors zero variances", "[state]") {
    ArModel m = case1_model();

    SECTION("all-zero variance returns m_ini exactly") {
        ArModel frozen = m;
        frozen.sigma2.setZero();
        RngStream rng(3);
        CHECK(frozen.initial_sample(rng).x == frozen.m_ini);
    }

    SECTION("pinned components are exact, z variance matches") {
        RngStream rng(17);
        const int n = 100000;
        double acc = 0.0, acc2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const DipoleState s = m.initial_sample(rng);
            CHECK(s.x[0] == 1.0);
            CHECK(s.x[1] == 1.0);
            CHECK(s.x[3] == 3.0);
            CHECK(s.x[4] == 3.0);
            CHECK(s.x[5] == 3.0);
            acc += s.x[2];
            acc2 += s.x[2] * s.x[2];
        }
        const double mean = acc / n;
        const double var = acc2 / n - mean * mean;
        CHECK(var == Catch::Approx(0.0225).epsilon(0.05));
    }
}

TEST_CASE("transition sampling limits", "[state]") {
    RngStream rng(11);
    const DipoleState prev(Vec3(0.4, -1, 2), Vec3(3, 0, 1));

    SECTION("rho = 1, sigma2 = 0 is pure persistence") {
        ArModel m;
        m.rho.setOnes();
        m.sigma2.setZero();
        CHECK(m.transition_sample(prev, rng).x == prev.x);
    }

    SECTION("rho = 0, sigma2 = 0 returns m_com") {
        ArModel m;
        m.rho.setZero();
        m.sigma2.setZero();
        m.m_com << 5, 4, 3, 2, 1, 0;
        CHECK(m.transition_sample(prev, rng).x == m.m_com);
    }

    SECTION("long-run z variance matches the stationary value") {
        ArModel m = case1_model();
        DipoleState s = m.initial_sample(rng);
        const int n = 100000;
        double acc = 0.0, acc2 = 0.0;
        for (int i = 0; i < n; ++i) {
            s = m.transition_sample(s, rng);
            acc += s.x[2];
            acc2 += s.x[2] * s.x[2];
        }
        const double mean = acc / n;
        const double var = acc2 / n - mean * mean;
        CHECK(var == Catch::Approx(0.0225 / (1.0 - 0.81)).epsilon(0.05));
    }
}

TEST_CASE("transition log density", "[state]") {
    ArModel m;
    m.m_com << 1, -1, 0, 2, 0, 0;
    m.rho << 0.5, 0.9, 0.7, 0.3, 0.8, 0.6;
    m.sigma2 << 0.3, 0.2, 0.5, 0.1, 0.4, 0.25;

    SECTION("zero residual gives the pure normalization") {
        const DipoleState prev(Vec6::Constant(0.7));
        const DipoleState next(m.deterministic_image(prev.x));
        double want = 0.0;
        for (int i = 0; i < 6; ++i) want += -0.5 * (kLogTwoPi + std::log(m.sigma2[i]));
        CHECK(m.transition_logpdf(prev, next) == Catch::Approx(want).epsilon(1e-12));
    }

    SECTION("out-of-bounds next is impossible") {
        ArModel bounded = m;
        bounded.bounds.lo = Vec6::Constant(-1.0);
        bounded.bounds.hi = Vec6::Constant(1.0);
        const DipoleState prev(Vec6::Zero());
        Vec6 next = Vec6::Zero();
        next[3] = 1.5;
        CHECK(bounded.transition_logpdf(prev, DipoleState(next)) == -kInf);
    }

    SECTION("random pairs match the scalar oracle") {
        RngStream rng(23);
        for (int trial = 0; trial < 50; ++trial) {
            Vec6 a, b;
            for (int i = 0; i < 6; ++i) {
                a[i] = 2.0 * rng.normal();
                b[i] = 2.0 * rng.normal();
            }
            double want = 0.0;
            for (int i = 0; i < 6; ++i) {
                const double mean = m.m_com[i] + m.rho[i] * (a[i] - m.m_com[i]);
                want += scalar_log_normal(b[i], mean, m.sigma2[i]);
            }
            const double got = m.transition_logpdf(DipoleState(a), DipoleState(b));
            CHECK(std::abs(got - want) < 1e-12 * std::max(1.0, std::abs(want)));
        }
    }

    SECTION("deterministic components require an exact hit") {
        ArModel pinned = m;
        pinned.sigma2[1] = 0.0;
        const DipoleState prev(Vec6::Constant(0.3));
        Vec6 good = pinned.deterministic_image(prev.x);
        Vec6 bad = good;
        bad[1] += 0.01;
        CHECK(std::isfinite(pinned.transition_logpdf(prev, DipoleState(good))));
        CHECK(pinned.transition_logpdf(prev, DipoleState(bad)) == -kInf);
    }

    SECTION("density integrates to one componentwise") {
        const DipoleState prev(Vec6::Constant(0.2));
        const Vec6 image = m.deterministic_image(prev.x);
        for (int comp = 0; comp < 6; ++comp) {
            // Log contribution of the pinned companion components.
            const double others = m.transition_logpdf(prev, DipoleState(image)) -
                                  scalar_log_normal(image[comp], image[comp], m.sigma2[comp]);
            const double sd = std::sqrt(m.sigma2[comp]);
            const int steps = 20000;
            const double lo = image[comp] - 9 * sd, hi = image[comp] + 9 * sd;
            const double h = (hi - lo) / steps;
            double acc = 0.0;
            for (int i = 0; i <= steps; ++i) {
                Vec6 next = image;
                next[comp] = lo + i * h;
                const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
                acc += w * std::exp(m.transition_logpdf(prev, DipoleState(next)) - others);
            }
            acc *= h;
            CHECK(acc == Catch::Approx(1.0).margin(1e-4));
        }
    }
}

TEST_CASE("likelihood log density", "[state]") {
    ObsModel obs;
    obs.sensors = make_sensor_array(SensorKind::hemisphere, 15);
    obs.gain = FieldGain(1.0);
    obs.sigma1 = 0.25;
    const DipoleState s(Vec3(1, 0.5, 4), Vec3(2, 1, 0));
    const Eigen::VectorXd clean = obs.predict(s);

    SECTION("noiseless data hits the normalization exactly") {
        const double want = obs.channels() * (-0.5 * (kLogTwoPi + std::log(0.0625)));
        CHECK(obs.log_likelihood(s, clean) == Catch::Approx(want).epsilon(1e-12));
    }

    SECTION("a single-channel offset shifts by -delta^2 / (2 sigma1^2)") {
        Eigen::VectorXd bumped = clean;
        const double delta = 0.4;
        bumped[3] += delta;
        const double diff = obs.log_likelihood(s, bumped) - obs.log_likelihood(s, clean);
        CHECK(diff == Catch::Approx(-delta * delta / (2 * 0.0625)).epsilon(1e-12));
    }

    SECTION("random readings match the per-channel oracle") {
        RngStream rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd y = clean;
            for (int k = 0; k < y.size(); ++k) y[k] += rng.normal();
            double want = 0.0;
            for (int k = 0; k < y.size(); ++k) want += scalar_log_normal(y[k], clean[k], 0.0625);
            CHECK(std::abs(obs.log_likelihood(s, y) - want) < 1e-12 * std::abs(want));
        }
    }

    SECTION("sigma1 = 0 is a configuration error") {
        ObsModel bad = obs;
        bad.sigma1 = 0.0;
        CHECK_THROWS_AS(bad.log_likelihood(s, clean), ConfigError);
    }
}

TEST_CASE("full conditional of one state given both neighbors", "[state]") {
    SECTION("rho = 0 ignores the neighbors") {
        ArModel m;
        m.rho.setZero();
        m.sigma2 = Vec6::Constant(0.4);
        m.m_com << 1, 2, 3, 4, 5, 6;
        const Gaussian6 g = m.full_conditional(DipoleState(Vec6::Constant(9)), DipoleState(Vec6::Constant(-9)));
        for (int i = 0; i < 6; ++i) {
            CHECK(g.mean[i] == Catch::Approx(m.m_com[i]).epsilon(1e-14));
            CHECK(g.var[i] == Catch::Approx(0.4).epsilon(1e-14));
        }
    }

    SECTION("rho = 1 is the random-walk bridge") {
        ArModel m;
        m.rho.setOnes();
        m.sigma2 = Vec6::Constant(0.5);
        m.m_com << 4, -2, 7, 0, 1, 3;
        const Vec6 prev = Vec6::Constant(2.0), next = Vec6::Constant(6.0);
        const Gaussian6 g = m.full_conditional(DipoleState(prev), DipoleState(next));
        for (int i = 0; i < 6; ++i) {
            CHECK(g.mean[i] == Catch::Approx(4.0).epsilon(1e-14));
            CHECK(g.var[i] == Catch::Approx(0.25).epsilon(1e-14));
        }
    }

    SECTION("proportional to the product of the two transition densities") {
        RngStream rng(41);
        for (int trial = 0; trial < 100; ++trial) {
            ArModel m;
            for (int i = 0; i < 6; ++i) {
                m.rho[i] = 2.0 * rng.uniform() - 0.5;
                m.sigma2[i] = 0.05 + rng.uniform();
                m.m_com[i] = 2.0 * rng.normal();
            }
            Vec6 prev, next;
            for (int i = 0; i < 6; ++i) {
                prev[i] = 2.0 * rng.normal();
                next[i] = 2.0 * rng.normal();
            }
            const Gaussian6 g = m.full_conditional(DipoleState(prev), DipoleState(next));

            double c_min = kInf, c_max = -kInf;
            for (int k = 0; k < 50; ++k) {
                Vec6 x;
                for (int i = 0; i < 6; ++i) x[i] = g.mean[i] + (k / 49.0 * 6.0 - 3.0) * std::sqrt(g.var[i]);
                const double product = m.transition_logpdf(DipoleState(prev), DipoleState(x)) +
                                       m.transition_logpdf(DipoleState(x), DipoleState(next));
                const double c = product - g.logpdf(x);
                c_min = std::min(c_min, c);
                c_max = std::max(c_max, c);
            }
            CHECK(c_max - c_min < 1e-9);
        }
    }

    SECTION("zero-variance components collapse to the deterministic image") {
        ArModel m = case1_model();
        const Vec6 prev = m.m_ini;
        Vec6 next = m.m_ini;
        next[2] = 4.3;
        const Gaussian6 g = m.full_conditional(DipoleState(prev), DipoleState(next));
        CHECK(g.var[0] == 0.0);
        CHECK(g.mean[0] == 1.0);
        CHECK(g.var[2] > 0.0);
    }
}

TEST_CASE("joint log target", "[state]") {
    ObsModel obs;
    obs.sensors = make_sensor_array(SensorKind::hemisphere, 8);
    obs.gain = FieldGain(1.0);
    obs.sigma1 = 0.5;
    ArModel m = case1_model();
    const ConstantDynamics dyn{m};
    RngStream rng(53);

    std::vector<DipoleState> path;
    path.push_back(m.initial_sample(rng));
    ObservationSeries ys(3, obs.channels());
    for (int t = 1; t <= 3; ++t) {
        path.push_back(m.transition_sample(path.back(), rng));
        ys.row(t - 1) = observe(obs.predict(path.back()), obs.sigma1, rng).transpose();
    }

    SECTION("single-step path is initial + transition + likelihood") {
        const std::vector<DipoleState> short_path{path[0], path[1]};
        const double want = m.initial_logpdf(path[0]) + m.transition_logpdf(path[0], path[1]) +
                            obs.log_likelihood(path[1], ys.row(0).transpose());
        CHECK(joint_log_target(dyn, obs, short_path, ys.topRows(1)) == Catch::Approx(want).epsilon(1e-12));
    }

    SECTION("appending one step telescopes") {
        const std::vector<DipoleState> two(path.begin(), path.begin() + 3);
        const double base = joint_log_target(dyn, obs, two, ys.topRows(2));
        const double full = joint_log_target(dyn, obs, path, ys.topRows(3));
        const double inc = m.transition_logpdf(path[2], path[3]) + obs.log_likelihood(path[3], ys.row(2).transpose());
        CHECK(full == Catch::Approx(base + inc).epsilon(1e-12));
    }

    SECTION("log ratios match an independent recomputation") {
        std::vector<DipoleState> other = path;
        other[2].x[2] += 0.21;
        const double got = joint_log_target(dyn, obs, other, ys.topRows(3)) - joint_log_target(dyn, obs, path, ys.topRows(3));

        long double want = 0.0L;
        for (int t = 1; t <= 3; ++t) {
            for (const auto* pp : {&other, &path}) {
                const double sign = pp == &other ? 1.0 : -1.0;
                const auto& pa = *pp;
                const double mean = m.m_com[2] + m.rho[2] * (pa[static_cast<std::size_t>(t - 1)].x[2] - m.m_com[2]);
                want += sign * scalar_log_normal(pa[static_cast<std::size_t>(t)].x[2], mean, m.sigma2[2]);
                const Eigen::VectorXd clean = obs.predict(pa[static_cast<std::size_t>(t)]);
                for (int k = 0; k < obs.channels(); ++k)
                    want += sign * scalar_log_normal(ys(t - 1, k), clean[k], obs.sigma1 * obs.sigma1);
            }
        }
        CHECK(std::abs(got - static_cast<double>(want)) < 1e-9);
    }

    SECTION("length mismatch is rejected") {
        CHECK_THROWS_AS(joint_log_target(dyn, obs, path, ys.topRows(2)), DataError);
    }
}

TEST_CASE("bounded transitions stay inside", "[state]") {
    ArModel m;
    m.rho = Vec6::Constant(0.9);
    m.sigma2 = Vec6::Constant(0.5);
    m.bounds.lo = Vec6::Constant(-1.0);
    m.bounds.hi = Vec6::Constant(1.0);
    RngStream rng(61);
    DipoleState s(Vec6::Zero());
    for (int i = 0; i < 1000000; ++i) {
        s = m.transition_sample(s, rng);
        if (!m.bounds.contains(s.x)) FAIL("draw escaped the bounds");
    }
    SUCCEED();
}

TEST_CASE("first state marginal integrates the initial state", "[state]") {
    ArModel m = case1_model();
    const ConstantDynamics dyn{m};
    const Gaussian6 g = first_state_marginal(dyn);
    CHECK(g.mean[2] == Catch::Approx(0.9 * 5.0).epsilon(1e-14));
    CHECK(g.var[2] == Catch::Approx(0.81 * 0.0225 + 0.0225).epsilon(1e-14));
    CHECK(g.mean[0] == 1.0);
    CHECK(g.var[0] == 0.0);
}

// Transitions are functions of the previous state alone; the signature takes
// no observation argument.
static_assert(std::is_invocable_r_v<DipoleState, decltype(&ArModel::transition_sample), const ArModel&,
                                    const DipoleState&, RngStream&>);
static_assert(std::is_invocable_r_v<double, decltype(&ArModel::transition_logpdf), const ArModel&,
                                    const DipoleState&, const DipoleState&>);
