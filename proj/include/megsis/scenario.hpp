#ifndef MEGSIS_SCENARIO_HPP
#define MEGSIS_SCENARIO_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "megsis/core.hpp"
#include "megsis/forward_model.hpp"
#include "megsis/rng.hpp"
#include "megsis/state_space.hpp"

namespace megsis {

enum class SensorKind { planar_grid, hemisphere };

struct SensorGeometry {
    double extent = 20.0;  // planar grid side length (cm)
    double height = 15.0;  // planar grid elevation (cm)
    double radius = 12.0;  // hemisphere radius (cm)
};

/// Radial-magnetometer layouts with e = (0,0,1). planar_grid places sqrt(n) x
/// sqrt(n) sensors on the plane z = height; hemisphere places a quasi-uniform
/// spiral on the upper half sphere of the given radius.
inline SensorArray make_sensor_array(SensorKind kind, int n, const SensorGeometry& geo = {}) {
    if (n < 1) throw ConfigError("make_sensor_array: n must be >= 1");
    std::vector<Vec3> pos;
    pos.reserve(static_cast<std::size_t>(n));
    if (kind == SensorKind::planar_grid) {
        const int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
        if (root * root != n) throw ConfigError("make_sensor_array: planar_grid needs a perfect square count");
        if (!(geo.extent > 0.0) || !(geo.height > 0.0))
            throw ConfigError("make_sensor_array: extent and height must be positive");
        if (root == 1) {
            pos.emplace_back(0.0, 0.0, geo.height);
        } else {
            const double step = geo.extent / (root - 1);
            for (int i = 0; i < root; ++i)
                for (int j = 0; j < root; ++j)
                    pos.emplace_back(-0.5 * geo.extent + i * step, -0.5 * geo.extent + j * step, geo.height);
        }
    } else {
        if (!(geo.radius > 0.0)) throw ConfigError("make_sensor_array: radius must be positive");
        const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            const double z = geo.radius * (i + 0.5) / n;
            const double r_xy = std::sqrt(std::max(0.0, geo.radius * geo.radius - z * z));
            const double phi = golden_angle * i;
            pos.emplace_back(r_xy * std::cos(phi), r_xy * std::sin(phi), z);
        }
    }
    return SensorArray(std::move(pos), Vec3(0.0, 0.0, 1.0));
}

/// One simulated dataset: model, observation setup, true dipole path for
/// times 1..T, the noisy readings, and the per-step move schedule.
struct Scenario {
    ArModel model;
    std::vector<MoveTag> schedule;
    ObsModel obs;
    HeadRegion head;
    Eigen::MatrixXd truth;  // T x 6
    ObservationSeries ys;   // T x L
    std::uint64_t seed = 0;
    std::string name;

    int timesteps() const { return static_cast<int>(ys.rows()); }
    int channels() const { return static_cast<int>(ys.cols()); }

    ScheduledDynamics dynamics() const { return ScheduledDynamics{model, random_walk_variant(model), schedule}; }
};

/// Field gain used by the simulated cases. The working units leave the
/// physical constant free; this value puts the simulated readings in the
/// 10-100 fT amplitude range MEG hardware actually sees.
inline constexpr double kScenarioFieldGain = 1000.0;

namespace detail {

inline Scenario simulate_scenario(ArModel model, std::vector<MoveTag> schedule, ObsModel obs,
                                  HeadRegion head, std::uint64_t seed, std::string name) {
    model.validate();
    require_sensors_outside(obs.sensors, head);
    const int T = static_cast<int>(schedule.size());
    Scenario sc;
    sc.model = std::move(model);
    sc.schedule = std::move(schedule);
    sc.obs = std::move(obs);
    sc.head = head;
    sc.seed = seed;
    sc.name = std::move(name);
    sc.truth.resize(T, 6);
    sc.ys.resize(T, sc.obs.channels());

    const ScheduledDynamics dyn = sc.dynamics();
    RngStream rng(seed);
    DipoleState state = dyn.initial().initial_sample(rng);
    for (int t = 1; t <= T; ++t) {
        state = dyn.at(t).transition_sample(state, rng);
        sc.truth.row(t - 1) = state.x.transpose();
        sc.ys.row(t - 1) = observe(sc.obs.predict(state), sc.obs.sigma1, rng).transpose();
    }
    return sc;
}

}  // namespace detail

/// Single dipole, 15 timesteps by default, 40 hemisphere magnetometers; only
/// the z location component evolves (AR coefficient 0.9, variance 0.0225),
/// all other components are pinned by zero state variance. Longer series of
/// the same process are available for benchmarking.
inline Scenario gen_case1(std::uint64_t seed, double kappa = kScenarioFieldGain, int timesteps = 15) {
    ArModel model;
    model.m_ini << 1, 1, 5, 3, 3, 3;
    model.m_com.setZero();
    model.rho << 1, 1, 0.9, 1, 1, 1;
    model.sigma2 << 0, 0, 0.0225, 0, 0, 0;

    ObsModel obs;
    obs.sensors = make_sensor_array(SensorKind::hemisphere, 40);
    obs.gain = FieldGain(kappa);
    obs.sigma1 = 0.25;

    const HeadRegion head = HeadRegion::make_box(Vec3(-6, -6, -1), Vec3(6, 6, 7));
    return detail::simulate_scenario(std::move(model),
                                     std::vector<MoveTag>(static_cast<std::size_t>(timesteps), MoveTag::ar),
                                     std::move(obs), head, seed, "case1");
}

/// Full six-component dipole over 100 timesteps and 100 planar magnetometers.
/// The move schedule repeats ten random-walk steps followed by one
/// autoregressive move; every component is kept inside m_ini +- 5.
inline Scenario gen_case2(std::uint64_t seed, double kappa = kScenarioFieldGain) {
    ArModel model;
    model.m_ini << 6, 7, 8, 3, 5, 5;
    model.m_com.setZero();
    model.rho << 0.65, 0.7, 0.75, 0.8, 0.85, 0.9;
    model.sigma2 = Vec6::Constant(0.01);
    model.bounds.lo = model.m_ini - Vec6::Constant(5.0);
    model.bounds.hi = model.m_ini + Vec6::Constant(5.0);

    ObsModel obs;
    obs.sensors = make_sensor_array(SensorKind::planar_grid, 100);
    obs.gain = FieldGain(kappa);
    obs.sigma1 = 0.25;

    std::vector<MoveTag> schedule;
    schedule.reserve(100);
    for (int t = 1; t <= 100; ++t) schedule.push_back(t % 11 == 0 ? MoveTag::ar : MoveTag::random_walk);

    const HeadRegion head = HeadRegion::make_box(model.bounds.lo.head<3>(), model.bounds.hi.head<3>());
    return detail::simulate_scenario(std::move(model), std::move(schedule), std::move(obs), head, seed,
                                     "case2");
}

}  // namespace megsis

#endif
