#ifndef MEGSIS_CORE_HPP
#define MEGSIS_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace megsis {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// T x L matrix of sensor readings, row t-1 holds the observation at time t.
using ObservationSeries = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454836;

/// Bad or inconsistent configuration (exit code 2 in the CLI).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or mismatched input data (exit code 3 in the CLI).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical collapse: every particle lost support (exit code 4 in the CLI).
struct CollapseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Chain has no usable variation; autocorrelation-based diagnostics are undefined.
struct DegenerateChainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Current dipole: location p (cm) and moment/strength vector q.
struct DipoleState {
    Vec6 x = Vec6::Zero();

    DipoleState() = default;
    explicit DipoleState(const Vec6& v) : x(v) {}
    DipoleState(const Vec3& p, const Vec3& q) {
        x.head<3>() = p;
        x.tail<3>() = q;
    }

    Vec3 p() const { return x.head<3>(); }
    Vec3 q() const { return x.tail<3>(); }

    bool finite() const { return x.allFinite(); }
};

/// Scalar field gain standing in for the physical constant of the dipole
/// formula in the working unit system (cm, fT).
struct FieldGain {
    double kappa = 1.0;

    FieldGain() = default;
    explicit FieldGain(double k) : kappa(k) {
        if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("FieldGain: kappa must be finite and > 0");
    }
};

/// Per-component state bounds; infinite limits mean unconstrained.
struct Bounds6 {
    Vec6 lo = Vec6::Constant(-kInf);
    Vec6 hi = Vec6::Constant(kInf);

    bool active() const { return lo.array().isFinite().any() || hi.array().isFinite().any(); }

    bool contains(const Vec6& v) const {
        return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all();
    }

    void validate() const {
        for (int i = 0; i < 6; ++i)
            if (!(lo[i] < hi[i])) throw ConfigError("Bounds6: lo must be < hi in every component");
    }
};

/// Region the dipole is confined to; sensors must lie outside it.
struct HeadRegion {
    enum class Kind { box, ball };
    Kind kind = Kind::box;
    Vec3 lo{-6.0, -6.0, -1.0};
    Vec3 hi{6.0, 6.0, 7.0};
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 8.0;

    static HeadRegion make_box(const Vec3& lo, const Vec3& hi) {
        HeadRegion r;
        r.kind = Kind::box;
        r.lo = lo;
        r.hi = hi;
        return r;
    }
    static HeadRegion make_ball(const Vec3& c, double radius) {
        HeadRegion r;
        r.kind = Kind::ball;
        r.center = c;
        r.radius = radius;
        return r;
    }

    bool contains(const Vec3& p) const {
        if (kind == Kind::box)
            return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
        return (p - center).norm() <= radius;
    }
};

/// Fixed sensor layout: positions r_k (cm) plus the common measurement direction e.
struct SensorArray {
    std::vector<Vec3> positions;
    Vec3 e{0.0, 0.0, 1.0};

    SensorArray() = default;
    SensorArray(std::vector<Vec3> pos, const Vec3& direction) : positions(std::move(pos)), e(direction) {
        if (std::abs(e.norm() - 1.0) > 1e-12) throw ConfigError("SensorArray: |e| must be 1");
        for (std::size_t i = 0; i < positions.size(); ++i)
            for (std::size_t j = i + 1; j < positions.size(); ++j)
                if ((positions[i] - positions[j]).norm() == 0.0)
                    throw ConfigError("SensorArray: duplicate sensor position at index " + std::to_string(j));
    }

    int size() const { return static_cast<int>(positions.size()); }
};

inline void require_sensors_outside(const SensorArray& sensors, const HeadRegion& head) {
    for (int k = 0; k < sensors.size(); ++k)
        if (head.contains(sensors.positions[k]))
            throw ConfigError("sensor " + std::to_string(k) + " lies inside the head region");
}

/// log N(x; mean, var) for var > 0.
inline double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

}  // namespace megsis

#endif
