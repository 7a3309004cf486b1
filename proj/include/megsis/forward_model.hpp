#ifndef MEGSIS_FORWARD_MODEL_HPP
#define MEGSIS_FORWARD_MODEL_HPP

#include <string>
#include <vector>

#include "megsis/core.hpp"
#include "megsis/rng.hpp"

namespace megsis {

inline constexpr double kDefaultMinSeparation = 0.1;  // cm

/// Noiseless reading of one sensor at r with direction e:
///   kappa * [q x (r - p)] . e / |r - p|^3
/// Throws DataError when the dipole sits closer than min_separation to the sensor.
inline double field_at_sensor(const DipoleState& d, const Vec3& r, const Vec3& e, const FieldGain& g,
                              double min_separation = kDefaultMinSeparation) {
    const Vec3 a = r - d.p();
    const double dist = a.norm();
    if (dist < min_separation)
        throw DataError("dipole-to-sensor separation " + std::to_string(dist) + " below minimum " +
                        std::to_string(min_separation));
    return g.kappa * d.q().cross(a).dot(e) / (dist * dist * dist);
}

/// All sensors of an array at once.
inline Eigen::VectorXd field_vector(const DipoleState& d, const SensorArray& sensors, const FieldGain& g,
                                    double min_separation = kDefaultMinSeparation) {
    Eigen::VectorXd out(sensors.size());
    for (int k = 0; k < sensors.size(); ++k) {
        try {
            out[k] = field_at_sensor(d, sensors.positions[k], sensors.e, g, min_separation);
        } catch (const DataError& err) {
            throw DataError("sensor " + std::to_string(k) + ": " + err.what());
        }
    }
    return out;
}

/// Fields of independent dipoles add componentwise.
inline Eigen::VectorXd superpose(const std::vector<Eigen::VectorXd>& fields) {
    if (fields.empty()) throw DataError("superpose: no fields given");
    Eigen::VectorXd out = fields.front();
    for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i].size() != out.size())
            throw DataError("superpose: length mismatch at field " + std::to_string(i));
        out += fields[i];
    }
    return out;
}

/// Adds i.i.d. Gaussian noise with standard deviation sigma1 to each channel.
inline Eigen::VectorXd observe(const Eigen::VectorXd& noiseless, double sigma1, RngStream& rng) {
    if (sigma1 < 0.0) throw ConfigError("observe: sigma1 must be >= 0");
    if (sigma1 == 0.0) return noiseless;
    Eigen::VectorXd out = noiseless;
    for (Eigen::Index k = 0; k < out.size(); ++k) out[k] += sigma1 * rng.normal();
    return out;
}

}  // namespace megsis

#endif
