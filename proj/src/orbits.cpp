#include "fluidsim/orbits.hpp"

#include <cmath>

#include "fluidsim/error.hpp"

namespace fluidsim {

double normalize_angle(double rad) {
    double a = std::fmod(rad, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    // fmod can return exactly 2pi after the correction when rad is a tiny
    // negative number; fold that back to zero.
    if (a >= kTwoPi) a -= kTwoPi;
    return a;
}

void WalkerSpec::validate() const {
    ValidationCollector v;
    if (total_sats <= 0)
        v.fail("total_sats", "must be positive");
    if (planes <= 0)
        v.fail("planes", "must be positive");
    if (total_sats > 0 && planes > 0 && total_sats % planes != 0)
        v.fail("total_sats", "must be divisible by planes");
    if (phasing < 0 || (planes > 0 && phasing >= planes))
        v.fail("phasing", "must satisfy 0 <= phasing < planes");
    if (!(inclination > 0.0) || inclination > kPi)
        v.fail("inclination", "must be in (0, pi]");
    if (!(altitude > 0.0))
        v.fail("altitude", "must be positive");
    v.throw_if_failed();
}

double mean_motion(const OrbitalElements& el) {
    const double a = el.semi_major_axis;
    return std::sqrt(kMuEarth / (a * a * a));
}

double orbital_period(const OrbitalElements& el) {
    return kTwoPi / mean_motion(el);
}

std::vector<OrbitalElements> walker_constellation(const WalkerSpec& spec) {
    spec.validate();
    const int per_plane = spec.total_sats / spec.planes;
    std::vector<OrbitalElements> out;
    out.reserve(spec.total_sats);
    for (int p = 0; p < spec.planes; ++p) {
        const double raan = normalize_angle(spec.raan_offset + kTwoPi * p / spec.planes);
        const double plane_phase = kTwoPi * spec.phasing * p / spec.total_sats;
        for (int k = 0; k < per_plane; ++k) {
            OrbitalElements el;
            el.semi_major_axis = kEarthRadius + spec.altitude;
            el.inclination = normalize_angle(spec.inclination);
            el.raan = raan;
            el.arg_latitude_at_epoch = normalize_angle(kTwoPi * k / per_plane + plane_phase);
            el.epoch = 0.0;
            out.push_back(el);
        }
    }
    return out;
}

EciPosition propagate(const OrbitalElements& el, double t) {
    const double u = el.arg_latitude_at_epoch + mean_motion(el) * (t - el.epoch);
    const double a = el.semi_major_axis;
    // Rz(raan) * Rx(inclination) applied to the in-plane circle point.
    const Vec3 in_plane(a * std::cos(u), a * std::sin(u), 0.0);
    const Eigen::AngleAxisd tilt(el.inclination, Vec3::UnitX());
    const Eigen::AngleAxisd node(el.raan, Vec3::UnitZ());
    return EciPosition{node * (tilt * in_plane)};
}

EcefPosition eci_to_ecef(const EciPosition& p, double t) {
    const Eigen::AngleAxisd spin(-kEarthRotationRate * t, Vec3::UnitZ());
    return EcefPosition{spin * p.r};
}

EcefPosition geodetic_to_ecef(const Geodetic& site) {
    const double r = kEarthRadius + site.altitude;
    const double clat = std::cos(site.latitude);
    return EcefPosition{Vec3(r * clat * std::cos(site.longitude),
                             r * clat * std::sin(site.longitude),
                             r * std::sin(site.latitude))};
}

double elevation_angle(const EcefPosition& sat, const Geodetic& site) {
    const Vec3 s = geodetic_to_ecef(site).r;
    const Vec3 up = s.normalized();
    const Vec3 d = sat.r - s;
    const double range = d.norm();
    if (range == 0.0) return kPi / 2.0; // coincident: straight up by convention
    double sin_el = up.dot(d) / range;
    sin_el = std::clamp(sin_el, -1.0, 1.0);
    return std::asin(sin_el);
}

double slant_range(const EcefPosition& sat, const Geodetic& site) {
    return (sat.r - geodetic_to_ecef(site).r).norm();
}

} // namespace fluidsim
