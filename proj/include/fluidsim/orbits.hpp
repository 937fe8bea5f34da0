#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fluidsim/constants.hpp"

namespace fluidsim {

using Vec3 = Eigen::Vector3d;

/// Walker-style shell: `total_sats` satellites in `planes` equally spaced
/// circular orbits, inter-plane phasing `phasing` (Walker F).
struct WalkerSpec {
    int total_sats = 0;
    int planes = 0;
    int phasing = 0;          // Walker F, 0 <= F < planes
    double inclination = 0.0; // rad
    double altitude = 0.0;    // m above mean Earth radius
    double raan_offset = 0.0; // RAAN of plane 0, rad

    void validate() const; // throws ValidationError naming the offending field
};

/// Circular-orbit elements. Angles normalized to [0, 2pi) at construction.
struct OrbitalElements {
    double semi_major_axis = 0.0;       // m
    double inclination = 0.0;           // rad
    double raan = 0.0;                  // rad
    double arg_latitude_at_epoch = 0.0; // rad, along-orbit angle from ascending node at epoch
    double epoch = 0.0;                 // s
};

// Earth-centered frames. Distinct types so ECI/ECEF vectors cannot be mixed.
struct EciPosition {
    Vec3 r;
};
struct EcefPosition {
    Vec3 r;
};

/// Spherical-Earth geodetic coordinates.
struct Geodetic {
    double latitude = 0.0;  // rad, [-pi/2, pi/2]
    double longitude = 0.0; // rad, [-pi, pi)
    double altitude = 0.0;  // m above Earth radius
};

double normalize_angle(double rad); // -> [0, 2pi)

double mean_motion(const OrbitalElements& el);   // rad/s, n = sqrt(mu/a^3)
double orbital_period(const OrbitalElements& el); // s

/// Plane-major, then in-plane slot order. RAAN step 2pi/P; in-plane step
/// 2pi*P/T; adjacent-plane phase offset 2pi*F/T.
std::vector<OrbitalElements> walker_constellation(const WalkerSpec& spec);

/// Position on the orbit circle at time t (total on valid elements).
EciPosition propagate(const OrbitalElements& el, double t);

/// Frame convention: ECEF = Rz(-omega_E * t) * ECI. Positive t rotates the
/// frame eastward, so a fixed ECI point drifts toward -y in ECEF.
EcefPosition eci_to_ecef(const EciPosition& p, double t);

EcefPosition geodetic_to_ecef(const Geodetic& site);

/// Angle between the local horizontal plane at `site` and the site->satellite
/// direction, in [-pi/2, pi/2]. Negative below the horizon.
double elevation_angle(const EcefPosition& sat, const Geodetic& site);

double slant_range(const EcefPosition& sat, const Geodetic& site); // m

} // namespace fluidsim
