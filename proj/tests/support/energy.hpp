#pragma once

#include "defaff/sim.hpp"

// Test-side energy bookkeeping, independent of the solver: gravitational
// potential plus quadratic elastic energy at a fixed measurement stiffness.
namespace testsupport {

constexpr double kElasticStiffness = 1e4;  // N/m per constraint

inline double potential_energy(const defaff::sim::ParticleSystem& s, double gravity) {
    double e = 0.0;
    for (int i = 0; i < s.size(); ++i) {
        if (s.inverse_masses[i] == 0.0) continue;
        e += (1.0 / s.inverse_masses[i]) * gravity * s.positions[i].z;
    }
    for (const defaff::sim::DistanceConstraint& c : s.constraints) {
        const double len = (s.positions[c.i] - s.positions[c.j]).norm();
        const double d = len - c.rest_length;
        e += 0.5 * kElasticStiffness * d * d;
    }
    return e;
}

}  // namespace testsupport
