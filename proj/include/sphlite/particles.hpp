#pragma once

#include "common.hpp"

namespace sphlite {

/// Structure-of-arrays particle state for one fluid phase. The optional
/// fields (omega, conc) stay empty unless the micropolar or multiphase
/// features allocate them.
struct ParticleSet {
    std::vector<Vec3> x;
    std::vector<Vec3> v;
    std::vector<Vec3> a;
    std::vector<Real> m;
    std::vector<Real> rho;
    std::vector<Real> p;
    std::vector<Vec3> omega; // micropolar angular velocities
    std::vector<Real> conc;  // multiphase concentration

    size_t size() const { return x.size(); }

    void resize(size_t n) {
        x.resize(n, Vec3::Zero());
        v.resize(n, Vec3::Zero());
        a.resize(n, Vec3::Zero());
        m.resize(n, Real(0));
        rho.resize(n, Real(0));
        p.resize(n, Real(0));
        if (!omega.empty()) omega.resize(n, Vec3::Zero());
        if (!conc.empty()) conc.resize(n, Real(0));
    }

    void enable_omega() { omega.resize(size(), Vec3::Zero()); }
    void enable_conc() { conc.resize(size(), Real(0)); }

    void permute(std::span<const uint32_t> perm) {
        apply_permutation(x, perm);
        apply_permutation(v, perm);
        apply_permutation(a, perm);
        apply_permutation(m, perm);
        apply_permutation(rho, perm);
        apply_permutation(p, perm);
        if (!omega.empty()) apply_permutation(omega, perm);
        if (!conc.empty()) apply_permutation(conc, perm);
    }
};

/// Material parameters of one fluid phase.
struct FluidMaterial {
    Real rho0 = 1000;          // rest density [kg/m^3]
    Real particle_size = 0.025; // edge length of the rest-volume cube [m]
    Real mu = 0;               // dynamic viscosity [Pa s]
    Real k = 1000;             // stiffness, linear state equations
    Real k1 = 50000;           // stiffness, power-law state equation
    Real k2 = 7;               // exponent, power-law state equation
    Real alpha_st = 0;         // surface tension coefficient
    Real beta_adh = 0;         // boundary adhesion coefficient
    Real nu_t = 0;             // micropolar transfer coefficient [m^2/s]
    Real micro_inertia = 2;    // micropolar inertia [m^2/s]
    Real eps_vort = 0;         // vorticity confinement strength

    Real nu() const { return mu / rho0; } // kinematic viscosity [m^2/s]
    Real particle_mass() const { return rho0 * particle_size * particle_size * particle_size; }

    void validate() const {
        if (rho0 <= Real(0)) throw ConfigError("material: rho0 must be positive");
        if (particle_size <= Real(0)) throw ConfigError("material: particle_size must be positive");
        if (nu_t < Real(0)) throw ConfigError("material: transfer coefficient nu_t must be >= 0");
    }
};

} // namespace sphlite
