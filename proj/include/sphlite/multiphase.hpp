#pragma once

#include "neighborhood.hpp"
#include "particles.hpp"

namespace sphlite::multiphase {

/// Per-particle phase assignment with per-phase material constants. Rest
/// volumes must match across phases so the sampling stays uniform.
struct PhaseTag {
    std::vector<uint32_t> phase_id;
    std::vector<Real> rho0;  // per phase
    std::vector<Real> mass;  // per phase
    std::vector<Real> mu;    // per phase
    std::vector<Real> k1, k2;

    void validate() const {
        if (rho0.empty()) return;
        const Real v0 = mass[0] / rho0[0];
        for (size_t ph = 1; ph < rho0.size(); ++ph)
            if (std::abs(mass[ph] / rho0[ph] - v0) > Real(1e-10) * v0)
                throw ConfigError("multiphase: rest volumes differ between phases " +
                                  std::to_string(ph) + " and 0");
    }
};

/// Number density delta_i = W(0) + sum_j W_ij; mass-blind, so the density
/// discontinuity across a phase interface is preserved.
inline void number_density(const ParticleSet& ps, const Neighborhood& nbh, const KernelParams& k,
                           std::span<Real> delta) {
    const Real w0 = cubic_w0(k);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Real d = w0;
        for (const auto& e : nbh.of(i))
            d += e.w;
        delta[i] = d;
    }
}

/// Adapted density rho~_i = m_i delta_i and the power-law state equation on
/// it, clamped at zero pressure.
inline void adapted_density_pressure(const ParticleSet& ps, std::span<const Real> delta,
                                     std::span<const Real> rho0_i, std::span<const Real> k1_i,
                                     std::span<const Real> k2_i, std::span<Real> rho_t,
                                     std::span<Real> p_t) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        rho_t[i] = ps.m[i] * delta[i];
        const Real p = k1_i[i] * (std::pow(rho_t[i] / rho0_i[i], k2_i[i]) - Real(1));
        p_t[i] = std::max(p, Real(0));
    }
}

/// F_i = -sum_j (p~_j/delta_j^2 + p~_i/delta_i^2) grad W; reduces to the
/// standard symmetric pressure force for a single phase with uniform masses.
inline void adapted_pressure_force(const ParticleSet& ps, std::span<const Real> delta,
                                   std::span<const Real> p_t, const Neighborhood& nbh,
                                   std::span<Vec3> force) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        const Real pi_term = p_t[i] / (delta[i] * delta[i]);
        Vec3 f = Vec3::Zero();
        for (const auto& e : nbh.of(i))
            f -= (p_t[e.j] / (delta[e.j] * delta[e.j]) + pi_term) * e.grad;
        force[i] = f;
    }
}

/// Adapted viscosity with arithmetically averaged pair viscosity; the kernel
/// Laplacian is realized with the finite-difference scalar form paired with
/// the (v_j - v_i) difference.
inline void adapted_viscosity_force(const ParticleSet& ps, std::span<const Real> delta,
                                    std::span<const Real> mu_i, const Neighborhood& nbh,
                                    std::span<Vec3> force) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 f = Vec3::Zero();
        for (const auto& e : nbh.of(i)) {
            const Real rlen = e.xij.norm();
            if (rlen <= Real(1e-12)) continue;
            const Real lap = Real(2) * e.grad.norm() / rlen;
            f += (mu_i[i] + mu_i[e.j]) / Real(2) / delta[e.j] * (ps.v[e.j] - ps.v[i]) * lap;
        }
        force[i] = f / delta[i];
    }
}

/// Explicit Euler step of the concentration diffusion equation.
inline void diffuse_concentration(ParticleSet& ps, const Neighborhood& nbh, Real alpha_diff,
                                  Real dt) {
    if (ps.conc.empty()) throw ConfigError("multiphase: concentration field not allocated");
    const size_t n = ps.size();
    std::vector<Real> dc(n, Real(0));
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
        Real d = 0;
        for (const auto& e : nbh.of(i)) {
            const Real rlen = e.xij.norm();
            if (rlen <= Real(1e-12)) continue;
            const Real lap = Real(2) * e.grad.norm() / rlen;
            d += ps.m[e.j] * (ps.conc[e.j] - ps.conc[i]) / ps.rho[e.j] * lap;
        }
        dc[i] = alpha_diff * d;
    }
    for (size_t i = 0; i < n; ++i)
        ps.conc[i] += dt * dc[i];
}

} // namespace sphlite::multiphase
