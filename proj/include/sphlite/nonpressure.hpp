#pragma once

#include "boundary.hpp"
#include "linsolve.hpp"
#include "neighborhood.hpp"
#include "particles.hpp"
#include "sph_ops.hpp"

namespace sphlite::nonpressure {

using linsolve::SolveReport;

enum class ViscosityMode { Off, ExplicitLaplacian, Xsph, Implicit };
enum class SurfaceTensionMode { Off, Becker, Akinci };
enum class VorticityMode { Off, Confinement, Micropolar };

struct NonPressureConfig {
    ViscosityMode viscosity_mode = ViscosityMode::Off;
    Real mu_boundary = 0;
    SurfaceTensionMode st_mode = SurfaceTensionMode::Off;
    VorticityMode vort_mode = VorticityMode::Off;
    Real xsph_alpha = 0;

    void validate() const {
        if (xsph_alpha < Real(0) || xsph_alpha >= Real(1))
            throw ConfigError("nonpressure: xsph_alpha must lie in [0, 1)");
    }
};

/// Explicit viscous acceleration a_i = (mu/rho_i) * laplacian(v)_i using the
/// finite-difference form. The local density in the prefactor makes the
/// pairwise momentum exchange exactly antisymmetric.
inline void viscosity_explicit(const ParticleSet& ps, const Neighborhood& nbh, Real mu,
                               const KernelParams& k, std::span<Vec3> accel_add) {
    const Real eps = Real(0.01) * k.h * k.h;
    const Real scale = Real(2) * (k.dim + 2);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 l = Vec3::Zero();
        for (const auto& e : nbh.of(i)) {
            const Vec3 vij = ps.v[i] - ps.v[e.j];
            l += ps.m[e.j] / ps.rho[e.j] * (vij.dot(e.xij) / (e.xij.squaredNorm() + eps)) * e.grad;
        }
        accel_add[i] += mu / ps.rho[i] * scale * l;
    }
}

/// XSPH velocity smoothing toward the neighborhood average.
inline void xsph(const ParticleSet& ps, const Neighborhood& nbh, Real alpha,
                 std::span<Vec3> v_smoothed) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 dv = Vec3::Zero();
        for (const auto& e : nbh.of(i))
            dv += ps.m[e.j] / ps.rho[e.j] * (ps.v[e.j] - ps.v[i]) * e.w;
        v_smoothed[i] = ps.v[i] + alpha * dv;
    }
}

/// Implicit viscosity: solves (I - dt A) v = v_pred with a matrix-free CG and
/// a block-Jacobi preconditioner. A realizes (mu/rho) Laplacian(v) with the
/// symmetrizing averaged mass; boundary samples add friction terms to the
/// diagonal blocks and the right-hand side. Reaction forces for two-way
/// coupling are accumulated per boundary sample after convergence.
inline SolveReport viscosity_implicit(const ParticleSet& ps, std::span<const Vec3> v_pred,
                                      const Neighborhood& ff, const BoundarySet* bs,
                                      const Neighborhood* fb, Real mu, Real mu_b,
                                      const KernelParams& k, Real dt, Real tol, int max_iter,
                                      std::span<Vec3> v_out, std::span<const Vec3> warm_delta,
                                      std::span<Vec3> bnd_reaction = {}) {
    const size_t n = ps.size();
    const Real eps = Real(0.01) * k.h * k.h;
    const Real scale = Real(2) * (k.dim + 2);

    // a_visc(v) restricted to the terms that depend on the unknowns
    auto apply = [&](std::span<const Real> vx, std::span<Real> out) {
        const auto* vv = reinterpret_cast<const Vec3*>(vx.data());
        auto* ov = reinterpret_cast<Vec3*>(out.data());
        #pragma omp parallel for schedule(static)
        for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
            Vec3 acc = Vec3::Zero();
            for (const auto& e : ff.of(i)) {
                const Real mbar = Real(0.5) * (ps.m[i] + ps.m[e.j]);
                const Vec3 vij = vv[i] - vv[e.j];
                acc += mu * mbar / (ps.rho[i] * ps.rho[e.j]) *
                       (vij.dot(e.xij) / (e.xij.squaredNorm() + eps)) * e.grad;
            }
            if (bs)
                for (const auto& e : fb->of(i))
                    acc += mu_b * bs->mass[e.j] / (ps.rho[i] * ps.rho[i]) *
                           (vv[i].dot(e.xij) / (e.xij.squaredNorm() + eps)) * e.grad;
            ov[i] = vv[i] - dt * scale * acc;
        }
    };

    std::vector<Real> b(3 * n);
    auto* bv = reinterpret_cast<Vec3*>(b.data());
    for (size_t i = 0; i < n; ++i) {
        Vec3 rhs = v_pred[i];
        if (bs)
            for (const auto& e : fb->of(i))
                rhs -= dt * scale * mu_b * bs->mass[e.j] / (ps.rho[i] * ps.rho[i]) *
                       (bs->v[e.j].dot(e.xij) / (e.xij.squaredNorm() + eps)) * e.grad;
        bv[i] = rhs;
    }

    // block-Jacobi preconditioner: invert I - dt * d a_i / d v_i per particle
    std::vector<Mat3> pinv(n);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
        Mat3 blk = Mat3::Zero();
        for (const auto& e : ff.of(i)) {
            const Real mbar = Real(0.5) * (ps.m[i] + ps.m[e.j]);
            blk += mu * mbar / (ps.rho[i] * ps.rho[e.j]) * e.grad *
                   (e.xij / (e.xij.squaredNorm() + eps)).transpose();
        }
        if (bs)
            for (const auto& e : fb->of(i))
                blk += mu_b * bs->mass[e.j] / (ps.rho[i] * ps.rho[i]) * e.grad *
                       (e.xij / (e.xij.squaredNorm() + eps)).transpose();
        pinv[i] = (Mat3::Identity() - dt * scale * blk).inverse();
    }
    auto precond = [&](std::span<const Real> r, std::span<Real> z) {
        const auto* rv = reinterpret_cast<const Vec3*>(r.data());
        auto* zv = reinterpret_cast<Vec3*>(z.data());
        for (size_t i = 0; i < n; ++i)
            zv[i] = pinv[i] * rv[i];
    };

    std::vector<Real> x(3 * n);
    auto* xv = reinterpret_cast<Vec3*>(x.data());
    for (size_t i = 0; i < n; ++i)
        xv[i] = v_pred[i] + (warm_delta.empty() ? Vec3::Zero() : warm_delta[i]);

    SolveReport rep = linsolve::cg(apply, b, x, tol, max_iter, precond);
    for (size_t i = 0; i < n; ++i)
        v_out[i] = xv[i];

    if (bs && !bnd_reaction.empty()) {
        for (size_t i = 0; i < n; ++i)
            for (const auto& e : fb->of(i)) {
                const Vec3 a_ik = scale * mu_b * bs->mass[e.j] / (ps.rho[i] * ps.rho[i]) *
                                  ((v_out[i] - bs->v[e.j]).dot(e.xij) /
                                   (e.xij.squaredNorm() + eps)) * e.grad;
                bnd_reaction[e.j] -= ps.m[i] * a_ik;
            }
    }
    return rep;
}

/// Becker-style cohesion: pairwise position-difference attraction.
inline void st_becker(const ParticleSet& ps, const Neighborhood& nbh, Real alpha,
                      std::span<Vec3> accel_add) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 acc = Vec3::Zero();
        for (const auto& e : nbh.of(i))
            acc -= ps.m[e.j] * e.xij * e.w;
        accel_add[i] += alpha / ps.m[i] * acc;
    }
}

/// Color-field surface normals n_i = h sum (m_j/rho_j) grad W; near zero in
/// the interior, proportional to curvature at the free surface.
inline void surface_normals(const ParticleSet& ps, const Neighborhood& nbh, const KernelParams& k,
                            std::span<Vec3> normals) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 nrm = Vec3::Zero();
        for (const auto& e : nbh.of(i))
            nrm += ps.m[e.j] / ps.rho[e.j] * e.grad;
        normals[i] = k.h * nrm;
    }
}

/// Akinci surface tension: cohesion (special kernel, repulsive for close
/// pairs) plus curvature minimization, both amplified by K_ij at the free
/// surface. Forces are pairwise antisymmetric.
inline void st_akinci(const ParticleSet& ps, const Neighborhood& nbh, Real alpha, Real rho0,
                      const KernelParams& k, std::span<Vec3> force_out) {
    std::vector<Vec3> normals(ps.size());
    surface_normals(ps, nbh, k, normals);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 f = Vec3::Zero();
        for (const auto& e : nbh.of(i)) {
            const Real kij = Real(2) * rho0 / (ps.rho[i] + ps.rho[e.j]);
            const Real rlen = e.xij.norm();
            Vec3 cohesion = Vec3::Zero();
            if (rlen > Real(1e-12) * k.h)
                cohesion = -alpha * ps.m[i] * ps.m[e.j] * cohesion_w(rlen, k) / rlen * e.xij;
            const Vec3 curvature = -alpha * ps.m[i] * (normals[i] - normals[e.j]);
            f += kij * (cohesion + curvature);
        }
        force_out[i] = f;
    }
}

/// Akinci adhesion toward boundary samples; only the h/2..h shell attracts.
inline void adhesion(const ParticleSet& ps, const BoundarySet& bs, const Neighborhood& fb,
                     Real beta, const KernelParams& k, std::span<Vec3> force_out,
                     std::span<Vec3> reaction) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 f = Vec3::Zero();
        for (const auto& e : fb.of(i)) {
            const Real rlen = e.xij.norm();
            if (rlen <= Real(1e-12) * k.h) continue;
            f -= beta * ps.m[i] * bs.mass[e.j] * adhesion_w(rlen, k) / rlen * e.xij;
        }
        force_out[i] = f;
    }
    if (!reaction.empty())
        for (size_t i = 0; i < ps.size(); ++i)
            for (const auto& e : fb.of(i)) {
                const Real rlen = e.xij.norm();
                if (rlen <= Real(1e-12) * k.h) continue;
                reaction[e.j] += beta * ps.m[i] * bs.mass[e.j] * adhesion_w(rlen, k) / rlen * e.xij;
            }
}

/// Vorticity confinement: amplifies the existing vortical motion, then
/// smooths the velocity field with XSPH for coherent particle motion.
inline void vorticity_confinement(const ParticleSet& ps, const Neighborhood& nbh, Real eps_vort,
                                  Real xsph_alpha, std::span<Vec3> accel_add,
                                  std::span<Vec3> v_smoothed) {
    const size_t n = ps.size();
    std::vector<Vec3> w(n);
    ops::curl(std::span<const Vec3>(ps.v.data(), n), ps, nbh, w);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
        Vec3 eta = Vec3::Zero();
        for (const auto& e : nbh.of(i))
            eta += ps.m[e.j] / ps.rho[e.j] * w[e.j].norm() * e.grad;
        const Real len = eta.norm();
        if (len > Real(1e-12))
            accel_add[i] += eps_vort * (eta / len).cross(w[i]);
    }
    if (!v_smoothed.empty())
        xsph(ps, nbh, xsph_alpha, v_smoothed);
}

/// Micropolar transfer terms: F = m nu_t curl(omega), tau = m nu_t
/// (curl(v) - 2 omega); the angular velocities are advanced in place with
/// the microinertia scaling.
inline void micropolar_step(ParticleSet& ps, const Neighborhood& nbh, Real nu_t, Real theta,
                            Real dt, std::span<Vec3> force_out, std::span<Vec3> torque_out) {
    if (nu_t < Real(0)) throw ConfigError("micropolar: transfer coefficient nu_t must be >= 0");
    if (ps.omega.empty()) throw ConfigError("micropolar: particle angular velocities not allocated");
    const size_t n = ps.size();
    std::vector<Vec3> curl_w(n), curl_v(n);
    ops::curl(std::span<const Vec3>(ps.omega.data(), n), ps, nbh, curl_w);
    ops::curl(std::span<const Vec3>(ps.v.data(), n), ps, nbh, curl_v);
    for (size_t i = 0; i < n; ++i) {
        force_out[i] = ps.m[i] * nu_t * curl_w[i];
        torque_out[i] = ps.m[i] * nu_t * (curl_v[i] - Real(2) * ps.omega[i]);
        ps.omega[i] += dt / (ps.m[i] * theta) * torque_out[i];
    }
}

} // namespace sphlite::nonpressure
