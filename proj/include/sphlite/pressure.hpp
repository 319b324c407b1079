#pragma once

#include <functional>

#include "boundary.hpp"
#include "linsolve.hpp"
#include "neighborhood.hpp"
#include "particles.hpp"

namespace sphlite::pressure {

using linsolve::SolveReport;

/// Boundary coupling used inside the solvers: mirrored pressure (p_b = p_i,
/// rho_b = rho0) with gamma2 applied to boundary gradient sums. bs == nullptr
/// disables boundary handling.
struct BoundaryRefs {
    const BoundarySet* bs = nullptr;
    const Neighborhood* fb = nullptr; // fluid -> boundary pairs
    Real gamma2 = 1;
};

struct Params {
    Real rho0 = 1000;
    Real dt = 1e-3;
    Real tol_pct = 0.1; // average predicted density error threshold [% of rho0]
    int max_iter = 100;
    Real omega = 0.5;   // IISPH relaxation coefficient
    // per-particle rest densities for multiphase source terms; empty means
    // the scalar rho0 applies to every particle
    std::span<const Real> rho0_per_particle{};

    Real rest_density(size_t i) const {
        return rho0_per_particle.empty() ? rho0 : rho0_per_particle[i];
    }
};

/// Observer invoked with (iteration, pressures) after initialization and
/// after every update; used by tests that compare iterate sequences.
using IterObserver = std::function<void(int, std::span<const Real>)>;

/// a_i = -sum_f m_j (p_i/rho_i^2 + p_j/rho_j^2) grad W
///       - gamma2 sum_b m_b (p_i/rho_i^2) grad W
///
/// The boundary term is the single-sided mirrored form: it is the pressure
/// response the solvers' diagonal/stiffness models describe, so wall-adjacent
/// rows stay consistent between the density feedback and the applied kick.
inline void pressure_accel(const ParticleSet& ps, std::span<const Real> p, const Neighborhood& ff,
                           const BoundaryRefs& b, std::span<Vec3> out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        const Real pi_term = p[i] / (ps.rho[i] * ps.rho[i]);
        Vec3 a = Vec3::Zero();
        for (const auto& e : ff.of(i))
            a -= ps.m[e.j] * (pi_term + p[e.j] / (ps.rho[e.j] * ps.rho[e.j])) * e.grad;
        if (b.bs) {
            for (const auto& e : b.fb->of(i))
                a -= b.gamma2 * b.bs->mass[e.j] * pi_term * e.grad;
        }
        out[i] = a;
    }
}

/// Predicted densities after advecting with v_pred for dt.
inline void predicted_density(const ParticleSet& ps, std::span<const Vec3> v_pred,
                              const Neighborhood& ff, const BoundaryRefs& b, Real dt,
                              std::span<Real> out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Real d = 0;
        for (const auto& e : ff.of(i))
            d += ps.m[e.j] * (v_pred[i] - v_pred[e.j]).dot(e.grad);
        if (b.bs)
            for (const auto& e : b.fb->of(i))
                d += b.gamma2 * b.bs->mass[e.j] * (v_pred[i] - b.bs->v[e.j]).dot(e.grad);
        out[i] = ps.rho[i] + dt * d;
    }
}

/// Density change per particle produced by the pressure accelerations,
/// dt^2 * Laplacian p in the two-pass IISPH sense. Boundary samples carry no
/// pressure acceleration of their own.
inline void pressure_density_change(const ParticleSet& ps, std::span<const Vec3> ap,
                                    const Neighborhood& ff, const BoundaryRefs& b, Real dt,
                                    std::span<Real> out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Real d = 0;
        for (const auto& e : ff.of(i))
            d += ps.m[e.j] * (ap[i] - ap[e.j]).dot(e.grad);
        if (b.bs)
            for (const auto& e : b.fb->of(i))
                d += b.gamma2 * b.bs->mass[e.j] * ap[i].dot(e.grad);
        out[i] = dt * dt * d;
    }
}

enum class SesphVariant { LinearQuotient, LinearDifference, PowerLaw };

/// State-equation pressure, clamped at zero so free-surface deficiency never
/// produces negative pressure.
inline void sesph(const ParticleSet& ps, SesphVariant variant, const FluidMaterial& mat,
                  std::span<Real> p_out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Real p = 0;
        switch (variant) {
            case SesphVariant::LinearQuotient: p = mat.k * (ps.rho[i] / mat.rho0 - Real(1)); break;
            case SesphVariant::LinearDifference: p = mat.k * (ps.rho[i] - mat.rho0); break;
            case SesphVariant::PowerLaw:
                p = mat.k1 * (std::pow(ps.rho[i] / mat.rho0, mat.k2) - Real(1));
                break;
        }
        p_out[i] = std::max(p, Real(0));
    }
}

/// PCISPH stiffness for a template particle with a perfectly sampled cubic
/// lattice neighborhood (spacing = particle size). Negative by construction.
inline Real pcisph_stiffness(const KernelParams& k, Real particle_size, Real dt, Real m, Real rho0) {
    const Real s = particle_size;
    const int reach = static_cast<int>(std::ceil(k.support / s)) + 1;
    Vec3 grad_sum = Vec3::Zero();
    Real grad_sq = 0;
    for (int ix = -reach; ix <= reach; ++ix)
        for (int iy = -reach; iy <= reach; ++iy)
            for (int iz = -reach; iz <= reach; ++iz) {
                if (ix == 0 && iy == 0 && iz == 0) continue;
                const Vec3 xj(ix * s, iy * s, iz * s);
                if (xj.norm() > k.support) continue;
                const Vec3 g = cubic_grad_w(-xj, k);
                grad_sum += g;
                grad_sq += g.squaredNorm();
            }
    const Real denom = grad_sum.squaredNorm() + grad_sq;
    if (!(denom > Real(1e-30)))
        throw ConfigError("pcisph_stiffness: degenerate template neighborhood");
    return -Real(0.5) * rho0 * rho0 / (dt * dt * m * m * denom);
}

/// Predictive-corrective solve with the density-change refinement form.
/// max_iter counts refinement sweeps; 0 returns the state-equation pressure.
inline SolveReport pcisph_solve(ParticleSet& ps, std::span<const Vec3> v_pred, const Neighborhood& ff,
                                const BoundaryRefs& b, const Params& prm, Real k_pci,
                                std::span<Vec3> accel_out, const IterObserver& observer = {}) {
    const size_t n = ps.size();
    const Real tol = prm.tol_pct / Real(100);
    std::vector<Real> rho_pred(n), rho_p(n);
    predicted_density(ps, v_pred, ff, b, prm.dt, rho_pred);
    for (size_t i = 0; i < n; ++i)
        ps.p[i] = std::max(k_pci * (prm.rho0 - rho_pred[i]), Real(0));
    if (observer) observer(1, ps.p);

    SolveReport rep;
    rep.iterations = 1;
    for (int l = 1; l <= prm.max_iter; ++l) {
        pressure_accel(ps, ps.p, ff, b, accel_out);
        pressure_density_change(ps, accel_out, ff, b, prm.dt, rho_p);
        Real avg_err = 0;
        for (size_t i = 0; i < n; ++i)
            avg_err += std::max(rho_pred[i] + rho_p[i] - prm.rho0, Real(0));
        avg_err /= Real(n) * prm.rho0;
        for (size_t i = 0; i < n; ++i)
            ps.p[i] = std::max(ps.p[i] + k_pci * (prm.rho0 - rho_pred[i] - rho_p[i]), Real(0));
        rep.iterations = l + 1;
        rep.residual = avg_err;
        if (observer) observer(l + 1, ps.p);
        if (avg_err < tol) {
            rep.converged = true;
            break;
        }
    }
    if (!rep.converged) rep.note = "pcisph iteration cap reached";
    pressure_accel(ps, ps.p, ff, b, accel_out);
    return rep;
}

/// IISPH diagonal elements; zero for isolated particles, which excludes them
/// from the Jacobi solve. Negative for every non-degenerate neighborhood.
inline void iisph_diagonal(const ParticleSet& ps, const Neighborhood& ff, const BoundaryRefs& b,
                           const Params& prm, std::span<Real> aii) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 sk = Vec3::Zero(); // sensitivity of -a_i to p_i
        Vec3 sm = Vec3::Zero(); // divergence weights
        Real t = 0;
        for (const auto& e : ff.of(i)) {
            sk += ps.m[e.j] / (ps.rho[e.j] * ps.rho[e.j]) * e.grad;
            sm += ps.m[e.j] * e.grad;
            t += ps.m[e.j] * (ps.m[i] / (ps.rho[i] * ps.rho[i])) * e.grad.squaredNorm();
        }
        if (b.bs) {
            const Real mirror = Real(1) / (ps.rho[i] * ps.rho[i]);
            for (const auto& e : b.fb->of(i)) {
                sk += b.gamma2 * b.bs->mass[e.j] * mirror * e.grad;
                sm += b.gamma2 * b.bs->mass[e.j] * e.grad;
            }
        }
        aii[i] = -prm.dt * prm.dt * (sk.dot(sm) + t);
    }
}

/// Relaxed-Jacobi PPE solve with the density-invariance source term. Stops on
/// the average predicted density error (compression only, matching the
/// clamped pressures implicitly assumed at free surfaces).
inline SolveReport iisph_solve(ParticleSet& ps, std::span<const Vec3> v_pred, const Neighborhood& ff,
                               const BoundaryRefs& b, const Params& prm, std::span<Vec3> accel_out,
                               const IterObserver& observer = {}) {
    const size_t n = ps.size();
    const Real tol = prm.tol_pct / Real(100);
    std::vector<Real> aii(n), source(n), rho_pred(n);
    iisph_diagonal(ps, ff, b, prm, aii);
    predicted_density(ps, v_pred, ff, b, prm.dt, rho_pred);
    for (size_t i = 0; i < n; ++i)
        source[i] = prm.rest_density(i) - rho_pred[i];
    std::fill(ps.p.begin(), ps.p.end(), Real(0));
    if (observer) observer(0, ps.p);

    auto apply = [&](std::span<const Real> p, std::span<Real> ax) {
        pressure_accel(ps, p, ff, b, accel_out);
        pressure_density_change(ps, accel_out, ff, b, prm.dt, ax);
    };
    Real last_err = 0;
    auto stop = [&](int iter, std::span<const Real> p, std::span<const Real> ax) {
        if (observer) observer(iter, p);
        Real avg = 0;
        for (size_t i = 0; i < n; ++i)
            avg += std::max(ax[i] - source[i], Real(0)) / prm.rest_density(i);
        last_err = avg / Real(n);
        return last_err < tol;
    };
    SolveReport rep = linsolve::relaxed_jacobi(aii, apply, source, ps.p, prm.omega, true,
                                               prm.max_iter, stop);
    rep.residual = last_err;
    pressure_accel(ps, ps.p, ff, b, accel_out);
    return rep;
}

/// IISPH with the number-density-adapted force and source terms: in the
/// adapted model every particle carries one unit of number density and the
/// rest volumes match across phases, so the system is the uniform IISPH in
/// delta-space with a per-phase inverse-mass scaling between the pressure
/// and divergence passes. ps.rho must hold the adapted density m_i delta_i
/// (including the per-phase wall fold); wall samples act through their
/// volumes. Reduces exactly to iisph_solve for a single phase.
inline SolveReport iisph_solve_adapted(ParticleSet& ps, std::span<const Vec3> v_pred,
                                       const Neighborhood& ff, const BoundaryRefs& b,
                                       const Params& prm, std::span<Vec3> accel_out,
                                       const IterObserver& observer = {}) {
    const size_t n = ps.size();
    const Real tol = prm.tol_pct / Real(100);
    const Real inv_v0 = prm.rest_density(0) <= Real(0)
                            ? Real(0)
                            : prm.rest_density(0) / ps.m.at(0); // shared rest volume
    auto wall_weight = [&](uint32_t bj) { return b.bs ? b.gamma2 * b.bs->volume[bj] * inv_v0 : Real(0); };

    std::vector<Real> aii(n), source(n);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
        // same index reading as iisph_diagonal so a single phase degenerates
        // to the standard solve exactly
        Vec3 s_k = Vec3::Zero(), s_m = Vec3::Zero();
        Real t = 0;
        for (const auto& e : ff.of(i)) {
            s_k += ps.m[e.j] * ps.m[e.j] / (ps.m[i] * ps.rho[e.j] * ps.rho[e.j]) * e.grad;
            s_m += ps.m[i] * e.grad;
            t += ps.m[i] * ps.m[i] * ps.m[i] / (ps.m[e.j] * ps.rho[i] * ps.rho[i]) *
                 e.grad.squaredNorm();
        }
        if (b.bs)
            for (const auto& e : b.fb->of(i)) {
                s_k += wall_weight(e.j) * ps.m[i] / (ps.rho[i] * ps.rho[i]) * e.grad;
                s_m += ps.m[i] * wall_weight(e.j) * e.grad;
            }
        aii[i] = -prm.dt * prm.dt * (s_k.dot(s_m) + t);

        Real drho = 0;
        for (const auto& e : ff.of(i))
            drho += (v_pred[i] - v_pred[e.j]).dot(e.grad);
        if (b.bs)
            for (const auto& e : b.fb->of(i))
                drho += wall_weight(e.j) * (v_pred[i] - b.bs->v[e.j]).dot(e.grad);
        source[i] = prm.rest_density(i) - (ps.rho[i] + prm.dt * ps.m[i] * drho);
    }
    std::fill(ps.p.begin(), ps.p.end(), Real(0));
    if (observer) observer(0, ps.p);

    auto accel_pass = [&](std::span<const Real> p) {
        #pragma omp parallel for schedule(static)
        for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
            const Real wi = p[i] * ps.m[i] * ps.m[i] / (ps.rho[i] * ps.rho[i]);
            Vec3 f = Vec3::Zero();
            for (const auto& e : ff.of(i))
                f -= (wi + p[e.j] * ps.m[e.j] * ps.m[e.j] / (ps.rho[e.j] * ps.rho[e.j])) * e.grad;
            if (b.bs)
                for (const auto& e : b.fb->of(i))
                    f -= wall_weight(e.j) * wi * e.grad;
            accel_out[i] = f / ps.m[i];
        }
    };
    auto apply = [&](std::span<const Real> p, std::span<Real> ax) {
        accel_pass(p);
        #pragma omp parallel for schedule(static)
        for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
            Real d = 0;
            for (const auto& e : ff.of(i))
                d += (accel_out[i] - accel_out[e.j]).dot(e.grad);
            if (b.bs)
                for (const auto& e : b.fb->of(i))
                    d += wall_weight(e.j) * accel_out[i].dot(e.grad);
            ax[i] = prm.dt * prm.dt * ps.m[i] * d;
        }
    };
    Real last_err = 0;
    auto stop = [&](int iter, std::span<const Real> p, std::span<const Real> ax) {
        if (observer) observer(iter, p);
        Real avg = 0;
        for (size_t i = 0; i < n; ++i)
            avg += std::max(ax[i] - source[i], Real(0)) / prm.rest_density(i);
        last_err = avg / Real(n);
        return last_err < tol;
    };
    SolveReport rep =
        linsolve::relaxed_jacobi(aii, apply, source, ps.p, prm.omega, true, prm.max_iter, stop);
    rep.residual = last_err;
    accel_pass(ps.p);
    return rep;
}

/// DFSPH stiffness factor k_i = rho_i^2 / (|sum m_j grad W|^2 + sum |m_j grad W|^2),
/// denominator floored so isolated particles stay finite (they are excluded
/// from the solves by their zero source terms anyway).
inline void dfsph_factor(const ParticleSet& ps, const Neighborhood& ff, const BoundaryRefs& b,
                         std::span<Real> k_out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 grad_sum = Vec3::Zero();
        Real grad_sq = 0;
        for (const auto& e : ff.of(i)) {
            const Vec3 mg = ps.m[e.j] * e.grad;
            grad_sum += mg;
            grad_sq += mg.squaredNorm();
        }
        if (b.bs)
            for (const auto& e : b.fb->of(i))
                grad_sum += b.gamma2 * b.bs->mass[e.j] * e.grad;
        const Real denom = std::max(grad_sum.squaredNorm() + grad_sq, Real(1e-6));
        k_out[i] = ps.rho[i] * ps.rho[i] / denom;
    }
}

namespace detail {
/// Shared DFSPH loop body: symmetric velocity update from per-particle
/// pressures, with mirrored boundary terms and optional reaction recording.
inline void dfsph_velocity_update(const ParticleSet& ps, std::span<const Real> p,
                                  const Neighborhood& ff, const BoundaryRefs& b, Real dt,
                                  std::span<Vec3> v, std::span<Vec3> bnd_reaction) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        const Real pi_term = p[i] / (ps.rho[i] * ps.rho[i]);
        Vec3 dv = Vec3::Zero();
        for (const auto& e : ff.of(i))
            dv -= ps.m[e.j] * (pi_term + p[e.j] / (ps.rho[e.j] * ps.rho[e.j])) * e.grad;
        if (b.bs) {
            for (const auto& e : b.fb->of(i))
                dv -= b.gamma2 * b.bs->mass[e.j] * pi_term * e.grad;
        }
        v[i] += dt * dv;
    }
    if (b.bs && !bnd_reaction.empty()) {
        for (size_t i = 0; i < ps.size(); ++i) {
            const Real pi_term = p[i] / (ps.rho[i] * ps.rho[i]);
            for (const auto& e : b.fb->of(i))
                bnd_reaction[e.j] += ps.m[i] * b.gamma2 * b.bs->mass[e.j] * pi_term * e.grad;
        }
    }
}
} // namespace detail

/// Constant density solver: corrects the predicted density deviation by
/// updating v_pred in place. Runs at least min_iter sweeps.
inline SolveReport dfsph_constant_density_solve(ParticleSet& ps, std::span<Vec3> v_pred,
                                                const Neighborhood& ff, const BoundaryRefs& b,
                                                std::span<const Real> k_dfsph, const Params& prm,
                                                int min_iter = 2, std::span<Vec3> bnd_reaction = {}) {
    const size_t n = ps.size();
    const Real eta = prm.tol_pct / Real(100) * prm.rho0;
    std::vector<Real> rho_pred(n), p(n);
    SolveReport rep;
    while (true) {
        predicted_density(ps, v_pred, ff, b, prm.dt, rho_pred);
        Real avg = 0;
        for (size_t i = 0; i < n; ++i)
            avg += std::max(rho_pred[i] - prm.rho0, Real(0));
        avg /= Real(n);
        rep.residual = avg;
        if (!(avg > eta || rep.iterations < min_iter)) {
            rep.converged = true;
            break;
        }
        if (rep.iterations >= prm.max_iter) {
            rep.note = "dfsph density solver iteration cap reached";
            break;
        }
        for (size_t i = 0; i < n; ++i)
            p[i] = std::max(rho_pred[i] - prm.rho0, Real(0)) / (prm.dt * prm.dt) * k_dfsph[i];
        detail::dfsph_velocity_update(ps, p, ff, b, prm.dt, v_pred, bnd_reaction);
        ps.p = p; // publish the applied pressures for export/diagnostics
        ++rep.iterations;
    }
    return rep;
}

/// Divergence-free solver: cancels positive density change rates (compression)
/// by updating the velocities in place. Runs at least min_iter sweeps.
inline SolveReport dfsph_divergence_solve(ParticleSet& ps, std::span<Vec3> v, const Neighborhood& ff,
                                          const BoundaryRefs& b, std::span<const Real> k_dfsph,
                                          const Params& prm, int min_iter = 1,
                                          std::span<Vec3> bnd_reaction = {}) {
    const size_t n = ps.size();
    const Real eta_div = prm.tol_pct / Real(100) * prm.rho0 / prm.dt;
    std::vector<Real> drho(n), p(n);
    SolveReport rep;
    auto density_change = [&] {
        #pragma omp parallel for schedule(static)
        for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
            Real d = 0;
            for (const auto& e : ff.of(i))
                d += ps.m[e.j] * (v[i] - v[e.j]).dot(e.grad);
            if (b.bs)
                for (const auto& e : b.fb->of(i))
                    d += b.gamma2 * b.bs->mass[e.j] * (v[i] - b.bs->v[e.j]).dot(e.grad);
            drho[i] = std::max(d, Real(0)); // expansion at free surfaces is not corrected
        }
    };
    while (true) {
        density_change();
        Real avg = 0;
        for (size_t i = 0; i < n; ++i)
            avg += drho[i];
        avg /= Real(n);
        rep.residual = avg;
        if (!(avg > eta_div || rep.iterations < min_iter)) {
            rep.converged = true;
            break;
        }
        if (rep.iterations >= prm.max_iter) {
            rep.note = "dfsph divergence solver iteration cap reached";
            break;
        }
        for (size_t i = 0; i < n; ++i)
            p[i] = drho[i] / prm.dt * k_dfsph[i];
        detail::dfsph_velocity_update(ps, p, ff, b, prm.dt, v, bnd_reaction);
        ++rep.iterations;
    }
    return rep;
}

} // namespace sphlite::pressure
