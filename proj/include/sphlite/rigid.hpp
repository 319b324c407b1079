#pragma once

#include <unordered_set>

#include "linsolve.hpp"
#include "neighborhood.hpp"
#include "nsearch.hpp"

namespace sphlite::rigid {

using linsolve::SolveReport;

struct RigidBody {
    bool is_static = false;
    Real mass = 0;               // [kg]; ignored for static bodies
    Mat3 inertia_body = Mat3::Identity();
    Vec3 com = Vec3::Zero();
    Quat orient = Quat::Identity();
    Vec3 v = Vec3::Zero();
    Vec3 w = Vec3::Zero();
    std::vector<Vec3> samples_local;

    // per-step external force/torque accumulators (gravity, fluid reactions)
    Vec3 f_ext = Vec3::Zero();
    Vec3 tau_ext = Vec3::Zero();
    // contact result of the last solve
    Vec3 f_contact = Vec3::Zero();
    Vec3 tau_contact = Vec3::Zero();

    Mat3 inertia_world() const {
        const Mat3 r = orient.toRotationMatrix();
        return r * inertia_body * r.transpose();
    }
    Mat3 inertia_world_inv() const {
        if (is_static) return Mat3::Zero();
        return inertia_world().inverse();
    }
};

inline Mat3 cross_matrix(const Vec3& r) {
    Mat3 m;
    m << 0, -r[2], r[1], r[2], 0, -r[0], -r[1], r[0], 0;
    return m;
}

/// K_rk maps a force at sample k of body R to the velocity change at sample r
/// of the same body; zero for static bodies.
inline Mat3 krk(const RigidBody& body, const Vec3& r_r, const Vec3& r_k) {
    if (body.is_static) return Mat3::Zero();
    return Mat3::Identity() / body.mass -
           cross_matrix(r_r) * body.inertia_world_inv() * cross_matrix(r_k);
}

/// All rigid bodies plus the flattened per-sample state shared by density
/// evaluation and the contact solve. The artificial rest density is 1.
struct RigidWorld {
    std::vector<RigidBody> bodies;
    KernelParams kernel; // contact kernel (support >= sample spacing * 2)

    std::vector<uint32_t> body_of;
    std::vector<Vec3> x;     // world sample positions
    std::vector<Vec3> lever; // world lever arms r_r
    std::vector<Real> V0, V, rho, p;
    std::vector<uint8_t> active;

    size_t sample_count() const { return x.size(); }

    void rebuild_flat() {
        body_of.clear();
        x.clear();
        lever.clear();
        size_t total = 0;
        for (const auto& b : bodies)
            total += b.samples_local.size();
        body_of.reserve(total);
        x.reserve(total);
        lever.reserve(total);
        for (uint32_t bi = 0; bi < bodies.size(); ++bi) {
            const Mat3 r = bodies[bi].orient.toRotationMatrix();
            for (const Vec3& s : bodies[bi].samples_local) {
                body_of.push_back(bi);
                lever.push_back(r * s);
                x.push_back(bodies[bi].com + lever.back());
            }
        }
        V.resize(total);
        rho.resize(total);
        p.assign(total, Real(0));
        active.assign(total, 0);
    }

    void sync_samples() {
        size_t idx = 0;
        for (auto& b : bodies) {
            const Mat3 r = b.orient.toRotationMatrix();
            for (const Vec3& s : b.samples_local) {
                lever[idx] = r * s;
                x[idx] = b.com + lever[idx];
                ++idx;
            }
        }
    }
};

/// Artificial rest volumes V0_r = 0.7 / sum_k W_rk over the samples of the
/// same body (self included). The 0.7 leaves headroom so isolated bodies sit
/// below the artificial rest density.
inline void rigid_rest_volumes(RigidWorld& world) {
    world.rebuild_flat();
    const Real w0 = cubic_w0(world.kernel);
    world.V0.assign(world.sample_count(), Real(0));
    size_t base = 0;
    for (uint32_t bi = 0; bi < world.bodies.size(); ++bi) {
        const auto& samples = world.bodies[bi].samples_local;
        const NeighborGrid grid = NeighborGrid::build(samples, world.kernel.support);
        const NeighborLists nl = neighbor_lists(grid, samples, world.kernel.support);
        for (size_t s = 0; s < samples.size(); ++s) {
            if (nl.of(s).empty())
                throw ConfigError("rigid: sample " + std::to_string(s) + " of body " +
                                  std::to_string(bi) + " has no same-body neighbors");
            Real sum = w0;
            for (uint32_t j : nl.of(s))
                sum += cubic_w(samples[s] - samples[j], world.kernel);
            world.V0[base + s] = Real(0.7) / sum;
        }
        base += samples.size();
    }
}

/// Densities over the samples of all bodies; a sample becomes an active
/// contact when it is compressed beyond the artificial rest density by
/// another body's samples.
inline void rigid_contact_density(RigidWorld& world, const Neighborhood& nbh) {
    const Real w0 = cubic_w0(world.kernel);
    const size_t n = world.sample_count();
    for (size_t r = 0; r < n; ++r) {
        Real sum = w0;
        bool other = false;
        for (const auto& e : nbh.of(r)) {
            sum += e.w;
            other |= world.body_of[e.j] != world.body_of[r];
        }
        world.rho[r] = world.V0[r] * sum;
        world.V[r] = world.V0[r] / world.rho[r];
        world.active[r] = world.rho[r] > Real(1) && other;
    }
}

/// Relaxed-Jacobi solve of the rigid contact system. Both the left-hand side
/// and the applied forces use the symmetric-form pressure gradient, so the
/// solved system is exactly the linearization of the forces that are applied
/// and the exchanged momentum balances pairwise. (A difference-form gradient
/// in the LHS flips the force direction at one-sided contact interfaces and
/// fails the static-equilibrium validation.)
inline SolveReport rigid_pressure_solve(RigidWorld& world, Real dt, int max_iter = 100,
                                        Real tol = 1e-3) {
    const size_t n = world.sample_count();
    SolveReport rep;
    for (auto& b : world.bodies) {
        b.f_contact = Vec3::Zero();
        b.tau_contact = Vec3::Zero();
    }
    std::fill(world.p.begin(), world.p.end(), Real(0));
    if (n == 0) return rep;

    const NeighborGrid grid = NeighborGrid::build(world.x, world.kernel.support);
    const Neighborhood nbh = build_neighborhood(world.x, world.x, grid, world.kernel, true);
    rigid_contact_density(world, nbh);

    std::vector<uint32_t> active_rows;
    for (uint32_t r = 0; r < n; ++r)
        if (world.active[r]) active_rows.push_back(r);
    if (active_rows.empty()) {
        rep.converged = true;
        return rep;
    }

    // predicted sample velocities from all non-contact forces
    std::vector<Vec3> vs(n);
    for (size_t r = 0; r < n; ++r) {
        const RigidBody& b = world.bodies[world.body_of[r]];
        if (b.is_static) {
            vs[r] = Vec3::Zero();
            continue;
        }
        const Vec3 v_pred = b.v + dt / b.mass * b.f_ext;
        const Vec3 w_pred = b.w + dt * (b.inertia_world_inv() *
                                        (b.tau_ext + (b.inertia_world() * b.w).cross(b.w)));
        vs[r] = v_pred + w_pred.cross(world.lever[r]);
    }

    // relevant: samples whose pressure gradient can be nonzero
    std::vector<uint8_t> relevant(n, 0);
    std::vector<uint8_t> needed(n, 0);
    for (uint32_t r : active_rows) {
        relevant[r] = 1;
        needed[r] = 1;
        for (const auto& e : nbh.of(r)) {
            relevant[e.j] = 1;
            needed[e.j] = 1;
        }
    }
    // u_x sums over relevant samples of x's own body
    std::vector<std::vector<uint32_t>> body_relevant(world.bodies.size());
    for (uint32_t k = 0; k < n; ++k)
        if (relevant[k]) body_relevant[world.body_of[k]].push_back(k);

    std::vector<Real> source(n, Real(0));
    for (uint32_t r : active_rows) {
        Real div_vs = 0;
        for (const auto& e : nbh.of(r))
            div_vs += world.V[e.j] * world.rho[e.j] * (vs[e.j] - vs[r]).dot(e.grad);
        div_vs /= world.rho[r];
        source[r] = (Real(1) - world.rho[r]) / dt + world.rho[r] * div_vs;
    }

    std::vector<Vec3> gradp(n, Vec3::Zero());
    std::vector<Vec3> u(n, Vec3::Zero());
    std::vector<Real> lhs(n, Real(0));
    auto sym_grad = [&](std::span<const Real> pr, uint32_t k) {
        Vec3 g = Vec3::Zero();
        const Real pk = pr[k] / (world.rho[k] * world.rho[k]);
        for (const auto& e : nbh.of(k))
            g += world.V[e.j] * world.rho[e.j] *
                 (pk + pr[e.j] / (world.rho[e.j] * world.rho[e.j])) * e.grad;
        return Vec3(world.rho[k] * g);
    };
    auto compute_lhs = [&](std::span<const Real> pr) {
        for (uint32_t k = 0; k < n; ++k) {
            if (!relevant[k]) continue;
            gradp[k] = sym_grad(pr, k);
        }
        for (uint32_t xi = 0; xi < n; ++xi) {
            if (!needed[xi]) continue;
            const RigidBody& b = world.bodies[world.body_of[xi]];
            Vec3 ux = Vec3::Zero();
            if (!b.is_static)
                for (uint32_t k : body_relevant[world.body_of[xi]])
                    ux += world.V[k] * (krk(b, world.lever[xi], world.lever[k]) * gradp[k]);
            u[xi] = dt * ux;
        }
        for (uint32_t r : active_rows) {
            Real d = 0;
            for (const auto& e : nbh.of(r))
                d += world.V[e.j] * world.rho[e.j] * (u[e.j] - u[r]).dot(e.grad);
            lhs[r] = d;
        }
    };

    // exact Jacobi diagonal: response of lhs_r to a unit pressure at r
    std::vector<Real> diag(n, Real(0));
    std::vector<Real> beta(n, Real(0));
    {
        std::vector<Vec3> g_unit(n), u_unit(n);
        for (uint32_t r : active_rows) {
            std::vector<uint32_t> local{r};
            for (const auto& e : nbh.of(r))
                local.push_back(e.j);
            for (uint32_t k : local) {
                Vec3 g = Vec3::Zero();
                if (k == r) {
                    // d gradp_r / d p_r of the symmetric form
                    for (const auto& e : nbh.of(k))
                        g += world.V[e.j] * world.rho[e.j] / world.rho[r] * e.grad;
                } else {
                    // d gradp_k / d p_r
                    for (const auto& e : nbh.of(k))
                        if (e.j == r) g += world.rho[k] * world.V[r] / world.rho[r] * e.grad;
                }
                g_unit[k] = g;
            }
            for (uint32_t xi : local) {
                const RigidBody& b = world.bodies[world.body_of[xi]];
                Vec3 ux = Vec3::Zero();
                if (!b.is_static)
                    for (uint32_t k : local)
                        if (world.body_of[k] == world.body_of[xi])
                            ux += world.V[k] * (krk(b, world.lever[xi], world.lever[k]) * g_unit[k]);
                u_unit[xi] = dt * ux;
            }
            Real d = 0;
            for (const auto& e : nbh.of(r))
                d += world.V[e.j] * world.rho[e.j] * (u_unit[e.j] - u_unit[r]).dot(e.grad);
            diag[r] = d;
        }
        // relaxation 0.5 / (contacts per body): every active sample of a body
        // couples through the same K map, so the collective response scales
        // with the body's contact count, not the per-sample neighbor count
        std::vector<int> body_contacts(world.bodies.size(), 0);
        for (uint32_t r : active_rows)
            ++body_contacts[world.body_of[r]];
        for (uint32_t r : active_rows)
            beta[r] = Real(0.5) / Real(std::max(1, body_contacts[world.body_of[r]]));
    }

    Real src_norm = 0;
    for (uint32_t r : active_rows)
        src_norm += source[r] * source[r];
    src_norm = std::sqrt(src_norm);
    const Real scale = src_norm > Real(1e-300) ? src_norm : Real(1);

    std::vector<Real> pnew(world.p.begin(), world.p.end());
    for (int it = 0; it < max_iter; ++it) {
        compute_lhs(world.p);
        Real rnorm = 0;
        for (uint32_t r : active_rows) {
            const Real res = source[r] - lhs[r];
            rnorm += res * res;
            if (std::abs(diag[r]) < Real(1e-300)) continue;
            pnew[r] = std::max(Real(0), world.p[r] + beta[r] / diag[r] * res);
        }
        for (uint32_t r : active_rows)
            world.p[r] = pnew[r];
        rep.iterations = it + 1;
        rep.residual = std::sqrt(rnorm) / scale;
        if (rep.residual <= tol) {
            rep.converged = true;
            break;
        }
    }
    if (!rep.converged) rep.note = "rigid contact solve hit iteration cap";

    // apply the contact forces the solved system describes
    for (uint32_t k = 0; k < n; ++k) {
        if (!relevant[k]) continue;
        const Vec3 force = -world.V[k] * sym_grad(world.p, k);
        RigidBody& b = world.bodies[world.body_of[k]];
        b.f_contact += force;
        b.tau_contact += world.lever[k].cross(force);
    }
    return rep;
}

/// Symplectic Euler step with the gyroscopic term; orientation via quaternion
/// integration and renormalization.
inline void integrate_bodies(RigidWorld& world, Real dt) {
    for (auto& b : world.bodies) {
        if (b.is_static) continue;
        b.v += dt / b.mass * (b.f_ext + b.f_contact);
        b.w += dt * (b.inertia_world_inv() *
                     (b.tau_ext + b.tau_contact + (b.inertia_world() * b.w).cross(b.w)));
        b.com += dt * b.v;
        const Quat wq(Real(0), b.w[0], b.w[1], b.w[2]);
        Quat dq = wq * b.orient;
        b.orient.coeffs() += Real(0.5) * dt * dq.coeffs();
        b.orient.normalize();
    }
    world.sync_samples();
}

} // namespace sphlite::rigid
