#pragma once

#include "boundary.hpp"
#include "rigid.hpp"
#include "scene.hpp"

namespace sphlite::sim {

/// Instantiates the rigid bodies from the scene: surface samples in the body
/// frame, mass and inertia of the solid shape, initial state, artificial
/// contact volumes.
inline void setup_rigids(rigid::RigidWorld& world, const SceneConfig& cfg) {
    if (cfg.rigids.empty()) return;
    Real max_spacing = cfg.particle_size;
    for (const auto& rc : cfg.rigids)
        max_spacing = std::max(max_spacing, rc.spacing > 0 ? rc.spacing : cfg.particle_size);
    world.kernel = make_kernel(Real(2) * max_spacing, 3);
    for (const auto& rc : cfg.rigids) {
        const Real sp = rc.spacing > 0 ? rc.spacing : cfg.particle_size;
        rigid::RigidBody body;
        body.is_static = rc.is_static;
        body.com = rc.center;
        body.v = rc.velocity;
        body.w = rc.angular_velocity;
        if (rc.kind == RigidConfig::Kind::Box) {
            const Vec3 he = rc.extents / Real(2);
            const BoundarySet shell = boundary::sample_box(-he, he, sp);
            body.samples_local = shell.x;
            const Real volume = rc.extents[0] * rc.extents[1] * rc.extents[2];
            body.mass = rc.density * volume;
            body.inertia_body = Mat3::Zero();
            body.inertia_body(0, 0) =
                body.mass / Real(12) * (rc.extents[1] * rc.extents[1] + rc.extents[2] * rc.extents[2]);
            body.inertia_body(1, 1) =
                body.mass / Real(12) * (rc.extents[0] * rc.extents[0] + rc.extents[2] * rc.extents[2]);
            body.inertia_body(2, 2) =
                body.mass / Real(12) * (rc.extents[0] * rc.extents[0] + rc.extents[1] * rc.extents[1]);
        } else {
            const BoundarySet shell = boundary::sample_sphere(Vec3::Zero(), rc.radius, sp);
            body.samples_local = shell.x;
            const Real volume = Real(4) / Real(3) * pi * rc.radius * rc.radius * rc.radius;
            body.mass = rc.density * volume;
            body.inertia_body =
                Real(0.4) * body.mass * rc.radius * rc.radius * Mat3::Identity();
        }
        world.bodies.push_back(std::move(body));
    }
    rigid::rigid_rest_volumes(world);
}

/// Rigid samples double as fluid boundary samples; their pseudo-masses come
/// from the body's own sampling so they are invariant under rigid motion.
inline BoundarySet rigid_boundary_samples(const rigid::RigidWorld& world, uint32_t body_index,
                                          const KernelParams& fluid_kernel, Real rho0,
                                          Real gamma1) {
    const rigid::RigidBody& body = world.bodies[body_index];
    BoundarySet bs;
    bs.x = body.samples_local;
    bs.resize(bs.x.size());
    const NeighborGrid grid = NeighborGrid::build(bs.x, fluid_kernel.support);
    const Neighborhood bb = build_neighborhood(bs.x, bs.x, grid, fluid_kernel, true);
    boundary::boundary_masses(bs, bb, fluid_kernel, rho0, gamma1);
    const Mat3 r = body.orient.toRotationMatrix();
    for (size_t s = 0; s < bs.size(); ++s) {
        bs.x[s] = body.com + r * body.samples_local[s];
        bs.v[s] = body.is_static ? Vec3::Zero()
                                 : Vec3(body.v + body.w.cross(r * body.samples_local[s]));
    }
    return bs;
}

} // namespace sphlite::sim
