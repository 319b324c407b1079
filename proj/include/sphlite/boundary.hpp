#pragma once

#include <cmath>

#include "neighborhood.hpp"
#include "particles.hpp"
#include "sph_ops.hpp"

namespace sphlite {

/// Particle sampling of a rigid or static boundary. Masses are pseudo-masses
/// derived from sample volume and the adjacent fluid's rest density.
struct BoundarySet {
    std::vector<Vec3> x;
    std::vector<Real> mass;
    std::vector<Real> volume;
    std::vector<Vec3> v;       // zero for static boundaries
    std::vector<int32_t> owner; // rigid body id, -1 for static

    size_t size() const { return x.size(); }
    void resize(size_t n) {
        x.resize(n, Vec3::Zero());
        mass.resize(n, Real(0));
        volume.resize(n, Real(0));
        v.resize(n, Vec3::Zero());
        owner.resize(n, -1);
    }
    void append(const BoundarySet& other, int32_t owner_id) {
        for (size_t i = 0; i < other.size(); ++i) {
            x.push_back(other.x[i]);
            mass.push_back(other.mass[i]);
            volume.push_back(other.volume[i]);
            v.push_back(other.v[i]);
            owner.push_back(owner_id);
        }
    }
};

struct GammaCoefficients {
    Real gamma1 = 1;
    Real gamma2 = 1;
};

namespace boundary {

/// Correction coefficients from the planar templates at spacing = particle
/// size.
///
/// gamma1 comes from the volume-completeness constraint at a template
/// boundary sample centered in a `layers`-thick slab: gamma1 / sum_bb W must
/// reproduce the rest volume s^3, so gamma1 = s^3 * sum_bb W. For a single
/// layer this is ~0.70 with the cubic spline at h = 2s; a slab thick enough
/// to fill the support recovers gamma1 = 1.
///
/// gamma2 is the least-squares solution of sum_f gradW + gamma2 sum_b gradW
/// = 0 at a template fluid particle adjacent to a single-layer wall.
inline GammaCoefficients template_gamma(const KernelParams& k, Real particle_size, int layers = 1) {
    if (k.dim != 3) throw ConfigError("template_gamma: boundary templates are 3D");
    const Real s = particle_size;
    const int reach = static_cast<int>(std::ceil(k.support / s)) + 1;
    GammaCoefficients g;

    // volume template: sample at the center of the slab
    Real sum_bb = 0;
    for (int ix = -reach; ix <= reach; ++ix)
        for (int iy = -reach; iy <= reach; ++iy)
            for (int l = 0; l < layers; ++l) {
                const Real z = (Real(l) - Real(layers - 1) / Real(2)) * s;
                const Vec3 xj(ix * s, iy * s, z);
                if (xj.norm() > k.support) continue;
                sum_bb += cubic_w(xj, k);
            }
    g.gamma1 = s * s * s * sum_bb;

    // force template: fluid half lattice over `layers` wall layers
    Vec3 grad_f = Vec3::Zero(), grad_b = Vec3::Zero();
    for (int ix = -reach; ix <= reach; ++ix)
        for (int iy = -reach; iy <= reach; ++iy)
            for (int iz = -reach; iz <= reach; ++iz) {
                const Vec3 xj(ix * s, iy * s, iz * s);
                if (xj.norm() > k.support) continue;
                if (iz >= 0)
                    grad_f += cubic_grad_w(-xj, k);
                else if (iz >= -layers)
                    grad_b += cubic_grad_w(-xj, k);
            }
    g.gamma2 = -grad_f.dot(grad_b) / grad_b.squaredNorm();
    return g;
}

/// Pseudo-mass of each sample: m_b = rho0 * gamma1 / sum_bb W, the sum taken
/// over the sample itself and all boundary samples within support (same or
/// adjacent boundaries). Handles non-uniform and even coincident samplings.
inline void boundary_masses(BoundarySet& bs, const Neighborhood& bb, const KernelParams& k,
                            Real rho0, Real gamma1) {
    const Real w0 = cubic_w0(k);
    for (size_t b = 0; b < bs.size(); ++b) {
        Real denom = w0;
        for (const auto& e : bb.of(b))
            denom += e.w;
        if (!(denom > Real(1e-12) * w0))
            throw ConfigError("boundary: isolated boundary sample " + std::to_string(b) +
                              " (degenerate kernel sum)");
        bs.volume[b] = gamma1 / denom;
        bs.mass[b] = rho0 * bs.volume[b];
    }
}

/// rho_i = m_i sum_f W + sum_b m_b W; gamma1 is already folded into the
/// sample masses.
inline void fluid_density_with_boundary(ParticleSet& ps, const BoundarySet& bs,
                                        const Neighborhood& ff, const Neighborhood& fb,
                                        const KernelParams& k) {
    ops::density(ps, ff, k);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Real r = ps.rho[i];
        for (const auto& e : fb.of(i))
            r += bs.mass[e.j] * e.w;
        ps.rho[i] = r;
    }
}

/// Pressure force with mirrored boundary pressure (p_b = p_i, rho_b = rho0).
/// The reaction -f is accumulated per boundary sample for rigid coupling;
/// fluid and reaction forces balance exactly.
inline void pressure_force_with_boundary(const ParticleSet& ps, const BoundarySet& bs,
                                         const Neighborhood& ff, const Neighborhood& fb,
                                         Real gamma2, Real rho0, std::span<Vec3> force,
                                         std::span<Vec3> reaction) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        const Real pi_term = ps.p[i] / (ps.rho[i] * ps.rho[i]);
        Vec3 f = Vec3::Zero();
        for (const auto& e : ff.of(i))
            f -= ps.m[i] * ps.m[e.j] * (pi_term + ps.p[e.j] / (ps.rho[e.j] * ps.rho[e.j])) * e.grad;
        const Real mirror = pi_term + ps.p[i] / (rho0 * rho0);
        for (const auto& e : fb.of(i))
            f -= gamma2 * ps.m[i] * bs.mass[e.j] * mirror * e.grad;
        force[i] = f;
    }
    for (size_t i = 0; i < ps.size(); ++i) {
        const Real mirror = ps.p[i] / (ps.rho[i] * ps.rho[i]) + ps.p[i] / (rho0 * rho0);
        for (const auto& e : fb.of(i))
            reaction[e.j] += gamma2 * ps.m[i] * bs.mass[e.j] * mirror * e.grad;
    }
}

inline BoundarySet sample_plane(const Vec3& center, int normal_axis, Real extent_u, Real extent_v,
                                Real spacing) {
    const int ua = (normal_axis + 1) % 3;
    const int va = (normal_axis + 2) % 3;
    const int nu = static_cast<int>(std::lround(extent_u / spacing)) + 1;
    const int nv = static_cast<int>(std::lround(extent_v / spacing)) + 1;
    BoundarySet bs;
    for (int iu = 0; iu < nu; ++iu)
        for (int iv = 0; iv < nv; ++iv) {
            Vec3 p = center;
            p[ua] += -extent_u / 2 + iu * extent_u / std::max(1, nu - 1);
            p[va] += -extent_v / 2 + iv * extent_v / std::max(1, nv - 1);
            bs.x.push_back(p);
        }
    bs.resize(bs.x.size());
    return bs;
}

/// One-layer lattice shell of an axis-aligned box; shared edges and corners
/// appear once. open_top drops the interior of the +y face but keeps its rim.
inline BoundarySet sample_box(const Vec3& bmin, const Vec3& bmax, Real spacing, bool open_top = false) {
    int n[3];
    for (int d = 0; d < 3; ++d)
        n[d] = std::max(2, static_cast<int>(std::lround((bmax[d] - bmin[d]) / spacing)) + 1);
    BoundarySet bs;
    for (int ix = 0; ix < n[0]; ++ix)
        for (int iy = 0; iy < n[1]; ++iy)
            for (int iz = 0; iz < n[2]; ++iz) {
                const bool on_x = ix == 0 || ix == n[0] - 1;
                const bool on_y = iy == 0 || iy == n[1] - 1;
                const bool on_z = iz == 0 || iz == n[2] - 1;
                if (!(on_x || on_y || on_z)) continue;
                if (open_top && iy == n[1] - 1 && !on_x && !on_z) continue;
                Vec3 p;
                for (int d = 0; d < 3; ++d) {
                    const int idx = d == 0 ? ix : d == 1 ? iy : iz;
                    p[d] = bmin[d] + (bmax[d] - bmin[d]) * Real(idx) / Real(n[d] - 1);
                }
                bs.x.push_back(p);
            }
    bs.resize(bs.x.size());
    return bs;
}

/// Fibonacci-spiral sphere sampling; point count is chosen so the largest
/// gap between adjacent samples stays below the requested spacing.
inline BoundarySet sample_sphere(const Vec3& center, Real radius, Real spacing) {
    const int n = std::max(16, static_cast<int>(std::ceil(Real(9) * (radius / spacing) * (radius / spacing))));
    const Real golden = pi * (Real(3) - std::sqrt(Real(5)));
    BoundarySet bs;
    for (int i = 0; i < n; ++i) {
        const Real y = Real(1) - Real(2) * (Real(i) + Real(0.5)) / Real(n);
        const Real r = std::sqrt(std::max(Real(0), Real(1) - y * y));
        const Real th = golden * Real(i);
        bs.x.push_back(center + radius * Vec3(r * std::cos(th), y, r * std::sin(th)));
    }
    bs.resize(bs.x.size());
    return bs;
}

} // namespace boundary
} // namespace sphlite
