#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they validate: brute-force neighbor search, direct (uncorrected) SPH
// operators, bitwise Morton codes, finite differences and lattice builders.

#include <random>

#include <sphlite/neighborhood.hpp>
#include <sphlite/particles.hpp>
#include <sphlite/sph_ops.hpp>

namespace oracles {

using sphlite::KernelParams;
using sphlite::Neighborhood;
using sphlite::ParticleSet;
using sphlite::Real;
using sphlite::Vec3;

inline std::mt19937 rng(uint32_t seed) { return std::mt19937(seed); }

inline Vec3 random_vec(std::mt19937& gen, Real lo, Real hi) {
    std::uniform_real_distribution<Real> d(lo, hi);
    return Vec3(d(gen), d(gen), d(gen));
}

// O(n^2) fixed-radius neighbor reference (closed ball, self excluded)
inline std::vector<std::vector<uint32_t>> brute_force_neighbors(std::span<const Vec3> pts,
                                                                Real radius) {
    std::vector<std::vector<uint32_t>> out(pts.size());
    const Real r2 = radius * radius;
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = 0; j < pts.size(); ++j)
            if (i != j && (pts[i] - pts[j]).squaredNorm() <= r2)
                out[i].push_back(static_cast<uint32_t>(j));
    return out;
}

// bit-by-bit Morton reference
inline uint64_t morton_naive(int32_t i, int32_t j, int32_t k) {
    const uint64_t bias = 1u << 20;
    const uint64_t u[3] = {static_cast<uint64_t>(i + bias), static_cast<uint64_t>(j + bias),
                           static_cast<uint64_t>(k + bias)};
    uint64_t code = 0;
    for (int b = 0; b < 21; ++b)
        for (int d = 0; d < 3; ++d)
            code |= ((u[d] >> b) & 1ull) << (3 * b + d);
    return code;
}

// central finite difference of the cubic spline
inline Vec3 fd_gradient(const Vec3& r, const KernelParams& k, Real step) {
    Vec3 g;
    for (int d = 0; d < 3; ++d) {
        Vec3 hi = r, lo = r;
        hi[d] += step;
        lo[d] -= step;
        g[d] = (sphlite::cubic_w(hi, k) - sphlite::cubic_w(lo, k)) / (2 * step);
    }
    return g;
}

// cubic lattice block of extent count^3, centered at the origin
inline std::vector<Vec3> lattice(int count, Real spacing) {
    std::vector<Vec3> pts;
    const Real off = (count - 1) * spacing / Real(2);
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < count; ++j)
            for (int l = 0; l < count; ++l)
                pts.push_back(Vec3(i * spacing - off, j * spacing - off, l * spacing - off));
    return pts;
}

inline std::vector<Vec3> jittered_lattice(int count, Real spacing, Real jitter, uint32_t seed) {
    auto pts = lattice(count, spacing);
    auto gen = rng(seed);
    std::uniform_real_distribution<Real> d(-jitter * spacing, jitter * spacing);
    for (auto& p : pts)
        p += Vec3(d(gen), d(gen), d(gen));
    return pts;
}

// particle set on given positions with uniform mass and precomputed density
inline ParticleSet make_particles(std::span<const Vec3> pts, Real mass) {
    ParticleSet ps;
    ps.x.assign(pts.begin(), pts.end());
    ps.resize(pts.size());
    std::fill(ps.m.begin(), ps.m.end(), mass);
    return ps;
}

struct FluidPatch {
    ParticleSet ps;
    sphlite::NeighborGrid grid;
    Neighborhood nbh;
};

// lattice fluid with computed densities, ready for operator tests
inline FluidPatch lattice_fluid(int count, Real spacing, const KernelParams& k, Real rho0 = 1000,
                                Real jitter = 0, uint32_t seed = 1) {
    FluidPatch f;
    const auto pts = jitter > 0 ? jittered_lattice(count, spacing, jitter, seed) : lattice(count, spacing);
    f.ps = make_particles(pts, rho0 * spacing * spacing * spacing);
    f.grid = sphlite::NeighborGrid::build(f.ps.x, k.support);
    f.nbh = sphlite::build_neighborhood(f.ps.x, f.ps.x, f.grid, k, true);
    sphlite::ops::density(f.ps, f.nbh, k);
    return f;
}

inline size_t center_index(int count) {
    const int c = count / 2;
    return static_cast<size_t>(c * count * count + c * count + c);
}

// direct (uncorrected) first-order operators; poor approximations kept as
// reference points only
inline Vec3 direct_gradient(std::span<const Real> field, const ParticleSet& ps,
                            const Neighborhood& nbh, size_t i) {
    Vec3 g = Vec3::Zero();
    for (const auto& e : nbh.of(i))
        g += ps.m[e.j] / ps.rho[e.j] * field[e.j] * e.grad;
    return g;
}

inline Real direct_divergence(std::span<const Vec3> vf, const ParticleSet& ps,
                              const Neighborhood& nbh, size_t i) {
    Real d = 0;
    for (const auto& e : nbh.of(i))
        d += ps.m[e.j] / ps.rho[e.j] * vf[e.j].dot(e.grad);
    return d;
}

inline Vec3 direct_curl(std::span<const Vec3> vf, const ParticleSet& ps, const Neighborhood& nbh,
                        size_t i) {
    Vec3 c = Vec3::Zero();
    for (const auto& e : nbh.of(i))
        c -= ps.m[e.j] / ps.rho[e.j] * vf[e.j].cross(e.grad);
    return c;
}

// grad(div A) in the difference form, companion identity to the
// finite-difference Laplacian
inline Vec3 grad_div_fd(std::span<const Vec3> vf, const ParticleSet& ps, const Neighborhood& nbh,
                        const KernelParams& k, size_t i) {
    Vec3 out = Vec3::Zero();
    for (const auto& e : nbh.of(i)) {
        const Vec3 aij = vf[i] - vf[e.j];
        const Real rlen = e.xij.norm();
        if (rlen < Real(1e-12)) continue;
        const Vec3 rhat = e.xij / rlen;
        out += ps.m[e.j] / ps.rho[e.j] *
               ((k.dim + 2) * aij.dot(rhat) * rhat - aij) * (e.grad.norm() / rlen);
    }
    return out;
}

} // namespace oracles
