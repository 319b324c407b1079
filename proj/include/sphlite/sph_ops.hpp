#pragma once

#include "neighborhood.hpp"
#include "particles.hpp"

namespace sphlite::ops {

/// rho_i = m_i W(0) + sum_j m_j W_ij. The self term is part of the sum over
/// all particles, not an add-on, which is why isolated particles still carry
/// a positive density.
inline void density(ParticleSet& ps, const Neighborhood& nbh, const KernelParams& k) {
    const Real w0 = cubic_w0(k);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Real r = ps.m[i] * w0;
        for (const auto& e : nbh.of(i))
            r += ps.m[e.j] * e.w;
        ps.rho[i] = r;
    }
}

/// Difference formula; annihilates constant fields termwise.
inline void grad_difference(std::span<const Real> field, const ParticleSet& ps,
                            const Neighborhood& nbh, std::span<Vec3> out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 g = Vec3::Zero();
        for (const auto& e : nbh.of(i))
            g += ps.m[e.j] / ps.rho[e.j] * (field[e.j] - field[i]) * e.grad;
        out[i] = g;
    }
}

/// Symmetric formula; forces built from it conserve linear and angular
/// momentum exactly, at the cost of a constant reordering error.
inline void grad_symmetric(std::span<const Real> field, const ParticleSet& ps,
                           const Neighborhood& nbh, std::span<Vec3> out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        const Real fi = field[i] / (ps.rho[i] * ps.rho[i]);
        Vec3 g = Vec3::Zero();
        for (const auto& e : nbh.of(i))
            g += ps.m[e.j] * (fi + field[e.j] / (ps.rho[e.j] * ps.rho[e.j])) * e.grad;
        out[i] = ps.rho[i] * g;
    }
}

inline void divergence(std::span<const Vec3> vfield, const ParticleSet& ps,
                       const Neighborhood& nbh, std::span<Real> out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Real d = 0;
        for (const auto& e : nbh.of(i))
            d += ps.m[e.j] / ps.rho[e.j] * (vfield[e.j] - vfield[i]).dot(e.grad);
        out[i] = d;
    }
}

/// Difference-form curl; reproduces 2*omega on a rigid rotation field.
inline void curl(std::span<const Vec3> vfield, const ParticleSet& ps,
                 const Neighborhood& nbh, std::span<Vec3> out) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 c = Vec3::Zero();
        for (const auto& e : nbh.of(i))
            c += ps.m[e.j] / ps.rho[e.j] * (vfield[i] - vfield[e.j]).cross(e.grad);
        out[i] = c;
    }
}

/// Finite-difference-style Laplacian built from the kernel gradient. The
/// 0.01 h^2 regularizer keeps the denominator away from zero; it is the
/// literature value and deliberately not configurable. Vanishes termwise for
/// rigid rotations, which makes derived viscous forces angular-momentum safe.
inline void laplacian_fd(std::span<const Vec3> vfield, const ParticleSet& ps,
                         const Neighborhood& nbh, const KernelParams& k, std::span<Vec3> out) {
    const Real eps = Real(0.01) * k.h * k.h;
    const Real scale = Real(2) * (k.dim + 2);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 l = Vec3::Zero();
        for (const auto& e : nbh.of(i)) {
            const Vec3 aij = vfield[i] - vfield[e.j];
            l += ps.m[e.j] / ps.rho[e.j] * (aij.dot(e.xij) / (e.xij.squaredNorm() + eps)) * e.grad;
        }
        out[i] = scale * l;
    }
}

/// Kernel-gradient-corrected difference gradient: exact on linear fields
/// wherever the moment matrix is well conditioned. Degenerate neighborhoods
/// (collinear/coplanar) fall back to a Moore-Penrose pseudo-inverse and are
/// flagged.
inline void grad_corrected(std::span<const Real> field, const ParticleSet& ps,
                           const Neighborhood& nbh, std::span<Vec3> out,
                           std::vector<uint8_t>* degenerate = nullptr) {
    if (degenerate) degenerate->assign(ps.size(), 0);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(ps.size()); ++i) {
        Vec3 g = Vec3::Zero();
        Mat3 moment = Mat3::Zero();
        for (const auto& e : nbh.of(i)) {
            const Real vj = ps.m[e.j] / ps.rho[e.j];
            g += vj * (field[e.j] - field[i]) * e.grad;
            moment += vj * e.grad * (-e.xij).transpose();
        }
        Eigen::JacobiSVD<Mat3> svd(moment, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vec3 s = svd.singularValues();
        if (s[0] <= Real(0) || s[2] < Real(1e-6) * s[0]) {
            if (degenerate) (*degenerate)[i] = 1;
            Vec3 sinv = Vec3::Zero();
            for (int d = 0; d < 3; ++d)
                sinv[d] = s[d] >= Real(1e-6) * s[0] && s[d] > Real(0) ? Real(1) / s[d] : Real(0);
            out[i] = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose() * g;
        } else {
            out[i] = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose() * g;
        }
    }
}

} // namespace sphlite::ops
