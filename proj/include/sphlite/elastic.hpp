#pragma once

#include "linsolve.hpp"
#include "neighborhood.hpp"
#include "nsearch.hpp"

namespace sphlite::elastic {

using linsolve::SolveReport;

struct ElasticMaterial {
    Real youngs = 1e5;   // Young's modulus k [Pa]
    Real poisson = 0.3;  // Poisson ratio
    Real hourglass_alpha = 0.1;
    Real rho0 = 1000;

    Real mu() const { return youngs / (Real(2) * (Real(1) + poisson)); }
    Real lambda() const {
        return youngs * poisson / ((Real(1) + poisson) * (Real(1) - Real(2) * poisson));
    }
};

/// Meshless elastic body with a fixed reference topology. Reference neighbor
/// lists, rest volumes and the kernel-gradient correction matrices are
/// precomputed once; rotations are carried across steps for warm-started
/// extraction.
struct ElasticBody {
    std::vector<Vec3> X;   // reference positions
    std::vector<Vec3> x;   // current positions
    std::vector<Vec3> v;
    std::vector<Real> mass;
    std::vector<Real> V0;
    ElasticMaterial material;
    KernelParams kernel;

    struct RefEntry {
        uint32_t j;
        Real w;
        Vec3 grad; // grad W(X_ij)
        Vec3 Xij;  // X_i - X_j
    };
    std::vector<uint32_t> ref_offsets{0};
    std::vector<RefEntry> ref_entries;
    std::span<const RefEntry> neighbors(size_t i) const {
        return {ref_entries.data() + ref_offsets[i], ref_offsets[i + 1] - ref_offsets[i]};
    }

    std::vector<Mat3> L;          // correction matrices
    std::vector<uint8_t> degenerate;
    std::vector<Mat3> F;          // deformation gradients
    std::vector<Mat3> R;          // extracted rotations
    std::vector<Quat> q;          // warm-start quaternions
    std::vector<Mat3> stress;     // scratch: first Piola-Kirchhoff per particle

    size_t size() const { return X.size(); }
};

inline Mat3 pseudo_inverse(const Mat3& m, bool* flagged = nullptr) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 s = svd.singularValues();
    Vec3 sinv = Vec3::Zero();
    bool degen = false;
    for (int d = 0; d < 3; ++d) {
        if (s[d] > Real(0) && s[d] >= Real(1e-6) * s[0])
            sinv[d] = Real(1) / s[d];
        else
            degen = true;
    }
    if (flagged) *flagged = degen;
    return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

/// Builds N0, V0 and the correction matrices L_i so that
/// sum_j V0_j X_ji (L_i grad W)^T = I on non-degenerate neighborhoods.
/// Collinear/coplanar references take the Moore-Penrose route and are flagged.
inline void precompute_reference(ElasticBody& body) {
    const size_t n = body.size();
    const NeighborGrid grid = NeighborGrid::build(body.X, body.kernel.support);
    const Neighborhood nbh = build_neighborhood(body.X, body.X, grid, body.kernel, true);
    body.ref_offsets.assign(nbh.offsets.begin(), nbh.offsets.end());
    body.ref_entries.clear();
    for (const auto& e : nbh.entries)
        body.ref_entries.push_back({e.j, e.w, e.grad, e.xij});
    body.L.resize(n);
    body.degenerate.assign(n, 0);
    body.F.assign(n, Mat3::Identity());
    body.R.assign(n, Mat3::Identity());
    body.q.assign(n, Quat::Identity());
    body.stress.assign(n, Mat3::Zero());
    for (size_t i = 0; i < n; ++i) {
        Mat3 moment = Mat3::Zero();
        for (const auto& e : body.neighbors(i))
            moment += body.V0[e.j] * e.grad * (-e.Xij).transpose();
        bool flagged = false;
        body.L[i] = pseudo_inverse(moment, &flagged);
        if (flagged) body.degenerate[i] = 1;
    }
}

/// First-order consistent deformation gradient F_i = sum_j V0_j x_ji (L_i grad W)^T.
inline void deformation_gradient(ElasticBody& body, std::span<const Vec3> x) {
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(body.size()); ++i) {
        Mat3 f = Mat3::Zero();
        for (const auto& e : body.neighbors(i))
            f += body.V0[e.j] * (x[e.j] - x[i]) * (body.L[i] * e.grad).transpose();
        body.F[i] = f;
    }
}

/// Warm-started iterative rotation extraction; R stays orthogonal with
/// det = 1 and locally minimizes |F - R|.
inline Mat3 extract_rotation(const Mat3& F, Quat& q, int iterations = 10) {
    if (F.norm() < Real(1e-12)) return q.toRotationMatrix(); // keep previous rotation
    for (int it = 0; it < iterations; ++it) {
        const Mat3 r = q.toRotationMatrix();
        Vec3 omega = r.col(0).cross(F.col(0)) + r.col(1).cross(F.col(1)) + r.col(2).cross(F.col(2));
        omega *= Real(1) / (std::abs(r.col(0).dot(F.col(0)) + r.col(1).dot(F.col(1)) +
                                     r.col(2).dot(F.col(2))) + Real(1e-9));
        const Real w = omega.norm();
        if (w < Real(1e-9)) break;
        q = Quat(Eigen::AngleAxis<Real>(w, omega / w)) * q;
        q.normalize();
    }
    return q.toRotationMatrix();
}

inline void extract_rotations(ElasticBody& body, int iterations = 10) {
    for (size_t i = 0; i < body.size(); ++i)
        body.R[i] = extract_rotation(body.F[i], body.q[i], iterations);
}

inline Mat3 linear_stress(const Mat3& F, const ElasticMaterial& mat) {
    const Mat3 strain = Real(0.5) * (F + F.transpose()) - Mat3::Identity();
    return Real(2) * mat.mu() * strain + mat.lambda() * strain.trace() * Mat3::Identity();
}

/// Corotated deformation gradient per particle (rotations held fixed).
inline Mat3 corotated_gradient(const ElasticBody& body, std::span<const Vec3> x, size_t i) {
    Mat3 f = Mat3::Identity();
    const Mat3 rl = body.R[i] * body.L[i];
    for (const auto& e : body.neighbors(i)) {
        const Vec3 xji = x[e.j] - x[i];
        const Vec3 Xji = -e.Xij;
        f += body.V0[e.j] * (xji - body.R[i] * Xji) * (rl * e.grad).transpose();
    }
    return f;
}

/// Corotated linear elastic forces. The neighbor term evaluates its gradient
/// from the neighbor's side (at X_ji = -X_ij), which makes every pair term
/// antisymmetric and conserves linear momentum; the force vanishes for rigid
/// motions.
inline void elastic_force(const ElasticBody& body, std::span<const Vec3> x,
                          std::span<Vec3> force_out) {
    const size_t n = body.size();
    auto& P = const_cast<ElasticBody&>(body).stress;
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i)
        P[i] = linear_stress(corotated_gradient(body, x, i), body.material);
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
        Vec3 f = Vec3::Zero();
        for (const auto& e : body.neighbors(i)) {
            const Vec3 gi = body.R[i] * body.L[i] * e.grad;          // grad at X_ij
            const Vec3 gj = body.R[e.j] * body.L[e.j] * (-e.grad);   // grad at X_ji
            f += body.V0[i] * body.V0[e.j] * (P[i] * gi - P[e.j] * gj);
        }
        force_out[i] = f;
    }
}

/// Ganzenmueller-style zero-energy-mode penalty; vanishes identically on
/// affine deformations and acts along the current pair direction.
inline void hourglass_force(const ElasticBody& body, std::span<const Vec3> x, Real alpha,
                            std::span<Vec3> force_add, std::vector<uint8_t>* skipped = nullptr) {
    if (skipped) skipped->assign(body.size(), 0);
    const Real k = body.material.youngs;
    #pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(body.size()); ++i) {
        Vec3 f = Vec3::Zero();
        for (const auto& e : body.neighbors(i)) {
            const Vec3 xji = x[e.j] - x[i];
            const Real xlen = xji.norm();
            const Real Xlen = e.Xij.norm();
            if (xlen < Real(1e-9) || Xlen < Real(1e-9)) {
                if (skipped) (*skipped)[i] = 1;
                continue;
            }
            const Vec3 Xji = -e.Xij;
            const Vec3 err_i = body.F[i] * Xji - xji;        // e^i_ji
            const Vec3 err_j = body.F[e.j] * e.Xij - (-xji); // e^j_ij
            const Real proj = err_i.dot(xji) / xlen + err_j.dot(-xji) / xlen;
            f -= Real(0.5) * alpha * k * body.V0[i] * body.V0[e.j] * e.w / (Xlen * Xlen) * proj *
                 xji / xlen;
        }
        force_add[i] += f;
    }
}

/// Implicit velocity solve: rotations are extracted once, held fixed, and the
/// elastic force split into a known part (current positions) and a linear
/// operator on the unknown velocities; solved matrix-free with CG.
inline SolveReport implicit_elastic_solve(ElasticBody& body, std::span<const Vec3> v_pred, Real dt,
                                          Real tol, int max_iter, std::span<Vec3> v_out) {
    const size_t n = body.size();
    deformation_gradient(body, body.x);
    extract_rotations(body);

    std::vector<Real> rhs(3 * n);
    {
        std::vector<Vec3> f_now(n);
        elastic_force(body, body.x, f_now);
        auto* rv = reinterpret_cast<Vec3*>(rhs.data());
        for (size_t i = 0; i < n; ++i)
            rv[i] = v_pred[i] + dt / body.mass[i] * f_now[i];
    }

    std::vector<Mat3> P(n);
    auto apply = [&](std::span<const Real> vx, std::span<Real> out) {
        const auto* vv = reinterpret_cast<const Vec3*>(vx.data());
        auto* ov = reinterpret_cast<Vec3*>(out.data());
        #pragma omp parallel for schedule(static)
        for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
            Mat3 g = Mat3::Zero();
            const Mat3 rl = body.R[i] * body.L[i];
            for (const auto& e : body.neighbors(i))
                g += body.V0[e.j] * (vv[e.j] - vv[i]) * (rl * e.grad).transpose();
            const Mat3 strain = Real(0.5) * (g + g.transpose());
            P[i] = Real(2) * body.material.mu() * strain +
                   body.material.lambda() * strain.trace() * Mat3::Identity();
        }
        #pragma omp parallel for schedule(static)
        for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) {
            Vec3 f = Vec3::Zero();
            for (const auto& e : body.neighbors(i)) {
                const Vec3 gi = body.R[i] * body.L[i] * e.grad;
                const Vec3 gj = body.R[e.j] * body.L[e.j] * (-e.grad);
                f += body.V0[i] * body.V0[e.j] * (P[i] * gi - P[e.j] * gj);
            }
            ov[i] = vv[i] - dt * dt / body.mass[i] * f;
        }
    };

    std::vector<Real> x(3 * n);
    auto* xv = reinterpret_cast<Vec3*>(x.data());
    for (size_t i = 0; i < n; ++i)
        xv[i] = v_pred[i];
    SolveReport rep = linsolve::cg(apply, rhs, x, tol, max_iter);
    for (size_t i = 0; i < n; ++i)
        v_out[i] = xv[i];
    return rep;
}

} // namespace sphlite::elastic
