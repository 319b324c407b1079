#pragma once

#include <cmath>
#include <functional>

#include "common.hpp"

namespace sphlite::linsolve {

struct SolveReport {
    int iterations = 0;
    Real residual = 0; // final relative residual
    bool converged = false;
    std::string note;
};

/// Matrix-free linear operator: apply(x, out) writes A x into out.
using ApplyFn = std::function<void(std::span<const Real>, std::span<Real>)>;

/// Preconditioned conjugate gradients for symmetric positive (semi)definite
/// operators. x carries the initial guess in and the solution out; precond,
/// when given, applies an approximate inverse (e.g. block Jacobi).
inline SolveReport cg(const ApplyFn& apply, std::span<const Real> b, std::span<Real> x,
                      Real tol, int max_iter, const ApplyFn& precond = {}) {
    const size_t n = b.size();
    SolveReport rep;
    std::vector<Real> r(n), z(n), p(n), ap(n);

    apply(x, ap);
    Real bnorm = 0;
    for (size_t i = 0; i < n; ++i) {
        r[i] = b[i] - ap[i];
        bnorm += b[i] * b[i];
    }
    bnorm = std::sqrt(bnorm);
    const Real scale = bnorm > Real(1e-300) ? bnorm : Real(1);

    auto residual_norm = [&] {
        Real s = 0;
        for (size_t i = 0; i < n; ++i)
            s += r[i] * r[i];
        return std::sqrt(s);
    };

    rep.residual = residual_norm() / scale;
    if (rep.residual <= tol) {
        rep.converged = true;
        return rep;
    }

    if (precond)
        precond(r, z);
    else
        std::copy(r.begin(), r.end(), z.begin());
    std::copy(z.begin(), z.end(), p.begin());
    Real rz = 0;
    for (size_t i = 0; i < n; ++i)
        rz += r[i] * z[i];

    for (int it = 0; it < max_iter; ++it) {
        apply(p, ap);
        Real pap = 0;
        for (size_t i = 0; i < n; ++i)
            pap += p[i] * ap[i];
        if (!(pap > Real(0))) {
            rep.iterations = it;
            rep.residual = residual_norm() / scale;
            rep.note = "cg breakdown: non-positive curvature direction";
            return rep;
        }
        const Real alpha = rz / pap;
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rep.iterations = it + 1;
        rep.residual = residual_norm() / scale;
        if (rep.residual <= tol) {
            rep.converged = true;
            return rep;
        }
        if (precond)
            precond(r, z);
        else
            std::copy(r.begin(), r.end(), z.begin());
        Real rz_new = 0;
        for (size_t i = 0; i < n; ++i)
            rz_new += r[i] * z[i];
        const Real beta = rz_new / rz;
        rz = rz_new;
        for (size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }
    rep.note = "cg reached iteration cap";
    return rep;
}

/// Stop predicate for relaxed_jacobi. Receives the iteration count, the
/// updated solution and A x of the pre-update iterate; returning true ends
/// the loop. Physics callers inject their own convergence measure here.
using JacobiStopFn = std::function<bool(int, std::span<const Real>, std::span<const Real>)>;

/// Relaxed (damped) Jacobi iteration x_i += omega_i / a_ii (s_i - (Ax)_i),
/// with an optional non-negativity clamp after every update. Rows with zero
/// diagonal are excluded from updates and flagged in the report note.
/// omega holds either one shared value or one value per row.
inline SolveReport relaxed_jacobi(std::span<const Real> diag, const ApplyFn& apply,
                                  std::span<const Real> s, std::span<Real> x,
                                  std::span<const Real> omega, bool clamp_nonneg,
                                  int max_iter, const JacobiStopFn& stop) {
    const size_t n = s.size();
    SolveReport rep;
    size_t excluded = 0;
    for (size_t i = 0; i < n; ++i)
        if (std::abs(diag[i]) < Real(1e-300)) ++excluded;
    if (excluded)
        rep.note = std::to_string(excluded) + " zero-diagonal rows excluded";

    std::vector<Real> ax(n);
    for (int it = 0; it < max_iter; ++it) {
        apply(x, ax);
        for (size_t i = 0; i < n; ++i) {
            if (std::abs(diag[i]) < Real(1e-300)) continue;
            const Real w = omega.size() == 1 ? omega[0] : omega[i];
            Real xi = x[i] + w / diag[i] * (s[i] - ax[i]);
            if (clamp_nonneg && xi < Real(0)) xi = Real(0);
            x[i] = xi;
        }
        rep.iterations = it + 1;
        Real rn = 0, sn = 0;
        for (size_t i = 0; i < n; ++i) {
            if (std::abs(diag[i]) < Real(1e-300)) continue;
            rn += (s[i] - ax[i]) * (s[i] - ax[i]);
            sn += s[i] * s[i];
        }
        rep.residual = std::sqrt(rn) / (std::sqrt(sn) > Real(1e-300) ? std::sqrt(sn) : Real(1));
        if (stop && stop(rep.iterations, x, ax)) {
            rep.converged = true;
            return rep;
        }
    }
    rep.note += rep.note.empty() ? "iteration cap reached" : "; iteration cap reached";
    return rep;
}

inline SolveReport relaxed_jacobi(std::span<const Real> diag, const ApplyFn& apply,
                                  std::span<const Real> s, std::span<Real> x, Real omega,
                                  bool clamp_nonneg, int max_iter, const JacobiStopFn& stop) {
    const Real w[1] = {omega};
    return relaxed_jacobi(diag, apply, s, x, std::span<const Real>(w, 1), clamp_nonneg, max_iter, stop);
}

} // namespace sphlite::linsolve
