#pragma once

#include <cmath>

#include "common.hpp"

namespace sphlite {

/// Cubic spline smoothing kernel. The smoothing length h equals the support
/// radius, so a single length controls both interpolation and neighbor search.
struct KernelParams {
    Real h = 0;       // smoothing length [m]
    Real support = 0; // support radius, == h for the cubic spline
    int dim = 3;
    Real sigma = 0;   // normalization factor [1/m^dim]
};

inline KernelParams make_kernel(Real h, int dim = 3) {
    if (h <= Real(0)) throw ConfigError("kernel: smoothing length must be positive");
    if (dim < 1 || dim > 3) throw ConfigError("kernel: dim must be 1, 2 or 3");
    KernelParams k;
    k.h = h;
    k.support = h;
    k.dim = dim;
    switch (dim) {
        case 1: k.sigma = Real(4) / (Real(3) * h); break;
        case 2: k.sigma = Real(40) / (Real(7) * pi * h * h); break;
        default: k.sigma = Real(8) / (pi * h * h * h); break;
    }
    return k;
}

inline Real cubic_w(Real rlen, const KernelParams& k) {
    const Real q = rlen / k.h;
    if (q > Real(1)) return Real(0);
    if (q <= Real(0.5)) return k.sigma * (Real(6) * (q * q * q - q * q) + Real(1));
    const Real t = Real(1) - q;
    return k.sigma * Real(2) * t * t * t;
}

inline Real cubic_w(const Vec3& r, const KernelParams& k) { return cubic_w(r.norm(), k); }

/// Kernel value at zero distance, the self contribution in density sums.
inline Real cubic_w0(const KernelParams& k) { return k.sigma; }

/// dW/dq of the cubic spline; both branches meet at q = 1/2 and q = 1.
inline Real cubic_dwdq(Real q, const KernelParams& k) {
    if (q > Real(1)) return Real(0);
    if (q <= Real(0.5)) return k.sigma * (Real(18) * q * q - Real(12) * q);
    const Real t = Real(1) - q;
    return -k.sigma * Real(6) * t * t;
}

inline Vec3 cubic_grad_w(const Vec3& r, const KernelParams& k) {
    const Real rlen = r.norm();
    if (rlen >= k.h || rlen <= Real(1e-12) * k.h) return Vec3::Zero();
    const Real q = rlen / k.h;
    return (cubic_dwdq(q, k) / (k.h * rlen)) * r;
}

/// Akinci cohesion kernel. The middle branch is extended to r = 0 so the
/// value is the continuous limit there; both branches agree at 2r = h.
inline Real cohesion_w(Real rlen, const KernelParams& k) {
    const Real h = k.h;
    if (rlen > h) return Real(0);
    const Real pre = Real(32) / (pi * h * h * h * h * h * h * h * h * h);
    const Real t = (h - rlen) * (h - rlen) * (h - rlen) * rlen * rlen * rlen;
    if (Real(2) * rlen > h) return pre * t;
    const Real h6 = h * h * h * h * h * h;
    return pre * (Real(2) * t - h6 / Real(64));
}

/// Akinci adhesion kernel; nonzero only for h/2 < r <= h.
inline Real adhesion_w(Real rlen, const KernelParams& k) {
    const Real h = k.h;
    if (rlen > h || Real(2) * rlen <= h) return Real(0);
    const Real radicand = -Real(4) * rlen * rlen / h + Real(6) * rlen - Real(2) * h;
    if (radicand <= Real(0)) return Real(0);
    return Real(0.007) / std::pow(h, Real(3.25)) * std::pow(radicand, Real(0.25));
}

/// Midpoint-rule integral of the cubic spline over its support. Approaches 1
/// with growing resolution; used to validate the normalization factors.
inline Real normalization_quadrature(const KernelParams& k, int n) {
    if (n < 32) throw ConfigError("normalization_quadrature: resolution must be >= 32");
    const Real h = k.support;
    const Real dx = Real(2) * h / Real(n);
    Real sum = 0;
    auto coord = [&](int i) { return -h + (Real(i) + Real(0.5)) * dx; };
    if (k.dim == 1) {
        for (int i = 0; i < n; ++i)
            sum += cubic_w(std::abs(coord(i)), k);
        return sum * dx;
    }
    if (k.dim == 2) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                sum += cubic_w(std::sqrt(coord(i) * coord(i) + coord(j) * coord(j)), k);
        return sum * dx * dx;
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                sum += cubic_w(std::sqrt(coord(i) * coord(i) + coord(j) * coord(j) + coord(l) * coord(l)), k);
    return sum * dx * dx * dx;
}

} // namespace sphlite
