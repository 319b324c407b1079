#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sphlite {

using Real = double;
using Vec3 = Eigen::Matrix<Real, 3, 1>;
using Mat3 = Eigen::Matrix<Real, 3, 3>;
using Quat = Eigen::Quaternion<Real>;

inline constexpr Real pi = Real(3.14159265358979323846);

/// Thrown when a scene file or parameter set violates a documented constraint.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when the simulation state degenerates (NaN/Inf in particle data).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename T>
void apply_permutation(std::vector<T>& data, std::span<const uint32_t> perm) {
    std::vector<T> tmp(data.size());
    for (size_t k = 0; k < perm.size(); ++k)
        tmp[k] = data[perm[k]];
    data.swap(tmp);
}

inline bool is_prime(uint64_t n) {
    if (n < 2) return false;
    for (uint64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

inline uint32_t next_prime(uint32_t n) {
    uint64_t c = n;
    while (!is_prime(c)) ++c;
    return static_cast<uint32_t>(c);
}

} // namespace sphlite
