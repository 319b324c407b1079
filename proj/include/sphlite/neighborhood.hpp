#pragma once

#include "kernels.hpp"
#include "nsearch.hpp"

namespace sphlite {

/// Per-pair cache of kernel values, gradients and separation vectors, built
/// once per step and shared by all operators and solver iterations. Positions
/// are fixed while a pressure solve runs, so the cached gradients stay valid.
struct Neighborhood {
    struct Entry {
        uint32_t j;
        Real w;    // W_ij
        Vec3 grad; // grad_i W_ij
        Vec3 xij;  // x_i - x_j
    };
    std::vector<uint32_t> offsets{0};
    std::vector<Entry> entries;

    size_t size() const { return offsets.size() - 1; }
    std::span<const Entry> of(size_t i) const {
        return {entries.data() + offsets[i], offsets[i + 1] - offsets[i]};
    }
};

/// Builds the pair cache for `queries` against the point set the grid was
/// built over. Pass the same array and exclude_equal_index=true for
/// fluid-fluid neighborhoods; self terms are added explicitly by operators.
inline Neighborhood build_neighborhood(std::span<const Vec3> queries, std::span<const Vec3> sources,
                                       const NeighborGrid& grid, const KernelParams& k,
                                       bool exclude_equal_index) {
    if (k.support > grid.cell_size() * (Real(1) + Real(1e-12)))
        throw ConfigError("neighborhood: kernel support exceeds grid cell size");
    Neighborhood nbh;
    nbh.offsets.resize(queries.size() + 1);
    nbh.offsets[0] = 0;
    const Real r2 = k.support * k.support;
    for (size_t i = 0; i < queries.size(); ++i) {
        grid.for_candidates(queries[i], [&](uint32_t j) {
            if (exclude_equal_index && j == i) return;
            const Vec3 xij = queries[i] - sources[j];
            if (xij.squaredNorm() > r2) return;
            nbh.entries.push_back({j, cubic_w(xij, k), cubic_grad_w(xij, k), xij});
        });
        nbh.offsets[i + 1] = static_cast<uint32_t>(nbh.entries.size());
    }
    return nbh;
}

} // namespace sphlite
