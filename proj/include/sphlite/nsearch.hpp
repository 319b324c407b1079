#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "common.hpp"

namespace sphlite {

struct CellKey {
    int32_t i = 0, j = 0, k = 0;
    bool operator==(const CellKey&) const = default;
};

inline CellKey cell_of(const Vec3& x, Real cell_size) {
    return {static_cast<int32_t>(std::floor(x[0] / cell_size)),
            static_cast<int32_t>(std::floor(x[1] / cell_size)),
            static_cast<int32_t>(std::floor(x[2] / cell_size))};
}

/// Spatial hash of a cell tuple. The prime multiplications wrap around in
/// unsigned arithmetic; the result lies in [0, m).
inline uint32_t hash_cell(const CellKey& c, uint32_t m) {
    const uint32_t hx = static_cast<uint32_t>(c.i) * 73856093u;
    const uint32_t hy = static_cast<uint32_t>(c.j) * 19349663u;
    const uint32_t hz = static_cast<uint32_t>(c.k) * 83492791u;
    return (hx ^ hy ^ hz) % m;
}

/// Morton (Z-curve) code of a cell. Coordinates are biased by 2^20 so signed
/// cells map into the 21-bit-per-axis encodable range.
inline uint64_t morton_code(const CellKey& c) {
    constexpr int32_t bias = 1 << 20;
    auto spread = [](uint64_t v) {
        v &= 0x1fffff;
        v = (v | v << 32) & 0x1f00000000ffffULL;
        v = (v | v << 16) & 0x1f0000ff0000ffULL;
        v = (v | v << 8) & 0x100f00f00f00f00fULL;
        v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
        v = (v | v << 2) & 0x1249249249249249ULL;
        return v;
    };
    auto biased = [&](int32_t v) {
        const int64_t b = static_cast<int64_t>(v) + bias;
        if (b < 0 || b >= (int64_t(1) << 21))
            throw std::out_of_range("morton_code: cell coordinate outside +/-2^20 range");
        return static_cast<uint64_t>(b);
    };
    return spread(biased(c.i)) | spread(biased(c.j)) << 1 | spread(biased(c.k)) << 2;
}

/// Per-particle index lists in CSR layout.
struct NeighborLists {
    std::vector<uint32_t> offsets{0};
    std::vector<uint32_t> indices;
    size_t size() const { return offsets.size() - 1; }
    std::span<const uint32_t> of(size_t i) const {
        return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
    }
};

/// Compact hash grid: a hash table of handles into a dense array of populated
/// cells. Only occupied cells are stored, so memory scales with the particle
/// count rather than the domain volume.
class NeighborGrid {
public:
    static constexpr size_t cell_reserve = 48;

    NeighborGrid() = default;

    static NeighborGrid build(std::span<const Vec3> pts, Real cell_size, uint32_t table_size = 0) {
        if (cell_size <= Real(0)) throw ConfigError("nsearch: cell size must be positive");
        NeighborGrid g;
        g.cell_size_ = cell_size;
        g.table_size_ = table_size ? table_size
                                   : next_prime(std::max<uint32_t>(17, 2 * static_cast<uint32_t>(pts.size())));
        g.table_.assign(g.table_size_, -1);
        for (size_t idx = 0; idx < pts.size(); ++idx) {
            const Vec3& x = pts[idx];
            if (!x.allFinite())
                throw NumericalError("nsearch: non-finite position at particle " + std::to_string(idx));
            const CellKey key = cell_of(x, cell_size);
            Cell* cell = g.find_cell_mut(key);
            if (!cell) {
                const uint32_t slot = hash_cell(key, g.table_size_);
                g.cells_.push_back(Cell{key, g.table_[slot], {}});
                g.cells_.back().indices.reserve(cell_reserve);
                g.table_[slot] = static_cast<int32_t>(g.cells_.size() - 1);
                cell = &g.cells_.back();
            }
            cell->indices.push_back(static_cast<uint32_t>(idx));
        }
        return g;
    }

    Real cell_size() const { return cell_size_; }
    uint32_t table_size() const { return table_size_; }
    size_t cell_count() const { return cells_.size(); }

    const std::vector<uint32_t>* cell_indices(const CellKey& key) const {
        const Cell* c = find_cell(key);
        return c ? &c->indices : nullptr;
    }

    /// Visits every stored particle index in the 27-cell block around x, in a
    /// fixed cell traversal order (deterministic).
    template <class F>
    void for_candidates(const Vec3& x, F&& f) const {
        const CellKey base = cell_of(x, cell_size_);
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk) {
                    const Cell* c = find_cell({base.i + di, base.j + dj, base.k + dk});
                    if (!c) continue;
                    for (uint32_t idx : c->indices)
                        f(idx);
                }
    }

private:
    struct Cell {
        CellKey key;
        int32_t next = -1; // chains cells whose keys collide in the hash table
        std::vector<uint32_t> indices;
    };

    const Cell* find_cell(const CellKey& key) const {
        if (table_.empty()) return nullptr;
        int32_t h = table_[hash_cell(key, table_size_)];
        while (h >= 0) {
            const Cell& c = cells_[static_cast<size_t>(h)];
            if (c.key == key) return &c;
            h = c.next;
        }
        return nullptr;
    }
    Cell* find_cell_mut(const CellKey& key) { return const_cast<Cell*>(find_cell(key)); }

    Real cell_size_ = 0;
    uint32_t table_size_ = 0;
    std::vector<int32_t> table_;
    std::vector<Cell> cells_;
};

/// Fixed-radius queries against the grid's own point set; the closed ball
/// counts (distance == radius is a neighbor) and self is excluded.
inline NeighborLists neighbor_lists(const NeighborGrid& grid, std::span<const Vec3> pts, Real radius) {
    if (radius > grid.cell_size() * (Real(1) + Real(1e-12)))
        throw ConfigError("nsearch: query radius exceeds cell size, one-ring coverage lost");
    NeighborLists out;
    out.offsets.resize(pts.size() + 1);
    out.offsets[0] = 0;
    const Real r2 = radius * radius;
    for (size_t i = 0; i < pts.size(); ++i) {
        grid.for_candidates(pts[i], [&](uint32_t j) {
            if (j == i) return;
            if ((pts[i] - pts[j]).squaredNorm() <= r2)
                out.indices.push_back(j);
        });
        out.offsets[i + 1] = static_cast<uint32_t>(out.indices.size());
    }
    return out;
}

/// Permutation that orders particles along the Z-curve of their cells, ties
/// broken by the previous index so an already sorted input maps to identity.
inline std::vector<uint32_t> zsort_permutation(const NeighborGrid& grid, std::span<const Vec3> pts) {
    std::vector<uint64_t> codes(pts.size());
    for (size_t i = 0; i < pts.size(); ++i)
        codes[i] = morton_code(cell_of(pts[i], grid.cell_size()));
    std::vector<uint32_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](uint32_t a, uint32_t b) { return codes[a] < codes[b]; });
    return perm;
}

} // namespace sphlite
