#pragma once

#include <cstdint>
#include <vector>

namespace ddreg {

// Dense row-major real matrix.
struct Plane {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    double operator()(int r, int c) const { return v[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }
    double &operator()(int r, int c) { return v[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }
    bool same_shape(const Plane &o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Plane &o) const = default;
};

// Pre-normalization logits of a matching head.
using ScoreMap = Plane;

struct BoolPlane {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> v;

    BoolPlane() = default;
    BoolPlane(int r, int c, bool fill = false)
        : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), fill ? 1 : 0) {}

    bool operator()(int r, int c) const { return v[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)] != 0; }
    void set(int r, int c, bool on) { v[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)] = on ? 1 : 0; }
    size_t count() const;
    bool operator==(const BoolPlane &o) const = default;
};

// A fine-resolution pass/fail mask over candidate pairs.
using FilterMask = BoolPlane;

enum class MapLevel { Coarse, Fine, Scores };

const char *level_name(MapLevel level) noexcept;
MapLevel level_from_name(const char *name);

// Three-channel correspondence map between the grid cells of a moving and a
// fixed image. Rows index moving cells, columns fixed cells, both row-major
// over a grid x grid lattice. Channel meaning by level:
//   Coarse: conf, cos, sin of the rotation difference
//   Fine:   conf, refinement along rows, along cols (in fine-cell units)
//   Scores: raw logits in `conf`, raw auxiliary outputs in aux1/aux2
struct MatchMap {
    MapLevel level = MapLevel::Coarse;
    int grid = 0;
    int side = 0;
    Plane conf;
    Plane aux1;
    Plane aux2;

    MatchMap() = default;
    MatchMap(MapLevel lvl, int grid_cells, int image_side);

    int cells() const noexcept { return grid * grid; }
    int cell_size() const noexcept { return grid > 0 ? side / grid : 0; }
    bool operator==(const MatchMap &o) const = default;
};

// Row-major cell index helpers on a grid x grid lattice.
inline int cell_row(int cell, int grid) { return cell / grid; }
inline int cell_col(int cell, int grid) { return cell % grid; }

// Index on the coarse lattice of the cell containing fine cell `fine`
// (fine grid is twice the coarse grid).
inline int parent_cell(int fine, int fine_grid) {
    const int coarse_grid = fine_grid / 2;
    return (cell_row(fine, fine_grid) / 2) * coarse_grid + cell_col(fine, fine_grid) / 2;
}

} // namespace ddreg
