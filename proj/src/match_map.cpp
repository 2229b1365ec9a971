#include "ddreg/match_map.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "ddreg/error.hpp"

namespace ddreg {

size_t BoolPlane::count() const {
    return static_cast<size_t>(std::count(v.begin(), v.end(), std::uint8_t{1}));
}

const char *level_name(MapLevel level) noexcept {
    switch (level) {
    case MapLevel::Coarse: return "coarse";
    case MapLevel::Fine: return "fine";
    case MapLevel::Scores: return "scores";
    }
    return "coarse";
}

MapLevel level_from_name(const char *name) {
    if (std::strcmp(name, "coarse") == 0) return MapLevel::Coarse;
    if (std::strcmp(name, "fine") == 0) return MapLevel::Fine;
    if (std::strcmp(name, "scores") == 0) return MapLevel::Scores;
    throw Error(Errc::Format, std::string("unknown map level '") + name + "'");
}

MatchMap::MatchMap(MapLevel lvl, int grid_cells, int image_side)
    : level(lvl), grid(grid_cells), side(image_side),
      conf(grid_cells * grid_cells, grid_cells * grid_cells),
      aux1(grid_cells * grid_cells, grid_cells * grid_cells),
      aux2(grid_cells * grid_cells, grid_cells * grid_cells) {
    if (grid_cells <= 0 || image_side <= 0 || image_side % grid_cells != 0) {
        throw Error(Errc::SizeMismatch, "grid must divide the image side");
    }
}

} // namespace ddreg
