#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ddreg/evalloss.hpp"
#include "ddreg/match_map.hpp"
#include "ddreg/raster.hpp"
#include "ddreg/solve.hpp"
#include "ddreg/synthmap.hpp"
#include "ddreg/xform.hpp"

namespace ddreg {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Matrices: {"role": "affine"|"coord", "side": L, "m": [[...],[...],[...]]}
json to_json(const Mat3 &m);
Mat3 mat3_from_json(const json &j);

// Params: {"theta_deg", "scale", "dx", "dy", "side"}
json to_json(const TransformParams &p);
TransformParams params_from_json(const json &j);

json to_json(const RigidFit &f);

std::string read_text(const fs::path &path);
void write_text(const fs::path &path, std::string_view text);

// 16-bit binary PGM; value_range maps onto 0..65535.
void write_pgm16(const fs::path &path, const Raster &r);
// P5 or P6, 8- or 16-bit. Color is averaged to one channel. Values scaled to [0, 1].
Raster read_pnm(const fs::path &path);

// Little-endian float32 rows plus "<path>.json" {"h", "w", "range"}.
void write_raw(const fs::path &path, const Raster &r);
Raster read_raw(const fs::path &path);

// Little-endian float32 [3][nm][nf] (conf, aux1, aux2) plus
// "<path>.json" {"level", "grid", "side"}.
void write_match_map(const fs::path &path, const MatchMap &m);
MatchMap read_match_map(const fs::path &path);

// Directory with rasters, GT maps and pair.json.
void write_pair_bundle(const fs::path &dir, const SynthPair &pair);
SynthPair read_pair_bundle(const fs::path &dir);

// Columns: case_id, theta_gt_deg, theta_err_deg, corner_px, corner_pct, n_matches, bucket, excluded
std::string records_csv(const std::vector<EvalRecord> &records);
std::vector<EvalRecord> parse_records_csv(std::string_view text);

std::string curve_csv(const std::vector<CurvePoint> &curve);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Shortest text that reads back to the same double ("inf" for infinity).
std::string format_double(double v);

} // namespace ddreg
