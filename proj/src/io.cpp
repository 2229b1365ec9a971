#include "ddreg/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ddreg/error.hpp"

namespace ddreg {

namespace {

fs::path sidecar(const fs::path &path) { return fs::path(path.string() + ".json"); }

void write_bytes(const fs::path &path, const void *data, size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
    out.write(static_cast<const char *>(data), static_cast<std::streamsize>(n));
    if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

std::string read_bytes(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path &path) {
    try {
        return json::parse(read_bytes(path));
    } catch (const json::exception &e) {
        throw Error(Errc::Format, path.string() + ": " + e.what());
    }
}

template <typename T>
T field(const json &j, const char *key) {
    if (!j.is_object() || !j.contains(key)) throw Error(Errc::Format, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &e) {
        throw Error(Errc::Format, std::string("field '") + key + "': " + e.what());
    }
}

std::vector<float> to_floats(const std::vector<double> &v) {
    std::vector<float> out(v.size());
    for (size_t k = 0; k < v.size(); ++k) out[k] = static_cast<float>(v[k]);
    return out;
}

void floats_from(const char *src, size_t n, std::vector<double> &dst) {
    dst.resize(n);
    for (size_t k = 0; k < n; ++k) {
        float f;
        std::memcpy(&f, src + k * sizeof(float), sizeof(float));
        dst[k] = f;
    }
}

// Skips whitespace and '#' comments in a PNM header.
std::size_t pnm_token(const std::string &s, std::size_t pos, int &value) {
    while (pos < s.size()) {
        if (s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    const auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), value);
    if (ec != std::errc()) throw Error(Errc::Format, "malformed PNM header");
    return static_cast<std::size_t>(ptr - s.data());
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string &s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(Errc::Format, "not a number: '" + s + "'");
    return v;
}

int parse_int(const std::string &s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(Errc::Format, "not an integer: '" + s + "'");
    return v;
}

} // namespace

json to_json(const Mat3 &m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
    return {{"role", m.role() == Role::Affine ? "affine" : "coord"}, {"side", m.side()}, {"m", rows}};
}

Mat3 mat3_from_json(const json &j) {
    const auto role = field<std::string>(j, "role");
    if (role != "affine" && role != "coord") throw Error(Errc::Format, "role must be 'affine' or 'coord'");
    const auto rows = field<std::vector<std::vector<double>>>(j, "m");
    if (rows.size() != 3) throw Error(Errc::Format, "matrix must have 3 rows");
    std::array<double, 9> a{};
    for (size_t r = 0; r < 3; ++r) {
        if (rows[r].size() != 3) throw Error(Errc::Format, "matrix rows must have 3 entries");
        for (size_t c = 0; c < 3; ++c) a[r * 3 + c] = rows[r][c];
    }
    return Mat3(role == "affine" ? Role::Affine : Role::Coord, field<int>(j, "side"), a);
}

json to_json(const TransformParams &p) {
    return {{"theta_deg", rad2deg(p.theta)}, {"scale", p.scale}, {"dx", p.dx}, {"dy", p.dy}, {"side", p.side}};
}

TransformParams params_from_json(const json &j) {
    TransformParams p;
    p.theta = deg2rad(field<double>(j, "theta_deg"));
    p.scale = j.contains("scale") ? field<double>(j, "scale") : 1.0;
    p.dx = field<double>(j, "dx");
    p.dy = field<double>(j, "dy");
    p.side = field<int>(j, "side");
    p.validate();
    return p;
}

json to_json(const RigidFit &f) {
    json j{{"theta_deg", rad2deg(f.params.theta)},
           {"dx", f.params.dx},
           {"dy", f.params.dy},
           {"residual_rms", f.residual_rms},
           {"n_used", f.n_used}};
    if (f.side > 0) {
        const FitMatrices m = fit_to_matrices(f, f.side);
        j["coord"] = to_json(m.coord);
        j["affine"] = to_json(m.affine);
    }
    return j;
}

std::string read_text(const fs::path &path) { return read_bytes(path); }

void write_text(const fs::path &path, std::string_view text) { write_bytes(path, text.data(), text.size()); }

void write_pgm16(const fs::path &path, const Raster &r) {
    std::string out = "P5\n" + std::to_string(r.width()) + " " + std::to_string(r.height()) + "\n65535\n";
    const double lo = r.value_range[0];
    const double span = r.value_range[1] - r.value_range[0];
    for (float v : r.values()) {
        const double t = span > 0.0 ? (v - lo) / span : 0.0;
        const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
        out.push_back(static_cast<char>(q >> 8));
        out.push_back(static_cast<char>(q & 0xff));
    }
    write_bytes(path, out.data(), out.size());
}

Raster read_pnm(const fs::path &path) {
    const std::string s = read_bytes(path);
    if (s.size() < 2 || s[0] != 'P' || (s[1] != '5' && s[1] != '6')) {
        throw Error(Errc::Format, path.string() + ": only binary P5/P6 images are supported");
    }
    const int channels = s[1] == '5' ? 1 : 3;
    int w = 0, h = 0, maxval = 0;
    std::size_t pos = pnm_token(s, 2, w);
    pos = pnm_token(s, pos, h);
    pos = pnm_token(s, pos, maxval);
    ++pos; // single whitespace before the raster
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw Error(Errc::Format, path.string() + ": bad dimensions");
    const size_t bytes = maxval > 255 ? 2 : 1;
    const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h) * static_cast<size_t>(channels);
    if (s.size() < pos + n * bytes) throw Error(Errc::Format, path.string() + ": truncated raster");
    std::vector<float> px(n);
    for (size_t k = 0; k < n; ++k) {
        const auto *b = reinterpret_cast<const unsigned char *>(s.data() + pos + k * bytes);
        const unsigned v = bytes == 2 ? (static_cast<unsigned>(b[0]) << 8) | b[1] : b[0];
        px[k] = static_cast<float>(static_cast<double>(v) / maxval);
    }
    return channel_mean(h, w, channels, px);
}

void write_raw(const fs::path &path, const Raster &r) {
    write_bytes(path, r.values().data(), r.values().size() * sizeof(float));
    const json meta{{"h", r.height()}, {"w", r.width()}, {"range", {r.value_range[0], r.value_range[1]}}};
    write_text(sidecar(path), meta.dump());
}

Raster read_raw(const fs::path &path) {
    const json meta = read_json(sidecar(path));
    const int h = field<int>(meta, "h");
    const int w = field<int>(meta, "w");
    const std::string bytes = read_bytes(path);
    const size_t n = static_cast<size_t>(h) * static_cast<size_t>(w);
    if (h <= 0 || w <= 0 || bytes.size() != n * sizeof(float)) {
        throw Error(Errc::Format, path.string() + ": size does not match sidecar");
    }
    std::vector<float> px(n);
    std::memcpy(px.data(), bytes.data(), bytes.size());
    Raster r(h, w, std::move(px));
    if (meta.contains("range")) {
        const auto range = field<std::vector<double>>(meta, "range");
        if (range.size() == 2) r.value_range = {range[0], range[1]};
    }
    return r;
}

void write_match_map(const fs::path &path, const MatchMap &m) {
    std::vector<float> buf;
    buf.reserve(m.conf.v.size() * 3);
    for (const Plane *p : {&m.conf, &m.aux1, &m.aux2}) {
        const std::vector<float> f = to_floats(p->v);
        buf.insert(buf.end(), f.begin(), f.end());
    }
    write_bytes(path, buf.data(), buf.size() * sizeof(float));
    const json meta{{"level", level_name(m.level)}, {"grid", m.grid}, {"side", m.side}};
    write_text(sidecar(path), meta.dump());
}

MatchMap read_match_map(const fs::path &path) {
    const json meta = read_json(sidecar(path));
    MatchMap m(level_from_name(field<std::string>(meta, "level").c_str()), field<int>(meta, "grid"),
               field<int>(meta, "side"));
    const std::string bytes = read_bytes(path);
    const size_t n = m.conf.v.size();
    if (bytes.size() != 3 * n * sizeof(float)) {
        throw Error(Errc::Format, path.string() + ": size does not match sidecar");
    }
    floats_from(bytes.data(), n, m.conf.v);
    floats_from(bytes.data() + n * sizeof(float), n, m.aux1.v);
    floats_from(bytes.data() + 2 * n * sizeof(float), n, m.aux2.v);
    return m;
}

void write_pair_bundle(const fs::path &dir, const SynthPair &pair) {
    fs::create_directories(dir);
    write_raw(dir / "moving.f32", pair.moving);
    write_raw(dir / "fixed.f32", pair.fixed);
    write_raw(dir / "mask_moving.f32", pair.mask_moving);
    write_raw(dir / "mask_fixed.f32", pair.mask_fixed);
    write_match_map(dir / "gt_coarse.map", pair.gt.coarse);
    write_match_map(dir / "gt_fine.map", pair.gt.fine);
    const json meta{{"params_moving", to_json(pair.params_moving)},
                    {"params_fixed", to_json(pair.params_fixed)},
                    {"gt_affine", to_json(pair.gt_affine)},
                    {"gt_params", to_json(pair.gt_params)},
                    {"cand_moving_coarse", pair.gt.cand_moving_coarse},
                    {"cand_fixed_coarse", pair.gt.cand_fixed_coarse},
                    {"cand_moving_fine", pair.gt.cand_moving_fine},
                    {"cand_fixed_fine", pair.gt.cand_fixed_fine}};
    write_text(dir / "pair.json", meta.dump(2) + "\n");
}

SynthPair read_pair_bundle(const fs::path &dir) {
    if (!fs::is_directory(dir)) throw Error(Errc::Io, dir.string() + " is not a pair directory");
    SynthPair pair;
    pair.moving = read_raw(dir / "moving.f32");
    pair.fixed = read_raw(dir / "fixed.f32");
    pair.mask_moving = read_raw(dir / "mask_moving.f32");
    pair.mask_fixed = read_raw(dir / "mask_fixed.f32");
    pair.gt.coarse = read_match_map(dir / "gt_coarse.map");
    pair.gt.fine = read_match_map(dir / "gt_fine.map");
    const json meta = read_json(dir / "pair.json");
    pair.params_moving = params_from_json(field<json>(meta, "params_moving"));
    pair.params_fixed = params_from_json(field<json>(meta, "params_fixed"));
    pair.gt_affine = mat3_from_json(field<json>(meta, "gt_affine"));
    pair.gt_params = params_from_json(field<json>(meta, "gt_params"));
    pair.gt.cand_moving_coarse = field<std::vector<int>>(meta, "cand_moving_coarse");
    pair.gt.cand_fixed_coarse = field<std::vector<int>>(meta, "cand_fixed_coarse");
    pair.gt.cand_moving_fine = field<std::vector<int>>(meta, "cand_moving_fine");
    pair.gt.cand_fixed_fine = field<std::vector<int>>(meta, "cand_fixed_fine");
    return pair;
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string records_csv(const std::vector<EvalRecord> &records) {
    std::string out = "case_id,theta_gt_deg,theta_err_deg,corner_px,corner_pct,n_matches,bucket,excluded\n";
    for (const EvalRecord &r : records) {
        out += r.case_id + ',' + format_double(r.theta_gt_deg) + ',' + format_double(r.theta_err_deg) + ',' +
               format_double(r.corner_px) + ',' + format_double(r.corner_pct) + ',' + std::to_string(r.n_matches) +
               ',' + std::to_string(r.bucket) + ',' + (r.excluded ? "1" : "0") + '\n';
    }
    return out;
}

std::vector<EvalRecord> parse_records_csv(std::string_view text) {
    std::vector<EvalRecord> out;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line.rfind("case_id,", 0) != 0) {
        throw Error(Errc::Format, "records CSV must start with the case_id header");
    }
    const size_t n_cols = split(line, ',').size();
    if (n_cols < 7) throw Error(Errc::Format, "records CSV header has too few columns");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split(line, ',');
        if (f.size() != n_cols) {
            throw Error(Errc::Format, "line " + std::to_string(lineno) + ": expected " + std::to_string(n_cols) +
                                          " columns");
        }
        try {
            EvalRecord r;
            r.case_id = f[0];
            r.theta_gt_deg = parse_double(f[1]);
            r.theta_err_deg = parse_double(f[2]);
            r.corner_px = parse_double(f[3]);
            r.corner_pct = parse_double(f[4]);
            r.n_matches = parse_int(f[5]);
            r.bucket = parse_int(f[6]);
            r.excluded = n_cols > 7 ? f[7] == "1" : std::isinf(r.corner_px);
            if (r.corner_px < 0.0 || r.corner_pct < 0.0 || r.theta_err_deg < 0.0) {
                throw Error(Errc::Format, "negative error value");
            }
            out.push_back(r);
        } catch (const Error &e) {
            throw Error(Errc::Format, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string curve_csv(const std::vector<CurvePoint> &curve) {
    std::string out = "threshold_pct,rate\n";
    for (const CurvePoint &p : curve) {
        out += format_double(p.threshold_pct) + ',' + format_double(p.rate) + '\n';
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace ddreg
