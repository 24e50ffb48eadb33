#include "celldeploy/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "celldeploy/errors.hpp"
#include "celldeploy/rng.hpp"

namespace celldeploy {

using nlohmann::json;

Rect Building::bbox() const {
  Rect r{footprint.front().x, footprint.front().y, footprint.front().x, footprint.front().y};
  for (const Vec2& v : footprint) {
    r.min_x = std::min(r.min_x, v.x);
    r.min_y = std::min(r.min_y, v.y);
    r.max_x = std::max(r.max_x, v.x);
    r.max_y = std::max(r.max_y, v.y);
  }
  return r;
}

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const double tol = 1e-12 * std::max(1.0, len);
  if (std::abs(cross(a, b, p)) > tol * std::max(1.0, len)) return false;
  return p.x >= std::min(a.x, b.x) - tol && p.x <= std::max(a.x, b.x) + tol &&
         p.y >= std::min(a.y, b.y) - tol && p.y <= std::max(a.y, b.y) + tol;
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  return on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d);
}

bool is_simple_polygon(const std::vector<Vec2>& poly) {
  const std::size_t n = poly.size();
  double area2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    area2 += a.x * b.y - b.x * a.y;
    if (a == b) return false;
  }
  if (std::abs(area2) <= 0.0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // adjacent edges share a vertex by construction
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

bool finite(double v) { return std::isfinite(v); }

bool near_equal(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

// ---- JSON helpers ---------------------------------------------------------

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParseError(where + ": unknown key '" + it.key() + "'");
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  return *it;
}

double num(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + ": expected an integer");
  return v.get<int>();
}

Vec2 vec2(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) throw ParseError(where + ": expected [x, y]");
  return {num(v[0], where), num(v[1], where)};
}

Vec3 vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ParseError(where + ": expected [x, y, z]");
  return {num(v[0], where), num(v[1], where), num(v[2], where)};
}

const char* pattern_name(ElementPattern p) {
  return p == ElementPattern::DirectionalElement ? "tr38901" : "isotropic";
}

}  // namespace

bool polygon_contains(const std::vector<Vec2>& polygon, Vec2 p) {
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i)
    if (on_segment(polygon[i], polygon[(i + 1) % n], p)) return true;
  // winding number
  int wn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    if (a.y <= p.y) {
      if (b.y > p.y && cross(a, b, p) > 0) ++wn;
    } else if (b.y <= p.y && cross(a, b, p) < 0) {
      --wn;
    }
  }
  return wn != 0;
}

std::optional<std::size_t> point_in_building(const Scene& scene, Vec2 p) {
  for (std::size_t i = 0; i < scene.buildings.size(); ++i) {
    const Building& b = scene.buildings[i];
    if (!b.bbox().contains(p)) continue;
    if (polygon_contains(b.footprint, p)) return i;
  }
  return std::nullopt;
}

void validate(const Scenario& s) {
  const Rect& bounds = s.scene.bounds;
  if (!finite(bounds.min_x) || !finite(bounds.min_y) || !finite(bounds.max_x) || !finite(bounds.max_y) ||
      bounds.width() <= 0 || bounds.height() <= 0)
    throw ValidationError("scene.bounds", "must be a finite rectangle with positive extent");

  for (std::size_t i = 0; i < s.scene.buildings.size(); ++i) {
    const Building& b = s.scene.buildings[i];
    const std::string where = "scene.buildings[" + std::to_string(i) + "]";
    if (!finite(b.height) || b.height <= 0) throw ValidationError(where + ".height", "must be > 0");
    if (b.footprint.size() < 3) throw ValidationError(where + ".footprint", "needs at least 3 vertices");
    for (const Vec2& v : b.footprint) {
      if (!finite(v.x) || !finite(v.y)) throw ValidationError(where + ".footprint", "non-finite vertex");
      if (!bounds.contains(v)) throw ValidationError(where + ".footprint", "vertex outside scene bounds");
    }
    if (!is_simple_polygon(b.footprint)) throw ValidationError(where + ".footprint", "not a simple polygon");
  }

  const GridSpec& g = s.grid;
  if (!finite(g.cell_size) || g.cell_size <= 0) throw ValidationError("grid.cell_size", "must be > 0");
  if (g.n_rows < 1) throw ValidationError("grid.n_rows", "must be positive");
  if (g.n_cols < 1) throw ValidationError("grid.n_cols", "must be positive");
  if (!near_equal(g.origin.x, bounds.min_x) || !near_equal(g.origin.y, bounds.min_y))
    throw ValidationError("grid.origin", "must equal the lower-left corner of scene.bounds");
  if (!near_equal(g.n_rows * g.cell_size, bounds.height()))
    throw ValidationError("grid.n_rows", "n_rows * cell_size must span the bounds height");
  if (!near_equal(g.n_cols * g.cell_size, bounds.width()))
    throw ValidationError("grid.n_cols", "n_cols * cell_size must span the bounds width");

  if (s.users.empty()) throw ValidationError("users", "at least one user is required");
  for (std::size_t i = 0; i < s.users.size(); ++i) {
    const UserSpec& u = s.users[i];
    const std::string where = "users[" + std::to_string(i) + "]";
    if (!finite(u.position.x) || !finite(u.position.y) || !finite(u.position.z))
      throw ValidationError(where + ".position", "non-finite component");
    if (!bounds.contains({u.position.x, u.position.y}))
      throw ValidationError(where + ".position", "outside scene bounds");
    if (!finite(u.weight) || u.weight < 0) throw ValidationError(where + ".weight", "must be >= 0");
  }

  if (!finite(s.carrier_freq_hz) || s.carrier_freq_hz <= 0)
    throw ValidationError("radio.carrier_freq_hz", "must be > 0");
  if (!finite(s.tx_power_dbm)) throw ValidationError("radio.tx_power_dbm", "must be finite");
  if (!finite(s.shadow_sigma_db) || s.shadow_sigma_db < 0)
    throw ValidationError("radio.shadow_sigma_db", "must be >= 0");
  if (!finite(s.nlos_penalty_db) || s.nlos_penalty_db < 0)
    throw ValidationError("radio.nlos_penalty_db", "must be >= 0");
  if (!finite(s.nlos_penalty_cap_db) || s.nlos_penalty_cap_db < 0)
    throw ValidationError("radio.nlos_penalty_cap_db", "must be >= 0");

  const AntennaArrayConfig& a = s.antenna;
  if (a.rows < 1) throw ValidationError("antenna.rows", "must be >= 1");
  if (a.cols < 1) throw ValidationError("antenna.cols", "must be >= 1");
  if (!finite(a.dv) || a.dv <= 0) throw ValidationError("antenna.dv_wavelengths", "must be > 0");
  if (!finite(a.dh) || a.dh <= 0) throw ValidationError("antenna.dh_wavelengths", "must be > 0");
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }

  try {
    reject_unknown(doc, {"scene", "grid", "users", "radio", "antenna"}, "scenario");
    Scenario s;

    const json& scene = require(doc, "scene", "scenario");
    reject_unknown(scene, {"bounds", "buildings"}, "scene");
    const json& bounds = require(scene, "bounds", "scene");
    reject_unknown(bounds, {"min", "max"}, "scene.bounds");
    const Vec2 lo = vec2(require(bounds, "min", "scene.bounds"), "scene.bounds.min");
    const Vec2 hi = vec2(require(bounds, "max", "scene.bounds"), "scene.bounds.max");
    s.scene.bounds = {lo.x, lo.y, hi.x, hi.y};
    const json& buildings = require(scene, "buildings", "scene");
    if (!buildings.is_array()) throw ParseError("scene.buildings: expected an array");
    for (std::size_t i = 0; i < buildings.size(); ++i) {
      const std::string where = "scene.buildings[" + std::to_string(i) + "]";
      reject_unknown(buildings[i], {"footprint", "height"}, where);
      Building b;
      const json& fp = require(buildings[i], "footprint", where);
      if (!fp.is_array()) throw ParseError(where + ".footprint: expected an array");
      for (const json& v : fp) b.footprint.push_back(vec2(v, where + ".footprint"));
      b.height = num(require(buildings[i], "height", where), where + ".height");
      s.scene.buildings.push_back(std::move(b));
    }

    const json& grid = require(doc, "grid", "scenario");
    reject_unknown(grid, {"origin", "cell_size", "n_rows", "n_cols"}, "grid");
    s.grid.origin = vec2(require(grid, "origin", "grid"), "grid.origin");
    s.grid.cell_size = num(require(grid, "cell_size", "grid"), "grid.cell_size");
    s.grid.n_rows = integer(require(grid, "n_rows", "grid"), "grid.n_rows");
    s.grid.n_cols = integer(require(grid, "n_cols", "grid"), "grid.n_cols");

    const json& users = require(doc, "users", "scenario");
    if (!users.is_array()) throw ParseError("users: expected an array");
    std::vector<bool> has_weight;
    for (std::size_t i = 0; i < users.size(); ++i) {
      const std::string where = "users[" + std::to_string(i) + "]";
      reject_unknown(users[i], {"id", "position", "weight"}, where);
      UserSpec u;
      u.id = integer(require(users[i], "id", where), where + ".id");
      u.position = vec3(require(users[i], "position", where), where + ".position");
      const bool weighted = users[i].contains("weight");
      if (weighted) u.weight = num(users[i]["weight"], where + ".weight");
      has_weight.push_back(weighted);
      s.users.push_back(u);
    }
    for (std::size_t i = 0; i < s.users.size(); ++i)
      if (!has_weight[i]) s.users[i].weight = 1.0 / (static_cast<double>(s.users.size()) * 40.0);

    const json& radio = require(doc, "radio", "scenario");
    reject_unknown(radio,
                   {"carrier_freq_hz", "tx_power_dbm", "shadow_sigma_db", "nlos_penalty_db",
                    "nlos_penalty_cap_db", "env_seed"},
                   "radio");
    s.carrier_freq_hz = num(require(radio, "carrier_freq_hz", "radio"), "radio.carrier_freq_hz");
    s.tx_power_dbm = num(require(radio, "tx_power_dbm", "radio"), "radio.tx_power_dbm");
    s.shadow_sigma_db = num(require(radio, "shadow_sigma_db", "radio"), "radio.shadow_sigma_db");
    s.nlos_penalty_db = num(require(radio, "nlos_penalty_db", "radio"), "radio.nlos_penalty_db");
    s.nlos_penalty_cap_db = num(require(radio, "nlos_penalty_cap_db", "radio"), "radio.nlos_penalty_cap_db");
    const json& seed = require(radio, "env_seed", "radio");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
      throw ParseError("radio.env_seed: expected a non-negative integer");
    s.env_seed = seed.get<std::uint64_t>();

    const json& antenna = require(doc, "antenna", "scenario");
    reject_unknown(antenna, {"rows", "cols", "dv_wavelengths", "dh_wavelengths", "pattern"}, "antenna");
    s.antenna.rows = integer(require(antenna, "rows", "antenna"), "antenna.rows");
    s.antenna.cols = integer(require(antenna, "cols", "antenna"), "antenna.cols");
    s.antenna.dv = num(require(antenna, "dv_wavelengths", "antenna"), "antenna.dv_wavelengths");
    s.antenna.dh = num(require(antenna, "dh_wavelengths", "antenna"), "antenna.dh_wavelengths");
    const json& pattern = require(antenna, "pattern", "antenna");
    if (!pattern.is_string()) throw ParseError("antenna.pattern: expected a string");
    const std::string p = pattern.get<std::string>();
    if (p == "tr38901")
      s.antenna.pattern = ElementPattern::DirectionalElement;
    else if (p == "isotropic")
      s.antenna.pattern = ElementPattern::Isotropic;
    else
      throw ParseError("antenna.pattern: expected 'tr38901' or 'isotropic', got '" + p + "'");

    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  json buildings = json::array();
  for (const Building& b : s.scene.buildings) {
    json fp = json::array();
    for (const Vec2& v : b.footprint) fp.push_back({v.x, v.y});
    buildings.push_back({{"footprint", fp}, {"height", b.height}});
  }
  doc["scene"] = {{"bounds",
                   {{"min", {s.scene.bounds.min_x, s.scene.bounds.min_y}},
                    {"max", {s.scene.bounds.max_x, s.scene.bounds.max_y}}}},
                  {"buildings", buildings}};
  doc["grid"] = {{"origin", {s.grid.origin.x, s.grid.origin.y}},
                 {"cell_size", s.grid.cell_size},
                 {"n_rows", s.grid.n_rows},
                 {"n_cols", s.grid.n_cols}};
  json users = json::array();
  for (const UserSpec& u : s.users)
    users.push_back({{"id", u.id}, {"position", {u.position.x, u.position.y, u.position.z}}, {"weight", u.weight}});
  doc["users"] = users;
  doc["radio"] = {{"carrier_freq_hz", s.carrier_freq_hz},
                  {"tx_power_dbm", s.tx_power_dbm},
                  {"shadow_sigma_db", s.shadow_sigma_db},
                  {"nlos_penalty_db", s.nlos_penalty_db},
                  {"nlos_penalty_cap_db", s.nlos_penalty_cap_db},
                  {"env_seed", s.env_seed}};
  doc["antenna"] = {{"rows", s.antenna.rows},
                    {"cols", s.antenna.cols},
                    {"dv_wavelengths", s.antenna.dv},
                    {"dh_wavelengths", s.antenna.dh},
                    {"pattern", pattern_name(s.antenna.pattern)}};
  return doc.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write scenario file " + path.string());
  out << scenario_to_json(scenario);
}

Scenario with_grid(const Scenario& scenario, int rows, int cols) {
  if (rows < 1 || cols < 1) throw ValidationError("grid", "rows and cols must be positive");
  Scenario s = scenario;
  s.grid.n_rows = rows;
  s.grid.n_cols = cols;
  s.grid.cell_size = s.scene.bounds.height() / rows;
  s.grid.origin = {s.scene.bounds.min_x, s.scene.bounds.min_y};
  if (!near_equal(cols * s.grid.cell_size, s.scene.bounds.width()))
    throw ValidationError("grid", std::to_string(rows) + "x" + std::to_string(cols) +
                                      " does not tile the scene bounds with square cells");
  validate(s);
  return s;
}

Scene generate_synthetic_city(int n_buildings, const Rect& bounds, std::uint64_t seed) {
  if (n_buildings < 0) throw GeometryError("n_buildings must be >= 0");
  Scene scene{bounds, {}};
  if (n_buildings == 0) return scene;

  constexpr double kMinSide = 15.0;
  constexpr double kMaxSide = 60.0;
  constexpr double kGap = 4.0;
  if (bounds.width() < kMinSide || bounds.height() < kMinSide)
    throw GeometryError("bounds too small for a single building");

  const auto cm = [](double v) { return std::round(v * 100.0) / 100.0; };
  Rng rng(derive_seed(seed, "synthetic-city"));
  std::vector<Rect> placed;
  const long max_attempts = 1000L + 200L * n_buildings;
  long attempts = 0;
  while (static_cast<int>(placed.size()) < n_buildings) {
    if (++attempts > max_attempts)
      throw GeometryError("could not place " + std::to_string(n_buildings) + " disjoint buildings after " +
                          std::to_string(max_attempts) + " attempts");
    const double w = cm(rng.uniform(kMinSide, std::min(kMaxSide, bounds.width())));
    const double d = cm(rng.uniform(kMinSide, std::min(kMaxSide, bounds.height())));
    const double x0 = cm(rng.uniform(bounds.min_x, bounds.max_x - w));
    const double y0 = cm(rng.uniform(bounds.min_y, bounds.max_y - d));
    const double h = cm(rng.uniform(10.0, 60.0));
    const Rect r{x0, y0, std::min(x0 + w, bounds.max_x), std::min(y0 + d, bounds.max_y)};
    const bool clash = std::any_of(placed.begin(), placed.end(), [&](const Rect& o) {
      return r.min_x < o.max_x + kGap && o.min_x < r.max_x + kGap && r.min_y < o.max_y + kGap &&
             o.min_y < r.max_y + kGap;
    });
    if (clash) continue;
    placed.push_back(r);
    scene.buildings.push_back(
        {{{r.min_x, r.min_y}, {r.max_x, r.min_y}, {r.max_x, r.max_y}, {r.min_x, r.max_y}}, h});
  }
  return scene;
}

std::filesystem::path bundled_scenario_dir() { return std::filesystem::path(CELLDEPLOY_DATA_DIR) / "scenarios"; }

}  // namespace celldeploy
