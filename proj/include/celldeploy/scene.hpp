#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "celldeploy/antenna.hpp"

namespace celldeploy {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool contains(Vec2 p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  bool operator==(const Rect&) const = default;
};

/// Extruded simple polygon standing on the ground plane.
struct Building {
  std::vector<Vec2> footprint;
  double height = 0.0;

  Rect bbox() const;
  bool operator==(const Building&) const = default;
};

struct Scene {
  Rect bounds;
  std::vector<Building> buildings;
  bool operator==(const Scene&) const = default;
};

/// Square-cell raster over the scene. Row r spans
/// [origin.y + r*cell_size, origin.y + (r+1)*cell_size), column c likewise in x.
struct GridSpec {
  Vec2 origin;
  double cell_size = 10.0;
  int n_rows = 120;
  int n_cols = 148;

  std::size_t cell_count() const {
    return static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols);
  }
  Vec2 cell_center(int row, int col) const {
    return {origin.x + (col + 0.5) * cell_size, origin.y + (row + 0.5) * cell_size};
  }
  bool operator==(const GridSpec&) const = default;
};

struct UserSpec {
  int id = 0;
  Vec3 position;
  double weight = 0.0;
  bool operator==(const UserSpec&) const = default;
};

struct Scenario {
  Scene scene;
  GridSpec grid;
  std::vector<UserSpec> users;
  double carrier_freq_hz = 3.9e9;
  double tx_power_dbm = 30.0;
  AntennaArrayConfig antenna;
  double shadow_sigma_db = 4.0;
  double nlos_penalty_db = 20.0;
  double nlos_penalty_cap_db = 60.0;
  std::uint64_t env_seed = 0;

  bool operator==(const Scenario&) const = default;
};

/// Throws ValidationError naming the first violated field.
void validate(const Scenario& scenario);

/// Parses the JSON scenario document. Missing per-user weights default to the
/// uniform 1/(N*40) scaling.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// Re-rasterizes the scenario at rows x cols. The cell must stay square and
/// cover the scene bounds exactly, otherwise ValidationError("grid").
Scenario with_grid(const Scenario& scenario, int rows, int cols);

/// Rejection-sampled axis-aligned rectangular buildings, pairwise disjoint,
/// heights in [10, 60] m. Pure function of its arguments.
Scene generate_synthetic_city(int n_buildings, const Rect& bounds, std::uint64_t seed);

/// Index of the first building whose footprint contains p (boundary counts).
std::optional<std::size_t> point_in_building(const Scene& scene, Vec2 p);

/// Closed-polygon containment test; boundary points are inside.
bool polygon_contains(const std::vector<Vec2>& polygon, Vec2 p);

/// Directory holding the bundled scenario files.
std::filesystem::path bundled_scenario_dir();

}  // namespace celldeploy
