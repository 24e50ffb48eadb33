#include <doctest.h>

#include <filesystem>

#include "celldeploy/errors.hpp"
#include "celldeploy/rng.hpp"
#include "celldeploy/scene.hpp"

using namespace celldeploy;

namespace {

// Even-odd crossing count along +x; boundary points count as inside.
bool even_odd_oracle(const std::vector<Vec2>& poly, Vec2 p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross == 0.0 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
        p.y <= std::max(a.y, b.y))
      return true;
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

std::string expect_field(const Scenario& s) {
  try {
    validate(s);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "";
}

Scenario bundled(const char* name) { return load_scenario(bundled_scenario_dir() / name); }

}  // namespace

TEST_CASE("bundled scenarios load and validate") {
  for (const char* name : {"case1.json", "case2.json", "case3.json"}) {
    const Scenario s = bundled(name);
    CHECK_NOTHROW(validate(s));
    CHECK(s.grid.n_rows == 120);
    CHECK(s.grid.n_cols == 148);
    CHECK(s.users.size() == 16);
    for (const auto& u : s.users) CHECK_FALSE(point_in_building(s.scene, {u.position.x, u.position.y}));
  }
  const Scenario big = bundled("full_scale.json");
  CHECK(big.grid.n_rows == 1206);
  CHECK(big.grid.n_cols == 1476);
}

TEST_CASE("scenario JSON round trip") {
  const Scenario s = bundled("case1.json");
  const auto path = std::filesystem::temp_directory_path() / "celldeploy_scene_roundtrip.json";
  save_scenario(s, path);
  const Scenario back = load_scenario(path);
  CHECK(back == s);
  CHECK(scenario_to_json(back) == scenario_to_json(s));
  std::filesystem::remove(path);

  Scenario city;
  city.scene = generate_synthetic_city(25, {-300, -300, 300, 300}, 9);
  city.grid = {{-300, -300}, 10.0, 60, 60};
  city.users = {{1, {1.25, -7.5, 1.5}, 0.01}, {2, {100.0, 33.3, 1.5}, 0.015}};
  city.antenna.pattern = ElementPattern::Isotropic;
  CHECK(parse_scenario(scenario_to_json(city)) == city);
}

TEST_CASE("missing weights default to uniform 1/(N*40)") {
  const Scenario s = bundled("case1.json");
  for (const auto& u : s.users) CHECK(u.weight == doctest::Approx(1.0 / (16 * 40.0)).epsilon(1e-15));
}

TEST_CASE("validation names the offending field") {
  const Scenario base = bundled("case1.json");
  Scenario s = base;
  s.grid.cell_size = 0;
  CHECK(expect_field(s) == "grid.cell_size");
  s = base;
  s.users.clear();
  CHECK(expect_field(s) == "users");
  s = base;
  s.scene.buildings[0].height = -1;
  CHECK(expect_field(s) == "scene.buildings[0].height");
  s = base;
  s.scene.buildings[2].footprint = {{0, 0}, {10, 10}, {10, 0}, {0, 10}};
  CHECK(expect_field(s) == "scene.buildings[2].footprint");
  s = base;
  s.carrier_freq_hz = 0;
  CHECK(expect_field(s) == "radio.carrier_freq_hz");
  s = base;
  s.antenna.rows = 0;
  CHECK(expect_field(s) == "antenna.rows");
  s = base;
  s.users[3].position.x = 1e6;
  CHECK(expect_field(s) == "users[3].position");

  CHECK_THROWS_AS(parse_scenario("{not json"), ParseError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), Error);
}

TEST_CASE("grid override keeps square cells") {
  const Scenario s = bundled("case1.json");
  const Scenario half = with_grid(s, 60, 74);
  CHECK(half.grid.cell_size == doctest::Approx(20.0));
  CHECK_NOTHROW(validate(half));
  try {
    with_grid(s, 16, 16);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "grid");
  }
}

TEST_CASE("synthetic city is pure and its buildings are disjoint") {
  const Rect bounds{-500, -400, 500, 400};
  const Scene a = generate_synthetic_city(60, bounds, 42);
  const Scene b = generate_synthetic_city(60, bounds, 42);
  CHECK(a == b);
  CHECK_FALSE(a == generate_synthetic_city(60, bounds, 43));
  CHECK(a.buildings.size() == 60);
  for (std::size_t i = 0; i < a.buildings.size(); ++i) {
    const Rect r = a.buildings[i].bbox();
    CHECK(a.buildings[i].height >= 10.0);
    CHECK(a.buildings[i].height <= 60.0);
    CHECK(r.min_x >= bounds.min_x);
    CHECK(r.max_y <= bounds.max_y);
    for (std::size_t j = i + 1; j < a.buildings.size(); ++j) {
      const Rect q = a.buildings[j].bbox();
      const bool overlap = r.min_x < q.max_x && q.min_x < r.max_x && r.min_y < q.max_y && q.min_y < r.max_y;
      CHECK_FALSE(overlap);
    }
  }
}

TEST_CASE("point_in_building agrees with an even-odd oracle") {
  Rng rng(5);
  for (const char* name : {"case1.json", "case3.json"}) {
    const Scene scene = bundled(name).scene;
    int inside = 0;
    for (int i = 0; i < 1000; ++i) {
      const Vec2 p{rng.uniform(scene.bounds.min_x, scene.bounds.max_x),
                   rng.uniform(scene.bounds.min_y, scene.bounds.max_y)};
      std::optional<std::size_t> expected;
      for (std::size_t k = 0; k < scene.buildings.size() && !expected; ++k)
        if (even_odd_oracle(scene.buildings[k].footprint, p)) expected = k;
      CHECK(point_in_building(scene, p) == expected);
      inside += expected.has_value();
    }
    CHECK(inside > 100);
  }
  // Concave footprint and its boundary.
  const std::vector<Vec2> l_shape{{0, 0}, {10, 0}, {10, 4}, {4, 4}, {4, 10}, {0, 10}};
  for (int i = 0; i < 2000; ++i) {
    const Vec2 p{rng.uniform(-1, 11), rng.uniform(-1, 11)};
    CHECK(polygon_contains(l_shape, p) == even_odd_oracle(l_shape, p));
  }
  CHECK(polygon_contains(l_shape, {10, 2}));
  CHECK(polygon_contains(l_shape, {4, 7}));
  CHECK_FALSE(polygon_contains(l_shape, {7, 7}));
}
