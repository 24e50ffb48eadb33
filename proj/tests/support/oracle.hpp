#pragma once

// Straight-line reimplementation of the coverage model used to cross-check
// the production path. Buildings must be convex; occlusion is found by
// clipping the segment against each edge half-plane.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "celldeploy/radio.hpp"
#include "celldeploy/rng.hpp"
#include "celldeploy/scene.hpp"

namespace celldeploy::testing {

inline double oracle_fspl(double d, double f) {
  d = std::max(d, 1.0);
  return 20.0 * std::log10(d) + 20.0 * std::log10(f) + 20.0 * std::log10(4.0 * std::numbers::pi / 3.0e8);
}

inline double oracle_shadow(int row, int col, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return 0.0;
  const std::uint64_t key = (std::uint64_t(std::uint32_t(row)) << 32) | std::uint32_t(col);
  const std::uint64_t h1 = mix64(mix64(seed) ^ key);
  const std::uint64_t h2 = mix64(h1 ^ 0x5851f42d4c957f2dULL);
  const double r = std::sqrt(-2.0 * std::log(hash_to_open_unit(h1)));
  return sigma * r * std::cos(2.0 * std::numbers::pi * hash_to_open_unit(h2));
}

using M3 = std::array<std::array<double, 3>, 3>;

inline M3 matmul(const M3& a, const M3& b) {
  M3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Rz(yaw) Ry(pitch) Rx(roll) built from the elementary rotations.
inline M3 oracle_rotation(const Orientation& o) {
  const M3 rz{{{std::cos(o.yaw), -std::sin(o.yaw), 0}, {std::sin(o.yaw), std::cos(o.yaw), 0}, {0, 0, 1}}};
  const M3 ry{{{std::cos(o.pitch), 0, std::sin(o.pitch)}, {0, 1, 0}, {-std::sin(o.pitch), 0, std::cos(o.pitch)}}};
  const M3 rx{{{1, 0, 0}, {0, std::cos(o.roll), -std::sin(o.roll)}, {0, std::sin(o.roll), std::cos(o.roll)}}};
  return matmul(matmul(rz, ry), rx);
}

inline double oracle_element(double theta, double phi, ElementPattern pattern) {
  if (pattern == ElementPattern::Isotropic) return 0.0;
  const double t = theta * 180.0 / std::numbers::pi, p = phi * 180.0 / std::numbers::pi;
  const double av = -std::min(12.0 * ((t - 90.0) / 65.0) * ((t - 90.0) / 65.0), 30.0);
  const double ah = -std::min(12.0 * (p / 65.0) * (p / 65.0), 30.0);
  return 8.0 - std::min(-(av + ah), 30.0);
}

// |sum_m e^{j m psi}|^2 with the geometric-series closed form.
inline double oracle_factor(int n, double psi) {
  if (n == 1) return 1.0;
  const double den = std::sin(psi / 2.0);
  if (std::abs(den) < 1e-12) return double(n) * n;
  const double num = std::sin(n * psi / 2.0);
  return num * num / (den * den);
}

inline double oracle_gain(const TxConfig& tx, const Vec3& rx) {
  const M3 r = oracle_rotation(tx.orientation);
  double g[3] = {rx.x - tx.position.x, rx.y - tx.position.y, rx.z - tx.position.z};
  const double n = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
  double l[3];
  for (int i = 0; i < 3; ++i) l[i] = (r[0][i] * g[0] + r[1][i] * g[1] + r[2][i] * g[2]) / n;
  const double theta = std::acos(std::clamp(l[2], -1.0, 1.0));
  const double phi = std::atan2(l[1], l[0]);
  const double af = oracle_factor(tx.array.rows, 2.0 * std::numbers::pi * tx.array.dv * l[2]) *
                    oracle_factor(tx.array.cols, 2.0 * std::numbers::pi * tx.array.dh * l[1]) /
                    (tx.array.rows * tx.array.cols);
  return oracle_element(theta, phi, tx.array.pattern) + 10.0 * std::log10(std::max(af, 1e-20));
}

/// Closed convex prism against the open segment (a, b), Cyrus-Beck clipping.
inline bool oracle_blocks(const Building& bld, const Vec3& a, const Vec3& b) {
  double t0 = 0.0, t1 = 1.0;
  const auto clip = [&](double num, double den) {
    // keep t with num + den * t >= 0
    if (den == 0.0) return num >= 0.0;
    const double t = -num / den;
    if (den > 0.0) t0 = std::max(t0, t);
    else t1 = std::min(t1, t);
    return t0 <= t1;
  };
  if (!clip(a.z, b.z - a.z) || !clip(bld.height - a.z, a.z - b.z)) return false;
  const auto& f = bld.footprint;
  double area = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec2 p = f[i], q = f[(i + 1) % f.size()];
    area += p.x * q.y - q.x * p.y;
  }
  const double orient = area > 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec2 p = f[i], q = f[(i + 1) % f.size()];
    // inward normal of edge p->q
    const double nx = -(q.y - p.y) * orient, ny = (q.x - p.x) * orient;
    if (!clip(nx * (a.x - p.x) + ny * (a.y - p.y), nx * (b.x - a.x) + ny * (b.y - a.y))) return false;
  }
  if (t0 < t1) return t0 < 1.0 && t1 > 0.0;
  return t0 > 0.0 && t0 < 1.0;
}

inline std::vector<double> oracle_coverage(const Scenario& s, const TxConfig& tx) {
  std::vector<double> out;
  for (int row = 0; row < s.grid.n_rows; ++row)
    for (int col = 0; col < s.grid.n_cols; ++col) {
      const Vec2 c = s.grid.cell_center(row, col);
      const Vec3 rx{c.x, c.y, 1.5};
      const double d = std::hypot(rx.x - tx.position.x, rx.y - tx.position.y, rx.z - tx.position.z);
      int blocked = 0;
      for (const Building& b : s.scene.buildings) blocked += oracle_blocks(b, tx.position, rx);
      const double p = tx.power_dbm - oracle_fspl(d, s.carrier_freq_hz) -
                       oracle_shadow(row, col, s.shadow_sigma_db, s.env_seed) + oracle_gain(tx, rx) -
                       std::min(blocked * s.nlos_penalty_db, s.nlos_penalty_cap_db);
      out.push_back(std::max(p, -200.0));
    }
  return out;
}

/// Random convex-building scene on an n x n grid: axis-aligned boxes,
/// rotated rectangles and triangles.
inline Scenario random_scene(Rng& rng, int n) {
  Scenario s;
  const double cell = 10.0;
  const double half = n * cell / 2.0;
  s.scene.bounds = {-half, -half, half, half};
  s.grid = {{-half, -half}, cell, n, n};
  s.env_seed = rng.next_u64();
  s.shadow_sigma_db = rng.uniform(0.0, 8.0);
  const int count = 3 + static_cast<int>(rng.uniform_index(8));
  for (int i = 0; i < count; ++i) {
    Building b;
    b.height = rng.uniform(5.0, 60.0);
    const double cx = rng.uniform(-0.8 * half, 0.8 * half), cy = rng.uniform(-0.8 * half, 0.8 * half);
    const double w = rng.uniform(3.0, 0.3 * half), h = rng.uniform(3.0, 0.3 * half);
    switch (i % 3) {
      case 0:
        b.footprint = {{cx - w, cy - h}, {cx + w, cy - h}, {cx + w, cy + h}, {cx - w, cy + h}};
        break;
      case 1: {
        const double ang = rng.uniform(0.0, std::numbers::pi);
        const double ca = std::cos(ang), sa = std::sin(ang);
        for (auto [u, v] : {std::pair{-w, -h}, {w, -h}, {w, h}, {-w, h}})
          b.footprint.push_back({cx + ca * u - sa * v, cy + sa * u + ca * v});
        break;
      }
      default:
        b.footprint = {{cx - w, cy - h}, {cx + w, cy - h * 0.5}, {cx + 0.2 * w, cy + h}};
    }
    s.scene.buildings.push_back(std::move(b));
  }
  s.users.push_back({1, {0.0, 0.0, 1.5}, 1.0 / 40.0});
  return s;
}

inline TxConfig random_tx(Rng& rng, const Scenario& s) {
  TxConfig tx;
  const Rect& b = s.scene.bounds;
  tx.position = {rng.uniform(b.min_x, b.max_x), rng.uniform(b.min_y, b.max_y), rng.uniform(20.0, 120.0)};
  tx.orientation = {rng.uniform(-3.14, 3.14), rng.uniform(-1.57, 1.57), rng.uniform(-3.14, 3.14)};
  tx.power_dbm = s.tx_power_dbm;
  tx.array = s.antenna;
  if (rng.uniform() < 0.25) tx.array.pattern = ElementPattern::Isotropic;
  return tx;
}

}  // namespace celldeploy::testing
