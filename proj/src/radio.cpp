#include "celldeploy/radio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "celldeploy/errors.hpp"
#include "celldeploy/rng.hpp"

namespace celldeploy {

namespace {

constexpr double kPi = std::numbers::pi;

// |sum_{m<n} exp(j m psi)|^2
double uniform_factor_sq(int n, double psi) {
  if (n == 1) return 1.0;
  const double half = 0.5 * psi;
  const double s = std::sin(half);
  if (std::abs(s) < 1e-12) return static_cast<double>(n) * n;
  const double num = std::sin(n * half);
  return (num * num) / (s * s);
}

struct Antenna {
  std::array<double, 9> rot;  // local -> global
  AntennaArrayConfig array;

  explicit Antenna(const TxConfig& tx) : rot(rotation_matrix(tx.orientation)), array(tx.array) {}

  // d is the global direction (need not be normalized, must be non-zero).
  double gain_db(double dx, double dy, double dz) const {
    const double norm = std::sqrt(dx * dx + dy * dy + dz * dz);
    dx /= norm;
    dy /= norm;
    dz /= norm;
    // local = R^T * global
    const double lx = rot[0] * dx + rot[3] * dy + rot[6] * dz;
    const double ly = rot[1] * dx + rot[4] * dy + rot[7] * dz;
    const double lz = rot[2] * dx + rot[5] * dy + rot[8] * dz;
    const double theta = std::acos(std::clamp(lz, -1.0, 1.0));
    const double phi = std::atan2(ly, lx);
    const double element = element_gain_db(theta, phi, array.pattern);
    const double psi_v = 2.0 * kPi * array.dv * lz;
    const double psi_h = 2.0 * kPi * array.dh * ly;
    const double af = uniform_factor_sq(array.rows, psi_v) * uniform_factor_sq(array.cols, psi_h) /
                      (static_cast<double>(array.rows) * array.cols);
    return element + 10.0 * std::log10(std::max(af, 1e-20));
  }
};

// Does the closed prism of b meet the open segment (a, c)?
bool prism_blocks(const Building& b, const Rect& box, const Vec3& a, const Vec3& c) {
  if (std::min(a.z, c.z) > b.height) return false;
  if (std::max(a.z, c.z) < 0.0) return false;
  if (std::max(a.x, c.x) < box.min_x || std::min(a.x, c.x) > box.max_x || std::max(a.y, c.y) < box.min_y ||
      std::min(a.y, c.y) > box.max_y)
    return false;

  // z(t) within [0, h]
  double tz0 = 0.0;
  double tz1 = 1.0;
  const double dz = c.z - a.z;
  if (dz == 0.0) {
    if (a.z < 0.0 || a.z > b.height) return false;
  } else {
    double t0 = (0.0 - a.z) / dz;
    double t1 = (b.height - a.z) / dz;
    if (t0 > t1) std::swap(t0, t1);
    tz0 = std::max(tz0, t0);
    tz1 = std::min(tz1, t1);
  }
  if (tz0 > tz1) return false;

  const auto hits_open_unit = [](double lo, double hi) {
    if (lo > hi) return false;
    if (lo < hi) return lo < 1.0 && hi > 0.0;
    return lo > 0.0 && lo < 1.0;
  };

  const double ex = c.x - a.x;
  const double ey = c.y - a.y;
  if (ex == 0.0 && ey == 0.0) {
    if (!polygon_contains(b.footprint, {a.x, a.y})) return false;
    return hits_open_unit(tz0, tz1);
  }

  // Parameters where the 2-D projection crosses the footprint boundary.
  std::vector<double> ts{0.0, 1.0};
  const std::size_t n = b.footprint.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = b.footprint[i];
    const Vec2 q = b.footprint[(i + 1) % n];
    const double fx = q.x - p.x;
    const double fy = q.y - p.y;
    const double denom = ex * fy - ey * fx;
    const double wx = p.x - a.x;
    const double wy = p.y - a.y;
    if (denom == 0.0) {
      if (wx * ey - wy * ex != 0.0) continue;  // parallel, not collinear
      const double inv = 1.0 / (ex * ex + ey * ey);
      ts.push_back(std::clamp((wx * ex + wy * ey) * inv, 0.0, 1.0));
      ts.push_back(std::clamp(((q.x - a.x) * ex + (q.y - a.y) * ey) * inv, 0.0, 1.0));
      continue;
    }
    const double t = (wx * fy - wy * fx) / denom;
    const double s = (wx * ey - wy * ex) / denom;
    if (s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0) ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  const auto inside_at = [&](double t) { return polygon_contains(b.footprint, {a.x + t * ex, a.y + t * ey}); };
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (inside_at(ts[i]) && hits_open_unit(std::max(ts[i], tz0), std::min(ts[i], tz1))) return true;
    if (i + 1 < ts.size()) {
      const double mid = 0.5 * (ts[i] + ts[i + 1]);
      if (inside_at(mid) && hits_open_unit(std::max(ts[i], tz0), std::min(ts[i + 1], tz1))) return true;
    }
  }
  return false;
}

bool hits_open_unit(double lo, double hi) {
  if (lo > hi) return false;
  if (lo < hi) return lo < 1.0 && hi > 0.0;
  return lo > 0.0 && lo < 1.0;
}

// Slab clip of the segment against one closed interval; false when empty.
bool clip_axis(double a, double d, double lo, double hi, double& t0, double& t1) {
  if (d == 0.0) return a >= lo && a <= hi;
  double u0 = (lo - a) / d;
  double u1 = (hi - a) / d;
  if (u0 > u1) std::swap(u0, u1);
  t0 = std::max(t0, u0);
  t1 = std::min(t1, u1);
  return t0 <= t1;
}

// Closed axis-aligned box prism against the open segment (a, c).
bool box_prism_blocks(const Rect& box, double height, const Vec3& a, const Vec3& c) {
  double t0 = 0.0, t1 = 1.0;
  if (!clip_axis(a.z, c.z - a.z, 0.0, height, t0, t1)) return false;
  if (!clip_axis(a.x, c.x - a.x, box.min_x, box.max_x, t0, t1)) return false;
  if (!clip_axis(a.y, c.y - a.y, box.min_y, box.max_y, t0, t1)) return false;
  return hits_open_unit(t0, t1);
}

bool is_axis_aligned_rect(const Building& b) {
  if (b.footprint.size() != 4) return false;
  const Rect box = b.bbox();
  for (const Vec2& v : b.footprint)
    if ((v.x != box.min_x && v.x != box.max_x) || (v.y != box.min_y && v.y != box.max_y)) return false;
  // Four distinct corners of the box.
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      if (b.footprint[i] == b.footprint[j]) return false;
  return box.width() > 0.0 && box.height() > 0.0;
}

// Uniform bucket grid over building bounding boxes. Queries return a
// superset of the buildings whose box meets the segment's ground track.
class BuildingIndex {
 public:
  explicit BuildingIndex(const Scene& scene) : scene_(scene), stamp_(scene.buildings.size(), 0) {
    const auto& bs = scene.buildings;
    boxes_.reserve(bs.size());
    rect_.reserve(bs.size());
    for (const Building& b : bs) {
      boxes_.push_back(b.bbox());
      rect_.push_back(is_axis_aligned_rect(b));
      max_height_ = std::max(max_height_, b.height);
    }
    if (bs.empty()) return;
    Rect ext = boxes_[0];
    for (const Rect& r : boxes_) {
      ext.min_x = std::min(ext.min_x, r.min_x);
      ext.min_y = std::min(ext.min_y, r.min_y);
      ext.max_x = std::max(ext.max_x, r.max_x);
      ext.max_y = std::max(ext.max_y, r.max_y);
    }
    origin_ = {ext.min_x, ext.min_y};
    nx_ = std::clamp(static_cast<int>(std::ceil(ext.width() / kBucket)), 1, 4096);
    ny_ = std::clamp(static_cast<int>(std::ceil(ext.height() / kBucket)), 1, 4096);
    sx_ = std::max(ext.width(), 1e-9) / nx_;
    sy_ = std::max(ext.height(), 1e-9) / ny_;
    cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    roof_.assign(cells_.size(), 0.0);
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
      const int x0 = ix(boxes_[i].min_x), x1 = ix(boxes_[i].max_x);
      const int y0 = iy(boxes_[i].min_y), y1 = iy(boxes_[i].max_y);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const std::size_t cell = static_cast<std::size_t>(y) * nx_ + x;
          cells_[cell].push_back(static_cast<int>(i));
          roof_[cell] = std::max(roof_[cell], bs[i].height);
        }
    }
  }

  int count(const Vec3& a, const Vec3& c) {
    if (boxes_.empty()) return 0;
    // Only the part of the segment at or below the tallest roof can hit.
    double t0 = 0.0, t1 = 1.0;
    if (!clip_axis(a.z, c.z - a.z, 0.0, max_height_, t0, t1)) return 0;
    ++query_;
    int hits = 0;
    const double ex = c.x - a.x, ey = c.y - a.y;
    const double xa = a.x + t0 * ex, xb = a.x + t1 * ex;
    const double xpad = 1e-6 * sx_;
    const int cx0 = ix(std::min(xa, xb) - xpad), cx1 = ix(std::max(xa, xb) + xpad);
    for (int cx = cx0; cx <= cx1; ++cx) {
      // t-range of the segment inside this bucket column.
      double u0 = t0, u1 = t1;
      if (ex != 0.0) {
        const double lo = origin_.x + cx * sx_ - 1e-6 * sx_, hi = lo + sx_ * (1 + 2e-6);
        double v0 = (lo - a.x) / ex, v1 = (hi - a.x) / ex;
        if (v0 > v1) std::swap(v0, v1);
        u0 = std::max(u0, v0);
        u1 = std::min(u1, v1);
        if (u0 > u1) {
          u0 = u1 = std::clamp(0.5 * (v0 + v1), t0, t1);
        }
      }
      const double ya = a.y + u0 * ey, yb = a.y + u1 * ey;
      const double pad = 1e-6 * sy_;  // rounding slack at bucket edges
      const int cy0 = iy(std::min(ya, yb) - pad), cy1 = iy(std::max(ya, yb) + pad);
      // Lowest point of the segment over this column; buckets whose tallest roof
      // stays below it cannot block.
      const double z_low = std::min(a.z + u0 * (c.z - a.z), a.z + u1 * (c.z - a.z));
      for (int cy = cy0; cy <= cy1; ++cy) {
        const std::size_t cell = static_cast<std::size_t>(cy) * nx_ + cx;
        if (roof_[cell] < z_low) continue;
        for (int i : cells_[cell]) {
          if (stamp_[static_cast<std::size_t>(i)] == query_) continue;
          stamp_[static_cast<std::size_t>(i)] = query_;
          const Building& b = scene_.buildings[static_cast<std::size_t>(i)];
          const bool blocks = rect_[static_cast<std::size_t>(i)] ? box_prism_blocks(boxes_[static_cast<std::size_t>(i)], b.height, a, c)
                                                                 : prism_blocks(b, boxes_[static_cast<std::size_t>(i)], a, c);
          if (blocks) ++hits;
        }
      }
    }
    return hits;
  }

 private:
  static constexpr double kBucket = 50.0;

  int ix(double x) const { return std::clamp(static_cast<int>(std::floor((x - origin_.x) / sx_)), 0, nx_ - 1); }
  int iy(double y) const { return std::clamp(static_cast<int>(std::floor((y - origin_.y) / sy_)), 0, ny_ - 1); }

  const Scene& scene_;
  std::vector<Rect> boxes_;
  std::vector<bool> rect_;
  double max_height_ = 0.0;
  Vec2 origin_;
  int nx_ = 0, ny_ = 0;
  double sx_ = 1.0, sy_ = 1.0;
  std::vector<std::vector<int>> cells_;
  std::vector<double> roof_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t query_ = 0;
};

}  // namespace

double fspl_db(double distance_m, double freq_hz) {
  if (!std::isfinite(freq_hz) || freq_hz <= 0.0) throw DomainError("fspl_db: frequency must be > 0");
  if (!std::isfinite(distance_m) || distance_m < 0.0) throw DomainError("fspl_db: distance must be >= 0");
  const double d = std::max(distance_m, kMinDistance);
  return 20.0 * std::log10(d) + 20.0 * std::log10(freq_hz) + 20.0 * std::log10(4.0 * kPi / kSpeedOfLight);
}

double received_power_dbm(double tx_power_dbm, double path_loss_db, double shadow, double gain_db) {
  return tx_power_dbm - path_loss_db - shadow + gain_db;
}

double shadow_db(int cell_row, int cell_col, double sigma_db, std::uint64_t env_seed) {
  if (sigma_db == 0.0) return 0.0;
  const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cell_row)) << 32) |
                            static_cast<std::uint32_t>(cell_col);
  const std::uint64_t h1 = mix64(mix64(env_seed) ^ key);
  const std::uint64_t h2 = mix64(h1 ^ 0x5851f42d4c957f2dULL);
  const double u1 = hash_to_open_unit(h1);
  const double u2 = hash_to_open_unit(h2);
  return sigma_db * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double element_gain_db(double theta_local, double phi_local, ElementPattern pattern) {
  if (pattern == ElementPattern::Isotropic) return 0.0;
  const double theta_deg = theta_local * 180.0 / kPi;
  const double phi_deg = phi_local * 180.0 / kPi;
  const double vertical = -std::min(12.0 * std::pow((theta_deg - 90.0) / 65.0, 2), 30.0);
  const double horizontal = -std::min(12.0 * std::pow(phi_deg / 65.0, 2), 30.0);
  return kElementMaxGainDbi - std::min(-(vertical + horizontal), 30.0);
}

std::array<double, 9> rotation_matrix(const Orientation& o) {
  const double ca = std::cos(o.yaw), sa = std::sin(o.yaw);
  const double cb = std::cos(o.pitch), sb = std::sin(o.pitch);
  const double cg = std::cos(o.roll), sg = std::sin(o.roll);
  // Rz(yaw) * Ry(pitch) * Rx(roll), row-major
  return {ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg,
          sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg,
          -sb,     cb * sg,                cb * cg};
}

double array_gain_db(const TxConfig& tx, const Vec3& target, double wavelength_m) {
  (void)wavelength_m;  // spacings are expressed in wavelengths
  const double dx = target.x - tx.position.x;
  const double dy = target.y - tx.position.y;
  const double dz = target.z - tx.position.z;
  if (dx == 0.0 && dy == 0.0 && dz == 0.0) throw DegenerateGeometry("array_gain_db: target equals tx position");
  return Antenna(tx).gain_db(dx, dy, dz);
}

int los_obstructions(const Scene& scene, const Vec3& a, const Vec3& b) {
  int count = 0;
  for (const Building& building : scene.buildings)
    if (prism_blocks(building, building.bbox(), a, b)) ++count;
  return count;
}

CoverageMap compute_coverage_map(const Scenario& scenario, const TxConfig& tx) {
  const GridSpec& grid = scenario.grid;
  CoverageMap map{grid, std::vector<double>(grid.cell_count())};
  const Antenna antenna(tx);

  BuildingIndex index(scenario.scene);

  for (int row = 0; row < grid.n_rows; ++row) {
    for (int col = 0; col < grid.n_cols; ++col) {
      const Vec2 c = grid.cell_center(row, col);
      const Vec3 rx{c.x, c.y, kReceiverHeight};
      const double dx = rx.x - tx.position.x;
      const double dy = rx.y - tx.position.y;
      const double dz = rx.z - tx.position.z;
      if (dx == 0.0 && dy == 0.0 && dz == 0.0)
        throw DegenerateGeometry("compute_coverage_map: cell center equals tx position");
      const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);

      const int blocked = index.count(tx.position, rx);

      const double power =
          received_power_dbm(tx.power_dbm, fspl_db(dist, scenario.carrier_freq_hz),
                             shadow_db(row, col, scenario.shadow_sigma_db, scenario.env_seed),
                             antenna.gain_db(dx, dy, dz)) -
          std::min(blocked * scenario.nlos_penalty_db, scenario.nlos_penalty_cap_db);
      map.values[static_cast<std::size_t>(row) * grid.n_cols + col] = std::max(power, kPowerFloorDbm);
    }
  }
  return map;
}

double user_power(const CoverageMap& map, const UserSpec& user) {
  const GridSpec& g = map.grid;
  const double fx = (user.position.x - g.origin.x) / g.cell_size;
  const double fy = (user.position.y - g.origin.y) / g.cell_size;
  if (!(fx >= 0.0 && fx <= g.n_cols && fy >= 0.0 && fy <= g.n_rows))
    throw OutOfGrid("user " + std::to_string(user.id) + " lies outside the coverage grid");
  // ceil(f) - 1 sends exact boundaries to the lower cell
  const int col = std::max(0, static_cast<int>(std::ceil(fx)) - 1);
  const int row = std::max(0, static_cast<int>(std::ceil(fy)) - 1);
  return map.at(row, col);
}

void write_coverage_csv(const CoverageMap& map, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw Error("cannot write " + path.string());
  for (int r = 0; r < map.grid.n_rows; ++r) {
    for (int c = 0; c < map.grid.n_cols; ++c) std::fprintf(f, c == 0 ? "%.6f" : ",%.6f", map.at(r, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

std::uint16_t pgm_level(double dbm) {
  const double level = std::round((dbm - kPowerFloorDbm) / -kPowerFloorDbm * 65535.0);
  return static_cast<std::uint16_t>(std::clamp(level, 0.0, 65535.0));
}

void write_coverage_pgm(const CoverageMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << map.grid.n_cols << " " << map.grid.n_rows << "\n65535\n";
  for (int r = map.grid.n_rows - 1; r >= 0; --r) {
    for (int c = 0; c < map.grid.n_cols; ++c) {
      const std::uint16_t v = pgm_level(map.at(r, c));
      const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
      out.write(bytes, 2);
    }
  }
}

}  // namespace celldeploy
