#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "celldeploy/antenna.hpp"
#include "celldeploy/scene.hpp"

namespace celldeploy {

inline constexpr double kSpeedOfLight = 3.0e8;
inline constexpr double kMinDistance = 1.0;      // m, FSPL clamp
inline constexpr double kPowerFloorDbm = -200.0;
inline constexpr double kReceiverHeight = 1.5;   // m
inline constexpr double kElementMaxGainDbi = 8.0;

/// Intrinsic z-y'-x'' rotation: yaw about z, then pitch about the new y
/// (positive pitch tilts boresight below the horizon), then roll about the
/// new x. Boresight is the local +x axis.
struct Orientation {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  bool operator==(const Orientation&) const = default;
};

struct TxConfig {
  Vec3 position;
  Orientation orientation;
  double power_dbm = 30.0;
  AntennaArrayConfig array;
};

struct CoverageMap {
  GridSpec grid;
  std::vector<double> values;  // dBm, row-major, row 0 at grid.origin.y

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * grid.n_cols + col]; }
  bool operator==(const CoverageMap&) const = default;
};

/// Free-space path loss in dB. Distances below 1 m are clamped to 1 m;
/// negative or non-finite distance and non-positive frequency raise DomainError.
double fspl_db(double distance_m, double freq_hz);

double received_power_dbm(double tx_power_dbm, double path_loss_db, double shadow_db, double gain_db);

/// Frozen zero-mean Gaussian shadowing sample for one grid cell.
double shadow_db(int cell_row, int cell_col, double sigma_db, std::uint64_t env_seed);

/// TR 38.901 directional element (8 dBi peak, 65 degree beamwidths, 30 dB
/// front-to-back) or an isotropic radiator. Angles in radians in the element
/// frame: theta from local zenith, phi azimuth from boresight.
double element_gain_db(double theta_local, double phi_local,
                       ElementPattern pattern = ElementPattern::DirectionalElement);

/// 3x3 rotation taking the antenna frame into the global frame.
std::array<double, 9> rotation_matrix(const Orientation& o);

/// Element gain plus normalized array factor toward target. Throws
/// DegenerateGeometry when target coincides with the transmitter.
double array_gain_db(const TxConfig& tx, const Vec3& target, double wavelength_m);

/// Number of buildings whose closed prism meets the open segment (a, b).
int los_obstructions(const Scene& scene, const Vec3& a, const Vec3& b);

CoverageMap compute_coverage_map(const Scenario& scenario, const TxConfig& tx);

/// Value of the cell holding the user's (x, y); boundary points resolve to the
/// lower index. Throws OutOfGrid outside the grid extent.
double user_power(const CoverageMap& map, const UserSpec& user);

/// One CSV line per grid row (row 0 first), "%.6f" values.
void write_coverage_csv(const CoverageMap& map, const std::filesystem::path& path);

/// Binary 16-bit PGM (P5, big-endian samples), north up. Pixel value is
/// round((dBm + 200) / 200 * 65535) clamped to [0, 65535].
void write_coverage_pgm(const CoverageMap& map, const std::filesystem::path& path);
std::uint16_t pgm_level(double dbm);

}  // namespace celldeploy
