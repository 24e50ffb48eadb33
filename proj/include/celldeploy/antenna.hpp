#pragma once

namespace celldeploy {

enum class ElementPattern { DirectionalElement, Isotropic };

/// Planar transmit array. Spacings are in wavelengths. Rows stack along the
/// local vertical axis, columns along the local horizontal axis.
struct AntennaArrayConfig {
  int rows = 8;
  int cols = 2;
  double dv = 0.7;
  double dh = 0.5;
  ElementPattern pattern = ElementPattern::DirectionalElement;

  bool operator==(const AntennaArrayConfig&) const = default;
};

}  // namespace celldeploy
