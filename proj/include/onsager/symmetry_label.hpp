#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>

namespace onsager {

enum class SymmetryGroup {
  Isotropic,
  Axisymmetric,
  D2,
  D2nH,  // prismatic dihedral, order 8n; n stored alongside
  Cubic,
  Icosahedral,
  Unclassified,
};

struct SymmetryLabel {
  bool axisymmetric = false;
  std::optional<Eigen::Vector3d> axis;
  SymmetryGroup group = SymmetryGroup::Unclassified;
  int n = 0;          // only for D2nH
  double residual = 0;  // max relative invariance defect of the accepted group

  std::string name() const;
};

}  // namespace onsager
