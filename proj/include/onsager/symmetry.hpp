#pragma once

#include <Eigen/Core>

#include <vector>

#include "onsager/model.hpp"
#include "onsager/symmetry_label.hpp"

namespace onsager {

struct AxisymmetryResult {
  bool axisymmetric = false;
  std::optional<Vec3> axis;
  double residual = 0;
};

struct SymmetryConfig {
  int bins = 40;
  double axis_tol = 5e-3;
  double iso_tol = 5e-3;
  double group_tol = 1e-2;
  double peak_sigma = 2.0;  // peaks must exceed mean + peak_sigma * stdev
};

/// Moments of the density: m1 = h sum rho_i x_i, M2 = h sum rho_i x_i x_i^T.
Vec3 first_moment(const DensityField& rho);
Eigen::Matrix3d second_moment(const DensityField& rho);

/// Tests rho(p) = f(p . e) for some axis e. Candidate axes are the
/// second-moment eigenvectors and the first-moment direction; nodes are binned
/// by t = x . e and the pooled within-bin relative standard deviation of rho
/// (after removing the linear trend in t inside each bin) is the residual.
AxisymmetryResult axisymmetry_test(const DensityField& rho, double tol = 5e-3, int bins = 40);

/// Log-density at an arbitrary direction by barycentric interpolation on the
/// mesh triangles.
double interpolate_log_density(const DensityField& rho, const Vec3& q, bool* fallback = nullptr);

/// Max over the given orthogonal matrices R of ||rho(R .) - rho|| / ||rho||
/// (Euclidean over nodes; rho(R x_i) by interpolation).
double group_invariance_residual(const DensityField& rho,
                                 const std::vector<Eigen::Matrix3d>& rotations);

/// Finite symmetry groups as explicit matrix lists (closure of the
/// generators).
std::vector<Eigen::Matrix3d> d2_group();
std::vector<Eigen::Matrix3d> d2nh_group(int n);     // order 8n
std::vector<Eigen::Matrix3d> cubic_group();         // order 48
std::vector<Eigen::Matrix3d> icosahedral_group();   // order 120

/// Conjugates every element: R -> F R F^T (frame columns = fitted axes).
std::vector<Eigen::Matrix3d> conjugate_group(const std::vector<Eigen::Matrix3d>& group,
                                             const Eigen::Matrix3d& frame);

/// Strict local maxima of rho over 1-ring neighborhoods, above
/// mean + peak_sigma * stdev. Returns node indices sorted by density.
std::vector<int> density_peaks(const DensityField& rho, double peak_sigma = 2.0);

/// Isotropic test, axisymmetry test, then peak-constellation fits
/// (2n-gon -> D2nH, cube/octahedron -> Cubic, icosahedron/dodecahedron ->
/// Icosahedral, two arcs -> D2); the fitted group must have invariance
/// residual below group_tol, otherwise Unclassified.
SymmetryLabel classify(const DensityField& rho, const SymmetryConfig& cfg = {});

/// (theta, phi) raster of log rho: `cols` azimuthal samples in [0, 2pi) by
/// `rows` polar samples in [0, pi], written as CSV rows of constant phi.
void export_grid_csv(const std::string& path, const DensityField& rho, int cols = 256,
                     int rows = 128);

}  // namespace onsager
