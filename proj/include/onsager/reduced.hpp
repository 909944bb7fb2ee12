#pragma once

#include <Eigen/Core>

#include "onsager/model.hpp"

namespace onsager {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

// Five-parameter family rho_r(p; m) = Z_r^-1 exp(m . b(p)) with basis
// b = (p1, p2, p3, p1^2 - p3^2, p2^2 - p3^2). For the coupled (dipolar +
// Maier-Saupe) kernel every critical point of the full model is, up to an
// orthogonal transformation, a critical point of the restricted energy
// E_r(m) = E(rho_r(m)). The restriction is invalid for the Onsager kernel.

/// Basis values b(p) for one direction.
Vec5 reduced_basis(const Vec3& p);

/// Lifts m to a node density (partition function by mesh quadrature, so the
/// discrete mass constraint holds exactly).
DensityField reduced_density(const Vec5& m, std::shared_ptr<const SphereMesh> mesh);

/// Throws ParameterError for kernels the reduction does not cover.
void require_reducible(const KernelSpec& spec);

double reduced_energy(const Vec5& m, const KernelMatrix& K);
Vec5 reduced_gradient(const Vec5& m, const KernelMatrix& K);
Mat5 reduced_hessian(const Vec5& m, const KernelMatrix& K);

struct ReducedCritical {
  Vec5 m;
  double energy = 0;
  int reduced_index = 0;
  double grad_norm = 0;
  bool converged = false;
  /// Projected gradient norm of the lifted density in the full model; filled
  /// by verify_lift. Lifted points failing the full-model check are
  /// extraneous.
  double full_grad_norm = -1;
};

struct ReducedSearchConfig {
  double grad_tol = 1e-11;
  int max_iters = 400;
  double zero_tol_rel = 1e-7;  // |lambda| below this times the spectral scale counts as zero
};

/// Damped Newton on the reduced gradient (Levenberg fallback when the Hessian
/// step does not reduce ||g||).
ReducedCritical find_reduced_critical(const Vec5& m0, const KernelMatrix& K,
                                      const ReducedSearchConfig& cfg = {});

/// Fills full_grad_norm by evaluating the lifted density in the full model.
void verify_lift(ReducedCritical& rc, const KernelMatrix& K);

}  // namespace onsager
