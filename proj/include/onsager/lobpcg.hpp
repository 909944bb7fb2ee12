#pragma once

#include <Eigen/Core>

#include <functional>

namespace onsager {

struct LobpcgOptions {
  int max_iters = 200;
  double tol = 1e-8;           // residual tolerance, relative to lambda_scale
  double lambda_scale = 1.0;   // spectral scale of the eigenvalues of interest
  unsigned seed = 12345;       // fill-in for degenerate blocks
};

struct LobpcgResult {
  Eigen::VectorXd lambda;       // ascending
  Eigen::MatrixXd X;            // orthonormal, one column per eigenpair
  Eigen::VectorXd residual_norms;
  int iterations = 0;
  bool converged = false;       // all nev pairs below tolerance
};

/// Locally optimal block preconditioned conjugate gradient for the smallest
/// eigenpairs of a symmetric operator restricted to the zero-sum subspace
/// (the mean of every basis vector is projected out).
///
/// apply_op must compute Y = H X for a block X of zero-sum columns.
/// precond_diag is applied entrywise to residuals (pass ones to disable).
/// X0 seeds the block; rank-deficient or undersized blocks are completed with
/// seeded random zero-sum columns. A pair counts as converged once
/// ||H v - lambda v|| <= tol * max(|lambda|, lambda_scale).
LobpcgResult lobpcg_smallest(
    const std::function<void(const Eigen::MatrixXd&, Eigen::MatrixXd&)>& apply_op,
    const Eigen::VectorXd& precond_diag, const Eigen::MatrixXd& X0, int nev,
    const LobpcgOptions& opts);

}  // namespace onsager
