#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "onsager/lobpcg.hpp"
#include "onsager/model.hpp"
#include "onsager/symmetry_label.hpp"

namespace onsager {

/// Parameters of the saddle search integrators and the eigensolver.
struct SaddleSearchConfig {
  int index_k = 0;              // target Morse index
  double dt = 0.2;              // step size for the saddle dynamics
  double dt_gradient_flow = 0.5;
  double grad_tol = 1e-9;       // 2-norm of the projected gradient
  int max_steps = 200000;
  double newton_tol = 1e-14;    // componentwise residual of the implicit solve
  int newton_max = 50;
  double eig_tol = 1e-8;
  int eig_block_extra = 3;      // direction block = k + extra
  int eig_inner_iters = 8;      // LOBPCG sweeps per saddle-dynamics step
  double cap_M = 1e8;           // diagonal cap of the Hessian used in the dynamics
  double zero_thresh_zeta = 0;  // 0 -> 1e-3 * h * 4pi at solve time
  unsigned seed = 12345;
  int max_index_cap = 30;       // certification gives up past this many negatives

  double resolve_zeta(double h) const;
};

/// Eigenvalue classification of a converged state.
struct IndexCertificate {
  int morse_index = 0;
  int zero_modes = 0;
  Vec leading_eigenvalues;  // smallest morse_index + zero_modes + 3
  Mat eigenvectors;         // matching columns
  bool index_uncertain = false;  // an eigenvalue sat in the ambiguous band
  bool eig_warning = false;      // eigensolver returned without full convergence
};

/// A certified critical point: converged density plus its spectral data.
struct CriticalPoint {
  DensityField density;
  double energy = 0;
  int morse_index = 0;
  int zero_modes = 0;
  Vec leading_eigenvalues;
  Mat eigenvectors;
  double grad_norm = 0;
  SymmetryLabel symmetry;
  KernelSpec kernel_spec;
  bool index_uncertain = false;
  bool eig_warning = false;
  bool zero_mode_mismatch = false;  // symmetry label disagrees with zero-mode count
};

struct TrajectoryRecord {
  int step = 0;
  double energy = 0;
  double grad_norm = 0;
  double dt = 0;
};

struct SolveResult {
  bool converged = false;
  std::optional<CriticalPoint> point;
  double final_grad_norm = 0;
  int steps = 0;
  std::vector<TrajectoryRecord> trajectory;  // decimated energy log
};

/// Solves exp(s) + a*s = b for the unique real root (a > 0), Newton iteration
/// from s0 with a bisection safeguard. Throws StepError on failure.
double solve_exp_plus_linear(double a, double b, double s0, double tol = 1e-14,
                             int max_iters = 50);

/// One semi-implicit gradient-flow step: the entropy term is implicit
/// (componentwise Newton), the interaction explicit, followed by retraction.
DensityField gradient_flow_step(const DensityField& rho, const KernelMatrix& K,
                                const SaddleSearchConfig& cfg, double dt_override = -1);

/// One saddle-dynamics step for index k = V.cols(): reflected force on the
/// position (same implicit solve with the explicit ascent term), then the
/// direction block advances toward the smallest eigenvectors of the capped
/// Hessian by warm-started LOBPCG sweeps. V is replaced by the updated
/// orthonormal block.
DensityField hisd_step(const DensityField& rho, Mat& V, const KernelMatrix& K,
                       const SaddleSearchConfig& cfg);

/// Smallest eigenpairs of the (capped) Hessian at rho on the zero-sum
/// subspace.
LobpcgResult hessian_smallest(const DensityField& rho, const KernelMatrix& K, int m,
                              const Mat& X0, const SaddleSearchConfig& cfg,
                              std::optional<double> cap_M, int max_iters = -1);

/// Classifies a converged state: smallest exact-Hessian eigenvalues in blocks
/// of growing size until one exceeds +zeta; counts lambda < -zeta as negative
/// and |lambda| <= zeta as zero modes.
IndexCertificate compute_index(const DensityField& rho, const KernelMatrix& K,
                               const SaddleSearchConfig& cfg, const Mat& warm = Mat());

/// Runs the index-k saddle dynamics from `start` until the gradient norm drops
/// below grad_tol (or max_steps), then certifies the result with the exact
/// Hessian. V0 may be empty; directions are then initialized by LOBPCG at the
/// start. For k = 0 the energy is enforced non-increasing (dt halves on a
/// violation or a failed implicit solve, up to 5 times).
SolveResult solve_to_critical(const DensityField& start, int k, const Mat& V0,
                              const KernelMatrix& K, const SaddleSearchConfig& cfg,
                              std::vector<TrajectoryRecord>* full_log = nullptr);

}  // namespace onsager
