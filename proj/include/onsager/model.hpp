#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>

#include "onsager/sphere_mesh.hpp"

namespace onsager {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class KernelKind { Dipolar, MaierSaupe, Coupled, Onsager };

std::string kernel_kind_name(KernelKind k);
KernelKind kernel_kind_from_name(const std::string& name);

/// Interaction kernel k(t) of the pair potential, t = p.q in [-1, 1].
///   Dipolar     -sigma * t
///   MaierSaupe  -kappa * t^2
///   Coupled     -sigma * t - kappa * t^2
///   Onsager      mu * sqrt(1 - t^2)
/// tau multiplies the entropy term; kept at 1 (changing it rescales the
/// interaction strengths equivalently).
struct KernelSpec {
  KernelKind kind = KernelKind::Dipolar;
  double sigma = 0;
  double kappa = 0;
  double mu = 0;
  double tau = 1;

  /// Throws ParameterError if parameters unused by `kind` are nonzero or a
  /// used parameter is negative.
  void validate() const;

  static KernelSpec dipolar(double sigma);
  static KernelSpec maier_saupe(double kappa);
  static KernelSpec coupled(double sigma, double kappa);
  static KernelSpec onsager(double mu);

  std::string describe() const;
};

/// k(t) with t clamped to [-1, 1] first (the Onsager kernel's square root is
/// not defined past the endpoints and round-off can push dot products there).
double kernel_eval(const KernelSpec& spec, double t);

/// Dense symmetric node matrix K_ij = k(x_i . x_j).
struct KernelMatrix {
  Mat K;
  std::shared_ptr<const SphereMesh> mesh;
  KernelSpec spec;

  int size() const { return static_cast<int>(K.rows()); }
  double h() const { return mesh->weight_h(); }
};

KernelMatrix assemble_kernel_matrix(std::shared_ptr<const SphereMesh> mesh,
                                    const KernelSpec& spec);

/// Log-density node values psi_i = log rho(x_i). All solver iterations act on
/// psi; rho is materialized transiently. Feasible fields satisfy the discrete
/// mass constraint h * sum_i exp(psi_i) = 1.
struct DensityField {
  Vec psi;
  std::shared_ptr<const SphereMesh> mesh;

  int size() const { return static_cast<int>(psi.size()); }
  Vec rho() const { return psi.array().exp().matrix(); }
  double mass() const { return mesh->weight_h() * psi.array().exp().sum(); }

  /// max_i |rho_i - 1/4pi| * 4pi
  double uniform_deviation() const;
};

/// Uniform density rho0 = 1/(4 pi).
DensityField isotropic_state(std::shared_ptr<const SphereMesh> mesh);

/// Shifts psi by a constant so the discrete mass constraint holds exactly:
/// psi - log(h * 1^T exp psi). Overflow-safe (max subtracted before exp).
DensityField retract(Vec psi, std::shared_ptr<const SphereMesh> mesh);

/// Discrete free energy  h rho^T psi + (h^2/2) rho^T K rho.
double energy(const DensityField& rho, const KernelMatrix& K);

/// Projected gradient  P (h psi + h^2 K rho),  P = I - 1 1^T / N.
/// The result sums to zero.
Vec gradient(const DensityField& rho, const KernelMatrix& K);

/// Action of the Hessian  P (h Diag(w) + h^2 K) P  on v, where w_i = 1/rho_i,
/// or w_i = min(1/rho_i, M) when cap_M is supplied.
Vec hessian_matvec(const DensityField& rho, const KernelMatrix& K, const Vec& v,
                   std::optional<double> cap_M = std::nullopt);

/// Shared per-state quantities the integrators reuse (one K*rho product).
struct ModelEval {
  Vec rho;
  Vec Krho;
  double energy = 0;
  Vec grad;          // projected
  double grad_norm = 0;
  double xi = 0;     // multiplier N^-1 1^T (h psi + h^2 K rho)
};

ModelEval evaluate_state(const DensityField& rho, const KernelMatrix& K);

/// Hessian as a block operator on zero-sum columns, with the diagonal 1/rho
/// term optionally capped at M. Columns of X are projected to zero sum before
/// and after application.
struct HessianOperator {
  const KernelMatrix* K = nullptr;
  Vec w;  // h * (capped) inverse density
  double h = 0;

  HessianOperator() = default;
  HessianOperator(const DensityField& rho, const KernelMatrix& Kmat,
                  std::optional<double> cap_M);

  void apply(const Mat& X, Mat& Y) const;
  Vec apply_vec(const Vec& v) const;

  /// Inverse of the capped diagonal h*min(1/rho_i, M); LOBPCG preconditioner.
  Vec inverse_diagonal() const;
};

/// Subtracts the column means (orthogonal projection onto zero-sum vectors).
void project_zero_sum(Mat& X);
void project_zero_sum(Vec& v);

// --- density file I/O -------------------------------------------------------

/// Text table `x y z psi` with a header carrying the kernel spec, mesh level,
/// energy, and index.
void save_density(const std::string& path, const DensityField& rho, const KernelSpec& spec,
                  double energy_value, int morse_index);

struct DensityFileHeader {
  KernelSpec spec;
  int level = -1;
  double energy = 0;
  int morse_index = -1;
};

DensityField load_density(const std::string& path, std::shared_ptr<const SphereMesh> mesh,
                          DensityFileHeader* header = nullptr);

}  // namespace onsager
