#include "onsager/reduced.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "onsager/errors.hpp"

namespace onsager {

Vec5 reduced_basis(const Vec3& p) {
  Vec5 b;
  b << p[0], p[1], p[2], p[0] * p[0] - p[2] * p[2], p[1] * p[1] - p[2] * p[2];
  return b;
}

void require_reducible(const KernelSpec& spec) {
  if (spec.kind == KernelKind::Onsager)
    throw ParameterError("the five-parameter restriction does not cover the onsager kernel");
}

namespace {

// Node-level basis matrix B (N x 5) for a mesh, cached per mesh instance.
Mat basis_matrix(const SphereMesh& mesh) {
  Mat B(mesh.size(), 5);
  for (int i = 0; i < mesh.size(); ++i) B.row(i) = reduced_basis(mesh.point(i)).transpose();
  return B;
}

struct ReducedEval {
  Vec rho;       // lifted density, mass-feasible
  Vec psi;
  Mat drho;      // N x 5, d rho_i / d m_a
  Vec bbar;      // 5, quadrature of b_a rho
};

ReducedEval lift(const Vec5& m, const SphereMesh& mesh, const Mat& B) {
  ReducedEval ev;
  Vec expo = B * m;
  double shift = expo.maxCoeff();
  Vec phi = (expo.array() - shift).exp();
  double z = mesh.weight_h() * phi.sum();
  ev.rho = phi / z;
  ev.psi = (expo.array() - shift - std::log(z)).matrix();
  ev.bbar = mesh.weight_h() * (B.transpose() * ev.rho);
  ev.drho = ev.rho.asDiagonal() * (B - Vec::Ones(mesh.size()) * ev.bbar.transpose());
  return ev;
}

}  // namespace

DensityField reduced_density(const Vec5& m, std::shared_ptr<const SphereMesh> mesh) {
  Mat B = basis_matrix(*mesh);
  ReducedEval ev = lift(m, *mesh, B);
  DensityField f;
  f.psi = std::move(ev.psi);
  f.mesh = std::move(mesh);
  return f;
}

double reduced_energy(const Vec5& m, const KernelMatrix& K) {
  require_reducible(K.spec);
  const double h = K.h();
  Mat B = basis_matrix(*K.mesh);
  ReducedEval ev = lift(m, *K.mesh, B);
  return h * ev.rho.dot(ev.psi) + 0.5 * h * h * ev.rho.dot(K.K * ev.rho);
}

Vec5 reduced_gradient(const Vec5& m, const KernelMatrix& K) {
  require_reducible(K.spec);
  const double h = K.h();
  Mat B = basis_matrix(*K.mesh);
  ReducedEval ev = lift(m, *K.mesh, B);
  // dE/d rho_i = h (psi_i + 1) + h^2 (K rho)_i
  Vec dE = h * (ev.psi.array() + 1.0).matrix() + h * h * (K.K * ev.rho);
  return ev.drho.transpose() * dE;
}

Mat5 reduced_hessian(const Vec5& m, const KernelMatrix& K) {
  require_reducible(K.spec);
  const double h = K.h();
  const int n = K.size();
  Mat B = basis_matrix(*K.mesh);
  ReducedEval ev = lift(m, *K.mesh, B);
  Vec dE = h * (ev.psi.array() + 1.0).matrix() + h * h * (K.K * ev.rho);

  // second derivative of the lifted density contracted with dE, plus the
  // quadratic form of the full-model second variation on the tangent block
  Mat Bc = B - Vec::Ones(n) * ev.bbar.transpose();  // centered basis
  Mat Kdrho = K.K * ev.drho;                        // N x 5

  Mat5 H = Mat5::Zero();
  // d2 rho_i / dm_a dm_b = rho_i (Bc_ia Bc_ib - C_ab) with the rho-weighted
  // centered covariance C_ab = h sum_i rho_i Bc_ia Bc_ib
  Vec rho_dE = ev.rho.cwiseProduct(dE);
  Mat5 bb_rho_dE = Mat5::Zero();
  for (int a = 0; a < 5; ++a)
    for (int b = a; b < 5; ++b) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += rho_dE[i] * Bc(i, a) * Bc(i, b);
      bb_rho_dE(a, b) = bb_rho_dE(b, a) = acc;
    }
  // quadrature of b_a b_b rho (for the -<b_a b_b>_rho rho term)
  Mat5 bb_rho = Mat5::Zero();
  for (int a = 0; a < 5; ++a)
    for (int b = a; b < 5; ++b) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += ev.rho[i] * Bc(i, a) * Bc(i, b);
      bb_rho(a, b) = bb_rho(b, a) = acc;
    }
  double sum_rho_dE = rho_dE.sum();
  H += bb_rho_dE - bb_rho * (h * sum_rho_dE);

  // tangent-tangent block: drho_a^T (h/rho + h^2 K) drho_b
  Mat5 tt = Mat5::Zero();
  for (int a = 0; a < 5; ++a)
    for (int b = a; b < 5; ++b) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += h * ev.drho(i, a) * ev.drho(i, b) / ev.rho[i];
      acc += h * h * ev.drho.col(a).dot(Kdrho.col(b));
      tt(a, b) = tt(b, a) = acc;
    }
  H += tt;
  return H;
}

ReducedCritical find_reduced_critical(const Vec5& m0, const KernelMatrix& K,
                                      const ReducedSearchConfig& cfg) {
  require_reducible(K.spec);
  ReducedCritical out;
  Vec5 m = m0;
  Vec5 g = reduced_gradient(m, K);
  double gnorm = g.norm();
  double damping = 0;

  for (int it = 0; it < cfg.max_iters && gnorm > cfg.grad_tol; ++it) {
    Mat5 H = reduced_hessian(m, K);
    bool improved = false;
    for (int trial = 0; trial < 40; ++trial) {
      Mat5 Hd = H + damping * Mat5::Identity();
      Vec5 step = Hd.fullPivLu().solve(g);
      if (!step.allFinite()) {
        damping = damping == 0 ? 1e-8 : damping * 10;
        continue;
      }
      Vec5 m_try = m - step;
      Vec5 g_try = reduced_gradient(m_try, K);
      if (g_try.norm() < gnorm) {
        m = m_try;
        g = g_try;
        gnorm = g_try.norm();
        damping = std::max(0.0, damping * 0.25);
        improved = true;
        break;
      }
      damping = damping == 0 ? 1e-8 : damping * 10;
    }
    if (!improved) break;
  }

  out.m = m;
  out.grad_norm = gnorm;
  out.converged = gnorm <= cfg.grad_tol;
  out.energy = reduced_energy(m, K);
  Eigen::SelfAdjointEigenSolver<Mat5> es(reduced_hessian(m, K));
  double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  double zero_tol = cfg.zero_tol_rel * std::max(scale, 1e-30);
  out.reduced_index = 0;
  for (int i = 0; i < 5; ++i)
    if (es.eigenvalues()[i] < -zero_tol) ++out.reduced_index;
  return out;
}

void verify_lift(ReducedCritical& rc, const KernelMatrix& K) {
  DensityField lifted = reduced_density(rc.m, K.mesh);
  rc.full_grad_norm = gradient(lifted, K).norm();
}

}  // namespace onsager
