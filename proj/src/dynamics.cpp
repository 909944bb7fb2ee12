#include "onsager/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "onsager/errors.hpp"

namespace onsager {

namespace {
constexpr double kFourPi = 4.0 * M_PI;
}

double SaddleSearchConfig::resolve_zeta(double h) const {
  return zero_thresh_zeta > 0 ? zero_thresh_zeta : 1e-3 * h * kFourPi;
}

double solve_exp_plus_linear(double a, double b, double s0, double tol, int max_iters) {
  if (a <= 0) throw ParameterError("semi-implicit solve needs a > 0");
  auto f = [&](double s) {
    double e = s > 700 ? std::numeric_limits<double>::infinity() : std::exp(s);
    return e + a * s - b;
  };
  const double ftol = tol * std::max(1.0, std::abs(b));

  // f is strictly increasing; bracket the root around the initial guess
  double lo = s0, hi = s0, flo = f(s0), fhi = flo;
  double step = 1.0;
  while (flo > 0) {
    lo -= step;
    step *= 2;
    flo = f(lo);
    if (step > 1e12) throw StepError("failed to bracket the implicit update from below");
  }
  step = 1.0;
  while (fhi < 0) {
    hi += step;
    step *= 2;
    fhi = f(hi);
    if (step > 1e12) throw StepError("failed to bracket the implicit update from above");
  }

  double s = std::clamp(s0, lo, hi);
  double fs = f(s);
  for (int it = 0; it < max_iters; ++it) {
    if (std::abs(fs) <= ftol) return s;
    if (fs > 0)
      hi = s;
    else
      lo = s;
    double deriv = (s > 700 ? std::numeric_limits<double>::infinity() : std::exp(s)) + a;
    double snew = s - fs / deriv;
    if (!(snew > lo && snew < hi)) snew = 0.5 * (lo + hi);  // bisection safeguard
    s = snew;
    fs = f(s);
  }
  // Newton budget exhausted: finish with bisection
  for (int it = 0; it < 200; ++it) {
    if (std::abs(fs) <= ftol) return s;
    if (fs > 0)
      hi = s;
    else
      lo = s;
    s = 0.5 * (lo + hi);
    fs = f(s);
    if (hi - lo < 1e-16 * std::max(1.0, std::abs(s))) break;
  }
  if (std::abs(fs) <= 1e4 * ftol) return s;
  throw StepError("componentwise Newton did not converge");
}

namespace {

// Shared core of the position update: solves the semi-implicit system
//   exp(psi) + dt*h*psi = rho^n + dt*(-h^2 K rho^n + xi 1 + ascent)
// componentwise and retracts. `ascent` may be empty (gradient flow).
DensityField position_update(const DensityField& rho, const ModelEval& ev, const Vec& ascent,
                             const KernelMatrix& K, const SaddleSearchConfig& cfg, double dt) {
  const double h = K.h();
  const double a = dt * h;
  Vec b = ev.rho - dt * h * h * ev.Krho;
  b.array() += dt * ev.xi;
  if (ascent.size() > 0) b += dt * ascent;
  Vec psi_new(rho.size());
  for (int i = 0; i < rho.size(); ++i)
    psi_new[i] = solve_exp_plus_linear(a, b[i], rho.psi[i], cfg.newton_tol, cfg.newton_max);
  return retract(std::move(psi_new), rho.mesh);
}

Mat direction_block_update(const DensityField& rho, const KernelMatrix& K, Mat warm, int k,
                           const SaddleSearchConfig& cfg, int max_iters) {
  HessianOperator H(rho, K, cfg.cap_M);
  LobpcgOptions opts;
  opts.max_iters = max_iters;
  opts.tol = cfg.eig_tol;
  opts.lambda_scale = K.h() * kFourPi;
  opts.seed = cfg.seed;
  auto apply = [&H](const Mat& X, Mat& Y) { H.apply(X, Y); };
  int nev = std::min(k + cfg.eig_block_extra, rho.size() - 1);
  LobpcgResult r = lobpcg_smallest(apply, H.inverse_diagonal(), warm, nev, opts);
  return r.X;
}

}  // namespace

DensityField gradient_flow_step(const DensityField& rho, const KernelMatrix& K,
                                const SaddleSearchConfig& cfg, double dt_override) {
  ModelEval ev = evaluate_state(rho, K);
  double dt = dt_override > 0 ? dt_override : cfg.dt_gradient_flow;
  return position_update(rho, ev, Vec(), K, cfg, dt);
}

DensityField hisd_step(const DensityField& rho, Mat& V, const KernelMatrix& K,
                       const SaddleSearchConfig& cfg) {
  ModelEval ev = evaluate_state(rho, K);
  const int k = static_cast<int>(V.cols());
  Vec ascent;
  if (k > 0) ascent = 2.0 * (V * (V.transpose() * ev.grad));
  DensityField next = position_update(rho, ev, ascent, K, cfg, cfg.dt);
  if (k > 0) {
    Mat block = direction_block_update(rho, K, V, k, cfg, cfg.eig_inner_iters);
    V = block.leftCols(std::min<int>(k, block.cols()));
  }
  return next;
}

LobpcgResult hessian_smallest(const DensityField& rho, const KernelMatrix& K, int m,
                              const Mat& X0, const SaddleSearchConfig& cfg,
                              std::optional<double> cap_M, int max_iters) {
  HessianOperator H(rho, K, cap_M);
  LobpcgOptions opts;
  opts.max_iters = max_iters > 0 ? max_iters : 400;
  opts.tol = cfg.eig_tol;
  opts.lambda_scale = K.h() * kFourPi;
  opts.seed = cfg.seed;
  auto apply = [&H](const Mat& X, Mat& Y) { H.apply(X, Y); };
  return lobpcg_smallest(apply, H.inverse_diagonal(), X0, m, opts);
}

IndexCertificate compute_index(const DensityField& rho, const KernelMatrix& K,
                               const SaddleSearchConfig& cfg, const Mat& warm) {
  const double zeta = cfg.resolve_zeta(K.h());
  const int n = rho.size();
  int block = std::max({6, static_cast<int>(warm.cols()) + 3, cfg.index_k + 3});
  block = std::min(block, n - 1);
  Mat seed = warm;

  IndexCertificate cert;
  while (true) {
    LobpcgResult r = hessian_smallest(rho, K, block, seed, cfg, std::nullopt);
    cert.eig_warning = cert.eig_warning || !r.converged;
    int nneg = 0, nzero = 0, first_pos = -1;
    for (int i = 0; i < r.lambda.size(); ++i) {
      if (r.lambda[i] < -zeta)
        ++nneg;
      else if (r.lambda[i] <= zeta)
        ++nzero;
      else {
        first_pos = i;
        break;
      }
    }
    bool have_positive = first_pos >= 0;
    int needed = nneg + nzero + 3;
    if ((have_positive && r.lambda.size() >= needed) || block >= n - 1 ||
        nneg > cfg.max_index_cap) {
      cert.morse_index = nneg;
      cert.zero_modes = nzero;
      int keep = std::min<int>(needed, static_cast<int>(r.lambda.size()));
      cert.leading_eigenvalues = r.lambda.head(keep);
      cert.eigenvectors = r.X.leftCols(keep);
      for (int i = 0; i < keep; ++i) {
        double a = std::abs(cert.leading_eigenvalues[i]);
        if (a >= 0.5 * zeta && a <= 2.0 * zeta) cert.index_uncertain = true;
      }
      if (!have_positive) cert.index_uncertain = true;
      return cert;
    }
    seed = r.X;
    block = std::min(std::max(needed, block + 6), n - 1);
  }
}

SolveResult solve_to_critical(const DensityField& start, int k, const Mat& V0,
                              const KernelMatrix& K, const SaddleSearchConfig& cfg,
                              std::vector<TrajectoryRecord>* full_log) {
  SolveResult out;
  DensityField rho = retract(start.psi, start.mesh);
  SaddleSearchConfig local = cfg;
  local.index_k = k;

  // direction block k + extra, warm across steps; first k columns drive the dynamics
  Mat block;
  if (k > 0) block = direction_block_update(rho, K, V0, k, local, 200);

  const double dt0 = (k == 0) ? cfg.dt_gradient_flow : cfg.dt;
  double dt = dt0;
  int newton_halvings = 0;
  ModelEval ev = evaluate_state(rho, K);
  double prev_energy = ev.energy;

  int step = 0;
  for (; step < cfg.max_steps; ++step) {
    if (ev.grad_norm <= cfg.grad_tol) break;
    if (full_log || (step % 64) == 0) {
      TrajectoryRecord rec{step, ev.energy, ev.grad_norm, dt};
      if (full_log) full_log->push_back(rec);
      if ((step % 64) == 0) out.trajectory.push_back(rec);
    }

    DensityField next;
    try {
      Vec ascent;
      if (k > 0) {
        auto V = block.leftCols(k);
        ascent = 2.0 * (V * (V.transpose() * ev.grad));
      }
      next = position_update(rho, ev, ascent, K, local, dt);
    } catch (const StepError&) {
      if (++newton_halvings > 5) {
        out.steps = step;
        out.final_grad_norm = ev.grad_norm;
        out.trajectory.push_back({step, ev.energy, ev.grad_norm, dt});
        return out;  // divergence report
      }
      dt *= 0.5;
      continue;
    }

    if (k > 0) block = direction_block_update(rho, K, block, k, local, cfg.eig_inner_iters);

    ModelEval ev_next = evaluate_state(next, K);
    if (k == 0 && ev_next.energy > prev_energy + 1e-13 * std::abs(prev_energy) &&
        dt > dt0 / 4096) {
      dt *= 0.5;
      continue;
    }
    rho = std::move(next);
    ev = std::move(ev_next);
    prev_energy = ev.energy;
  }

  out.steps = step;
  out.final_grad_norm = ev.grad_norm;
  out.converged = ev.grad_norm <= cfg.grad_tol;
  out.trajectory.push_back({step, ev.energy, ev.grad_norm, dt});
  if (!out.converged) return out;

  SaddleSearchConfig cert_cfg = cfg;
  cert_cfg.index_k = k;
  IndexCertificate cert = compute_index(rho, K, cert_cfg, block);
  CriticalPoint cp;
  cp.density = rho;
  cp.energy = ev.energy;
  cp.morse_index = cert.morse_index;
  cp.zero_modes = cert.zero_modes;
  cp.leading_eigenvalues = cert.leading_eigenvalues;
  cp.eigenvectors = cert.eigenvectors;
  cp.grad_norm = ev.grad_norm;
  cp.kernel_spec = K.spec;
  cp.index_uncertain = cert.index_uncertain;
  cp.eig_warning = cert.eig_warning;
  out.point = std::move(cp);
  return out;
}

}  // namespace onsager
