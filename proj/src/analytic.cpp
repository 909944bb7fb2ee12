#include "onsager/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "onsager/errors.hpp"

namespace onsager {

namespace {

constexpr double kFourPi = 4.0 * M_PI;

struct GlRule {
  std::vector<double> x, w;  // nodes/weights on [-1, 1]
};

// Nodes by Newton iteration on P_n; cached per order.
const GlRule& gauss_legendre(int n) {
  static std::map<int, GlRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GlRule rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.x[i] = -x;
    rule.x[n - 1 - i] = x;
    rule.w[i] = rule.w[n - 1 - i] = 2.0 / ((1 - x * x) * pp * pp);
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

template <class F>
double integrate_gl(const F& f, double a, double b, int n) {
  const GlRule& r = gauss_legendre(n);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0;
  for (int i = 0; i < n; ++i) acc += r.w[i] * f(mid + half * r.x[i]);
  return acc * half;
}

template <class F>
double integrate_adaptive(const F& f, double a, double b, double abs_tol) {
  double prev = integrate_gl(f, a, b, 32);
  for (int n = 64; n <= 4096; n *= 2) {
    double cur = integrate_gl(f, a, b, n);
    if (std::abs(cur - prev) < abs_tol) return cur;
    prev = cur;
  }
  return prev;
}

}  // namespace

double legendre_p(int n, double t) {
  if (n == 0) return 1.0;
  double p0 = 1.0, p1 = t;
  for (int k = 2; k <= n; ++k) {
    double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

double dipolar_sigma_of_r(double r) {
  if (r == 0) throw ParameterError("r = 0 is the uniform state");
  double a = std::abs(r);
  if (a < 1e-4) return 3.0 + r * r / 5.0;
  // r coth r - 1, computed stably
  double denom = a / std::tanh(a) - 1.0;
  return r * r / denom;
}

double dipolar_r_of_sigma(double sigma) {
  if (sigma <= 3.0) throw ParameterError("the nontrivial dipolar family needs sigma > 3");
  double lo = 1e-6, hi = 1.0;
  while (dipolar_sigma_of_r(hi) < sigma) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (dipolar_sigma_of_r(mid) < sigma ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

FamilyField dipolar_family(double r, const Vec3& m, std::shared_ptr<const SphereMesh> mesh) {
  if (r == 0) throw ParameterError("r = 0 is the uniform state");
  FamilyField out;
  out.r = r;
  out.parameter = dipolar_sigma_of_r(r);
  // Z = 4 pi sinh(r)/r; log-form keeps large r safe
  double a = std::abs(r);
  double log_z = std::log(2.0 * M_PI / a) + a + std::log1p(-std::exp(-2.0 * a));
  const auto& pts = mesh->points();
  Vec psi(mesh->size());
  for (int i = 0; i < mesh->size(); ++i) psi[i] = -r * pts.row(i).dot(m) - log_z;
  out.density = retract(std::move(psi), std::move(mesh));
  return out;
}

double dawson(double x) {
  if (x < 0) return -dawson(-x);
  if (x < 0.5) {
    // alternating series, fine in this range
    double term = x, sum = x;
    for (int n = 1; n < 40; ++n) {
      term *= -2.0 * x * x / (2.0 * n + 1.0);
      sum += term;
      if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
  }
  // exp(-x^2) int_0^x exp(t^2) dt with panels refined toward t = x
  double acc = 0;
  double a = 0;  // distance from x, integrating [x - a_next, x - a]
  double width = 0.25 / x;
  while (a < x) {
    double b = std::min(x, a + width);
    acc += integrate_gl([x](double u) { return std::exp((x - u) * (x + u) * -1.0); }, a, b, 32);
    a = b;
    width *= 2;
  }
  return acc;
}

double ms_kappa_of_r(double r) {
  if (r == 0) throw ParameterError("r = 0 is the uniform state");
  if (std::abs(r) < 1e-5) return 7.5 + (5.0 / 7.0) * r;
  double denom;
  if (r > 0) {
    double s = std::sqrt(r);
    denom = 2 * r - 3 + 6 * s * std::exp(-r) / (std::sqrt(M_PI) * std::erf(s));
  } else {
    double s = std::sqrt(-r);
    denom = 2 * r - 3 + 3 * s / dawson(s);
  }
  return 4 * r * r / denom;
}

FamilyField ms_family(double r, const Vec3& m, std::shared_ptr<const SphereMesh> mesh) {
  if (r == 0) throw ParameterError("r = 0 is the uniform state");
  FamilyField out;
  out.r = r;
  out.parameter = ms_kappa_of_r(r);
  // Z = 2 pi int exp(-r t^2) dt; factor exp(-r t^2 + c) for large |r|
  double shift = std::max(0.0, -r);  // max of -r t^2 over [-1,1]
  double integral =
      integrate_gl([r, shift](double t) { return std::exp(-r * t * t - shift); }, -1, 1, 64);
  double log_z = std::log(2.0 * M_PI * integral) + shift;
  const auto& pts = mesh->points();
  Vec psi(mesh->size());
  for (int i = 0; i < mesh->size(); ++i) {
    double t = pts.row(i).dot(m);
    psi[i] = -r * t * t - log_z;
  }
  out.density = retract(std::move(psi), std::move(mesh));
  return out;
}

std::pair<double, double> ms_prolate_fold() {
  // golden-section minimum of kappa(r) on r < 0
  double a = -10.0, b = -0.05;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = ms_kappa_of_r(c), fd = ms_kappa_of_r(d);
  for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = ms_kappa_of_r(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = ms_kappa_of_r(d);
    }
  }
  double rstar = 0.5 * (a + b);
  return {rstar, ms_kappa_of_r(rstar)};
}

double ms_r_of_kappa(double kappa, double r0) {
  double r = r0;
  for (int it = 0; it < 200; ++it) {
    double f = ms_kappa_of_r(r) - kappa;
    double eps = std::max(1e-7, 1e-7 * std::abs(r));
    double df = (ms_kappa_of_r(r + eps) - ms_kappa_of_r(r - eps)) / (2 * eps);
    double step = f / df;
    r -= step;
    if (r == 0) r = r0 > 0 ? 1e-6 : -1e-6;
    if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(r))) break;
  }
  return r;
}

std::vector<KernelEigenvalue> kernel_operator_eigenvalues(const KernelSpec& spec, int s_max) {
  if (s_max > 30) throw ParameterError("s_max must be at most 30");
  std::vector<KernelEigenvalue> out;
  auto dipolar_entry = [](double sigma) {
    return KernelEigenvalue{1, -(4.0 / 3.0) * M_PI * sigma, 3};
  };
  auto ms_entry = [](double kappa) {
    return KernelEigenvalue{2, -(8.0 / 15.0) * M_PI * kappa, 5};
  };
  switch (spec.kind) {
    case KernelKind::Dipolar:
      out.push_back(dipolar_entry(spec.sigma));
      break;
    case KernelKind::MaierSaupe:
      out.push_back(ms_entry(spec.kappa));
      break;
    case KernelKind::Coupled:
      out.push_back(dipolar_entry(spec.sigma));
      out.push_back(ms_entry(spec.kappa));
      break;
    case KernelKind::Onsager:
      for (int s = 1; s <= s_max; ++s) {
        double lg = std::lgamma(s - 0.5) + std::lgamma(s + 0.5) - std::lgamma(s + 1.0) -
                    std::lgamma(s + 2.0);
        out.push_back({s, -0.5 * M_PI * spec.mu * std::exp(lg), 4 * s + 1});
      }
      break;
  }
  return out;
}

std::vector<double> onsager_bifurcation_points(int s_max) {
  if (s_max < 1) throw ParameterError("s_max must be at least 1");
  std::vector<double> mu;
  for (int s = 1; s <= s_max; ++s) {
    double lg = std::lgamma(s + 1.0) + std::lgamma(s + 2.0) - std::lgamma(s - 0.5) -
                std::lgamma(s + 0.5);
    mu.push_back(8.0 * std::exp(lg));
  }
  return mu;
}

double legendre_kernel_integral(const KernelSpec& spec, int r) {
  if (r < 0) throw ParameterError("Legendre order must be nonnegative");
  if (spec.kind == KernelKind::Onsager) {
    // t = sin(phi) removes the endpoint square-root kinks
    auto f = [&](double phi) {
      double c = std::cos(phi);
      return spec.mu * c * c * legendre_p(r, std::sin(phi));
    };
    return integrate_adaptive(f, -M_PI / 2, M_PI / 2, 1e-12);
  }
  auto f = [&](double t) { return kernel_eval(spec, t) * legendre_p(r, t); };
  return integrate_adaptive(f, -1.0, 1.0, 1e-12);
}

double icosahedral_harmonic(const Vec3& p) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double p1 = p[0] * p[0], p2 = p[1] * p[1], p3 = p[2] * p[2];
  const double f2 = phi * phi;
  return (f2 * p1 - p2) * (f2 * p2 - p3) * (f2 * p3 - p1) + (2.0 + std::sqrt(5.0)) / 21.0;
}

double lambert_w(double x) {
  if (x < 0) throw ParameterError("lambert_w implemented on [0, inf)");
  if (x == 0) return 0;
  double w = std::log1p(x);
  for (int it = 0; it < 100; ++it) {
    double ew = std::exp(w);
    double f = w * ew - x;
    double step = f / (ew * (1 + w) - f * (2 + w) / (2 + 2 * w));  // Halley
    w -= step;
    if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(w))) break;
  }
  return w;
}

double isotropic_uniqueness_bound() { return lambert_w(2.0 / M_PI) / 16.0; }

}  // namespace onsager
