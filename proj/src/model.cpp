#include "onsager/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "onsager/errors.hpp"

namespace onsager {

namespace {
constexpr double kFourPi = 4.0 * M_PI;
}

std::string kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::Dipolar: return "dipolar";
    case KernelKind::MaierSaupe: return "maier-saupe";
    case KernelKind::Coupled: return "coupled";
    case KernelKind::Onsager: return "onsager";
  }
  return "?";
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "dipolar") return KernelKind::Dipolar;
  if (name == "maier-saupe" || name == "ms") return KernelKind::MaierSaupe;
  if (name == "coupled") return KernelKind::Coupled;
  if (name == "onsager") return KernelKind::Onsager;
  throw ParameterError("unknown kernel kind: " + name);
}

void KernelSpec::validate() const {
  if (sigma < 0 || kappa < 0 || mu < 0 || tau <= 0)
    throw ParameterError("kernel parameters must be nonnegative (tau positive)");
  auto zero = [](double x) { return x == 0.0; };
  switch (kind) {
    case KernelKind::Dipolar:
      if (!zero(kappa) || !zero(mu)) throw ParameterError("dipolar kernel uses sigma only");
      break;
    case KernelKind::MaierSaupe:
      if (!zero(sigma) || !zero(mu)) throw ParameterError("maier-saupe kernel uses kappa only");
      break;
    case KernelKind::Coupled:
      if (!zero(mu)) throw ParameterError("coupled kernel uses sigma and kappa only");
      break;
    case KernelKind::Onsager:
      if (!zero(sigma) || !zero(kappa)) throw ParameterError("onsager kernel uses mu only");
      break;
  }
}

KernelSpec KernelSpec::dipolar(double s) { return {KernelKind::Dipolar, s, 0, 0, 1}; }
KernelSpec KernelSpec::maier_saupe(double k) { return {KernelKind::MaierSaupe, 0, k, 0, 1}; }
KernelSpec KernelSpec::coupled(double s, double k) { return {KernelKind::Coupled, s, k, 0, 1}; }
KernelSpec KernelSpec::onsager(double m) { return {KernelKind::Onsager, 0, 0, m, 1}; }

std::string KernelSpec::describe() const {
  char buf[160];
  switch (kind) {
    case KernelKind::Dipolar:
      std::snprintf(buf, sizeof buf, "dipolar sigma=%.17g", sigma);
      break;
    case KernelKind::MaierSaupe:
      std::snprintf(buf, sizeof buf, "maier-saupe kappa=%.17g", kappa);
      break;
    case KernelKind::Coupled:
      std::snprintf(buf, sizeof buf, "coupled sigma=%.17g kappa=%.17g", sigma, kappa);
      break;
    case KernelKind::Onsager:
      std::snprintf(buf, sizeof buf, "onsager mu=%.17g", mu);
      break;
  }
  return buf;
}

double kernel_eval(const KernelSpec& spec, double t) {
  if (t > 1.0 + 1e-12 || t < -1.0 - 1e-12)
    throw ParameterError("kernel argument outside [-1, 1]");
  t = std::clamp(t, -1.0, 1.0);
  switch (spec.kind) {
    case KernelKind::Dipolar: return -spec.sigma * t;
    case KernelKind::MaierSaupe: return -spec.kappa * t * t;
    case KernelKind::Coupled: return -spec.sigma * t - spec.kappa * t * t;
    case KernelKind::Onsager: return spec.mu * std::sqrt(1.0 - t * t);
  }
  return 0;
}

KernelMatrix assemble_kernel_matrix(std::shared_ptr<const SphereMesh> mesh,
                                    const KernelSpec& spec) {
  spec.validate();
  const int n = mesh->size();
  KernelMatrix km;
  km.mesh = std::move(mesh);
  km.spec = spec;
  km.K.resize(n, n);
  const auto& pts = km.mesh->points();
  const double diag = kernel_eval(spec, 1.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    km.K(i, i) = diag;
    for (int j = i + 1; j < n; ++j) {
      double t = pts.row(i).dot(pts.row(j));
      km.K(i, j) = kernel_eval(spec, std::clamp(t, -1.0, 1.0));
    }
  }
  // mirror the upper triangle so symmetry is exact
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) km.K(i, j) = km.K(j, i);
  return km;
}

double DensityField::uniform_deviation() const {
  return (psi.array().exp() - 1.0 / kFourPi).abs().maxCoeff() * kFourPi;
}

DensityField isotropic_state(std::shared_ptr<const SphereMesh> mesh) {
  DensityField f;
  f.mesh = std::move(mesh);
  f.psi = Vec::Constant(f.mesh->size(), -std::log(kFourPi));
  return retract(std::move(f.psi), f.mesh);
}

DensityField retract(Vec psi, std::shared_ptr<const SphereMesh> mesh) {
  const double m = psi.maxCoeff();
  const double log_mass = m + std::log(mesh->weight_h() * (psi.array() - m).exp().sum());
  DensityField f;
  f.psi = std::move(psi);
  f.psi.array() -= log_mass;
  f.mesh = std::move(mesh);
  return f;
}

double energy(const DensityField& rho, const KernelMatrix& K) {
  const double h = K.h();
  Vec r = rho.rho();
  return h * r.dot(rho.psi) + 0.5 * h * h * r.dot(K.K * r);
}

Vec gradient(const DensityField& rho, const KernelMatrix& K) {
  const double h = K.h();
  Vec g = h * rho.psi + h * h * (K.K * rho.rho());
  g.array() -= g.mean();
  return g;
}

Vec hessian_matvec(const DensityField& rho, const KernelMatrix& K, const Vec& v,
                   std::optional<double> cap_M) {
  HessianOperator H(rho, K, cap_M);
  return H.apply_vec(v);
}

ModelEval evaluate_state(const DensityField& rho, const KernelMatrix& K) {
  ModelEval e;
  const double h = K.h();
  e.rho = rho.rho();
  e.Krho = K.K * e.rho;
  e.energy = h * e.rho.dot(rho.psi) + 0.5 * h * h * e.rho.dot(e.Krho);
  Vec raw = h * rho.psi + h * h * e.Krho;
  e.xi = raw.mean();
  e.grad = raw.array() - e.xi;
  e.grad_norm = e.grad.norm();
  return e;
}

HessianOperator::HessianOperator(const DensityField& rho, const KernelMatrix& Kmat,
                                 std::optional<double> cap_M)
    : K(&Kmat), h(Kmat.h()) {
  // w = h / rho, optionally clipped at h*M; exp(-psi) kept finite
  w = (-rho.psi.array()).min(690.0).exp().matrix() * h;
  if (cap_M) w = w.array().min(h * *cap_M).matrix();
}

void HessianOperator::apply(const Mat& X, Mat& Y) const {
  Mat Xp = X;
  project_zero_sum(Xp);
  Y = w.asDiagonal() * Xp;
  Y.noalias() += (h * h) * (K->K * Xp);
  project_zero_sum(Y);
}

Vec HessianOperator::apply_vec(const Vec& v) const {
  Vec vp = v;
  project_zero_sum(vp);
  Vec y = w.asDiagonal() * vp;
  y.noalias() += (h * h) * (K->K * vp);
  project_zero_sum(y);
  return y;
}

Vec HessianOperator::inverse_diagonal() const {
  return w.array().min(h * 1e8).inverse().matrix();
}

void project_zero_sum(Mat& X) {
  for (int c = 0; c < X.cols(); ++c) X.col(c).array() -= X.col(c).mean();
}

void project_zero_sum(Vec& v) { v.array() -= v.mean(); }

void save_density(const std::string& path, const DensityField& rho, const KernelSpec& spec,
                  double energy_value, int morse_index) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open density file for writing: " + path);
  char buf[256];
  out << "# density field\n";
  out << "kernel " << kernel_kind_name(spec.kind) << "\n";
  std::snprintf(buf, sizeof buf, "sigma %.17g\nkappa %.17g\nmu %.17g\ntau %.17g\n", spec.sigma,
                spec.kappa, spec.mu, spec.tau);
  out << buf;
  out << "level " << rho.mesh->level() << "\n";
  std::snprintf(buf, sizeof buf, "energy %.17g\n", energy_value);
  out << buf;
  out << "index " << morse_index << "\n";
  const auto& pts = rho.mesh->points();
  for (int i = 0; i < rho.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", pts(i, 0), pts(i, 1), pts(i, 2),
                  rho.psi[i]);
    out << buf;
  }
}

DensityField load_density(const std::string& path, std::shared_ptr<const SphereMesh> mesh,
                          DensityFileHeader* header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open density file: " + path);
  std::string line, key;
  DensityFileHeader hdr;
  std::getline(in, line);  // comment
  for (int row = 0; row < 8; ++row) {
    std::getline(in, line);
    std::istringstream ss(line);
    ss >> key;
    if (key == "kernel") {
      std::string name;
      ss >> name;
      hdr.spec.kind = kernel_kind_from_name(name);
    } else if (key == "sigma")
      ss >> hdr.spec.sigma;
    else if (key == "kappa")
      ss >> hdr.spec.kappa;
    else if (key == "mu")
      ss >> hdr.spec.mu;
    else if (key == "tau")
      ss >> hdr.spec.tau;
    else if (key == "level")
      ss >> hdr.level;
    else if (key == "energy")
      ss >> hdr.energy;
    else if (key == "index")
      ss >> hdr.morse_index;
  }
  if (hdr.level != mesh->level())
    throw IoError("density file level does not match the mesh");
  DensityField f;
  f.mesh = std::move(mesh);
  f.psi.resize(f.mesh->size());
  double x, y, z;
  for (int i = 0; i < f.size(); ++i) {
    if (!(in >> x >> y >> z >> f.psi[i])) throw IoError("truncated density file: " + path);
  }
  if (header) *header = hdr;
  return f;
}

}  // namespace onsager
