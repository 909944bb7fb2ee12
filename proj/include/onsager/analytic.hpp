#pragma once

#include <vector>

#include "onsager/model.hpp"

namespace onsager {

// Closed-form critical-point families, kernel-operator spectra, and the
// icosahedral-harmonic machinery used to validate the discrete solver.

/// rho(p) = Z^-1 exp(-r p.m) with Z = 4 pi sinh(r)/r, the nontrivial critical
/// family of the dipolar kernel; also returns the strength sigma(r) =
/// r^2 / (r coth r - 1) at which it is critical. r = 0 is rejected.
struct FamilyField {
  DensityField density;
  double parameter = 0;  // sigma or kappa at which the family member is critical
  double r = 0;
};

FamilyField dipolar_family(double r, const Vec3& m, std::shared_ptr<const SphereMesh> mesh);

/// sigma(r) = r^2 / (r coth r - 1); limit 3 at r -> 0.
double dipolar_sigma_of_r(double r);

/// Inverts sigma(r) on r > 0 (sigma > 3).
double dipolar_r_of_sigma(double sigma);

/// rho(p) = Z^-1 exp(-r (p.m)^2): prolate for r < 0, oblate for r > 0.
/// kappa(r) = 4 r^2 (2r - 3 + 6 sqrt(r) e^-r / (sqrt(pi) erf sqrt(r)))^-1,
/// continued through r < 0 with the imaginary error function.
FamilyField ms_family(double r, const Vec3& m, std::shared_ptr<const SphereMesh> mesh);

double ms_kappa_of_r(double r);

/// Minimizes kappa(r) over r < 0 (the fold where the prolate pair appears);
/// returns {r*, kappa*}.
std::pair<double, double> ms_prolate_fold();

/// Inverts kappa(r) on a monotone branch containing r0 (local Newton).
double ms_r_of_kappa(double kappa, double r0);

struct KernelEigenvalue {
  int order_s = 0;     // spherical-harmonic order 2s for even kernels, s for dipolar
  double value = 0;
  int multiplicity = 0;
};

/// Continuum eigenvalues of the kernel operator on zero-mean functions.
///   Dipolar:    -(4/3) pi sigma           (multiplicity 3)
///   MaierSaupe: -(8/15) pi kappa          (multiplicity 5)
///   Onsager:    -(1/2) pi mu G(s-1/2) G(s+1/2) / (G(s+1) G(s+2)), mult 4s+1
/// Coupled returns both the sigma and kappa entries.
std::vector<KernelEigenvalue> kernel_operator_eigenvalues(const KernelSpec& spec, int s_max);

/// mu_s = 8 G(s+1) G(s+2) / (G(s-1/2) G(s+1/2)): strengths at which the
/// uniform state loses stability to order-2s modes.
std::vector<double> onsager_bifurcation_points(int s_max);

/// int_{-1}^{1} k(t) P_r(t) dt to absolute accuracy 1e-12 (adaptive
/// Gauss-Legendre; the Onsager kernel is integrated after t = sin phi).
double legendre_kernel_integral(const KernelSpec& spec, int r);

/// Legendre polynomial P_n(t) by the three-term recurrence.
double legendre_p(int n, double t);

/// Sixth-order spherical harmonic with icosahedral symmetry:
/// (phi^2 p1^2 - p2^2)(phi^2 p2^2 - p3^2)(phi^2 p3^2 - p1^2) + (2+sqrt5)/21.
double icosahedral_harmonic(const Vec3& p);

/// W(2/pi)/16, the kernel-size bound below which the uniform state is the
/// only critical point.
double isotropic_uniqueness_bound();

/// Lambert W on [0, inf) by Newton iteration, 1e-14 accuracy.
double lambert_w(double x);

/// Dawson integral D(x) = e^{-x^2} int_0^x e^{t^2} dt (1e-12 accuracy on
/// [0, 8]); used for the r < 0 branch of kappa(r).
double dawson(double x);

}  // namespace onsager
