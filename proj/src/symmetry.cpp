#include "onsager/symmetry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "onsager/errors.hpp"

namespace onsager {

namespace {
constexpr double kFourPi = 4.0 * M_PI;

using Mat3 = Eigen::Matrix3d;

std::array<long long, 9> group_key(const Mat3& R) {
  std::array<long long, 9> key;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) key[3 * i + j] = llround(R(i, j) * 1e7);
  return key;
}

std::vector<Mat3> close_group(const std::vector<Mat3>& generators) {
  std::map<std::array<long long, 9>, Mat3> elems;
  Mat3 id = Mat3::Identity();
  elems[group_key(id)] = id;
  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<Mat3> cur;
    cur.reserve(elems.size());
    for (auto& kv : elems) cur.push_back(kv.second);
    for (const Mat3& a : cur)
      for (const Mat3& g : generators) {
        Mat3 b = g * a;
        auto key = group_key(b);
        if (!elems.count(key)) {
          elems[key] = b;
          grew = true;
        }
        if (elems.size() > 400) throw ParameterError("group closure did not terminate");
      }
  }
  std::vector<Mat3> out;
  out.reserve(elems.size());
  for (auto& kv : elems) out.push_back(kv.second);
  return out;
}

Mat3 rot_z(double angle) {
  Mat3 R = Mat3::Identity();
  double c = std::cos(angle), s = std::sin(angle);
  R(0, 0) = c;
  R(0, 1) = -s;
  R(1, 0) = s;
  R(1, 1) = c;
  return R;
}

Mat3 mirror(int axis) {
  Mat3 R = Mat3::Identity();
  R(axis, axis) = -1;
  return R;
}

}  // namespace

Vec3 first_moment(const DensityField& rho) {
  Vec r = rho.rho();
  return rho.mesh->weight_h() * (rho.mesh->points().transpose() * r);
}

Eigen::Matrix3d second_moment(const DensityField& rho) {
  Vec r = rho.rho();
  const auto& pts = rho.mesh->points();
  Mat3 M = Mat3::Zero();
  for (int i = 0; i < rho.size(); ++i) {
    Vec3 x = pts.row(i);
    M += r[i] * x * x.transpose();
  }
  return rho.mesh->weight_h() * M;
}

namespace {

// Pooled within-bin relative scatter of rho over t = x.e; a linear trend in t
// is removed inside each bin so the binning itself does not register as
// scatter for genuinely axisymmetric profiles.
double axis_residual(const DensityField& rho, const Vec& r, const Vec3& e, int bins) {
  const auto& pts = rho.mesh->points();
  const int n = rho.size();
  std::vector<std::vector<int>> bucket(bins);
  for (int i = 0; i < n; ++i) {
    double t = std::clamp(pts.row(i).dot(e), -1.0, 1.0);
    int b = std::min(bins - 1, static_cast<int>((t + 1.0) / 2.0 * bins));
    bucket[b].push_back(i);
  }
  double weighted = 0;
  int counted = 0;
  for (const auto& idx : bucket) {
    const int m = static_cast<int>(idx.size());
    if (m < 4) continue;
    double st = 0, sr = 0, stt = 0, str = 0;
    for (int i : idx) {
      double t = pts.row(i).dot(e);
      st += t;
      sr += r[i];
      stt += t * t;
      str += t * r[i];
    }
    double mean = sr / m;
    if (mean < 1e-280) continue;  // underflowed tail, uniformly zero
    double det = stt - st * st / m;
    double beta = det > 1e-14 ? (str - st * sr / m) / det : 0.0;
    double alpha = mean - beta * st / m;
    double ss = 0;
    for (int i : idx) {
      double t = pts.row(i).dot(e);
      double d = r[i] - (alpha + beta * t);
      ss += d * d;
    }
    weighted += ss / (mean * mean);
    counted += m;
  }
  if (counted == 0) return 0;
  return std::sqrt(weighted / counted);
}

}  // namespace

AxisymmetryResult axisymmetry_test(const DensityField& rho, double tol, int bins) {
  AxisymmetryResult out;
  if (rho.uniform_deviation() < tol) {
    out.axisymmetric = true;
    out.residual = 0;
    return out;  // fully degenerate second moment: the uniform state
  }
  Vec r = rho.rho();
  std::vector<Vec3> candidates;
  Eigen::SelfAdjointEigenSolver<Mat3> es(second_moment(rho));
  for (int c = 0; c < 3; ++c) candidates.push_back(es.eigenvectors().col(c));
  Vec3 m1 = first_moment(rho);
  if (m1.norm() > 1e-6) candidates.push_back(m1.normalized());

  double best = 1e300;
  Vec3 best_axis;
  for (const Vec3& e : candidates) {
    double res = axis_residual(rho, r, e, bins);
    if (res < best) {
      best = res;
      best_axis = e;
    }
  }
  out.residual = best;
  out.axisymmetric = best < tol;
  if (out.axisymmetric) out.axis = best_axis;
  return out;
}

double interpolate_log_density(const DensityField& rho, const Vec3& q, bool* fallback) {
  FaceLocation loc = rho.mesh->locate(q.normalized());
  if (fallback) *fallback = *fallback || loc.fallback;
  const MeshFace& f = rho.mesh->leaf_faces()[loc.face];
  double w0 = std::max(0.0, loc.w[0]), w1 = std::max(0.0, loc.w[1]), w2 = std::max(0.0, loc.w[2]);
  double s = w0 + w1 + w2;
  return (w0 * rho.psi[f.v[0]] + w1 * rho.psi[f.v[1]] + w2 * rho.psi[f.v[2]]) / s;
}

double group_invariance_residual(const DensityField& rho,
                                 const std::vector<Eigen::Matrix3d>& rotations) {
  for (const auto& R : rotations) {
    if ((R * R.transpose() - Mat3::Identity()).norm() > 1e-12)
      throw ParameterError("group element is not orthogonal");
  }
  Vec r = rho.rho();
  double norm = r.norm();
  const auto& pts = rho.mesh->points();
  double worst = 0;
  Vec rot(rho.size());
  for (const auto& R : rotations) {
    for (int i = 0; i < rho.size(); ++i) {
      Vec3 q = R * Vec3(pts.row(i));
      rot[i] = std::exp(interpolate_log_density(rho, q));
    }
    worst = std::max(worst, (rot - r).norm() / norm);
  }
  return worst;
}

std::vector<Mat3> d2_group() { return close_group({rot_z(M_PI), mirror(1)}); }

std::vector<Mat3> d2nh_group(int n) {
  if (n < 1) throw ParameterError("d2nh needs n >= 1");
  return close_group({rot_z(M_PI / n), mirror(1), mirror(2)});
}

std::vector<Mat3> cubic_group() {
  Mat3 swap01 = Mat3::Zero(), swap12 = Mat3::Zero();
  swap01(0, 1) = swap01(1, 0) = swap01(2, 2) = 1;
  swap12(0, 0) = swap12(1, 2) = swap12(2, 1) = 1;
  return close_group({swap01, swap12, mirror(0)});
}

std::vector<Mat3> icosahedral_group() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Mat3 r1 = mirror(0);
  Mat3 r2;
  r2 << -phi, 1 / phi, 1, 1 / phi, -1, phi, 1, phi, 1 / phi;
  r2 *= 0.5;
  Mat3 r3 = mirror(1);
  return close_group({r1, r2, r3});
}

std::vector<Mat3> conjugate_group(const std::vector<Mat3>& group, const Mat3& frame) {
  std::vector<Mat3> out;
  out.reserve(group.size());
  for (const auto& g : group) out.push_back(frame * g * frame.transpose());
  return out;
}

std::vector<int> density_peaks(const DensityField& rho, double peak_sigma) {
  Vec r = rho.rho();
  double mean = r.mean();
  double sd = std::sqrt((r.array() - mean).square().mean());
  double floor = mean + peak_sigma * sd;
  std::vector<int> peaks;
  const auto& nb = rho.mesh->neighbors();
  for (int i = 0; i < rho.size(); ++i) {
    if (r[i] <= floor) continue;
    bool strict_max = true;
    for (int j : nb[i])
      if (r[j] >= r[i]) {
        strict_max = false;
        break;
      }
    if (strict_max) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) { return r[a] > r[b]; });
  return peaks;
}

namespace {

// Axes of all c-fold rotations in a matrix group; used to derive the
// reference polyhedra consistent with the group's own frame.
std::vector<Vec3> rotation_axes(const std::vector<Mat3>& group, int fold) {
  double want_trace = 1.0 + 2.0 * std::cos(2.0 * M_PI / fold);
  std::vector<Vec3> axes;
  for (const auto& g : group) {
    if (g.determinant() < 0) continue;
    if (std::abs(g.trace() - want_trace) > 1e-6) continue;
    // axis from the antisymmetric part (angle is never 0 or pi here)
    Vec3 axis(g(2, 1) - g(1, 2), g(0, 2) - g(2, 0), g(1, 0) - g(0, 1));
    if (axis.norm() < 1e-9) continue;
    axis.normalize();
    bool dup = false;
    for (auto& a : axes)
      if ((a - axis).norm() < 1e-6 || (a + axis).norm() < 1e-6) dup = true;
    if (!dup) axes.push_back(axis);
  }
  std::vector<Vec3> verts;
  for (const auto& a : axes) {
    verts.push_back(a);
    verts.push_back(-a);
  }
  return verts;
}

const std::vector<Vec3>& reference_vertices(SymmetryGroup g, int count) {
  static std::map<std::pair<int, int>, std::vector<Vec3>> cache;
  auto key = std::make_pair(static_cast<int>(g), count);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<Vec3> verts;
  if (g == SymmetryGroup::Cubic) {
    verts = rotation_axes(cubic_group(), count == 6 ? 4 : 3);
  } else if (g == SymmetryGroup::Icosahedral) {
    verts = rotation_axes(icosahedral_group(), count == 12 ? 5 : 3);
  }
  return cache.emplace(key, std::move(verts)).first->second;
}

// Rotation taking reference directions onto the peak constellation, found by
// matching one anchor pair and scored by nearest-vertex alignment.
struct ConstellationFit {
  Mat3 frame = Mat3::Identity();
  double score = 1e300;  // mean angular mismatch
};

Mat3 frame_from_pairs(const Vec3& a1, const Vec3& a2, const Vec3& b1, const Vec3& b2) {
  auto triad = [](const Vec3& u, const Vec3& v) {
    Mat3 T;
    T.col(0) = u;
    T.col(2) = u.cross(v).normalized();
    T.col(1) = T.col(2).cross(u);
    return T;
  };
  return triad(b1, b2) * triad(a1, a2).transpose();
}

ConstellationFit fit_constellation(const std::vector<Vec3>& peaks, const std::vector<Vec3>& ref) {
  ConstellationFit best;
  if (peaks.size() < 2 || ref.size() != peaks.size()) return best;
  const Vec3 p1 = peaks[0];
  const Vec3 p2 = peaks[1];
  double target = std::acos(std::clamp(p1.dot(p2), -1.0, 1.0));
  auto score_frame = [&](const Mat3& F) {
    double acc = 0;
    for (const auto& p : peaks) {
      double bestdot = -2;
      for (const auto& v : ref) bestdot = std::max(bestdot, p.dot(F * v));
      acc += std::acos(std::clamp(bestdot, -1.0, 1.0));
    }
    return acc / peaks.size();
  };
  for (size_t i = 0; i < ref.size(); ++i)
    for (size_t j = 0; j < ref.size(); ++j) {
      if (i == j) continue;
      double ang = std::acos(std::clamp(ref[i].dot(ref[j]), -1.0, 1.0));
      if (std::abs(ang - target) > 0.25) continue;
      Mat3 F = frame_from_pairs(ref[i], ref[j], p1, p2);
      double s = score_frame(F);
      if (s < best.score) {
        best.score = s;
        best.frame = F;
      }
    }
  if (best.score > 0.25) return best;

  // Kabsch refinement on the nearest-vertex assignment
  Mat3 C = Mat3::Zero();
  for (const auto& p : peaks) {
    int bi = 0;
    double bd = -2;
    for (size_t v = 0; v < ref.size(); ++v) {
      double d = p.dot(best.frame * ref[v]);
      if (d > bd) {
        bd = d;
        bi = static_cast<int>(v);
      }
    }
    C += p * ref[bi].transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Mat3 D = Mat3::Identity();
    D(2, 2) = -1;
    R = svd.matrixU() * D * svd.matrixV().transpose();
  }
  double s = score_frame(R);
  if (s < best.score) {
    best.score = s;
    best.frame = R;
  }
  return best;
}

struct Candidate {
  SymmetryGroup group;
  int n = 0;
  Mat3 frame;
  int order = 0;
};

}  // namespace

SymmetryLabel classify(const DensityField& rho, const SymmetryConfig& cfg) {
  SymmetryLabel label;
  double iso_dev = rho.uniform_deviation();
  if (iso_dev < cfg.iso_tol) {
    label.axisymmetric = true;
    label.group = SymmetryGroup::Isotropic;
    label.residual = iso_dev;
    return label;
  }

  AxisymmetryResult ax = axisymmetry_test(rho, cfg.axis_tol, cfg.bins);
  if (ax.axisymmetric) {
    label.axisymmetric = true;
    label.axis = ax.axis;
    label.group = SymmetryGroup::Axisymmetric;
    label.residual = ax.residual;
    return label;
  }

  std::vector<int> peak_ids = density_peaks(rho, cfg.peak_sigma);
  std::vector<Vec3> peaks;
  for (int i : peak_ids) peaks.push_back(rho.mesh->point(i));

  std::vector<Candidate> candidates;
  const size_t np = peaks.size();

  // coplanar 2n-gon on a great circle
  if (np >= 4 && np % 2 == 0 && np <= 12) {
    Mat3 scatter = Mat3::Zero();
    for (const auto& p : peaks) scatter += p * p.transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
    Vec3 normal = es.eigenvectors().col(0);
    bool coplanar = true;
    for (const auto& p : peaks)
      if (std::abs(normal.dot(p)) > 0.2) coplanar = false;
    if (coplanar) {
      Vec3 x = (peaks[0] - normal.dot(peaks[0]) * normal).normalized();
      Mat3 F;
      F.col(2) = normal;
      F.col(0) = x;
      F.col(1) = normal.cross(x);
      candidates.push_back({SymmetryGroup::D2nH, static_cast<int>(np / 2), F,
                            8 * static_cast<int>(np / 2)});
    }
  }
  if (np == 6 || np == 8) {
    auto fit = fit_constellation(peaks, reference_vertices(SymmetryGroup::Cubic,
                                                           static_cast<int>(np)));
    if (fit.score < 0.2) candidates.push_back({SymmetryGroup::Cubic, 0, fit.frame, 48});
  }
  if (np == 12 || np == 20) {
    auto fit = fit_constellation(peaks, reference_vertices(SymmetryGroup::Icosahedral,
                                                           static_cast<int>(np)));
    if (fit.score < 0.2) candidates.push_back({SymmetryGroup::Icosahedral, 0, fit.frame, 120});
  }
  // two arcs / fallback: dihedral frame from the second-moment axes
  {
    Eigen::SelfAdjointEigenSolver<Mat3> es(second_moment(rho));
    const Mat3 axes = es.eigenvectors();
    static const int perm[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
    for (const auto& pr : perm) {
      Mat3 F;
      F.col(2) = axes.col(pr[0]);
      F.col(0) = axes.col(pr[1]);
      F.col(1) = F.col(2).cross(F.col(0));
      candidates.push_back({SymmetryGroup::D2, 0, F, 4});
    }
  }

  // most specific admissible group wins; ties break toward smaller residual
  double best_res = 1e300;
  int best_order = 0;
  SymmetryLabel best;
  best.group = SymmetryGroup::Unclassified;
  best.residual = 1e300;
  for (const auto& cand : candidates) {
    std::vector<Mat3> group;
    switch (cand.group) {
      case SymmetryGroup::D2: group = d2_group(); break;
      case SymmetryGroup::D2nH: group = d2nh_group(cand.n); break;
      case SymmetryGroup::Cubic: group = cubic_group(); break;
      case SymmetryGroup::Icosahedral: group = icosahedral_group(); break;
      default: continue;
    }
    double res = group_invariance_residual(rho, conjugate_group(group, cand.frame));
    if (res >= cfg.group_tol) continue;
    if (cand.order > best_order || (cand.order == best_order && res < best_res)) {
      best_order = cand.order;
      best_res = res;
      best.group = cand.group;
      best.n = cand.n;
      best.residual = res;
    }
  }
  if (best.group == SymmetryGroup::Unclassified) best.residual = ax.residual;
  best.axisymmetric = false;
  return best;
}

std::string SymmetryLabel::name() const {
  switch (group) {
    case SymmetryGroup::Isotropic: return "Isotropic";
    case SymmetryGroup::Axisymmetric: return "Axisymmetric";
    case SymmetryGroup::D2: return "D2";
    case SymmetryGroup::D2nH: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "D2nH(%d)", n);
      return buf;
    }
    case SymmetryGroup::Cubic: return "Cubic";
    case SymmetryGroup::Icosahedral: return "Icosahedral";
    case SymmetryGroup::Unclassified: return "Unclassified";
  }
  return "?";
}

void export_grid_csv(const std::string& path, const DensityField& rho, int cols, int rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open grid file for writing: " + path);
  char buf[64];
  for (int i = 0; i < rows; ++i) {
    double phi = (i + 0.5) * M_PI / rows;  // polar angle
    for (int j = 0; j < cols; ++j) {
      double theta = (j + 0.5) * 2.0 * M_PI / cols;
      Vec3 q(std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta), std::cos(phi));
      double v = interpolate_log_density(rho, q);
      std::snprintf(buf, sizeof buf, "%.10g", v);
      out << buf << (j + 1 < cols ? "," : "\n");
    }
  }
}

}  // namespace onsager
