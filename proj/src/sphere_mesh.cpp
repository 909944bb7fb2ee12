#include "onsager/sphere_mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "onsager/errors.hpp"

namespace onsager {

namespace {

constexpr double kFourPi = 4.0 * M_PI;

struct BuildState {
  std::vector<Vec3> points;
  std::vector<int> generation;
  std::vector<std::vector<MeshFace>> faces;
};

BuildState build_icosahedron() {
  BuildState s;
  const double z0 = 1.0 / std::sqrt(5.0);
  const double c0 = 2.0 / std::sqrt(5.0);
  s.points.push_back(Vec3(0, 0, 1));
  for (int k = 0; k < 5; ++k) {
    double a = 2.0 * M_PI * k / 5.0;
    s.points.push_back(Vec3(c0 * std::cos(a), c0 * std::sin(a), z0));
  }
  for (int k = 0; k < 5; ++k) {
    double a = 2.0 * M_PI * k / 5.0 + M_PI / 5.0;
    s.points.push_back(Vec3(c0 * std::cos(a), c0 * std::sin(a), -z0));
  }
  s.points.push_back(Vec3(0, 0, -1));
  s.generation.assign(12, 0);

  std::vector<MeshFace> base;
  auto add = [&base](int a, int b, int c) {
    MeshFace f;
    f.v = {a, b, c};
    base.push_back(f);
  };
  for (int k = 0; k < 5; ++k) {
    int k1 = (k + 1) % 5;
    add(0, 1 + k, 1 + k1);            // top fan
    add(1 + k, 6 + k, 1 + k1);        // upper strip
    add(1 + k1, 6 + k, 6 + k1);       // lower strip
    add(11, 6 + k1, 6 + k);           // bottom fan
  }
  s.faces.push_back(std::move(base));
  return s;
}

void subdivide_once(BuildState& s, int gen) {
  const auto& parent = s.faces.back();
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec3 m = (s.points[a] + s.points[b]).normalized();
    int id = static_cast<int>(s.points.size());
    s.points.push_back(m);
    s.generation.push_back(gen);
    midpoint.emplace(key, id);
    return id;
  };

  std::vector<MeshFace> child;
  child.reserve(parent.size() * 4);
  // children stored contiguously so parents can link by position
  std::vector<MeshFace> updated_parent = parent;
  for (size_t f = 0; f < parent.size(); ++f) {
    int a = parent[f].v[0], b = parent[f].v[1], c = parent[f].v[2];
    int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    int base = static_cast<int>(child.size());
    auto push = [&child](int x, int y, int z) {
      MeshFace g;
      g.v = {x, y, z};
      child.push_back(g);
    };
    push(a, ab, ca);
    push(ab, b, bc);
    push(ca, bc, c);
    push(ab, bc, ca);
    updated_parent[f].child = {base, base + 1, base + 2, base + 3};
  }
  s.faces.back() = std::move(updated_parent);
  s.faces.push_back(std::move(child));
}

// Canonical node order: by generation, then lexicographic (x, y, z).
std::vector<int> canonical_permutation(const BuildState& s) {
  std::vector<int> order(s.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (s.generation[i] != s.generation[j]) return s.generation[i] < s.generation[j];
    const Vec3 &a = s.points[i], &b = s.points[j];
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
  });
  return order;
}

std::array<double, 3> barycentric(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  Eigen::Matrix3d T;
  T.col(0) = a;
  T.col(1) = b;
  T.col(2) = c;
  Vec3 w = T.partialPivLu().solve(q);
  double sum = w.sum();
  if (std::abs(sum) < 1e-300) return {-1, -1, -1};
  w /= sum;
  return {w[0], w[1], w[2]};
}

}  // namespace

SphereMesh SphereMesh::icosphere(int level) {
  if (level < 0 || level > 7) throw ParameterError("icosphere level must be in [0, 7]");
  BuildState s = build_icosahedron();
  for (int l = 0; l < level; ++l) subdivide_once(s, l + 1);

  std::vector<int> order = canonical_permutation(s);
  std::vector<int> inverse(order.size());
  for (size_t i = 0; i < order.size(); ++i) inverse[order[i]] = static_cast<int>(i);

  SphereMesh mesh;
  mesh.level_ = level;
  mesh.points_.resize(static_cast<int>(s.points.size()), 3);
  for (size_t i = 0; i < order.size(); ++i) mesh.points_.row(static_cast<int>(i)) = s.points[order[i]];
  mesh.weight_h_ = kFourPi / mesh.size();
  mesh.faces_ = std::move(s.faces);
  for (auto& lvl : mesh.faces_)
    for (auto& f : lvl)
      for (int& v : f.v) v = inverse[v];
  mesh.build_topology();
  mesh.thomson_energy_ = coulomb_energy(mesh.points_);
  return mesh;
}

SphereMesh SphereMesh::from_points(int level, const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts,
                                   double thomson_energy) {
  SphereMesh mesh = icosphere(level);
  if (pts.rows() != mesh.points_.rows())
    throw ParameterError("point count does not match the subdivision level");
  mesh.points_ = pts;
  mesh.thomson_energy_ = thomson_energy;
  return mesh;
}

void SphereMesh::build_topology() {
  neighbors_.assign(size(), {});
  for (const auto& f : leaf_faces()) {
    for (int e = 0; e < 3; ++e) {
      int a = f.v[e], b = f.v[(e + 1) % 3];
      auto& na = neighbors_[a];
      if (std::find(na.begin(), na.end(), b) == na.end()) na.push_back(b);
      auto& nb = neighbors_[b];
      if (std::find(nb.begin(), nb.end(), a) == nb.end()) nb.push_back(a);
    }
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());
}

FaceLocation SphereMesh::locate(const Vec3& q) const {
  auto centroid = [this](const MeshFace& f) {
    return (point(f.v[0]) + point(f.v[1]) + point(f.v[2])).normalized();
  };
  auto bary = [this, &q](const MeshFace& f) {
    return barycentric(q, point(f.v[0]), point(f.v[1]), point(f.v[2]));
  };
  auto contains = [](const std::array<double, 3>& w) {
    return w[0] >= -1e-9 && w[1] >= -1e-9 && w[2] >= -1e-9;
  };

  // best base face, then descend by child centroid
  int best = 0;
  double best_dot = -2;
  for (size_t f = 0; f < faces_[0].size(); ++f) {
    double d = centroid(faces_[0][f]).dot(q);
    if (d > best_dot) {
      best_dot = d;
      best = static_cast<int>(f);
    }
  }
  int base_face = best;
  int cur = best;
  for (size_t lvl = 0; lvl + 1 < faces_.size(); ++lvl) {
    const MeshFace& f = faces_[lvl][cur];
    int pick = -1;
    double pd = -2;
    for (int c : f.child) {
      double d = centroid(faces_[lvl + 1][c]).dot(q);
      if (d > pd) {
        pd = d;
        pick = c;
      }
    }
    cur = pick;
  }

  FaceLocation loc;
  loc.face = cur;
  loc.w = bary(faces_.back()[cur]);
  if (contains(loc.w)) return loc;

  // descent missed near an edge: search the whole base-face subtree
  std::vector<int> frontier{base_face};
  for (size_t lvl = 0; lvl + 1 < faces_.size(); ++lvl) {
    std::vector<int> next;
    for (int f : frontier)
      for (int c : faces_[lvl][f].child) next.push_back(c);
    frontier = std::move(next);
  }
  double best_min_w = -1e300;
  for (int f : frontier) {
    auto w = bary(faces_.back()[f]);
    double mw = std::min({w[0], w[1], w[2]});
    if (mw > best_min_w) {
      best_min_w = mw;
      loc.face = f;
      loc.w = w;
    }
    if (mw >= -1e-9) return loc;
  }

  // nearest leaf overall (flagged)
  for (size_t f = 0; f < faces_.back().size(); ++f) {
    auto w = bary(faces_.back()[f]);
    double mw = std::min({w[0], w[1], w[2]});
    if (mw > best_min_w) {
      best_min_w = mw;
      loc.face = static_cast<int>(f);
      loc.w = w;
    }
  }
  loc.fallback = true;
  return loc;
}

void SphereMesh::check_invariants() const {
  for (int i = 0; i < size(); ++i)
    if (std::abs(points_.row(i).norm() - 1.0) > 1e-12)
      throw ParameterError("mesh node off the unit sphere");
  if (std::abs(weight_h_ * size() - kFourPi) > 1e-12)
    throw ParameterError("quadrature weight does not normalize to 4*pi");
  double floor = 0.5 * std::sqrt(kFourPi / size());
  if (min_pairwise_distance() <= floor)
    throw ParameterError("mesh spacing below the quasi-uniformity floor");
}

double SphereMesh::min_pairwise_distance() const {
  double best = 1e300;
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j)
      best = std::min(best, (points_.row(i) - points_.row(j)).norm());
  return best;
}

void SphereMesh::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open mesh file for writing: " + path);
  char buf[128];
  out << "# sphere mesh\n";
  out << "N " << size() << "\n";
  out << "level " << level_ << "\n";
  std::snprintf(buf, sizeof buf, "h %.17g\n", weight_h_);
  out << buf;
  std::snprintf(buf, sizeof buf, "thomson_energy %.17g\n", thomson_energy_);
  out << buf;
  for (int i = 0; i < size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", points_(i, 0), points_(i, 1),
                  points_(i, 2));
    out << buf;
  }
}

SphereMesh SphereMesh::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  std::string line, key;
  int n = -1, level = -1;
  double energy = 0;
  std::getline(in, line);  // comment
  for (int row = 0; row < 4; ++row) {
    std::getline(in, line);
    std::istringstream ss(line);
    ss >> key;
    if (key == "N")
      ss >> n;
    else if (key == "level")
      ss >> level;
    else if (key == "thomson_energy")
      ss >> energy;
    // h is recomputed from N
  }
  if (n <= 0 || level < 0) throw IoError("malformed mesh header: " + path);
  Eigen::Matrix<double, Eigen::Dynamic, 3> pts(n, 3);
  for (int i = 0; i < n; ++i) {
    if (!(in >> pts(i, 0) >> pts(i, 1) >> pts(i, 2)))
      throw IoError("truncated mesh file: " + path);
  }
  return from_points(level, pts, energy);
}

double coulomb_energy(const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts) {
  const int n = static_cast<int>(pts.rows());
  std::vector<double> partial(n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double acc = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      acc += 1.0 / (pts.row(i) - pts.row(j)).norm();
    }
    partial[i] = acc;
  }
  double e = 0;
  for (double v : partial) e += v;
  return 0.5 * e;
}

namespace {

// per-node energy contributions and tangential forces in one pass
void coulomb_forces(const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts,
                    Eigen::Matrix<double, Eigen::Dynamic, 3>& force, std::vector<double>& node_e) {
  const int n = static_cast<int>(pts.rows());
  bool degenerate = false;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    Vec3 f(0, 0, 0);
    double acc = 0;
    const Vec3 xi = pts.row(i);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      Vec3 d = xi - Vec3(pts.row(j));
      double r2 = d.squaredNorm();
      if (r2 < 1e-24) {
        degenerate = true;
        continue;
      }
      double inv = 1.0 / std::sqrt(r2);
      acc += inv;
      f += d * (inv * inv * inv);
    }
    f -= xi * f.dot(xi);  // tangential component
    force.row(i) = f;
    node_e[i] = acc;
  }
  if (degenerate)
    throw DegenerateConfigError("two points coincide during Thomson relaxation");
}

}  // namespace

ThomsonResult thomson_minimize(Eigen::Matrix<double, Eigen::Dynamic, 3> pts, int max_iters,
                               double rel_tol) {
  if (rel_tol <= 0) throw ParameterError("thomson rel_tol must be positive");
  const int n = static_cast<int>(pts.rows());
  ThomsonResult res;
  Eigen::Matrix<double, Eigen::Dynamic, 3> force(n, 3), trial(n, 3);
  std::vector<double> node_e(n);

  double energy = coulomb_energy(pts);
  res.energy_trace.push_back(energy);
  double step = -1;

  for (int it = 0; it < max_iters; ++it) {
    coulomb_forces(pts, force, node_e);
    double fmax = force.rowwise().norm().maxCoeff();
    if (fmax == 0) break;
    if (step < 0) step = 0.05 * std::sqrt(4.0 * M_PI / n) / fmax;

    double new_energy = 0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int i = 0; i < n; ++i) trial.row(i) = (pts.row(i) + step * force.row(i)).normalized();
      new_energy = coulomb_energy(trial);
      if (new_energy < energy) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent direction at line-search resolution

    pts.swap(trial);
    res.iterations = it + 1;
    double decrease = (energy - new_energy) / std::abs(new_energy);
    energy = new_energy;
    res.energy_trace.push_back(energy);
    step *= 1.1;
    if (decrease < rel_tol) break;
  }
  res.points = std::move(pts);
  res.energy = energy;
  return res;
}

SphereMesh thomson_relax(const SphereMesh& mesh, int max_iters, double rel_tol) {
  ThomsonResult r = thomson_minimize(mesh.points(), max_iters, rel_tol);
  for (size_t i = 1; i < r.energy_trace.size(); ++i) {
    if (r.energy_trace[i] > r.energy_trace[i - 1])
      throw DegenerateConfigError("Thomson energy increased during relaxation");
  }
  return SphereMesh::from_points(mesh.level(), r.points, r.energy);
}

}  // namespace onsager
