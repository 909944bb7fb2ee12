#pragma once

#include <Eigen/Core>

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace onsager {

using Vec3 = Eigen::Vector3d;

/// One triangular face of the subdivided icosahedron. Children index into the
/// face list of the next subdivision level (-1 on the finest level).
struct MeshFace {
  std::array<int, 3> v{-1, -1, -1};
  std::array<int, 4> child{-1, -1, -1, -1};
};

/// Result of locating a direction on the mesh: containing (or nearest) leaf
/// face plus normalized barycentric weights of the query inside it.
struct FaceLocation {
  int face = -1;
  std::array<double, 3> w{0, 0, 0};
  bool fallback = false;  // true if the hierarchy descent missed and we used nearest-face search
};

/// Quasi-uniform point set on the unit sphere obtained by recursive midpoint
/// subdivision of a regular icosahedron, optionally relaxed by minimizing the
/// pairwise Coulomb (Thomson) energy. Every node carries the equal quadrature
/// weight h = 4*pi/N. Immutable after construction.
class SphereMesh {
 public:
  /// Recursive icosahedron subdivision; N = 10*4^level + 2 nodes.
  /// Node order is canonical: by subdivision generation, then lexicographic
  /// by (x, y, z). One base vertex sits at the north pole.
  static SphereMesh icosphere(int level);

  /// Rebuilds the subdivision topology for `level` and replaces the node
  /// coordinates (used when loading a relaxed mesh from file).
  static SphereMesh from_points(int level, const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts,
                                double thomson_energy);

  int size() const { return static_cast<int>(points_.rows()); }
  int level() const { return level_; }
  double weight_h() const { return weight_h_; }
  double thomson_energy() const { return thomson_energy_; }

  const Eigen::Matrix<double, Eigen::Dynamic, 3>& points() const { return points_; }
  Vec3 point(int i) const { return points_.row(i); }

  /// Faces of the finest subdivision level.
  const std::vector<MeshFace>& leaf_faces() const { return faces_.back(); }

  /// 1-ring node neighborhoods (built on first use at construction).
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }

  /// Locates the leaf face containing direction q (unit vector) by descending
  /// the subdivision hierarchy; falls back to a search over the candidate
  /// base-face subtree, then over all leaves.
  FaceLocation locate(const Vec3& q) const;

  /// Validates unit norms, weight normalization, and the quasi-uniform
  /// minimum-spacing floor; throws on violation.
  void check_invariants() const;

  double min_pairwise_distance() const;

  void save(const std::string& path) const;
  static SphereMesh load(const std::string& path);

 private:
  SphereMesh() = default;
  void build_topology();  // faces per level + neighbors, from level_ alone

  Eigen::Matrix<double, Eigen::Dynamic, 3> points_;
  double weight_h_ = 0;
  int level_ = 0;
  double thomson_energy_ = 0;
  std::vector<std::vector<MeshFace>> faces_;  // per subdivision level
  std::vector<std::vector<int>> neighbors_;
};

/// Pairwise inverse-distance energy sum_{i<j} 1/|x_i - x_j|.
double coulomb_energy(const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts);

struct ThomsonResult {
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;
  double energy = 0;
  int iterations = 0;
  std::vector<double> energy_trace;
};

/// Projected gradient descent with backtracking line search on the Thomson
/// energy; points stay on the sphere by renormalization after each move.
/// Stops when the relative energy decrease per iteration drops below rel_tol.
/// Throws DegenerateConfigError if two points collide.
ThomsonResult thomson_minimize(Eigen::Matrix<double, Eigen::Dynamic, 3> pts, int max_iters,
                               double rel_tol);

/// Thomson relaxation of a mesh; node order is preserved.
SphereMesh thomson_relax(const SphereMesh& mesh, int max_iters = 2000, double rel_tol = 1e-12);

}  // namespace onsager
