#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "onsager/dynamics.hpp"
#include "onsager/symmetry.hpp"

namespace onsager {

/// Rotation-invariant summary used to identify critical points that differ
/// only by a rotation: energy, index, zero modes, second-moment spectrum,
/// first-moment norm, and the largest node densities.
struct Fingerprint {
  double energy = 0;
  int morse_index = 0;
  int zero_modes = 0;
  Eigen::Vector3d m2_eigenvalues{0, 0, 0};  // ascending
  double m1_norm = 0;
  std::vector<double> top_densities;  // descending, up to 20

  bool matches(const Fingerprint& other, double energy_tol, double moment_tol,
               double density_rel_tol) const;
};

Fingerprint dedup_fingerprint(const CriticalPoint& cp);

struct LandscapeEdge {
  int parent = -1;
  int child = -1;
  int eigvec_rank = 0;  // 1-based rank of the perturbation eigenvector
  int sign = +1;
  bool upward = false;
};

struct SearchLogEntry {
  int parent = -1;
  int target_k = 0;
  int eigvec_rank = 0;
  int sign = +1;
  bool upward = false;
  std::string outcome;  // "new:<id>", "known:<id>", "diverged", "index-order", "skipped"
  int steps = 0;
  double final_grad_norm = 0;
};

struct LandscapeGraph {
  KernelSpec spec;
  std::vector<CriticalPoint> nodes;
  std::vector<LandscapeEdge> edges;
  std::vector<SearchLogEntry> search_log;

  std::optional<int> find_node(const Fingerprint& fp, double energy_tol, double moment_tol,
                               double density_rel_tol) const;
  std::vector<Fingerprint> fingerprints;  // parallel to nodes
};

struct LandscapeConfig {
  double perturbation = 0.05;  // applied in log-density space along unit eigenvectors
  double energy_tol = 1e-6;
  double moment_tol = 1e-4;
  double density_rel_tol = 0.05;
  int max_index = 30;
  int jobs = 1;               // solver instances per search wave
  bool prune_duplicates = false;
  SymmetryConfig symmetry;
};

/// Downward search from an index-m saddle: for every target k = m-1..0 and
/// both perturbation signs, index-k dynamics started from the state perturbed
/// along eigenvector k+1 with initial directions u_1..u_k. Found points are
/// recorded on the graph; new saddles are queued recursively by the caller.
std::vector<int> downward_search(int parent_id, LandscapeGraph& graph, const KernelMatrix& K,
                                 const SaddleSearchConfig& cfg, const LandscapeConfig& lcfg);

/// Upward search from a certified point with m negative and z zero
/// eigenvalues: (m+z+1)-index dynamics from the state perturbed along the
/// first ascending stable direction, both signs, repeated from any
/// higher-index find until none appears. Returns ids of new nodes.
std::vector<int> upward_search(int start_id, LandscapeGraph& graph, const KernelMatrix& K,
                               const SaddleSearchConfig& cfg, const LandscapeConfig& lcfg);

/// Seeds the uniform state, runs the upward chain to the highest connected
/// saddles, then exhaustive downward searches from every saddle node.
LandscapeGraph build_landscape(const KernelMatrix& K, const SaddleSearchConfig& cfg,
                               const LandscapeConfig& lcfg);

/// Same search phases, but the registry is pre-seeded with `warm` states
/// re-solved at their certified indices (parameter-sweep continuation).
LandscapeGraph build_landscape_warm(const KernelMatrix& K, const SaddleSearchConfig& cfg,
                                    const LandscapeConfig& lcfg,
                                    const std::vector<CriticalPoint>& warm);

struct BifurcationSample {
  double parameter = 0;
  std::vector<int> track_ids;   // persistent across samples
  std::vector<int> indices;
  std::vector<double> energies;
  std::vector<int> node_ids;    // into the per-sample graph
};

struct BifurcationEvent {
  double param_lo = 0, param_hi = 0;
  int track_id = -1;
  std::string kind;  // "index-change", "appeared", "vanished"
  int index_before = -1, index_after = -1;
};

struct BifurcationTable {
  std::string parameter_name;
  std::vector<BifurcationSample> samples;
  std::vector<BifurcationEvent> events;
  std::vector<LandscapeGraph> graphs;  // one per sample
};

/// Pointwise re-solves over a strictly increasing parameter list, each sample
/// warm-started from the previous sample's nodes. States are matched across
/// samples by density distance to maintain persistent track ids; index
/// changes between consecutive samples bracket bifurcations.
BifurcationTable sweep_parameter(const std::string& parameter_name,
                                 const std::vector<double>& values,
                                 const std::function<KernelMatrix(double)>& kernel_factory,
                                 const SaddleSearchConfig& cfg, const LandscapeConfig& lcfg);

}  // namespace onsager
