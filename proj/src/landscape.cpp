#include "onsager/landscape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <thread>

#include "onsager/errors.hpp"

namespace onsager {

namespace {
constexpr double kFourPi = 4.0 * M_PI;
}

bool Fingerprint::matches(const Fingerprint& other, double energy_tol, double moment_tol,
                          double density_rel_tol) const {
  if (morse_index != other.morse_index || zero_modes != other.zero_modes) return false;
  if (std::abs(energy - other.energy) > energy_tol) return false;
  for (int i = 0; i < 3; ++i)
    if (std::abs(m2_eigenvalues[i] - other.m2_eigenvalues[i]) > moment_tol) return false;
  if (std::abs(m1_norm - other.m1_norm) > moment_tol) return false;
  size_t m = std::min(top_densities.size(), other.top_densities.size());
  double scale = std::max(top_densities.empty() ? 0.0 : top_densities[0],
                          other.top_densities.empty() ? 0.0 : other.top_densities[0]);
  for (size_t i = 0; i < m; ++i)
    if (std::abs(top_densities[i] - other.top_densities[i]) > density_rel_tol * scale)
      return false;
  return true;
}

Fingerprint dedup_fingerprint(const CriticalPoint& cp) {
  Fingerprint fp;
  fp.energy = cp.energy;
  fp.morse_index = cp.morse_index;
  fp.zero_modes = cp.zero_modes;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(second_moment(cp.density));
  fp.m2_eigenvalues = es.eigenvalues();
  fp.m1_norm = first_moment(cp.density).norm();
  Vec r = cp.density.rho();
  std::vector<double> vals(r.data(), r.data() + r.size());
  std::partial_sort(vals.begin(), vals.begin() + std::min<size_t>(20, vals.size()), vals.end(),
                    std::greater<double>());
  vals.resize(std::min<size_t>(20, vals.size()));
  fp.top_densities = std::move(vals);
  return fp;
}

std::optional<int> LandscapeGraph::find_node(const Fingerprint& fp, double energy_tol,
                                             double moment_tol, double density_rel_tol) const {
  for (size_t i = 0; i < fingerprints.size(); ++i)
    if (fingerprints[i].matches(fp, energy_tol, moment_tol, density_rel_tol))
      return static_cast<int>(i);
  return std::nullopt;
}

namespace {

int insert_node(LandscapeGraph& g, CriticalPoint cp, const LandscapeConfig& lcfg, bool* is_new) {
  cp.symmetry = classify(cp.density, lcfg.symmetry);
  int expected = cp.symmetry.group == SymmetryGroup::Isotropic ? 0
                 : cp.symmetry.axisymmetric                    ? 2
                                                               : 3;
  cp.zero_mode_mismatch = cp.zero_modes != expected;
  Fingerprint fp = dedup_fingerprint(cp);
  if (auto id = g.find_node(fp, lcfg.energy_tol, lcfg.moment_tol, lcfg.density_rel_tol)) {
    if (is_new) *is_new = false;
    return *id;
  }
  g.nodes.push_back(std::move(cp));
  g.fingerprints.push_back(std::move(fp));
  if (is_new) *is_new = true;
  return static_cast<int>(g.nodes.size()) - 1;
}

void add_edge(LandscapeGraph& g, int parent, int child, int rank, int sign, bool upward) {
  for (const auto& e : g.edges)
    if (e.parent == parent && e.child == child && e.eigvec_rank == rank && e.sign == sign &&
        e.upward == upward)
      return;
  g.edges.push_back({parent, child, rank, sign, upward});
}

struct SearchJob {
  int parent = -1;
  int target_k = 0;
  int rank = 0;  // 1-based eigenvector rank of the perturbation
  int sign = +1;
  bool upward = false;
};

DensityField perturbed_start(const CriticalPoint& parent, int rank, int sign, double eps) {
  Vec psi = parent.density.psi + sign * eps * parent.eigenvectors.col(rank - 1);
  return retract(std::move(psi), parent.density.mesh);
}

// Runs a wave of jobs (possibly in parallel) and merges results in job order.
std::vector<SolveResult> run_jobs(const std::vector<SearchJob>& jobs, const LandscapeGraph& g,
                                  const KernelMatrix& K, const SaddleSearchConfig& cfg,
                                  const LandscapeConfig& lcfg) {
  std::vector<SolveResult> results(jobs.size());
  auto run_one = [&](size_t j) {
    const SearchJob& job = jobs[j];
    const CriticalPoint& parent = g.nodes[job.parent];
    DensityField start = perturbed_start(parent, job.rank, job.sign, lcfg.perturbation);
    Mat V0 = parent.eigenvectors.leftCols(std::min<int>(job.target_k,
                                                        parent.eigenvectors.cols()));
    results[j] = solve_to_critical(start, job.target_k, V0, K, cfg);
  };
  int jobs_n = std::max(1, lcfg.jobs);
  if (jobs_n == 1 || jobs.size() <= 1) {
    for (size_t j = 0; j < jobs.size(); ++j) run_one(j);
  } else {
    for (size_t base = 0; base < jobs.size(); base += jobs_n) {
      std::vector<std::thread> pool;
      for (size_t j = base; j < std::min(jobs.size(), base + jobs_n); ++j)
        pool.emplace_back(run_one, j);
      for (auto& t : pool) t.join();
    }
  }
  return results;
}

// Shared handling of a finished solve: dedup, node/edge insertion, logging.
// Returns the node id if the solve produced a certified point.
std::optional<int> absorb_result(LandscapeGraph& g, const SearchJob& job, SolveResult& res,
                                 const LandscapeConfig& lcfg, std::vector<int>* new_ids) {
  SearchLogEntry log;
  log.parent = job.parent;
  log.target_k = job.target_k;
  log.eigvec_rank = job.rank;
  log.sign = job.sign;
  log.upward = job.upward;
  log.steps = res.steps;
  log.final_grad_norm = res.final_grad_norm;
  if (!res.converged) {
    log.outcome = "diverged";
    g.search_log.push_back(log);
    return std::nullopt;
  }
  bool is_new = false;
  int id = insert_node(g, std::move(*res.point), lcfg, &is_new);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s:%d", is_new ? "new" : "known", id);
  log.outcome = buf;
  int pidx = g.nodes[job.parent].morse_index;
  int cidx = g.nodes[id].morse_index;
  bool edge_ok = job.upward ? (cidx > pidx) : (cidx < pidx);
  if (id != job.parent && edge_ok) add_edge(g, job.parent, id, job.rank, job.sign, job.upward);
  if (id != job.parent && !edge_ok) log.outcome += ",index-order";
  g.search_log.push_back(log);
  if (is_new && new_ids) new_ids->push_back(id);
  return id;
}

}  // namespace

std::vector<int> downward_search(int parent_id, LandscapeGraph& graph, const KernelMatrix& K,
                                 const SaddleSearchConfig& cfg, const LandscapeConfig& lcfg) {
  const CriticalPoint& parent = graph.nodes[parent_id];
  const int m = parent.morse_index;
  if (m < 1) throw ParameterError("downward search needs an unstable parent");
  std::vector<SearchJob> jobs;
  for (int k = m - 1; k >= 0; --k)
    for (int sign : {+1, -1}) jobs.push_back({parent_id, k, k + 1, sign, false});

  if (lcfg.prune_duplicates) {
    // heuristic: drop jobs whose perturbed start already matches a known node
    std::vector<SearchJob> kept;
    for (const auto& job : jobs) {
      CriticalPoint probe;
      probe.density = perturbed_start(graph.nodes[job.parent], job.rank, job.sign,
                                      lcfg.perturbation);
      probe.energy = energy(probe.density, K);
      probe.morse_index = job.target_k;
      probe.zero_modes = -1;
      bool skip = false;
      Fingerprint fp = dedup_fingerprint(probe);
      for (size_t i = 0; i < graph.fingerprints.size(); ++i) {
        const Fingerprint& nfp = graph.fingerprints[i];
        if (nfp.morse_index != job.target_k) continue;
        if (std::abs(nfp.energy - fp.energy) > 100 * lcfg.energy_tol) continue;
        if ((nfp.m2_eigenvalues - fp.m2_eigenvalues).cwiseAbs().maxCoeff() >
            10 * lcfg.moment_tol)
          continue;
        skip = true;
        break;
      }
      if (!skip)
        kept.push_back(job);
      else
        graph.search_log.push_back({job.parent, job.target_k, job.rank, job.sign, false,
                                    "skipped", 0, 0.0});
    }
    jobs = std::move(kept);
  }

  std::vector<SolveResult> results = run_jobs(jobs, graph, K, cfg, lcfg);
  std::vector<int> new_ids;
  for (size_t j = 0; j < jobs.size(); ++j) absorb_result(graph, jobs[j], results[j], lcfg, &new_ids);
  return new_ids;
}

std::vector<int> upward_search(int start_id, LandscapeGraph& graph, const KernelMatrix& K,
                               const SaddleSearchConfig& cfg, const LandscapeConfig& lcfg) {
  std::vector<int> all_new;
  std::deque<int> pending{start_id};
  while (!pending.empty()) {
    int cur = pending.front();
    pending.pop_front();
    const CriticalPoint& node = graph.nodes[cur];
    int k_up = node.morse_index + node.zero_modes + 1;
    if (k_up > lcfg.max_index) continue;
    if (node.eigenvectors.cols() < k_up) continue;

    std::vector<SearchJob> jobs;
    for (int sign : {+1, -1}) jobs.push_back({cur, k_up, k_up, sign, true});
    std::vector<SolveResult> results = run_jobs(jobs, graph, K, cfg, lcfg);
    for (size_t j = 0; j < jobs.size(); ++j) {
      std::vector<int> new_ids;
      absorb_result(graph, jobs[j], results[j], lcfg, &new_ids);
      for (int id : new_ids) {
        all_new.push_back(id);
        if (graph.nodes[id].morse_index > node.morse_index) pending.push_back(id);
      }
    }
  }
  return all_new;
}

namespace {

// The sampled uniform state is critical only up to quadrature error; it is
// polished onto the exact discrete critical point at its estimated index.
std::optional<int> seed_isotropic(LandscapeGraph& g, const KernelMatrix& K,
                                  const SaddleSearchConfig& cfg, const LandscapeConfig& lcfg) {
  DensityField iso = isotropic_state(K.mesh);
  IndexCertificate est = compute_index(iso, K, cfg);
  SolveResult res =
      solve_to_critical(iso, est.morse_index, est.eigenvectors.leftCols(est.morse_index), K, cfg);
  if (!res.converged) {
    g.search_log.push_back({-1, est.morse_index, 0, 0, false, "iso-diverged", res.steps,
                            res.final_grad_norm});
    return std::nullopt;
  }
  bool is_new = false;
  int id = insert_node(g, std::move(*res.point), lcfg, &is_new);
  return id;
}

void downward_phase(LandscapeGraph& g, const KernelMatrix& K, const SaddleSearchConfig& cfg,
                    const LandscapeConfig& lcfg) {
  std::deque<int> queue;
  std::vector<char> queued(g.nodes.size(), 0);
  for (size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].morse_index >= 1) {
      queue.push_back(static_cast<int>(i));
      queued[i] = 1;
    }
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    std::vector<int> found = downward_search(id, g, K, cfg, lcfg);
    queued.resize(g.nodes.size(), 0);
    for (int f : found)
      if (g.nodes[f].morse_index >= 1 && !queued[f]) {
        queue.push_back(f);
        queued[f] = 1;
      }
  }
}

}  // namespace

LandscapeGraph build_landscape(const KernelMatrix& K, const SaddleSearchConfig& cfg,
                               const LandscapeConfig& lcfg) {
  LandscapeGraph g;
  g.spec = K.spec;
  std::optional<int> iso = seed_isotropic(g, K, cfg, lcfg);
  if (iso) upward_search(*iso, g, K, cfg, lcfg);
  downward_phase(g, K, cfg, lcfg);
  return g;
}

LandscapeGraph build_landscape_warm(const KernelMatrix& K, const SaddleSearchConfig& cfg,
                                    const LandscapeConfig& lcfg,
                                    const std::vector<CriticalPoint>& warm) {
  LandscapeGraph g;
  g.spec = K.spec;
  for (const auto& w : warm) {
    Mat V0 = w.eigenvectors.leftCols(std::min<int>(w.morse_index, w.eigenvectors.cols()));
    SolveResult res = solve_to_critical(w.density, w.morse_index, V0, K, cfg);
    SearchLogEntry log{-1, w.morse_index, 0, 0, false, "warm-diverged", res.steps,
                       res.final_grad_norm};
    if (res.converged) {
      bool is_new = false;
      int id = insert_node(g, std::move(*res.point), lcfg, &is_new);
      char buf[64];
      std::snprintf(buf, sizeof buf, "warm-%s:%d", is_new ? "new" : "known", id);
      log.outcome = buf;
    }
    g.search_log.push_back(log);
  }
  std::optional<int> iso = seed_isotropic(g, K, cfg, lcfg);
  if (iso) upward_search(*iso, g, K, cfg, lcfg);
  downward_phase(g, K, cfg, lcfg);
  return g;
}

BifurcationTable sweep_parameter(const std::string& parameter_name,
                                 const std::vector<double>& values,
                                 const std::function<KernelMatrix(double)>& kernel_factory,
                                 const SaddleSearchConfig& cfg, const LandscapeConfig& lcfg) {
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] <= values[i - 1])
      throw ParameterError("sweep parameter values must be strictly increasing");

  BifurcationTable table;
  table.parameter_name = parameter_name;
  int next_track = 0;

  for (size_t s = 0; s < values.size(); ++s) {
    KernelMatrix K = kernel_factory(values[s]);
    LandscapeGraph g = s == 0 ? build_landscape(K, cfg, lcfg)
                              : build_landscape_warm(K, cfg, lcfg, table.graphs.back().nodes);

    BifurcationSample sample;
    sample.parameter = values[s];
    std::vector<int> track(g.nodes.size(), -1);

    if (s > 0) {
      const LandscapeGraph& prev = table.graphs.back();
      const BifurcationSample& prev_sample = table.samples.back();
      // greedy nearest matching on L2 density distance
      struct Pair {
        double d;
        int a, b;
      };
      std::vector<Pair> pairs;
      double h = K.h();
      for (size_t a = 0; a < prev.nodes.size(); ++a)
        for (size_t b = 0; b < g.nodes.size(); ++b) {
          double d = std::sqrt(h) *
                     (prev.nodes[a].density.rho() - g.nodes[b].density.rho()).norm();
          double scale = std::max(std::sqrt(h) * prev.nodes[a].density.rho().norm(),
                                  std::sqrt(h) * g.nodes[b].density.rho().norm());
          if (d <= 0.3 * scale) pairs.push_back({d, static_cast<int>(a), static_cast<int>(b)});
        }
      std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.d < y.d; });
      std::vector<char> used_a(prev.nodes.size(), 0), used_b(g.nodes.size(), 0);
      for (const auto& p : pairs) {
        if (used_a[p.a] || used_b[p.b]) continue;
        used_a[p.a] = used_b[p.b] = 1;
        track[p.b] = prev_sample.track_ids[p.a];
        if (prev.nodes[p.a].morse_index != g.nodes[p.b].morse_index)
          table.events.push_back({values[s - 1], values[s], track[p.b], "index-change",
                                  prev.nodes[p.a].morse_index, g.nodes[p.b].morse_index});
      }
      for (size_t a = 0; a < prev.nodes.size(); ++a)
        if (!used_a[a])
          table.events.push_back({values[s - 1], values[s], prev_sample.track_ids[a], "vanished",
                                  prev.nodes[a].morse_index, -1});
      for (size_t b = 0; b < g.nodes.size(); ++b)
        if (!used_b[b]) {
          track[b] = next_track++;
          table.events.push_back({values[s - 1], values[s], track[b], "appeared", -1,
                                  g.nodes[b].morse_index});
        }
    }
    for (size_t b = 0; b < g.nodes.size(); ++b)
      if (track[b] < 0) track[b] = next_track++;

    for (size_t b = 0; b < g.nodes.size(); ++b) {
      sample.track_ids.push_back(track[b]);
      sample.indices.push_back(g.nodes[b].morse_index);
      sample.energies.push_back(g.nodes[b].energy);
      sample.node_ids.push_back(static_cast<int>(b));
    }
    table.samples.push_back(std::move(sample));
    table.graphs.push_back(std::move(g));
  }
  return table;
}

}  // namespace onsager
