#include "onsager/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "onsager/errors.hpp"

namespace onsager {

using nlohmann::json;

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!key.empty()) cfg.values[key] = value;
  }
  return cfg;
}

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : std::stod(it->second);
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : std::stoi(it->second);
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  for (const auto& [k, v] : values) out << k << "=" << v << "\n";
  return out.str();
}

std::string RunConfig::hash() const {
  // FNV-1a, 64 bit
  std::string s = canonical();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

KernelSpec RunConfig::kernel_spec() const {
  KernelSpec spec;
  spec.kind = kernel_kind_from_name(get("kernel", "dipolar"));
  spec.sigma = get_double("sigma", 0);
  spec.kappa = get_double("kappa", 0);
  spec.mu = get_double("mu", 0);
  spec.tau = get_double("tau", 1);
  spec.validate();
  return spec;
}

SaddleSearchConfig RunConfig::saddle_config() const {
  SaddleSearchConfig c;
  c.index_k = get_int("index_k", c.index_k);
  c.dt = get_double("dt", c.dt);
  c.dt_gradient_flow = get_double("dt_gradient_flow", c.dt_gradient_flow);
  c.grad_tol = get_double("grad_tol", c.grad_tol);
  c.max_steps = get_int("max_steps", c.max_steps);
  c.newton_tol = get_double("newton_tol", c.newton_tol);
  c.newton_max = get_int("newton_max", c.newton_max);
  c.eig_tol = get_double("eig_tol", c.eig_tol);
  c.eig_block_extra = get_int("eig_block_extra", c.eig_block_extra);
  c.eig_inner_iters = get_int("eig_inner_iters", c.eig_inner_iters);
  c.cap_M = get_double("cap_M", c.cap_M);
  c.zero_thresh_zeta = get_double("zero_thresh_zeta", c.zero_thresh_zeta);
  c.seed = static_cast<unsigned>(get_int("seed", static_cast<int>(c.seed)));
  c.max_index_cap = get_int("max_index_cap", c.max_index_cap);
  return c;
}

LandscapeConfig RunConfig::landscape_config() const {
  LandscapeConfig c;
  c.perturbation = get_double("perturbation", c.perturbation);
  c.energy_tol = get_double("dedup_energy_tol", c.energy_tol);
  c.moment_tol = get_double("dedup_moment_tol", c.moment_tol);
  c.density_rel_tol = get_double("dedup_density_rel_tol", c.density_rel_tol);
  c.max_index = get_int("max_search_index", c.max_index);
  c.jobs = get_int("jobs", c.jobs);
  c.prune_duplicates = get_int("prune_duplicates", c.prune_duplicates ? 1 : 0) != 0;
  c.symmetry.bins = get_int("axis_bins", c.symmetry.bins);
  c.symmetry.axis_tol = get_double("axis_tol", c.symmetry.axis_tol);
  c.symmetry.iso_tol = get_double("iso_tol", c.symmetry.iso_tol);
  c.symmetry.group_tol = get_double("group_tol", c.symmetry.group_tol);
  return c;
}

namespace {

json config_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.values) j[k] = v;
  return j;
}

json kernel_json(const KernelSpec& spec) {
  return {{"kind", kernel_kind_name(spec.kind)},
          {"sigma", spec.sigma},
          {"kappa", spec.kappa},
          {"mu", spec.mu},
          {"tau", spec.tau}};
}

}  // namespace

void write_run_record(const std::string& path, const RunConfig& cfg,
                      const std::vector<std::string>& artifacts) {
  json j;
  j["config"] = config_json(cfg);
  j["config_hash"] = cfg.hash();
  j["artifacts"] = artifacts;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open run record for writing: " + path);
  out << j.dump(2) << "\n";
}

void save_critical_point_sidecar(const std::string& path, const CriticalPoint& cp,
                                 const std::string& config_hash) {
  json j;
  j["energy"] = cp.energy;
  j["index"] = cp.morse_index;
  j["zero_modes"] = cp.zero_modes;
  j["eigenvalues"] = std::vector<double>(cp.leading_eigenvalues.data(),
                                         cp.leading_eigenvalues.data() +
                                             cp.leading_eigenvalues.size());
  j["grad_norm"] = cp.grad_norm;
  j["kernel"] = kernel_json(cp.kernel_spec);
  j["symmetry"] = cp.symmetry.name();
  j["index_uncertain"] = cp.index_uncertain;
  j["zero_mode_mismatch"] = cp.zero_mode_mismatch;
  j["config_hash"] = config_hash;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open sidecar for writing: " + path);
  out << j.dump(2) << "\n";
}

void save_landscape_json(const std::string& path, const LandscapeGraph& graph,
                         const std::string& density_dir, const std::string& config_hash) {
  json j;
  j["kernel"] = kernel_json(graph.spec);
  j["config_hash"] = config_hash;
  j["nodes"] = json::array();
  for (size_t i = 0; i < graph.nodes.size(); ++i) {
    const CriticalPoint& cp = graph.nodes[i];
    char fname[64];
    std::snprintf(fname, sizeof fname, "state_%03zu.dat", i);
    json node = {{"id", i},
                 {"index", cp.morse_index},
                 {"zero_modes", cp.zero_modes},
                 {"energy", cp.energy},
                 {"symmetry", cp.symmetry.name()},
                 {"grad_norm", cp.grad_norm},
                 {"density_file", density_dir.empty() ? "" : density_dir + "/" + fname}};
    j["nodes"].push_back(node);
  }
  j["edges"] = json::array();
  for (const auto& e : graph.edges)
    j["edges"].push_back({{"parent", e.parent},
                          {"child", e.child},
                          {"eigvec_rank", e.eigvec_rank},
                          {"sign", e.sign},
                          {"upward", e.upward}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot open landscape file for writing: " + path);
  out << j.dump(2) << "\n";
}

void save_bifurcation_csv(const std::string& path, const BifurcationTable& table,
                          const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open bifurcation file for writing: " + path);
  out << "# config_hash " << config_hash << "\n";
  out << "param,fingerprint_id,index,energy\n";
  char buf[128];
  for (const auto& s : table.samples)
    for (size_t i = 0; i < s.track_ids.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%.17g\n", s.parameter, s.track_ids[i],
                    s.indices[i], s.energies[i]);
      out << buf;
    }
}

void save_trajectory_csv(const std::string& path, const std::vector<TrajectoryRecord>& log,
                         const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open trajectory file for writing: " + path);
  out << "# config_hash " << config_hash << "\n";
  out << "step,energy,grad_norm,dt\n";
  char buf[128];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.step, r.energy, r.grad_norm, r.dt);
    out << buf;
  }
}

}  // namespace onsager
