#pragma once

#include <map>
#include <string>

#include "onsager/landscape.hpp"

namespace onsager {

/// Flat key=value configuration: parsed from file, overridable by flags,
/// serialized verbatim into run provenance.
struct RunConfig {
  std::map<std::string, std::string> values;

  static RunConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value) { values[key] = value; }
  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;

  std::string canonical() const;        // sorted key=value lines
  std::string hash() const;             // FNV-1a of the canonical form, hex

  KernelSpec kernel_spec() const;
  SaddleSearchConfig saddle_config() const;
  LandscapeConfig landscape_config() const;
};

/// Writes run.json: the full config, its hash, and the artifact list.
void write_run_record(const std::string& path, const RunConfig& cfg,
                      const std::vector<std::string>& artifacts);

/// JSON sidecar of a converged point: energy, index, zero modes, leading
/// eigenvalues, gradient norm, kernel.
void save_critical_point_sidecar(const std::string& path, const CriticalPoint& cp,
                                 const std::string& config_hash);

/// Landscape JSON: kernel, nodes (id, index, zero modes, energy, symmetry,
/// density file), directed search edges.
void save_landscape_json(const std::string& path, const LandscapeGraph& graph,
                         const std::string& density_dir, const std::string& config_hash);

/// Bifurcation CSV rows: param, fingerprint_id, index, energy.
void save_bifurcation_csv(const std::string& path, const BifurcationTable& table,
                          const std::string& config_hash);

/// Per-step CSV: step, energy, grad_norm, dt.
void save_trajectory_csv(const std::string& path, const std::vector<TrajectoryRecord>& log,
                         const std::string& config_hash);

}  // namespace onsager
