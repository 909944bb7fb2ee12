// Command-line driver: sampling, single solves, landscape construction,
// parameter sweeps, closed-form validation, and figure-grid export.

#include <CLI11.hpp>

#include <Eigen/Dense>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#include "onsager/analytic.hpp"
#include "onsager/errors.hpp"
#include "onsager/io.hpp"
#include "onsager/landscape.hpp"
#include "onsager/reduced.hpp"
#include "onsager/symmetry.hpp"

namespace fs = std::filesystem;
using namespace onsager;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiverged = 1;
constexpr int kExitBadInput = 2;

struct CommonArgs {
  std::string config_file;
  std::string mesh_file;
  int level = 4;
  int thomson_iters = 2000;
  double thomson_tol = 1e-12;
  std::string out_dir = ".";
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "key=value config file");
  cmd->add_option("--mesh", args.mesh_file, "mesh file (generated on demand if absent)");
  cmd->add_option("--level", args.level, "subdivision level when generating a mesh");
  cmd->add_option("--thomson-iters", args.thomson_iters, "Thomson relaxation iteration cap");
  cmd->add_option("--thomson-tol", args.thomson_tol, "Thomson relative-decrease stop");
  cmd->add_option("--out-dir", args.out_dir, "output directory");
  cmd->add_option("--set", args.overrides, "extra key=value config overrides")
      ->expected(-1)
      ->delimiter(',');
}

void add_kernel_flags(CLI::App* cmd, CommonArgs& args) {
  auto stash = [&args](const std::string& key) {
    return [&args, key](const std::string& v) { args.overrides[key] = v; };
  };
  cmd->add_option_function<std::string>("--kernel", stash("kernel"),
                                        "dipolar | maier-saupe | coupled | onsager");
  cmd->add_option_function<std::string>("--sigma", stash("sigma"), "dipolar strength");
  cmd->add_option_function<std::string>("--kappa", stash("kappa"), "Maier-Saupe strength");
  cmd->add_option_function<std::string>("--mu", stash("mu"), "Onsager strength");
  cmd->add_option_function<std::string>("--seed", stash("seed"), "random seed");
  cmd->add_option_function<std::string>("--jobs", stash("jobs"), "parallel solver instances");
  cmd->add_option_function<std::string>("--grad-tol", stash("grad_tol"), "gradient stop");
  cmd->add_option_function<std::string>("--dt", stash("dt"), "saddle-dynamics step size");
  cmd->add_option_function<std::string>("--max-steps", stash("max_steps"), "step cap");
}

RunConfig assemble_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_file.empty()) cfg = RunConfig::from_file(args.config_file);
  for (const auto& [k, v] : args.overrides) cfg.set(k, v);
  cfg.set("mesh_level", std::to_string(args.level));
  if (!args.mesh_file.empty()) cfg.set("mesh_file", args.mesh_file);
  return cfg;
}

std::shared_ptr<const SphereMesh> obtain_mesh(const CommonArgs& args) {
  if (!args.mesh_file.empty() && fs::exists(args.mesh_file))
    return std::make_shared<SphereMesh>(SphereMesh::load(args.mesh_file));
  SphereMesh mesh = thomson_relax(SphereMesh::icosphere(args.level), args.thomson_iters,
                                  args.thomson_tol);
  if (!args.mesh_file.empty()) mesh.save(args.mesh_file);
  return std::make_shared<SphereMesh>(std::move(mesh));
}

void finish_run(const CommonArgs& args, const RunConfig& cfg,
                const std::vector<std::string>& artifacts) {
  fs::create_directories(args.out_dir);
  write_run_record((fs::path(args.out_dir) / "run.json").string(), cfg, artifacts);
}

CriticalPoint polish_isotropic_cli(const KernelMatrix& K, const SaddleSearchConfig& scfg) {
  DensityField iso = isotropic_state(K.mesh);
  IndexCertificate est = compute_index(iso, K, scfg);
  SolveResult res =
      solve_to_critical(iso, est.morse_index, est.eigenvectors.leftCols(est.morse_index), K, scfg);
  if (!res.converged) throw StepError("uniform state did not converge");
  return *res.point;
}

int cmd_sample(const CommonArgs& args) {
  RunConfig cfg = assemble_config(args);
  fs::create_directories(args.out_dir);
  std::string out = cfg.get("out", (fs::path(args.out_dir) / "mesh.dat").string());
  SphereMesh mesh = thomson_relax(SphereMesh::icosphere(args.level), args.thomson_iters,
                                  args.thomson_tol);
  mesh.check_invariants();
  mesh.save(out);
  std::printf("mesh N=%d level=%d h=%.6g thomson_energy=%.10f -> %s\n", mesh.size(), mesh.level(),
              mesh.weight_h(), mesh.thomson_energy(), out.c_str());
  finish_run(args, cfg, {out});
  return kExitOk;
}

int cmd_solve(const CommonArgs& args, int index_k, const std::string& start_file,
              const std::string& out_prefix, bool write_trajectory) {
  RunConfig cfg = assemble_config(args);
  auto mesh = obtain_mesh(args);
  KernelSpec spec = cfg.kernel_spec();
  SaddleSearchConfig scfg = cfg.saddle_config();
  KernelMatrix K = assemble_kernel_matrix(mesh, spec);
  fs::create_directories(args.out_dir);

  DensityField start = isotropic_state(mesh);
  Mat V0;
  if (!start_file.empty()) {
    start = load_density(start_file, mesh);
  } else {
    CriticalPoint iso = polish_isotropic_cli(K, scfg);
    if (iso.morse_index == index_k) {
      start = iso.density;
      V0 = iso.eigenvectors.leftCols(index_k);
    } else {
      int rank = std::min<int>(index_k + 1, static_cast<int>(iso.eigenvectors.cols()));
      Vec psi = iso.density.psi + 0.05 * iso.eigenvectors.col(rank - 1);
      start = retract(std::move(psi), mesh);
      V0 = iso.eigenvectors.leftCols(std::min(index_k, static_cast<int>(iso.eigenvectors.cols())));
    }
  }

  std::vector<TrajectoryRecord> log;
  SolveResult res = solve_to_critical(start, index_k, V0, K, scfg,
                                      write_trajectory ? &log : nullptr);
  std::vector<std::string> artifacts;
  fs::path prefix = fs::path(args.out_dir) / out_prefix;
  if (write_trajectory) {
    save_trajectory_csv(prefix.string() + "_trajectory.csv", log, cfg.hash());
    artifacts.push_back(prefix.string() + "_trajectory.csv");
  }
  if (!res.converged) {
    std::fprintf(stderr, "solver did not converge: grad_norm=%.3e after %d steps\n",
                 res.final_grad_norm, res.steps);
    finish_run(args, cfg, artifacts);
    return kExitDiverged;
  }
  CriticalPoint& cp = *res.point;
  cp.symmetry = classify(cp.density, cfg.landscape_config().symmetry);
  save_density(prefix.string() + ".dat", cp.density, spec, cp.energy, cp.morse_index);
  save_critical_point_sidecar(prefix.string() + ".json", cp, cfg.hash());
  artifacts.push_back(prefix.string() + ".dat");
  artifacts.push_back(prefix.string() + ".json");
  std::printf("converged: index=%d zero_modes=%d energy=%.8f grad_norm=%.2e symmetry=%s\n",
              cp.morse_index, cp.zero_modes, cp.energy, cp.grad_norm, cp.symmetry.name().c_str());
  finish_run(args, cfg, artifacts);
  return kExitOk;
}

int cmd_landscape(const CommonArgs& args, const std::string& out_file) {
  RunConfig cfg = assemble_config(args);
  auto mesh = obtain_mesh(args);
  KernelSpec spec = cfg.kernel_spec();
  SaddleSearchConfig scfg = cfg.saddle_config();
  LandscapeConfig lcfg = cfg.landscape_config();
  KernelMatrix K = assemble_kernel_matrix(mesh, spec);
  LandscapeGraph g = build_landscape(K, scfg, lcfg);

  fs::create_directories(args.out_dir);
  std::string density_dir = (fs::path(args.out_dir) / "states").string();
  fs::create_directories(density_dir);
  std::vector<std::string> artifacts;
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    char fname[64];
    std::snprintf(fname, sizeof fname, "state_%03zu.dat", i);
    std::string p = density_dir + "/" + fname;
    save_density(p, g.nodes[i].density, spec, g.nodes[i].energy, g.nodes[i].morse_index);
    artifacts.push_back(p);
  }
  std::string out = (fs::path(args.out_dir) / out_file).string();
  save_landscape_json(out, g, "states", cfg.hash());
  artifacts.push_back(out);

  std::printf("landscape: %zu nodes, %zu edges\n", g.nodes.size(), g.edges.size());
  for (size_t i = 0; i < g.nodes.size(); ++i)
    std::printf("  node %zu: index=%d zero_modes=%d energy=%.8f symmetry=%s\n", i,
                g.nodes[i].morse_index, g.nodes[i].zero_modes, g.nodes[i].energy,
                g.nodes[i].symmetry.name().c_str());
  finish_run(args, cfg, artifacts);
  return kExitOk;
}

int cmd_sweep(const CommonArgs& args, const std::string& param,
              const std::vector<double>& values, const std::string& out_file) {
  RunConfig cfg = assemble_config(args);
  auto mesh = obtain_mesh(args);
  SaddleSearchConfig scfg = cfg.saddle_config();
  LandscapeConfig lcfg = cfg.landscape_config();
  KernelSpec base = cfg.kernel_spec();

  auto factory = [&](double v) {
    KernelSpec spec = base;
    if (param == "sigma")
      spec.sigma = v;
    else if (param == "kappa")
      spec.kappa = v;
    else if (param == "mu")
      spec.mu = v;
    else
      throw ParameterError("sweep parameter must be sigma, kappa, or mu");
    spec.validate();
    return assemble_kernel_matrix(mesh, spec);
  };
  BifurcationTable table = sweep_parameter(param, values, factory, scfg, lcfg);

  fs::create_directories(args.out_dir);
  std::string out = (fs::path(args.out_dir) / out_file).string();
  save_bifurcation_csv(out, table, cfg.hash());
  for (const auto& s : table.samples) {
    std::printf("%s=%.6g:", param.c_str(), s.parameter);
    for (size_t i = 0; i < s.track_ids.size(); ++i)
      std::printf(" [id %d index %d E %.6f]", s.track_ids[i], s.indices[i], s.energies[i]);
    std::printf("\n");
  }
  for (const auto& e : table.events)
    std::printf("event %s: track %d in (%.6g, %.6g) index %d -> %d\n", e.kind.c_str(), e.track_id,
                e.param_lo, e.param_hi, e.index_before, e.index_after);
  finish_run(args, cfg, {out});
  return kExitOk;
}

int cmd_validate(const CommonArgs& args, const std::string& what) {
  RunConfig cfg = assemble_config(args);
  auto mesh = obtain_mesh(args);
  SaddleSearchConfig scfg = cfg.saddle_config();
  const double h = mesh->weight_h();
  int failures = 0;

  auto l2_error = [&](const DensityField& a, const DensityField& b) {
    return std::sqrt(h) * (a.rho() - b.rho()).norm();
  };

  if (what == "dipolar") {
    double sigma = cfg.get_double("sigma", 4.0);
    KernelMatrix K = assemble_kernel_matrix(mesh, KernelSpec::dipolar(sigma));
    CriticalPoint iso = polish_isotropic_cli(K, scfg);
    Vec psi = iso.density.psi + 0.05 * iso.eigenvectors.col(0);
    SolveResult res = solve_to_critical(retract(std::move(psi), mesh), 0, Mat(), K, scfg);
    if (!res.converged) return kExitDiverged;
    const CriticalPoint& cp = *res.point;
    Vec3 axis = first_moment(cp.density);
    double r = dipolar_r_of_sigma(sigma);
    FamilyField exact = dipolar_family(r, -axis.normalized(), mesh);
    double err = l2_error(cp.density, exact.density);
    std::printf("dipolar sigma=%.4g: L2 error %.3e, grad %.3e, index %d, zero modes %d\n", sigma,
                err, cp.grad_norm, cp.morse_index, cp.zero_modes);
    if (cp.morse_index != 0 || err > 5e-5) failures++;
  } else if (what == "ms") {
    double kappa = cfg.get_double("kappa", 8.0);
    KernelMatrix K = assemble_kernel_matrix(mesh, KernelSpec::maier_saupe(kappa));
    CriticalPoint iso = polish_isotropic_cli(K, scfg);
    auto fold = ms_prolate_fold();
    // prolate branch (r < r*), oblate branch (r > 0)
    for (bool prolate : {true, false}) {
      double r0 = prolate ? std::min(2 * fold.first, -3.0) : 1.0;
      double r = ms_r_of_kappa(kappa, r0);
      FamilyField guess = ms_family(r, Vec3(0, 0, 1), mesh);
      int k = prolate ? 0 : 2;
      SolveResult res = solve_to_critical(guess.density, k, Mat(), K, scfg);
      if (!res.converged) {
        failures++;
        continue;
      }
      const CriticalPoint& cp = *res.point;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(second_moment(cp.density));
      Vec3 axis = prolate ? es.eigenvectors().col(2) : es.eigenvectors().col(0);
      FamilyField exact = ms_family(r, axis, mesh);
      double err = l2_error(cp.density, exact.density);
      std::printf("ms kappa=%.4g %s: r=%.5f L2 error %.3e, grad %.3e, index %d\n", kappa,
                  prolate ? "prolate" : "oblate", r, err, cp.grad_norm, cp.morse_index);
      if (err > (prolate ? 2e-3 : 2e-4)) failures++;
    }
  } else {
    throw ParameterError("validate case must be dipolar or ms");
  }
  finish_run(args, cfg, {});
  return failures == 0 ? kExitOk : kExitDiverged;
}

int cmd_export_grid(const CommonArgs& args, const std::string& in_file,
                    const std::string& out_file, int grid_cols, int grid_rows) {
  RunConfig cfg = assemble_config(args);
  auto mesh = obtain_mesh(args);
  DensityField rho = load_density(in_file, mesh);
  fs::create_directories(args.out_dir);
  std::string out = (fs::path(args.out_dir) / out_file).string();
  export_grid_csv(out, rho, grid_cols, grid_rows);
  std::printf("grid %dx%d -> %s\n", grid_cols, grid_rows, out.c_str());
  finish_run(args, cfg, {out});
  return kExitOk;
}

int cmd_reduced(const CommonArgs& args, const std::string& start, int seeds) {
  RunConfig cfg = assemble_config(args);
  auto mesh = obtain_mesh(args);
  KernelSpec spec = cfg.kernel_spec();
  KernelMatrix K = assemble_kernel_matrix(mesh, spec);
  SaddleSearchConfig scfg = cfg.saddle_config();
  std::mt19937_64 rng(static_cast<unsigned>(cfg.get_int("seed", 12345)));
  std::normal_distribution<double> dist(0.0, 2.0);

  std::vector<Vec5> starts;
  if (start == "random") {
    for (int s = 0; s < seeds; ++s) {
      Vec5 m;
      for (int i = 0; i < 5; ++i) m[i] = dist(rng);
      starts.push_back(m);
    }
  } else {
    std::istringstream ss(start);
    Vec5 m;
    char comma;
    for (int i = 0; i < 5; ++i) ss >> m[i] >> comma;
    starts.push_back(m);
  }

  struct Found {
    ReducedCritical rc;
    int full_index = -1;
  };
  std::vector<Found> found;
  for (const auto& m0 : starts) {
    ReducedCritical rc = find_reduced_critical(m0, K);
    if (!rc.converged) continue;
    verify_lift(rc, K);
    bool dup = false;
    for (const auto& f : found)
      if (std::abs(f.rc.energy - rc.energy) < 1e-8 &&
          f.rc.reduced_index == rc.reduced_index)
        dup = true;
    if (dup) continue;
    Found f;
    f.rc = rc;
    if (rc.full_grad_norm <= 1e-6) {
      DensityField lifted = reduced_density(rc.m, mesh);
      IndexCertificate cert = compute_index(lifted, K, scfg);
      f.full_index = cert.morse_index;
    }
    found.push_back(f);
  }
  std::sort(found.begin(), found.end(),
            [](const Found& a, const Found& b) { return a.rc.energy < b.rc.energy; });
  std::printf("%-12s %-8s %-10s %-12s %s\n", "energy", "red.idx", "full.idx", "full.grad",
              "status");
  for (const auto& f : found) {
    bool verified = f.rc.full_grad_norm <= 1e-6;
    std::printf("%-12.8f %-8d %-10s %-12.3e %s\n", f.rc.energy, f.rc.reduced_index,
                verified ? std::to_string(f.full_index).c_str() : "-", f.rc.full_grad_norm,
                verified ? "verified" : "extraneous");
  }
  finish_run(args, cfg, {});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical points and solution landscapes of a free-energy model on the sphere"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* sample = app.add_subcommand("sample", "generate a relaxed quasi-uniform mesh");
  CommonArgs sample_args;
  add_common(sample, sample_args);
  std::string sample_out;
  sample->add_option("--out", sample_out, "mesh output path");

  auto* solve = app.add_subcommand("solve", "run one saddle search");
  CommonArgs solve_args;
  add_common(solve, solve_args);
  add_kernel_flags(solve, solve_args);
  int solve_index = 0;
  std::string solve_start, solve_out = "state";
  bool solve_traj = false;
  solve->add_option("--index", solve_index, "target Morse index");
  solve->add_option("--start", solve_start, "starting density file");
  solve->add_option("--out", solve_out, "output file prefix");
  solve->add_flag("--trajectory", solve_traj, "write per-step trajectory CSV");

  auto* landscape = app.add_subcommand("landscape", "construct the full solution landscape");
  CommonArgs landscape_args;
  add_common(landscape, landscape_args);
  add_kernel_flags(landscape, landscape_args);
  std::string landscape_out = "lc.json";
  landscape->add_option("--out", landscape_out, "landscape JSON filename");

  auto* sweep = app.add_subcommand("sweep", "landscape sweep over a kernel parameter");
  CommonArgs sweep_args;
  add_common(sweep, sweep_args);
  add_kernel_flags(sweep, sweep_args);
  std::string sweep_param = "sigma", sweep_out = "bifurcation.csv";
  std::vector<double> sweep_values;
  sweep->add_option("--param", sweep_param, "sigma | kappa | mu");
  sweep->add_option("--values", sweep_values, "ascending parameter values")
      ->delimiter(',')
      ->required();
  sweep->add_option("--out", sweep_out, "bifurcation CSV filename");

  auto* validate = app.add_subcommand("validate", "solver vs closed-form comparison");
  CommonArgs validate_args;
  add_common(validate, validate_args);
  add_kernel_flags(validate, validate_args);
  std::string validate_case = "dipolar";
  validate->add_option("--case", validate_case, "dipolar | ms");

  auto* grid = app.add_subcommand("export-grid", "write a (theta, phi) raster of log density");
  CommonArgs grid_args;
  add_common(grid, grid_args);
  std::string grid_in, grid_out = "grid.csv";
  int grid_cols = 256, grid_rows = 128;
  grid->add_option("--in", grid_in, "density file")->required();
  grid->add_option("--out", grid_out, "output CSV filename");
  grid->add_option("--cols", grid_cols, "azimuthal samples");
  grid->add_option("--rows", grid_rows, "polar samples");

  auto* reduced = app.add_subcommand("reduced", "multi-start search in the reduced model");
  CommonArgs reduced_args;
  add_common(reduced, reduced_args);
  add_kernel_flags(reduced, reduced_args);
  std::string reduced_start = "random";
  int reduced_seeds = 64;
  reduced->add_option("--start", reduced_start, "random or m1,m2,m3,m4,m5");
  reduced->add_option("--seeds", reduced_seeds, "number of random starts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed()) {
      if (!sample_out.empty()) sample_args.overrides["out"] = sample_out;
      return cmd_sample(sample_args);
    }
    if (solve->parsed()) return cmd_solve(solve_args, solve_index, solve_start, solve_out,
                                          solve_traj);
    if (landscape->parsed()) return cmd_landscape(landscape_args, landscape_out);
    if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_param, sweep_values, sweep_out);
    if (validate->parsed()) return cmd_validate(validate_args, validate_case);
    if (grid->parsed()) return cmd_export_grid(grid_args, grid_in, grid_out, grid_cols, grid_rows);
    if (reduced->parsed()) return cmd_reduced(reduced_args, reduced_start, reduced_seeds);
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadInput;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadInput;
  } catch (const StepError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadInput;
  }
  (void)args;
  return kExitOk;
}
