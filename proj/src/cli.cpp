#include "flow4dvar/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>

#include "flow4dvar/errors.hpp"
#include "flow4dvar/metrics.hpp"
#include "flow4dvar/optimize.hpp"
#include "flow4dvar/reduced.hpp"
#include "flow4dvar/twin.hpp"
#include "flow4dvar/verify.hpp"
#include "flow4dvar/vtk.hpp"

namespace flow4dvar {

namespace {

namespace fs = std::filesystem;

// Carries a nonzero exit code out of a CLI11 callback.
struct CommandExit {
  int code;
};

void throw_with_code(int code) {
  if (code != 0) throw CommandExit{code};
}

struct ModelOptions {
  ModelConfig model;

  void attach(CLI::App* cmd) {
    cmd->add_option("--nu", model.nu, "kinematic viscosity [mm^2/s]")
        ->capture_default_str();
    cmd->add_option("--dt", model.dt, "timestep [s]")->capture_default_str();
    cmd->add_option("--T", model.T, "end time [s]")->capture_default_str();
    cmd->add_option("--theta", model.theta, "time discretisation parameter")
        ->capture_default_str();
    cmd->add_option("--sigma", model.sigma, "Nitsche coefficient")
        ->capture_default_str();
    cmd->add_option("--beta", model.beta, "pressure stabilisation coefficient")
        ->capture_default_str();
    cmd->add_flag("--swap-outlets", model.swap_outlets,
                  "control out2 instead of out1");
  }
};

struct GeometryOptions {
  BifurcationParams params;

  void attach(CLI::App* cmd) {
    cmd->add_option("--edge-length", params.edge_length,
                    "target mesh edge length [mm]")
        ->capture_default_str();
    cmd->add_option("--inlet-width", params.inlet_width, "inlet width [mm]")
        ->capture_default_str();
    cmd->add_option("--branch-width", params.branch_width,
                    "branch width [mm]")
        ->capture_default_str();
    cmd->add_option("--inlet-length", params.inlet_length,
                    "inlet length [mm]")
        ->capture_default_str();
    cmd->add_option("--branch-length", params.branch_length,
                    "branch length [mm]")
        ->capture_default_str();
    cmd->add_option("--aneurysm-radius", params.aneurysm_radius,
                    "aneurysm radius [mm]")
        ->capture_default_str();
    cmd->add_option("--aneurysm-neck", params.aneurysm_neck,
                    "aneurysm neck half-width [mm]")
        ->capture_default_str();
    cmd->add_option("--obs-wall-margin", params.obs_wall_margin,
                    "drop observed cells within this wall distance [mm]")
        ->capture_default_str();
    cmd->add_flag("--extension,!--no-extension", params.with_extension,
                  "prolong the vessels past the reconstruction boundaries");
    cmd->add_option("--extension-factor", params.extension_factor,
                    "extension length in channel widths")
        ->capture_default_str();
  }
};

double parse_snr(const std::string& text) {
  if (text == "inf" || text == "INF" || text == "infinity")
    return std::numeric_limits<double>::infinity();
  try {
    size_t pos = 0;
    double value = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse SNR value '" + text + "'");
  }
}

ObservationKind parse_operator(const std::string& text) {
  if (text == "inst") return ObservationKind::instantaneous;
  if (text == "avg") return ObservationKind::averaged;
  throw ConfigError("observation operator must be 'inst' or 'avg'");
}

void check_hash(const Mesh& mesh, std::uint64_t file_hash, const char* what) {
  if (mesh.content_hash() != file_hash)
    throw ValidationError(std::string(what) +
                          " was produced for a different mesh");
}

// ---------------------------------------------------------------------------
// Subcommand payloads
// ---------------------------------------------------------------------------

int cmd_mesh_gen(const GeometryOptions& geo, const std::string& out_path) {
  Mesh mesh = generate_bifurcation(geo.params);
  save_mesh(mesh, out_path);
  std::printf("mesh-gen: %d vertices, %d cells, hash %s -> %s\n",
              mesh.num_vertices(), mesh.num_cells(),
              mesh.content_hash_hex().c_str(), out_path.c_str());
  return 0;
}

struct TwinGenArgs {
  std::string mesh_path;      // reconstruction mesh
  std::string mesh_ext_path;  // extended mesh (unless --truth-in)
  std::string truth_in;
  std::string obs_path;
  std::string truth_out;
  std::string op_name = "inst";
  int n_obs = 16;
  std::string snr_text = "inf";
  std::uint64_t seed = 0;
  double peak_inlet = 1000.0;
  double peak_outlet = 870.0;
};

int cmd_twin_gen(const ModelOptions& opts, const TwinGenArgs& args) {
  Mesh recon = load_mesh(args.mesh_path);
  ObservationKind kind = parse_operator(args.op_name);
  double snr = parse_snr(args.snr_text);

  TwinData data;
  if (!args.truth_in.empty()) {
    Trajectory truth = load_trajectory(recon.content_hash(), args.truth_in);
    data = sample_twin_data(recon, truth, opts.model, kind, args.n_obs, snr,
                            args.seed);
  } else {
    if (args.mesh_ext_path.empty())
      throw ConfigError("twin-gen needs --mesh-ext or --truth-in");
    Mesh extended = load_mesh(args.mesh_ext_path);
    data = generate_twin_data(extended, recon, opts.model, kind, args.n_obs,
                              args.peak_inlet, args.peak_outlet, snr,
                              args.seed);
  }

  save_observations(data.observations, args.obs_path);
  if (!args.truth_out.empty())
    save_trajectory(data.truth, recon.content_hash(), args.truth_out);
  std::printf("twin-gen: %d observations (%s) -> %s\n",
              data.observations.size(), args.op_name.c_str(),
              args.obs_path.c_str());
  return 0;
}

struct AssimilateArgs {
  std::string mesh_path;
  std::string obs_path;
  std::string out_dir;
  std::string m0 = "zero";
  double alpha = 1e-5;
  double gamma = 1e-5;
  int max_iter = 100;
  double ftol_rel = 1e-4;
  int memory = 10;
};

int cmd_assimilate(const ModelOptions& opts, const AssimilateArgs& args) {
  Mesh mesh = load_mesh(args.mesh_path);
  ObservationSet obs = load_observations(args.obs_path);
  check_hash(mesh, obs.mesh_hash, "observation set");

  RegularisationConfig reg;
  reg.alpha = args.alpha;
  reg.gamma = args.gamma;
  ReducedFunctional reduced(mesh, opts.model, std::move(obs), reg);
  const ControlLayout& layout = reduced.layout();

  Vector m0;
  if (args.m0 == "zero") {
    m0 = Vector::Zero(layout.stacked_dim());
  } else {
    Control c = load_control(layout, mesh.content_hash(), args.m0);
    m0 = layout.pack(c);
  }

  fs::create_directories(args.out_dir);
  OptimizerConfig opt;
  opt.max_iterations = args.max_iter;
  opt.ftol_rel = args.ftol_rel;
  opt.memory = args.memory;

  MinimizeResult result;
  if (args.max_iter == 0) {
    Evaluation e = reduced.evaluate(m0);
    result.m = m0;
    result.trace.rows.push_back({0, e.misfit, e.reg, e.value, 0.0, 0.0, 0});
    result.trace.status = OptimizerStatus::max_iterations;
  } else {
    RieszMap& riesz = reduced.riesz();
    result = minimize(reduced.guarded_objective(), m0,
                      [&](const Vector& g) { return riesz.apply(g); }, opt);
  }

  Control m_opt = layout.unpack(result.m);
  save_control(m_opt, layout, mesh.content_hash(),
               (fs::path(args.out_dir) / "control.bin").string());
  Trajectory traj = reduced.solve(result.m);
  save_trajectory(traj, mesh.content_hash(),
                  (fs::path(args.out_dir) / "trajectory.bin").string());
  write_trace_csv(result.trace,
                  (fs::path(args.out_dir) / "trace.csv").string());

  const TraceRow& last = result.trace.rows.back();
  std::printf("assimilate: %d iterations, J=%.6g R=%.6g Jhat=%.6g (%s)\n",
              last.iter, last.misfit, last.reg, last.jhat,
              to_string(result.trace.status));
  return 0;
}

struct MetricsArgs {
  std::string mesh_path;
  std::string reconstruction;
  std::string truth;
  double rho = 1060.0;
  double nu = 3.5;
  std::string report_path;
  std::string timeseries_path;
};

int cmd_metrics(const MetricsArgs& args) {
  Mesh mesh = load_mesh(args.mesh_path);
  Trajectory rec = load_trajectory(mesh.content_hash(), args.reconstruction);
  Trajectory truth = load_trajectory(mesh.content_hash(), args.truth);

  MetricsReport report = compute_metrics(mesh, rec, truth, args.nu, args.rho);
  if (!args.report_path.empty()) write_metrics_report(report, args.report_path);
  if (!args.timeseries_path.empty())
    write_metrics_timeseries(mesh, rec, truth, args.nu, args.rho,
                             args.timeseries_path);
  // WSS converted to Pa from the mm-s unit system (factor 1e-6 per kg/m^3).
  std::printf("metrics: E_velocity_ane=%.6g E_wss_ane=%.6g "
              "E_velocity_timeavg_ane=%.6g\n",
              report.e_velocity, report.e_wss, report.e_ua);
  return 0;
}

struct TaylorArgs {
  std::string mesh_path;
  std::string obs_path;
  double alpha = 1e-5;
  double gamma = 1e-5;
  double h0 = 0.1;
  double dm_scale = 100.0;
  int levels = 5;
  std::uint64_t seed = 42;
  bool negate_gradient = false;
};

int cmd_taylor(const ModelOptions& opts, const TaylorArgs& args) {
  Mesh mesh = load_mesh(args.mesh_path);
  ObservationSet obs = load_observations(args.obs_path);
  check_hash(mesh, obs.mesh_hash, "observation set");

  RegularisationConfig reg;
  reg.alpha = args.alpha;
  reg.gamma = args.gamma;
  ReducedFunctional reduced(mesh, opts.model, std::move(obs), reg);
  RieszMap& riesz = reduced.riesz();

  Vector m0 = Vector::Zero(reduced.layout().stacked_dim());
  auto evaluator = [&](const Vector& m) { return reduced.evaluate(m); };

  bool pass = true;
  const struct {
    TaylorVariant variant;
    const char* name;
  } variants[] = {{TaylorVariant::joint, "joint"},
                  {TaylorVariant::u0_only, "u0"},
                  {TaylorVariant::g_only, "g"}};
  for (const auto& [variant, name] : variants) {
    Vector dm = args.dm_scale *
                taylor_direction(reduced.layout(), riesz, variant, args.seed);
    TaylorReport report = taylor_test(evaluator, m0, dm, args.h0, args.levels,
                                      args.negate_gradient);
    std::printf("taylor (%s perturbation):\n%s", name,
                report.to_text().c_str());
    pass &= report.fitted_order1 >= 1.9;
  }
  std::printf("taylor: %s\n", pass ? "PASS" : "FAIL");
  return pass ? 0 : 4;
}

struct ExportArgs {
  std::string mesh_path;
  std::string trajectory;
  std::string out_prefix;
  std::vector<int> steps;
  std::vector<double> times;
  bool all = false;
};

int cmd_export(const ExportArgs& args) {
  Mesh mesh = load_mesh(args.mesh_path);
  Trajectory traj = load_trajectory(mesh.content_hash(), args.trajectory);

  std::vector<int> steps = args.steps;
  for (double t : args.times) steps.push_back(step_index(t, traj.dt));
  if (args.all)
    for (int k = 0; k <= traj.num_steps(); ++k) steps.push_back(k);
  if (steps.empty())
    throw ConfigError("export needs --step, --time or --all");

  for (int k : steps) {
    if (k < 0 || k > traj.num_steps())
      throw ContractError("step " + std::to_string(k) +
                          " outside the trajectory");
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%04d.vtk", args.out_prefix.c_str(),
                  k);
    export_vtk(mesh, traj.state(k).u, traj.state(k).p, name);
    std::printf("export: step %d -> %s\n", k, name);
  }
  return 0;
}

struct StudyArgs {
  std::string out_dir;
  double edge_length = 0.35;
  double dt = 0.00925;
  int max_iter = 100;
  std::string only;  // substring filter on cell names
};

int cmd_run_study(const StudyArgs& args) {
  fs::create_directories(args.out_dir);
  fs::path root(args.out_dir);

  GeometryOptions geo;
  geo.params.edge_length = args.edge_length;
  Mesh recon = generate_bifurcation(geo.params);
  geo.params.with_extension = true;
  Mesh extended = generate_bifurcation(geo.params);
  save_mesh(recon, (root / "mesh.txt").string());
  save_mesh(extended, (root / "mesh_ext.txt").string());

  ModelConfig model;
  model.dt = args.dt;

  struct Cell {
    std::string name;
    ObservationKind kind;
    double snr;
    std::uint64_t seed;
    double alpha;
    int n_obs;
    bool swapped;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Cell> cells;
  for (auto [kind, tag] :
       {std::pair{ObservationKind::instantaneous, std::string("inst")},
        std::pair{ObservationKind::averaged, std::string("avg")}}) {
    cells.push_back({tag + "_base", kind, inf, 0, 1e-5, 16, false});
    cells.push_back({tag + "_snr2", kind, 2.0, 7, 1e-5, 16, false});
    cells.push_back({tag + "_snr1", kind, 1.0, 7, 1e-5, 16, false});
    cells.push_back({tag + "_alpha1e-4", kind, inf, 0, 1e-4, 16, false});
    cells.push_back({tag + "_alpha1e-2", kind, inf, 0, 1e-2, 16, false});
    cells.push_back({tag + "_alpha1", kind, inf, 0, 1.0, 16, false});
    cells.push_back({tag + "_n4", kind, inf, 0, 1e-5, 4, false});
    cells.push_back({tag + "_n8", kind, inf, 0, 1e-5, 8, false});
    cells.push_back({tag + "_n32", kind, inf, 0, 1e-5, 32, false});
    cells.push_back({tag + "_swapped", kind, inf, 0, 1e-5, 16, true});
  }

  // One truth simulation serves every cell.
  FlowSystem truth_system(extended, model);
  Control pulse = pulse_control(truth_system.control_layout(), extended,
                                model, 1000.0, 870.0);
  Trajectory truth_full = truth_system.solve_forward(pulse);
  Trajectory truth = restrict_trajectory(truth_full, extended, recon);
  save_trajectory(truth, recon.content_hash(), (root / "truth.bin").string());

  std::ofstream summary(root / "summary.csv");
  summary << "cell,operator,snr,alpha,n_obs,swapped,iterations,status,J,R,"
             "E_velocity,E_wss,E_ua\n";

  for (const Cell& cell : cells) {
    if (!args.only.empty() && cell.name.find(args.only) == std::string::npos)
      continue;
    std::printf("run-study: %s\n", cell.name.c_str());
    TwinData data = sample_twin_data(recon, truth, model, cell.kind,
                                     cell.n_obs, cell.snr, cell.seed);
    ModelConfig cell_model = model;
    cell_model.swap_outlets = cell.swapped;
    RegularisationConfig reg;
    reg.alpha = cell.alpha;
    reg.gamma = cell.alpha;
    ReducedFunctional reduced(recon, cell_model, data.observations, reg);
    OptimizerConfig opt;
    opt.max_iterations = args.max_iter;
    RieszMap& riesz = reduced.riesz();
    MinimizeResult result = minimize(
        reduced.guarded_objective(),
        Vector::Zero(reduced.layout().stacked_dim()),
        [&](const Vector& g) { return riesz.apply(g); }, opt);

    fs::path cell_dir = root / cell.name;
    fs::create_directories(cell_dir);
    write_trace_csv(result.trace, (cell_dir / "trace.csv").string());
    Trajectory rec = reduced.solve(result.m);
    save_trajectory(rec, recon.content_hash(),
                    (cell_dir / "trajectory.bin").string());
    MetricsReport metrics = compute_metrics(recon, rec, truth, model.nu,
                                            1060.0);
    write_metrics_report(metrics, (cell_dir / "metrics.txt").string());
    write_metrics_timeseries(recon, rec, truth, model.nu, 1060.0,
                             (cell_dir / "timeseries.csv").string());

    const TraceRow& last = result.trace.rows.back();
    char line[512];
    std::snprintf(line, sizeof(line),
                  "%s,%s,%g,%g,%d,%d,%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  cell.name.c_str(),
                  cell.kind == ObservationKind::instantaneous ? "inst" : "avg",
                  cell.snr, cell.alpha, cell.n_obs, cell.swapped ? 1 : 0,
                  last.iter, to_string(result.trace.status), last.misfit,
                  last.reg, metrics.e_velocity, metrics.e_wss, metrics.e_ua);
    summary << line;
    summary.flush();
  }
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"4DVar reconstruction of transient incompressible flow from "
               "sparse velocity observations"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI config file; keys live under a [subcommand] section");

  // mesh-gen ---------------------------------------------------------------
  auto* mesh_gen = app.add_subcommand(
      "mesh-gen", "generate the bifurcation-with-aneurysm mesh");
  mesh_gen->fallthrough();
  auto geo = std::make_shared<GeometryOptions>();
  geo->attach(mesh_gen);
  auto mesh_out = std::make_shared<std::string>();
  mesh_gen->add_option("--out", *mesh_out, "output mesh file")->required();
  mesh_gen->callback([geo, mesh_out] {
    throw_with_code(cmd_mesh_gen(*geo, *mesh_out));
  });

  // twin-gen ---------------------------------------------------------------
  auto* twin_gen = app.add_subcommand(
      "twin-gen", "generate twin-experiment observations and truth");
  twin_gen->fallthrough();
  auto twin_model = std::make_shared<ModelOptions>();
  twin_model->attach(twin_gen);
  auto twin_args = std::make_shared<TwinGenArgs>();
  twin_gen->add_option("--mesh", twin_args->mesh_path,
                       "reconstruction-domain mesh")->required();
  twin_gen->add_option("--mesh-ext", twin_args->mesh_ext_path,
                       "extended generation mesh");
  twin_gen->add_option("--truth-in", twin_args->truth_in,
                       "reuse a restricted truth checkpoint");
  twin_gen->add_option("--obs", twin_args->obs_path, "output observation file")
      ->required();
  twin_gen->add_option("--truth", twin_args->truth_out,
                       "output truth checkpoint (restricted)");
  twin_gen->add_option("--operator", twin_args->op_name,
                       "observation operator: inst|avg")
      ->capture_default_str();
  twin_gen->add_option("--n-obs", twin_args->n_obs, "number of observations")
      ->capture_default_str();
  twin_gen->add_option("--snr", twin_args->snr_text,
                       "signal-to-noise ratio or 'inf'")
      ->capture_default_str();
  twin_gen->add_option("--seed", twin_args->seed, "noise seed")
      ->capture_default_str();
  twin_gen->add_option("--peak-inlet", twin_args->peak_inlet,
                       "peak inlet velocity [mm/s]")
      ->capture_default_str();
  twin_gen->add_option("--peak-outlet", twin_args->peak_outlet,
                       "peak controlled-outlet velocity [mm/s]")
      ->capture_default_str();
  twin_gen->callback([twin_model, twin_args] {
    throw_with_code(cmd_twin_gen(*twin_model, *twin_args));
  });

  // assimilate ---------------------------------------------------------------
  auto* assim = app.add_subcommand("assimilate",
                                   "reconstruct the flow from observations");
  assim->fallthrough();
  auto assim_model = std::make_shared<ModelOptions>();
  assim_model->attach(assim);
  auto assim_args = std::make_shared<AssimilateArgs>();
  assim->add_option("--mesh", assim_args->mesh_path, "reconstruction mesh")
      ->required();
  assim->add_option("--obs", assim_args->obs_path, "observation file")
      ->required();
  assim->add_option("--out-dir", assim_args->out_dir, "output directory")
      ->required();
  assim->add_option("--alpha", assim_args->alpha,
                    "boundary regularisation weight")
      ->capture_default_str();
  assim->add_option("--gamma", assim_args->gamma,
                    "initial-condition regularisation weight")
      ->capture_default_str();
  assim->add_option("--max-iter", assim_args->max_iter,
                    "optimizer iteration budget")
      ->capture_default_str();
  assim->add_option("--ftol-rel", assim_args->ftol_rel,
                    "relative functional-change tolerance")
      ->capture_default_str();
  assim->add_option("--memory", assim_args->memory, "L-BFGS memory pairs")
      ->capture_default_str();
  assim->add_option("--m0", assim_args->m0,
                    "initial control: 'zero' or a checkpoint path")
      ->capture_default_str();
  assim->callback([assim_model, assim_args] {
    throw_with_code(cmd_assimilate(*assim_model, *assim_args));
  });

  // metrics ------------------------------------------------------------------
  auto* metrics = app.add_subcommand("metrics",
                                     "reconstruction-quality measures");
  metrics->fallthrough();
  auto metrics_args = std::make_shared<MetricsArgs>();
  metrics->add_option("--mesh", metrics_args->mesh_path, "mesh file")
      ->required();
  metrics->add_option("--reconstruction", metrics_args->reconstruction,
                      "reconstructed trajectory checkpoint")
      ->required();
  metrics->add_option("--truth", metrics_args->truth,
                      "truth trajectory checkpoint")
      ->required();
  metrics->add_option("--nu", metrics_args->nu, "kinematic viscosity")
      ->capture_default_str();
  metrics->add_option("--rho", metrics_args->rho, "density [kg/m^3]")
      ->capture_default_str();
  metrics->add_option("--report", metrics_args->report_path,
                      "output report file");
  metrics->add_option("--timeseries", metrics_args->timeseries_path,
                      "output time-series CSV");
  metrics->callback([metrics_args] {
    throw_with_code(cmd_metrics(*metrics_args));
  });

  // taylor -------------------------------------------------------------------
  auto* taylor = app.add_subcommand(
      "taylor", "Taylor remainder verification of the reduced gradient");
  taylor->fallthrough();
  auto taylor_model = std::make_shared<ModelOptions>();
  taylor_model->attach(taylor);
  auto taylor_args = std::make_shared<TaylorArgs>();
  taylor->add_option("--mesh", taylor_args->mesh_path, "mesh file")->required();
  taylor->add_option("--obs", taylor_args->obs_path, "observation file")
      ->required();
  taylor->add_option("--alpha", taylor_args->alpha, "boundary weight")
      ->capture_default_str();
  taylor->add_option("--gamma", taylor_args->gamma, "initial-condition weight")
      ->capture_default_str();
  taylor->add_option("--h0", taylor_args->h0, "largest perturbation size")
      ->capture_default_str();
  taylor->add_option("--dm-scale", taylor_args->dm_scale,
                     "physical scale of the M-normalised perturbation [mm/s]")
      ->capture_default_str();
  taylor->add_option("--levels", taylor_args->levels, "number of halvings")
      ->capture_default_str();
  taylor->add_option("--seed", taylor_args->seed, "perturbation seed")
      ->capture_default_str();
  taylor->add_flag("--negate-gradient", taylor_args->negate_gradient,
                   "test hook: flip the gradient sign");
  taylor->callback([taylor_model, taylor_args] {
    throw_with_code(cmd_taylor(*taylor_model, *taylor_args));
  });

  // export -------------------------------------------------------------------
  auto* exporter = app.add_subcommand("export",
                                      "write VTK snapshots of a trajectory");
  exporter->fallthrough();
  auto export_args = std::make_shared<ExportArgs>();
  exporter->add_option("--mesh", export_args->mesh_path, "mesh file")
      ->required();
  exporter->add_option("--trajectory", export_args->trajectory,
                       "trajectory checkpoint")
      ->required();
  exporter->add_option("--out-prefix", export_args->out_prefix,
                       "output path prefix")
      ->required();
  exporter->add_option("--step", export_args->steps, "step index (repeatable)");
  exporter->add_option("--time", export_args->times,
                       "snapshot time [s] (repeatable)");
  exporter->add_flag("--all", export_args->all, "export every step");
  exporter->callback([export_args] {
    throw_with_code(cmd_export(*export_args));
  });

  // run-study ------------------------------------------------------------
  auto* study = app.add_subcommand(
      "run-study", "run the bundled twin-experiment study");
  study->fallthrough();
  auto study_args = std::make_shared<StudyArgs>();
  study->add_option("--out-dir", study_args->out_dir, "output directory")
      ->required();
  study->add_option("--edge-length", study_args->edge_length,
                    "mesh edge length [mm]")
      ->capture_default_str();
  study->add_option("--dt", study_args->dt, "timestep [s]")
      ->capture_default_str();
  study->add_option("--max-iter", study_args->max_iter,
                    "optimizer iteration budget")
      ->capture_default_str();
  study->add_option("--only", study_args->only,
                    "run only cells whose name contains this substring");
  study->callback([study_args] {
    throw_with_code(cmd_run_study(*study_args));
  });

  std::vector<const char*> argv;
  argv.push_back("flow4dvar");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const CommandExit& e) {
    return e.code;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace flow4dvar
