#pragma once

#include <functional>
#include <string>
#include <vector>

#include "flow4dvar/fem.hpp"

namespace flow4dvar {

// One objective evaluation: value = misfit + reg, and the dual gradient in
// the same stacked layout as the iterate.
struct Evaluation {
  double value = 0.0;
  double misfit = 0.0;
  double reg = 0.0;
  Vector gradient;
};

using Objective = std::function<Evaluation(const Vector&)>;
// H0: maps dual vectors to primal ones (the Riesz operator, or the identity
// for the Euclidean test hook).
using DualToPrimal = std::function<Vector(const Vector&)>;

struct OptimizerConfig {
  int memory = 10;  // stored curvature pairs
  double c1 = 1e-4;
  double c2 = 0.9;
  double ftol_rel = 1e-4;   // |J_k - J_{k-1}| / |J_0|
  double gtol_rel = 1e-12;  // gradient M-norm relative to the initial one
  int max_iterations = 100;
  int max_line_search_trials = 25;
};

enum class OptimizerStatus {
  converged_ftol,
  converged_gnorm,
  max_iterations,
  line_search_failed,
};

const char* to_string(OptimizerStatus status);

struct TraceRow {
  int iter = 0;
  double misfit = 0.0;   // J
  double reg = 0.0;      // R
  double jhat = 0.0;     // J + R
  double gnorm_m = 0.0;  // gradient norm in the M-metric
  double step = 0.0;     // accepted step length
  int ls_trials = 0;
};

struct OptimizerTrace {
  std::vector<TraceRow> rows;  // row 0 is the initial point
  OptimizerStatus status = OptimizerStatus::max_iterations;
};

struct MinimizeResult {
  Vector m;
  OptimizerTrace trace;
};

// Per-iteration internals exposed to tests (direction invariance checks).
struct IterationInfo {
  int iter;
  const Vector& m;
  const Vector& direction;
  double step;
};
using IterationObserver = std::function<void(const IterationInfo&)>;

// Limited-memory BFGS in the two-loop form with all pairings taken as
// dual-primal coefficient products and H0 as the recursion centre, plus a
// strong-Wolfe line search (bracket + zoom with cubic interpolation).
MinimizeResult minimize(const Objective& objective, Vector m0,
                        const DualToPrimal& h0, const OptimizerConfig& cfg,
                        const IterationObserver& observer = {});

// CSV: iter,J,R,Jhat,gnormM,step,ls_trials
void write_trace_csv(const OptimizerTrace& trace, const std::string& path);

}  // namespace flow4dvar
