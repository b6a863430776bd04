#include "flow4dvar/optimize.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

const char* to_string(OptimizerStatus status) {
  switch (status) {
    case OptimizerStatus::converged_ftol: return "converged_ftol";
    case OptimizerStatus::converged_gnorm: return "converged_gnorm";
    case OptimizerStatus::max_iterations: return "max_iterations";
    case OptimizerStatus::line_search_failed: return "line_search_failed";
  }
  return "?";
}

namespace {

struct CurvaturePair {
  Vector s;     // primal step
  Vector y;     // dual gradient difference
  double rho;   // <y, s>
  Vector h0y;   // H0 y (cached for the scaling factor)
  double y_h0y;
};

// Two-loop recursion with H0 in the centre, scaled by the standard
// gamma = <s,y>/<y,H0 y> of the newest pair.
Vector lbfgs_direction(const Vector& gradient, const DualToPrimal& h0,
                       const std::deque<CurvaturePair>& pairs) {
  Vector q = gradient;
  std::vector<double> a(pairs.size());
  for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
    a[i] = pairs[i].s.dot(q) / pairs[i].rho;
    q -= a[i] * pairs[i].y;
  }
  Vector r = h0(q);
  if (!pairs.empty()) {
    const CurvaturePair& last = pairs.back();
    r *= last.rho / last.y_h0y;
  }
  for (size_t i = 0; i < pairs.size(); ++i) {
    double b = pairs[i].y.dot(r) / pairs[i].rho;
    r += (a[i] - b) * pairs[i].s;
  }
  return -r;
}

// Minimiser of the cubic interpolant through (a, fa, ga) and (b, fb, gb);
// falls back to bisection when degenerate or outside the bracket.
double cubic_step(double a, double fa, double ga, double b, double fb,
                  double gb) {
  double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  double disc = d1 * d1 - ga * gb;
  if (disc < 0.0) return 0.5 * (a + b);
  double d2 = std::sqrt(disc) * (b > a ? 1.0 : -1.0);
  double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
  double lo = std::min(a, b), hi = std::max(a, b);
  double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin)
    return 0.5 * (a + b);
  return t;
}

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  Evaluation eval;
  int trials = 0;
};

// Strong Wolfe search along d from m (Nocedal-Wright bracketing + zoom).
LineSearchResult line_search(const Objective& objective, const Vector& m,
                             const Vector& d, double f0, double df0,
                             double alpha_init, const OptimizerConfig& cfg) {
  LineSearchResult best;
  best.eval.value = f0;

  auto probe = [&](double alpha) {
    Evaluation e = objective(m + alpha * d);
    ++best.trials;
    if (!best.ok && e.value < best.eval.value) {
      best.alpha = alpha;
      best.eval = e;
    }
    return e;
  };
  auto wolfe = [&](double alpha, const Evaluation& e, double dfa) {
    return e.value <= f0 + cfg.c1 * alpha * df0 &&
           std::abs(dfa) <= cfg.c2 * std::abs(df0);
  };

  struct Point {
    double alpha, f, df;
    Evaluation eval;
  };

  auto zoom = [&](Point lo, Point hi) -> bool {
    while (best.trials < cfg.max_line_search_trials) {
      double alpha =
          cubic_step(lo.alpha, lo.f, lo.df, hi.alpha, hi.f, hi.df);
      Evaluation e = probe(alpha);
      double dfa = e.gradient.dot(d);
      Point pt{alpha, e.value, dfa, std::move(e)};
      if (pt.f > f0 + cfg.c1 * alpha * df0 || pt.f >= lo.f) {
        hi = std::move(pt);
      } else {
        if (wolfe(alpha, pt.eval, dfa)) {
          best.ok = true;
          best.alpha = alpha;
          best.eval = std::move(pt.eval);
          return true;
        }
        if (dfa * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
        lo = std::move(pt);
      }
      if (std::abs(hi.alpha - lo.alpha) <
          1e-14 * std::max(1.0, std::abs(lo.alpha)))
        break;
    }
    return false;
  };

  Point prev{0.0, f0, df0, {}};
  double alpha = alpha_init;
  while (best.trials < cfg.max_line_search_trials) {
    Evaluation e = probe(alpha);
    double dfa = e.gradient.dot(d);
    Point pt{alpha, e.value, dfa, std::move(e)};
    if (pt.f > f0 + cfg.c1 * alpha * df0 ||
        (best.trials > 1 && pt.f >= prev.f)) {
      if (zoom(std::move(prev), std::move(pt))) return best;
      break;
    }
    if (wolfe(alpha, pt.eval, dfa)) {
      best.ok = true;
      best.alpha = alpha;
      best.eval = std::move(pt.eval);
      return best;
    }
    if (dfa >= 0.0) {
      if (zoom(std::move(pt), std::move(prev))) return best;
      break;
    }
    prev = std::move(pt);
    alpha *= 2.0;
  }
  return best;
}

}  // namespace

MinimizeResult minimize(const Objective& objective, Vector m0,
                        const DualToPrimal& h0, const OptimizerConfig& cfg,
                        const IterationObserver& observer) {
  if (cfg.memory < 1 || cfg.c1 <= 0.0 || cfg.c1 >= cfg.c2 || cfg.c2 >= 1.0)
    throw ConfigError("optimizer needs 0 < c1 < c2 < 1 and memory >= 1");

  MinimizeResult result;
  result.m = std::move(m0);
  Evaluation current = objective(result.m);

  auto gnorm_m = [&](const Vector& g) {
    return std::sqrt(std::max(0.0, g.dot(h0(g))));
  };
  double g0_norm = gnorm_m(current.gradient);
  double f_initial = current.value;

  result.trace.rows.push_back(
      {0, current.misfit, current.reg, current.value, g0_norm, 0.0, 0});
  result.trace.status = OptimizerStatus::max_iterations;

  std::deque<CurvaturePair> pairs;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    Vector d = lbfgs_direction(current.gradient, h0, pairs);
    double df0 = current.gradient.dot(d);
    if (df0 >= 0.0) {
      pairs.clear();
      d = -h0(current.gradient);
      df0 = current.gradient.dot(d);
      if (df0 >= 0.0)
        throw SolverError("L-BFGS produced a non-descent direction");
    }

    // Scale-invariant first trial; quasi-Newton steps afterwards.
    double alpha_init = 1.0;
    if (iter == 1 && current.value > 0.0)
      alpha_init = std::min(1e8, 2.0 * current.value / std::abs(df0));

    LineSearchResult ls = line_search(objective, result.m, d, current.value,
                                      df0, alpha_init, cfg);
    if (!ls.ok) {
      if (ls.alpha > 0.0 && ls.eval.value < current.value) {
        // Keep the best probed point, flag the failed search.
        result.m += ls.alpha * d;
        current = std::move(ls.eval);
        result.trace.rows.push_back({iter, current.misfit, current.reg,
                                     current.value, gnorm_m(current.gradient),
                                     ls.alpha, ls.trials});
      }
      result.trace.status = OptimizerStatus::line_search_failed;
      return result;
    }

    Vector s = ls.alpha * d;
    Vector y = ls.eval.gradient - current.gradient;
    double rho = y.dot(s);
    if (rho > 1e-12 * y.norm() * s.norm()) {
      CurvaturePair pair;
      pair.s = std::move(s);
      pair.y = std::move(y);
      pair.rho = rho;
      pair.h0y = h0(pair.y);
      pair.y_h0y = pair.y.dot(pair.h0y);
      pairs.push_back(std::move(pair));
      if (static_cast<int>(pairs.size()) > cfg.memory) pairs.pop_front();
    }

    double f_prev = current.value;
    result.m += ls.alpha * d;
    current = std::move(ls.eval);
    double gnorm = gnorm_m(current.gradient);
    result.trace.rows.push_back({iter, current.misfit, current.reg,
                                 current.value, gnorm, ls.alpha, ls.trials});
    if (observer) observer({iter, result.m, d, ls.alpha});

    if (std::abs(current.value - f_prev) <=
        cfg.ftol_rel * std::abs(f_initial)) {
      result.trace.status = OptimizerStatus::converged_ftol;
      return result;
    }
    if (gnorm <= cfg.gtol_rel * g0_norm) {
      result.trace.status = OptimizerStatus::converged_gnorm;
      return result;
    }
  }
  return result;
}

void write_trace_csv(const OptimizerTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "iter,J,R,Jhat,gnormM,step,ls_trials\n";
  char buf[256];
  for (const TraceRow& row : trace.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  row.iter, row.misfit, row.reg, row.jhat, row.gnorm_m,
                  row.step, row.ls_trials);
    out << buf;
  }
  out << "# status " << to_string(trace.status) << "\n";
}

}  // namespace flow4dvar
