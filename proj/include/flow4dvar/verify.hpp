#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "flow4dvar/control.hpp"
#include "flow4dvar/optimize.hpp"

namespace flow4dvar {

// Remainder tables of the Taylor test at steps h0, h0/2, ...:
//   r0(h) = |Jhat(m + h dm) - Jhat(m)|                    (expected O(h))
//   r1(h) = |Jhat(m + h dm) - Jhat(m) - h <dJhat, dm>|    (expected O(h^2))
// Levels whose first-order remainder falls below 1e-14 |Jhat(m)| are flagged
// as converged to roundoff and excluded from the fitted order.
struct TaylorReport {
  std::vector<double> steps;
  std::vector<double> remainder0;
  std::vector<double> remainder1;
  std::vector<double> orders0;  // log2 ratios between consecutive levels
  std::vector<double> orders1;
  std::vector<bool> roundoff;   // per level
  double fitted_order0 = 0.0;   // mean over valid consecutive pairs
  double fitted_order1 = 0.0;

  std::string to_text() const;
};

using TaylorEvaluator = std::function<Evaluation(const Vector&)>;

TaylorReport taylor_test(const TaylorEvaluator& evaluator, const Vector& m,
                         const Vector& dm, double h0, int levels,
                         bool negate_gradient = false);

enum class TaylorVariant { joint, u0_only, g_only };

// Seeded random perturbation, restricted to one control block when asked and
// normalised in the M-norm.
Vector taylor_direction(const ControlLayout& layout, const RieszMap& riesz,
                        TaylorVariant variant, std::uint64_t seed);

}  // namespace flow4dvar
