#include "flow4dvar/verify.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

TaylorReport taylor_test(const TaylorEvaluator& evaluator, const Vector& m,
                         const Vector& dm, double h0, int levels,
                         bool negate_gradient) {
  if (levels < 3) throw ContractError("taylor_test needs at least 3 levels");
  if (dm.norm() == 0.0) throw ContractError("taylor_test needs a nonzero dm");

  Evaluation base = evaluator(m);
  double directional = base.gradient.dot(dm);
  if (negate_gradient) directional = -directional;

  TaylorReport report;
  double h = h0;
  for (int level = 0; level < levels; ++level, h *= 0.5) {
    double value = evaluator(m + h * dm).value;
    double r0 = std::abs(value - base.value);
    double r1 = std::abs(value - base.value - h * directional);
    report.steps.push_back(h);
    report.remainder0.push_back(r0);
    report.remainder1.push_back(r1);
    report.roundoff.push_back(r1 < 1e-14 * std::abs(base.value));
  }

  double sum0 = 0.0, sum1 = 0.0;
  int count0 = 0, count1 = 0;
  for (int level = 0; level + 1 < levels; ++level) {
    double o0 = std::log2(report.remainder0[level] /
                          report.remainder0[level + 1]);
    report.orders0.push_back(o0);
    sum0 += o0;
    ++count0;
    if (report.roundoff[level] || report.roundoff[level + 1]) {
      report.orders1.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double o1 = std::log2(report.remainder1[level] /
                          report.remainder1[level + 1]);
    report.orders1.push_back(o1);
    sum1 += o1;
    ++count1;
  }
  report.fitted_order0 = count0 ? sum0 / count0 : 0.0;
  report.fitted_order1 = count1 ? sum1 / count1 : 0.0;
  return report;
}

std::string TaylorReport::to_text() const {
  std::ostringstream out;
  char buf[160];
  out << "  h             |J(m+h dm)-J(m)|   order   first-order remainder  "
         "order\n";
  for (size_t i = 0; i < steps.size(); ++i) {
    std::string o0 = "-", o1 = "-";
    if (i > 0) {
      std::snprintf(buf, sizeof(buf), "%.3f", orders0[i - 1]);
      o0 = buf;
      if (std::isnan(orders1[i - 1]))
        o1 = "roundoff";
      else {
        std::snprintf(buf, sizeof(buf), "%.3f", orders1[i - 1]);
        o1 = buf;
      }
    }
    std::snprintf(buf, sizeof(buf), "  %-12.5e  %-17.10e %-7s %-22.10e %s\n",
                  steps[i], remainder0[i], o0.c_str(), remainder1[i],
                  o1.c_str());
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "  fitted orders: zeroth %.3f, first %.3f\n", fitted_order0,
                fitted_order1);
  out << buf;
  return out.str();
}

Vector taylor_direction(const ControlLayout& layout, const RieszMap& riesz,
                        TaylorVariant variant, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&rng] { return ((rng() >> 11) * 0x1.0p-53) * 2.0 - 1.0; };
  Vector dm = Vector::Zero(layout.stacked_dim());
  int nf = layout.n_u0();
  if (variant != TaylorVariant::g_only)
    for (int i = 0; i < nf; ++i) dm[i] = draw();
  if (variant != TaylorVariant::u0_only)
    for (int i = nf; i < layout.stacked_dim(); ++i) dm[i] = draw();
  double norm = riesz.norm(dm);
  if (norm == 0.0) throw ContractError("taylor direction is empty");
  return dm / norm;
}

}  // namespace flow4dvar
