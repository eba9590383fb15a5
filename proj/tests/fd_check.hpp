#pragma once

// Finite-difference gradient oracle for the tape. Builders are re-run from
// scratch for every probe so cached state cannot leak between evaluations.

#include "her2flex/nn/graph.hpp"

#include <functional>
#include <string>

namespace her2flex::testing {

using BuildLoss = std::function<int(nn::Graph<double>&)>;

inline double eval_loss(const BuildLoss& build) {
  nn::Graph<double> g(false);
  return g.scalar_value(build(g));
}

struct FdReport {
  double max_rel_err = 0.0;
  std::string worst;
  long checked = 0;
  long nonzero = 0;
};

// Central differences on every element of every parameter in the store.
inline FdReport check_gradients(nn::ParamStore<double>& store, const BuildLoss& build,
                                double h = 1e-6) {
  store.zero_grads();
  {
    nn::Graph<double> g;
    g.backward(build(g));
  }
  FdReport report;
  for (auto& [name, entry] : store.entries()) {
    for (Eigen::Index i = 0; i < entry.value.size(); ++i) {
      const double saved = entry.value(i);
      entry.value(i) = saved + h;
      const double up = eval_loss(build);
      entry.value(i) = saved - h;
      const double down = eval_loss(build);
      entry.value(i) = saved;

      const double fd = (up - down) / (2.0 * h);
      const double an = entry.grad(i);
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      const double rel = std::abs(fd - an) / denom;
      ++report.checked;
      if (an != 0.0) ++report.nonzero;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace her2flex::testing
