#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "stnp/tensor.hpp"

namespace stnp::testing {

// Central finite differences over the raw entries of a parameter tensor.
// `f` must re-evaluate the scalar objective from current parameter values.
inline std::vector<double> finite_diff(stnp::Tensor& param,
                                       const std::function<double()>& f,
                                       double h = 1e-5) {
  std::vector<double> g(param.values().size(), 0.0);
  for (size_t i = 0; i < g.size(); ++i) {
    const double saved = param.values()[i];
    param.values()[i] = saved + h;
    const double up = f();
    param.values()[i] = saved - h;
    const double down = f();
    param.values()[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const std::vector<double>& got,
                            const std::vector<double>& want,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (size_t i = 0; i < got.size(); ++i) {
    const double denom = std::max(std::abs(want[i]), floor);
    worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
  }
  return worst;
}

}  // namespace stnp::testing
