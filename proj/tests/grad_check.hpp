// Central finite-difference gradient verification, always at 64-bit.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "aigrl/tensor.hpp"

namespace gradcheck {

struct Report {
  double max_rel_err = 0.0;
  int checked = 0;
};

// forward_loss re-evaluates the scalar loss from the current parameter
// values; analytic holds one gradient buffer per store tensor.
inline Report finite_diff(aigrl::ParamStore<double>& params,
                          const std::function<double()>& forward_loss,
                          const std::vector<std::vector<double>>& analytic, double h = 1e-5,
                          int stride = 1) {
  Report rep;
  for (size_t p = 0; p < params.values.size(); ++p) {
    auto& data = params.values[p].data;
    for (size_t i = 0; i < data.size(); i += stride) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = forward_loss();
      data[i] = keep - h;
      const double down = forward_loss();
      data[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[p][i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - an) / denom);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace gradcheck
