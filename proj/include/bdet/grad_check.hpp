#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

namespace bdet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t worst_index = 0;
  std::size_t n_checked = 0;
  bool pass = false;
  double tolerance = 0.0;
};

// Central finite differences against an analytic gradient, f64 only.
//
// `loss` evaluates the scalar objective from the current contents of `x`;
// `analytic` holds dloss/dx at the unperturbed point. Relative error is
// |fd - an| / max(1, |fd|, |an|).
inline GradCheckReport grad_check(const std::function<double()>& loss,
                                  double* x, const double* analytic,
                                  std::size_t n, double tolerance,
                                  double step = 1e-5) {
  GradCheckReport rep;
  rep.tolerance = tolerance;
  rep.n_checked = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double lp = loss();
    x[i] = saved - step;
    const double lm = loss();
    x[i] = saved;
    const double fd = (lp - lm) / (2.0 * step);
    const double an = analytic[i];
    const double abs_err = std::abs(fd - an);
    const double rel =
        abs_err / std::max({1.0, std::abs(fd), std::abs(an)});
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = i;
    }
    rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
  }
  rep.pass = rep.max_rel_err < tolerance;
  return rep;
}

}  // namespace bdet
