#pragma once

// Central finite-difference gradient checking shared by the unit tests and
// the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "knitwork/random.hpp"
#include "knitwork/tensor.hpp"

namespace knitwork::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||) per
// leaf, over a random subset of at most max_entries elements of each leaf.
// `loss` must rebuild the graph from the current leaf values on every call.
inline GradCheck gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                           Rng& rng, std::size_t max_entries = 48, double h = 1e-5) {
  for (Tensor& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(loss());
  GradCheck out;
  for (Tensor& t : leaves) {
    const std::vector<double> analytic = t.grad();
    std::vector<std::size_t> idx(t.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > max_entries) {
      for (std::size_t i = 0; i < max_entries; ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      }
      idx.resize(max_entries);
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i : idx) {
      const double saved = t.at(i);
      double plus, minus;
      {
        NoGradGuard guard;
        t.at(i) = saved + h;
        plus = loss().item();
        t.at(i) = saved - h;
        minus = loss().item();
      }
      t.at(i) = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      ++out.checked;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    out.max_rel_error = std::max(out.max_rel_error, std::sqrt(diff2) / denom);
    t.zero_grad();
  }
  return out;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace knitwork::testing
