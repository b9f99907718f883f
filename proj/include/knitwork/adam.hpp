#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "knitwork/tensor.hpp"

namespace knitwork {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  // Moments sized for the total element count of `params`.
  AdamState(std::span<const Tensor> params, double lr);
};

std::size_t total_elements(std::span<const Tensor> params);

// One bias-corrected Adam update of every parameter, then zeroes the grads.
// Every parameter must carry an accumulated gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

// Allocates (if needed) and clears the gradient of every parameter.
void zero_grads(std::span<Tensor> params);

}  // namespace knitwork
