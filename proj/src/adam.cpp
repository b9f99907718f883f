#include "knitwork/adam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "knitwork/errors.hpp"
#include "knitwork/simd.hpp"

namespace knitwork {

std::size_t total_elements(std::span<const Tensor> params) {
  std::size_t n = 0;
  for (const Tensor& p : params) n += p.numel();
  return n;
}

AdamState::AdamState(std::span<const Tensor> params, double lr)
    : first_moment(total_elements(params), 0.0),
      second_moment(total_elements(params), 0.0),
      learning_rate(lr) {}

void adam_step(std::span<Tensor> params, AdamState& state) {
  const std::size_t total = total_elements(params);
  if (state.first_moment.size() != total || state.second_moment.size() != total) {
    throw ContractError("adam_step: optimizer state tracks " +
                        std::to_string(state.first_moment.size()) + " values but parameters hold " +
                        std::to_string(total));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " " +
                          shape_string(params[i].shape()) + " has no gradient");
    }
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const simd::AdamCoeffs coeffs{state.learning_rate, state.beta1, state.beta2, state.epsilon,
                                1.0 - std::pow(state.beta1, t), 1.0 - std::pow(state.beta2, t)};
  std::size_t offset = 0;
  for (Tensor& p : params) {
    const std::size_t n = p.numel();
    std::span<double> m(state.first_moment.data() + offset, n);
    std::span<double> v(state.second_moment.data() + offset, n);
    simd::adam_update(p.data(), p.grad_span(), m, v, coeffs);
    p.zero_grad();
    offset += n;
  }
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) {
    auto g = p.grad_span();
    std::fill(g.begin(), g.end(), 0.0);
  }
}

}  // namespace knitwork
