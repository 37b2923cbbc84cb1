#pragma once

#include <cstdint>
#include <vector>

#include "srgf/matrix.hpp"

namespace srgf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, aligned index-by-index with the parameter
/// list handed to adam_step.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One bias-corrected Adam update of every parameter. Moment buffers are
/// created on the first call. Throws ShapeError when params, grads and moments
/// disagree.
void adam_step(AdamState& state, std::vector<Matrix*> params, const std::vector<Matrix>& grads);

}  // namespace srgf
