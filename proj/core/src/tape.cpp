// SPDX-License-Identifier: Apache-2.0
#include "vidpost/tape.hpp"

namespace vidpost::dpo {

Tape Tape::gaussian_logp(Dims dims) {
  if (!dims.valid()) throw ConfigError("Tape: invalid dims");
  Tape t;
  t.dims_ = dims;
  const std::int64_t n = dims.cells();
  t.nodes_ = {
      {OpKind::AffineResidual, n, n},
      {OpKind::GaussCellLogDensity, n, n},
      {OpKind::ReduceSum, n, 1},
  };
  return t;
}

std::int64_t Tape::intermediate_units() const {
  // ReduceSum backward allocates the cell-gradient of l; GaussCellLogDensity
  // backward allocates the gradient of d. Parameter gradients accumulate into
  // the shared parameter buffer and are not intermediates.
  std::int64_t units = 0;
  for (const auto& node : nodes_) {
    switch (node.kind) {
      case OpKind::ReduceSum: units += node.in_size; break;
      case OpKind::GaussCellLogDensity: units += node.in_size; break;
      case OpKind::AffineResidual: break;
    }
  }
  return units;
}

std::int64_t Tape::backward_flops() const {
  std::int64_t flops = 0;
  for (const auto& node : nodes_) {
    switch (node.kind) {
      case OpKind::ReduceSum:
        flops += node.in_size;  // broadcast of the seed
        break;
      case OpKind::GaussCellLogDensity:
        flops += 8 * node.in_size + 3;  // grad_d and the sigma accumulation
        break;
      case OpKind::AffineResidual:
        flops += 2 * node.in_size;  // negate and accumulate into mean grads
        break;
    }
  }
  return flops;
}

}  // namespace vidpost::dpo
