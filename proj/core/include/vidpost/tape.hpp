// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode tape over the Gaussian policy's log-prob graph.
// The engine executes real gradients while metering two quantities the
// memory-efficiency claims are stated in: retained intermediate-gradient
// scalar units (live from allocation until their owning graph task ends)
// and backward-pass flops.
#pragma once

#include <cstdint>
#include <vector>

#include "vidpost/grid.hpp"

namespace vidpost::dpo {

enum class OpKind {
  AffineResidual,       // d = y - mu          (mu is a parameter input)
  GaussCellLogDensity,  // l = c0 - d^2/(2s^2) (s is a parameter input)
  ReduceSum,            // scalar = sum(l)
};

struct TapeNode {
  OpKind kind;
  std::int64_t in_size = 0;
  std::int64_t out_size = 0;
};

/// Program describing one log-prob branch for a given shape. Parameters are
/// registered as a flat vector: mean cells first, then sigma.
class Tape {
 public:
  static Tape gaussian_logp(Dims dims);

  [[nodiscard]] const std::vector<TapeNode>& nodes() const { return nodes_; }
  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] std::int64_t cells() const { return dims_.cells(); }

  /// Flat parameter vector length: mean cells + 1 (sigma).
  [[nodiscard]] std::int64_t param_units() const { return cells() + 1; }

  /// Intermediate-gradient units one backward pass of this branch retains.
  [[nodiscard]] std::int64_t intermediate_units() const;

  /// Backward-pass flop count for one branch.
  [[nodiscard]] std::int64_t backward_flops() const;

 private:
  Dims dims_;
  std::vector<TapeNode> nodes_;
};

/// Live-unit meter shared by a whole backward invocation.
struct UnitMeter {
  std::int64_t live = 0;
  std::int64_t peak = 0;
  std::int64_t flops = 0;

  void allocate(std::int64_t n) {
    live += n;
    if (live > peak) peak = live;
  }
  void release(std::int64_t n) { live -= n; }
};

}  // namespace vidpost::dpo
