// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vidpost/errors.hpp"

namespace vidpost {

/// Shape of a T x H x W grid. Immutable once attached to a Grid.
struct Dims {
  int t = 0;
  int h = 0;
  int w = 0;

  [[nodiscard]] std::int64_t cells() const {
    return static_cast<std::int64_t>(t) * h * w;
  }
  [[nodiscard]] bool valid() const { return t > 0 && h > 0 && w > 0; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense row-major T x H x W array of doubles. The storage type behind
/// video tensors, policy means and advantage maps.
class Grid {
 public:
  Grid() = default;

  explicit Grid(Dims d, double fill = 0.0) : dims_(d) {
    if (!d.valid()) throw ConfigError("Grid: dims must be positive");
    data_.assign(static_cast<std::size_t>(d.cells()), fill);
  }

  Grid(Dims d, std::vector<double> values) : dims_(d), data_(std::move(values)) {
    if (!d.valid()) throw ConfigError("Grid: dims must be positive");
    if (data_.size() != static_cast<std::size_t>(d.cells()))
      throw ConfigError("Grid: value count does not match dims");
  }

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::size_t index(int t, int h, int w) const {
    return (static_cast<std::size_t>(t) * dims_.h + h) * dims_.w + w;
  }
  [[nodiscard]] double& at(int t, int h, int w) { return data_[index(t, h, w)]; }
  [[nodiscard]] double at(int t, int h, int w) const { return data_[index(t, h, w)]; }

  [[nodiscard]] double& operator[](std::size_t i) { return data_[i]; }
  [[nodiscard]] double operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::span<double> values() { return data_; }
  [[nodiscard]] std::span<const double> values() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Dims dims_;
  std::vector<double> data_;
};

[[nodiscard]] inline bool all_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

[[nodiscard]] inline bool all_finite(const Grid& g) { return all_finite(g.values()); }

inline void require_same_dims(const Dims& a, const Dims& b, const std::string& what) {
  if (!(a == b))
    throw ConfigError(what + ": dims mismatch (" + std::to_string(a.t) + "x" +
                      std::to_string(a.h) + "x" + std::to_string(a.w) + " vs " +
                      std::to_string(b.t) + "x" + std::to_string(b.h) + "x" +
                      std::to_string(b.w) + ")");
}

}  // namespace vidpost
