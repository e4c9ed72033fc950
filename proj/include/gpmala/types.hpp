#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace gpmala {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned rectangle, the input domain of every problem.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi);

  [[nodiscard]] int dim() const { return static_cast<int>(lower.size()); }
  [[nodiscard]] Vector width() const { return upper - lower; }
  [[nodiscard]] double volume() const { return width().prod(); }
  [[nodiscard]] bool contains(const Vector& x) const;
  [[nodiscard]] double diameter() const { return width().norm(); }
};

[[nodiscard]] bool all_finite(const Eigen::Ref<const Matrix>& m);

}  // namespace gpmala
