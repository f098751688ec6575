#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "regionscan/classifier/matrix.hpp"
#include "regionscan/error.hpp"

namespace regionscan::nn {

/// Per-column standardization (population standard deviation). Constant
/// columns get std 1.
struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t width() const { return mean.size(); }

  void transform_row(std::span<double> x) const {
    if (x.size() != mean.size()) throw ShapeError("scaler: width mismatch");
    for (std::size_t c = 0; c < x.size(); ++c) x[c] = (x[c] - mean[c]) / std[c];
  }

  Matrix transform(const Matrix& x) const {
    if (x.cols != mean.size()) throw ShapeError("scaler: width mismatch");
    Matrix out = x;
    for (std::size_t r = 0; r < out.rows; ++r) transform_row(out.row(r));
    return out;
  }

  bool operator==(const ScalerParams&) const = default;
};

inline ScalerParams fit_scaler(const Matrix& x) {
  if (x.rows == 0) throw EmptyDatasetError("scaler: no rows to fit");
  ScalerParams p;
  p.mean.assign(x.cols, 0.0);
  p.std.assign(x.cols, 0.0);
  const double n = static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) p.mean[c] += x(r, c);
  for (auto& m : p.mean) m /= n;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double d = x(r, c) - p.mean[c];
      p.std[c] += d * d;
    }
  }
  for (auto& s : p.std) {
    s = std::sqrt(s / n);
    if (!(s > 0.0)) s = 1.0;
  }
  return p;
}

}  // namespace regionscan::nn
