#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace surfnet::nn {

/// Storage aligned to Eigen's vector width, so vectorized reductions over a
/// buffer always split at the same offsets and round identically.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense row-major float64 array. Images are (channels, height, width);
/// vectors are (length).
struct Tensor {
  std::vector<int> shape;
  Buffer data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0)
      : shape(std::move(s)), data(count(shape), fill) {}
  Tensor(std::vector<int> s, const std::vector<double>& values)
      : shape(std::move(s)), data(values.begin(), values.end()) {}

  static std::size_t count(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[i]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  /// (c, h, w) access for rank-3 tensors.
  double& at(int c, int h, int w) { return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w]; }
  double at(int c, int h, int w) const { return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w]; }

  bool all_finite() const;
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  Tensor& operator+=(const Tensor& o);
};

std::string shape_string(const std::vector<int>& shape);
double dot(const Tensor& a, const Tensor& b);

}  // namespace surfnet::nn
