#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace wdro {

// Dense row-major tensor of doubles. Rank 0/1/2 is all the network code
// needs; shape {} holds a single scalar.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor zeros(std::vector<std::size_t> shape);
  // data is row-major, rows*cols entries
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t numel() const { return values.size(); }
  bool is_scalar() const { return values.size() == 1; }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  // rank-2 access, i*cols + j
  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  std::string shape_str() const;
};

bool same_bits(const Tensor& a, const Tensor& b);

}  // namespace wdro
