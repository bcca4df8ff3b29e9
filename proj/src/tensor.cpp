#include "wdro/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "wdro/errors.hpp"

namespace wdro {

namespace {
std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.shape = {};
  t.values = {v};
  return t;
}

Tensor Tensor::vector(std::vector<double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.values = std::move(v);
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.values.assign(shape_numel(t.shape), 0.0);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  if (data.size() != rows * cols)
    throw ValidationError("tensor: matrix data size " + std::to_string(data.size()) +
                          " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  Tensor t;
  t.shape = {rows, cols};
  t.values = std::move(data);
  return t;
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return values[i * shape[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return values[i * shape[1] + j];
}

bool Tensor::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "{";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "}";
}

bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  if (a.values.size() != b.values.size()) return false;
  return a.values.empty() ||
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

}  // namespace wdro
