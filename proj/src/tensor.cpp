#include "asgnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asgnet/error.hpp"

namespace asg {
namespace {

std::size_t element_count(const std::vector<int>& dims) {
  if (dims.empty() || dims.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got " + std::to_string(dims.size()));
  }
  std::size_t count = 1;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 1) {
      throw ShapeError("tensor extent " + std::to_string(i) + " must be >= 1 in " +
                       shape_string(dims));
    }
    count *= static_cast<std::size_t>(dims[i]);
  }
  return count;
}

}  // namespace

Tensor::Tensor(std::vector<int> dims, float fill)
    : dims_(std::move(dims)), data_(element_count(dims_), fill) {}

Tensor::Tensor(std::vector<int> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (element_count(dims_) != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(dims_));
  }
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(dims_));
  }
  return dims_[static_cast<std::size_t>(axis)];
}

Tensor Tensor::reshaped(std::vector<int> dims) const { return Tensor(std::move(dims), data_); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

float Tensor::min() const {
  if (data_.empty()) throw ShapeError("min of empty tensor");
  return *std::min_element(data_.begin(), data_.end());
}

float Tensor::max() const {
  if (data_.empty()) throw ShapeError("max of empty tensor");
  return *std::max_element(data_.begin(), data_.end());
}

std::string shape_string(const std::vector<int>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

}  // namespace asg
