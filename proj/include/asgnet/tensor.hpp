#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace asg {

/// Dense float32 array of rank 1..4, row-major with the last extent fastest.
///
/// Rank-4 tensors follow (N, C, H, W). A default-constructed tensor is an
/// empty placeholder with rank 0 and no data; every other tensor has all
/// extents >= 1 and exactly prod(dims) values.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims, float fill = 0.0f);
  Tensor(std::vector<int> dims, std::vector<float> data);

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
  static Tensor full(std::vector<int> dims, float v) { return Tensor(std::move(dims), v); }

  const std::vector<int>& dims() const noexcept { return dims_; }
  int rank() const noexcept { return static_cast<int>(dims_.size()); }
  int dim(int axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // NCHW accessors; only valid on rank-4 tensors.
  int n() const { return dim(0); }
  int c() const { return dim(1); }
  int h() const { return dim(2); }
  int w() const { return dim(3); }
  std::size_t plane() const { return static_cast<std::size_t>(h()) * static_cast<std::size_t>(w()); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  float at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }
  float& at(int r, int col) { return data_[static_cast<std::size_t>(r) * dims_[1] + col]; }
  float at(int r, int col) const { return data_[static_cast<std::size_t>(r) * dims_[1] + col]; }

  /// Pointer to the (n, c) spatial plane of a rank-4 tensor.
  float* plane_ptr(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
  const float* plane_ptr(int n, int c) const { return data_.data() + offset(n, c, 0, 0); }

  /// Same data viewed with different extents; the element count must match.
  Tensor reshaped(std::vector<int> dims) const;

  bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
  bool all_finite() const noexcept;
  float min() const;
  float max() const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + y) * dims_[3] + x;
  }

  std::vector<int> dims_;
  std::vector<float> data_;
};

/// Human-readable "(1, 3, 8, 8)" rendering used in diagnostics.
std::string shape_string(const std::vector<int>& dims);

using TensorRefs = std::vector<std::reference_wrapper<const Tensor>>;

}  // namespace asg
