#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nar {

/// Dense float32 array in row-major order. Shape extents are non-negative;
/// data.size() always equals the product of the extents.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, float value);
  static Tensor scalar(float value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  // Product of all extents except the last; the flattened "row" view used by
  // matmul and the row-wise ops.
  int64_t rows() const;
  int cols() const { return shape_.empty() ? 1 : shape_.back(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool defined() const { return !shape_.empty() || !data_.empty(); }
  bool all_finite() const;

  std::string shape_str() const;
  static std::string shape_str(const std::vector<int>& shape);
  static int64_t numel_of(const std::vector<int>& shape);

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

}  // namespace nar
