#include "nar/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nar {

int64_t Tensor::numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int e : shape) {
    if (e < 0) throw std::invalid_argument("tensor: negative extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(numel_of(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != numel_of(shape_)) {
    throw std::invalid_argument("tensor: data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

Tensor Tensor::scalar(float value) { return Tensor({1}, {value}); }

int64_t Tensor::rows() const {
  if (shape_.empty()) return data_.empty() ? 0 : 1;
  int64_t r = 1;
  for (size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
  return r;
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

}  // namespace nar
