#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtd {

/// Dense row-major float tensor. Rank is arbitrary but everything in this
/// project is {Ch,H,W} for single images and {N,Ch,H,W} for batches.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(count(shape_), 0.0f);
  }

  Tensor(std::vector<int> shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static Tensor full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // {C,H,W} element access.
  float& at(int c, int h, int w) {
    assert(rank() == 3);
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  float at(int c, int h, int w) const {
    assert(rank() == 3);
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }

  // {N,C,H,W} element access.
  float& at(int n, int c, int h, int w) {
    assert(rank() == 4);
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  float at(int n, int c, int h, int w) const {
    assert(rank() == 4);
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(float value) { std::fill(data_.begin(), data_.end(), value); }

  /// Same storage reinterpreted under a new shape; element count must match.
  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != data_.size())
      throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    return Tensor(std::move(shape), data_);
  }

  void clamp_(float lo, float hi) {
    for (float& v : data_) v = v < lo ? lo : (v > hi ? hi : v);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::string s = "{";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "}";
  }

  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

}  // namespace mtd
