#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace evflow {

// Dense row-major tensor of doubles. Feature maps are C x H x W; convolution
// kernels are Cout x Cin x k x k.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 3-D accessors (channel, row, column).
  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  int channels() const { return shape_[0]; }
  int height() const { return shape_[1]; }
  int width() const { return shape_[2]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(double v);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  double sum() const;
  double max_abs() const;
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);

// Throws ShapeError with `what` in the message if shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

// Slice channel block [c0, c0 + n) of a C x H x W tensor.
Tensor channel_slice(const Tensor& t, int c0, int n);

namespace detail {
// Per-axis linear interpolation taps for half-pixel-centre resampling.
struct LerpTable {
  std::vector<int> lo, hi;
  std::vector<double> frac;  // weight of `hi`
};
LerpTable lerp_table(int in, int out);
}  // namespace detail

// Bilinear resize of a C x H x W tensor with half-pixel centres
// (source = (dst + 0.5) * in / out - 0.5, clamped at the borders).
Tensor resize_bilinear(const Tensor& t, int out_h, int out_w);

}  // namespace evflow
