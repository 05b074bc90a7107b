#include "evflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "evflow/errors.hpp"

namespace evflow {

namespace {

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("value count " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ')';
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw ShapeError(what + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

Tensor channel_slice(const Tensor& t, int c0, int n) {
  if (t.ndim() != 3 || c0 < 0 || c0 + n > t.channels()) {
    throw ShapeError("channel_slice out of range on " + shape_str(t.shape()));
  }
  Tensor out({n, t.height(), t.width()});
  const std::size_t plane = static_cast<std::size_t>(t.height()) * t.width();
  std::copy_n(t.data() + c0 * plane, n * plane, out.data());
  return out;
}

namespace detail {

LerpTable lerp_table(int in, int out) {
  LerpTable tab;
  tab.lo.resize(out);
  tab.hi.resize(out);
  tab.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    tab.lo[i] = lo;
    tab.hi[i] = hi;
    tab.frac[i] = src - lo;
  }
  return tab;
}

}  // namespace detail

Tensor resize_bilinear(const Tensor& t, int out_h, int out_w) {
  if (t.ndim() != 3) throw ShapeError("resize_bilinear expects C x H x W, got " + shape_str(t.shape()));
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bilinear: non-positive target size");
  const auto ty = detail::lerp_table(t.height(), out_h);
  const auto tx = detail::lerp_table(t.width(), out_w);
  Tensor out({t.channels(), out_h, out_w});
  for (int c = 0; c < t.channels(); ++c) {
    for (int y = 0; y < out_h; ++y) {
      const double fy = ty.frac[y];
      for (int x = 0; x < out_w; ++x) {
        const double fx = tx.frac[x];
        const double top = (1 - fx) * t.at(c, ty.lo[y], tx.lo[x]) + fx * t.at(c, ty.lo[y], tx.hi[x]);
        const double bot = (1 - fx) * t.at(c, ty.hi[y], tx.lo[x]) + fx * t.at(c, ty.hi[y], tx.hi[x]);
        out.at(c, y, x) = (1 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

}  // namespace evflow
