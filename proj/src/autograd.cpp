#include "evflow/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "evflow/errors.hpp"

namespace evflow::ag {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

struct ConvGeom {
  int c, h, w, k, stride, pad, ho, wo;
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
  int rows() const { return c * k * k; }
  int cols() const { return ho * wo; }
};

void im2col(const double* x, const ConvGeom& g, double* cols) {
  const int n = g.cols();
  for (int c = 0; c < g.c; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * n;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.wo, 0.0);
            continue;
          }
          const double* src = plane + iy * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeom& g, double* dx) {
  const int n = g.cols();
  for (int c = 0; c < g.c; ++c) {
    double* plane = dx + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * n;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const double* src = row + oy * g.wo;
          double* dst = plane + iy * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

// --- Var ------------------------------------------------------------------

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Var& v) { return v.requires_grad(); });
    if (any) {
      n->requires_grad = true;
      n->inputs.reserve(inputs.size());
      for (auto& v : inputs) n->inputs.push_back(v.node());
      n->backward = std::move(fn);
    }
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw ShapeError("backward: root must be a scalar");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  // Intermediate gradients are not needed after the sweep.
  for (Node* n : order) {
    if (!n->inputs.empty()) n->grad = Tensor();
  }
}

// --- ops ------------------------------------------------------------------

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.ndim() != 3) throw ShapeError("conv2d: input must be C x H x W, got " + shape_str(xv.shape()));
  if (wv.ndim() != 4 || wv.dim(2) != wv.dim(3)) {
    throw ShapeError("conv2d: kernel must be O x C x k x k, got " + shape_str(wv.shape()));
  }
  if (wv.dim(1) != xv.channels()) {
    throw ShapeError("conv2d: channel mismatch, input has " + std::to_string(xv.channels()) +
                     " channels, kernel expects " + std::to_string(wv.dim(1)));
  }
  const int out_c = wv.dim(0);
  if (bias.defined() && (bias.value().ndim() != 1 || bias.value().dim(0) != out_c)) {
    throw ShapeError("conv2d: bias length does not match output channels");
  }
  ConvGeom g{xv.channels(), xv.height(), xv.width(), wv.dim(2), stride, padding, 0, 0};
  g.ho = (g.h + 2 * padding - g.k) / stride + 1;
  g.wo = (g.w + 2 * padding - g.k) / stride + 1;
  if (g.ho <= 0 || g.wo <= 0) throw ShapeError("conv2d: output would be empty");

  Tensor out({out_c, g.ho, g.wo});
  CMapMat wm(wv.data(), out_c, g.rows());
  MapMat om(out.data(), out_c, g.cols());
  if (g.pointwise()) {
    om.noalias() = wm * CMapMat(xv.data(), g.rows(), g.cols());
  } else {
    std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
    im2col(xv.data(), g, cols.data());
    om.noalias() = wm * CMapMat(cols.data(), g.rows(), g.cols());
  }
  if (bias.defined()) {
    for (int o = 0; o < out_c; ++o) om.row(o).array() += bias.value()[o];
  }

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_op(std::move(out), std::move(inputs), [g, out_c](Node& n) {
    Node& xn = *n.inputs[0];
    Node& wn = *n.inputs[1];
    CMapMat gout(n.grad.data(), out_c, g.cols());
    std::vector<double> cols;
    const double* colp = xn.value.data();
    if (!g.pointwise()) {
      cols.resize(static_cast<std::size_t>(g.rows()) * g.cols());
      im2col(xn.value.data(), g, cols.data());
      colp = cols.data();
    }
    if (wn.requires_grad) {
      MapMat gw(wn.grad_buffer().data(), out_c, g.rows());
      gw.noalias() += gout * CMapMat(colp, g.rows(), g.cols()).transpose();
    }
    if (n.inputs.size() > 2 && n.inputs[2]->requires_grad) {
      Tensor& gb = n.inputs[2]->grad_buffer();
      for (int o = 0; o < out_c; ++o) gb[o] += gout.row(o).sum();
    }
    if (xn.requires_grad) {
      CMapMat wm(wn.value.data(), out_c, g.rows());
      if (g.pointwise()) {
        MapMat gx(xn.grad_buffer().data(), g.rows(), g.cols());
        gx.noalias() += wm.transpose() * gout;
      } else {
        RowMat gcols = wm.transpose() * gout;
        col2im_add(gcols.data(), g, xn.grad_buffer().data());
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    for (auto& in : n.inputs) {
      if (in->requires_grad) in->grad_buffer() += n.grad;
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const std::size_t sz = out.size();
  for (std::size_t i = 0; i < sz; ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->grad_buffer() += n.grad;
    if (n.inputs[1]->requires_grad) {
      Tensor& g = n.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const std::size_t sz = out.size();
  for (std::size_t i = 0; i < sz; ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    Node& an = *n.inputs[0];
    Node& bn = *n.inputs[1];
    if (an.requires_grad) {
      Tensor& g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      Tensor& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * an.value[i];
    }
  });
}

Var affine(const Var& x, double scale, double shift) {
  Tensor out = x.value();
  for (double& v : out.values()) v = scale * v + shift;
  return make_op(std::move(out), {x}, [scale](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * n.grad[i];
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return make_op(std::move(out), {x}, [](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = n.value[i];
      g[i] += n.grad[i] * s * (1.0 - s);
    }
  });
}

Var tanh(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = std::tanh(v);
  return make_op(std::move(out), {x}, [](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double t = n.value[i];
      g[i] += n.grad[i] * (1.0 - t * t);
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  // NaN propagates so a diverged network surfaces as a non-finite loss.
  for (double& v : out.values()) v = v > 0.0 || std::isnan(v) ? v : 0.0;
  return make_op(std::move(out), {x}, [](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (n.value[i] > 0.0) g[i] += n.grad[i];
    }
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int h = parts.front().value().height();
  const int w = parts.front().value().width();
  int channels = 0;
  for (const auto& p : parts) {
    const Tensor& t = p.value();
    if (t.ndim() != 3 || t.height() != h || t.width() != w) {
      throw ShapeError("concat: spatial mismatch " + shape_str(parts.front().shape()) + " vs " +
                       shape_str(t.shape()));
    }
    channels += t.channels();
  }
  Tensor out({channels, h, w});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + offset);
    offset += p.value().size();
  }
  return make_op(std::move(out), parts, [](Node& n) {
    std::size_t offset = 0;
    for (auto& in : n.inputs) {
      const std::size_t sz = in->value.size();
      if (in->requires_grad) {
        Tensor& g = in->grad_buffer();
        for (std::size_t i = 0; i < sz; ++i) g[i] += n.grad[offset + i];
      }
      offset += sz;
    }
  });
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const Tensor& xv = x.value();
  Tensor out = evflow::resize_bilinear(xv, out_h, out_w);
  return make_op(std::move(out), {x}, [out_h, out_w](Node& n) {
    Node& xn = *n.inputs[0];
    const auto ty = detail::lerp_table(xn.value.height(), out_h);
    const auto tx = detail::lerp_table(xn.value.width(), out_w);
    Tensor& g = xn.grad_buffer();
    for (int c = 0; c < g.channels(); ++c) {
      for (int y = 0; y < out_h; ++y) {
        const double fy = ty.frac[y];
        for (int xx = 0; xx < out_w; ++xx) {
          const double fx = tx.frac[xx];
          const double go = n.grad.at(c, y, xx);
          g.at(c, ty.lo[y], tx.lo[xx]) += go * (1 - fy) * (1 - fx);
          g.at(c, ty.lo[y], tx.hi[xx]) += go * (1 - fy) * fx;
          g.at(c, ty.hi[y], tx.lo[xx]) += go * fy * (1 - fx);
          g.at(c, ty.hi[y], tx.hi[xx]) += go * fy * fx;
        }
      }
    }
  });
}

Var sum(const Var& x) {
  Tensor out({1}, x.value().sum());
  return make_op(std::move(out), {x}, [](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const double go = n.grad[0];
    for (double& v : g.values()) v += go;
  });
}

}  // namespace evflow::ag
