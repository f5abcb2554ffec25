#include "plaque/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace plaque::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Shared im2col machinery. Spatial extent is D x H x W; 2D convolution is
// the kd = 1 case with D = 1.
struct Geometry {
  int n, c, d, h, w, kd;
  int taps() const { return kd * 9; }
  int plane() const { return d * h * w; }
};

void im2col(const Buffer& x, const Geometry& g, Buffer& cols) {
  const int P = g.plane();
  const std::size_t ncols = static_cast<std::size_t>(g.n) * P;
  cols.assign(static_cast<std::size_t>(g.c) * g.taps() * ncols, 0.0);
  const int off = g.kd / 2;
  for (int c = 0; c < g.c; ++c)
    for (int dz = 0; dz < g.kd; ++dz)
      for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx) {
          const std::size_t row = ((static_cast<std::size_t>(c) * g.kd + dz) * 3 + dy) * 3 + dx;
          double* dst = cols.data() + row * ncols;
          for (int n = 0; n < g.n; ++n) {
            const double* src = x.data() + (static_cast<std::size_t>(n) * g.c + c) * P;
            double* out = dst + static_cast<std::size_t>(n) * P;
            for (int z = 0; z < g.d; ++z) {
              const int zz = z + dz - off;
              if (zz < 0 || zz >= g.d) continue;
              for (int y = 0; y < g.h; ++y) {
                const int yy = y + dy - 1;
                if (yy < 0 || yy >= g.h) continue;
                const int x0 = std::max(0, 1 - dx), x1 = std::min(g.w, g.w + 1 - dx);
                const double* s = src + (static_cast<std::size_t>(zz) * g.h + yy) * g.w + (dx - 1);
                double* o = out + (static_cast<std::size_t>(z) * g.h + y) * g.w;
                for (int xx = x0; xx < x1; ++xx) o[xx] = s[xx];
              }
            }
          }
        }
}

void col2im(const Buffer& cols, const Geometry& g, Buffer& dx_out) {
  const int P = g.plane();
  const std::size_t ncols = static_cast<std::size_t>(g.n) * P;
  dx_out.assign(static_cast<std::size_t>(g.n) * g.c * P, 0.0);
  const int off = g.kd / 2;
  for (int c = 0; c < g.c; ++c)
    for (int dz = 0; dz < g.kd; ++dz)
      for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx) {
          const std::size_t row = ((static_cast<std::size_t>(c) * g.kd + dz) * 3 + dy) * 3 + dx;
          const double* srcrow = cols.data() + row * ncols;
          for (int n = 0; n < g.n; ++n) {
            double* dst = dx_out.data() + (static_cast<std::size_t>(n) * g.c + c) * P;
            const double* in = srcrow + static_cast<std::size_t>(n) * P;
            for (int z = 0; z < g.d; ++z) {
              const int zz = z + dz - off;
              if (zz < 0 || zz >= g.d) continue;
              for (int y = 0; y < g.h; ++y) {
                const int yy = y + dy - 1;
                if (yy < 0 || yy >= g.h) continue;
                const int x0 = std::max(0, 1 - dx), x1 = std::min(g.w, g.w + 1 - dx);
                double* d = dst + (static_cast<std::size_t>(zz) * g.h + yy) * g.w + (dx - 1);
                const double* s = in + (static_cast<std::size_t>(z) * g.h + y) * g.w;
                for (int xx = x0; xx < x1; ++xx) d[xx] += s[xx];
              }
            }
          }
        }
}

Tensor conv_forward(const Tensor& x, const Geometry& g, const Tensor& weight, const Tensor& bias,
                    int out, Buffer& cols) {
  im2col(x.data, g, cols);
  const int P = g.plane();
  const Eigen::Index ncols = static_cast<Eigen::Index>(g.n) * P;
  const Eigen::Index rows = static_cast<Eigen::Index>(g.c) * g.taps();
  ConstMapMat W(weight.data.data(), out, rows);
  ConstMapMat C(cols.data(), rows, ncols);
  const RowMat Y = W * C;
  std::vector<int> shape{g.n, out};
  if (g.kd == 3) shape.push_back(g.d);
  shape.push_back(g.h);
  shape.push_back(g.w);
  Tensor y(shape);
  for (int n = 0; n < g.n; ++n)
    for (int o = 0; o < out; ++o) {
      double* dst = y.data.data() + (static_cast<std::size_t>(n) * out + o) * P;
      const double* src = Y.data() + static_cast<std::size_t>(o) * ncols + static_cast<std::size_t>(n) * P;
      for (int p = 0; p < P; ++p) dst[p] = src[p] + bias.data[o];
    }
  return y;
}

Tensor conv_backward(const Tensor& dy, const Geometry& g, Tensor& weight, Tensor& bias, int out,
                     const Buffer& cols, const std::vector<int>& in_shape) {
  const int P = g.plane();
  require(dy.size() == static_cast<std::size_t>(g.n) * out * P, "conv backward: gradient shape mismatch");
  const Eigen::Index ncols = static_cast<Eigen::Index>(g.n) * P;
  const Eigen::Index rows = static_cast<Eigen::Index>(g.c) * g.taps();
  RowMat dY(out, ncols);
  for (int n = 0; n < g.n; ++n)
    for (int o = 0; o < out; ++o) {
      const double* src = dy.data.data() + (static_cast<std::size_t>(n) * out + o) * P;
      std::copy(src, src + P, dY.data() + static_cast<std::size_t>(o) * ncols + static_cast<std::size_t>(n) * P);
    }
  weight.ensure_grad();
  bias.ensure_grad();
  ConstMapMat C(cols.data(), rows, ncols);
  MapMat dW(weight.grad.data(), out, rows);
  dW.noalias() += dY * C.transpose();
  for (int o = 0; o < out; ++o) bias.grad[o] += dY.row(o).sum();
  ConstMapMat W(weight.data.data(), out, rows);
  Buffer dcols(static_cast<std::size_t>(rows * ncols));
  MapMat(dcols.data(), rows, ncols).noalias() = W.transpose() * dY;
  Tensor dx;
  dx.shape = in_shape;
  col2im(dcols, g, dx.data);
  return dx;
}

}  // namespace

void init_uniform(Tensor& t, int fan_in, Rng& rng) {
  const double a = std::sqrt(6.0 / std::max(1, fan_in));
  for (double& v : t.data) v = (2.0 * uniform01(rng) - 1.0) * a;
}

// ---- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels)
    : weight({out_channels, in_channels, 3, 3}), bias({out_channels}), in_(in_channels), out_(out_channels) {}

void Conv2d::init(Rng& rng) {
  init_uniform(weight, in_ * 9, rng);
  std::fill(bias.data.begin(), bias.data.end(), 0.0);
}

std::vector<NamedParam> Conv2d::params(const std::string& prefix) {
  return {{prefix + ".weight", &weight}, {prefix + ".bias", &bias}};
}

Tensor Conv2d::forward(const Tensor& x) {
  require(x.rank() == 4 && x.dim(1) == in_, "conv2d: expected N x " + std::to_string(in_) + " x H x W, got " +
                                                 x.shape_string());
  in_shape_ = x.shape;
  const Geometry g{x.dim(0), in_, 1, x.dim(2), x.dim(3), 1};
  return conv_forward(x, g, weight, bias, out_, cols_);
}

Tensor Conv2d::backward(const Tensor& dy) {
  const Geometry g{in_shape_[0], in_, 1, in_shape_[2], in_shape_[3], 1};
  return conv_backward(dy, g, weight, bias, out_, cols_, in_shape_);
}

// ---- Conv3d ---------------------------------------------------------------

Conv3d::Conv3d(int in_channels, int out_channels)
    : weight({out_channels, in_channels, 3, 3, 3}), bias({out_channels}), in_(in_channels), out_(out_channels) {}

void Conv3d::init(Rng& rng) {
  init_uniform(weight, in_ * 27, rng);
  std::fill(bias.data.begin(), bias.data.end(), 0.0);
}

std::vector<NamedParam> Conv3d::params(const std::string& prefix) {
  return {{prefix + ".weight", &weight}, {prefix + ".bias", &bias}};
}

Tensor Conv3d::forward(const Tensor& x) {
  require(x.rank() == 5 && x.dim(1) == in_, "conv3d: expected N x " + std::to_string(in_) +
                                                 " x D x H x W, got " + x.shape_string());
  in_shape_ = x.shape;
  const Geometry g{x.dim(0), in_, x.dim(2), x.dim(3), x.dim(4), 3};
  return conv_forward(x, g, weight, bias, out_, cols_);
}

Tensor Conv3d::backward(const Tensor& dy) {
  const Geometry g{in_shape_[0], in_, in_shape_[2], in_shape_[3], in_shape_[4], 3};
  return conv_backward(dy, g, weight, bias, out_, cols_, in_shape_);
}

// ---- ReLU -----------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  Tensor y = x;
  y.grad.clear();
  active_.assign(x.size(), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.data[i] > 0) active_[i] = 1;
    else y.data[i] = 0;
  }
  return y;
}

Tensor Relu::backward(const Tensor& dy) const {
  require(dy.size() == active_.size(), "relu backward: gradient shape mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!active_[i]) dx.data[i] = 0;
  return dx;
}

// ---- fractional max pooling -----------------------------------------------

int FractionalMaxPool2d::output_size(int n, double ratio) {
  return static_cast<int>(std::floor(n / ratio));
}

std::vector<int> fractional_intervals(int n, double ratio, Rng& rng) {
  require(ratio > 1.0 && ratio <= 2.0, "fractional max pool: ratio must lie in (1, 2]");
  const int out = FractionalMaxPool2d::output_size(n, ratio);
  require(out >= 1, "fractional max pool: output size floor(n/ratio) < 1");
  const int twos = std::min(n - out, out);
  std::vector<int> steps(static_cast<std::size_t>(out), 1);
  std::fill(steps.begin(), steps.begin() + twos, 2);
  // Fisher-Yates with the project's uniform draw.
  for (std::size_t i = steps.size(); i > 1; --i) std::swap(steps[i - 1], steps[uniform_index(rng, i)]);
  std::vector<int> bounds{0};
  for (int s : steps) bounds.push_back(bounds.back() + s);
  bounds.back() = n;
  return bounds;
}

FractionalMaxPool2d::FractionalMaxPool2d(double ratio) : ratio_(ratio) {
  require(ratio > 1.0 && ratio <= 2.0, "fractional max pool: ratio must lie in (1, 2]");
}

Tensor FractionalMaxPool2d::forward(const Tensor& x, std::uint64_t seed) {
  require(x.rank() == 4, "fractional max pool: expected N x C x H x W");
  in_shape_ = x.shape;
  Rng rng(seed);
  const int H = x.dim(2), W = x.dim(3);
  rows_ = fractional_intervals(H, ratio_, rng);
  cols_ = fractional_intervals(W, ratio_, rng);
  const int oh = static_cast<int>(rows_.size()) - 1, ow = static_cast<int>(cols_.size()) - 1;
  const int planes = x.dim(0) * x.dim(1);
  Tensor y({x.dim(0), x.dim(1), oh, ow});
  argmax_.assign(y.size(), 0);
  for (int pl = 0; pl < planes; ++pl) {
    const std::size_t base = static_cast<std::size_t>(pl) * H * W;
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = base;
        for (int r = rows_[i]; r < rows_[i + 1]; ++r)
          for (int c = cols_[j]; c < cols_[j + 1]; ++c) {
            const std::size_t k = base + static_cast<std::size_t>(r) * W + c;
            if (x.data[k] > best) {
              best = x.data[k];
              arg = k;
            }
          }
        const std::size_t o = (static_cast<std::size_t>(pl) * oh + i) * ow + j;
        y.data[o] = best;
        argmax_[o] = arg;
      }
  }
  return y;
}

Tensor FractionalMaxPool2d::backward(const Tensor& dy) const {
  require(dy.size() == argmax_.size(), "fractional max pool backward: gradient shape mismatch");
  Tensor dx(in_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
  return dx;
}

// ---- 3D max pooling -------------------------------------------------------

Tensor MaxPool3d::forward(const Tensor& x) {
  require(x.rank() == 5, "max pool 3d: expected N x C x D x H x W");
  in_shape_ = x.shape;
  const int D = x.dim(2), H = x.dim(3), W = x.dim(4);
  const int od = output_size(D), oh = output_size(H), ow = output_size(W);
  const int kd = D == 1 ? 1 : 2, kh = H == 1 ? 1 : 2, kw = W == 1 ? 1 : 2;
  Tensor y({x.dim(0), x.dim(1), od, oh, ow});
  argmax_.assign(y.size(), 0);
  const int planes = x.dim(0) * x.dim(1);
  std::size_t o = 0;
  for (int pl = 0; pl < planes; ++pl) {
    const std::size_t base = static_cast<std::size_t>(pl) * D * H * W;
    for (int a = 0; a < od; ++a)
      for (int b = 0; b < oh; ++b)
        for (int c = 0; c < ow; ++c, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t arg = base;
          for (int z = a * kd; z < a * kd + kd; ++z)
            for (int yy = b * kh; yy < b * kh + kh; ++yy)
              for (int xx = c * kw; xx < c * kw + kw; ++xx) {
                const std::size_t k = base + (static_cast<std::size_t>(z) * H + yy) * W + xx;
                if (x.data[k] > best) {
                  best = x.data[k];
                  arg = k;
                }
              }
          y.data[o] = best;
          argmax_[o] = arg;
        }
  }
  return y;
}

Tensor MaxPool3d::backward(const Tensor& dy) const {
  require(dy.size() == argmax_.size(), "max pool 3d backward: gradient shape mismatch");
  Tensor dx(in_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
  return dx;
}

// ---- Dense ----------------------------------------------------------------

Dense::Dense(int in_features, int out_features)
    : weight({out_features, in_features}), bias({out_features}), in_(in_features), out_(out_features) {}

void Dense::init(Rng& rng) {
  init_uniform(weight, in_, rng);
  std::fill(bias.data.begin(), bias.data.end(), 0.0);
}

std::vector<NamedParam> Dense::params(const std::string& prefix) {
  return {{prefix + ".weight", &weight}, {prefix + ".bias", &bias}};
}

Tensor Dense::forward(const Tensor& x) {
  require(x.rank() == 2 && x.dim(1) == in_, "dense: expected N x " + std::to_string(in_) + ", got " +
                                                 x.shape_string());
  x_ = x;
  x_.grad.clear();
  const int n = x.dim(0);
  Tensor y({n, out_});
  MapMat Y(y.data.data(), n, out_);
  Y.noalias() = ConstMapMat(x.data.data(), n, in_) * ConstMapMat(weight.data.data(), out_, in_).transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data.data(), out_);
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  const int n = x_.dim(0);
  require(dy.size() == static_cast<std::size_t>(n) * out_, "dense backward: gradient shape mismatch");
  weight.ensure_grad();
  bias.ensure_grad();
  ConstMapMat dY(dy.data.data(), n, out_);
  MapMat(weight.grad.data(), out_, in_).noalias() += dY.transpose() * ConstMapMat(x_.data.data(), n, in_);
  Eigen::Map<Eigen::RowVectorXd>(bias.grad.data(), out_) += dY.colwise().sum();
  Tensor dx({n, in_});
  MapMat(dx.data.data(), n, in_).noalias() = dY * ConstMapMat(weight.data.data(), out_, in_);
  return dx;
}

// ---- 1x1 fusion -----------------------------------------------------------

Conv1x1Fuse::Conv1x1Fuse(int in_features, int out_features)
    : weight({out_features, in_features}), bias({out_features}), in_(in_features), out_(out_features) {}

void Conv1x1Fuse::init(Rng& rng) {
  init_uniform(weight, in_, rng);
  std::fill(bias.data.begin(), bias.data.end(), 0.0);
}

std::vector<NamedParam> Conv1x1Fuse::params(const std::string& prefix) {
  return {{prefix + ".weight", &weight}, {prefix + ".bias", &bias}};
}

Tensor Conv1x1Fuse::forward(const Tensor& x) {
  require(x.rank() == 3 && x.dim(2) == in_, "conv1x1 fuse: expected N x L x " + std::to_string(in_) +
                                                 ", got " + x.shape_string());
  x_ = x;
  x_.grad.clear();
  const int n = x.dim(0), L = x.dim(1);
  const RowMat per_slice =
      ConstMapMat(x.data.data(), n * L, in_) * ConstMapMat(weight.data.data(), out_, in_).transpose();
  Tensor y({n, out_});
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out_; ++o) {
      double s = 0;
      for (int l = 0; l < L; ++l) s += per_slice(i * L + l, o) + bias.data[o];
      y.data[static_cast<std::size_t>(i) * out_ + o] = s / L;
    }
  return y;
}

Tensor Conv1x1Fuse::backward(const Tensor& dy) {
  const int n = x_.dim(0), L = x_.dim(1);
  require(dy.size() == static_cast<std::size_t>(n) * out_, "conv1x1 fuse backward: gradient shape mismatch");
  weight.ensure_grad();
  bias.ensure_grad();
  // Every slice receives dy / L.
  RowMat dslice(n * L, out_);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < L; ++l)
      for (int o = 0; o < out_; ++o) dslice(i * L + l, o) = dy.data[static_cast<std::size_t>(i) * out_ + o] / L;
  MapMat(weight.grad.data(), out_, in_).noalias() +=
      dslice.transpose() * ConstMapMat(x_.data.data(), n * L, in_);
  Eigen::Map<Eigen::RowVectorXd>(bias.grad.data(), out_) += dslice.colwise().sum();
  Tensor dx(x_.shape);
  MapMat(dx.data.data(), n * L, in_).noalias() = dslice * ConstMapMat(weight.data.data(), out_, in_);
  return dx;
}

// ---- MLP ------------------------------------------------------------------

Mlp::Mlp(int in_features, const std::vector<int>& widths) {
  require(widths.size() == 3, "mlp: exactly three layer widths expected");
  int in = in_features;
  for (int w : widths) {
    require(w > 0, "mlp: widths must be positive");
    layers_.emplace_back(in, w);
    in = w;
  }
  acts_.resize(2);
}

void Mlp::init(Rng& rng) {
  for (auto& l : layers_) l.init(rng);
}

std::vector<NamedParam> Mlp::params(const std::string& prefix) {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (auto& p : layers_[i].params(prefix + ".dense" + std::to_string(i))) out.push_back(p);
  return out;
}

Tensor Mlp::forward(const Tensor& x) {
  Tensor h = layers_[0].forward(x);
  h = acts_[0].forward(h);
  h = layers_[1].forward(h);
  h = acts_[1].forward(h);
  return layers_[2].forward(h);
}

Tensor Mlp::backward(const Tensor& dy) {
  Tensor g = layers_[2].backward(dy);
  g = acts_[1].backward(g);
  g = layers_[1].backward(g);
  g = acts_[0].backward(g);
  return layers_[0].backward(g);
}

// ---- loss -----------------------------------------------------------------

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LossGrad bce_with_logits(double logit, int target) {
  const double y = target ? 1.0 : 0.0;
  const double loss = std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
  return {loss, sigmoid(logit) - y};
}

}  // namespace plaque::nn
