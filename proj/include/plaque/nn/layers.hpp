#pragma once

#include "plaque/nn/tensor.hpp"
#include "plaque/seed.hpp"

#include <string>
#include <vector>

namespace plaque::nn {

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

// He-uniform initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
void init_uniform(Tensor& t, int fan_in, Rng& rng);

// Every layer caches what its backward pass needs from the most recent
// forward call. Parameter gradients accumulate into Tensor::grad.

// 3x3 cross-correlation, zero padding 1, on a batch N x C x H x W.
class Conv2d {
 public:
  Conv2d(int in_channels, int out_channels);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  std::vector<NamedParam> params(const std::string& prefix);

  Tensor weight;  // out x in x 3 x 3
  Tensor bias;    // out

 private:
  int in_, out_;
  std::vector<int> in_shape_;
  Buffer cols_;  // (in*9) x (N*H*W), row-major
};

// 3x3x3 cross-correlation, zero padding 1, on a batch N x C x D x H x W.
class Conv3d {
 public:
  Conv3d(int in_channels, int out_channels);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  std::vector<NamedParam> params(const std::string& prefix);

  Tensor weight;  // out x in x 3 x 3 x 3
  Tensor bias;

 private:
  int in_, out_;
  std::vector<int> in_shape_;
  Buffer cols_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  std::vector<unsigned char> active_;
};

// Pooling interval boundaries for one axis: out+1 ascending offsets from 0 to
// n, out = floor(n / ratio), each step 1 or 2 in a seed-determined order. When
// n is odd and ratio = 2 the last interval absorbs the leftover cell.
std::vector<int> fractional_intervals(int n, double ratio, Rng& rng);

// Fractional max pooling on N x C x H x W; one interval set per axis per call.
class FractionalMaxPool2d {
 public:
  explicit FractionalMaxPool2d(double ratio);
  static int output_size(int n, double ratio);
  Tensor forward(const Tensor& x, std::uint64_t seed);
  Tensor backward(const Tensor& dy) const;
  const std::vector<int>& rows() const { return rows_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<std::size_t>& argmax() const { return argmax_; }

 private:
  double ratio_;
  std::vector<int> in_shape_;
  std::vector<int> rows_, cols_;
  std::vector<std::size_t> argmax_;
};

// 2x max pooling on N x C x D x H x W; an axis of length 1 is left alone,
// odd trailing cells are dropped.
class MaxPool3d {
 public:
  static int output_size(int n) { return n == 1 ? 1 : n / 2; }
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  std::vector<int> in_shape_;
  std::vector<std::size_t> argmax_;
};

// y = x W^T + b on N x in.
class Dense {
 public:
  Dense(int in_features, int out_features);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  std::vector<NamedParam> params(const std::string& prefix);
  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Tensor weight;  // out x in
  Tensor bias;

 private:
  int in_, out_;
  Tensor x_;
};

// Per-slice 1x1 convolution F -> F' followed by the mean over slices:
// N x L x F -> N x F'.
class Conv1x1Fuse {
 public:
  Conv1x1Fuse(int in_features, int out_features);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  std::vector<NamedParam> params(const std::string& prefix);

  Tensor weight;  // out x in
  Tensor bias;

 private:
  int in_, out_;
  Tensor x_;
};

// Three dense layers, ReLU after the first two: N x in -> N x widths[2].
class Mlp {
 public:
  Mlp(int in_features, const std::vector<int>& widths);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  std::vector<NamedParam> params(const std::string& prefix);
  int out_features() const { return layers_.back().out_features(); }

 private:
  std::vector<Dense> layers_;
  std::vector<Relu> acts_;
};

struct LossGrad {
  double loss;
  double grad;  // d loss / d logit
};

// Binary cross-entropy on a logit, stable for large |logit|.
LossGrad bce_with_logits(double logit, int target);

double sigmoid(double x);

}  // namespace plaque::nn
