#pragma once

#include "plaque/nn/layers.hpp"

namespace plaque::nn {

// One GRU direction over a T x F sequence, h_0 = 0:
//   z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + Un (r * h) + bn), h' = (1 - z) * h + z * n
// Gate blocks are stacked z, r, n in the weight rows. A reverse layer reads
// the sequence from the end; its output row t still belongs to input row t.
class GruLayer {
 public:
  GruLayer(int in_features, int hidden, bool reverse);
  Tensor forward(const Tensor& x);       // T x F -> T x H
  Tensor backward(const Tensor& dh);     // T x H -> T x F
  void init(Rng& rng);
  std::vector<NamedParam> params(const std::string& prefix);
  int hidden() const { return hidden_; }

  Tensor wx;  // 3H x F
  Tensor wh;  // 3H x H
  Tensor b;   // 3H

 private:
  int in_, hidden_;
  bool reverse_;
  Tensor x_;
  // Per step (in processing order): previous state, gates, candidate.
  std::vector<Buffer> hprev_, z_, r_, n_;
};

// Stack of (optionally bidirectional) GRU layers. Output T x (H or 2H), the
// forward half first.
class GruStack {
 public:
  GruStack(int in_features, int hidden, int layers, bool bidirectional);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init(Rng& rng);
  std::vector<NamedParam> params(const std::string& prefix);
  int output_features() const { return bidirectional_ ? 2 * hidden_ : hidden_; }
  bool bidirectional() const { return bidirectional_; }

 private:
  int hidden_;
  bool bidirectional_;
  std::vector<GruLayer> fwd_, bwd_;
};

}  // namespace plaque::nn
