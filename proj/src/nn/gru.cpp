#include "plaque/nn/gru.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace plaque::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapMat = Eigen::Map<RowMat>;
using Vec = Eigen::VectorXd;
using ConstMapVec = Eigen::Map<const Vec>;

double sig(double v) { return sigmoid(v); }

}  // namespace

GruLayer::GruLayer(int in_features, int hidden, bool reverse)
    : wx({3 * hidden, in_features}),
      wh({3 * hidden, hidden}),
      b({3 * hidden}),
      in_(in_features),
      hidden_(hidden),
      reverse_(reverse) {}

void GruLayer::init(Rng& rng) {
  // Glorot-style range on both input and recurrent blocks.
  const double ax = std::sqrt(6.0 / (in_ + hidden_)), ah = std::sqrt(6.0 / (2 * hidden_));
  for (double& v : wx.data) v = (2 * uniform01(rng) - 1) * ax;
  for (double& v : wh.data) v = (2 * uniform01(rng) - 1) * ah;
  std::fill(b.data.begin(), b.data.end(), 0.0);
}

std::vector<NamedParam> GruLayer::params(const std::string& prefix) {
  return {{prefix + ".wx", &wx}, {prefix + ".wh", &wh}, {prefix + ".b", &b}};
}

Tensor GruLayer::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != in_)
    throw std::invalid_argument("gru: expected T x " + std::to_string(in_) + ", got " + x.shape_string());
  x_ = x;
  x_.grad.clear();
  const int T = x.dim(0), H = hidden_;
  ConstMapMat Wx(wx.data.data(), 3 * H, in_), Wh(wh.data.data(), 3 * H, H);
  ConstMapVec B(b.data.data(), 3 * H);
  // Input projections for all steps at once: T x 3H.
  const RowMat ax = ConstMapMat(x.data.data(), T, in_) * Wx.transpose();
  hprev_.assign(T, {});
  z_.assign(T, {});
  r_.assign(T, {});
  n_.assign(T, {});
  Tensor out({T, H});
  Vec h = Vec::Zero(H);
  for (int s = 0; s < T; ++s) {
    const int t = reverse_ ? T - 1 - s : s;
    const Vec a_in = ax.row(t).transpose() + B;
    const Vec uh = Wh.topRows(2 * H) * h;
    Vec z(H), r(H), n(H);
    for (int k = 0; k < H; ++k) {
      z[k] = sig(a_in[k] + uh[k]);
      r[k] = sig(a_in[H + k] + uh[H + k]);
    }
    const Vec rh = r.cwiseProduct(h);
    const Vec un = Wh.bottomRows(H) * rh;
    for (int k = 0; k < H; ++k) n[k] = std::tanh(a_in[2 * H + k] + un[k]);
    hprev_[s].assign(h.data(), h.data() + H);
    z_[s].assign(z.data(), z.data() + H);
    r_[s].assign(r.data(), r.data() + H);
    n_[s].assign(n.data(), n.data() + H);
    h = (Vec::Ones(H) - z).cwiseProduct(h) + z.cwiseProduct(n);
    for (int k = 0; k < H; ++k) out.data[static_cast<std::size_t>(t) * H + k] = h[k];
  }
  return out;
}

Tensor GruLayer::backward(const Tensor& dh_out) {
  const int T = x_.dim(0), H = hidden_;
  if (dh_out.size() != static_cast<std::size_t>(T) * H)
    throw std::invalid_argument("gru backward: gradient shape mismatch");
  wx.ensure_grad();
  wh.ensure_grad();
  b.ensure_grad();
  ConstMapMat Wx(wx.data.data(), 3 * H, in_), Wh(wh.data.data(), 3 * H, H);
  MapMat dWh(wh.grad.data(), 3 * H, H);
  Eigen::Map<Vec> dB(b.grad.data(), 3 * H);
  RowMat da_all = RowMat::Zero(T, 3 * H);  // gradient w.r.t. pre-activations, by input row
  Vec dh_next = Vec::Zero(H);
  for (int s = T - 1; s >= 0; --s) {
    const int t = reverse_ ? T - 1 - s : s;
    const ConstMapVec hp(hprev_[s].data(), H), z(z_[s].data(), H), r(r_[s].data(), H), n(n_[s].data(), H);
    const Vec dh = dh_next + ConstMapVec(dh_out.data.data() + static_cast<std::size_t>(t) * H, H);
    Vec da(3 * H);
    for (int k = 0; k < H; ++k) {
      da[2 * H + k] = dh[k] * z[k] * (1 - n[k] * n[k]);
      da[k] = dh[k] * (n[k] - hp[k]) * z[k] * (1 - z[k]);
    }
    const Vec drh = Wh.bottomRows(H).transpose() * da.tail(H);
    for (int k = 0; k < H; ++k) da[H + k] = drh[k] * hp[k] * r[k] * (1 - r[k]);
    dWh.topRows(2 * H).noalias() += da.head(2 * H) * hp.transpose();
    dWh.bottomRows(H).noalias() += da.tail(H) * r.cwiseProduct(hp).transpose();
    dh_next = dh.cwiseProduct(Vec::Ones(H) - z) + drh.cwiseProduct(r) + Wh.topRows(2 * H).transpose() * da.head(2 * H);
    da_all.row(t) = da.transpose();
  }
  dB += da_all.colwise().sum().transpose();
  MapMat(wx.grad.data(), 3 * H, in_).noalias() += da_all.transpose() * ConstMapMat(x_.data.data(), T, in_);
  Tensor dx({T, in_});
  MapMat(dx.data.data(), T, in_).noalias() = da_all * Wx;
  return dx;
}

GruStack::GruStack(int in_features, int hidden, int layers, bool bidirectional)
    : hidden_(hidden), bidirectional_(bidirectional) {
  if (layers < 1 || hidden < 1) throw std::invalid_argument("gru stack: layers and hidden must be positive");
  int in = in_features;
  for (int l = 0; l < layers; ++l) {
    fwd_.emplace_back(in, hidden, false);
    if (bidirectional) bwd_.emplace_back(in, hidden, true);
    in = output_features();
  }
}

void GruStack::init(Rng& rng) {
  for (std::size_t l = 0; l < fwd_.size(); ++l) {
    fwd_[l].init(rng);
    if (bidirectional_) bwd_[l].init(rng);
  }
}

std::vector<NamedParam> GruStack::params(const std::string& prefix) {
  std::vector<NamedParam> out;
  for (std::size_t l = 0; l < fwd_.size(); ++l) {
    for (auto& p : fwd_[l].params(prefix + ".l" + std::to_string(l) + ".fwd")) out.push_back(p);
    if (bidirectional_)
      for (auto& p : bwd_[l].params(prefix + ".l" + std::to_string(l) + ".bwd")) out.push_back(p);
  }
  return out;
}

Tensor GruStack::forward(const Tensor& x) {
  Tensor h = x;
  for (std::size_t l = 0; l < fwd_.size(); ++l) {
    Tensor f = fwd_[l].forward(h);
    if (!bidirectional_) {
      h = std::move(f);
      continue;
    }
    const Tensor r = bwd_[l].forward(h);
    const int T = f.dim(0), H = hidden_;
    Tensor cat({T, 2 * H});
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < H; ++k) {
        cat.data[static_cast<std::size_t>(t) * 2 * H + k] = f.data[static_cast<std::size_t>(t) * H + k];
        cat.data[static_cast<std::size_t>(t) * 2 * H + H + k] = r.data[static_cast<std::size_t>(t) * H + k];
      }
    h = std::move(cat);
  }
  return h;
}

Tensor GruStack::backward(const Tensor& dy) {
  Tensor g = dy;
  for (std::size_t l = fwd_.size(); l-- > 0;) {
    if (!bidirectional_) {
      g = fwd_[l].backward(g);
      continue;
    }
    const int T = g.dim(0), H = hidden_;
    Tensor gf({T, H}), gr({T, H});
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < H; ++k) {
        gf.data[static_cast<std::size_t>(t) * H + k] = g.data[static_cast<std::size_t>(t) * 2 * H + k];
        gr.data[static_cast<std::size_t>(t) * H + k] = g.data[static_cast<std::size_t>(t) * 2 * H + H + k];
      }
    Tensor dx = fwd_[l].backward(gf);
    const Tensor dr = bwd_[l].backward(gr);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dr.data[i];
    g = std::move(dx);
  }
  return g;
}

}  // namespace plaque::nn
