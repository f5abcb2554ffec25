#include "plaque/nn/models.hpp"

#include <stdexcept>

namespace plaque::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void append(std::vector<NamedParam>& out, std::vector<NamedParam> more) {
  for (auto& p : more) out.push_back(p);
}

}  // namespace

void ArchitectureConfig::validate() const {
  require(!conv2d_channels.empty() && !conv3d_channels.empty(), "architecture: conv blocks must be nonempty");
  for (int c : conv2d_channels) require(c > 0, "architecture: conv2d channels must be positive");
  for (int c : conv3d_channels) require(c > 0, "architecture: conv3d channels must be positive");
  require(fmp_ratio > 1.0 && fmp_ratio <= 2.0, "architecture: fmp_ratio must lie in (1, 2]");
  require(slice_features > 0 && fused_features > 0 && cube_features > 0, "architecture: feature sizes must be positive");
  require(mlp_widths.size() == 3, "architecture: the MLP has exactly three layers");
  for (int w : mlp_widths) require(w > 0, "architecture: MLP widths must be positive");
  require(gru_hidden > 0 && gru_layers >= 1, "architecture: GRU hidden size and layers must be positive");
}

void to_json(nlohmann::json& j, const ArchitectureConfig& c) {
  j = {{"conv2d_channels", c.conv2d_channels}, {"fmp_ratio", c.fmp_ratio},
       {"slice_features", c.slice_features},   {"fused_features", c.fused_features},
       {"conv3d_channels", c.conv3d_channels}, {"cube_features", c.cube_features},
       {"mlp_widths", c.mlp_widths},           {"gru_hidden", c.gru_hidden},
       {"gru_layers", c.gru_layers},           {"bidirectional", c.bidirectional}};
}

void from_json(const nlohmann::json& j, ArchitectureConfig& c) {
  const ArchitectureConfig d;
  c.conv2d_channels = j.value("conv2d_channels", d.conv2d_channels);
  c.fmp_ratio = j.value("fmp_ratio", d.fmp_ratio);
  c.slice_features = j.value("slice_features", d.slice_features);
  c.fused_features = j.value("fused_features", d.fused_features);
  c.conv3d_channels = j.value("conv3d_channels", d.conv3d_channels);
  c.cube_features = j.value("cube_features", d.cube_features);
  c.mlp_widths = j.value("mlp_widths", d.mlp_widths);
  c.gru_hidden = j.value("gru_hidden", d.gru_hidden);
  c.gru_layers = j.value("gru_layers", d.gru_layers);
  c.bidirectional = j.value("bidirectional", d.bidirectional);
}

void SequenceModel::zero_grad() {
  for (auto& p : parameters()) p.tensor->zero_grad();
}

std::size_t SequenceModel::parameter_count() {
  std::size_t n = 0;
  for (auto& p : parameters()) n += p.tensor->size();
  return n;
}

// ---- head -----------------------------------------------------------------

GruHead::GruHead(int in_features, const ArchitectureConfig& cfg)
    : gru_(in_features, cfg.gru_hidden, cfg.gru_layers, cfg.bidirectional),
      out_(cfg.bidirectional ? 2 * cfg.gru_hidden : cfg.gru_hidden, 1) {}

void GruHead::init(Rng& rng) {
  gru_.init(rng);
  out_.init(rng);
}

std::vector<NamedParam> GruHead::params() {
  auto p = gru_.params("gru");
  append(p, out_.params("head"));
  return p;
}

double GruHead::forward(const Tensor& seq) {
  const Tensor h = gru_.forward(seq);
  T_ = h.dim(0);
  const int W = h.dim(1), H = W / (gru_.bidirectional() ? 2 : 1);
  Tensor last({1, W});
  for (int k = 0; k < H; ++k) last.data[k] = h.data[static_cast<std::size_t>(T_ - 1) * W + k];
  if (gru_.bidirectional())
    for (int k = 0; k < H; ++k) last.data[H + k] = h.data[H + k];
  return out_.forward(last).data[0];
}

Tensor GruHead::backward(double dlogit) {
  const Tensor dlast = out_.backward(Tensor({1, 1}, dlogit));
  const int W = dlast.dim(1), H = W / (gru_.bidirectional() ? 2 : 1);
  Tensor dh({T_, W});
  for (int k = 0; k < H; ++k) dh.data[static_cast<std::size_t>(T_ - 1) * W + k] = dlast.data[k];
  if (gru_.bidirectional())
    for (int k = 0; k < H; ++k) dh.data[H + k] = dlast.data[H + k];
  return gru_.backward(dh);
}

// ---- 2D polar model -------------------------------------------------------

namespace {

int polar_flat(const ArchitectureConfig& cfg, int A, int R) {
  int h = A, w = R;
  for (std::size_t b = 0; b < cfg.conv2d_channels.size(); ++b) {
    h = FractionalMaxPool2d::output_size(h, cfg.fmp_ratio);
    w = FractionalMaxPool2d::output_size(w, cfg.fmp_ratio);
    require(h >= 1 && w >= 1, "rcnn2d: polar image too small for the pooling schedule");
  }
  return h * w * cfg.conv2d_channels.back();
}

int cube_flat(const ArchitectureConfig& cfg, int L, int S) {
  int d = L, h = S, w = S;
  for (std::size_t b = 0; b < cfg.conv3d_channels.size(); ++b) {
    d = MaxPool3d::output_size(d);
    h = MaxPool3d::output_size(h);
    w = MaxPool3d::output_size(w);
  }
  return d * h * w * cfg.conv3d_channels.back();
}

const ArchitectureConfig& checked(const ArchitectureConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Rcnn2dPolar::Rcnn2dPolar(const ArchitectureConfig& cfg, int slices, int angles, int radii, std::uint64_t seed)
    : cfg_(checked(cfg)),
      L_(slices),
      A_(angles),
      R_(radii),
      flat_(polar_flat(cfg, angles, radii)),
      slice_dense_(flat_, cfg.slice_features),
      fuse_(cfg.slice_features, cfg.fused_features),
      head_(cfg.fused_features, cfg) {
  require(slices >= 1, "rcnn2d: slices per cube must be positive");
  int in = 1;
  for (int c : cfg_.conv2d_channels) {
    convs_.emplace_back(in, c);
    pools_.emplace_back(cfg_.fmp_ratio);
    in = c;
  }
  acts_.resize(convs_.size());
  Rng rng = make_rng(seed, "nn-init-rcnn2d");
  for (auto& c : convs_) c.init(rng);
  slice_dense_.init(rng);
  fuse_.init(rng);
  head_.init(rng);
}

double Rcnn2dPolar::forward(const std::vector<Tensor>& elements, std::uint64_t pool_seed) {
  require(!elements.empty(), "rcnn2d: empty sequence");
  T_ = static_cast<int>(elements.size());
  Tensor x({T_ * L_, 1, A_, R_});
  const std::size_t per = static_cast<std::size_t>(L_) * A_ * R_;
  for (int t = 0; t < T_; ++t) {
    const Tensor& e = elements[t];
    require(e.rank() == 3 && e.dim(0) == L_ && e.dim(1) == A_ && e.dim(2) == R_,
            "rcnn2d: element shape " + e.shape_string() + " does not match the configured polar cube");
    std::copy(e.data.begin(), e.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(t * per));
  }
  for (std::size_t b = 0; b < convs_.size(); ++b) {
    x = convs_[b].forward(x);
    x = acts_[b].forward(x);
    x = pools_[b].forward(x, derive_seed(pool_seed, "fmp", b));
  }
  pooled_shape_ = x.shape;
  Tensor f = slice_dense_.forward(x.reshaped({T_ * L_, flat_}));
  f = slice_act_.forward(f);
  Tensor fused = fuse_.forward(f.reshaped({T_, L_, cfg_.slice_features}));
  fused = fuse_act_.forward(fused);
  return head_.forward(fused);
}

void Rcnn2dPolar::backward(double dlogit) {
  Tensor g = head_.backward(dlogit);
  g = fuse_act_.backward(g);
  g = fuse_.backward(g);
  g = slice_act_.backward(g.reshaped({T_ * L_, cfg_.slice_features}));
  g = slice_dense_.backward(g);
  g = g.reshaped(pooled_shape_);
  for (std::size_t b = convs_.size(); b-- > 0;) {
    g = pools_[b].backward(g);
    g = acts_[b].backward(g);
    g = convs_[b].backward(g);
  }
}

std::vector<NamedParam> Rcnn2dPolar::parameters() {
  std::vector<NamedParam> p;
  for (std::size_t b = 0; b < convs_.size(); ++b) append(p, convs_[b].params("conv" + std::to_string(b)));
  append(p, slice_dense_.params("slice_dense"));
  append(p, fuse_.params("fuse"));
  append(p, head_.params());
  return p;
}

nlohmann::json Rcnn2dPolar::describe() const {
  return {{"model", "rcnn2d_polar"}, {"architecture", cfg_}, {"slices", L_}, {"angles", A_}, {"radii", R_}};
}

// ---- 3D baseline ----------------------------------------------------------

Rcnn3d::Rcnn3d(const ArchitectureConfig& cfg, int slices, int size, std::uint64_t seed)
    : cfg_(checked(cfg)),
      L_(slices),
      S_(size),
      flat_(cube_flat(cfg, slices, size)),
      dense_(flat_, cfg.cube_features),
      head_(cfg.cube_features, cfg) {
  require(slices >= 1 && size >= 1, "rcnn3d: cube dimensions must be positive");
  int in = 1;
  for (int c : cfg_.conv3d_channels) {
    convs_.emplace_back(in, c);
    in = c;
  }
  acts_.resize(convs_.size());
  pools_.resize(convs_.size());
  Rng rng = make_rng(seed, "nn-init-rcnn3d");
  for (auto& c : convs_) c.init(rng);
  dense_.init(rng);
  head_.init(rng);
}

double Rcnn3d::forward(const std::vector<Tensor>& elements, std::uint64_t) {
  require(!elements.empty(), "rcnn3d: empty sequence");
  const int T = static_cast<int>(elements.size());
  Tensor x({T, 1, L_, S_, S_});
  const std::size_t per = static_cast<std::size_t>(L_) * S_ * S_;
  for (int t = 0; t < T; ++t) {
    const Tensor& e = elements[t];
    require(e.rank() == 3 && e.dim(0) == L_ && e.dim(1) == S_ && e.dim(2) == S_,
            "rcnn3d: element shape " + e.shape_string() + " does not match the configured cube");
    std::copy(e.data.begin(), e.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(t * per));
  }
  for (std::size_t b = 0; b < convs_.size(); ++b) {
    x = convs_[b].forward(x);
    x = acts_[b].forward(x);
    x = pools_[b].forward(x);
  }
  pooled_shape_ = x.shape;
  Tensor f = dense_.forward(x.reshaped({T, flat_}));
  f = dense_act_.forward(f);
  return head_.forward(f);
}

void Rcnn3d::backward(double dlogit) {
  Tensor g = head_.backward(dlogit);
  g = dense_act_.backward(g);
  g = dense_.backward(g).reshaped(pooled_shape_);
  for (std::size_t b = convs_.size(); b-- > 0;) {
    g = pools_[b].backward(g);
    g = acts_[b].backward(g);
    g = convs_[b].backward(g);
  }
}

std::vector<NamedParam> Rcnn3d::parameters() {
  std::vector<NamedParam> p;
  for (std::size_t b = 0; b < convs_.size(); ++b) append(p, convs_[b].params("conv" + std::to_string(b)));
  append(p, dense_.params("cube_dense"));
  append(p, head_.params());
  return p;
}

nlohmann::json Rcnn3d::describe() const {
  return {{"model", "rcnn3d_baseline"}, {"architecture", cfg_}, {"slices", L_}, {"size", S_}};
}

// ---- radiomics sequence model ---------------------------------------------

RadiomicsGru::RadiomicsGru(const ArchitectureConfig& cfg, int features, std::uint64_t seed)
    : cfg_(checked(cfg)), F_(features), mlp_(features, cfg.mlp_widths), head_(cfg.mlp_widths.back(), cfg) {
  require(features >= 1, "radiomics gru: feature count must be positive");
  Rng rng = make_rng(seed, "nn-init-radiomics-gru");
  mlp_.init(rng);
  head_.init(rng);
}

double RadiomicsGru::forward(const std::vector<Tensor>& elements, std::uint64_t) {
  require(!elements.empty(), "radiomics gru: empty sequence");
  const int T = static_cast<int>(elements.size());
  Tensor x({T, F_});
  for (int t = 0; t < T; ++t) {
    require(elements[t].size() == static_cast<std::size_t>(F_), "radiomics gru: element feature count mismatch");
    std::copy(elements[t].data.begin(), elements[t].data.end(),
              x.data.begin() + static_cast<std::ptrdiff_t>(t) * F_);
  }
  return head_.forward(mlp_.forward(x));
}

void RadiomicsGru::backward(double dlogit) { mlp_.backward(head_.backward(dlogit)); }

std::vector<NamedParam> RadiomicsGru::parameters() {
  auto p = mlp_.params("mlp");
  append(p, head_.params());
  return p;
}

nlohmann::json RadiomicsGru::describe() const {
  return {{"model", "radiomics_gru"}, {"architecture", cfg_}, {"features", F_}};
}

}  // namespace plaque::nn
