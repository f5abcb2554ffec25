#pragma once

#include "plaque/nn/gru.hpp"
#include "plaque/nn/layers.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace plaque::nn {

struct ArchitectureConfig {
  // 2D path: conv blocks (3x3 conv, ReLU, fractional max pool), then a dense
  // layer to the per-slice feature, then 1x1 fusion over the cube's slices.
  std::vector<int> conv2d_channels{16, 32};
  double fmp_ratio = 1.4142135623730951;
  int slice_features = 64;
  int fused_features = 64;
  // 3D path: conv blocks (3x3x3 conv, ReLU, 2x max pool), dense to cube feature.
  std::vector<int> conv3d_channels{16, 32, 64};
  int cube_features = 64;
  // Element MLP for radiomic feature sequences.
  std::vector<int> mlp_widths{64, 64, 64};
  int gru_hidden = 64;
  int gru_layers = 2;
  bool bidirectional = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const ArchitectureConfig& c);
void from_json(const nlohmann::json& j, ArchitectureConfig& c);

// A sequence classifier: elements in, one logit out. forward caches what
// backward needs; backward accumulates parameter gradients.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;
  // `pool_seed` drives stochastic layers (fractional pooling); pass a fixed
  // value at inference.
  virtual double forward(const std::vector<Tensor>& elements, std::uint64_t pool_seed) = 0;
  virtual void backward(double dlogit) = 0;
  virtual std::vector<NamedParam> parameters() = 0;
  virtual nlohmann::json describe() const = 0;

  void zero_grad();
  std::size_t parameter_count();
};

// Shared recurrent head: GRU stack over T x F, final states of the top layer
// (forward at T-1, backward at 0) concatenated, dense to one logit.
class GruHead {
 public:
  GruHead(int in_features, const ArchitectureConfig& cfg);
  double forward(const Tensor& seq);
  Tensor backward(double dlogit);
  void init(Rng& rng);
  std::vector<NamedParam> params();

 private:
  GruStack gru_;
  Dense out_;
  int T_ = 0;
};

// Polar slices (cube = L x A x R) -> 2D CNN per slice -> fusion -> GRU head.
class Rcnn2dPolar : public SequenceModel {
 public:
  Rcnn2dPolar(const ArchitectureConfig& cfg, int slices, int angles, int radii, std::uint64_t seed);
  double forward(const std::vector<Tensor>& elements, std::uint64_t pool_seed) override;
  void backward(double dlogit) override;
  std::vector<NamedParam> parameters() override;
  nlohmann::json describe() const override;

 private:
  ArchitectureConfig cfg_;
  int L_, A_, R_;
  std::vector<Conv2d> convs_;
  std::vector<Relu> acts_;
  std::vector<FractionalMaxPool2d> pools_;
  int flat_ = 0;
  Dense slice_dense_;
  Relu slice_act_;
  Conv1x1Fuse fuse_;
  Relu fuse_act_;
  GruHead head_;
  int T_ = 0;
  std::vector<int> pooled_shape_;
};

// Cartesian cubes (L x S x S) -> 3D CNN -> dense -> GRU head.
class Rcnn3d : public SequenceModel {
 public:
  Rcnn3d(const ArchitectureConfig& cfg, int slices, int size, std::uint64_t seed);
  double forward(const std::vector<Tensor>& elements, std::uint64_t pool_seed) override;
  void backward(double dlogit) override;
  std::vector<NamedParam> parameters() override;
  nlohmann::json describe() const override;

 private:
  ArchitectureConfig cfg_;
  int L_, S_;
  std::vector<Conv3d> convs_;
  std::vector<Relu> acts_;
  std::vector<MaxPool3d> pools_;
  int flat_ = 0;
  Dense dense_;
  Relu dense_act_;
  GruHead head_;
  std::vector<int> pooled_shape_;
};

// Feature vectors per element -> MLP -> GRU head.
class RadiomicsGru : public SequenceModel {
 public:
  RadiomicsGru(const ArchitectureConfig& cfg, int features, std::uint64_t seed);
  double forward(const std::vector<Tensor>& elements, std::uint64_t pool_seed) override;
  void backward(double dlogit) override;
  std::vector<NamedParam> parameters() override;
  nlohmann::json describe() const override;

 private:
  ArchitectureConfig cfg_;
  int F_;
  Mlp mlp_;
  GruHead head_;
};

}  // namespace plaque::nn
