#pragma once

#include "plaque/volume.hpp"

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace plaque::radiomics {

struct DiscretizationSpec {
  enum class Mode { FixedWidth, FixedCount };
  Mode mode = Mode::FixedWidth;
  double width = 25.0;
  int count = 32;

  void validate() const;
};

// Integer gray levels 1..levels inside the mask, 0 outside.
struct LevelMap {
  Dims dims;
  std::vector<int> level;
  int levels = 0;

  int at(int i, int j, int k) const {
    return level[static_cast<std::size_t>(i) +
                 static_cast<std::size_t>(dims.nx) *
                     (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims.ny) * k)];
  }
};

struct Feature {
  std::string transform;
  std::string feature_class;
  std::string name;
  double value = 0.0;

  std::string full_name() const { return transform + "_" + feature_class + "_" + name; }
};

struct FeatureVector {
  std::vector<Feature> features;

  std::size_t size() const { return features.size(); }
  std::vector<std::string> names() const;
  std::vector<double> values() const;
};

// Laplacian of Gaussian (sigma in mm) as a sum of three separable passes,
// kernels truncated at 4 sigma, symmetric reflection at the borders.
// Throws when a kernel radius exceeds the volume extent along an axis.
Volume log_transform(const Volume& vol, double sigma_mm);

// Single-level separable Haar with the averaging convention
// L = (a + b) / 2, H = (a - b) / 2. Odd axes are padded by edge replication.
// Band index bits are (x, y, z) with x the most significant: 0 = LLL,
// 1 = LLH, ..., 7 = HHH. Band grids have doubled spacing and origin shifted to
// the pair centers.
std::array<Volume, 8> haar_wavelet_3d(const Volume& vol);
Volume haar_inverse_3d(const std::array<Volume, 8>& bands, const Grid& original);
const std::array<std::string, 8>& haar_band_names();

// Half-resolution mask matching the Haar band grids: a coarse voxel is set
// when at least half of its children are set; if that leaves the mask empty,
// when any child is set.
Mask haar_downsample_mask(const Mask& mask);

LevelMap discretize(const Volume& vol, const Mask& mask, const DiscretizationSpec& spec);

// 18 values: Mean, Median, Minimum, Maximum, Range, Variance, Skewness,
// Kurtosis, Energy, RootMeanSquared, MeanAbsoluteDeviation,
// RobustMeanAbsoluteDeviation, 10Percentile, 90Percentile,
// InterquartileRange, Entropy, Uniformity, TotalEnergy.
std::vector<Feature> first_order_features(const Volume& vol, const Mask& mask,
                                          const DiscretizationSpec& spec);

struct ShapeResult {
  std::vector<Feature> features;
  bool took_largest_component = false;
};

// 10 values: VoxelVolume, SurfaceArea, SurfaceVolumeRatio, Sphericity,
// Maximum3DDiameter, MajorAxisLength, MinorAxisLength, LeastAxisLength,
// Elongation, Flatness. Surface area counts exposed voxel faces. A
// disconnected mask is reduced to its largest 26-connected component.
ShapeResult shape_features(const Mask& mask);

// The 13 unique offsets of the 26-neighbourhood.
const std::array<std::array<int, 3>, 13>& directions();

// Symmetrized co-occurrence counts (levels x levels) per direction, at
// distance 1. Entry (i-1, j-1) counts ordered pairs in both orders.
std::vector<Eigen::MatrixXd> glcm_matrices(const LevelMap& levels);

// 12 values: Contrast, Dissimilarity, JointEnergy, JointEntropy, Idm,
// Correlation, ClusterShade, ClusterProminence, MaximumProbability,
// Autocorrelation, SumAverage, DifferenceEntropy. Computed per direction on
// the normalized matrix and averaged over the directions in `use` (all 13
// when empty) that have pairs.
std::vector<Feature> glcm_features(const LevelMap& levels, std::vector<int> use = {});

// Run-length counts (levels x max run length) per direction.
std::vector<Eigen::MatrixXd> glrlm_matrices(const LevelMap& levels);

// 11 values: ShortRunEmphasis, LongRunEmphasis, GrayLevelNonUniformity,
// RunLengthNonUniformity, RunPercentage, LowGrayLevelRunEmphasis,
// HighGrayLevelRunEmphasis, ShortRunLowGrayLevelEmphasis,
// ShortRunHighGrayLevelEmphasis, LongRunLowGrayLevelEmphasis,
// LongRunHighGrayLevelEmphasis. Averaged over directions as for the GLCM.
std::vector<Feature> glrlm_features(const LevelMap& levels, std::vector<int> use = {});

struct RadiomicsConfig {
  bool original = true;
  std::vector<double> log_sigmas{1.0, 2.0, 3.0};
  bool wavelet = true;
  // LLL is a smoothed copy of the original; off by default (461 features).
  bool wavelet_lll = false;

  bool shape = true;
  bool first_order = true;
  bool glcm = true;
  bool glrlm = true;

  DiscretizationSpec discretization;

  std::vector<std::string> transform_names() const;
  std::size_t dimension() const;
  void validate() const;
};

// Canonical order: shape (once, from the mask), then for each transform
// (original, LoG sigmas ascending as configured, wavelet bands in index
// order, LLL only when enabled) the
// first-order, GLCM and GLRLM blocks.
FeatureVector extract_radiomics(const Volume& vol, const Mask& mask, const RadiomicsConfig& cfg);

std::vector<std::string> feature_names(const RadiomicsConfig& cfg);

}  // namespace plaque::radiomics
