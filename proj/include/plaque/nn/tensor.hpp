#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace plaque::nn {

// Storage aligned to Eigen's packet size. Vectorized reductions choose their
// peeling from the address, so heap alignment would otherwise leak into the
// rounding and break bit-identical reruns.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

// Dense row-major tensor of up to 5 axes. `grad` is empty until a layer or
// optimizer asks for it; when present it has the same size as `data`.
struct Tensor {
  std::vector<int> shape;
  Buffer data;
  Buffer grad;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_, double fill = 0.0);
  Tensor(std::initializer_list<int> shape_, double fill = 0.0)
      : Tensor(std::vector<int>(shape_), fill) {}

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int axis) const { return shape.at(static_cast<std::size_t>(axis)); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  void ensure_grad();
  void zero_grad();
  // Same data, new shape with equal element count.
  Tensor reshaped(std::vector<int> new_shape) const;
  std::string shape_string() const;
};

std::size_t shape_count(const std::vector<int>& shape);

}  // namespace plaque::nn
