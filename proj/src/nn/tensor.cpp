#include "plaque/nn/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace plaque::nn {

std::size_t shape_count(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 5) throw std::invalid_argument("tensor rank must be 1..5");
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape_, double fill) : shape(std::move(shape_)) {
  data.assign(shape_count(shape), fill);
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
  ensure_grad();
  std::fill(grad.begin(), grad.end(), 0.0);
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
  if (shape_count(new_shape) != data.size())
    throw std::invalid_argument("reshape changes element count: " + shape_string());
  Tensor t;
  t.shape = std::move(new_shape);
  t.data = data;
  return t;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace plaque::nn
