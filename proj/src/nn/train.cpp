#include "plaque/nn/train.hpp"

#include "plaque/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace plaque::nn {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("train: Adam betas in [0,1)");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
       {"beta1", c.beta1},   {"beta2", c.beta2},           {"adam_eps", c.adam_eps}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
}

Adam::Adam(std::vector<NamedParam> params, const TrainConfig& cfg)
    : params_(std::move(params)), lr_(cfg.learning_rate), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.adam_eps) {
  for (auto& p : params_) {
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Adam::step(double scale) {
  ++t_;
  const double c1 = 1 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i].tensor;
    p.ensure_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = p.grad[k] * scale;
      m[k] = b1_ * m[k] + (1 - b1_) * g;
      v[k] = b2_ * v[k] + (1 - b2_) * g * g;
      p.data[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

double predict_one(SequenceModel& model, const std::vector<Tensor>& elements) {
  return sigmoid(model.forward(elements, kInferencePoolSeed));
}

std::vector<double> predict(SequenceModel& model, const std::vector<SequenceExample>& examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(predict_one(model, e.elements));
  return out;
}

namespace {

std::vector<Buffer> snapshot(SequenceModel& model) {
  std::vector<Buffer> s;
  for (auto& p : model.parameters()) s.push_back(p.tensor->data);
  return s;
}

void restore(SequenceModel& model, const std::vector<Buffer>& s) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor->data = s[i];
}

std::vector<std::vector<std::size_t>> default_batches(std::size_t n, int batch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch))
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
  return out;
}

}  // namespace

TrainResult train_loop(SequenceModel& model, const std::vector<SequenceExample>& train,
                       const std::vector<SequenceExample>& val, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train.empty() || val.empty()) throw std::invalid_argument("train: training and validation sets must be nonempty");
  std::vector<int> val_labels;
  for (const auto& e : val) val_labels.push_back(e.label);
  const bool auc_defined = std::count(val_labels.begin(), val_labels.end(), 1) > 0 &&
                           std::count(val_labels.begin(), val_labels.end(), 0) > 0;

  auto params = model.parameters();
  Adam adam(params, cfg);
  TrainResult result;
  result.best_score = -std::numeric_limits<double>::infinity();
  auto best = snapshot(model);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, "nn-epoch", static_cast<std::uint64_t>(epoch));
    const auto batches = hooks.batches ? hooks.batches(rng) : default_batches(train.size(), cfg.batch_size, rng);
    double loss_sum = 0;
    std::size_t seen = 0;
    std::uint64_t counter = 0;
    for (const auto& batch : batches) {
      if (batch.empty()) continue;
      model.zero_grad();
      for (std::size_t idx : batch) {
        if (idx >= train.size()) throw std::out_of_range("train: batch index out of range");
        const std::uint64_t draw = counter++;
        std::vector<Tensor> augmented;
        if (hooks.augment) {
          Rng arng = make_rng(cfg.seed, "nn-augment", static_cast<std::uint64_t>(epoch), draw);
          augmented = hooks.augment(idx, arng);
        }
        const auto& input = hooks.augment ? augmented : train[idx].elements;
        const double logit = model.forward(input, derive_seed(cfg.seed, "nn-pool", static_cast<std::uint64_t>(epoch), draw));
        const LossGrad lg = bce_with_logits(logit, train[idx].label);
        loss_sum += lg.loss;
        ++seen;
        model.backward(lg.grad);
      }
      adam.step(1.0 / static_cast<double>(batch.size()));
    }

    const auto probs = predict(model, val);
    double val_loss = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double p = std::clamp(probs[i], 1e-15, 1 - 1e-15);
      val_loss -= val_labels[i] ? std::log(p) : std::log(1 - p);
    }
    val_loss /= static_cast<double>(val.size());
    const double auc = auc_defined ? roc_auc(probs, val_labels) : std::numeric_limits<double>::quiet_NaN();
    result.log.push_back({epoch, seen ? loss_sum / static_cast<double>(seen) : std::numeric_limits<double>::quiet_NaN(),
                          auc, val_loss});
    const double score = auc_defined ? auc : -val_loss;
    if (seen > 0 && score > result.best_score) {
      result.best_score = score;
      result.best_epoch = epoch;
      best = snapshot(model);
    }
  }
  restore(model, best);
  return result;
}

// ---- checkpoints ----------------------------------------------------------

namespace {

std::uint64_t swap_bytes(std::uint64_t v) {
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

void write_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double read_le(std::istream& is) {
  std::uint64_t bits = 0;
  is.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if (!is) throw std::runtime_error("checkpoint: truncated parameter block");
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  return std::bit_cast<double>(bits);
}

nlohmann::json header_for(SequenceModel& model) {
  nlohmann::json params = nlohmann::json::array();
  std::size_t count = 0;
  for (auto& p : model.parameters()) {
    params.push_back({{"name", p.name}, {"shape", p.tensor->shape}});
    count += p.tensor->size();
  }
  return {{"format", "plaque-nn/1"},
          {"encoding", "float64-le"},
          {"model", model.describe()},
          {"parameters", params},
          {"count", count}};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, SequenceModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path.string());
  os << header_for(model).dump() << '\n';
  for (auto& p : model.parameters())
    for (double v : p.tensor->data) write_le(os, v);
}

void load_checkpoint(const std::filesystem::path& path, SequenceModel& model) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  const auto header = nlohmann::json::parse(line);
  const auto expected = header_for(model);
  if (header.value("format", "") != "plaque-nn/1") throw std::runtime_error("checkpoint: unknown format");
  if (header["parameters"] != expected["parameters"] || header["model"] != expected["model"])
    throw std::runtime_error("checkpoint: architecture does not match the model");
  for (auto& p : model.parameters())
    for (double& v : p.tensor->data) v = read_le(is);
}

void write_training_log(const std::filesystem::path& path, const TrainResult& result) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("training log: cannot write " + path.string());
  os.precision(17);
  os << "epoch,train_loss,val_auc,val_loss\n";
  for (const auto& r : result.log) os << r.epoch << ',' << r.train_loss << ',' << r.val_auc << ',' << r.val_loss << '\n';
}

}  // namespace plaque::nn
