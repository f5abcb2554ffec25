#pragma once

#include "plaque/nn/models.hpp"

#include <filesystem>
#include <functional>

namespace plaque::nn {

struct SequenceExample {
  std::vector<Tensor> elements;
  int label = 0;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

class Adam {
 public:
  Adam(std::vector<NamedParam> params, const TrainConfig& cfg);
  // Applies one update with gradients scaled by `scale` (1 / batch size).
  void step(double scale);

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
};

struct EpochRecord {
  int epoch;
  double train_loss;   // mean over the epoch's training examples; NaN without batches
  double val_auc;      // NaN when the validation set has one class
  double val_loss;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // 0 = initial parameters kept
  double best_score = 0;
};

struct TrainHooks {
  // Batches of training indices for one epoch. Default: a seeded shuffle cut
  // into consecutive batches.
  std::function<std::vector<std::vector<std::size_t>>(Rng&)> batches;
  // Training-time view of example i (augmentation). Default: unchanged.
  std::function<std::vector<Tensor>(std::size_t, Rng&)> augment;
};

// Mini-batch Adam on BCE. After every epoch the validation AUC is computed;
// the parameters of the best epoch are restored on return (ties go to the
// earliest epoch). A single-class validation set falls back to the lowest
// validation loss.
TrainResult train_loop(SequenceModel& model, const std::vector<SequenceExample>& train,
                       const std::vector<SequenceExample>& val, const TrainConfig& cfg,
                       const TrainHooks& hooks = {});

// Probabilities with the fixed inference pooling seed.
std::vector<double> predict(SequenceModel& model, const std::vector<SequenceExample>& examples);
double predict_one(SequenceModel& model, const std::vector<Tensor>& elements);

inline constexpr std::uint64_t kInferencePoolSeed = 0x5eed0f00dULL;

// Checkpoint: one JSON header line (format, architecture echo, parameter
// names and shapes), then float64 little-endian values in parameter order.
void save_checkpoint(const std::filesystem::path& path, SequenceModel& model);
void load_checkpoint(const std::filesystem::path& path, SequenceModel& model);

void write_training_log(const std::filesystem::path& path, const TrainResult& result);

}  // namespace plaque::nn
