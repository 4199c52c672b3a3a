// Backpropagation-through-time trainer: optimizers with hand-checkable
// update rules, geometric learning-rate decay, global-norm clipping and
// best-validation checkpointing.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cfc/cell.hpp"
#include "cfc/series.hpp"

namespace cfc::train {

struct TrainConfig {
  enum class OptimizerKind { adam, rmsprop, adamw };

  OptimizerKind optimizer = OptimizerKind::adam;
  double base_lr = 0.005;
  double decay_lr = 1.0;   // per-epoch multiplicative factor, in (0, 1]
  double clipnorm = 0.0;   // global gradient-norm clip, 0 = off
  double weight_decay = 0.0;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // data-parallel shards with ordered reduction
  // optional early stop once validation accuracy reaches this value (0 = off)
  double stop_at_val_accuracy = 0.0;

  void validate() const;
};

std::string to_string(TrainConfig::OptimizerKind k);
TrainConfig::OptimizerKind optimizer_from_string(const std::string& s);

// Published update rules. Adam/AdamW: beta = (0.9, 0.999); RMSprop:
// rho = 0.9, uncentered; eps = 1e-8 everywhere. Adam and RMSprop fold L2
// weight decay into the gradient; AdamW applies it decoupled.
class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kRho = 0.9;
  static constexpr double kEps = 1e-8;

  explicit Optimizer(TrainConfig::OptimizerKind kind, double weight_decay = 0.0);

  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, double lr);

 private:
  TrainConfig::OptimizerKind kind_;
  double weight_decay_;
  long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

struct SplitDataset {
  std::vector<IrregularSeries> train;
  std::vector<IrregularSeries> val;
  std::vector<IrregularSeries> test;
};

// 70/15/15 split by sequence index (sequences are generated i.i.d. from
// disjoint per-index streams).
SplitDataset split_dataset(std::vector<IrregularSeries> data, double train_frac = 0.70,
                           double val_frac = 0.15);

// Mean binary cross-entropy on final-step logits and accuracy of
// logits thresholded at 0.
EvalResult evaluate(const model::CfcModel& m, std::span<const IrregularSeries> data);

// Minimizes BCE on final-step logits; returns the per-epoch history and
// leaves the best-validation parameters (accuracy, ties broken by loss)
// in `model`.
TrainReport train(model::CfcModel& model, std::span<const IrregularSeries> train_data,
                  std::span<const IrregularSeries> val_data, const TrainConfig& cfg);

}  // namespace cfc::train
