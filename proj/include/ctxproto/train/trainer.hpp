#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ctxproto/data/scene.hpp"
#include "ctxproto/error.hpp"
#include "ctxproto/losses/losses.hpp"
#include "ctxproto/model/config.hpp"
#include "ctxproto/train/checkpoint.hpp"

namespace ctxproto::train {

struct TrainConfig {
  model::ModelConfig model;
  losses::LossConfig loss;
  std::size_t iterations = 2000;  // long-schedule runs use 60000
  std::size_t batch_size = 8;     // scenes per step
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  std::size_t log_every = 0;         // 0 = silent
  std::size_t checkpoint_every = 0;  // 0 = only the final checkpoint
  double divergence_threshold = 1e6;

  void validate() const;
};

// Training stopped on a diverging or non-finite loss. Carries the trace so far.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::vector<TraceEntry> trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }

 private:
  std::vector<TraceEntry> trace_;
};

struct WordInit {
  std::optional<numerics::DenseMatrix> predicate_words;
  std::optional<numerics::DenseMatrix> category_words;
};

using CheckpointCallback = std::function<void(const Checkpoint&)>;

// Mini-batch momentum SGD on the full objective. Batches are drawn from a
// seeded reshuffle of the scenes each epoch; the batch loss is the mean of
// per-scene losses. The result is a pure function of (dataset, config, words).
Checkpoint train(const data::Dataset& dataset, const TrainConfig& config,
                 const WordInit& words = {}, const CheckpointCallback& on_checkpoint = {});

// Class weights for the cross-entropy term (empty when reweighting is off).
std::vector<double> training_class_weights(const data::Dataset& dataset,
                                           const losses::LossConfig& loss);

}  // namespace ctxproto::train
