#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "placing/nn.hpp"
#include "placing/tactile.hpp"

namespace placing {

struct TrainConfig {
  Architecture arch = Architecture::Tactile;
  int epochs = 40;
  double test_fraction = 0.2;
  int batch_size = 32;
  double lr = 1e-3;
  double momentum = 0.9;
  double dropout = 0.2;
  int window = 10;          // test batches averaged by the checkpoint rule
  double grad_clip = 10.0;  // global l2 norm ceiling
  uint64_t seed = 0;

  void validate() const;  // throws UsageError
};

struct TrainLog {
  struct TrainBatch {
    int epoch = 0;
    int batch = 0;  // index within the epoch
    double loss = 0.0;
  };
  struct Evaluation {
    int epoch = 0;
    double windowed_loss = 0.0;  // mean of the last `window` test batches
  };
  struct Checkpoint {
    int epoch = 0;
    int batch = 0;  // last train batch before the snapshot
    double value = 0.0;
  };

  std::vector<TrainBatch> train_batches;
  std::vector<Evaluation> evaluations;
  std::vector<Checkpoint> checkpoints;  // values strictly decreasing
};

struct TrainResult {
  NetworkParams best;  // snapshot at the lowest windowed test loss, not final
  TrainLog log;
};

// Deterministic shuffled partition. The test side takes ceil(fraction * n)
// samples, so it is never empty.
std::pair<std::vector<Sample>, std::vector<Sample>> split(
    const std::vector<Sample>& samples, double test_fraction, uint64_t seed);

// Minibatch SGD on the angular loss. The train set is reshuffled every epoch
// from a per-epoch sub-seed; after each epoch every test batch is evaluated
// and the parameters are snapshotted whenever the windowed mean strictly
// improves. A non-finite batch loss aborts with TrainingDivergedError.
TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& test_set);

// Splits with cfg.test_fraction and cfg.seed first. Needs at least one sample
// on each side of the partition.
TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& data);

using Predictor = std::function<Rotation(const Sample&)>;

// Mean and population std of the angular loss over the samples.
std::pair<double, double> evaluate_loss(const Predictor& predict,
                                        const std::vector<Sample>& samples);
std::pair<double, double> evaluate_loss(const NetworkParams& params,
                                        const std::vector<Sample>& samples);

// Plain-text metrics: one "batch" record per train batch, one "eval" per
// evaluation pass, one "checkpoint" per snapshot, in the order they happened.
std::string format_metrics_log(const TrainLog& log);

}  // namespace placing
