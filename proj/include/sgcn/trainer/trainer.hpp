#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sgcn/chargraph/graph.hpp"
#include "sgcn/ink/dataset.hpp"
#include "sgcn/network/model.hpp"
#include "sgcn/numcore/adam.hpp"
#include "sgcn/trainer/checkpoint.hpp"

namespace sgcn::trainer {

using Model = network::SgcnModel<float>;
using numcore::Tensor;
using numcore::Var;

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr = 0.002;
  double lr_factor = 0.1;
  std::size_t patience = 3;
  double min_lr = 1e-5;
  double tolerance = 1e-4;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t workers = 1;
  /// When false the seconds column of the metrics CSV is written as 0.
  bool record_time = true;

  void validate() const;
};

/// Graphs ready for batching, with their labels.
struct PreparedSet {
  std::vector<chargraph::CharGraph> graphs;
  std::vector<std::uint32_t> labels;
  std::size_t size() const { return graphs.size(); }
};

PreparedSet prepare(const ink::Dataset& data, std::span<const std::size_t> indices,
                    const network::ModelConfig& config, std::size_t workers = 1);
PreparedSet prepare(const ink::Dataset& data, const network::ModelConfig& config,
                    std::size_t workers = 1);

/// Deterministic seeded shuffle split into (train, eval) index lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed);

struct Metrics {
  double top1 = 0;
  double top5 = 0;
  double loss = 0;  // mean cross-entropy of the sigma-scaled cosine logits
  std::size_t count = 0;
};

/// Row-wise statistics of logits against labels; ties resolve to the lowest
/// class index.
Metrics score_logits(const Tensor<float>& logits, std::span<const std::uint32_t> labels);

Metrics evaluate(Model& model, const PreparedSet& data, std::size_t batch_size = 128,
                 std::size_t workers = 1);

/// Index of the first maximum of each row.
std::vector<std::uint32_t> argmax_rows(const Tensor<float>& logits);

/// True when the best entry of `history` (an entry only counts as better when
/// it beats the running best by more than `tolerance`) is followed by at
/// least `patience` further entries.
bool plateaued(std::span<const double> history, std::size_t patience, double tolerance = 1e-4);

/// lr * factor (floored at min_lr) on a plateau of `history`, else lr.
double lr_schedule_step(std::span<const double> history, double lr, std::size_t patience,
                        double factor, double min_lr, double tolerance = 1e-4);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double top1 = 0;
  double lr = 0;
  double seconds = 0;
};

std::string metrics_csv(std::span<const EpochRecord> records);

/// Mutable training progress; serialized into checkpoints as JSON.
struct TrainState {
  std::size_t epoch = 0;
  double lr = 0.002;
  std::vector<EpochRecord> records;
  std::size_t decay_start = 0;  // index into records where the current lr began
  double best_top1 = -1;
  std::size_t best_epoch = 0;
  bool finished = false;  // converged at min_lr
  std::string rng_state;
  std::uint64_t adam_step = 0;

  std::string to_json() const;
  static TrainState from_json(const std::string& text);
};

class Trainer {
 public:
  /// Outputs are optional; an empty path disables that output. The latest
  /// full state goes to `checkpoint` + ".last".
  struct Outputs {
    std::filesystem::path checkpoint;
    std::filesystem::path metrics_csv;
    std::ostream* log = nullptr;
  };

  Trainer(Model& model, TrainConfig config, Outputs outputs);
  Trainer(Model& model, TrainConfig config) : Trainer(model, std::move(config), Outputs{}) {}

  /// Restores model, optimizer, RNG and progress from a ".last" checkpoint.
  void resume(const std::filesystem::path& last_checkpoint);

  /// Runs one epoch plus evaluation. Returns false once training has stopped.
  bool run_epoch(const PreparedSet& train, const PreparedSet& eval);

  /// Epochs until max_epochs or convergence at min_lr.
  void run(const PreparedSet& train, const PreparedSet& eval);

  const TrainState& state() const { return state_; }
  CheckpointFile snapshot(bool with_optimizer) const;

 private:
  Model& model_;
  TrainConfig config_;
  Outputs outputs_;
  numcore::AdamState<float> adam_;
  numcore::Rng rng_;
  TrainState state_;
};

}  // namespace sgcn::trainer
