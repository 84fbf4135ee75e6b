#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pivotnmt/checkpoint.hpp"
#include "pivotnmt/connection.hpp"
#include "pivotnmt/corpus.hpp"
#include "pivotnmt/model.hpp"

namespace pivotnmt {

struct TrainConfig {
  ConnectionMode mode;
  double lambda = 1.0;
  double learning_rate = 0.1;
  double clip = 0.1;
  std::size_t batch_xz = 16;
  std::size_t batch_zy = 16;
  std::size_t max_iterations = 1000;
  std::size_t eval_interval = 100;
  std::uint64_t seed = 1;
  std::size_t embed = 16;
  std::size_t hidden = 16;
  // When false the two likelihood terms contribute no gradient and no
  // batches are drawn for them; only the connection term trains.
  bool likelihood_terms = true;

  // Independent pretraining before joint training: runs until the interval
  // mean training loss has not improved for `pretrain_patience` intervals,
  // or for at most `pretrain_max_iterations` iterations.
  bool pretrain = false;
  std::size_t pretrain_max_iterations = 20000;
  std::size_t pretrain_patience = 5;
  // Manifest of a pretrained model pair to start from.
  std::optional<std::string> pretrained;
};

// Throws std::invalid_argument naming the first invalid field.
void validate(const TrainConfig& config);

std::string train_config_to_json(const TrainConfig& config);
// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig train_config_from_json(std::string_view text);

// Independent random streams derived from the run seed.
enum class Stream : std::uint64_t { kXz = 1, kZy = 2, kXy = 3, kInitXz = 4, kInitZy = 5 };
std::uint64_t derive_seed(std::uint64_t seed, Stream stream);

// Rescales every entry by threshold / norm when the L2 norm over all
// entries exceeds threshold. Returns the norm before clipping. Throws
// std::invalid_argument for a non-positive threshold.
double clip_gradients(GradientMap& grads, double threshold);

// Same rule applied separately to each parameter group: entries owned by
// `xz` and entries owned only by `zy`. Storage shared by both counts as xz.
void clip_per_model(GradientMap& grads, const ParameterSet& xz, double threshold);

// value -= learning_rate * grad for every entry.
void sgd_update(const GradientMap& grads, double learning_rate);

// Indices drawn uniformly with replacement.
std::vector<std::size_t> sample_batch(std::size_t corpus_size, std::size_t batch, std::mt19937_64& rng);

struct MetricsRecord {
  std::size_t iteration = 0;
  double loss_xz = 0.0;  // mean batch NLL over the interval
  double loss_zy = 0.0;
  double connection = 0.0;  // mean R over the interval
  double lambda = 0.0;
  std::optional<double> test_cost;
};

std::string metrics_to_json(const MetricsRecord& record);

struct TrainState {
  std::size_t iteration = 0;
  ParameterSet xz;
  ParameterSet zy;
  SharedPivotVocab shared;
  std::optional<TieRecord> ties;
  std::mt19937_64 rng_xz;
  std::mt19937_64 rng_zy;
  std::mt19937_64 rng_xy;
  std::vector<MetricsRecord> metrics;
  std::vector<std::string> warnings;
};

// Fresh (or pretrained, when config.pretrained is set) models for the two
// corpora, with hard tying applied in hard mode. Records a warning when
// likelihood mode starts without pretraining.
TrainState make_train_state(const ParallelCorpus& xz, const ParallelCorpus& zy, const TrainConfig& config);

struct StepReport {
  double loss_xz = 0.0;
  double loss_zy = 0.0;
  double connection = 0.0;
};

// One update of both models. Draws an xz batch and a zy batch (and a bridge
// batch in likelihood mode), combines NLL gradients with -lambda times the
// connection gradients, clips per model and applies SGD. Throws
// std::invalid_argument when likelihood mode has no bridge corpus and
// NumericError naming the iteration on non-finite values.
StepReport joint_step(TrainState& state, const ParallelCorpus& xz, const ParallelCorpus& zy,
                      const ParallelCorpus* xy, const TrainConfig& config);

struct TrainHooks {
  // Test triples for the cost column of the metrics log.
  std::span<const TextTriple> test_triples;
  // Appends one JSON line per metrics record when set.
  std::optional<std::filesystem::path> metrics_path;
  // Saves a manifest, both checkpoints and the trainer state at every eval
  // interval when set; files are named by iteration.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const TrainState&, const MetricsRecord&)> on_eval;
};

// Runs joint_step until state.iteration reaches config.max_iterations.
// A state restored with load_train_state continues where it stopped.
void train_joint(TrainState& state, const ParallelCorpus& xz, const ParallelCorpus& zy, const ParallelCorpus* xy,
                 const TrainConfig& config, const TrainHooks& hooks = {});

struct IndependentResult {
  ParameterSet params;
  std::vector<double> interval_losses;  // mean batch NLL per eval interval
  std::size_t iterations = 0;
};

// SGD on one corpus with its own random stream. Starts from `init` when
// given, otherwise from init_params with the stream's seed. Stops after
// config.max_iterations, or at a plateau when `until_plateau` is set.
IndependentResult train_independent(const ParallelCorpus& corpus, const TrainConfig& config, Stream stream,
                                    const ParameterSet* init = nullptr, bool until_plateau = false);

// Pretrains both models independently until their loss plateaus, then
// re-applies hard tying if the mode asks for it.
void pretrain_state(TrainState& state, const ParallelCorpus& xz, const ParallelCorpus& zy, const TrainConfig& config);

// Checkpoint of a whole training run; returns the manifest path.
std::filesystem::path save_train_state(const std::filesystem::path& dir, const TrainState& state,
                                       const TrainConfig& config, const std::string& stem);
TrainState load_train_state(const std::filesystem::path& manifest_path);
// The configuration stored with a saved training run.
TrainConfig load_saved_config(const std::filesystem::path& manifest_path);

}  // namespace pivotnmt
