#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pivotnmt/corpus.hpp"
#include "pivotnmt/decoding.hpp"
#include "pivotnmt/trainer.hpp"

namespace pivotnmt {

// Everything a training subcommand reads: the trainer settings plus where
// the data lives and how it is turned into vocabularies.
struct RunConfig {
  TrainConfig train;
  std::string data_dir = "data";  // relative to the output directory unless absolute
  std::size_t vocab_size = 1000;  // per side, most frequent words
  std::size_t max_sentence_length = kDefaultMaxSentenceLength;
  bool split_overlap = false;
  std::size_t beam = 4;  // decoding width for evaluation
  std::size_t decode_max_len = 50;

  RunConfig() { train.mode.kind = ConnectionKind::kLikelihood; }
};

std::string run_config_to_json(const RunConfig& config);
// Unknown fields are rejected with std::invalid_argument naming the field.
RunConfig run_config_from_json(std::string_view text);

// File names written by the data generator inside one directory.
struct TaskFiles {
  static constexpr const char* kXzSource = "xz.src";
  static constexpr const char* kXzPivot = "xz.piv";
  static constexpr const char* kZyPivot = "zy.piv";
  static constexpr const char* kZyTarget = "zy.tgt";
  static constexpr const char* kXySource = "xy.src";
  static constexpr const char* kXyTarget = "xy.tgt";
  static constexpr const char* kProvenance = "provenance.json";
};

// Writes every split of `data` plus the generating spec.
void write_task(const std::filesystem::path& dir, const SynthData& data, const SynthTaskSpec& spec);

struct TaskText {
  std::vector<TextPair> xz;
  std::vector<TextPair> zy;
  std::vector<TextPair> xy;
  std::vector<TextTriple> dev;
  std::vector<TextTriple> test;
  std::size_t dropped = 0;  // pairs removed while loading
};

// Throws std::invalid_argument if a bridge pair repeats an xz source
// sentence or a zy target sentence.
void check_bridge_disjoint(const TaskText& text);

// Reads a directory written by write_task. Missing bridge, dev or test files
// leave those splits empty. The bridge is checked with check_bridge_disjoint.
TaskText read_task(const std::filesystem::path& dir, std::size_t max_sentence_length = kDefaultMaxSentenceLength);

TaskText task_text(const SynthData& data);

struct EncodedTask {
  ParallelCorpus xz;
  ParallelCorpus zy;
  ParallelCorpus xy;  // source vocabulary of xz, target vocabulary of zy
};

// Builds vocabularies from the training sides of xz and zy.
EncodedTask encode_task(const TaskText& text, std::size_t vocab_size);

// Encodes bridge pairs with the vocabularies of an encoded task.
ParallelCorpus encode_bridge(std::span<const TextPair> pairs, const EncodedTask& task);

struct DirectionScores {
  double source_to_pivot = 0.0;  // BLEU of xz against gold pivots
  double pivot_to_target = 0.0;  // BLEU of zy from gold pivots
  double source_to_target = 0.0;  // BLEU of the pivoted cascade
};

DirectionScores score_directions(const ParameterSet& xz, const ParameterSet& zy, std::span<const TextTriple> triples,
                                 const BeamOptions& options);

struct AblationRow {
  std::size_t bridge_size = 0;
  DirectionScores scores;
};

// For each size: the first `size` pairs of a seeded shuffle of the bridge
// corpus, then joint training from the given pretrained pair (likelihood
// mode; size 0 trains with no connection). Sizes must be ascending and no
// larger than the bridge corpus, otherwise std::invalid_argument.
std::vector<AblationRow> ablate_bridge(const TaskText& text, const EncodedTask& task, const TrainState& pretrained,
                                       const TrainConfig& config, std::span<const std::size_t> sizes,
                                       const BeamOptions& options);

}  // namespace pivotnmt
