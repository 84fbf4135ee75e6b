#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pivotnmt/model.hpp"

namespace pivotnmt {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary container, little-endian host layout:
//
//   "PVNMTCKP" | u32 version | u64 embed | u64 hidden
//   | u64 source_vocab_hash | u64 target_vocab_hash | u64 record_count
//   | record*
//
// record = u8 kind | str slot | str tie_tag | payload
//   kind 0 (tensor)        payload = u64 rank | u64 dims[rank] | f64 values
//   kind 1 (alias)         payload = str slot of an earlier record in this file
//   kind 2 (partner alias) payload = str slot in the partner model's checkpoint
//
// str = u64 length | bytes. Storage shared with `partner` is written once, in
// the partner's file, and referenced through a kind-2 record.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const ParameterSet* partner = nullptr);

// Verifies the vocabulary hashes. Kind-2 records are resolved against
// `partner` and become shared storage; loading them without a partner fails.
ParameterSet load_checkpoint(const std::filesystem::path& path, const Vocabulary& source, const Vocabulary& target,
                             const ParameterSet* partner = nullptr);

// Vocabulary file: one word per line, line i holds id i + 4.
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);

struct TiedWord {
  std::string word;
  TokenId source_to_pivot_id = 0;  // id in the source-to-pivot target vocabulary
  TokenId pivot_to_target_id = 0;  // id in the pivot-to-target source vocabulary

  friend bool operator==(const TiedWord&, const TiedWord&) = default;
};

// Rows of the two models that share storage; tab-separated on disk.
struct TieRecord {
  std::vector<TiedWord> words;

  friend bool operator==(const TieRecord&, const TieRecord&) = default;
};

void save_tie_record(const std::filesystem::path& path, const TieRecord& ties);
TieRecord load_tie_record(const std::filesystem::path& path);

struct ModelFiles {
  std::string checkpoint;
  std::string source_vocab;
  std::string target_vocab;
};

// Links the two checkpoints of a pivot system. Paths are relative to the
// manifest's directory.
struct Manifest {
  std::size_t iteration = 0;
  std::string mode;
  ModelFiles source_to_pivot;
  ModelFiles pivot_to_target;
  std::optional<std::string> tie_record;
  std::optional<std::string> trainer_state;
};

void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);

struct PivotModels {
  ParameterSet source_to_pivot;
  ParameterSet pivot_to_target;
  std::optional<TieRecord> ties;
};

// Writes vocabularies, both checkpoints and the tie record next to the
// manifest, using `stem` as a file-name prefix.
Manifest save_pivot_models(const std::filesystem::path& manifest_path, const PivotModels& models,
                           std::size_t iteration, const std::string& mode, const std::string& stem);
PivotModels load_pivot_models(const std::filesystem::path& manifest_path);

}  // namespace pivotnmt
