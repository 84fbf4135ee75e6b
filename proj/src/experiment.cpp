#include "pivotnmt/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "pivotnmt/eval.hpp"

namespace pivotnmt {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string run_config_to_json(const RunConfig& c) {
  ordered_json j = ordered_json::parse(train_config_to_json(c.train));
  j["data_dir"] = c.data_dir;
  j["vocab_size"] = c.vocab_size;
  j["max_sentence_length"] = c.max_sentence_length;
  j["split_overlap"] = c.split_overlap;
  j["beam_size"] = c.beam;
  j["decode_max_len"] = c.decode_max_len;
  return j.dump(2);
}

RunConfig run_config_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("run config: expected a JSON object");
  RunConfig c;
  ordered_json train = ordered_json::object();
  train["mode"] = to_string(c.train.mode.kind);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    try {
      if (key == "data_dir") c.data_dir = v.get<std::string>();
      else if (key == "vocab_size") c.vocab_size = v.get<std::size_t>();
      else if (key == "max_sentence_length") c.max_sentence_length = v.get<std::size_t>();
      else if (key == "split_overlap") c.split_overlap = v.get<bool>();
      else if (key == "beam_size") c.beam = v.get<std::size_t>();
      else if (key == "decode_max_len") c.decode_max_len = v.get<std::size_t>();
      else train[key] = v;
    } catch (const nlohmann::json::type_error&) {
      throw std::invalid_argument("run config: field '" + key + "' has the wrong type");
    }
  }
  c.train = train_config_from_json(train.dump());
  if (c.vocab_size == 0) throw std::invalid_argument("run config: vocab_size must be at least 1");
  if (c.beam == 0) throw std::invalid_argument("run config: beam_size must be at least 1");
  return c;
}

void write_task(const fs::path& dir, const SynthData& data, const SynthTaskSpec& spec) {
  fs::create_directories(dir);
  write_text_corpus(dir / TaskFiles::kXzSource, dir / TaskFiles::kXzPivot, data.xz);
  write_text_corpus(dir / TaskFiles::kZyPivot, dir / TaskFiles::kZyTarget, data.zy);
  write_text_corpus(dir / TaskFiles::kXySource, dir / TaskFiles::kXyTarget, data.xy);
  write_triples(dir / "dev.src", dir / "dev.piv", dir / "dev.tgt", data.dev);
  write_triples(dir / "test.src", dir / "test.piv", dir / "test.tgt", data.test);
  std::ofstream out(dir / TaskFiles::kProvenance);
  out << synth_spec_to_json(spec) << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / TaskFiles::kProvenance).string());
}

void check_bridge_disjoint(const TaskText& text) {
  const auto xz_sources = left_side(text.xz);
  const auto zy_targets = right_side(text.zy);
  const std::set<Tokens> sources(xz_sources.begin(), xz_sources.end());
  const std::set<Tokens> targets(zy_targets.begin(), zy_targets.end());
  for (std::size_t i = 0; i < text.xy.size(); ++i) {
    if (sources.count(text.xy[i].left))
      throw std::invalid_argument("bridge pair " + std::to_string(i + 1) + " repeats a source sentence of xz");
    if (targets.count(text.xy[i].right))
      throw std::invalid_argument("bridge pair " + std::to_string(i + 1) + " repeats a target sentence of zy");
  }
}

TaskText read_task(const fs::path& dir, std::size_t max_sentence_length) {
  TaskText t;
  auto load = [&](const char* left, const char* right, std::vector<TextPair>& into) {
    TextCorpus c = load_text_corpus(dir / left, dir / right, max_sentence_length);
    t.dropped += c.dropped;
    into = std::move(c.pairs);
  };
  load(TaskFiles::kXzSource, TaskFiles::kXzPivot, t.xz);
  load(TaskFiles::kZyPivot, TaskFiles::kZyTarget, t.zy);
  if (fs::exists(dir / TaskFiles::kXySource)) load(TaskFiles::kXySource, TaskFiles::kXyTarget, t.xy);
  if (fs::exists(dir / "dev.src")) t.dev = load_triples(dir / "dev.src", dir / "dev.piv", dir / "dev.tgt");
  if (fs::exists(dir / "test.src")) t.test = load_triples(dir / "test.src", dir / "test.piv", dir / "test.tgt");
  check_bridge_disjoint(t);
  return t;
}

TaskText task_text(const SynthData& data) { return {data.xz, data.zy, data.xy, data.dev, data.test, 0}; }

EncodedTask encode_task(const TaskText& text, std::size_t vocab_size) {
  if (text.xz.empty() || text.zy.empty()) throw std::invalid_argument("training corpora must not be empty");
  auto vocab = [&](std::vector<Tokens> side) {
    return std::make_shared<const Vocabulary>(build_vocab(side, vocab_size));
  };
  EncodedTask t;
  t.xz = encode_corpus(text.xz, vocab(left_side(text.xz)), vocab(right_side(text.xz)));
  t.zy = encode_corpus(text.zy, vocab(left_side(text.zy)), vocab(right_side(text.zy)));
  t.xy = encode_bridge(text.xy, t);
  return t;
}

ParallelCorpus encode_bridge(std::span<const TextPair> pairs, const EncodedTask& task) {
  return encode_corpus(pairs, task.xz.left_vocab, task.zy.right_vocab);
}

namespace {

std::vector<Tokens> decode_all(const ParameterSet& params, std::span<const Tokens> inputs,
                               const BeamOptions& options) {
  std::vector<Tokens> out;
  out.reserve(inputs.size());
  for (const Tokens& in : inputs) {
    const auto hyps = beam_search(params, params.source_vocab->encode(in), options);
    out.push_back(hyps.empty() ? Tokens{} : params.target_vocab->decode(hyps.front().tokens));
  }
  return out;
}

}  // namespace

DirectionScores score_directions(const ParameterSet& xz, const ParameterSet& zy, std::span<const TextTriple> triples,
                                 const BeamOptions& options) {
  std::vector<Tokens> sources, pivots, targets;
  for (const auto& t : triples) {
    sources.push_back(t.source);
    pivots.push_back(t.pivot);
    targets.push_back(t.target);
  }
  DirectionScores s;
  s.source_to_pivot = bleu(decode_all(xz, sources, options), pivots, true).score;
  s.pivot_to_target = bleu(decode_all(zy, pivots, options), targets, true).score;
  s.source_to_target = evaluate_pivoted(xz, zy, triples, options, true).target_bleu.score;
  return s;
}

std::vector<AblationRow> ablate_bridge(const TaskText& text, const EncodedTask& task, const TrainState& pretrained,
                                       const TrainConfig& config, std::span<const std::size_t> sizes,
                                       const BeamOptions& options) {
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw std::invalid_argument("bridge sizes must be ascending");
  for (std::size_t size : sizes)
    if (size > text.xy.size())
      throw std::invalid_argument("bridge size " + std::to_string(size) + " exceeds the bridge corpus of " +
                                  std::to_string(text.xy.size()) + " pairs");
  std::vector<AblationRow> rows;
  for (std::size_t size : sizes) {
    TrainConfig c = config;
    c.mode.kind = size == 0 ? ConnectionKind::kNone : ConnectionKind::kLikelihood;
    c.pretrain = false;
    const ParallelCorpus bridge = encode_bridge(subsample_bridge(text.xy, size, config.seed), task);

    TrainState s;
    auto [xz, zy] = clone_pair(pretrained.xz, pretrained.zy);
    s.xz = std::move(xz);
    s.zy = std::move(zy);
    s.shared = pretrained.shared;
    s.ties = pretrained.ties;
    s.rng_xz.seed(derive_seed(c.seed, Stream::kXz));
    s.rng_zy.seed(derive_seed(c.seed, Stream::kZy));
    s.rng_xy.seed(derive_seed(c.seed, Stream::kXy));
    train_joint(s, task.xz, task.zy, size == 0 ? nullptr : &bridge, c);
    rows.push_back({size, score_directions(s.xz, s.zy, text.test, options)});
  }
  return rows;
}

}  // namespace pivotnmt
