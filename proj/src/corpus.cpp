#include "pivotnmt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace pivotnmt {

namespace fs = std::filesystem;

std::vector<Tokens> left_side(std::span<const TextPair> pairs) {
  std::vector<Tokens> out;
  out.reserve(pairs.size());
  for (const TextPair& p : pairs) out.push_back(p.left);
  return out;
}

std::vector<Tokens> right_side(std::span<const TextPair> pairs) {
  std::vector<Tokens> out;
  out.reserve(pairs.size());
  for (const TextPair& p : pairs) out.push_back(p.right);
  return out;
}

Vocabulary build_vocab(std::span<const Tokens> sentences, std::size_t max_size) {
  if (max_size == 0) throw std::invalid_argument("build_vocab: max_size must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const Tokens& s : sentences)
    for (const std::string& t : s)
      if (!Vocabulary::is_reserved_token(t)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> words;
  words.reserve(ranked.size());
  for (auto& [w, c] : ranked) words.push_back(std::move(w));
  return Vocabulary(words);
}

ParallelCorpus encode_corpus(std::span<const TextPair> pairs, std::shared_ptr<const Vocabulary> left,
                             std::shared_ptr<const Vocabulary> right) {
  ParallelCorpus out;
  out.pairs.reserve(pairs.size());
  for (const TextPair& p : pairs) out.pairs.push_back({left->encode(p.left), right->encode(p.right)});
  out.left_vocab = std::move(left);
  out.right_vocab = std::move(right);
  return out;
}

void write_text_lines(const fs::path& path, std::span<const Tokens> sentences) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (const Tokens& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << s[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::vector<Tokens> read_text_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::vector<Tokens> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(split_whitespace(line));
  }
  return out;
}

void write_text_corpus(const fs::path& left, const fs::path& right, std::span<const TextPair> pairs) {
  const auto l = left_side(pairs);
  const auto r = right_side(pairs);
  write_text_lines(left, l);
  write_text_lines(right, r);
}

TextCorpus load_text_corpus(const fs::path& left, const fs::path& right, std::size_t max_len) {
  auto l = read_text_lines(left);
  auto r = read_text_lines(right);
  if (l.size() != r.size())
    throw std::invalid_argument("line count mismatch: '" + left.string() + "' has " + std::to_string(l.size()) +
                                " lines, '" + right.string() + "' has " + std::to_string(r.size()));
  TextCorpus out;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (l[i].empty() || r[i].empty() || l[i].size() > max_len || r[i].size() > max_len) {
      ++out.dropped;
      continue;
    }
    out.pairs.push_back({std::move(l[i]), std::move(r[i])});
  }
  return out;
}

std::vector<TextTriple> load_triples(const fs::path& source, const fs::path& pivot, const fs::path& target) {
  auto s = read_text_lines(source);
  auto p = read_text_lines(pivot);
  auto t = read_text_lines(target);
  if (s.size() != p.size() || s.size() != t.size())
    throw std::invalid_argument("triple files have different line counts: " + std::to_string(s.size()) + ", " +
                                std::to_string(p.size()) + ", " + std::to_string(t.size()));
  std::vector<TextTriple> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({std::move(s[i]), std::move(p[i]), std::move(t[i])});
  return out;
}

void write_triples(const fs::path& source, const fs::path& pivot, const fs::path& target,
                   std::span<const TextTriple> triples) {
  std::vector<Tokens> s, p, t;
  for (const TextTriple& tr : triples) {
    s.push_back(tr.source);
    p.push_back(tr.pivot);
    t.push_back(tr.target);
  }
  write_text_lines(source, s);
  write_text_lines(pivot, p);
  write_text_lines(target, t);
}

OverlapSplit split_overlap(std::span<const TextPair> xz, std::span<const TextPair> zy) {
  std::set<Tokens> zy_pivots;
  for (const TextPair& p : zy) zy_pivots.insert(p.left);

  std::vector<Tokens> overlapped;
  std::set<Tokens> seen;
  for (const TextPair& p : xz)
    if (zy_pivots.count(p.right) && seen.insert(p.right).second) overlapped.push_back(p.right);

  OverlapSplit out;
  out.overlapped_pivots = overlapped.size();
  out.pivots_to_xz = (overlapped.size() + 1) / 2;
  out.pivots_to_zy = overlapped.size() - out.pivots_to_xz;
  const std::set<Tokens> only_xz(overlapped.begin(), overlapped.begin() + out.pivots_to_xz);
  const std::set<Tokens> only_zy(overlapped.begin() + out.pivots_to_xz, overlapped.end());

  for (const TextPair& p : xz) (only_zy.count(p.right) ? out.dropped_xz : out.xz).push_back(p);
  for (const TextPair& p : zy) (only_xz.count(p.left) ? out.dropped_zy : out.zy).push_back(p);
  return out;
}

std::vector<TextPair> subsample_bridge(std::span<const TextPair> pairs, std::size_t size, std::uint64_t seed) {
  if (size > pairs.size())
    throw std::invalid_argument("subsample_bridge: requested " + std::to_string(size) + " pairs from a corpus of " +
                                std::to_string(pairs.size()));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<TextPair> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) out.push_back(pairs[order[i]]);
  return out;
}

std::string to_string(MappingKind kind) {
  switch (kind) {
    case MappingKind::kIdentity: return "identity";
    case MappingKind::kSubstitution: return "substitution";
    case MappingKind::kReorder: return "reorder";
    case MappingKind::kComposition: return "composition";
  }
  return "identity";
}

MappingKind parse_mapping_kind(std::string_view name) {
  if (name == "identity") return MappingKind::kIdentity;
  if (name == "substitution") return MappingKind::kSubstitution;
  if (name == "reorder") return MappingKind::kReorder;
  if (name == "composition") return MappingKind::kComposition;
  throw std::invalid_argument("unknown mapping kind '" + std::string(name) +
                              "' (expected identity, substitution, reorder or composition)");
}

std::string synth_spec_to_json(const SynthTaskSpec& s) {
  nlohmann::ordered_json j;
  j["source_vocab"] = s.source_vocab;
  j["pivot_vocab"] = s.pivot_vocab;
  j["target_vocab"] = s.target_vocab;
  j["min_len"] = s.min_len;
  j["max_len"] = s.max_len;
  j["source_to_pivot"] = to_string(s.source_to_pivot);
  j["pivot_to_target"] = to_string(s.pivot_to_target);
  j["window"] = s.window;
  j["seed"] = s.seed;
  j["xz_size"] = s.xz_size;
  j["zy_size"] = s.zy_size;
  j["bridge_size"] = s.bridge_size;
  j["dev_size"] = s.dev_size;
  j["test_size"] = s.test_size;
  j["zy_skew"] = s.zy_skew;
  return j.dump(2);
}

SynthTaskSpec synth_spec_from_json(std::string_view text) {
  SynthTaskSpec s;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("task spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("task spec must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "source_vocab") s.source_vocab = v.get<std::size_t>();
      else if (k == "pivot_vocab") s.pivot_vocab = v.get<std::size_t>();
      else if (k == "target_vocab") s.target_vocab = v.get<std::size_t>();
      else if (k == "min_len") s.min_len = v.get<std::size_t>();
      else if (k == "max_len") s.max_len = v.get<std::size_t>();
      else if (k == "source_to_pivot") s.source_to_pivot = parse_mapping_kind(v.get<std::string>());
      else if (k == "pivot_to_target") s.pivot_to_target = parse_mapping_kind(v.get<std::string>());
      else if (k == "window") s.window = v.get<std::size_t>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      else if (k == "xz_size") s.xz_size = v.get<std::size_t>();
      else if (k == "zy_size") s.zy_size = v.get<std::size_t>();
      else if (k == "bridge_size") s.bridge_size = v.get<std::size_t>();
      else if (k == "dev_size") s.dev_size = v.get<std::size_t>();
      else if (k == "test_size") s.test_size = v.get<std::size_t>();
      else if (k == "zy_skew") s.zy_skew = v.get<double>();
      else throw std::invalid_argument("unknown task spec field '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("task spec field has the wrong type: ") + e.what());
  }
  return s;
}

namespace {

std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

bool substitutes(MappingKind k) { return k == MappingKind::kSubstitution || k == MappingKind::kComposition; }
bool reorders(MappingKind k) { return k == MappingKind::kReorder || k == MappingKind::kComposition; }

std::size_t word_index(const std::string& w, std::size_t vocab) {
  if (w.size() < 2 || w[0] != 'w') throw std::invalid_argument("'" + w + "' is not a synthetic word");
  std::size_t idx = 0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i] < '0' || w[i] > '9') throw std::invalid_argument("'" + w + "' is not a synthetic word");
    idx = idx * 10 + static_cast<std::size_t>(w[i] - '0');
  }
  if (idx >= vocab) throw std::invalid_argument("'" + w + "' is outside the synthetic vocabulary");
  return idx;
}

Tokens apply(MappingKind kind, const std::vector<std::size_t>& perm, std::size_t in_vocab, std::size_t window,
             const Tokens& in) {
  Tokens out;
  out.reserve(in.size());
  for (const std::string& w : in) {
    const std::size_t i = word_index(w, in_vocab);
    out.push_back(SynthMapping::word(substitutes(kind) ? perm[i] : i));
  }
  if (reorders(kind))
    for (std::size_t b = 0; b < out.size(); b += window)
      std::reverse(out.begin() + b, out.begin() + std::min(out.size(), b + window));
  return out;
}

void check_sizes(MappingKind kind, std::size_t in, std::size_t out, const char* what) {
  if (in == 0 || out == 0) throw std::invalid_argument(std::string(what) + ": vocabulary sizes must be >= 1");
  if (in != out)
    throw std::invalid_argument(std::string(what) + ": mapping '" + to_string(kind) +
                                "' needs equal vocabulary sizes, got " + std::to_string(in) + " and " +
                                std::to_string(out));
}

}  // namespace

SynthMapping::SynthMapping(const SynthTaskSpec& spec) : spec_(spec) {
  check_sizes(spec.source_to_pivot, spec.source_vocab, spec.pivot_vocab, "source-to-pivot");
  check_sizes(spec.pivot_to_target, spec.pivot_vocab, spec.target_vocab, "pivot-to-target");
  if (spec.window == 0) throw std::invalid_argument("reordering window must be >= 1");
  std::mt19937_64 rng(spec.seed ^ 0x5eed5eedULL);
  f_ = random_permutation(spec.source_vocab, rng);
  g_ = random_permutation(spec.pivot_vocab, rng);
}

Tokens SynthMapping::source_to_pivot(const Tokens& source) const {
  return apply(spec_.source_to_pivot, f_, spec_.source_vocab, spec_.window, source);
}

Tokens SynthMapping::pivot_to_target(const Tokens& pivot) const {
  return apply(spec_.pivot_to_target, g_, spec_.pivot_vocab, spec_.window, pivot);
}

Tokens SynthMapping::unsubstitute_pivot(const Tokens& pivot) const {
  if (!substitutes(spec_.source_to_pivot)) return pivot;
  std::vector<std::size_t> inverse(f_.size());
  for (std::size_t i = 0; i < f_.size(); ++i) inverse[f_[i]] = i;
  Tokens out;
  for (const std::string& w : pivot) out.push_back(word(inverse[word_index(w, spec_.pivot_vocab)]));
  return out;
}

SynthData generate_synth(const SynthTaskSpec& spec) {
  if (spec.min_len < 1 || spec.min_len > spec.max_len)
    throw std::invalid_argument("sentence length range must satisfy 1 <= min_len <= max_len");
  if (spec.zy_skew < 0.0) throw std::invalid_argument("zy_skew must be >= 0");
  const SynthMapping mapping(spec);

  const std::size_t total = spec.xz_size + spec.zy_size + spec.bridge_size + spec.dev_size + spec.test_size;
  // Number of distinct sentences available, capped to avoid overflow.
  double space = 0.0;
  for (std::size_t len = spec.min_len; len <= spec.max_len && space < 1e18; ++len)
    space += std::pow(static_cast<double>(spec.source_vocab), static_cast<double>(len));
  if (space < static_cast<double>(total))
    throw std::invalid_argument("task needs " + std::to_string(total) + " distinct source sentences but only " +
                                std::to_string(static_cast<long long>(space)) + " exist");

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> length(spec.min_len, spec.max_len);
  std::uniform_int_distribution<std::size_t> uniform_word(0, spec.source_vocab - 1);
  std::vector<double> zipf_weights(spec.source_vocab);
  for (std::size_t i = 0; i < spec.source_vocab; ++i)
    zipf_weights[i] = 1.0 / std::pow(static_cast<double>(i + 1), spec.zy_skew);
  std::discrete_distribution<std::size_t> skewed_word(zipf_weights.begin(), zipf_weights.end());

  std::set<Tokens> used;
  auto draw = [&](bool skewed) {
    for (std::size_t attempt = 0; attempt < 1000000; ++attempt) {
      Tokens s(length(rng));
      for (std::string& w : s) w = SynthMapping::word(skewed ? skewed_word(rng) : uniform_word(rng));
      if (used.insert(s).second) return s;
    }
    throw std::runtime_error("generate_synth: could not draw a new distinct sentence");
  };

  SynthData data;
  for (std::size_t i = 0; i < spec.xz_size; ++i) {
    Tokens x = draw(false);
    data.xz.push_back({x, mapping.source_to_pivot(x)});
  }
  for (std::size_t i = 0; i < spec.zy_size; ++i) {
    const Tokens z = mapping.source_to_pivot(draw(spec.zy_skew > 0.0));
    data.zy.push_back({z, mapping.pivot_to_target(z)});
  }
  for (std::size_t i = 0; i < spec.bridge_size; ++i) {
    Tokens x = draw(false);
    data.xy.push_back({x, mapping.pivot_to_target(mapping.source_to_pivot(x))});
  }
  auto triples = [&](std::size_t n, std::vector<TextTriple>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      Tokens x = draw(false);
      Tokens z = mapping.source_to_pivot(x);
      Tokens y = mapping.pivot_to_target(z);
      out.push_back({std::move(x), std::move(z), std::move(y)});
    }
  };
  triples(spec.dev_size, data.dev);
  triples(spec.test_size, data.test);
  return data;
}

}  // namespace pivotnmt
