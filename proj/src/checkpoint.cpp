#include "pivotnmt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace pivotnmt {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'P', 'V', 'N', 'M', 'T', 'C', 'K', 'P'};

enum RecordKind : std::uint8_t { kTensorRecord = 0, kAliasRecord = 1, kPartnerAliasRecord = 2 };

class Writer {
 public:
  explicit Writer(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  }
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(std::span<const double> v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void finish(const fs::path& path) {
    out_.flush();
    if (!out_) throw CheckpointError("write to '" + path.string() + "' failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  }
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw CheckpointError("truncated checkpoint '" + path_.string() + "'");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 20)) throw CheckpointError("corrupt string length in '" + path_.string() + "'");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("truncated checkpoint '" + path_.string() + "'");
    return s;
  }
  void doubles(std::span<double> v) {
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in_) throw CheckpointError("truncated checkpoint '" + path_.string() + "'");
  }

 private:
  std::ifstream in_;
  fs::path path_;
};

std::unordered_map<const Parameter*, std::string> slot_index(const ParameterSet& params) {
  std::unordered_map<const Parameter*, std::string> index;
  const auto all = params.all();
  const auto names = params.slot_names();
  for (std::size_t i = 0; i < all.size(); ++i) index.try_emplace(all[i].get(), names[i]);
  return index;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

void save_checkpoint(const fs::path& path, const ParameterSet& params, const ParameterSet* partner) {
  const auto all = params.all();
  const auto names = params.slot_names();
  const auto partner_slots = partner ? slot_index(*partner) : std::unordered_map<const Parameter*, std::string>{};

  Writer w(path);
  w.pod(kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(params.dims.embed);
  w.pod<std::uint64_t>(params.dims.hidden);
  w.pod<std::uint64_t>(params.source_vocab->hash());
  w.pod<std::uint64_t>(params.target_vocab->hash());
  w.pod<std::uint64_t>(all.size());

  std::unordered_map<const Parameter*, std::string> written;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Parameter* p = all[i].get();
    if (auto it = written.find(p); it != written.end()) {
      w.pod<std::uint8_t>(kAliasRecord);
      w.str(names[i]);
      w.str(p->tie_tag);
      w.str(it->second);
      continue;
    }
    if (auto it = partner_slots.find(p); it != partner_slots.end()) {
      w.pod<std::uint8_t>(kPartnerAliasRecord);
      w.str(names[i]);
      w.str(p->tie_tag);
      w.str(it->second);
      continue;
    }
    w.pod<std::uint8_t>(kTensorRecord);
    w.str(names[i]);
    w.str(p->tie_tag);
    const Shape& s = p->value.shape();
    w.pod<std::uint64_t>(s.rank());
    for (std::size_t a = 0; a < s.rank(); ++a) w.pod<std::uint64_t>(s[a]);
    w.doubles(p->value.values());
    written.emplace(p, names[i]);
  }
  w.finish(path);
}

ParameterSet load_checkpoint(const fs::path& path, const Vocabulary& source, const Vocabulary& target,
                             const ParameterSet* partner) {
  Reader r(path);
  char magic[8];
  for (char& c : magic) c = r.pod<char>();
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("'" + path.string() + "' is not a checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto embed = r.pod<std::uint64_t>();
  const auto hidden = r.pod<std::uint64_t>();
  const auto src_hash = r.pod<std::uint64_t>();
  const auto tgt_hash = r.pod<std::uint64_t>();
  if (src_hash != source.hash())
    throw CheckpointError("source vocabulary hash mismatch: checkpoint " + hex64(src_hash) + ", supplied " +
                          hex64(source.hash()));
  if (tgt_hash != target.hash())
    throw CheckpointError("target vocabulary hash mismatch: checkpoint " + hex64(tgt_hash) + ", supplied " +
                          hex64(target.hash()));

  ParameterSet params = allocate_params(source, target, embed, hidden);
  const auto names = params.slot_names();
  std::unordered_map<std::string, std::size_t> slot_of;
  for (std::size_t i = 0; i < names.size(); ++i) slot_of.emplace(names[i], i);

  std::unordered_map<std::string, ParameterPtr> partner_by_slot;
  if (partner) {
    const auto pall = partner->all();
    const auto pnames = partner->slot_names();
    for (std::size_t i = 0; i < pall.size(); ++i) partner_by_slot.emplace(pnames[i], pall[i]);
  }

  // Slot pointers in canonical order; replaced as records are read.
  std::vector<ParameterPtr> slots = params.all();
  std::vector<bool> filled(slots.size(), false);

  const auto count = r.pod<std::uint64_t>();
  if (count != slots.size())
    throw CheckpointError("checkpoint has " + std::to_string(count) + " records, model layout needs " +
                          std::to_string(slots.size()));
  for (std::uint64_t n = 0; n < count; ++n) {
    const auto kind = r.pod<std::uint8_t>();
    const std::string slot = r.str();
    const std::string tag = r.str();
    auto it = slot_of.find(slot);
    if (it == slot_of.end()) throw CheckpointError("unknown tensor '" + slot + "'");
    const std::size_t idx = it->second;

    if (kind == kTensorRecord) {
      const auto rank = r.pod<std::uint64_t>();
      if (rank > Shape::kMaxRank) throw CheckpointError("tensor '" + slot + "' has unsupported rank");
      std::vector<std::size_t> dims(rank);
      for (auto& d : dims) d = r.pod<std::uint64_t>();
      const Shape shape{std::span<const std::size_t>(dims)};
      if (!(shape == slots[idx]->value.shape()))
        throw CheckpointError("tensor '" + slot + "' has shape " + shape.str() + ", expected " +
                              slots[idx]->value.shape().str());
      r.doubles(slots[idx]->value.values());
      slots[idx]->tie_tag = tag;
    } else if (kind == kAliasRecord) {
      const std::string target_slot = r.str();
      auto t = slot_of.find(target_slot);
      if (t == slot_of.end() || !filled[t->second])
        throw CheckpointError("alias '" + slot + "' refers to unread tensor '" + target_slot + "'");
      slots[idx] = slots[t->second];
    } else if (kind == kPartnerAliasRecord) {
      const std::string target_slot = r.str();
      if (!partner)
        throw CheckpointError("tensor '" + slot + "' is stored in the partner checkpoint; load it through the manifest");
      auto t = partner_by_slot.find(target_slot);
      if (t == partner_by_slot.end()) throw CheckpointError("partner has no tensor '" + target_slot + "'");
      if (!(t->second->value.shape() == slots[idx]->value.shape()))
        throw CheckpointError("partner tensor '" + target_slot + "' has the wrong shape");
      slots[idx] = t->second;
    } else {
      throw CheckpointError("unknown record kind " + std::to_string(kind));
    }
    filled[idx] = true;
  }

  // Write the (possibly aliased) pointers back into the set, canonical order.
  std::size_t i = 0;
  for (auto& row : params.source_embed.rows) row = slots[i++];
  for (auto& row : params.target_embed.rows) row = slots[i++];
  for (GruWeights* g : {&params.encoder_forward, &params.encoder_backward, &params.decoder}) {
    g->input = slots[i++];
    g->gates_hidden = slots[i++];
    g->candidate_hidden = slots[i++];
    g->bias = slots[i++];
  }
  for (ParameterPtr* p : {&params.init_weight, &params.init_bias, &params.attention_state,
                          &params.attention_annotation, &params.attention_score, &params.readout_weight,
                          &params.readout_bias, &params.output_weight, &params.output_bias})
    *p = slots[i++];
  return params;
}

void save_vocabulary(const fs::path& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write vocabulary '" + path.string() + "'");
  for (const std::string& w : vocab.words()) out << w << '\n';
}

Vocabulary load_vocabulary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read vocabulary '" + path.string() + "'");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    words.push_back(line);
  }
  return Vocabulary(words);
}

void save_tie_record(const fs::path& path, const TieRecord& ties) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write tie record '" + path.string() + "'");
  for (const auto& t : ties.words) out << t.word << '\t' << t.source_to_pivot_id << '\t' << t.pivot_to_target_id << '\n';
}

TieRecord load_tie_record(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read tie record '" + path.string() + "'");
  TieRecord ties;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    TiedWord t;
    if (!(std::getline(is, t.word, '\t') >> t.source_to_pivot_id >> t.pivot_to_target_id))
      throw CheckpointError("malformed tie record line: " + line);
    ties.words.push_back(t);
  }
  return ties;
}

namespace {

nlohmann::ordered_json files_json(const ModelFiles& f) {
  nlohmann::ordered_json j;
  j["checkpoint"] = f.checkpoint;
  j["source_vocab"] = f.source_vocab;
  j["target_vocab"] = f.target_vocab;
  return j;
}

ModelFiles files_from(const nlohmann::json& j) {
  return {j.at("checkpoint").get<std::string>(), j.at("source_vocab").get<std::string>(),
          j.at("target_vocab").get<std::string>()};
}

}  // namespace

void save_manifest(const fs::path& path, const Manifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "pivotnmt-manifest";
  j["version"] = 1;
  j["iteration"] = m.iteration;
  j["mode"] = m.mode;
  j["source_to_pivot"] = files_json(m.source_to_pivot);
  j["pivot_to_target"] = files_json(m.pivot_to_target);
  j["tie_record"] = m.tie_record ? nlohmann::ordered_json(*m.tie_record) : nlohmann::ordered_json(nullptr);
  j["trainer_state"] = m.trainer_state ? nlohmann::ordered_json(*m.trainer_state) : nlohmann::ordered_json(nullptr);
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write manifest '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.value("format", "") != "pivotnmt-manifest") throw CheckpointError("'" + path.string() + "' is not a manifest");
    Manifest m;
    m.iteration = j.at("iteration").get<std::size_t>();
    m.mode = j.at("mode").get<std::string>();
    m.source_to_pivot = files_from(j.at("source_to_pivot"));
    m.pivot_to_target = files_from(j.at("pivot_to_target"));
    if (j.contains("tie_record") && !j["tie_record"].is_null()) m.tie_record = j["tie_record"].get<std::string>();
    if (j.contains("trainer_state") && !j["trainer_state"].is_null())
      m.trainer_state = j["trainer_state"].get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed manifest '" + path.string() + "': " + e.what());
  }
}

Manifest save_pivot_models(const fs::path& manifest_path, const PivotModels& models, std::size_t iteration,
                           const std::string& mode, const std::string& stem) {
  const fs::path dir = manifest_path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  Manifest m;
  m.iteration = iteration;
  m.mode = mode;
  m.source_to_pivot = {stem + ".xz.ckpt", stem + ".xz.src.vocab", stem + ".xz.tgt.vocab"};
  m.pivot_to_target = {stem + ".zy.ckpt", stem + ".zy.src.vocab", stem + ".zy.tgt.vocab"};

  const auto& xz = models.source_to_pivot;
  const auto& zy = models.pivot_to_target;
  save_vocabulary(dir / m.source_to_pivot.source_vocab, *xz.source_vocab);
  save_vocabulary(dir / m.source_to_pivot.target_vocab, *xz.target_vocab);
  save_vocabulary(dir / m.pivot_to_target.source_vocab, *zy.source_vocab);
  save_vocabulary(dir / m.pivot_to_target.target_vocab, *zy.target_vocab);
  save_checkpoint(dir / m.source_to_pivot.checkpoint, xz);
  save_checkpoint(dir / m.pivot_to_target.checkpoint, zy, &xz);
  if (models.ties) {
    m.tie_record = stem + ".ties.tsv";
    save_tie_record(dir / *m.tie_record, *models.ties);
  }
  save_manifest(manifest_path, m);
  return m;
}

PivotModels load_pivot_models(const fs::path& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  PivotModels out{
      load_checkpoint(dir / m.source_to_pivot.checkpoint, load_vocabulary(dir / m.source_to_pivot.source_vocab),
                      load_vocabulary(dir / m.source_to_pivot.target_vocab)),
      {},
      std::nullopt};
  out.pivot_to_target =
      load_checkpoint(dir / m.pivot_to_target.checkpoint, load_vocabulary(dir / m.pivot_to_target.source_vocab),
                      load_vocabulary(dir / m.pivot_to_target.target_vocab), &out.source_to_pivot);
  if (m.tie_record) out.ties = load_tie_record(dir / *m.tie_record);
  return out;
}

}  // namespace pivotnmt
