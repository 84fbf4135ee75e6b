#include "pivotnmt/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "pivotnmt/eval.hpp"

namespace pivotnmt {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train config: " + field + " " + why);
  };
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) fail("learning_rate", "must be positive");
  if (!(c.clip > 0.0) || !std::isfinite(c.clip)) fail("clip", "must be positive");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) fail("lambda", "must be non-negative");
  if (c.eval_interval == 0) fail("eval_interval", "must be at least 1");
  if (c.likelihood_terms && (c.batch_xz == 0 || c.batch_zy == 0)) fail("batch_xz/batch_zy", "must be at least 1");
  if (c.embed == 0 || c.hidden == 0) fail("embed/hidden", "must be at least 1");
  if (c.mode.kind == ConnectionKind::kLikelihood) {
    if (c.mode.k == 0) fail("k", "must be at least 1");
    if (c.mode.bridge_batch == 0) fail("bridge_batch", "must be at least 1");
    if (c.mode.max_len == 0) fail("max_len", "must be at least 1");
  }
  if (c.pretrain && c.pretrain_patience == 0) fail("pretrain_patience", "must be at least 1");
}

std::string train_config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["mode"] = to_string(c.mode.kind);
  j["k"] = c.mode.k;
  j["bridge_batch"] = c.mode.bridge_batch;
  j["beam"] = c.mode.beam;
  j["max_len"] = c.mode.max_len;
  j["include_reserved"] = c.mode.include_reserved;
  j["lambda"] = c.lambda;
  j["learning_rate"] = c.learning_rate;
  j["clip"] = c.clip;
  j["batch_xz"] = c.batch_xz;
  j["batch_zy"] = c.batch_zy;
  j["max_iterations"] = c.max_iterations;
  j["eval_interval"] = c.eval_interval;
  j["seed"] = c.seed;
  j["embed"] = c.embed;
  j["hidden"] = c.hidden;
  j["likelihood_terms"] = c.likelihood_terms;
  j["pretrain"] = c.pretrain;
  j["pretrain_max_iterations"] = c.pretrain_max_iterations;
  j["pretrain_patience"] = c.pretrain_patience;
  if (c.pretrained) j["pretrained"] = *c.pretrained;
  return j.dump(2);
}

TrainConfig train_config_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("train config: expected a JSON object");
  TrainConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    try {
      if (key == "mode") c.mode.kind = parse_connection_kind(v.get<std::string>());
      else if (key == "k") c.mode.k = v.get<std::size_t>();
      else if (key == "bridge_batch") c.mode.bridge_batch = v.get<std::size_t>();
      else if (key == "beam") c.mode.beam = v.get<std::size_t>();
      else if (key == "max_len") c.mode.max_len = v.get<std::size_t>();
      else if (key == "include_reserved") c.mode.include_reserved = v.get<bool>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "clip") c.clip = v.get<double>();
      else if (key == "batch_xz") c.batch_xz = v.get<std::size_t>();
      else if (key == "batch_zy") c.batch_zy = v.get<std::size_t>();
      else if (key == "max_iterations") c.max_iterations = v.get<std::size_t>();
      else if (key == "eval_interval") c.eval_interval = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "embed") c.embed = v.get<std::size_t>();
      else if (key == "hidden") c.hidden = v.get<std::size_t>();
      else if (key == "likelihood_terms") c.likelihood_terms = v.get<bool>();
      else if (key == "pretrain") c.pretrain = v.get<bool>();
      else if (key == "pretrain_max_iterations") c.pretrain_max_iterations = v.get<std::size_t>();
      else if (key == "pretrain_patience") c.pretrain_patience = v.get<std::size_t>();
      else if (key == "pretrained") c.pretrained = v.get<std::string>();
      else throw std::invalid_argument("train config: unknown field '" + key + "'");
    } catch (const nlohmann::json::type_error&) {
      throw std::invalid_argument("train config: field '" + key + "' has the wrong type");
    }
  }
  return c;
}

std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
  // splitmix64 finalizer over the seed and the stream id.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// Clips the entries selected by `in_group` as one group.
template <typename Pred>
double clip_group(GradientMap& grads, double threshold, Pred in_group) {
  double sq = 0.0;
  for (const auto& [param, grad] : grads)
    if (in_group(param))
      for (double v : grad.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > threshold) {
    const double factor = threshold / norm;
    for (auto& [param, grad] : grads)
      if (in_group(param))
        for (double& v : grad.values()) v *= factor;
  }
  return norm;
}

void check_finite(double value, std::size_t iteration, const char* what) {
  if (!std::isfinite(value))
    throw NumericError("iteration " + std::to_string(iteration) + ": non-finite " + what);
}

void check_finite(const GradientMap& grads, std::size_t iteration) {
  for (const auto& [param, grad] : grads)
    for (double v : grad.values())
      if (!std::isfinite(v))
        throw NumericError("iteration " + std::to_string(iteration) + ": non-finite gradient for '" + param->name +
                           "'");
}

BatchLoss checked_batch_loss(const ParameterSet& params, std::span<const SentencePair> batch, std::size_t iteration) {
  try {
    return batch_loss_and_grads(params, batch);
  } catch (const NumericError& e) {
    throw NumericError("iteration " + std::to_string(iteration) + ": " + e.what());
  }
}

std::vector<SentencePair> gather(const ParallelCorpus& corpus, const std::vector<std::size_t>& idx) {
  std::vector<SentencePair> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(corpus.pairs[i]);
  return out;
}

// Tracks the interval mean loss and reports a plateau after `patience`
// intervals without a relative improvement of at least 1e-3.
class PlateauDetector {
 public:
  explicit PlateauDetector(std::size_t patience) : patience_(patience) {}

  bool update(double loss) {
    if (!std::isfinite(best_) || loss < best_ - 1e-3 * std::abs(best_)) {
      best_ = loss;
      stale_ = 0;
    } else {
      ++stale_;
    }
    return stale_ >= patience_;
  }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& text) {
  std::istringstream is(text);
  std::mt19937_64 rng;
  is >> rng;
  if (!is) throw CheckpointError("trainer state: malformed random state");
  return rng;
}

ordered_json metrics_json(const MetricsRecord& r) {
  ordered_json j;
  j["iteration"] = r.iteration;
  j["L_xz"] = r.loss_xz;
  j["L_zy"] = r.loss_zy;
  j["R"] = r.connection;
  j["lambda"] = r.lambda;
  j["test_cost"] = r.test_cost ? ordered_json(*r.test_cost) : ordered_json(nullptr);
  return j;
}

}  // namespace

double clip_gradients(GradientMap& grads, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip threshold must be positive");
  return clip_group(grads, threshold, [](const Parameter*) { return true; });
}

void clip_per_model(GradientMap& grads, const ParameterSet& xz, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip threshold must be positive");
  std::unordered_set<const Parameter*> owned;
  for (const Parameter* p : xz.raw()) owned.insert(p);
  clip_group(grads, threshold, [&](const Parameter* p) { return owned.contains(p); });
  clip_group(grads, threshold, [&](const Parameter* p) { return !owned.contains(p); });
}

void sgd_update(const GradientMap& grads, double learning_rate) {
  for (const auto& [param, grad] : grads) {
    // Parameters are created non-const by the model code; the map only
    // stores them through const pointers.
    auto& value = const_cast<Parameter*>(param)->value;
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= learning_rate * grad[i];
  }
}

std::vector<std::size_t> sample_batch(std::size_t corpus_size, std::size_t batch, std::mt19937_64& rng) {
  if (corpus_size == 0) throw std::invalid_argument("cannot sample a batch from an empty corpus");
  std::uniform_int_distribution<std::size_t> pick(0, corpus_size - 1);
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::string metrics_to_json(const MetricsRecord& record) { return metrics_json(record).dump(); }

TrainState make_train_state(const ParallelCorpus& xz, const ParallelCorpus& zy, const TrainConfig& config) {
  validate(config);
  TrainState s;
  if (config.pretrained) {
    PivotModels models = load_pivot_models(*config.pretrained);
    s.xz = std::move(models.source_to_pivot);
    s.zy = std::move(models.pivot_to_target);
    s.ties = std::move(models.ties);
    if (s.xz.source_vocab->hash() != xz.left_vocab->hash() || s.xz.target_vocab->hash() != xz.right_vocab->hash() ||
        s.zy.source_vocab->hash() != zy.left_vocab->hash() || s.zy.target_vocab->hash() != zy.right_vocab->hash())
      throw std::invalid_argument("pretrained models do not match the corpus vocabularies");
  } else {
    s.xz = init_params(*xz.left_vocab, *xz.right_vocab, config.embed, config.hidden,
                       derive_seed(config.seed, Stream::kInitXz));
    s.zy = init_params(*zy.left_vocab, *zy.right_vocab, config.embed, config.hidden,
                       derive_seed(config.seed, Stream::kInitZy));
  }
  s.shared = build_shared_vocab(*s.xz.target_vocab, *s.zy.source_vocab, config.mode.include_reserved);
  if (config.mode.kind == ConnectionKind::kHard) s.ties = enforce_hard_tie(s.xz, s.zy, s.shared);
  if (config.mode.kind == ConnectionKind::kLikelihood && !config.pretrained && !config.pretrain)
    s.warnings.push_back(
        "likelihood connection without pretraining: pivot candidates come from an untrained source-to-pivot model");
  s.rng_xz.seed(derive_seed(config.seed, Stream::kXz));
  s.rng_zy.seed(derive_seed(config.seed, Stream::kZy));
  s.rng_xy.seed(derive_seed(config.seed, Stream::kXy));
  return s;
}

StepReport joint_step(TrainState& s, const ParallelCorpus& xz, const ParallelCorpus& zy, const ParallelCorpus* xy,
                      const TrainConfig& config) {
  const std::size_t it = s.iteration + 1;
  StepReport report;
  GradientMap total;

  if (config.likelihood_terms) {
    const auto bx = gather(xz, sample_batch(xz.size(), config.batch_xz, s.rng_xz));
    const auto bz = gather(zy, sample_batch(zy.size(), config.batch_zy, s.rng_zy));
    BatchLoss lx = checked_batch_loss(s.xz, bx, it);
    BatchLoss lz = checked_batch_loss(s.zy, bz, it);
    check_finite(lx.loss, it, "source-to-pivot loss");
    check_finite(lz.loss, it, "pivot-to-target loss");
    report.loss_xz = lx.loss;
    report.loss_zy = lz.loss;
    total.merge(lx.grads);
    total.merge(lz.grads);
  }

  if (config.mode.kind == ConnectionKind::kSoft || config.mode.kind == ConnectionKind::kLikelihood) {
    std::vector<SentencePair> bridge;
    if (config.mode.kind == ConnectionKind::kLikelihood) {
      if (xy == nullptr || xy->empty()) throw std::invalid_argument("likelihood connection needs a bridge corpus");
      bridge = gather(*xy, sample_batch(xy->size(), config.mode.bridge_batch, s.rng_xy));
    }
    ConnectionResult conn = connection_value_and_grads(config.mode, s.xz, s.zy, s.shared, bridge);
    check_finite(conn.value, it, "connection value");
    report.connection = conn.value;
    if (config.lambda != 0.0) total.merge(conn.grads, -config.lambda);
  }

  check_finite(total, it);
  clip_per_model(total, s.xz, config.clip);
  sgd_update(total, config.learning_rate);
  s.iteration = it;
  return report;
}

void train_joint(TrainState& s, const ParallelCorpus& xz, const ParallelCorpus& zy, const ParallelCorpus* xy,
                 const TrainConfig& config, const TrainHooks& hooks) {
  validate(config);
  std::optional<std::ofstream> metrics_out;
  if (hooks.metrics_path) {
    if (hooks.metrics_path->has_parent_path()) fs::create_directories(hooks.metrics_path->parent_path());
    metrics_out.emplace(*hooks.metrics_path, std::ios::app);
    if (!*metrics_out) throw std::runtime_error("cannot open metrics log " + hooks.metrics_path->string());
  }

  StepReport sum;
  std::size_t count = 0;
  while (s.iteration < config.max_iterations) {
    const StepReport r = joint_step(s, xz, zy, xy, config);
    sum.loss_xz += r.loss_xz;
    sum.loss_zy += r.loss_zy;
    sum.connection += r.connection;
    ++count;
    if (s.iteration % config.eval_interval != 0 && s.iteration != config.max_iterations) continue;

    MetricsRecord rec;
    rec.iteration = s.iteration;
    rec.loss_xz = sum.loss_xz / static_cast<double>(count);
    rec.loss_zy = sum.loss_zy / static_cast<double>(count);
    rec.connection = sum.connection / static_cast<double>(count);
    rec.lambda = config.lambda;
    if (!hooks.test_triples.empty()) rec.test_cost = test_cost(s.xz, s.zy, hooks.test_triples, s.iteration).cost;
    s.metrics.push_back(rec);
    if (metrics_out) *metrics_out << metrics_to_json(rec) << '\n' << std::flush;
    if (hooks.checkpoint_dir)
      save_train_state(*hooks.checkpoint_dir, s, config, "iter" + std::to_string(s.iteration));
    if (hooks.on_eval) hooks.on_eval(s, rec);
    sum = {};
    count = 0;
  }
}

IndependentResult train_independent(const ParallelCorpus& corpus, const TrainConfig& config, Stream stream,
                                    const ParameterSet* init, bool until_plateau) {
  validate(config);
  if (stream != Stream::kXz && stream != Stream::kZy)
    throw std::invalid_argument("independent training uses the xz or zy stream");
  const bool is_xz = stream == Stream::kXz;
  IndependentResult out;
  out.params = init != nullptr ? init->clone()
                               : init_params(*corpus.left_vocab, *corpus.right_vocab, config.embed, config.hidden,
                                             derive_seed(config.seed, is_xz ? Stream::kInitXz : Stream::kInitZy));
  std::mt19937_64 rng(derive_seed(config.seed, stream));
  const std::size_t batch = is_xz ? config.batch_xz : config.batch_zy;
  const std::size_t limit = until_plateau ? config.pretrain_max_iterations : config.max_iterations;
  PlateauDetector plateau(config.pretrain_patience);

  double sum = 0.0;
  std::size_t count = 0;
  while (out.iterations < limit) {
    const std::size_t it = out.iterations + 1;
    BatchLoss l = checked_batch_loss(out.params, gather(corpus, sample_batch(corpus.size(), batch, rng)), it);
    check_finite(l.loss, it, "loss");
    check_finite(l.grads, it);
    clip_gradients(l.grads, config.clip);
    sgd_update(l.grads, config.learning_rate);
    out.iterations = it;
    sum += l.loss;
    ++count;
    if (it % config.eval_interval == 0) {
      const double mean = sum / static_cast<double>(count);
      out.interval_losses.push_back(mean);
      sum = 0.0;
      count = 0;
      if (until_plateau && plateau.update(mean)) break;
    }
  }
  return out;
}

void pretrain_state(TrainState& s, const ParallelCorpus& xz, const ParallelCorpus& zy, const TrainConfig& config) {
  // Pretraining undoes any sharing, so hard ties are rebuilt afterwards from
  // the pretrained source-to-pivot rows.
  s.xz = train_independent(xz, config, Stream::kXz, &s.xz, true).params;
  s.zy = train_independent(zy, config, Stream::kZy, &s.zy, true).params;
  if (config.mode.kind == ConnectionKind::kHard) s.ties = enforce_hard_tie(s.xz, s.zy, s.shared);
}

fs::path save_train_state(const fs::path& dir, const TrainState& s, const TrainConfig& config,
                          const std::string& stem) {
  fs::create_directories(dir);
  const fs::path manifest_path = dir / (stem + ".manifest.json");
  PivotModels models{s.xz, s.zy, s.ties};
  Manifest m = save_pivot_models(manifest_path, models, s.iteration, to_string(config.mode.kind), stem);

  ordered_json j;
  j["iteration"] = s.iteration;
  j["config"] = ordered_json::parse(train_config_to_json(config));
  j["rng_xz"] = rng_to_string(s.rng_xz);
  j["rng_zy"] = rng_to_string(s.rng_zy);
  j["rng_xy"] = rng_to_string(s.rng_xy);
  j["metrics"] = ordered_json::array();
  for (const auto& r : s.metrics) j["metrics"].push_back(metrics_json(r));
  j["warnings"] = s.warnings;
  m.trainer_state = stem + ".trainer.json";
  std::ofstream out(dir / *m.trainer_state);
  out << j.dump(2) << '\n';
  if (!out) throw CheckpointError("cannot write trainer state in " + dir.string());
  save_manifest(manifest_path, m);
  return manifest_path;
}

namespace {

ordered_json read_trainer_json(const fs::path& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  if (!m.trainer_state) throw CheckpointError(manifest_path.string() + ": manifest has no trainer state");
  std::ifstream in(manifest_path.parent_path() / *m.trainer_state);
  if (!in) throw CheckpointError("cannot read trainer state " + *m.trainer_state);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("trainer state: ") + e.what());
  }
}

}  // namespace

TrainConfig load_saved_config(const fs::path& manifest_path) {
  return train_config_from_json(read_trainer_json(manifest_path).at("config").dump());
}

TrainState load_train_state(const fs::path& manifest_path) {
  const ordered_json j = read_trainer_json(manifest_path);
  const TrainConfig config = train_config_from_json(j.at("config").dump());
  PivotModels models = load_pivot_models(manifest_path);
  TrainState s;
  s.iteration = j.at("iteration").get<std::size_t>();
  s.xz = std::move(models.source_to_pivot);
  s.zy = std::move(models.pivot_to_target);
  s.ties = std::move(models.ties);
  s.shared = build_shared_vocab(*s.xz.target_vocab, *s.zy.source_vocab, config.mode.include_reserved);
  s.rng_xz = rng_from_string(j.at("rng_xz").get<std::string>());
  s.rng_zy = rng_from_string(j.at("rng_zy").get<std::string>());
  s.rng_xy = rng_from_string(j.at("rng_xy").get<std::string>());
  for (const auto& r : j.at("metrics")) {
    MetricsRecord rec;
    rec.iteration = r.at("iteration").get<std::size_t>();
    rec.loss_xz = r.at("L_xz").get<double>();
    rec.loss_zy = r.at("L_zy").get<double>();
    rec.connection = r.at("R").get<double>();
    rec.lambda = r.at("lambda").get<double>();
    if (!r.at("test_cost").is_null()) rec.test_cost = r.at("test_cost").get<double>();
    s.metrics.push_back(rec);
  }
  s.warnings = j.at("warnings").get<std::vector<std::string>>();
  return s;
}

}  // namespace pivotnmt
