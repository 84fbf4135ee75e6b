#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pivotnmt/checkpoint.hpp"
#include "pivotnmt/decoding.hpp"
#include "pivotnmt/eval.hpp"
#include "pivotnmt/experiment.hpp"
#include "pivotnmt/grad_suite.hpp"
#include "pivotnmt/trainer.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using namespace pivotnmt;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? " " : "") + tokens[i];
  return out;
}

fs::path under(const fs::path& out, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p : out / p;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> bridge_size;
};

int cmd_gen_data(const GenDataArgs& a) {
  SynthTaskSpec spec = a.spec.empty() ? SynthTaskSpec{} : synth_spec_from_json(read_file(a.spec));
  if (a.seed) spec.seed = *a.seed;
  if (a.bridge_size) spec.bridge_size = *a.bridge_size;
  const SynthData data = generate_synth(spec);
  write_task(a.out, data, spec);
  std::cout << "wrote " << data.xz.size() << " source-pivot, " << data.zy.size() << " pivot-target, "
            << data.xy.size() << " bridge pairs and " << data.dev.size() << "/" << data.test.size()
            << " dev/test triples to " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::string> mode;
  std::optional<double> lambda, clip, learning_rate;
  std::optional<std::size_t> k, iterations, eval_interval, bridge_batch, batch, max_len;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data, pretrained, resume;
  bool pretrain = false;
};

RunConfig merged_config(const TrainArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : run_config_from_json(read_file(a.config));
  if (a.mode) c.train.mode.kind = parse_connection_kind(*a.mode);
  if (a.lambda) c.train.lambda = *a.lambda;
  if (a.clip) c.train.clip = *a.clip;
  if (a.learning_rate) c.train.learning_rate = *a.learning_rate;
  if (a.k) c.train.mode.k = *a.k;
  if (a.iterations) c.train.max_iterations = *a.iterations;
  if (a.eval_interval) c.train.eval_interval = *a.eval_interval;
  if (a.bridge_batch) c.train.mode.bridge_batch = *a.bridge_batch;
  if (a.max_len) c.train.mode.max_len = *a.max_len;
  if (a.batch) c.train.batch_xz = c.train.batch_zy = *a.batch;
  if (a.seed) c.train.seed = *a.seed;
  if (a.data) c.data_dir = *a.data;
  if (a.pretrained) c.train.pretrained = *a.pretrained;
  if (a.pretrain) c.train.pretrain = true;
  validate(c.train);
  return c;
}

// Keeps the records up to `iteration` so a resumed run continues the log
// without duplicates or gaps.
void truncate_metrics(const fs::path& path, const std::vector<MetricsRecord>& kept) {
  std::string text;
  for (const auto& r : kept) text += metrics_to_json(r) + "\n";
  write_file(path, text);
}

int cmd_train(const TrainArgs& a) {
  const fs::path out(a.out);
  RunConfig rc = merged_config(a);
  if (rc.train.pretrained) rc.train.pretrained = under(out, *rc.train.pretrained).string();
  fs::create_directories(out);
  write_file(out / "run_config.json", run_config_to_json(rc) + "\n");

  TaskText text = read_task(under(out, rc.data_dir), rc.max_sentence_length);
  if (rc.split_overlap) {
    const OverlapSplit split = split_overlap(text.xz, text.zy);
    std::cerr << "split_overlap: " << split.overlapped_pivots << " shared pivot sentences, dropped "
              << split.dropped_xz.size() << " source-pivot and " << split.dropped_zy.size()
              << " pivot-target pairs\n";
    text.xz = split.xz;
    text.zy = split.zy;
  }
  const EncodedTask task = encode_task(text, rc.vocab_size);
  const TrainConfig& cfg = rc.train;
  if (cfg.mode.kind == ConnectionKind::kLikelihood && task.xy.empty())
    throw std::invalid_argument("likelihood mode needs a non-empty bridge corpus in " + rc.data_dir);

  TrainState state;
  const fs::path metrics = out / "metrics.jsonl";
  if (a.resume) {
    state = load_train_state(under(out, *a.resume));
    truncate_metrics(metrics, state.metrics);
  } else {
    state = make_train_state(task.xz, task.zy, cfg);
    if (fs::exists(metrics)) fs::remove(metrics);
    if (cfg.pretrain) pretrain_state(state, task.xz, task.zy, cfg);
  }
  for (const auto& w : state.warnings) std::cerr << "warning: " << w << '\n';

  TrainHooks hooks;
  hooks.metrics_path = metrics;
  hooks.checkpoint_dir = out / "checkpoints";
  hooks.test_triples = text.test;
  train_joint(state, task.xz, task.zy, task.xy.empty() ? nullptr : &task.xy, cfg, hooks);
  const fs::path manifest = save_train_state(out, state, cfg, "final");

  ordered_json summary;
  summary["manifest"] = manifest.string();
  summary["iteration"] = state.iteration;
  if (!state.metrics.empty()) summary["last"] = ordered_json::parse(metrics_to_json(state.metrics.back()));
  std::cout << summary.dump() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// translate

struct TranslateArgs {
  std::string manifest, input, output;
  std::size_t beam = 4;
  std::size_t max_len = 50;
};

int cmd_translate(const TranslateArgs& a) {
  const PivotModels models = load_pivot_models(a.manifest);
  check_vocab_chain(models.source_to_pivot, models.pivot_to_target);
  const std::vector<Tokens> sources = read_text_lines(a.input);
  BeamOptions options;
  options.beam = a.beam;
  options.max_len = a.max_len;
  const PivotedOutput out = translate_sources(models.source_to_pivot, models.pivot_to_target, sources, options);
  std::string text;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    text += join(sources[i]) + '\t' + join(out.pivots[i]) + '\t' + join(out.targets[i]) + '\t' +
            format_double(out.pivot_log_probs[i]) + '\t' + format_double(out.target_log_probs[i]) + '\n';
  }
  write_file(a.output, text);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string hyp, ref;
  std::string metric = "bleu";
  bool case_insensitive = false;
};

std::vector<Tokens> fold(std::vector<Tokens> sentences) {
  for (auto& s : sentences)
    for (auto& w : s)
      for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return sentences;
}

int cmd_eval(const EvalArgs& a) {
  const auto hyps = read_text_lines(a.hyp);
  const auto refs = read_text_lines(a.ref);
  if (hyps.size() != refs.size())
    throw std::invalid_argument("hypothesis file has " + std::to_string(hyps.size()) + " lines, reference file " +
                                std::to_string(refs.size()));
  ordered_json report;
  if (a.metric == "bleu" || a.metric == "all")
    report["bleu"] = ordered_json::parse(bleu_to_json(bleu(hyps, refs, a.case_insensitive)));
  if (a.metric == "accuracy" || a.metric == "all")
    report["accuracy"] = a.case_insensitive ? eval_accuracy(fold(hyps), fold(refs)) : eval_accuracy(hyps, refs);
  std::cout << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// curve

struct CurveArgs {
  std::vector<std::string> manifests;
  std::string triples;
  std::string out;
};

// A directory stands for every manifest inside it, ordered by iteration.
std::vector<fs::path> expand_manifests(const std::string& entry) {
  const fs::path p(entry);
  if (!fs::is_directory(p)) return {p};
  std::vector<std::pair<std::size_t, fs::path>> found;
  for (const auto& e : fs::directory_iterator(p)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 14 && name.ends_with(".manifest.json"))
      found.emplace_back(load_manifest(e.path()).iteration, e.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& f : found) out.push_back(f.second);
  if (out.empty()) throw std::invalid_argument("no manifests in " + entry);
  return out;
}

std::string series_label(const std::string& mode) { return mode == "none" ? "independent" : mode; }

int cmd_curve(const CurveArgs& a) {
  const auto triples = load_triples(a.triples + ".src", a.triples + ".piv", a.triples + ".tgt");
  std::vector<tools::Series> series;
  std::string table = "mode\titeration\tcost\n";
  for (const auto& entry : a.manifests) {
    const auto manifests = expand_manifests(entry);
    const auto points = test_cost_curve(manifests, triples);
    const std::string label = series_label(load_manifest(manifests.front()).mode);
    tools::Series s{label, {}};
    for (const auto& p : points) {
      table += label + '\t' + std::to_string(p.iteration) + '\t' + format_double(p.cost) + '\n';
      s.points.emplace_back(static_cast<double>(p.iteration), p.cost);
    }
    series.push_back(std::move(s));
  }
  const fs::path out(a.out);
  write_file(out / "curve.tsv", table);
  write_file(out / "curve.svg", tools::render_line_chart(series, "iteration", "test cost"));
  std::cout << table;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate-bridge

struct AblateArgs {
  std::string config;
  std::string out;
  std::vector<std::size_t> sizes{0, 100, 1000};
};

int cmd_ablate(const AblateArgs& a) {
  const fs::path out(a.out);
  RunConfig rc = a.config.empty() ? RunConfig{} : run_config_from_json(read_file(a.config));
  validate(rc.train);
  fs::create_directories(out);
  write_file(out / "run_config.json", run_config_to_json(rc) + "\n");
  const TaskText text = read_task(under(out, rc.data_dir), rc.max_sentence_length);
  const EncodedTask task = encode_task(text, rc.vocab_size);
  if (!std::is_sorted(a.sizes.begin(), a.sizes.end())) throw std::invalid_argument("sizes must be ascending");
  for (std::size_t s : a.sizes)
    if (s > text.xy.size())
      throw std::invalid_argument("bridge size " + std::to_string(s) + " exceeds the bridge corpus of " +
                                  std::to_string(text.xy.size()) + " pairs");

  TrainConfig pre = rc.train;
  if (pre.pretrained) pre.pretrained = under(out, *pre.pretrained).string();
  pre.mode.kind = ConnectionKind::kNone;
  TrainState start = make_train_state(task.xz, task.zy, pre);
  if (!pre.pretrained) {
    pretrain_state(start, task.xz, task.zy, pre);
    save_train_state(out, start, pre, "pretrained");
  }
  BeamOptions options;
  options.beam = rc.beam;
  options.max_len = rc.decode_max_len;
  const auto rows = ablate_bridge(text, task, start, rc.train, a.sizes, options);

  std::string table = "bridge_size\tsource_to_pivot\tpivot_to_target\tsource_to_target\n";
  for (const auto& r : rows)
    table += std::to_string(r.bridge_size) + '\t' + format_double(r.scores.source_to_pivot) + '\t' +
             format_double(r.scores.pivot_to_target) + '\t' + format_double(r.scores.source_to_target) + '\n';
  write_file(out / "ablation.tsv", table);
  std::cout << table;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grad-check

int cmd_grad_check() {
  const auto rows = run_gradient_suite();
  bool all = true;
  std::printf("%-48s %-12s %10s %12s %8s %s\n", "check", "group", "tolerance", "error", "entries", "result");
  for (const auto& r : rows) {
    std::printf("%-48s %-12s %10.0e %12.3e %8zu %s\n", r.name.c_str(), r.group.c_str(), r.tolerance, r.error,
                r.entries, r.passed ? "PASS" : "FAIL");
    all = all && r.passed;
  }
  std::printf("%s\n", all ? "all gradient checks passed" : "gradient checks FAILED");
  return all ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pivot-based neural machine translation with joint training"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a seeded synthetic pivot task");
  gen_cmd->add_option("--spec", gen.spec, "Task spec JSON file (defaults when omitted)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Override the spec seed");
  gen_cmd->add_option("--bridge-size", gen.bridge_size, "Override the bridge corpus size");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a source-to-pivot and a pivot-to-target model");
  train_cmd->add_option("--config", train.config, "Run config JSON file");
  train_cmd->add_option("--out", train.out, "Output directory; relative paths resolve against it")->required();
  train_cmd->add_option("--mode", train.mode, "none | hard | soft | likelihood (default likelihood)");
  train_cmd->add_option("--lambda", train.lambda, "Connection weight (default 1.0)");
  train_cmd->add_option("--k", train.k, "Pivot candidates per bridge pair (default 10)");
  train_cmd->add_option("--clip", train.clip, "Gradient clipping threshold (default 0.1)");
  train_cmd->add_option("--lr", train.learning_rate, "SGD learning rate (default 0.1)");
  train_cmd->add_option("--iterations", train.iterations, "Total iterations");
  train_cmd->add_option("--eval-interval", train.eval_interval, "Iterations between metrics and checkpoints");
  train_cmd->add_option("--bridge-batch", train.bridge_batch, "Bridge pairs per iteration");
  train_cmd->add_option("--max-len", train.max_len, "Maximum pivot length searched by the likelihood connection");
  train_cmd->add_option("--batch", train.batch, "Pairs per iteration from each training corpus");
  train_cmd->add_option("--seed", train.seed, "Random seed");
  train_cmd->add_option("--data", train.data, "Data directory written by gen-data");
  train_cmd->add_option("--pretrained", train.pretrained, "Manifest of pretrained models");
  train_cmd->add_flag("--pretrain", train.pretrain, "Pretrain both models independently first");
  train_cmd->add_option("--resume", train.resume, "Manifest of a checkpoint to resume from");

  TranslateArgs tr;
  auto* tr_cmd = app.add_subcommand("translate", "Translate source sentences through the pivot");
  tr_cmd->add_option("--manifest", tr.manifest, "Checkpoint manifest")->required();
  tr_cmd->add_option("--input", tr.input, "Source sentences, one per line")->required();
  tr_cmd->add_option("--output", tr.output, "Tab-separated output file")->required();
  tr_cmd->add_option("--beam", tr.beam, "Beam width")->capture_default_str();
  tr_cmd->add_option("--max-len", tr.max_len, "Maximum output length")->capture_default_str();

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score hypotheses against references");
  ev_cmd->add_option("--hyp", ev.hyp, "Hypothesis file")->required();
  ev_cmd->add_option("--ref", ev.ref, "Reference file")->required();
  ev_cmd->add_option("--metric", ev.metric, "bleu | accuracy | all")
      ->check(CLI::IsMember({"bleu", "accuracy", "all"}))
      ->capture_default_str();
  ev_cmd->add_flag("--case-insensitive", ev.case_insensitive, "Fold case before counting");

  CurveArgs cv;
  auto* cv_cmd = app.add_subcommand("curve", "Test-cost curves of saved checkpoints");
  cv_cmd->add_option("--manifests", cv.manifests, "Manifest files or checkpoint directories, one series each")
      ->required();
  cv_cmd->add_option("--triples", cv.triples, "Triple file prefix (.src/.piv/.tgt)")->required();
  cv_cmd->add_option("--out", cv.out, "Output directory for curve.tsv and curve.svg")->required();

  AblateArgs ab;
  auto* ab_cmd = app.add_subcommand("ablate-bridge", "Train with bridge corpora of increasing size");
  ab_cmd->add_option("--config", ab.config, "Run config JSON file");
  ab_cmd->add_option("--out", ab.out, "Output directory")->required();
  ab_cmd->add_option("--sizes", ab.sizes, "Ascending bridge sizes")->delimiter(',')->capture_default_str();

  app.add_subcommand("grad-check", "Run the gradient-check suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (train_cmd->parsed()) return cmd_train(train);
    if (tr_cmd->parsed()) return cmd_translate(tr);
    if (ev_cmd->parsed()) return cmd_eval(ev);
    if (cv_cmd->parsed()) return cmd_curve(cv);
    if (ab_cmd->parsed()) return cmd_ablate(ab);
    return cmd_grad_check();
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
