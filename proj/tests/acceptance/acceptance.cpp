// End-to-end acceptance checks. Each criterion prints one PASS or FAIL line
// followed by indented detail lines. Pass criterion numbers as arguments to
// run a subset; criterion 8 runs criterion 6 first if needed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pivotnmt/checkpoint.hpp"
#include "pivotnmt/connection.hpp"
#include "pivotnmt/corpus.hpp"
#include "pivotnmt/eval.hpp"
#include "pivotnmt/experiment.hpp"
#include "pivotnmt/grad_suite.hpp"
#include "pivotnmt/trainer.hpp"

using namespace pivotnmt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename... Args>
std::string fmt(const char* pattern, Args... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

struct Outcome {
  bool passed = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    details.push_back(std::string(ok ? "ok   " : "fail ") + what);
    passed = passed && ok;
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vocabulary make_vocab(std::size_t words, const std::string& prefix) {
  std::vector<std::string> list;
  for (std::size_t i = 0; i < words; ++i) list.push_back(prefix + std::to_string(i));
  return Vocabulary(list);
}

bool bitwise_equal(const ParameterSet& a, const ParameterSet& b) {
  const auto pa = a.raw(), pb = b.raw();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value.shape() != pb[i]->value.shape()) return false;
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j)
      if (pa[i]->value[j] != pb[i]->value[j]) return false;
  }
  return true;
}

double max_abs_difference(const ParameterSet& a, const ParameterSet& b) {
  const auto pa = a.raw(), pb = b.raw();
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j)
      worst = std::max(worst, std::abs(pa[i]->value[j] - pb[i]->value[j]));
  return worst;
}

const fs::path kWork = fs::temp_directory_path() / "pivotnmt_acceptance";

// ---------------------------------------------------------------------------
// Shared synthetic setup for the training criteria.

struct Protocol {
  std::size_t dim = 16;
  double learning_rate = 1.0;
  double clip = 1.0;
  std::size_t batch = 4;
  std::size_t pretrain_iterations = 16000;  // cap; the plateau rule may stop earlier
  std::size_t pretrain_eval_interval = 500;
  std::size_t joint_iterations = 2000;
  std::size_t eval_interval = 250;
  std::size_t k = 4;
  std::size_t bridge_batch = 4;
  std::size_t pivot_max_len = 20;
  std::size_t beam = 4;
  std::uint64_t fine_tune_seed_offset = 100;  // fine-tuning draws batches apart from pretraining
};

const Protocol kProtocol;

SynthTaskSpec task_spec(std::uint64_t seed, std::size_t bridge_size) {
  SynthTaskSpec spec;  // composition of substitution and window reordering
  spec.seed = seed;
  spec.source_vocab = spec.pivot_vocab = spec.target_vocab = 20;
  spec.min_len = 3;
  spec.max_len = 8;
  spec.xz_size = spec.zy_size = 2000;
  spec.bridge_size = bridge_size;
  spec.dev_size = spec.test_size = 200;
  return spec;
}

TrainConfig protocol_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.embed = c.hidden = kProtocol.dim;
  c.learning_rate = kProtocol.learning_rate;
  c.clip = kProtocol.clip;
  c.batch_xz = c.batch_zy = kProtocol.batch;
  c.lambda = 1.0;
  c.mode.k = kProtocol.k;
  c.mode.bridge_batch = kProtocol.bridge_batch;
  c.mode.max_len = kProtocol.pivot_max_len;
  c.max_iterations = kProtocol.joint_iterations;
  c.eval_interval = kProtocol.eval_interval;
  c.pretrain_max_iterations = kProtocol.pretrain_iterations;
  return c;
}

BeamOptions protocol_beam() {
  BeamOptions o;
  o.beam = kProtocol.beam;
  o.max_len = kProtocol.pivot_max_len;
  return o;
}

struct Pretrained {
  TrainState state;
  std::size_t xz_iterations = 0;
  std::size_t zy_iterations = 0;

  std::string describe() const {
    return fmt("pretraining ran %zu and %zu iterations", xz_iterations, zy_iterations);
  }
};

// Both models trained separately from their seeded initialization until the
// loss plateaus or the iteration cap is reached.
Pretrained pretrained_state(const EncodedTask& task, const TrainConfig& config) {
  TrainConfig c = config;
  c.mode.kind = ConnectionKind::kNone;
  c.eval_interval = kProtocol.pretrain_eval_interval;
  Pretrained p{make_train_state(task.xz, task.zy, c)};
  auto xz = train_independent(task.xz, c, Stream::kXz, &p.state.xz, true);
  auto zy = train_independent(task.zy, c, Stream::kZy, &p.state.zy, true);
  p.state.xz = std::move(xz.params);
  p.state.zy = std::move(zy.params);
  p.xz_iterations = xz.iterations;
  p.zy_iterations = zy.iterations;
  return p;
}

TrainConfig fine_tune_config(const TrainConfig& config) {
  TrainConfig c = config;
  c.seed = config.seed + kProtocol.fine_tune_seed_offset;
  return c;
}

TrainState fine_tune_start(const TrainState& pretrained, const TrainConfig& config) {
  TrainState s;
  auto [xz, zy] = clone_pair(pretrained.xz, pretrained.zy);
  s.xz = std::move(xz);
  s.zy = std::move(zy);
  s.shared = pretrained.shared;
  s.rng_xz.seed(derive_seed(config.seed, Stream::kXz));
  s.rng_zy.seed(derive_seed(config.seed, Stream::kZy));
  s.rng_xy.seed(derive_seed(config.seed, Stream::kXy));
  return s;
}

// ---------------------------------------------------------------------------

Outcome criterion_gradients() {
  Outcome out;
  const auto start = Clock::now();
  const auto rows = run_gradient_suite();
  std::map<std::string, double> worst;
  std::map<std::string, double> tolerance;
  std::size_t failed = 0;
  for (const auto& r : rows) {
    worst[r.group] = std::max(worst[r.group], r.error);
    tolerance[r.group] = r.tolerance;
    if (!r.passed) {
      ++failed;
      out.note(fmt("%s: relative error %.3g above %.1g", r.name.c_str(), r.error, r.tolerance));
    }
  }
  for (const auto& [group, err] : worst)
    out.check(err < tolerance[group], fmt("%s: worst relative error %.3g < %.0e", group.c_str(), err, tolerance[group]));
  out.check(failed == 0, fmt("%zu of %zu gradient checks passed", rows.size() - failed, rows.size()));
  const double t = seconds_since(start);
  out.check(t < 120.0, fmt("runtime %.1f s < 120 s", t));
  return out;
}

Outcome criterion_oracle() {
  Outcome out;
  const auto start = Clock::now();
  const Vocabulary xv = make_vocab(3, "x"), zv = make_vocab(4, "z"), yv = make_vocab(3, "y");
  const std::size_t max_len = 3;
  const std::size_t space = enumeration_size(zv.size() - Vocabulary::kReserved + 1, max_len);
  out.note(fmt("pivot vocabulary of 4 words, max length %zu, %zu decodable pivots", max_len, space));
  std::mt19937_64 rng(17);
  double worst_gap = 0.0;
  bool monotone = true, bounded = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ParameterSet xz = init_params(xv, zv, 3, 4, seed);
    ParameterSet zy = init_params(zv, yv, 3, 4, seed + 100);
    // Sharper distributions make the top-k ordering matter.
    for (ParameterSet* p : {&xz, &zy})
      for (Parameter* q : p->raw())
        for (double& v : q->value.values()) v *= 6.0;
    auto word = [&](const Vocabulary& v) {
      return static_cast<TokenId>(Vocabulary::kReserved + rng() % (v.size() - Vocabulary::kReserved));
    };
    const std::vector<SentencePair> batch{{{word(xv), word(xv), Vocabulary::kEos}, {word(yv), Vocabulary::kEos}}};
    const double oracle = exact_marginal(xz, zy, batch[0].left, batch[0].right, max_len);
    const double full = likelihood_connection(xz, zy, batch, {space, space, max_len}).value;
    worst_gap = std::max(worst_gap, std::abs(full - oracle));
    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t k : {1u, 2u, 4u}) {
      const double v = likelihood_connection(xz, zy, batch, {k, space, max_len}).value;
      monotone = monotone && v >= previous;
      bounded = bounded && v <= oracle;
      previous = v;
    }
  }
  out.check(worst_gap < 1e-10, fmt("full top-k list vs exhaustive marginal: max gap %.3g < 1e-10 over 10 models", worst_gap));
  out.check(monotone, "k = 1, 2, 4 partial sums are non-decreasing");
  out.check(bounded, "every partial sum is at most the exhaustive marginal");
  const double t = seconds_since(start);
  out.check(t < 60.0, fmt("runtime %.1f s < 60 s", t));
  return out;
}

struct SmallRun {
  EncodedTask task;
  TrainConfig config;
};

// The synthetic task at the standard sizes, used by the short invariant runs.
SmallRun small_run(std::uint64_t seed) {
  const SynthData data = generate_synth(task_spec(seed, 200));
  SmallRun r{encode_task(task_text(data), 1000), protocol_config(seed)};
  r.config.learning_rate = 0.5;
  return r;
}

Outcome criterion_hard_tie() {
  Outcome out;
  SmallRun r = small_run(11);
  r.config.max_iterations = 1000;
  r.config.eval_interval = 1000;

  r.config.mode.kind = ConnectionKind::kHard;
  TrainState tied = make_train_state(r.task.xz, r.task.zy, r.config);
  train_joint(tied, r.task.xz, r.task.zy, nullptr, r.config);
  bool identical = true;
  for (const auto& e : tied.shared.entries) {
    const auto& a = tied.xz.target_embed.row(e.xz_id).value;
    const auto& b = tied.zy.source_embed.row(e.zy_id).value;
    for (std::size_t i = 0; i < a.size(); ++i) identical = identical && a[i] == b[i];
  }
  out.note(fmt("%zu shared pivot words, %zu iterations", tied.shared.size(), tied.iteration));
  out.check(evaluate_hard(tied.xz, tied.zy, tied.shared), "hard mode: evaluate_hard = 1");
  out.check(identical, "hard mode: every tied row pair is bitwise identical");

  r.config.mode.kind = ConnectionKind::kNone;
  TrainState untied = make_train_state(r.task.xz, r.task.zy, r.config);
  train_joint(untied, r.task.xz, r.task.zy, nullptr, r.config);
  out.check(!evaluate_hard(untied.xz, untied.zy, untied.shared), "control without tying: evaluate_hard = 0");
  return out;
}

double mean_shared_distance(const TrainState& s) {
  double total = 0.0;
  for (const auto& e : s.shared.entries) {
    const auto& a = s.xz.target_embed.row(e.xz_id).value;
    const auto& b = s.zy.source_embed.row(e.zy_id).value;
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(s.shared.size());
}

bool rows_coincide(const TrainState& s) {
  for (const auto& e : s.shared.entries) {
    const auto a = s.xz.target_embed.row(e.xz_id).value.values();
    const auto b = s.zy.source_embed.row(e.zy_id).value.values();
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) return false;
  }
  return true;
}

Outcome criterion_soft() {
  Outcome out;
  SmallRun r = small_run(12);
  r.config.mode.kind = ConnectionKind::kSoft;
  r.config.lambda = 100.0;
  r.config.likelihood_terms = false;
  r.config.learning_rate = 0.01;
  r.config.clip = 0.1;
  TrainState s = make_train_state(r.task.xz, r.task.zy, r.config);
  const double initial = mean_shared_distance(s);
  bool nonpositive = true, zero_iff_coincide = true;
  std::size_t reached_at = 0;
  double last = initial;
  for (std::size_t step = 1; step <= 1000; ++step) {
    r.config.max_iterations = step;
    joint_step(s, r.task.xz, r.task.zy, nullptr, r.config);
    const double value = soft_penalty(s.xz, s.zy, s.shared).value;
    nonpositive = nonpositive && value <= 0.0;
    zero_iff_coincide = zero_iff_coincide && ((value == 0.0) == rows_coincide(s));
    last = mean_shared_distance(s);
    if (last < 1e-3 && reached_at == 0) reached_at = step;
  }
  out.note(fmt("%zu shared words, mean row distance %.4g at start, %.3g after 1000 steps", s.shared.size(), initial,
               last));
  out.check(reached_at > 0, reached_at > 0 ? fmt("mean shared-row distance below 1e-3 at step %zu", reached_at)
                                           : std::string("mean shared-row distance never fell below 1e-3"));
  out.check(nonpositive, "soft_penalty <= 0 after every step");
  out.check(zero_iff_coincide, "soft_penalty = 0 exactly when all shared rows coincide");

  // Coincidence by construction, then a single perturbed coordinate.
  TrainState c = make_train_state(r.task.xz, r.task.zy, r.config);
  for (const auto& e : c.shared.entries) c.zy.source_embed.rows[e.zy_id]->value = c.xz.target_embed.row(e.xz_id).value;
  const double at_coincidence = soft_penalty(c.xz, c.zy, c.shared).value;
  c.zy.source_embed.rows[c.shared.entries.front().zy_id]->value[0] += 1e-9;
  const double perturbed = soft_penalty(c.xz, c.zy, c.shared).value;
  out.check(at_coincidence == 0.0 && perturbed < 0.0, fmt("copied rows give 0, one perturbed coordinate gives %.3g", perturbed));
  return out;
}

Outcome criterion_decoupling() {
  Outcome out;
  SmallRun r = small_run(13);
  r.config.mode.kind = ConnectionKind::kNone;
  r.config.max_iterations = 300;
  r.config.eval_interval = 100;
  TrainState joint = make_train_state(r.task.xz, r.task.zy, r.config);
  train_joint(joint, r.task.xz, r.task.zy, nullptr, r.config);
  const auto xz = train_independent(r.task.xz, r.config, Stream::kXz);
  const auto zy = train_independent(r.task.zy, r.config, Stream::kZy);
  const double dx = max_abs_difference(joint.xz, xz.params);
  const double dy = max_abs_difference(joint.zy, zy.params);
  out.note(fmt("%zu iterations, bitwise identical: %s", r.config.max_iterations,
               bitwise_equal(joint.xz, xz.params) && bitwise_equal(joint.zy, zy.params) ? "yes" : "no"));
  out.check(dx <= 1e-9, fmt("source-to-pivot max parameter difference %.3g <= 1e-9", dx));
  out.check(dy <= 1e-9, fmt("pivot-to-target max parameter difference %.3g <= 1e-9", dy));
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 6 and the checkpoints criterion 8 reads.

struct SeedRun {
  std::uint64_t seed = 0;
  double pretrained_bleu = 0.0;
  double independent_bleu = 0.0;
  double joint_bleu = 0.0;
  fs::path independent_dir;
  fs::path joint_dir;
  fs::path test_prefix;
};

std::vector<SeedRun> g_gain_runs;
bool g_gain_done = false;

Outcome criterion_gain() {
  Outcome out;
  const auto start = Clock::now();
  const BeamOptions beam = protocol_beam();
  g_gain_runs.clear();
  std::size_t wins = 0;
  std::vector<double> improvements;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SynthData data = generate_synth(task_spec(seed, 200));
    const TaskText text = task_text(data);
    const EncodedTask task = encode_task(text, 1000);
    const TrainConfig base = protocol_config(seed);
    const Pretrained pretrained = pretrained_state(task, base);
    const TrainState& pre = pretrained.state;

    SeedRun run;
    run.seed = seed;
    const fs::path dir = kWork / "gain" / ("seed" + std::to_string(seed));
    fs::remove_all(dir);
    run.test_prefix = dir / "data" / "test";
    write_task(dir / "data", data, task_spec(seed, 200));
    run.pretrained_bleu = evaluate_pivoted(pre.xz, pre.zy, text.test, beam).target_bleu.score;

    for (ConnectionKind kind : {ConnectionKind::kNone, ConnectionKind::kLikelihood}) {
      TrainConfig c = fine_tune_config(base);
      c.mode.kind = kind;
      TrainState s = fine_tune_start(pre, c);
      TrainHooks hooks;
      const fs::path arm = dir / to_string(kind);
      hooks.checkpoint_dir = arm;
      train_joint(s, task.xz, task.zy, kind == ConnectionKind::kNone ? nullptr : &task.xy, c, hooks);
      const double score = evaluate_pivoted(s.xz, s.zy, text.test, beam).target_bleu.score;
      if (kind == ConnectionKind::kNone) {
        run.independent_bleu = score;
        run.independent_dir = arm;
      } else {
        run.joint_bleu = score;
        run.joint_dir = arm;
      }
    }
    wins += run.joint_bleu >= run.independent_bleu;
    improvements.push_back(run.joint_bleu - run.independent_bleu);
    out.note(fmt("seed %llu: pretrained %.2f, independent %.2f, joint %.2f BLEU; %s (%.0f s elapsed)",
                 static_cast<unsigned long long>(seed), run.pretrained_bleu, run.independent_bleu, run.joint_bleu,
                 pretrained.describe().c_str(), seconds_since(start)));
    g_gain_runs.push_back(run);
  }
  g_gain_done = true;
  out.check(wins >= 4, fmt("joint >= independent in %zu of 5 seeds (need 4)", wins));
  const double med = median(improvements);
  out.check(med > 0.0, fmt("median improvement %.2f BLEU > 0", med));
  const double t = seconds_since(start);
  out.check(t < 900.0, fmt("runtime %.0f s < 900 s", t));
  return out;
}

Outcome criterion_bridge_size() {
  Outcome out;
  const auto start = Clock::now();
  const std::vector<std::size_t> sizes{0, 100, 1000};
  std::vector<std::vector<double>> scores(sizes.size());
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const SynthData data = generate_synth(task_spec(seed, 1000));
    const TaskText text = task_text(data);
    const EncodedTask task = encode_task(text, 1000);
    TrainConfig c = protocol_config(seed);
    c.mode.kind = ConnectionKind::kLikelihood;
    const Pretrained pre = pretrained_state(task, c);
    const auto rows = ablate_bridge(text, task, pre.state, fine_tune_config(c), sizes, protocol_beam());
    std::string line = fmt("seed %llu:", static_cast<unsigned long long>(seed));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      scores[i].push_back(rows[i].scores.source_to_target);
      line += fmt(" size %zu %.2f", rows[i].bridge_size, rows[i].scores.source_to_target);
    }
    out.note(line + fmt(" BLEU; %s (%.0f s elapsed)", pre.describe().c_str(), seconds_since(start)));
  }
  std::vector<double> medians;
  for (const auto& s : scores) medians.push_back(median(s));
  out.note(fmt("median BLEU by size: 0 -> %.2f, 100 -> %.2f, 1000 -> %.2f", medians[0], medians[1], medians[2]));
  out.check(medians[0] <= medians[1] && medians[1] <= medians[2], "median BLEU is non-decreasing in bridge size");
  out.check(medians[1] > medians[0], "size 100 is above size 0");
  const double t = seconds_since(start);
  out.check(t < 1800.0, fmt("runtime %.0f s < 1800 s", t));
  return out;
}

// Runs the command-line curve tool and reads back its table.
std::vector<std::pair<std::string, double>> run_curve_tool(const SeedRun& run, const fs::path& out_dir) {
  const std::string cmd = std::string(PIVOTNMT_CLI) + " curve --manifests " + run.independent_dir.string() + " " +
                          run.joint_dir.string() + " --triples " + run.test_prefix.string() + " --out " +
                          out_dir.string() + " > /dev/null";
  if (std::system(cmd.c_str()) != 0) throw std::runtime_error("curve tool failed: " + cmd);
  std::ifstream in(out_dir / "curve.tsv");
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<std::string, double>> rows;
  while (std::getline(in, line)) {
    std::istringstream cols(line);
    std::string mode, iteration, cost;
    std::getline(cols, mode, '\t');
    std::getline(cols, iteration, '\t');
    std::getline(cols, cost, '\t');
    rows.emplace_back(mode + "@" + iteration, std::strtod(cost.c_str(), nullptr));
  }
  return rows;
}

// Mean -log P(target | source) of one model over gold pairs, summed in file order.
double model_cost(const ParameterSet& p, const std::vector<Tokens>& sources, const std::vector<Tokens>& targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < sources.size(); ++i)
    total -= sentence_log_prob(p, p.source_vocab->encode(sources[i]), p.target_vocab->encode(targets[i]));
  return total / static_cast<double>(sources.size());
}

std::vector<fs::path> manifests_in(const fs::path& dir) {
  std::vector<std::pair<std::size_t, fs::path>> found;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().string().ends_with(".manifest.json")) found.emplace_back(load_manifest(e.path()).iteration, e.path());
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& f : found) out.push_back(f.second);
  return out;
}

Outcome criterion_cost_curve() {
  Outcome out;
  if (!g_gain_done) criterion_gain();
  std::vector<double> gaps;
  std::size_t lower = 0, points = 0, exact = 0;
  for (const SeedRun& run : g_gain_runs) {
    const auto rows = run_curve_tool(run, kWork / "curve" / ("seed" + std::to_string(run.seed)));
    const auto src = read_text_lines(run.test_prefix.string() + ".src");
    const auto piv = read_text_lines(run.test_prefix.string() + ".piv");
    const auto tgt = read_text_lines(run.test_prefix.string() + ".tgt");

    // Every tabulated value against the two model costs computed here.
    std::map<std::string, double> independent_sum;
    for (const auto& [dir, label] : {std::pair{run.independent_dir, std::string("independent")},
                                     std::pair{run.joint_dir, std::string("likelihood")}}) {
      for (const fs::path& m : manifests_in(dir)) {
        const PivotModels models = load_pivot_models(m);
        const double sum = model_cost(models.source_to_pivot, src, piv) + model_cost(models.pivot_to_target, piv, tgt);
        independent_sum[label + "@" + std::to_string(load_manifest(m).iteration)] = sum;
      }
    }
    std::map<std::string, double> final_cost;
    std::size_t final_iter = 0;
    for (const auto& [key, cost] : rows) {
      ++points;
      const auto it = independent_sum.find(key);
      exact += it != independent_sum.end() && it->second == cost;
      final_iter = std::max<std::size_t>(final_iter, std::stoul(key.substr(key.find('@') + 1)));
    }
    const std::string at = "@" + std::to_string(final_iter);
    for (const auto& [key, cost] : rows)
      if (key.ends_with(at)) final_cost[key.substr(0, key.find('@'))] = cost;
    const double gap = final_cost["independent"] - final_cost["likelihood"];
    gaps.push_back(gap);
    lower += gap > 0.0;
    out.note(fmt("seed %llu at iteration %zu: independent %.4f, likelihood %.4f nats", static_cast<unsigned long long>(run.seed),
                 final_iter, final_cost["independent"], final_cost["likelihood"]));
  }
  out.check(exact == points && points > 0,
            fmt("%zu of %zu curve values equal the sum of separately computed model costs exactly", exact, points));
  out.check(median(gaps) > 0.0,
            fmt("likelihood cost below independent at the final checkpoint: median gap %.4f, lower in %zu of %zu seeds",
                median(gaps), lower, gaps.size()));
  return out;
}

Outcome criterion_bleu() {
  Outcome out;
  auto toks = [](const std::string& s) { return split_whitespace(s); };
  const std::vector<Tokens> corpus{toks("a b c d e f"), toks("the quick brown fox"), toks("x y z w v")};
  const double identity = bleu(corpus, corpus).score;
  out.check(identity == 100.0, fmt("identity corpus scores %.4f", identity));

  // Clipped matches per order 9/10, 5/8, 3/6, 1/4 with hypothesis length 10
  // and reference length 11.
  const std::vector<Tokens> hyp{toks("the cat sat on the mat"), toks("a dog runs fast")};
  const std::vector<Tokens> ref{toks("the cat sat on a mat"), toks("a dog runs very fast")};
  const double hand = 100.0 * std::exp(1.0 - 11.0 / 10.0) * std::pow(0.9 * 0.625 * 0.5 * 0.25, 0.25);
  const double got = bleu(hyp, ref).score;
  out.check(std::abs(got - hand) < 5e-5, fmt("two-sentence case %.4f matches the hand value %.4f", got, hand));

  const BleuReport short_hyp = bleu(std::vector<Tokens>{toks("the cat")}, std::vector<Tokens>{toks("the cat sat")});
  out.check(short_hyp.score == 0.0 && std::abs(short_hyp.brevity_penalty - std::exp(-0.5)) < 5e-5,
            fmt("\"the cat\" against \"the cat sat\": score %.4f, brevity penalty %.4f", short_hyp.score,
                short_hyp.brevity_penalty));

  const std::vector<Tokens> upper{toks("The CAT sat On the MAT"), toks("A Dog runs FAST")};
  const std::vector<Tokens> lower{toks("the cat sat on the mat"), toks("a dog runs fast")};
  const double folded = bleu(upper, lower, true).score;
  const double strict = bleu(upper, lower, false).score;
  out.check(folded == 100.0 && strict < 100.0,
            fmt("case-insensitive %.4f, case-sensitive %.4f on case-changed copies", folded, strict));
  return out;
}

Outcome criterion_overlap() {
  Outcome out;
  std::mt19937_64 rng(99);
  std::size_t disjoint = 0, conserved = 0, total_pairs = 0, dropped = 0;
  const std::size_t trials = 1000;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t pool = 1 + rng() % 20;
    auto pivot = [&] { return split_whitespace("p" + std::to_string(rng() % pool) + (rng() % 3 ? "" : " q")); };
    std::vector<TextPair> xz, zy;
    const std::size_t nx = rng() % 30, ny = rng() % 30;
    for (std::size_t i = 0; i < nx; ++i) xz.push_back({split_whitespace("s" + std::to_string(rng() % 50)), pivot()});
    for (std::size_t i = 0; i < ny; ++i) zy.push_back({pivot(), split_whitespace("t" + std::to_string(rng() % 50))});

    const OverlapSplit s = split_overlap(xz, zy);
    std::set<Tokens> left_pivots, right_pivots;
    for (const auto& p : s.xz) left_pivots.insert(p.right);
    for (const auto& p : s.zy) right_pivots.insert(p.left);
    bool empty_intersection = true;
    for (const auto& p : left_pivots) empty_intersection = empty_intersection && !right_pivots.count(p);
    disjoint += empty_intersection;

    auto bag = [](std::vector<TextPair> a, const std::vector<TextPair>& b) {
      a.insert(a.end(), b.begin(), b.end());
      std::sort(a.begin(), a.end());
      return a;
    };
    auto sorted = [](std::vector<TextPair> a) {
      std::sort(a.begin(), a.end());
      return a;
    };
    conserved += bag(s.xz, s.dropped_xz) == sorted(xz) && bag(s.zy, s.dropped_zy) == sorted(zy);
    total_pairs += nx + ny;
    dropped += s.dropped_xz.size() + s.dropped_zy.size();
  }
  out.note(fmt("%zu pairs across all trials, %zu moved to the dropped lists", total_pairs, dropped));
  out.check(disjoint == trials, fmt("pivot sides disjoint after splitting in %zu of %zu trials", disjoint, trials));
  out.check(conserved == trials,
            fmt("kept plus dropped pairs equal the input multiset in %zu of %zu trials", conserved, trials));
  return out;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient fidelity", criterion_gradients},
      {2, "likelihood connection equals the exhaustive marginal", criterion_oracle},
      {3, "hard tying invariant", criterion_hard_tie},
      {4, "soft penalty dynamics", criterion_soft},
      {5, "decoupling identity", criterion_decoupling},
      {6, "joint training gain over independent training", criterion_gain},
      {7, "bridge corpus size trend", criterion_bridge_size},
      {8, "test cost curve decomposition", criterion_cost_curve},
      {9, "BLEU correctness", criterion_bleu},
      {10, "corpus overlap splitting", criterion_overlap},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  fs::create_directories(kWork);
  int failures = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %d: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", c.id, c.title, seconds_since(start));
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    failures += !o.passed;
  }
  return failures == 0 ? 0 : 1;
}
