// armr: command-line driver for data generation, training, evaluation,
// ablations, dataset statistics and gradient checking.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "armr/checkpoint.hpp"
#include "armr/generator.hpp"
#include "armr/gradcheck.hpp"
#include "armr/metrics.hpp"
#include "armr/model.hpp"
#include "armr/records.hpp"
#include "armr/rng.hpp"
#include "armr/stats.hpp"
#include "armr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// Raised for bad flag combinations or config contents.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Shared {
  std::string data;
  std::string vocab;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

struct ModelFlags {
  int dim = 64;
  int split_n = 2;
  int state_size = 16;
  double alpha_loss = 0.7;
  double delta = 0.5;
  std::string variant = "full";
};

struct TrainFlags {
  int epochs = 10;
  double lr = 1e-3;
  int workers = 1;
  std::string aggregation = "patient-mean";
  std::vector<double> split{0.8, 0.1, 0.1};
};

void add_shared(CLI::App* cmd, Shared& s, bool data_required) {
  auto* d = cmd->add_option("--data", s.data, "dataset (JSON Lines, one patient per line)");
  auto* v = cmd->add_option("--vocab", s.vocab, "vocabulary sidecar JSON");
  if (data_required) {
    d->check(CLI::ExistingFile);
    v->check(CLI::ExistingFile);
  }
  cmd->add_option("--seed", s.seed, "master seed");
  cmd->add_option("--out", s.out, "output directory");
  cmd->add_option("--config", s.config, "JSON file of flag values (command-line flags win)")
      ->check(CLI::ExistingFile);
}

void add_model(CLI::App* cmd, ModelFlags& m, bool with_variant) {
  cmd->add_option("--dim", m.dim, "embedding width")->check(CLI::PositiveNumber);
  cmd->add_option("--split-n", m.split_n, "number of near visits")->check(CLI::PositiveNumber);
  cmd->add_option("--state-size", m.state_size, "SSM state size")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha-loss", m.alpha_loss, "weight of BCE against the hinge loss")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--delta", m.delta, "recommendation threshold")->check(CLI::Range(0.0, 1.0));
  if (with_variant)
    cmd->add_option("--variant", m.variant, "full, no-ptl, no-ptl-l, no-ptl-n or no-arm")
        ->check(CLI::IsMember({"full", "no-ptl", "no-ptl-l", "no-ptl-n", "no-arm"}));
}

void add_train(CLI::App* cmd, TrainFlags& t) {
  cmd->add_option("--epochs", t.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", t.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--workers", t.workers, "evaluation threads")->check(CLI::PositiveNumber);
  cmd->add_option("--aggregation", t.aggregation, "patient-mean or visit-mean")
      ->check(CLI::IsMember({"patient-mean", "visit-mean"}));
  cmd->add_option("--split", t.split, "train/validation/test ratios")->expected(3)->delimiter(',');
}

json scalar_from_text(const std::string& text) {
  json parsed = json::parse(text, nullptr, false);
  if (!parsed.is_discarded() && (parsed.is_number() || parsed.is_boolean())) return parsed;
  return text;
}

std::string text_from_json(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

// Values from --config fill every option the command line left unset.
void apply_config(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  json cfg = json::parse(in, nullptr, false);
  if (cfg.is_discarded() || !cfg.is_object())
    throw UsageError("config " + path + " is not a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (!opt) throw UsageError("config " + path + ": unknown option '" + key + "'");
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(text_from_json(v));
    } else {
      opt->add_result(text_from_json(value));
    }
    opt->run_callback();
  }
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(armr::fnv1a(ss.str())));
  return buf;
}

// Every resolved option value of the command, plus input fingerprints.
json manifest(CLI::App* cmd, const std::vector<std::string>& inputs) {
  json config = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "out") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (r.size() == 1) {
        config[name] = scalar_from_text(r[0]);
      } else {
        json arr = json::array();
        for (const auto& s : r) arr.push_back(scalar_from_text(s));
        config[name] = arr;
      }
    } else {
      config[name] = scalar_from_text(opt->get_default_str());
    }
  }
  json hashes = json::object();
  for (const auto& p : inputs)
    if (!p.empty()) hashes[fs::path(p).filename().string()] = "fnv1a64:" + hash_file(p);
  return {{"command", cmd->get_name()}, {"config", config}, {"inputs", hashes}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path ensure_out(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

armr::ModelConfig model_config(const ModelFlags& m, const armr::Vocab& vocab) {
  armr::ModelConfig c;
  c.vocab = vocab;
  c.dim = m.dim;
  c.split_n = m.split_n;
  c.state_size = m.state_size;
  c.alpha_loss = m.alpha_loss;
  c.delta = m.delta;
  c.variant = armr::parse_variant(m.variant);
  c.validate();
  return c;
}

std::array<double, 3> split_ratios(const TrainFlags& t) {
  if (t.split.size() != 3) throw UsageError("--split takes three ratios");
  return {t.split[0], t.split[1], t.split[2]};
}

std::vector<armr::PatientRecord> load_records(const Shared& s, const armr::Vocab& vocab) {
  if (s.data.empty()) throw UsageError("--data is required");
  auto report = armr::load_dataset(s.data, vocab);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  return std::move(report.records);
}

armr::Vocab load_vocab_flag(const Shared& s) {
  if (s.vocab.empty()) throw UsageError("--vocab is required");
  return armr::load_vocab(s.vocab);
}

void print_metrics_header() {
  std::printf("%-12s %9s %9s %9s\n", "Model", "Jaccard", "PRAUC", "F1");
}

void print_metrics_row(const std::string& name, const armr::EvalReport& r) {
  std::printf("%-12s %9.4f %9.4f %9.4f\n", name.c_str(), r.jaccard, r.prauc, r.f1);
}

// ---- generate --------------------------------------------------------------

struct GenerateFlags {
  armr::GeneratorConfig cfg;
};

int run_generate(CLI::App* cmd, const Shared& s, GenerateFlags& g) {
  g.cfg.seed = s.seed;
  g.cfg.validate();
  const fs::path out = ensure_out(s.out);
  const auto records = armr::generate_cohort(g.cfg);
  armr::save_dataset(out / "cohort.jsonl", records);
  armr::save_vocab(out / "vocab.json", g.cfg.vocab);
  write_json(out / "manifest.json", manifest(cmd, {}));

  const auto sum = armr::summarize(records);
  std::printf("%-34s %10lld\n", "# of patients", static_cast<long long>(sum.patients));
  std::printf("%-34s %10.2f\n", "avg. # of visit per patient", sum.avg_visits);
  std::printf("%-34s %10d\n", "max # of visit per patient", sum.max_visits);
  std::printf("%-34s %10d\n", "# of diagnosis codes", sum.distinct_diagnoses);
  std::printf("%-34s %10d\n", "# of procedure codes", sum.distinct_procedures);
  std::printf("%-34s %10d\n", "# of medication codes", sum.distinct_medications);
  std::printf("%-34s %10.2f\n", "avg. # of diagnoses per visit", sum.avg_diagnoses);
  std::printf("%-34s %10.2f\n", "avg. # of procedures per visit", sum.avg_procedures);
  std::printf("%-34s %10.2f\n", "avg. # of medications per visit", sum.avg_medications);
  std::printf("wrote %s\n", (out / "cohort.jsonl").string().c_str());
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainOnly {
  std::string resume;
};

void write_log_line(std::ofstream& log, const armr::EpochLog& e) {
  log << e.to_json().dump() << '\n';
  log.flush();
  std::printf("epoch %3d %-10s loss %10.4f  jaccard %.4f  prauc %.4f  f1 %.4f\n", e.epoch,
              e.split.c_str(), e.loss, e.jaccard, e.prauc, e.f1);
  std::fflush(stdout);
}

int run_train(CLI::App* cmd, const Shared& s, const ModelFlags& m, const TrainFlags& t,
              const TrainOnly& only) {
  const armr::Vocab vocab = load_vocab_flag(s);
  const auto records = load_records(s, vocab);
  const auto split = armr::split_dataset(records, split_ratios(t), s.seed);
  const fs::path out = ensure_out(s.out);

  armr::ModelConfig mc = model_config(m, vocab);
  armr::TrainConfig tc;
  tc.epochs = t.epochs;
  tc.lr = t.lr;
  tc.seed = s.seed;
  tc.workers = t.workers;
  tc.aggregation = armr::parse_aggregation(t.aggregation);

  std::optional<armr::Checkpoint> resume;
  if (!only.resume.empty()) {
    resume = armr::load_checkpoint(only.resume);
    mc = armr::ModelConfig::from_json(resume->meta.at("model"));
    if (!(mc.vocab == vocab)) throw UsageError("checkpoint vocabulary differs from --vocab");
  }
  armr::Model model(mc, s.seed);
  armr::Trainer trainer(model, tc);
  if (resume) trainer.restore(*resume);

  json man = manifest(cmd, {s.data, s.vocab});
  man["split_sizes"] = {split.train.size(), split.validation.size(), split.test.size()};
  man["parameters"] = model.params().scalar_count();
  write_json(out / "manifest.json", man);

  std::ofstream log(out / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  const auto start = std::chrono::steady_clock::now();
  armr::TrainResult result = trainer.run(split.train, split.validation,
                                         [&](const armr::EpochLog& e) { write_log_line(log, e); });

  armr::Checkpoint last = trainer.state_checkpoint();
  last.meta["split_seed"] = s.seed;
  armr::save_checkpoint(out / "last.ckpt", last);

  if (!result.best_parameters.empty()) armr::restore_snapshot(model.params(), result.best_parameters);
  armr::Checkpoint best;
  best.meta["model"] = mc.to_json();
  best.meta["best_epoch"] = result.best_epoch;
  best.meta["split_seed"] = s.seed;
  armr::store_parameters(model.params(), best);
  armr::save_checkpoint(out / "best.ckpt", best);

  const auto report = armr::evaluate(model, split.test, tc.aggregation, tc.workers);
  json rep = report.to_json();
  rep["best_epoch"] = result.best_epoch;
  rep["variant"] = std::string(armr::to_string(mc.variant));
  write_json(out / "report.json", rep);

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("\ntest split (%zu patients, best epoch %d, %.1fs)\n", split.test.size(),
              result.best_epoch, secs);
  print_metrics_header();
  print_metrics_row(std::string(armr::to_string(mc.variant)), report);
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalFlags {
  std::string checkpoint;
  std::string part = "all";
};

int run_eval(CLI::App* cmd, const Shared& s, const TrainFlags& t, const EvalFlags& e) {
  const armr::Vocab vocab = load_vocab_flag(s);
  const auto records = load_records(s, vocab);
  const armr::Checkpoint ckpt = armr::load_checkpoint(e.checkpoint);
  const auto mc = armr::ModelConfig::from_json(ckpt.meta.at("model"));
  if (!(mc.vocab == vocab)) throw UsageError("checkpoint vocabulary differs from --vocab");
  armr::Model model(mc, 0);
  armr::restore_parameters(ckpt, model.params());

  std::vector<armr::PatientRecord> subset;
  if (e.part == "all") {
    subset = records;
  } else {
    auto split = armr::split_dataset(records, split_ratios(t), s.seed);
    subset = e.part == "train" ? split.train : e.part == "validation" ? split.validation : split.test;
  }
  const auto report =
      armr::evaluate(model, subset, armr::parse_aggregation(t.aggregation), t.workers);
  print_metrics_header();
  print_metrics_row(std::string(armr::to_string(mc.variant)), report);
  std::printf("%d visits from %zu patients (%s)\n", report.visits_evaluated, subset.size(),
              t.aggregation.c_str());
  if (!s.out.empty()) {
    const fs::path out = ensure_out(s.out);
    write_json(out / "manifest.json", manifest(cmd, {s.data, s.vocab, e.checkpoint}));
    write_json(out / "report.json", report.to_json());
  }
  return kExitOk;
}

// ---- ablate ----------------------------------------------------------------

struct AblateFlags {
  int seeds = 1;
};

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int run_ablate(CLI::App* cmd, const Shared& s, const ModelFlags& m, const TrainFlags& t,
               const AblateFlags& a) {
  const armr::Vocab vocab = load_vocab_flag(s);
  const auto records = load_records(s, vocab);
  const fs::path out = ensure_out(s.out);
  write_json(out / "manifest.json", manifest(cmd, {s.data, s.vocab}));

  json runs = json::array();
  std::map<std::string, std::vector<double>> jac, pr, f;
  for (int k = 0; k < a.seeds; ++k) {
    const std::uint64_t seed = s.seed + static_cast<std::uint64_t>(k);
    const auto split = armr::split_dataset(records, split_ratios(t), seed);
    for (armr::Variant v : armr::kAllVariants) {
      ModelFlags mv = m;
      mv.variant = std::string(armr::to_string(v));
      armr::Model model(model_config(mv, vocab), seed);
      armr::TrainConfig tc;
      tc.epochs = t.epochs;
      tc.lr = t.lr;
      tc.seed = seed;
      tc.workers = t.workers;
      tc.aggregation = armr::parse_aggregation(t.aggregation);
      armr::Trainer trainer(model, tc);
      const auto start = std::chrono::steady_clock::now();
      auto result = trainer.run(split.train, split.validation);
      if (!result.best_parameters.empty())
        armr::restore_snapshot(model.params(), result.best_parameters);
      const auto r = armr::evaluate(model, split.test, tc.aggregation, tc.workers);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("seed %llu %-9s jaccard %.4f prauc %.4f f1 %.4f (best epoch %d, %.0fs)\n",
                  static_cast<unsigned long long>(seed), mv.variant.c_str(), r.jaccard, r.prauc,
                  r.f1, result.best_epoch, secs);
      std::fflush(stdout);
      jac[mv.variant].push_back(r.jaccard);
      pr[mv.variant].push_back(r.prauc);
      f[mv.variant].push_back(r.f1);
      runs.push_back({{"seed", seed},
                      {"variant", mv.variant},
                      {"jaccard", r.jaccard},
                      {"prauc", r.prauc},
                      {"f1", r.f1},
                      {"best_epoch", result.best_epoch}});
    }
  }

  std::printf("\n%-12s %17s %17s %17s\n", "Model", "Jaccard", "PRAUC", "F1");
  json table = json::array();
  for (armr::Variant v : armr::kAllVariants) {
    const std::string name(armr::to_string(v));
    std::printf("%-12s %9.4f±%.4f %9.4f±%.4f %9.4f±%.4f\n", name.c_str(), mean_of(jac[name]),
                std_of(jac[name]), mean_of(pr[name]), std_of(pr[name]), mean_of(f[name]),
                std_of(f[name]));
    table.push_back({{"variant", name},
                     {"jaccard_mean", mean_of(jac[name])},
                     {"jaccard_std", std_of(jac[name])},
                     {"prauc_mean", mean_of(pr[name])},
                     {"f1_mean", mean_of(f[name])}});
  }
  write_json(out / "ablation.json", {{"runs", runs}, {"summary", table}});
  return kExitOk;
}

// ---- stats -----------------------------------------------------------------

struct StatsFlags {
  int bins = 10;
  std::int64_t bucket_width = 30;
  std::string unit = "days";
  std::int64_t min_count = 100;
  bool include_first = false;
};

int run_stats(CLI::App* cmd, const Shared& s, const StatsFlags& st) {
  const armr::Vocab vocab = load_vocab_flag(s);
  const auto records = load_records(s, vocab);
  const auto hist = armr::new_drug_histogram(records, st.bins, st.include_first);
  const auto unit = st.unit == "days" ? armr::IntervalUnit::days : armr::IntervalUnit::visits;
  const auto buckets = armr::similarity_by_interval(records, st.bucket_width, unit);
  const double rho = armr::similarity_trend(buckets, st.min_count);
  const auto sum = armr::summarize(records);

  json fig2 = armr::similarity_to_json(buckets, st.bucket_width);
  fig2["unit"] = st.unit;
  fig2["min_count"] = st.min_count;
  fig2["spearman"] = std::isnan(rho) ? json(nullptr) : json(rho);
  json j = {{"summary", sum.to_json()}, {"new_drug_histogram", hist.to_json()},
            {"similarity_by_interval", fig2}};

  std::printf("new-drug proportion: mean %.4f over %lld visits (%s first visits)\n", hist.mean,
              static_cast<long long>(hist.visits), st.include_first ? "including" : "excluding");
  std::printf("  follow-up visits only: %.4f over %lld visits\n", hist.follow_up_mean,
              static_cast<long long>(hist.follow_up_visits));
  for (std::size_t b = 0; b < hist.counts.size(); ++b)
    std::printf("  [%.2f, %.2f%c %8lld\n", static_cast<double>(b) / st.bins,
                static_cast<double>(b + 1) / st.bins, b + 1 == hist.counts.size() ? ']' : ')',
                static_cast<long long>(hist.counts[b]));
  std::printf("prescription similarity by interval (%s, width %lld)\n", st.unit.c_str(),
              static_cast<long long>(st.bucket_width));
  for (const auto& [k, v] : buckets)
    if (v.count >= st.min_count)
      std::printf("  bucket %4lld  mean jaccard %.4f  pairs %lld\n", static_cast<long long>(k),
                  v.mean, static_cast<long long>(v.count));
  std::printf("spearman rho over buckets with >= %lld pairs: %.4f\n",
              static_cast<long long>(st.min_count), rho);

  if (!s.out.empty()) {
    const fs::path out = ensure_out(s.out);
    write_json(out / "stats.json", j);
    write_json(out / "manifest.json", manifest(cmd, {s.data, s.vocab}));
  }
  return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

int run_gradcheck(CLI::App* cmd, const Shared& s, int trials) {
  const auto report = armr::run_gradcheck(s.seed, trials);
  for (const auto& r : report.results)
    std::printf("%-28s %-4s max rel err %.3e  (%d trials, %lld entries)\n", r.name.c_str(),
                r.passed ? "ok" : "FAIL", r.max_error, r.trials,
                static_cast<long long>(r.entries));
  std::printf("%s: max relative error %.3e, tolerance %.0e, %.1fs\n",
              report.passed() ? "PASS" : "FAIL", report.max_error(), armr::kGradCheckTolerance,
              report.seconds);
  if (!s.out.empty()) {
    const fs::path out = ensure_out(s.out);
    json j = report.to_json();
    j.erase("seconds");
    write_json(out / "gradcheck.json", j);
    write_json(out / "manifest.json", manifest(cmd, {}));
  }
  return report.passed() ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"armr: medication recommendation with piecewise temporal learning"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Shared shared;
  ModelFlags model;
  TrainFlags train;

  auto* generate = app.add_subcommand("generate", "write a synthetic cohort");
  GenerateFlags gen;
  add_shared(generate, shared, false);
  generate->add_option("--patients", gen.cfg.num_patients, "number of patients")
      ->check(CLI::PositiveNumber);
  generate->add_option("--mean-visits", gen.cfg.mean_visits, "mean visits per patient")
      ->check(CLI::Range(1.0, 1e6));
  generate->add_option("--max-visits", gen.cfg.max_visits, "visit cap")->check(CLI::PositiveNumber);
  generate->add_option("--new-drug-ratio", gen.cfg.target_new_drug_ratio,
                       "target share of new drugs per follow-up prescription")
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--decay-rate", gen.cfg.similarity_decay_rate,
                       "per-day hazard of a condition resolving")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--mean-gap", gen.cfg.mean_gap_days, "mean days between admissions")
      ->check(CLI::PositiveNumber);
  generate->add_option("--clusters", gen.cfg.num_clusters, "condition clusters")
      ->check(CLI::PositiveNumber);
  generate->add_option("--num-diagnoses", gen.cfg.vocab.num_diagnoses)->check(CLI::PositiveNumber);
  generate->add_option("--num-procedures", gen.cfg.vocab.num_procedures)->check(CLI::PositiveNumber);
  generate->add_option("--num-medications", gen.cfg.vocab.num_medications)
      ->check(CLI::PositiveNumber);

  auto* train_cmd = app.add_subcommand("train", "train one variant");
  TrainOnly train_only;
  add_shared(train_cmd, shared, true);
  add_model(train_cmd, model, true);
  add_train(train_cmd, train);
  train_cmd->add_option("--resume", train_only.resume, "continue from a last.ckpt")
      ->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  EvalFlags eval_flags;
  add_shared(eval, shared, true);
  add_train(eval, train);
  eval->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint to evaluate")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--part", eval_flags.part, "all, train, validation or test")
      ->check(CLI::IsMember({"all", "train", "validation", "test"}));

  auto* ablate = app.add_subcommand("ablate", "train and compare all five variants");
  AblateFlags ablate_flags;
  add_shared(ablate, shared, true);
  add_model(ablate, model, false);
  add_train(ablate, train);
  ablate->add_option("--seeds", ablate_flags.seeds, "number of consecutive seeds")
      ->check(CLI::PositiveNumber);

  auto* stats = app.add_subcommand("stats", "new-drug share and similarity-by-interval statistics");
  StatsFlags stats_flags;
  add_shared(stats, shared, true);
  stats->add_option("--bins", stats_flags.bins, "histogram bins")->check(CLI::PositiveNumber);
  stats->add_option("--bucket-width", stats_flags.bucket_width, "interval bucket width")
      ->check(CLI::PositiveNumber);
  stats->add_option("--interval-unit", stats_flags.unit, "days or visits")
      ->check(CLI::IsMember({"days", "visits"}));
  stats->add_option("--min-count", stats_flags.min_count,
                    "buckets with fewer pairs are left out of the trend");
  stats->add_flag("--include-first-visits", stats_flags.include_first,
                  "count first visits (ratio 1) in the histogram");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  int trials = 100;
  add_shared(gradcheck, shared, false);
  gradcheck->add_option("--trials", trials, "random draws per primitive")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    apply_config(cmd, shared.config);
    if (cmd == generate) return run_generate(cmd, shared, gen);
    if (cmd == train_cmd) return run_train(cmd, shared, model, train, train_only);
    if (cmd == eval) return run_eval(cmd, shared, train, eval_flags);
    if (cmd == ablate) return run_ablate(cmd, shared, model, train, ablate_flags);
    if (cmd == stats) return run_stats(cmd, shared, stats_flags);
    if (cmd == gradcheck) return run_gradcheck(cmd, shared, trials);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const armr::DatasetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const armr::CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const armr::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
