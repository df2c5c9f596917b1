// Command-line front end: train, eval, predict, visualize, gradcheck, fixture.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "c2w/c2w.hpp"

namespace {

using namespace c2w;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

const std::vector<std::string> kTraitChoices{"ext", "sta", "agr", "con", "opn"};

void write_load_report(const LoadReport& r, const std::string& path) {
  std::cerr << "loaded " << r.lines << " lines: " << r.parsed << " parsed, " << r.dropped_empty
            << " dropped empty, " << r.rejected.size() << " rejected\n";
  for (const auto& e : r.rejected) std::cerr << "  line " << e.line << ": " << e.reason << "\n";
  if (path.empty()) return;
  nlohmann::json j;
  j["lines"] = r.lines;
  j["parsed"] = r.parsed;
  j["dropped_empty"] = r.dropped_empty;
  j["rejected"] = nlohmann::json::array();
  for (const auto& e : r.rejected) j["rejected"].push_back({{"line", e.line}, {"reason", e.reason}});
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write load report '" + path + "'");
  f << j.dump(2) << "\n";
}

std::vector<Tweet> load_corpus(const std::string& path, const std::string& report_path) {
  LoadReport report;
  const auto records = load_dataset(path, report);
  auto tweets = prepare_corpus(records, report);
  write_load_report(report, report_path);
  if (tweets.empty()) throw std::runtime_error("dataset '" + path + "' has no usable tweets");
  return tweets;
}

TrainConfig config_from(const std::string& path, std::optional<std::uint64_t> seed) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : load_train_config(path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, trait, model = "c2w2s4pt", config, out, report, load_report;
  std::optional<std::uint64_t> seed;
  unsigned threads = default_threads();
};

int run_train(const TrainArgs& a) {
  const auto corpus = load_corpus(a.data, a.load_report);
  const TrainConfig cfg = config_from(a.config, a.seed);
  const ModelKind kind = parse_model_kind(a.model);
  std::ofstream report;
  if (!a.report.empty()) {
    report.open(a.report);
    if (!report) throw std::runtime_error("cannot write report '" + a.report + "'");
    report << "epoch,loss,val_rmse,seconds\n";
  }
  TrainOptions opts;
  opts.threads = a.threads;
  opts.on_epoch = [&](const EpochReport& r) {
    std::fprintf(stderr, "epoch %d loss %.6g (%.1fs)\n", r.epoch, r.loss, r.seconds);
    if (report.is_open()) {
      report << r.epoch << "," << format_double(r.loss) << ","
             << (r.val_rmse ? format_double(*r.val_rmse) : "") << "," << format_double(r.seconds)
             << "\n";
      report.flush();
    }
  };
  auto result = train_model(kind, corpus, parse_trait(a.trait), cfg, opts);
  save_checkpoint(result.model, a.out);
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string data, model_kind = "c2w2s4pt", trait = "all", level = "user", config, csv,
                    load_report;
  int k = 10;
  std::uint64_t seed = 0;
  unsigned threads = default_threads();
};

int run_eval(const EvalArgs& a) {
  const auto corpus = load_corpus(a.data, a.load_report);
  const ModelKind kind = parse_model_kind(a.model_kind);
  const TrainConfig cfg = kind == ModelKind::average ? TrainConfig{} : config_from(a.config, a.seed);
  std::vector<Trait> traits;
  if (a.trait == "all") {
    traits.assign(kAllTraits.begin(), kAllTraits.end());
  } else {
    traits.push_back(parse_trait(a.trait));
  }
  CvOptions opts;
  opts.threads = a.threads;
  std::vector<CvReport> reports;
  for (Trait t : traits) {
    std::cerr << "cross-validating " << trait_name(t) << "\n";
    reports.push_back(run_cv(kind, corpus, t, a.k, parse_fold_level(a.level), cfg, a.seed, opts));
  }
  std::cout << "Pooled RMSE (" << a.level << " level, k=" << a.k << ")\n"
            << format_cv_table(reports, true) << "\n"
            << "Fold-averaged RMSE\n"
            << format_cv_table(reports, false);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw std::runtime_error("cannot write '" + a.csv + "'");
    f << format_cv_csv(reports);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model, text;
  bool use_stdin = false;
};

std::string prediction_line(const TrainedModel& m, std::string_view text) {
  const auto y = m.predict_text(text);
  return y ? format_double(*y) : "NA";
}

int run_predict(const PredictArgs& a) {
  const TrainedModel m = load_checkpoint(a.model);
  if (!a.use_stdin) {
    std::cout << prediction_line(m, a.text) << "\n";
    return 0;
  }
  std::string line;
  std::size_t n = 0;
  while (std::getline(std::cin, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      std::cout << prediction_line(m, line) << "\n";
    } catch (const Utf8Error& e) {
      throw std::runtime_error("stdin line " + std::to_string(n) + ": " + e.what());
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct VisualizeArgs {
  std::string model, data, trait, out, format = "svg", load_report;
  std::size_t n = 50;
  double quantile = 0.25;
  std::uint64_t seed = 0;
};

int run_visualize(const VisualizeArgs& a) {
  const TrainedModel m = load_checkpoint(a.model);
  if (m.kind == ModelKind::average) throw std::runtime_error("average baseline has no embeddings");
  const auto corpus = load_corpus(a.data, a.load_report);
  const Trait trait = a.trait.empty() ? m.trait : parse_trait(a.trait);
  const auto ex = select_extremes(corpus, trait, a.n, a.seed, a.quantile);
  PcaModel pca;
  const auto pts = build_scatter(corpus, ex, [&](const Tweet& t) { return m.sentence_vector(t); }, &pca);
  std::fprintf(stderr, "explained variance: %.6g %.6g%s\n", pca.explained_variance[0],
               pca.explained_variance[1], pca.rank_deficient ? " (rank deficient)" : "");
  export_scatter(pts, a.out, parse_scatter_format(a.format),
                 std::string(trait_name(trait)) + ": high vs low users");
  return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string model_kind = "all";
  int trials = 20;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

int run_gradcheck(const GradcheckArgs& a) {
  std::vector<ModelKind> kinds;
  if (a.model_kind == "all") {
    kinds = {ModelKind::c2w2s4pt, ModelKind::bigru_char, ModelKind::bigru_word};
  } else {
    kinds.push_back(parse_model_kind(a.model_kind));
    if (kinds.front() == ModelKind::average) throw UsageError("average has no gradients");
  }
  bool ok = true;
  for (ModelKind k : kinds) {
    const auto r = grad_check(k, a.trials, a.eps, a.seed);
    const bool pass = r.max_rel_error < a.tolerance;
    ok = ok && pass;
    std::printf("%s max_rel_error %.3e at %s[%zu] over %zu components: %s\n",
                std::string(model_kind_name(k)).c_str(), r.max_rel_error, r.worst_tensor.c_str(),
                r.worst_index, r.components, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct FixtureArgs {
  int users = 10;
  int tweets_per_user = 50;
  std::string signal = "exclamation", out;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

int run_fixture(const FixtureArgs& a) {
  if (!(a.noise >= 0.0)) throw UsageError("--noise must be >= 0");
  const auto records =
      generate_fixture(a.users, a.tweets_per_user, parse_fixture_signal(a.signal), a.noise, a.seed);
  save_dataset(records, a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Character-to-word-to-sentence personality trait regression from short texts."};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  const std::vector<std::string> kinds{"c2w2s4pt", "bigru-char", "bigru-word"};

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a TSV dataset and write a checkpoint");
  train->add_option("--data", ta.data, "Dataset TSV")->required()->check(CLI::ExistingFile);
  train->add_option("--trait", ta.trait, "Trait to regress")->required()->check(CLI::IsMember(kTraitChoices));
  train->add_option("--model", ta.model, "Model kind")->capture_default_str()->check(CLI::IsMember(kinds));
  train->add_option("--config", ta.config, "Training config file (defaults: configs/default.conf values)")
      ->check(CLI::ExistingFile);
  train->add_option("--seed", ta.seed, "Seed (overrides the config file)");
  train->add_option("--out", ta.out, "Checkpoint output path")->required();
  train->add_option("--report", ta.report, "Per-epoch CSV (epoch,loss,val_rmse,seconds)");
  train->add_option("--load-report", ta.load_report, "Write the dataset load report as JSON");
  train->add_option("--threads", ta.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "k-fold cross-validation over users or tweets");
  eval->add_option("--data", ea.data, "Dataset TSV")->required()->check(CLI::ExistingFile);
  std::vector<std::string> eval_kinds = kinds;
  eval_kinds.push_back("average");
  eval->add_option("--model-kind", ea.model_kind, "Model kind")->capture_default_str()->check(CLI::IsMember(eval_kinds));
  std::vector<std::string> eval_traits = kTraitChoices;
  eval_traits.push_back("all");
  eval->add_option("--trait", ea.trait, "Trait or 'all'")->capture_default_str()->check(CLI::IsMember(eval_traits));
  eval->add_option("--k", ea.k, "Number of folds")->capture_default_str()->check(CLI::Range(2, 1000));
  eval->add_option("--level", ea.level, "Evaluation level")->capture_default_str()
      ->check(CLI::IsMember({"tweet", "user"}));
  eval->add_option("--config", ea.config, "Training config file (not needed for average)")->check(CLI::ExistingFile);
  eval->add_option("--seed", ea.seed, "Seed for folds and training")->capture_default_str();
  eval->add_option("--csv", ea.csv, "Write per-fold results as CSV");
  eval->add_option("--load-report", ea.load_report, "Write the dataset load report as JSON");
  eval->add_option("--threads", ea.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Predict a trait score for text; prints NA for empty input");
  predict->add_option("--model", pa.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  auto* source = predict->add_option_group("input", "Exactly one of --text or --stdin");
  source->add_option("--text", pa.text, "Text to score");
  source->add_flag("--stdin", pa.use_stdin, "Score each line of standard input");
  source->require_option(1);

  VisualizeArgs va;
  auto* viz = app.add_subcommand("visualize", "PCA scatter of sentence embeddings for high vs low users");
  viz->add_option("--model", va.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  viz->add_option("--data", va.data, "Dataset TSV")->required()->check(CLI::ExistingFile);
  viz->add_option("--trait", va.trait, "Trait used to pick users (default: the model's trait)")
      ->check(CLI::IsMember(kTraitChoices));
  viz->add_option("--n", va.n, "Tweets per side")->capture_default_str()->check(CLI::PositiveNumber);
  viz->add_option("--quantile", va.quantile, "Fraction of users in each tail")->capture_default_str()
      ->check(CLI::Range(0.0, 0.5));
  viz->add_option("--out", va.out, "Output path")->required();
  viz->add_option("--format", va.format, "Output format")->capture_default_str()->check(CLI::IsMember({"csv", "svg"}));
  viz->add_option("--seed", va.seed, "Sampling seed")->capture_default_str();
  viz->add_option("--load-report", va.load_report, "Write the dataset load report as JSON");

  GradcheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  std::vector<std::string> gc_kinds = kinds;
  gc_kinds.push_back("all");
  gc->add_option("--model-kind", ga.model_kind, "Model kind or 'all'")->capture_default_str()->check(CLI::IsMember(gc_kinds));
  gc->add_option("--trials", ga.trials, "Random instances per kind")->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("--eps", ga.eps, "Finite-difference step")->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", ga.tolerance, "Pass threshold on max relative error")->capture_default_str();
  gc->add_option("--seed", ga.seed, "Instance seed")->capture_default_str();

  FixtureArgs fa;
  auto* fx = app.add_subcommand("fixture", "Generate a synthetic dataset with a known text-trait link");
  fx->add_option("--users", fa.users, "Number of users")->capture_default_str()->check(CLI::PositiveNumber);
  fx->add_option("--tweets-per-user", fa.tweets_per_user, "Tweets per user")->capture_default_str()
      ->check(CLI::PositiveNumber);
  fx->add_option("--signal", fa.signal, "Surface signal behind EXT/STA")->capture_default_str()
      ->check(CLI::IsMember({"exclamation", "length", "marker"}));
  fx->add_option("--noise", fa.noise, "Label noise standard deviation")->capture_default_str();
  fx->add_option("--seed", fa.seed, "Generator seed")->capture_default_str();
  fx->add_option("--out", fa.out, "Output TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return run_train(ta);
    if (*eval) return run_eval(ea);
    if (*predict) return run_predict(pa);
    if (*viz) return run_visualize(va);
    if (*gc) return run_gradcheck(ga);
    if (*fx) return run_fixture(fa);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
