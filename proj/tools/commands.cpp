#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <ostream>
#include <sstream>

#include "tabattn/error.hpp"

namespace tabattn::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::Io, "cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

FeatureSchema resolve_schema(const std::optional<fs::path>& path) {
  return path ? FeatureSchema::load(*path) : FeatureSchema::default_schema();
}

json metrics_to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"sensitivity", m.sensitivity},
          {"specificity", m.specificity},
          {"loss", m.loss},
          {"confusion",
           {{"tp", m.confusion.true_positive},
            {"tn", m.confusion.true_negative},
            {"fp", m.confusion.false_positive},
            {"fn", m.confusion.false_negative}}}};
}

void print_metrics(std::ostream& log, const Metrics& m) {
  const auto& c = m.confusion;
  log << "accuracy    " << format_double(m.accuracy) << '\n'
      << "sensitivity " << format_double(m.sensitivity) << '\n'
      << "specificity " << format_double(m.specificity) << '\n'
      << "loss        " << format_double(m.loss) << '\n'
      << "confusion   tp=" << c.true_positive << " tn=" << c.true_negative
      << " fp=" << c.false_positive << " fn=" << c.false_negative << '\n';
}

// Loads a CSV against the artifact schema; a header naming different
// columns is a schema mismatch rather than a format problem.
Cohort load_for_schema(const fs::path& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open data file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    fail(ErrorKind::Domain, "data file " + path.string() + " is empty");
  }
  std::istringstream stream(text);
  try {
    return parse_csv(stream, schema);
  } catch (const Error& e) {
    const std::string what = e.what();
    if (e.kind() == ErrorKind::Format && what.rfind("CSV header", 0) == 0) {
      fail(ErrorKind::Schema, "data does not match the model schema: " + what);
    }
    throw;
  }
}

Cohort clean_for_inference(const Cohort& raw) {
  if (raw.empty()) fail(ErrorKind::Domain, "data file has no samples");
  return listwise_delete(raw);
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::Format: return exit_code::kParse;
    case ErrorKind::Schema: return exit_code::kSchema;
    case ErrorKind::Domain:
    case ErrorKind::DegenerateCohort: return exit_code::kDomain;
    case ErrorKind::Io: return exit_code::kIo;
    case ErrorKind::Version: return exit_code::kVersion;
    case ErrorKind::Parameter:
    case ErrorKind::Shape:
    case ErrorKind::Lookup:
    case ErrorKind::State: return exit_code::kParameter;
  }
  return exit_code::kUnexpected;
}

Ablation parse_ablation(std::string_view text) {
  if (text == "attention") return Ablation::Attention;
  if (text == "mean-pool") return Ablation::MeanPool;
  if (text == "logistic") return Ablation::Logistic;
  fail(ErrorKind::Parameter, "unknown ablation '" + std::string(text) + "'");
}

PlantedSignal signal_preset(std::string_view name) {
  if (name == "xor") return PlantedSignal::xor_interaction();
  if (name == "null") return PlantedSignal::null_signal();
  fail(ErrorKind::Parameter, "unknown signal preset '" + std::string(name) + "'");
}

SyntheticCohort cmd_gen_data(const GenDataOptions& options, std::ostream& log) {
  const FeatureSchema schema = resolve_schema(options.schema);
  RandomSource rng(options.seed);
  SyntheticCohort synthetic = generate_synthetic_cohort(
      schema, {options.n, options.missing_rate}, signal_preset(options.signal), rng);

  ensure_directory(options.out);
  save_csv(options.out / "cohort.csv", synthetic.cohort);
  json effects = json::array();
  for (const auto& e : synthetic.signal.effects) effects.push_back({{"feature", e.feature}, {"weight", e.weight}});
  json truth = {{"n", options.n},
                {"seed", options.seed},
                {"signal", options.signal},
                {"planted_features", synthetic.planted_features},
                {"effects", effects},
                {"noise_stddev", synthetic.signal.noise_stddev},
                {"missing_rate", options.missing_rate}};
  if (const auto& inter = synthetic.signal.interaction) {
    truth["interaction"] = {{"first", inter->first}, {"second", inter->second}, {"weight", inter->weight}};
  }
  write_text(options.out / "ground_truth.json", truth.dump(2) + "\n");
  log << "wrote " << synthetic.cohort.size() << " samples ("
      << synthetic.cohort.count_label(1) << " recurrence) to " << (options.out / "cohort.csv").string()
      << '\n';
  return synthetic;
}

TrainOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  if (config.data.has_value() == config.generate.has_value()) {
    fail(ErrorKind::Parameter, "specify exactly one data source: --data or --generate");
  }
  config.train.validate();
  const FeatureSchema schema = resolve_schema(config.schema);

  Cohort raw;
  if (config.data) {
    raw = load_csv(*config.data, schema);
  } else {
    RandomSource rng(config.train.seed);
    raw = generate_synthetic_cohort(schema, {*config.generate, 0.0}, signal_preset(config.signal), rng)
              .cohort;
  }

  PipelineSettings pipeline = config.pipeline;
  pipeline.val_fraction = config.train.val_fraction;
  pipeline.seed = config.train.seed;
  TrainOutcome outcome;
  outcome.data = prepare_cohort(raw, pipeline);
  const PreparedData& data = outcome.data;
  log << "cohort: raw=" << data.raw_count << " cleaned=" << data.cleaned_count
      << " inliers=" << data.inlier_count << " balanced=" << data.balanced_count
      << " train=" << data.train.size() << " validation=" << data.validation.size() << '\n';

  TrainConfig train_config = config.train;
  ModelArtifact& artifact = outcome.artifact;
  artifact.schema = schema;
  artifact.stats = data.stats;
  artifact.created = utc_timestamp();
  if (config.ablation == Ablation::Logistic) {
    BaselineResult baseline = train_logistic_baseline(data.train, data.validation, train_config);
    artifact.model = std::move(baseline.model);
    outcome.report = std::move(baseline.report);
  } else {
    train_config.model.pooling =
        config.ablation == Ablation::MeanPool ? Pooling::MeanPool : Pooling::Attention;
    TrainResult result = train(data.train, data.validation, train_config);
    artifact.model = std::move(result.params);
    outcome.report = std::move(result.report);
  }
  artifact.config = train_config;

  ensure_directory(config.out);
  save_artifact(config.out / "model.json", artifact);
  save_curves_csv(config.out / "curves.csv", outcome.report);
  save_csv(config.out / "train.csv", destandardize(data.train, data.stats));
  save_csv(config.out / "validation.csv", destandardize(data.validation, data.stats));
  const json report = {{"model_kind", outcome.report.model_kind},
                       {"epochs", outcome.report.epochs.size()},
                       {"seed", outcome.report.seed},
                       {"smote_mode", std::string(to_string(pipeline.smote_mode))},
                       {"final_train", metrics_to_json(outcome.report.final_train)},
                       {"final_validation", metrics_to_json(outcome.report.final_validation)},
                       {"wall_seconds", outcome.report.wall_seconds}};
  write_text(config.out / "report.json", report.dump(2) + "\n");

  log << outcome.report.model_kind << ": " << outcome.report.epochs.size()
      << " epochs, final train accuracy " << format_double(outcome.report.final_train.accuracy)
      << ", validation accuracy " << format_double(outcome.report.final_validation.accuracy) << '\n';
  return outcome;
}

Metrics cmd_eval(const EvalOptions& options, std::ostream& log) {
  const ModelArtifact artifact = load_artifact(options.model);
  const Cohort raw = load_for_schema(options.data, artifact.schema);
  const Cohort scaled = standardize(clean_for_inference(raw), artifact.stats).cohort;
  const Metrics m = std::holds_alternative<ModelParams>(artifact.model)
                        ? evaluate(std::get<ModelParams>(artifact.model), scaled)
                        : evaluate(std::get<LogisticModel>(artifact.model), scaled);
  print_metrics(log, m);
  ensure_directory(options.out);
  json j = metrics_to_json(m);
  j["samples"] = scaled.size();
  j["model_kind"] = artifact.model_kind();
  write_text(options.out / "metrics.json", j.dump(2) + "\n");
  return m;
}

ImportanceRanking cmd_explain(const ExplainOptions& options, std::ostream& log) {
  const ModelArtifact artifact = load_artifact(options.model);
  const auto* params = std::get_if<ModelParams>(&artifact.model);
  if (!params) fail(ErrorKind::Parameter, "explain needs an attention or mean-pool model, not logistic");
  const Cohort raw = clean_for_inference(load_for_schema(options.data, artifact.schema));

  const AttentionReport report = build_attention_report(*params, artifact.stats, raw);
  const ImportanceRanking ranking = global_importance(report, options.aggregation);
  ensure_directory(options.out);
  save_attention_report_csv(options.out / "attention_report.csv", report);
  save_importance_csv(options.out / "importance.csv", ranking);
  save_embeddings_json(options.out / "embeddings.json", export_embeddings(*params));

  log << "top features by mean attention:\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, ranking.entries.size()); ++i) {
    const auto& e = ranking.entries[i];
    log << "  " << e.rank << ". " << e.feature << "  " << format_double(e.weight) << '\n';
  }
  return ranking;
}

GradCheckReport cmd_gradcheck(const GradCheckOptions& options, std::ostream& log) {
  GradCheckSettings settings;
  settings.seed = options.seed;
  settings.configurations = options.configurations;
  if (options.configurations == 0) fail(ErrorKind::Parameter, "gradcheck needs >= 1 configuration");
  if (options.corrupt) {
    const std::string prefix = *options.corrupt;
    settings.tamper = [prefix](Gradients& g) {
      for (auto& t : g.tensors()) {
        if (t.name.rfind(prefix, 0) != 0) continue;
        for (double& v : t.values) v = v * 1.5 + 1e-3;
      }
    };
  }
  const GradCheckReport report = run_gradient_check(settings);
  for (std::size_t i = 0; i < report.cases.size(); ++i) {
    const auto& c = report.cases[i];
    log << "config " << i << ": n=" << c.features << " batch=" << c.batch << " d=" << c.config.dim
        << " k=" << c.config.attn_dim << " pooling=" << to_string(c.config.pooling)
        << " worst=" << format_double(c.worst_error) << " (" << c.worst_tensor << ") "
        << (c.passed ? "ok" : "FAIL") << '\n';
  }
  log << "worst relative error " << format_double(report.worst_error) << " in "
      << report.worst_tensor << " (tolerance " << format_double(report.tolerance) << ")\n";
  log << (report.passed ? "gradient check passed" : "gradient check FAILED") << '\n';
  return report;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interpretable embedding + feature-attention recurrence classifier"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic cohort with planted signal");
  gen_cmd->add_option("--schema", gen.schema, "Schema JSON (default: built-in 23-feature schema)");
  gen_cmd->add_option("--n", gen.n, "Number of samples (>= 50)")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--signal", gen.signal, "Planted signal preset: xor | null")->capture_default_str();
  gen_cmd->add_option("--missing-rate", gen.missing_rate, "Per-cell missing probability")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();

  RunConfig run_config;
  std::string smote_mode = "full-cohort";
  std::string ablation = "attention";
  auto* train_cmd = app.add_subcommand("train", "Clean, rebalance, split and train");
  train_cmd->add_option("--schema", run_config.schema, "Schema JSON");
  train_cmd->add_option("--data", run_config.data, "Cohort CSV");
  train_cmd->add_option("--generate", run_config.generate, "Train on a freshly generated synthetic cohort of this size");
  train_cmd->add_option("--signal", run_config.signal, "Signal preset for --generate")->capture_default_str();
  train_cmd->add_option("--out", run_config.out, "Output directory")->capture_default_str();
  train_cmd->add_option("--seed", run_config.train.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--epochs", run_config.train.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", run_config.train.batch_size, "Minibatch size")->capture_default_str();
  train_cmd->add_option("--lr", run_config.train.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--dim", run_config.train.model.dim, "Embedding dimension d")->capture_default_str();
  train_cmd->add_option("--attn-dim", run_config.train.model.attn_dim, "Attention dimension k")->capture_default_str();
  train_cmd->add_option("--hidden", run_config.train.model.hidden, "Hidden layer sizes, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--dropout", run_config.train.model.dropout, "Dropout rate")->capture_default_str();
  train_cmd->add_option("--smote-mode", smote_mode, "full-cohort | train-only")->capture_default_str();
  train_cmd->add_option("--smote-k", run_config.pipeline.smote_k, "SMOTE neighbours")->capture_default_str();
  train_cmd->add_option("--ablation", ablation, "attention | mean-pool | logistic")->capture_default_str();
  train_cmd->add_option("--val-fraction", run_config.train.val_fraction, "Validation fraction")->capture_default_str();
  train_cmd->add_option("--z-threshold", run_config.pipeline.z_threshold, "Outlier |z| threshold")->capture_default_str();
  train_cmd->add_option("--patience", run_config.train.patience, "Early-stopping patience (0 = off)")->capture_default_str();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on a cohort CSV");
  eval_cmd->add_option("--model", eval.model, "Model artifact JSON")->required();
  eval_cmd->add_option("--data", eval.data, "Cohort CSV")->required();
  eval_cmd->add_option("--out", eval.out, "Output directory for metrics.json")->capture_default_str();

  ExplainOptions explain;
  std::string aggregation = "mean";
  auto* explain_cmd = app.add_subcommand("explain", "Export attention heatmap, importance and embeddings");
  explain_cmd->add_option("--model", explain.model, "Model artifact JSON")->required();
  explain_cmd->add_option("--data", explain.data, "Cohort CSV")->required();
  explain_cmd->add_option("--out", explain.out, "Output directory")->capture_default_str();
  explain_cmd->add_option("--aggregation", aggregation, "mean | median")->capture_default_str();

  GradCheckOptions grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Check backpropagation against finite differences");
  grad_cmd->add_option("--seed", grad.seed, "Random seed")->capture_default_str();
  grad_cmd->add_option("--configs", grad.configurations, "Number of random configurations")->capture_default_str();
  grad_cmd->add_option("--corrupt", grad.corrupt, "Perturb gradients of tensors with this name prefix (negative control)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::kOk : exit_code::kParameter;
  }

  try {
    if (*gen_cmd) {
      cmd_gen_data(gen, out);
    } else if (*train_cmd) {
      run_config.pipeline.smote_mode = parse_smote_mode(smote_mode);
      run_config.ablation = parse_ablation(ablation);
      cmd_train(run_config, out);
    } else if (*eval_cmd) {
      cmd_eval(eval, out);
    } else if (*explain_cmd) {
      if (aggregation == "mean") explain.aggregation = Aggregation::Mean;
      else if (aggregation == "median") explain.aggregation = Aggregation::Median;
      else fail(ErrorKind::Parameter, "unknown aggregation '" + aggregation + "'");
      cmd_explain(explain, out);
    } else if (*grad_cmd) {
      const GradCheckReport report = cmd_gradcheck(grad, out);
      if (!report.passed) {
        err << "error: gradient mismatch in " << report.worst_tensor << '\n';
        return exit_code::kGradCheckFailed;
      }
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUnexpected;
  }
  return exit_code::kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("tabattn");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tabattn::cli
