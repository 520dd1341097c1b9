// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "gdimpute/checkpoint.hpp"
#include "gdimpute/error.hpp"
#include "gdimpute/experiment.hpp"
#include "gdimpute/service.hpp"

namespace gdimpute::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string schema;
  std::string graph_file;
  std::string data;
  std::string variant;
  std::string ablate;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<std::size_t> eval_rows;
  std::string mask_feature;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--schema", o.schema, "Schema JSON (overrides the config)");
  cmd->add_option("--graph-file", o.graph_file, "Assembly graph JSON (overrides the config)");
  cmd->add_option("--data", o.data, "Dataset CSV (overrides the config)");
  cmd->add_option("--graph", o.variant, "Graph encoder variant")->check(CLI::IsMember({"gcn", "gatv2", "none"}));
  cmd->add_option("--ablate-graph", o.ablate, "Ablate the graph encoder")->check(CLI::IsMember({"none"}));
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--seed", o.seed, "Experiment seed");
}

ExperimentConfig load_config(const std::string& path, const Overrides& o) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_experiment(path);
  if (!o.schema.empty()) c.schema_path = o.schema;
  if (!o.graph_file.empty()) c.graph_path = o.graph_file;
  if (!o.data.empty()) c.data_path = o.data;
  if (!o.variant.empty()) c.model.encoder.variant = parse_graph_variant(o.variant);
  if (!o.ablate.empty()) c.model.encoder.variant = GraphVariant::kNone;
  if (o.epochs) c.training.epochs = *o.epochs;
  if (o.seed) c.seed = *o.seed;
  if (o.k) c.k = *o.k;
  if (o.eval_rows) c.eval_rows = *o.eval_rows;
  if (!o.mask_feature.empty()) {
    c.masking.mode = MaskMode::kFixedFeature;
    c.masking.target_feature = o.mask_feature;
  }
  c.validate();
  c.model.validate();
  c.training.validate();
  return c;
}

void write_loss_trace(const fs::path& path, const std::vector<double>& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write loss trace '" + path.string() + "'");
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < trace.size(); ++e) out << e << ',' << format_double(trace[e]) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

int cmd_synth(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::size_t> rows,
              const std::string& out_dir, std::ostream& out) {
  SyntheticConfig sc;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw ConfigError("synthetic config '" + config_path + "' does not exist");
    sc = SyntheticConfig::from_json(read_json_file(config_path));
  }
  if (rows) sc.rows = *rows;
  sc.validate();
  const auto bundle = generate_synthetic(sc, seed.value_or(0));
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_schema(*bundle.schema, dir / "schema.json");
  save_graph(bundle.graph, dir / "graph.json");
  write_csv(dir / "data.csv", *bundle.schema, bundle.dataset.rows);
  out << "wrote " << bundle.dataset.size() << " rows with " << bundle.schema->size() << " features to "
      << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const Overrides& o, const std::string& checkpoint,
              const std::string& loss_path, std::ostream& out) {
  const auto config = load_config(config_path, o);
  const auto ws = prepare_workspace(config);
  TrainingResult result;
  auto model = train_model(config, ws, &result, [&](int epoch, double loss) {
    out << "epoch " << epoch << " loss " << format_double(loss) << "\n";
    return true;
  });
  save_checkpoint(model, checkpoint);
  write_loss_trace(loss_path.empty() ? fs::path(checkpoint + ".loss.csv") : fs::path(loss_path), result.loss_trace);
  out << "checkpoint " << checkpoint << " sha256 " << file_digest(checkpoint) << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& config_path, const Overrides& o, const std::string& checkpoint,
                 const std::string& method_name, const std::string& report_path, std::ostream& out) {
  auto config = load_config(config_path, o);
  const Method method = method_name.empty() ? config.method : parse_method(method_name);
  const auto ws = prepare_workspace(config);
  std::optional<ImputerModel> model;
  if (method == Method::kDiffusion) {
    if (!checkpoint.empty()) {
      model.emplace(load_checkpoint(checkpoint));
      if (!(model->schema() == *ws.schema)) {
        throw ConfigError("checkpoint '" + checkpoint + "' was trained on a different schema");
      }
    } else {
      model.emplace(train_model(config, ws));
    }
  }
  const auto report = run_evaluation(config, ws, method, model ? &*model : nullptr);
  write_text(report_path, report_text(report));
  auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("n/a"); };
  out << to_string(method) << ": rmse " << show(report.rmse) << " error_rate " << show(report.error_rate)
      << " diversity " << show(report.diversity_score) << " -> " << report_path << "\n";
  return kExitOk;
}

int cmd_impute(const std::string& checkpoint, const std::string& config_path, const Overrides& o,
               const std::string& method_name, const std::string& input, int k, std::uint64_t seed,
               const std::string& output, const std::string& draws_path, std::ostream& out) {
  std::optional<ImputerModel> model;
  std::optional<ExperimentConfig> config;
  std::optional<Workspace> ws;
  Method method = Method::kDiffusion;
  std::shared_ptr<const FeatureSchema> schema;
  if (!method_name.empty()) method = parse_method(method_name);
  if (method == Method::kDiffusion) {
    if (checkpoint.empty()) throw ConfigError("impute with the diffusion method needs --checkpoint");
    model.emplace(load_checkpoint(checkpoint));
    schema = model->schema_ptr();
  } else {
    config = load_config(config_path, o);
    ws = prepare_workspace(*config);
    schema = ws->schema;
  }
  if (!fs::exists(input)) throw ConfigError("input file '" + input + "' does not exist");
  const auto partials = load_partial_csv(input, *schema);
  const auto samples = run_method(method, config ? *config : ExperimentConfig{}, ws ? ws->train : Dataset{schema, {}},
                                  partials, k, seed, model ? &*model : nullptr);
  std::vector<CompleteDesign> points;
  std::vector<CompleteDesign> all;
  for (const auto& s : samples) {
    points.push_back(aggregate(*schema, s));
    all.insert(all.end(), s.draws.begin(), s.draws.end());
  }
  write_csv(output, *schema, points);
  if (!draws_path.empty()) write_csv(draws_path, *schema, all);
  out << "imputed " << points.size() << " rows -> " << output << "\n";
  return kExitOk;
}

int cmd_serve(const std::string& checkpoint, std::string bind, std::uint64_t seed, std::ostream& out) {
  if (const char* env = std::getenv("GDIMPUTE_BIND"); env != nullptr && *env != '\0') bind = env;
  const auto [host, port] = parse_bind_address(bind);
  if (!fs::exists(checkpoint)) throw ConfigError("checkpoint '" + checkpoint + "' does not exist");
  CompletionService service(load_checkpoint(checkpoint), seed);
  HttpServer server(service);
  const int bound = server.bind(host, port);
  out << "serving model " << service.version() << " on http://" << host << ":" << bound << std::endl;
  server.listen();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-guided diffusion imputation for parametric designs", "gdimpute"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gdimpute 0.1.0");

  std::string config_path, checkpoint, loss_path, method, report_path, out_dir, input, output, draws, bind;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_rows;
  Overrides train_o, eval_o, impute_o;
  int impute_k = 10;
  std::uint64_t impute_seed = 0;
  std::uint64_t serve_seed = 0;

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic assembly dataset");
  synth->add_option("--config", config_path, "Synthetic generator config JSON");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--rows", synth_rows, "Number of rows");
  synth->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the diffusion imputer and write a checkpoint");
  train_cmd->add_option("--config", config_path, "Experiment config JSON");
  add_override_flags(train_cmd, train_o);
  train_cmd->add_option("--checkpoint", checkpoint, "Checkpoint output path")->required();
  train_cmd->add_option("--loss-trace", loss_path, "Loss trace CSV (default: <checkpoint>.loss.csv)");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a method on the masked test split");
  eval_cmd->add_option("--config", config_path, "Experiment config JSON");
  add_override_flags(eval_cmd, eval_o);
  eval_cmd->add_option("--checkpoint", checkpoint, "Trained diffusion checkpoint");
  eval_cmd->add_option("--method", method, "Imputation method")
      ->check(CLI::IsMember({"diffusion", "hotdeck", "ppca", "forest"}));
  eval_cmd->add_option("--mask-feature", eval_o.mask_feature, "Hide only this feature in every test row");
  eval_cmd->add_option("--k", eval_o.k, "Samples per test row");
  eval_cmd->add_option("--eval-rows", eval_o.eval_rows, "Score only the first N test rows");
  eval_cmd->add_option("--out", report_path, "Report JSON path")->required();

  auto* impute_cmd = app.add_subcommand("impute", "Complete the rows of a CSV with empty cells");
  impute_cmd->add_option("--checkpoint", checkpoint, "Trained diffusion checkpoint");
  impute_cmd->add_option("--config", config_path, "Experiment config (baseline methods)");
  add_override_flags(impute_cmd, impute_o);
  impute_cmd->add_option("--method", method, "Imputation method")
      ->check(CLI::IsMember({"diffusion", "hotdeck", "ppca", "forest"}));
  impute_cmd->add_option("--input", input, "CSV with empty cells for missing values")->required();
  impute_cmd->add_option("--k", impute_k, "Samples per row")->check(CLI::Range(1, 100000));
  impute_cmd->add_option("--samples-seed", impute_seed, "Sampling seed");
  impute_cmd->add_option("--out", output, "Point-estimate CSV")->required();
  impute_cmd->add_option("--draws", draws, "CSV receiving every draw, K consecutive rows per input row");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the completion API (GDIMPUTE_BIND overrides --bind)");
  serve_cmd->add_option("--checkpoint", checkpoint, "Trained diffusion checkpoint")->required();
  serve_cmd->add_option("--bind", bind, "host:port")->default_val("127.0.0.1:8080");
  serve_cmd->add_option("--seed", serve_seed, "Seed for requests that carry none");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(config_path, synth_seed, synth_rows, out_dir, out);
    if (train_cmd->parsed()) return cmd_train(config_path, train_o, checkpoint, loss_path, out);
    if (eval_cmd->parsed()) return cmd_evaluate(config_path, eval_o, checkpoint, method, report_path, out);
    if (impute_cmd->parsed()) {
      return cmd_impute(checkpoint, config_path, impute_o, method, input, impute_k, impute_seed, output, draws, out);
    }
    if (serve_cmd->parsed()) return cmd_serve(checkpoint, bind, serve_seed, out);
  } catch (const ConfigError& e) {
    err << "gdimpute: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "gdimpute: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace gdimpute::cli
