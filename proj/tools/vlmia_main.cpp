// vlmia - membership-inference audit harness for toy and external captioners.
//
// Subcommands mirror the pipeline stages; `run` executes all of them and
// writes a manifest. Exit codes: 0 success, 2 config error, 3 data error,
// 4 numeric divergence.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vlmia/config.hpp"
#include "vlmia/pipeline.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::string metric;
  std::string ingest_path;
  std::vector<double> taus;
  std::vector<std::size_t> granularities;
  std::uint64_t seed = 0;
  std::size_t repeats = 0;
  bool seed_set = false;
  bool repeats_set = false;
  bool print_config = false;
};

vlmia::ExperimentConfig resolve_config(const CliOptions& opt) {
  vlmia::ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = vlmia::load_config(opt.config_path);
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  if (opt.seed_set) cfg.master_seed = opt.seed;
  if (!opt.taus.empty()) cfg.taus = opt.taus;
  if (!opt.granularities.empty()) cfg.granularities = opt.granularities;
  if (opt.repeats_set) cfg.repeats = opt.repeats;
  if (!opt.metric.empty()) cfg.metrics = {vlmia::metric_from_string(opt.metric)};
  if (!opt.ingest_path.empty()) {
    cfg.dataset.kind = vlmia::DatasetConfig::Kind::external_log;
    cfg.dataset.external_path = opt.ingest_path;
  }
  return cfg;
}

void print_report_rows(const vlmia::ReportBundle& bundle) {
  for (const auto& row : bundle.rows) {
    for (const auto& [metric, result] : row.by_metric) {
      std::printf("%s tau=%s %s: AUC %.4f +- %.4f  delta %.4f  best-threshold %.4f (acc %.4f)\n",
                  row.model_tag.c_str(), vlmia::fmt_double(row.tau).c_str(), metric.c_str(),
                  result.auc_mean, result.auc_std, result.delta, result.best_threshold,
                  result.best_accuracy);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"membership-inference audit for captioning models"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // global flags may follow the subcommand

  CliOptions opt;
  app.add_option("--config", opt.config_path, "config file (JSON)");
  app.add_option("--out", opt.out_dir, "output directory (overrides config)");
  app.add_option("--seed", opt.seed, "master seed (overrides config)")
      ->each([&](const std::string&) { opt.seed_set = true; });
  app.add_option("--metric", opt.metric, "restrict to one metric: rouge2 | embedding-cosine");
  app.add_option("--tau", opt.taus, "tau value (repeatable; overrides config)");
  app.add_option("--granularity", opt.granularities,
                 "granularity g (repeatable; overrides config)");
  app.add_option("--repeats", opt.repeats, "subsample repeats per granularity")
      ->each([&](const std::string&) { opt.repeats_set = true; });
  app.add_flag("--print-config", opt.print_config,
               "print the resolved config (defaults + file + flags) and exit");

  auto* cmd_run = app.add_subcommand("run", "full pipeline: data, train, caption, score, attack, report");
  auto* cmd_gen = app.add_subcommand("gen-data", "generate and persist the synthetic dataset");
  auto* cmd_train = app.add_subcommand("train", "train one model per tau on the member split");
  auto* cmd_caption = app.add_subcommand("caption", "greedy-caption all samples per tau");
  auto* cmd_score = app.add_subcommand("score", "membership signals per (model, tau, metric)");
  auto* cmd_attack = app.add_subcommand("attack", "attack statistics per score table");
  auto* cmd_report = app.add_subcommand("report", "tables, summary JSON and plots");
  auto* cmd_ingest = app.add_subcommand("ingest", "validate an external caption log");
  cmd_ingest->add_option("log", opt.ingest_path, "caption log (JSONL)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    vlmia::ExperimentConfig cfg = resolve_config(opt);
    if (opt.print_config) {
      std::cout << vlmia::to_json(cfg).dump(2) << "\n";
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << "no subcommand given; see --help\n";
      return 2;
    }
    vlmia::validate(cfg);

    if (cmd_run->parsed()) {
      const vlmia::ReportBundle bundle = vlmia::run_pipeline(cfg);
      print_report_rows(bundle);
      std::printf("run complete; artifacts + manifest under %s\n", cfg.output_dir.c_str());
    } else if (cmd_gen->parsed()) {
      vlmia::ArtifactWriter writer(cfg.output_dir);
      const vlmia::ToyDataset ds = vlmia::stage_gen_data(cfg, writer);
      std::printf("wrote %zu members + %zu non-members under %s/dataset\n", ds.members.size(),
                  ds.non_members.size(), cfg.output_dir.c_str());
    } else if (cmd_train->parsed()) {
      vlmia::ArtifactWriter writer(cfg.output_dir);
      const auto traces = vlmia::stage_train(cfg, writer);
      for (const auto& [label, trace] : traces) {
        std::printf("%s: %d epochs, final j_cap %.6f, j_tau %.6f\n", label.c_str(),
                    static_cast<int>(trace.size()), trace.back().j_cap, trace.back().j_tau);
      }
    } else if (cmd_caption->parsed()) {
      vlmia::ArtifactWriter writer(cfg.output_dir);
      vlmia::stage_caption(cfg, writer);
      std::printf("caption logs written under %s/captions\n", cfg.output_dir.c_str());
    } else if (cmd_score->parsed()) {
      vlmia::ArtifactWriter writer(cfg.output_dir);
      vlmia::stage_score(cfg, writer);
      std::printf("score tables written under %s/scores\n", cfg.output_dir.c_str());
    } else if (cmd_attack->parsed()) {
      vlmia::ArtifactWriter writer(cfg.output_dir);
      vlmia::stage_attack(cfg, writer);
      std::printf("attack results written under %s/attack\n", cfg.output_dir.c_str());
    } else if (cmd_report->parsed()) {
      vlmia::ArtifactWriter writer(cfg.output_dir);
      const vlmia::ReportBundle bundle = vlmia::stage_report(cfg, writer);
      print_report_rows(bundle);
      std::printf("report written under %s/report\n", cfg.output_dir.c_str());
    } else if (cmd_ingest->parsed()) {
      if (cfg.dataset.kind != vlmia::DatasetConfig::Kind::external_log) {
        std::cerr << "ingest needs a log path argument or an external-log config\n";
        return 2;
      }
      vlmia::ArtifactWriter writer(cfg.output_dir);
      const vlmia::IngestSummary summary = vlmia::stage_ingest(cfg, writer);
      std::printf("ingested %zu records: %zu members, %zu non-members\n", summary.records.size(),
                  summary.members, summary.non_members);
      if (summary.members == 0 || summary.non_members == 0) {
        std::printf("warning: one class is empty; an attack on this log will fail\n");
      }
      std::printf("normalized log at %s/captions/ingested.jsonl\n", cfg.output_dir.c_str());
    }
    return 0;
  } catch (const vlmia::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
