#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "vlmia/caption_log.hpp"
#include "vlmia/config.hpp"
#include "vlmia/pipeline.hpp"
#include "vlmia/report.hpp"

using namespace vlmia;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

// small, fast config for structural pipeline tests
ExperimentConfig tiny_config(const fs::path& out, std::vector<double> taus = {0.0}) {
  ExperimentConfig cfg;
  cfg.dataset.synthetic = {8, 8, 8, 8, 0.05};
  cfg.taus = std::move(taus);
  cfg.granularities = {2, 4};
  cfg.repeats = 2;
  cfg.train.epochs = 30;
  cfg.train.batch_size = 4;
  cfg.train.sheet_height = 3;
  cfg.train.sheet_width = 3;
  cfg.master_seed = 1234;
  cfg.output_dir = out.string();
  return cfg;
}

std::vector<CaptionLogRecord> synthetic_log(std::size_t members, std::size_t non_members,
                                            const std::string& model_tag = "ext", double tau = 0.0) {
  std::vector<CaptionLogRecord> records;
  for (std::size_t i = 0; i < members + non_members; ++i) {
    const bool is_member = i < members;
    CaptionLogRecord r;
    r.id = (is_member ? "m" : "n") + std::to_string(is_member ? i : i - members);
    r.label = is_member ? MembershipLabel::member : MembershipLabel::non_member;
    // members echo their reference, non-members drift
    r.references = {"a red boat on the water " + std::to_string(i)};
    r.generated = is_member ? r.references[0] : "a boat floating near the dock";
    r.tau = tau;
    r.model_tag = model_tag;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

TEST_CASE("config: defaults, file round-trip, overrides of missing keys") {
  const ExperimentConfig def;
  CHECK(def.taus == std::vector<double>{0.0, 2.0, 3.0});
  CHECK(def.granularities == std::vector<std::size_t>{10, 50, 60});
  CHECK(def.repeats == 5);
  CHECK(def.metrics.size() == 2);

  const nlohmann::json j = to_json(def);
  const ExperimentConfig back = experiment_config_from_json(j);
  CHECK(to_json(back) == j);

  // partial config: unspecified keys keep defaults
  const ExperimentConfig partial = experiment_config_from_json(nlohmann::json::parse(
      R"({"taus":[0.0],"train":{"epochs":10}})"));
  CHECK(partial.taus == std::vector<double>{0.0});
  CHECK(partial.train.epochs == 10);
  CHECK(partial.train.batch_size == def.train.batch_size);
  CHECK(partial.repeats == def.repeats);

  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(
                      R"({"dataset":{"kind":"postgres"}})")),
                  ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"taus":"zero"})")),
                  ConfigError);
}

TEST_CASE("config validation catches the documented error classes") {
  ExperimentConfig cfg;
  cfg.taus.clear();
  CHECK_THROWS_AS(validate(cfg), ConfigError);

  cfg = ExperimentConfig{};
  cfg.taus = {-1.0};
  CHECK_THROWS_AS(validate(cfg), ConfigError);

  cfg = ExperimentConfig{};
  cfg.granularities = {100};  // > default 60/60 class size
  CHECK_THROWS_AS(validate(cfg), ConfigError);

  cfg = ExperimentConfig{};
  cfg.dataset.kind = DatasetConfig::Kind::external_log;
  cfg.dataset.external_path = "/nonexistent/captions.jsonl";
  CHECK_THROWS_AS(validate(cfg), ConfigError);

  cfg = ExperimentConfig{};
  cfg.embedding.kind = "precomputed-file";
  cfg.embedding.path = "/nonexistent/embeddings.tsv";
  CHECK_THROWS_AS(validate(cfg), ConfigError);

  CHECK_NOTHROW(validate(ExperimentConfig{}));
}

TEST_CASE("config hash is stable under key permutation") {
  const std::string a = R"({"master_seed": 7, "repeats": 3, "taus": [0.0, 2.0]})";
  const std::string b = R"({"taus": [0.0, 2.0], "master_seed": 7, "repeats": 3})";
  const ExperimentConfig ca = experiment_config_from_json(nlohmann::json::parse(a));
  const ExperimentConfig cb = experiment_config_from_json(nlohmann::json::parse(b));
  CHECK(config_hash(ca) == config_hash(cb));

  ExperimentConfig cc = ca;
  cc.master_seed = 8;
  CHECK(config_hash(cc) != config_hash(ca));
}

TEST_CASE("caption log: parse, line-numbered errors, duplicates, round-trip") {
  const auto records = synthetic_log(3, 2);
  const std::string jsonl = caption_log_to_jsonl(records);
  const IngestSummary summary = parse_caption_log(jsonl, "test.jsonl");
  CHECK(summary.members == 3);
  CHECK(summary.non_members == 2);
  CHECK(summary.records == records);  // record-level equality

  // second line malformed -> error names the line
  const std::string bad = records.empty() ? "" : to_json(records[0]).dump() + "\n{oops\n";
  try {
    parse_caption_log(bad, "bad.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("bad.jsonl:2") != std::string::npos);
  }

  // missing references -> error names the line
  nlohmann::json no_refs = to_json(records[0]);
  no_refs.erase("references");
  try {
    parse_caption_log(no_refs.dump() + "\n", "norefs.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("norefs.jsonl:1") != std::string::npos);
  }

  nlohmann::json empty_refs = to_json(records[0]);
  empty_refs["references"] = nlohmann::json::array();
  CHECK_THROWS_AS(parse_caption_log(empty_refs.dump() + "\n", "x"), DataError);

  // duplicate (id, tau, model_tag)
  const std::string dup = to_json(records[0]).dump() + "\n" + to_json(records[0]).dump() + "\n";
  CHECK_THROWS_AS(parse_caption_log(dup, "dup.jsonl"), DataError);

  // same id under a different tau is a distinct key
  auto r2 = records[0];
  r2.tau = 2.0;
  CHECK_NOTHROW(parse_caption_log(to_json(records[0]).dump() + "\n" + to_json(r2).dump() + "\n", "x"));
}

TEST_CASE("run_pipeline writes the documented output tree") {
  const fs::path out = fresh_dir("vlmia_pipeline_tree");
  const ExperimentConfig cfg = tiny_config(out, {0.0, 2.0, 3.0});
  const ReportBundle bundle = run_pipeline(cfg);

  CHECK(fs::exists(out / "dataset" / "index.jsonl"));
  for (const char* label : {"tau_0", "tau_2", "tau_3"}) {
    CHECK(fs::exists(out / "models" / label / "checkpoint.json"));
    CHECK(fs::exists(out / "models" / label / "trace.csv"));
    CHECK(fs::exists(out / "captions" / (std::string("toy_") + label + ".jsonl")));
    for (const char* metric : {"rouge2", "embedding-cosine"}) {
      CHECK(fs::exists(out / "scores" / (std::string("toy_") + label + "_" + metric + ".csv")));
      CHECK(fs::exists(out / "attack" / (std::string("toy_") + label + "_" + metric + ".json")));
    }
  }
  CHECK(fs::exists(out / "report" / "table.csv"));
  CHECK(fs::exists(out / "report" / "summary.json"));
  CHECK(fs::exists(out / "manifest.json"));

  REQUIRE(bundle.rows.size() == 3);
  for (const auto& row : bundle.rows) {
    CHECK(row.by_metric.size() == 2);
    for (const auto& [metric, result] : row.by_metric) {
      CHECK(result.per_g.size() == cfg.granularities.size());
      CHECK(result.delta == result.alpha_in - result.alpha_out);
    }
  }
}

TEST_CASE("run_pipeline with a single tau yields one model directory") {
  const fs::path out = fresh_dir("vlmia_pipeline_single");
  run_pipeline(tiny_config(out));
  std::size_t model_dirs = 0;
  for (const auto& entry : fs::directory_iterator(out / "models")) {
    (void)entry;
    ++model_dirs;
  }
  CHECK(model_dirs == 1);
  std::size_t attack_files = 0;
  for (const auto& entry : fs::directory_iterator(out / "attack")) {
    (void)entry;
    ++attack_files;
  }
  CHECK(attack_files == 2);  // one per metric
}

TEST_CASE("manifest lists every written file with a correct checksum") {
  const fs::path out = fresh_dir("vlmia_pipeline_manifest");
  run_pipeline(tiny_config(out));
  const nlohmann::json manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
  CHECK(manifest.at("config_hash") == config_hash(tiny_config(out)));
  CHECK(manifest.at("seeds").contains("gen-data"));
  CHECK(manifest.at("seeds").contains("train/tau_0"));

  std::set<std::string> on_disk;
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (entry.is_regular_file()) {
      on_disk.insert(fs::relative(entry.path(), out).generic_string());
    }
  }
  on_disk.erase("manifest.json");  // the manifest cannot list itself
  std::set<std::string> listed;
  for (const auto& [rel, checksum] : manifest.at("files").items()) {
    listed.insert(rel);
    CHECK(checksum.get<std::string>() == file_checksum(out / rel));
  }
  CHECK(listed == on_disk);
}

TEST_CASE("two runs of the same config are byte-identical on scores and attack") {
  const fs::path out_a = fresh_dir("vlmia_repro_a");
  const fs::path out_b = fresh_dir("vlmia_repro_b");
  ExperimentConfig cfg_a = tiny_config(out_a);
  ExperimentConfig cfg_b = cfg_a;
  cfg_b.output_dir = out_b.string();
  run_pipeline(cfg_a);
  run_pipeline(cfg_b);
  for (const char* rel :
       {"scores/toy_tau_0_rouge2.csv", "scores/toy_tau_0_embedding-cosine.csv",
        "attack/toy_tau_0_rouge2.json", "attack/toy_tau_0_embedding-cosine.json",
        "captions/toy_tau_0.jsonl", "dataset/index.jsonl"}) {
    CHECK(read_file(out_a / rel) == read_file(out_b / rel));
  }
}

TEST_CASE("report numbers are recomputable from the persisted score CSVs") {
  const fs::path out = fresh_dir("vlmia_report_consistency");
  run_pipeline(tiny_config(out));
  const nlohmann::json summary = nlohmann::json::parse(read_file(out / "report" / "summary.json"));
  for (const auto& row : summary.at("rows")) {
    for (const auto& [metric, result] : row.at("metrics").items()) {
      const auto samples = scores_from_csv(
          read_file(out / "scores" / ("toy_tau_0_" + metric + ".csv")));
      const SimilarityGap gap = similarity_gap(samples);
      CHECK(result.at("alpha_in").get<double>() == Catch::Approx(gap.alpha_in).margin(1e-9));
      CHECK(result.at("alpha_out").get<double>() == Catch::Approx(gap.alpha_out).margin(1e-9));
      // mean/std re-derived from the persisted per-repeat AUC values
      std::vector<double> pooled;
      for (const auto& run : result.at("per_g")) {
        for (double a : run.at("auc").get<std::vector<double>>()) pooled.push_back(a);
      }
      const double mean =
          std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
      double ss = 0.0;
      for (double a : pooled) ss += (a - mean) * (a - mean);
      CHECK(result.at("auc_mean").get<double>() ==
            Catch::Approx(mean).margin(1e-9));
      CHECK(result.at("auc_std").get<double>() ==
            Catch::Approx(std::sqrt(ss / static_cast<double>(pooled.size()))).margin(1e-9));
    }
  }
}

TEST_CASE("external caption log drives the same attack path") {
  const fs::path out = fresh_dir("vlmia_external");
  const fs::path log = out / "external.jsonl";
  write_file(log, caption_log_to_jsonl(synthetic_log(20, 20, "captioner-a", 2.0)));

  ExperimentConfig cfg;
  cfg.dataset.kind = DatasetConfig::Kind::external_log;
  cfg.dataset.external_path = log.string();
  cfg.granularities = {5, 10};
  cfg.repeats = 3;
  cfg.output_dir = (out / "run").string();
  const ReportBundle bundle = run_pipeline(cfg);

  REQUIRE(bundle.rows.size() == 1);
  CHECK(bundle.rows[0].model_tag == "captioner-a");
  CHECK(bundle.rows[0].tau == 2.0);
  // normalized copy re-parses to the same records (round-trip export)
  const IngestSummary again =
      parse_caption_log(read_file(out / "run" / "captions" / "ingested.jsonl"), "copy");
  CHECK(again.records == synthetic_log(20, 20, "captioner-a", 2.0));

  // members echo references exactly, so the rouge2 attack must be strong
  CHECK(bundle.rows[0].by_metric.at("rouge2").auc_mean > 0.9);
}

TEST_CASE("an external log with one class empty fails at the attack boundary") {
  const fs::path out = fresh_dir("vlmia_external_degenerate");
  const fs::path log = out / "members_only.jsonl";
  write_file(log, caption_log_to_jsonl(synthetic_log(5, 0)));

  ExperimentConfig cfg;
  cfg.dataset.kind = DatasetConfig::Kind::external_log;
  cfg.dataset.external_path = log.string();
  cfg.granularities = {2};
  cfg.output_dir = (out / "run").string();
  CHECK_THROWS_AS(run_pipeline(cfg), DataError);
  CHECK(fs::exists(out / "run" / "manifest.partial.json"));
}

TEST_CASE("report table: delta equals member minus non-member mean in every row") {
  const fs::path out = fresh_dir("vlmia_report_table");
  run_pipeline(tiny_config(out, {0.0, 2.0, 3.0}));
  std::ifstream table(out / "report" / "table.csv");
  std::string header;
  std::getline(table, header);
  CHECK(header.find("model_tag,tau,") == 0);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(table, line)) {
    if (line.empty()) continue;
    ++rows;
    std::vector<std::string> fields;
    std::istringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 12);
    const double emb_delta = std::stod(fields[4]);
    CHECK(emb_delta == Catch::Approx(std::stod(fields[2]) - std::stod(fields[3])).margin(1e-12));
    const double rouge_delta = std::stod(fields[7]);
    CHECK(rouge_delta == Catch::Approx(std::stod(fields[5]) - std::stod(fields[6])).margin(1e-12));
  }
  CHECK(rows == 3);  // one per tau for the single model_tag
}

TEST_CASE("auc-vs-g plot has one polyline per row with one point per granularity") {
  const fs::path out = fresh_dir("vlmia_report_svg");
  const ExperimentConfig cfg = tiny_config(out, {0.0, 2.0});
  run_pipeline(cfg);
  const std::string svg = read_file(out / "report" / "auc_vs_g_rouge2.svg");
  std::size_t polylines = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++polylines;
    const std::size_t points_at = svg.find("points=\"", pos);
    const std::size_t end = svg.find('"', points_at + 8);
    const std::string points = svg.substr(points_at + 8, end - points_at - 8);
    CHECK(static_cast<std::size_t>(std::count(points.begin(), points.end(), ',')) ==
          cfg.granularities.size());
    pos = end;
  }
  CHECK(polylines == 2);  // one per tau
}

TEST_CASE("cli: exit codes for config and data errors") {
  if (!fs::exists("vlmia")) {
    WARN("vlmia binary not in working directory; skipping CLI smoke test");
    return;
  }
  auto run = [](const std::string& cmd) {
    const int ret = std::system((cmd + " >/dev/null 2>&1").c_str());
    return ret == -1 ? -1 : WEXITSTATUS(ret);
  };
  CHECK(run("./vlmia --print-config") == 0);
  CHECK(run("./vlmia --config /nonexistent.json run") == 2);
  CHECK(run("./vlmia --granularity 999 run") == 2);  // exceeds class size
  // unresolvable path is a config error; malformed content is a data error
  CHECK(run("./vlmia ingest /nonexistent.jsonl") == 2);
  const fs::path bad = fresh_dir("vlmia_cli_badlog");
  write_file(bad / "log.jsonl", "{not json\n");
  CHECK(run("./vlmia ingest " + (bad / "log.jsonl").string() + " --out " +
            (bad / "run").string()) == 3);
}

TEST_CASE("seed sweep summary: medians, cell completeness, monotonicity flags") {
  auto mk_bundle = [](double auc_tau0, double auc_tau2) {
    ReportBundle b;
    for (auto [tau, auc] : {std::pair{0.0, auc_tau0}, std::pair{2.0, auc_tau2}}) {
      ReportRow row;
      row.model_tag = "toy";
      row.tau = tau;
      AttackResult r;
      r.metric = "rouge2";
      r.auc_mean = auc;
      r.per_g = {{2, 2, {auc, auc}}};
      row.by_metric["rouge2"] = r;
      b.rows.push_back(row);
    }
    return b;
  };
  const auto summary =
      summarize_seed_sweep({mk_bundle(0.9, 0.7), mk_bundle(0.8, 0.6), mk_bundle(0.85, 0.65)});
  REQUIRE(summary.at("median_auc").size() == 2);
  CHECK(summary.at("median_auc")[0].at("median_auc").get<double>() == 0.85);  // tau 0
  CHECK(summary.at("median_auc")[1].at("median_auc").get<double>() == 0.65);  // tau 2
  CHECK(summary.at("non_monotone_flags").empty());

  // a rising median gets flagged, not failed
  const auto flagged = summarize_seed_sweep({mk_bundle(0.6, 0.9)});
  CHECK(flagged.at("non_monotone_flags").size() == 1);

  // a bundle missing the tau=2 cell is an error
  ReportBundle incomplete = mk_bundle(0.9, 0.7);
  incomplete.rows.pop_back();
  CHECK_THROWS_AS(summarize_seed_sweep({mk_bundle(0.9, 0.7), incomplete}), DataError);
}
