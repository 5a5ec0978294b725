// pipeline.hpp
//
// End-to-end orchestration: generate data -> split -> per-tau training ->
// caption -> score -> attack -> report, with every stage reading its
// inputs from and writing its outputs to the run directory. Stages are
// individually invokable (the CLI subcommands map onto them 1:1) and the
// full run records a manifest of seeds, the config hash, and a checksum
// for every file written.
//
// Seed fan-out: every stage derives its seed as a hash of (master_seed,
// stage name, tau), so adding a tau value or rerunning a single stage
// never perturbs the random streams of the others.
//
// External caption logs short-circuit the first three stages: `ingest`
// validates and normalizes the log into captions/, after which scoring,
// attack and report run unchanged - toy-model and real-model captions
// follow one code path.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vlmia/caption_log.hpp"
#include "vlmia/config.hpp"
#include "vlmia/errors.hpp"
#include "vlmia/mia.hpp"
#include "vlmia/report.hpp"
#include "vlmia/toy_vlm.hpp"
#include "vlmia/util.hpp"

namespace vlmia {

// Records every artifact it writes; the manifest is built from this.
class ArtifactWriter {
public:
  explicit ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path write(const std::string& relpath, std::string_view content) {
    const auto path = root_ / relpath;
    write_file(path, content);
    files_[relpath] = hex64(fnv1a64(content));
    return path;
  }

  // for files written by helpers that return paths
  void record(const std::filesystem::path& abspath) {
    files_[std::filesystem::relative(abspath, root_).generic_string()] = file_checksum(abspath);
  }

  void note_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = hex64(seed); }

  nlohmann::json manifest(const std::string& config_hash) const {
    return {{"v", 1}, {"config_hash", config_hash}, {"seeds", seeds_}, {"files", files_}};
  }

private:
  std::filesystem::path root_;
  std::map<std::string, std::string> files_;
  std::map<std::string, std::string> seeds_;
};

namespace detail {

// Filename-safe form of a model tag. When sanitizing changes the string, a
// short hash is appended so distinct tags cannot collide on disk.
inline std::string sanitize_tag(const std::string& tag) {
  std::string out;
  for (char c : tag) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '_');
  }
  if (out.empty()) out = "model";
  if (out != tag) out += "_" + hex64(fnv1a64(tag)).substr(0, 8);
  return out;
}

inline std::string tau_label(double tau) { return "tau_" + fmt_double(tau); }

inline std::string group_stem(const std::string& model_tag, double tau) {
  return sanitize_tag(model_tag) + "_" + tau_label(tau);
}

}  // namespace detail

inline ToyDataset stage_gen_data(const ExperimentConfig& config, ArtifactWriter& writer) {
  if (config.dataset.kind != DatasetConfig::Kind::synthetic) {
    throw ConfigError("gen-data applies to synthetic datasets only");
  }
  const std::uint64_t seed = derive_seed(config.master_seed, "gen-data");
  writer.note_seed("gen-data", seed);
  const auto& s = config.dataset.synthetic;
  const ToyDataset ds = generate_dataset(s.n_members, s.n_nonmembers, seed, s.image_height,
                                         s.image_width, s.noise_amplitude);
  for (const auto& path : write_dataset(ds, writer.root() / "dataset")) writer.record(path);
  return ds;
}

inline ToyDataset load_run_dataset(const std::filesystem::path& root) {
  const auto dir = root / "dataset";
  if (!std::filesystem::exists(dir / "index.jsonl")) {
    throw DataError("no dataset under " + dir.string() + " (run gen-data first)");
  }
  return load_dataset(dir);
}

inline TrainConfig make_train_config(const ExperimentConfig& config, double tau,
                                     std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = config.train.epochs;
  tc.learning_rate = config.train.learning_rate;
  tc.batch_size = config.train.batch_size;
  tc.seed = seed;
  tc.topo = {tau, config.train.sigma, config.train.epsilon};
  return tc;
}

// Trains one model per tau on the 80/20-split member set; persists a
// checkpoint and loss trace per model.
inline std::map<std::string, std::vector<TraceEntry>> stage_train(const ExperimentConfig& config,
                                                                  ArtifactWriter& writer) {
  const ToyDataset ds = load_run_dataset(writer.root());
  if (ds.members.empty()) throw DataError("dataset has no members to train on");
  const std::uint64_t split_seed = derive_seed(config.master_seed, "split");
  writer.note_seed("split", split_seed);
  const auto [train_set, validation] =
      split_members(ds.members, config.train.split_fraction, split_seed);
  (void)validation;  // held out; attack-time members still include it

  std::map<std::string, std::vector<TraceEntry>> traces;
  // image shape comes from the persisted dataset, not the config, so a
  // train-only invocation works against whatever gen-data produced
  const int img_h = ds.members.front().scene.height;
  const int img_w = ds.members.front().scene.width;
  for (double tau : config.taus) {
    const std::string label = detail::tau_label(tau);
    const std::uint64_t seed =
        derive_seed(config.master_seed, "train", fnv1a64(fmt_double(tau)));
    writer.note_seed("train/" + label, seed);
    ToyModelParams params = ToyModelParams::init(config.train.sheet_height,
                                                 config.train.sheet_width, img_h, img_w, seed);
    const TrainConfig tc = make_train_config(config, tau, seed);
    std::vector<TraceEntry> trace = train(params, train_set, tc);

    const auto dir = writer.root() / "models" / label;
    save_checkpoint(params, tc, dir / "checkpoint.json");
    writer.record(dir / "checkpoint.json");
    std::ostringstream csv;
    csv << "epoch,j_cap,r_topo,j_tau\n";
    for (const auto& e : trace) {
      csv << e.epoch << ',' << fmt_double(e.j_cap) << ',' << fmt_double(e.r_topo) << ','
          << fmt_double(e.j_tau) << '\n';
    }
    writer.write("models/" + label + "/trace.csv", csv.str());
    traces[label] = std::move(trace);
  }
  return traces;
}

// Greedy captions for every member and non-member, one log per tau.
inline void stage_caption(const ExperimentConfig& config, ArtifactWriter& writer) {
  const ToyDataset ds = load_run_dataset(writer.root());
  for (double tau : config.taus) {
    const std::string label = detail::tau_label(tau);
    const auto ckpt = writer.root() / "models" / label / "checkpoint.json";
    if (!std::filesystem::exists(ckpt)) {
      throw DataError("no checkpoint at " + ckpt.string() + " (run train first)");
    }
    const auto [params, train_config] = load_checkpoint(ckpt);
    (void)train_config;
    std::vector<CaptionLogRecord> records;
    auto emit = [&](const std::vector<DataPair>& pairs, MembershipLabel membership) {
      for (const auto& pair : pairs) {
        records.push_back({pair.id, membership, caption(params, pair.scene.image),
                           {caption_to_string(pair.caption)}, tau, "toy"});
      }
    };
    emit(ds.members, MembershipLabel::member);
    emit(ds.non_members, MembershipLabel::non_member);
    writer.write("captions/toy_" + label + ".jsonl", caption_log_to_jsonl(records));
  }
}

// Normalizes an external caption log into captions/ so the remaining
// stages treat it exactly like a toy-model log.
inline IngestSummary stage_ingest(const ExperimentConfig& config, ArtifactWriter& writer) {
  if (config.dataset.kind != DatasetConfig::Kind::external_log) {
    throw ConfigError("ingest requires a dataset of kind external-log");
  }
  IngestSummary summary = ingest_external_log(config.dataset.external_path);
  writer.write("captions/ingested.jsonl", caption_log_to_jsonl(summary.records));
  return summary;
}

using CaptionGroups = std::map<std::pair<std::string, double>, std::vector<CaptionLogRecord>>;

inline CaptionGroups load_caption_groups(const std::filesystem::path& root) {
  const auto dir = root / "captions";
  if (!std::filesystem::exists(dir)) {
    throw DataError("no caption logs under " + dir.string() + " (run caption or ingest first)");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  CaptionGroups groups;
  for (const auto& file : files) {
    for (auto& record : parse_caption_log(read_file(file), file.string()).records) {
      groups[{record.model_tag, record.tau}].push_back(std::move(record));
    }
  }
  if (groups.empty()) throw DataError("caption logs under " + dir.string() + " are empty");
  return groups;
}

// Membership signals per (model group, metric); one CSV per combination
// plus an index locating them.
inline void stage_score(const ExperimentConfig& config, ArtifactWriter& writer) {
  const CaptionGroups groups = load_caption_groups(writer.root());
  std::unique_ptr<EmbeddingProvider> embedder;
  for (Metric m : config.metrics) {
    if (m == Metric::embedding_cosine) embedder = make_embedder(config.embedding);
  }
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [key, records] : groups) {
    const auto& [model_tag, tau] = key;
    for (Metric metric : config.metrics) {
      std::vector<ScoreSample> samples;
      samples.reserve(records.size());
      for (const auto& r : records) {
        samples.push_back(
            {r.id, r.label, membership_signal(r.generated, r.references, metric, embedder.get())});
      }
      const std::string name =
          "scores/" + detail::group_stem(model_tag, tau) + "_" + to_string(metric) + ".csv";
      writer.write(name, scores_to_csv(samples, to_string(metric)));
      index.push_back({{"file", name},
                       {"model_tag", model_tag},
                       {"tau", tau},
                       {"metric", to_string(metric)}});
    }
  }
  writer.write("scores/index.json", index.dump(1) + "\n");
}

inline void stage_attack(const ExperimentConfig& config, ArtifactWriter& writer) {
  const auto index_path = writer.root() / "scores" / "index.json";
  if (!std::filesystem::exists(index_path)) {
    throw DataError("no score index at " + index_path.string() + " (run score first)");
  }
  const nlohmann::json index = nlohmann::json::parse(read_file(index_path));
  for (const auto& entry : index) {
    const std::string file = entry.at("file").get<std::string>();
    const std::string model_tag = entry.at("model_tag").get<std::string>();
    const double tau = entry.at("tau").get<double>();
    const Metric metric = metric_from_string(entry.at("metric").get<std::string>());
    const std::vector<ScoreSample> samples = scores_from_csv(read_file(writer.root() / file));
    const std::uint64_t seed = derive_seed(config.master_seed, "attack", fnv1a64(model_tag),
                                           fnv1a64(fmt_double(tau)));
    writer.note_seed("attack/" + detail::group_stem(model_tag, tau), seed);
    const AttackResult result =
        aggregate_attack(samples, metric, config.granularities, config.repeats, seed);
    nlohmann::json j = to_json(result);
    j["model_tag"] = model_tag;
    j["tau"] = tau;
    writer.write("attack/" + detail::group_stem(model_tag, tau) + "_" + to_string(metric) +
                     ".json",
                 j.dump(1) + "\n");
  }
}

inline ReportBundle stage_report(const ExperimentConfig& config, ArtifactWriter& writer) {
  const auto attack_dir = writer.root() / "attack";
  if (!std::filesystem::exists(attack_dir)) {
    throw DataError("no attack results under " + attack_dir.string() + " (run attack first)");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(attack_dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("attack directory is empty: " + attack_dir.string());

  std::map<std::pair<std::string, double>, ReportRow> rows;
  for (const auto& file : files) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(file));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(file.string() + ": " + e.what());
    }
    const std::string model_tag = j.at("model_tag").get<std::string>();
    const double tau = j.at("tau").get<double>();
    const AttackResult result = attack_result_from_json(j);
    ReportRow& row = rows[{model_tag, tau}];
    row.model_tag = model_tag;
    row.tau = tau;
    row.by_metric[result.metric] = result;
  }

  ReportBundle bundle;
  bundle.config_hash = config_hash(config);
  bundle.sigma = config.train.sigma;
  for (auto& [key, row] : rows) bundle.rows.push_back(std::move(row));

  const auto models_dir = writer.root() / "models";
  if (std::filesystem::exists(models_dir)) {
    std::vector<std::filesystem::path> model_dirs;
    for (const auto& entry : std::filesystem::directory_iterator(models_dir)) {
      model_dirs.push_back(entry.path());
    }
    std::sort(model_dirs.begin(), model_dirs.end());
    for (const auto& dir : model_dirs) {
      const auto trace_path = dir / "trace.csv";
      if (!std::filesystem::exists(trace_path)) continue;
      std::istringstream in(read_file(trace_path));
      std::string line;
      std::getline(in, line);  // header
      std::vector<TraceEntry> trace;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        TraceEntry e{};
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        e.epoch = std::stoi(field);
        std::getline(row, field, ',');
        e.j_cap = std::stod(field);
        std::getline(row, field, ',');
        e.r_topo = std::stod(field);
        std::getline(row, field, ',');
        e.j_tau = std::stod(field);
        trace.push_back(e);
      }
      bundle.traces[dir.filename().string()] = std::move(trace);
    }
  }

  for (const auto& path : emit_report(bundle, writer.root() / "report")) writer.record(path);
  return bundle;
}

namespace detail {

// Re-raise with the failing stage's name while keeping the error category
// (and with it the CLI exit code).
template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string msg = std::string("stage ") + name + ": " + e.what();
    switch (e.exit_code()) {
      case 2: throw ConfigError(msg);
      case 4: throw DivergenceError(msg);
      default: throw DataError(msg);
    }
  }
}

}  // namespace detail

// The full pipeline. Deterministic given the config: rerunning into a
// fresh directory reproduces every artifact byte for byte.
inline ReportBundle run_pipeline(const ExperimentConfig& config) {
  validate(config);
  ArtifactWriter writer(config.output_dir);
  writer.write("config.json", to_json(config).dump(1) + "\n");
  try {
    if (config.dataset.kind == DatasetConfig::Kind::synthetic) {
      detail::run_stage("gen-data", [&] { return stage_gen_data(config, writer); });
      detail::run_stage("train", [&] { return stage_train(config, writer); });
      detail::run_stage("caption", [&] { stage_caption(config, writer); return 0; });
    } else {
      detail::run_stage("ingest", [&] {
        const IngestSummary summary = stage_ingest(config, writer);
        if (summary.members == 0 || summary.non_members == 0) {
          throw DataError("ingested log has an empty class (" + std::to_string(summary.members) +
                          " members, " + std::to_string(summary.non_members) +
                          " non-members); attack is impossible");
        }
        return 0;
      });
    }
    detail::run_stage("score", [&] { stage_score(config, writer); return 0; });
    detail::run_stage("attack", [&] { stage_attack(config, writer); return 0; });
    const ReportBundle bundle =
        detail::run_stage("report", [&] { return stage_report(config, writer); });
    write_file(writer.root() / "manifest.json",
               writer.manifest(config_hash(config)).dump(1) + "\n");
    return bundle;
  } catch (const Error&) {
    // partial manifest notes how far the run got
    write_file(writer.root() / "manifest.partial.json",
               writer.manifest(config_hash(config)).dump(1) + "\n");
    throw;
  }
}

}  // namespace vlmia
