// config.hpp
//
// Experiment configuration: JSON file <-> struct, defaults, validation and
// a canonical content hash. The hash is computed from the re-serialized
// canonical form (keys sorted), so semantically identical files hash alike
// regardless of key order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmia/embedding.hpp"
#include "vlmia/errors.hpp"
#include "vlmia/mia.hpp"
#include "vlmia/util.hpp"

namespace vlmia {

struct SyntheticDatasetConfig {
  std::size_t n_members = 60;
  std::size_t n_nonmembers = 60;
  int image_height = 12;
  int image_width = 12;
  double noise_amplitude = 0.05;
};

struct DatasetConfig {
  enum class Kind { synthetic, external_log };
  Kind kind = Kind::synthetic;
  SyntheticDatasetConfig synthetic;
  std::string external_path;  // external_log kind only
};

struct EmbeddingConfig {
  std::string kind = "builtin-hashed-ngram";  // or "precomputed-file"
  std::size_t dimension = 256;
  std::string path;  // precomputed-file kind only
};

struct TrainSection {
  int epochs = 900;
  double learning_rate = 0.4;
  int batch_size = 16;
  int sheet_height = 6;
  int sheet_width = 6;
  double split_fraction = 0.8;
  double sigma = 1.0;     // blur width for the topographic penalty
  double epsilon = 1e-12; // norm guard
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<double> taus = {0.0, 2.0, 3.0};
  // Default sweep is capped by the default synthetic class size (60); the
  // wider sweep {10,50,100,150,200} suits 400/400 external logs.
  std::vector<std::size_t> granularities = {10, 50, 60};
  std::size_t repeats = 5;
  std::vector<Metric> metrics = {Metric::rouge2, Metric::embedding_cosine};
  EmbeddingConfig embedding;
  TrainSection train;
  std::uint64_t master_seed = 42;
  std::string output_dir = "out";
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json dataset;
  if (c.dataset.kind == DatasetConfig::Kind::synthetic) {
    dataset = {{"kind", "synthetic"},
               {"n_members", c.dataset.synthetic.n_members},
               {"n_nonmembers", c.dataset.synthetic.n_nonmembers},
               {"image_height", c.dataset.synthetic.image_height},
               {"image_width", c.dataset.synthetic.image_width},
               {"noise_amplitude", c.dataset.synthetic.noise_amplitude}};
  } else {
    dataset = {{"kind", "external-log"}, {"path", c.dataset.external_path}};
  }
  nlohmann::json embedding = {{"kind", c.embedding.kind}, {"dimension", c.embedding.dimension}};
  if (!c.embedding.path.empty()) embedding["path"] = c.embedding.path;
  std::vector<std::string> metric_names;
  for (Metric m : c.metrics) metric_names.push_back(to_string(m));
  return {{"v", 1},
          {"dataset", dataset},
          {"taus", c.taus},
          {"granularities", c.granularities},
          {"repeats", c.repeats},
          {"metrics", metric_names},
          {"embedding", embedding},
          {"train",
           {{"epochs", c.train.epochs},
            {"learning_rate", c.train.learning_rate},
            {"batch_size", c.train.batch_size},
            {"sheet_height", c.train.sheet_height},
            {"sheet_width", c.train.sheet_width},
            {"split_fraction", c.train.split_fraction},
            {"sigma", c.train.sigma},
            {"epsilon", c.train.epsilon}}},
          {"master_seed", c.master_seed},
          {"output_dir", c.output_dir}};
}

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  try {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (detail::get_or<int>(j, "v", 1) != 1) throw ConfigError("unsupported config version");
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    const std::string kind = detail::get_or<std::string>(d, "kind", "synthetic");
    if (kind == "synthetic") {
      c.dataset.kind = DatasetConfig::Kind::synthetic;
      c.dataset.synthetic.n_members =
          detail::get_or<std::size_t>(d, "n_members", c.dataset.synthetic.n_members);
      c.dataset.synthetic.n_nonmembers =
          detail::get_or<std::size_t>(d, "n_nonmembers", c.dataset.synthetic.n_nonmembers);
      c.dataset.synthetic.image_height =
          detail::get_or<int>(d, "image_height", c.dataset.synthetic.image_height);
      c.dataset.synthetic.image_width =
          detail::get_or<int>(d, "image_width", c.dataset.synthetic.image_width);
      c.dataset.synthetic.noise_amplitude =
          detail::get_or<double>(d, "noise_amplitude", c.dataset.synthetic.noise_amplitude);
    } else if (kind == "external-log") {
      c.dataset.kind = DatasetConfig::Kind::external_log;
      c.dataset.external_path = detail::get_or<std::string>(d, "path", "");
    } else {
      throw ConfigError("dataset.kind must be 'synthetic' or 'external-log', got '" + kind + "'");
    }
  }
  c.taus = detail::get_or<std::vector<double>>(j, "taus", c.taus);
  c.granularities = detail::get_or<std::vector<std::size_t>>(j, "granularities", c.granularities);
  c.repeats = detail::get_or<std::size_t>(j, "repeats", c.repeats);
  if (j.contains("metrics")) {
    c.metrics.clear();
    for (const auto& name : j.at("metrics").get<std::vector<std::string>>()) {
      c.metrics.push_back(metric_from_string(name));
    }
  }
  if (j.contains("embedding")) {
    const auto& e = j.at("embedding");
    c.embedding.kind = detail::get_or<std::string>(e, "kind", c.embedding.kind);
    c.embedding.dimension = detail::get_or<std::size_t>(e, "dimension", c.embedding.dimension);
    c.embedding.path = detail::get_or<std::string>(e, "path", "");
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.epochs = detail::get_or<int>(t, "epochs", c.train.epochs);
    c.train.learning_rate = detail::get_or<double>(t, "learning_rate", c.train.learning_rate);
    c.train.batch_size = detail::get_or<int>(t, "batch_size", c.train.batch_size);
    c.train.sheet_height = detail::get_or<int>(t, "sheet_height", c.train.sheet_height);
    c.train.sheet_width = detail::get_or<int>(t, "sheet_width", c.train.sheet_width);
    c.train.split_fraction = detail::get_or<double>(t, "split_fraction", c.train.split_fraction);
    c.train.sigma = detail::get_or<double>(t, "sigma", c.train.sigma);
    c.train.epsilon = detail::get_or<double>(t, "epsilon", c.train.epsilon);
  }
  c.master_seed = detail::get_or<std::uint64_t>(j, "master_seed", c.master_seed);
  c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir);
  return c;
}

inline void validate(const ExperimentConfig& c) {
  if (c.taus.empty()) throw ConfigError("taus must be non-empty");
  for (double tau : c.taus) {
    if (tau < 0.0) throw ConfigError("tau must be >= 0, got " + fmt_double(tau));
  }
  if (c.granularities.empty()) throw ConfigError("granularities must be non-empty");
  for (std::size_t g : c.granularities) {
    if (g == 0) throw ConfigError("granularities must be positive");
  }
  if (c.repeats == 0) throw ConfigError("repeats must be positive");
  if (c.metrics.empty()) throw ConfigError("metrics must be non-empty");
  if (c.dataset.kind == DatasetConfig::Kind::synthetic) {
    const auto& s = c.dataset.synthetic;
    if (s.n_members == 0 || s.n_nonmembers == 0) {
      throw ConfigError("synthetic dataset needs n_members >= 1 and n_nonmembers >= 1");
    }
    const std::size_t min_class = std::min(s.n_members, s.n_nonmembers);
    for (std::size_t g : c.granularities) {
      if (g > min_class) {
        throw ConfigError("granularity " + std::to_string(g) +
                          " exceeds the smaller class size " + std::to_string(min_class));
      }
    }
    if (s.image_height < 6 || s.image_width < 6) {
      throw ConfigError("synthetic images must be at least 6x6");
    }
    if (s.noise_amplitude < 0.0) throw ConfigError("noise_amplitude must be >= 0");
  } else {
    if (c.dataset.external_path.empty()) throw ConfigError("external-log dataset needs a path");
    if (!std::filesystem::exists(c.dataset.external_path)) {
      throw ConfigError("external log not found: " + c.dataset.external_path);
    }
  }
  if (c.embedding.kind == "precomputed-file") {
    if (c.embedding.path.empty()) throw ConfigError("precomputed-file embedding needs a path");
    if (!std::filesystem::exists(c.embedding.path)) {
      throw ConfigError("embedding file not found: " + c.embedding.path);
    }
  } else if (c.embedding.kind != "builtin-hashed-ngram") {
    throw ConfigError("embedding.kind must be 'builtin-hashed-ngram' or 'precomputed-file'");
  }
  if (c.embedding.dimension == 0) throw ConfigError("embedding.dimension must be positive");
  if (c.train.epochs <= 0 || c.train.batch_size <= 0) {
    throw ConfigError("train.epochs and train.batch_size must be positive");
  }
  if (c.train.learning_rate <= 0.0) throw ConfigError("train.learning_rate must be positive");
  if (c.train.split_fraction <= 0.0 || c.train.split_fraction > 1.0) {
    throw ConfigError("train.split_fraction must be in (0, 1]");
  }
  if (c.train.sheet_height <= 0 || c.train.sheet_width <= 0) {
    throw ConfigError("sheet dimensions must be positive");
  }
  if (c.train.sigma <= 0.0) throw ConfigError("train.sigma must be positive");
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return experiment_config_from_json(j);
}

// Canonical content hash (keys sorted by the serializer).
inline std::string config_hash(const ExperimentConfig& c) {
  return hex64(fnv1a64(to_json(c).dump()));
}

inline std::unique_ptr<EmbeddingProvider> make_embedder(const EmbeddingConfig& e) {
  if (e.kind == "precomputed-file") {
    return std::make_unique<PrecomputedEmbedder>(e.path);
  }
  return std::make_unique<HashedNgramEmbedder>(e.dimension);
}

}  // namespace vlmia
