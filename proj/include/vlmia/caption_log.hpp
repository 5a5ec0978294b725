// caption_log.hpp
//
// Line-delimited JSON caption logs: the query/observe boundary of the
// attack. Each record is one (image id, generated caption, references)
// observation for one model configuration. The toy pipeline writes this
// format, and externally produced logs (captions from real captioning
// models) ingest through the same parser, so both sources drive an
// identical attack path.
//
// Schema (one JSON object per line):
//   {"v":1,"id":str,"label":"member"|"non-member","generated":str,
//    "references":[str,...],"tau":num,"model_tag":str}
// (id, tau, model_tag) must be unique; references must be non-empty.

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "vlmia/errors.hpp"
#include "vlmia/mia.hpp"
#include "vlmia/util.hpp"

namespace vlmia {

struct CaptionLogRecord {
  std::string id;
  MembershipLabel label = MembershipLabel::member;
  std::string generated;
  std::vector<std::string> references;
  double tau = 0.0;
  std::string model_tag;

  bool operator==(const CaptionLogRecord&) const = default;
};

inline nlohmann::json to_json(const CaptionLogRecord& r) {
  return {{"v", 1},
          {"id", r.id},
          {"label", to_string(r.label)},
          {"generated", r.generated},
          {"references", r.references},
          {"tau", r.tau},
          {"model_tag", r.model_tag}};
}

inline std::string caption_log_to_jsonl(const std::vector<CaptionLogRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  return out.str();
}

struct IngestSummary {
  std::vector<CaptionLogRecord> records;
  std::size_t members = 0;
  std::size_t non_members = 0;
};

inline IngestSummary parse_caption_log(const std::string& jsonl, const std::string& source) {
  IngestSummary out;
  std::set<std::tuple<std::string, double, std::string>> seen;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    CaptionLogRecord r;
    try {
      if (j.value("v", 0) != 1) throw DataError(where + ": unsupported record version");
      r.id = j.at("id").get<std::string>();
      r.label = membership_label_from_string(j.at("label").get<std::string>());
      r.generated = j.at("generated").get<std::string>();
      r.references = j.at("references").get<std::vector<std::string>>();
      r.tau = j.at("tau").get<double>();
      r.model_tag = j.at("model_tag").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (r.references.empty()) throw DataError(where + ": record has no references");
    // ids flow into CSV artifacts, so keep them single-line and comma-free
    if (r.id.empty() || r.id.find_first_of(",\r\n") != std::string::npos) {
      throw DataError(where + ": id must be non-empty without commas or line breaks");
    }
    if (!seen.insert({r.id, r.tau, r.model_tag}).second) {
      throw DataError(where + ": duplicate (id, tau, model_tag) key for id '" + r.id + "'");
    }
    (r.label == MembershipLabel::member ? out.members : out.non_members) += 1;
    out.records.push_back(std::move(r));
  }
  return out;
}

inline IngestSummary ingest_external_log(const std::filesystem::path& path) {
  return parse_caption_log(read_file(path), path.string());
}

}  // namespace vlmia
