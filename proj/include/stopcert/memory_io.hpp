#pragma once

// Bank/snapshot files and the audit log on disk. Snapshot files embed the
// format version, the hash algorithm tag and the content hash, so replaying
// audits can verify hash stability without recomputing banks.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stopcert/memory.hpp"
#include "stopcert/trace_io.hpp"

namespace stopcert {

inline constexpr const char* kBankFormatVersion = "stopcert.bank.v1";

inline nlohmann::ordered_json to_json(const Experience& exp) {
  nlohmann::ordered_json j;
  j["error_context"] = exp.error_context;
  j["error_cause"] = exp.error_cause;
  j["fix_method"] = exp.fix_method;
  j["fix_result"] = exp.fix_result;
  j["key_insight"] = exp.key_insight;
  j["source"] = {{"problem_id", exp.source.problem_id},
                 {"fail_step", exp.source.fail_step},
                 {"pass_step", exp.source.pass_step}};
  if (!exp.route.is_general) {
    j["route"] = {{"primary", exp.route.pair.primary},
                  {"secondary", exp.route.pair.secondary}};
  }
  return j;
}

inline Experience experience_from_json(const nlohmann::json& j) {
  Experience exp;
  exp.error_context = j.at("error_context").get<std::string>();
  exp.error_cause = j.at("error_cause").get<std::string>();
  exp.fix_method = j.at("fix_method").get<std::string>();
  exp.fix_result = j.at("fix_result").get<std::string>();
  exp.key_insight = j.at("key_insight").get<std::string>();
  const auto& source = j.at("source");
  exp.source.problem_id = source.at("problem_id").get<std::string>();
  exp.source.fail_step = source.at("fail_step").get<int>();
  exp.source.pass_step = source.at("pass_step").get<int>();
  if (j.contains("route")) {
    exp.route = Route::algorithmic({j.at("route").at("primary").get<std::string>(),
                                    j.at("route").at("secondary").get<std::string>()});
  } else {
    exp.route = Route::general();
  }
  return exp;
}

inline nlohmann::ordered_json to_json(const MemoryBank& bank) {
  nlohmann::ordered_json j;
  j["format_version"] = kBankFormatVersion;
  j["hash_algorithm"] = bank.hash_algorithm;
  j["frozen"] = bank.frozen;
  if (bank.frozen) j["content_hash"] = bank.content_hash;
  j["general_cap"] = bank.general_cap;
  j["bucket_cap"] = bank.bucket_cap;
  j["general"] = nlohmann::ordered_json::array();
  for (const Experience& exp : bank.general) j["general"].push_back(to_json(exp));
  j["alg_buckets"] = nlohmann::ordered_json::array();
  for (const auto& [pair, bucket] : bank.alg_buckets) {
    nlohmann::ordered_json entry;
    entry["primary"] = pair.primary;
    entry["secondary"] = pair.secondary;
    entry["items"] = nlohmann::ordered_json::array();
    for (const Experience& exp : bucket) entry["items"].push_back(to_json(exp));
    j["alg_buckets"].push_back(entry);
  }
  return j;
}

inline MemoryBank bank_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<std::string>() != kBankFormatVersion) {
    throw parse_error("unknown bank format version");
  }
  MemoryBank bank;
  bank.hash_algorithm = j.at("hash_algorithm").get<std::string>();
  if (bank.hash_algorithm != kMemoryHashAlgorithm) {
    throw parse_error("unknown bank hash algorithm: " + bank.hash_algorithm);
  }
  if (j.contains("general_cap")) bank.general_cap = j.at("general_cap").get<std::size_t>();
  if (j.contains("bucket_cap")) bank.bucket_cap = j.at("bucket_cap").get<std::size_t>();
  for (const auto& item : j.at("general")) {
    bank.general.push_back(experience_from_json(item));
  }
  for (const auto& entry : j.at("alg_buckets")) {
    TaxonomyPair pair{entry.at("primary").get<std::string>(),
                      entry.at("secondary").get<std::string>()};
    auto& bucket = bank.alg_buckets[pair];
    for (const auto& item : entry.at("items")) {
      bucket.push_back(experience_from_json(item));
    }
  }
  if (j.at("frozen").get<bool>()) {
    bank = freeze(std::move(bank));
    if (j.contains("content_hash") &&
        j.at("content_hash").get<std::string>() != bank.content_hash) {
      throw parse_error("snapshot content hash mismatch");
    }
  }
  return bank;
}

inline void save_bank(const std::string& path, const MemoryBank& bank) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open bank file: " + path);
  out << to_json(bank).dump(2) << '\n';
}

inline MemoryBank load_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open bank file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& err) {
    throw parse_error(std::string("malformed bank file: ") + err.what());
  }
  return bank_from_json(j);
}

inline void save_audit_log(const std::string& path, const AuditLog& log) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open audit log: " + path);
  for (const AuditEntry& entry : log.entries) {
    nlohmann::ordered_json j;
    j["sequence"] = entry.sequence;
    j["problem_id"] = entry.problem_id;
    if (!entry.timestamp.empty()) j["timestamp"] = entry.timestamp;
    j["experience"] = to_json(entry.experience);
    out << j.dump() << '\n';
  }
}

// Taxonomy data file: {"primaries": [...], "secondaries": [{primary,
// secondary}, ...]}, validated to exactly 8 + 68 entries on load.
inline Taxonomy load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open taxonomy file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& err) {
    throw parse_error(std::string("malformed taxonomy file: ") + err.what());
  }
  std::vector<std::string> primaries =
      j.at("primaries").get<std::vector<std::string>>();
  std::vector<TaxonomyPair> secondaries;
  for (const auto& item : j.at("secondaries")) {
    secondaries.push_back({item.at("primary").get<std::string>(),
                           item.at("secondary").get<std::string>()});
  }
  return Taxonomy(std::move(primaries), std::move(secondaries));
}

// Per-problem artifact records for memory building: one JSON object per
// line, {"problem_id", "tag"?, "steps": [{step, pass, candidate, feedback}]}.
struct ProblemArtifacts {
  std::string problem_id;
  std::string tag;  // routing hint; empty routes to the general bank
  std::vector<StepArtifact> steps;
};

inline std::vector<ProblemArtifacts> load_artifacts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open artifacts file: " + path);
  std::vector<ProblemArtifacts> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      ProblemArtifacts artifacts;
      artifacts.problem_id = j.at("problem_id").get<std::string>();
      if (j.contains("tag")) artifacts.tag = j.at("tag").get<std::string>();
      for (const auto& step : j.at("steps")) {
        StepArtifact artifact;
        artifact.step = step.at("step").get<int>();
        artifact.pass = step.at("pass").get<bool>();
        if (step.contains("candidate")) {
          artifact.candidate_text = step.at("candidate").get<std::string>();
        }
        if (step.contains("feedback")) {
          artifact.feedback = step.at("feedback").get<std::string>();
        }
        artifacts.steps.push_back(std::move(artifact));
      }
      out.push_back(std::move(artifacts));
    } catch (const std::exception& err) {
      throw parse_error("artifacts line " + std::to_string(line_no) + ": " +
                        err.what());
    }
  }
  return out;
}

}  // namespace stopcert
