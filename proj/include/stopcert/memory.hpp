#pragma once

// Frozen experience-bank protocol.
//
// Fail-to-pass triplets extracted from observable validator outcomes are
// routed into a general bank (cap 20) or per-taxonomy algorithmic buckets
// (cap 10 each), deduplicated on insert, and frozen into a content-hashed
// snapshot. Frozen snapshots reject every retrievable write; audit-only
// recording appends to a separate log and leaves the snapshot bit-identical.
// Retrieval is deterministic: insertion order, first k.
//
// Routing and deduplication are pluggable strategies with deterministic
// defaults (tag rule-table, exact match on cause+fix). The snapshot hash is
// FNV-1a 64 over a canonical serialization with normalized line endings;
// the algorithm tag travels with every snapshot file.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stopcert/taxonomy.hpp"

namespace stopcert {

inline constexpr const char* kMemoryHashAlgorithm = "fnv1a64-v1";
inline constexpr std::size_t kGeneralBankCap = 20;
inline constexpr std::size_t kAlgorithmBucketCap = 10;

struct frozen_write_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Route {
  bool is_general = true;
  TaxonomyPair pair;  // meaningful when !is_general

  static Route general() { return {true, {}}; }
  static Route algorithmic(TaxonomyPair pair) {
    return {false, std::move(pair)};
  }
  bool operator==(const Route&) const = default;
};

struct ExperienceSource {
  std::string problem_id;
  int fail_step = 0;
  int pass_step = 0;
};

struct Experience {
  std::string error_context;
  std::string error_cause;
  std::string fix_method;
  std::string fix_result;
  std::string key_insight;
  ExperienceSource source;
  Route route = Route::general();

  void validate() const {
    if (error_context.empty() || error_cause.empty() || fix_method.empty() ||
        fix_result.empty() || key_insight.empty()) {
      throw std::invalid_argument("experience fields must be non-empty");
    }
    if (source.pass_step <= source.fail_step) {
      throw std::invalid_argument("experience pass step must follow fail step");
    }
  }
};

// --------------------------------------------------------------------------
// Triplet extraction from observable per-step artifacts.
// --------------------------------------------------------------------------

struct StepArtifact {
  int step = 0;
  bool pass = false;  // observable validator outcome, never the hidden judge
  std::string candidate_text;
  std::string feedback;
};

using Summarizer = std::function<Experience(
    const std::string& problem_id, const StepArtifact& fail,
    const StepArtifact& pass)>;

// Pass-through summarizer: copies the observable artifacts into the
// experience fields without interpretation.
inline Experience passthrough_summarizer(const std::string& problem_id,
                                         const StepArtifact& fail,
                                         const StepArtifact& pass) {
  Experience exp;
  exp.error_context = fail.candidate_text.empty() ? std::string("step ") +
                                                        std::to_string(fail.step)
                                                  : fail.candidate_text;
  exp.error_cause = fail.feedback.empty() ? "unlabeled failure" : fail.feedback;
  exp.fix_method = pass.candidate_text.empty() ? std::string("step ") +
                                                     std::to_string(pass.step)
                                               : pass.candidate_text;
  exp.fix_result = "validated pass at step " + std::to_string(pass.step);
  exp.key_insight = exp.error_cause + " -> " + exp.fix_method;
  exp.source = {problem_id, fail.step, pass.step};
  return exp;
}

// Pairs the earliest failing step with its first later observable pass.
inline std::optional<Experience> extract_triplet(
    const std::string& problem_id, std::span<const StepArtifact> steps,
    const Summarizer& summarize = passthrough_summarizer) {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].pass) continue;
    for (std::size_t j = i + 1; j < steps.size(); ++j) {
      if (steps[j].pass) {
        Experience exp = summarize(problem_id, steps[i], steps[j]);
        exp.validate();
        return exp;
      }
    }
    // earliest failure has no later pass; later failures cannot either
    return std::nullopt;
  }
  return std::nullopt;
}

// --------------------------------------------------------------------------
// Routing.
// --------------------------------------------------------------------------

using Classifier = std::function<Route(const Experience&)>;

// Rule-table router on a provided tag. General-purpose error keywords route
// to the general bank; anything matching a taxonomy secondary routes to its
// bucket. Unknown tags go general, or raise in strict mode.
inline Route route_tag(const Taxonomy& taxonomy, const std::string& tag,
                       bool strict = false) {
  static const std::vector<std::string> general_keywords = {
      "syntax", "semicolon", "brace", "typo", "spelling", "header", "include",
      "import", "undeclared", "uninitialized", "type conversion", "cast",
      "input/output", "output format", "input format", "memory management"};
  std::string folded;
  folded.reserve(tag.size());
  for (char c : tag) {
    folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (const std::string& keyword : general_keywords) {
    if (folded.find(keyword) != std::string::npos) return Route::general();
  }
  if (auto pair = taxonomy.find_secondary(tag)) {
    return Route::algorithmic(*pair);
  }
  if (strict) throw std::invalid_argument("unknown routing tag: " + tag);
  return Route::general();
}

// Applies a classifier and checks that algorithmic routes name a valid
// taxonomy pair.
inline Route route(const Experience& exp, const Classifier& classify,
                   const Taxonomy& taxonomy = Taxonomy::builtin()) {
  const Route decision = classify(exp);
  if (!decision.is_general &&
      !taxonomy.has_pair(decision.pair.primary, decision.pair.secondary)) {
    throw std::invalid_argument("route names an unknown taxonomy pair: " +
                                decision.pair.primary + "/" +
                                decision.pair.secondary);
  }
  return decision;
}

// --------------------------------------------------------------------------
// Banks, snapshots and the audit log.
// --------------------------------------------------------------------------

using DedupPredicate =
    std::function<bool(const Experience&, const Experience&)>;

// Default deduplication: exact match on (error_cause, fix_method).
inline bool default_dedup(const Experience& a, const Experience& b) {
  return a.error_cause == b.error_cause && a.fix_method == b.fix_method;
}

enum class InsertOutcome { Inserted, RejectedDuplicate, RejectedCapacity };

inline const char* to_string(InsertOutcome outcome) {
  switch (outcome) {
    case InsertOutcome::Inserted: return "inserted";
    case InsertOutcome::RejectedDuplicate: return "rejected-duplicate";
    case InsertOutcome::RejectedCapacity: return "evicted-for-capacity";
  }
  return "unknown";
}

struct MemoryBank {
  std::vector<Experience> general;
  std::map<TaxonomyPair, std::vector<Experience>> alg_buckets;
  std::size_t general_cap = kGeneralBankCap;
  std::size_t bucket_cap = kAlgorithmBucketCap;
  bool frozen = false;
  std::string content_hash;  // set when frozen
  std::string hash_algorithm = kMemoryHashAlgorithm;

  std::size_t total_items() const {
    std::size_t n = general.size();
    for (const auto& [pair, bucket] : alg_buckets) n += bucket.size();
    return n;
  }
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xCBF29CE484222325ull) {
  std::uint64_t hash = seed;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001B3ull;
  }
  return hash;
}

inline void append_normalized(std::string& out, const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      out.push_back('\n');
    } else {
      out.push_back(text[i]);
    }
  }
  out.push_back('\x1f');  // field separator
}

inline void append_experience(std::string& out, const Experience& exp) {
  append_normalized(out, exp.error_context);
  append_normalized(out, exp.error_cause);
  append_normalized(out, exp.fix_method);
  append_normalized(out, exp.fix_result);
  append_normalized(out, exp.key_insight);
  append_normalized(out, exp.source.problem_id);
  out += std::to_string(exp.source.fail_step);
  out.push_back('\x1f');
  out += std::to_string(exp.source.pass_step);
  out.push_back('\x1e');  // record separator
}

}  // namespace detail

// Canonical serialization: fixed field order, normalized line endings,
// general bank first, then buckets in taxonomy-pair order.
inline std::string canonical_serialization(const MemoryBank& bank) {
  std::string out;
  out += kMemoryHashAlgorithm;
  out.push_back('\x1e');
  out += "general";
  out.push_back('\x1e');
  for (const Experience& exp : bank.general) detail::append_experience(out, exp);
  for (const auto& [pair, bucket] : bank.alg_buckets) {
    out += pair.primary;
    out.push_back('\x1f');
    out += pair.secondary;
    out.push_back('\x1e');
    for (const Experience& exp : bucket) detail::append_experience(out, exp);
  }
  return out;
}

inline std::string content_hash(const MemoryBank& bank) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(
                    detail::fnv1a64(canonical_serialization(bank))));
  return buffer;
}

// Insert with dedup and capacity control. The default capacity policy keeps
// the resident items and rejects the newcomer.
inline InsertOutcome insert(MemoryBank& bank, const Experience& exp,
                            const DedupPredicate& duplicate = default_dedup) {
  if (bank.frozen) {
    throw frozen_write_error("insert into frozen snapshot rejected");
  }
  exp.validate();
  std::vector<Experience>* target = nullptr;
  std::size_t cap = 0;
  if (exp.route.is_general) {
    target = &bank.general;
    cap = bank.general_cap;
  } else {
    target = &bank.alg_buckets[exp.route.pair];
    cap = bank.bucket_cap;
  }
  for (const Experience& existing : *target) {
    if (duplicate(existing, exp)) return InsertOutcome::RejectedDuplicate;
  }
  if (target->size() >= cap) return InsertOutcome::RejectedCapacity;
  target->push_back(exp);
  return InsertOutcome::Inserted;
}

// Freezing pins the content hash and rejects all later retrievable writes.
// Idempotent: freezing a frozen bank returns the same hash.
inline MemoryBank freeze(MemoryBank bank) {
  bank.frozen = true;
  bank.content_hash = content_hash(bank);
  return bank;
}

struct AuditEntry {
  Experience experience;
  std::string problem_id;
  std::uint64_t sequence = 0;
  std::string timestamp;  // caller-supplied; empty keeps output deterministic
};

struct AuditLog {
  std::vector<AuditEntry> entries;  // append-only, never consulted by retrieval

  void append(Experience exp, std::string problem_id,
              std::string timestamp = {}) {
    const std::uint64_t seq = entries.size();
    entries.push_back(
        {std::move(exp), std::move(problem_id), seq, std::move(timestamp)});
  }
};

enum class RecordMode { AuditOnly, Deploy };

// Evaluation-time recording. Audit-only leaves the snapshot bit-identical;
// deploy mode inserts into an unfrozen bank.

inline std::optional<InsertOutcome> record(RecordMode mode, MemoryBank& bank,
                                           AuditLog& log, const Experience& exp,
                                           std::string timestamp = {}) {
  if (mode == RecordMode::AuditOnly) {
    log.append(exp, exp.source.problem_id, std::move(timestamp));
    return std::nullopt;
  }
  if (bank.frozen) {
    throw frozen_write_error("deploy write against frozen snapshot");
  }
  return insert(bank, exp);
}

// --------------------------------------------------------------------------
// Retrieval: deterministic, insertion order, budget-capped.
// --------------------------------------------------------------------------

inline std::vector<Experience> retrieve_general(const MemoryBank& bank,
                                                std::size_t k_gen) {
  const std::size_t n = std::min(k_gen, bank.general.size());
  return {bank.general.begin(),
          bank.general.begin() + static_cast<std::ptrdiff_t>(n)};
}

inline std::vector<Experience> retrieve_algorithmic(
    const MemoryBank& bank, const TaxonomyPair& pair, std::size_t l_alg,
    const Taxonomy& taxonomy = Taxonomy::builtin()) {
  if (!taxonomy.has_pair(pair.primary, pair.secondary)) {
    throw std::invalid_argument("retrieve: unknown taxonomy pair " +
                                pair.primary + "/" + pair.secondary);
  }
  const auto it = bank.alg_buckets.find(pair);
  if (it == bank.alg_buckets.end()) return {};
  const std::size_t n = std::min(l_alg, it->second.size());
  return {it->second.begin(),
          it->second.begin() + static_cast<std::ptrdiff_t>(n)};
}

// Plain-text concatenation of retrieved general experiences, the format stub
// used for prompt injection.
inline std::string format_general(const MemoryBank& bank, std::size_t k_gen) {
  std::string out;
  for (const Experience& exp : retrieve_general(bank, k_gen)) {
    out += "- " + exp.key_insight + "\n";
  }
  return out;
}

}  // namespace stopcert
