#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kevo/common.hpp"
#include "kevo/embedding.hpp"
#include "kevo/llm.hpp"

namespace kevo {

struct RawCommit {
    std::string id;
    std::int64_t ts = 0;
    std::string message;
    std::string diff;
    bool unclassified = false;  // classifier unreachable; kept fail-open
};

struct Commit {
    RawCommit raw;
    Vec embedding;
    double effectiveness = 0.0;
    bool unwindowed = false;  // outside every PPE window; neutral weight
};

struct PpeRecord {
    std::int64_t ts = 0;
    double perf = 0.0;
};

struct FilterRules {
    std::vector<std::string> deny_patterns;  // regex, matched case-insensitively
    bool use_llm_classifier = false;

    static FilterRules defaults();
    static FilterRules from_json_file(const std::filesystem::path& path);
};

/// Parses the line-oriented commit-log export: one JSON object per line with
/// fields `id`, `ts`, `msg`, `diff`. Malformed records raise ParseError
/// naming the byte offset; duplicate ids raise ConflictError.
std::vector<RawCommit> ingest_commits(std::istream& log_stream);

/// A commit survives iff no deny-pattern matches its message and, when the
/// classifier is enabled, the LLM labels it optimization-relevant. Classifier
/// transport failure keeps the commit and flags it `unclassified`.
std::vector<RawCommit> filter_commits(const std::vector<RawCommit>& commits,
                                      const FilterRules& rules,
                                      ChatGateway* classifier = nullptr);

std::vector<Commit> embed_messages(const std::vector<RawCommit>& commits,
                                   EmbeddingBackend& embedder);

struct EffectivenessOptions {
    /// Sign convention for the PPE performance index; set per data source.
    bool higher_is_better = true;
    /// Per-commit attribution weight inside a window; defaults to uniform.
    std::function<double(const Commit&)> weight;
};

/// Splits each PPE window's relative improvement equally (or per the weight
/// hook) over the commits merged inside it. Commits outside all windows get
/// zero effectiveness and the `unwindowed` flag. Length and order preserved.
std::vector<Commit> estimate_effectiveness(std::vector<Commit> commits,
                                           const std::vector<PpeRecord>& ppes,
                                           const EffectivenessOptions& options = {});

/// CSV with header `ts,perf`.
std::vector<PpeRecord> load_ppe_csv(std::istream& in);

// Processed-commit store (versioned JSON document).
void save_commits(const std::filesystem::path& path, const std::vector<Commit>& commits,
                  int embedding_dim);
std::vector<Commit> load_commits(const std::filesystem::path& path, int* embedding_dim = nullptr);

}  // namespace kevo
