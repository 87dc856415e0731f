#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kevo/common.hpp"
#include "kevo/embedding.hpp"
#include "kevo/llm.hpp"
#include "kevo/miner.hpp"

namespace kevo {

/// Actionable optimization technique: a concise description, the concatenated
/// diffs of its member commits, and an efficiency aggregated from them.
struct Thought {
    std::string id;
    std::string description;
    std::string code_examples;
    double efficiency = 0.0;
    std::vector<std::string> member_commit_ids;
    Vec embedding;
    std::string category;     // seed metadata; empty for distilled thoughts
    bool unvalidated = false; // description fell back after failing validation
};

/// General principle plus the thoughts it owns.
struct Idea {
    std::string id;
    std::string principle;
    std::vector<Thought> thoughts;
};

struct PoolProvenance {
    std::string source_library;
    double tau_theta = 0.05;
    int idea_count = 8;
    int target_cluster_size = 8;
    std::uint64_t seed = 0;
};

struct IdeaPool {
    std::vector<Idea> ideas;
    int embedding_dim = 0;
    PoolProvenance provenance;

    std::size_t thought_count() const;
    const Thought* find_thought(const std::string& thought_id) const;
    Thought* find_thought(const std::string& thought_id);
};

struct Assignment {
    std::map<std::string, std::string> commit_to_thought;
    std::vector<std::string> unassigned;

    bool operator==(const Assignment&) const = default;
};

/// The twenty seed thought descriptions, grouped by category in metadata.
/// Efficiency unset, code empty.
std::vector<Thought> init_thought_seeds();

/// Maps each commit to the argmin cosine-distance thought iff that distance
/// is below tau. Ties break to the lowest thought id.
Assignment assign_commits(const std::vector<Thought>& thoughts,
                          const std::vector<Commit>& commits, double tau);

/// K-means over message embeddings; deterministic under a fixed seed.
std::vector<std::vector<Commit>> cluster_unassigned(const std::vector<Commit>& commits,
                                                    int cluster_count, std::uint64_t seed);

struct DistillOptions {
    int max_words = 20;
    std::vector<std::string> verb_lexicon;  // empty -> default lexicon
    double llm_temperature = 0.2;
    int max_tokens = 256;
};

const std::vector<std::string>& default_verb_lexicon();

/// One thought per cluster, summarized by the LLM and validated (word bound,
/// action-verb start). A failing description is re-prompted once, then falls
/// back to the truncated first commit message flagged `unvalidated`.
std::vector<Thought> distill_thoughts(const std::vector<std::vector<Commit>>& clusters,
                                      ChatGateway& llm, const DistillOptions& options = {});

struct RefineOptions {
    double tau = 0.05;
    int max_rounds = 10;
    int target_cluster_size = 8;  // k = ceil(unassigned / target)
    std::uint64_t seed = 0;
    DistillOptions distill;
};

struct RefineResult {
    std::vector<Thought> thoughts;
    Assignment assignment;
    bool converged = false;
    int rounds = 0;  // assignment passes performed
};

/// The abstraction loop: assign, cluster the unassigned, re-distill every
/// group, repeat until each commit sits within tau of a thought and the
/// pairing is stable, or max_rounds is hit (result flagged unconverged).
RefineResult refine_pairing(const std::vector<Commit>& commits, std::vector<Thought> seeds,
                            EmbeddingBackend& embedder, ChatGateway& llm,
                            const RefineOptions& options);

struct FinalizeOptions {
    std::size_t code_budget_bytes = 16384;
    std::string truncation_marker = "\n[truncated]";
};

/// Completes the thought triplets: code examples concatenated from member
/// diffs in timestamp order (budget-truncated), efficiency = exact sum of
/// member commit effectiveness.
std::vector<Thought> finalize_thoughts(const Assignment& assignment,
                                       const std::vector<Commit>& commits,
                                       std::vector<Thought> thoughts,
                                       const FinalizeOptions& options = {});

/// Clusters thoughts by description embedding and extracts one principle per
/// cluster; the triple-nested pool structure (ideas own thoughts own commits).
IdeaPool distill_ideas(std::vector<Thought> thoughts, int idea_count, std::uint64_t seed,
                       ChatGateway& llm, EmbeddingBackend& embedder,
                       const DistillOptions& options = {});

const Idea& sample_idea(const IdeaPool& pool, Rng& rng);

struct SampledThoughts {
    std::vector<Thought> thoughts;
    bool with_replacement = false;  // count exceeded the idea's thoughts
};

/// Softmax over efficiencies (p ∝ exp(φ/temperature)); without replacement
/// while the idea has enough thoughts, with replacement (flagged) otherwise.
SampledThoughts sample_thoughts(const Idea& idea, std::size_t count, double temperature,
                                Rng& rng);

struct ThoughtUsage {
    std::string thought_id;
    double speedup_delta = 0.0;
};

/// EMA update: φ ← (1−alpha)·φ + alpha·δ for each used thought.
void update_efficiencies(IdeaPool& pool, const std::vector<ThoughtUsage>& usage, double alpha);

// Versioned pool document; round-trips bit-identically.
std::string pool_to_json_text(const IdeaPool& pool);
IdeaPool pool_from_json_text(const std::string& text);
void save_pool(const std::filesystem::path& path, const IdeaPool& pool);
IdeaPool load_pool(const std::filesystem::path& path);

/// Structural equality with float fields compared by bit pattern.
bool structural_equal(const IdeaPool& a, const IdeaPool& b);

}  // namespace kevo
