#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kevo/common.hpp"
#include "kevo/embedding.hpp"

namespace kevo {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

enum class TemplateId { summarize_idea, seed_init, eoh_step };

std::string to_string(TemplateId id);
TemplateId template_id_from_string(const std::string& name);

struct PromptTemplate {
    TemplateId id;
    std::string system;  // `{name}` placeholders; `{{` / `}}` are literal braces
    std::string base;
};

const PromptTemplate& prompt_template(TemplateId id);

struct RenderedPrompt {
    std::string system;
    std::string user;
};

/// Substitutes every `{name}` placeholder from bindings. Throws TemplateError
/// naming the placeholder when a slot is unbound; the output never contains a
/// residual placeholder marker.
RenderedPrompt render_prompt(TemplateId id, const std::map<std::string, std::string>& bindings);

// ---------------------------------------------------------------------------
// Chat backends
// ---------------------------------------------------------------------------

struct ChatRequest {
    std::string system;
    std::string user;
    double temperature = 0.7;
    int max_tokens = 4096;
};

struct ChatResponse {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    std::string backend_id;
};

/// Stable hash of the request content; the replay-log key.
std::string request_hash(const ChatRequest& request);

class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
    virtual std::string id() const = 0;
};

/// Scripted backend for hermetic tests. Rules are (substring pattern, reply)
/// pairs tried in order; an optional handler runs when no rule matches. An
/// unscripted request raises ProtocolError. Thread-safe.
class MockChatBackend : public ChatBackend {
  public:
    void add_rule(std::string pattern, std::string reply);
    /// Makes the next `failures` matching calls throw TransportError before
    /// the rule starts answering; exercises the retry path.
    void add_failing_rule(std::string pattern, std::string reply, int failures);
    void set_handler(std::function<std::optional<std::string>(const ChatRequest&)> handler);

    ChatResponse chat(const ChatRequest& request) override;
    std::string id() const override { return "mock"; }
    int calls() const { return calls_.load(); }

  private:
    struct Rule {
        std::string pattern;
        std::string reply;
        int failures_left = 0;
    };
    std::vector<Rule> rules_;
    std::function<std::optional<std::string>(const ChatRequest&)> handler_;
    std::atomic<int> calls_{0};
    mutable std::mutex mutex_;
};

/// Deterministic kernel-synthesizing backend: answers the three prompt
/// families with well-formed replies derived only from the request hash.
/// Lets a whole run execute offline with no script table.
class SynthChatBackend : public ChatBackend {
  public:
    ChatResponse chat(const ChatRequest& request) override;
    std::string id() const override { return "synth"; }
};

// ---------------------------------------------------------------------------
// Replay log
// ---------------------------------------------------------------------------

struct ReplayRecord {
    std::string hash;
    ChatRequest request;
    ChatResponse response;
    std::int64_t ts = 0;
};

/// Append-only JSONL log of every chat exchange. Writer is serialized.
class ReplayLog {
  public:
    explicit ReplayLog(std::filesystem::path path, std::function<std::int64_t()> clock = nullptr);
    void append(const ChatRequest& request, const ChatResponse& response);
    const std::filesystem::path& path() const { return path_; }

    static std::vector<ReplayRecord> load(const std::filesystem::path& path);

  private:
    std::filesystem::path path_;
    std::function<std::int64_t()> clock_;
    std::mutex mutex_;
};

/// Serves responses recorded in a replay log, keyed by request hash.
/// A request absent from the log raises ProtocolError.
class ReplayChatBackend : public ChatBackend {
  public:
    explicit ReplayChatBackend(const std::filesystem::path& log_path);
    ChatResponse chat(const ChatRequest& request) override;
    std::string id() const override { return "replay"; }

  private:
    std::map<std::string, ChatResponse> responses_;
};

// ---------------------------------------------------------------------------
// Gateway: retry + replay logging around a backend
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 3;
    int base_delay_ms = 250;  // doubled per attempt; 0 in tests
};

class ChatGateway {
  public:
    explicit ChatGateway(ChatBackend& backend, RetryPolicy policy = {},
                         ReplayLog* replay_log = nullptr);

    /// Retries TransportError with exponential backoff; an empty response
    /// text is a ProtocolError. Every completed exchange is appended to the
    /// replay log.
    ChatResponse chat(const ChatRequest& request);

    int calls() const { return calls_.load(); }

  private:
    ChatBackend& backend_;
    RetryPolicy policy_;
    ReplayLog* replay_log_;
    std::atomic<int> calls_{0};
};

// ---------------------------------------------------------------------------
// Embedding backends
// ---------------------------------------------------------------------------

class EmbeddingBackend {
  public:
    virtual ~EmbeddingBackend() = default;
    /// One unit vector per input text, order preserving, fixed dimension.
    virtual std::vector<Vec> embed(const std::vector<std::string>& texts) = 0;
    virtual int dimension() const = 0;
};

Vec embed_one(EmbeddingBackend& backend, const std::string& text);

/// Deterministic mock embedder. The hash is part of the contract so tests can
/// evaluate it by hand:
///   tokens  = maximal [a-z0-9]+ runs of the lowercased text
///   bucket  = fnv1a64(token) % dim, weight[bucket] += 1 per occurrence
///   result  = l2-normalized weight vector (empty text -> first basis vector)
class HashEmbeddingBackend : public EmbeddingBackend {
  public:
    explicit HashEmbeddingBackend(int dim = 64);
    std::vector<Vec> embed(const std::vector<std::string>& texts) override;
    int dimension() const override { return dim_; }

  private:
    int dim_;
};

// ---------------------------------------------------------------------------
// HTTP backends (standard chat-completions / embeddings wire protocol)
// ---------------------------------------------------------------------------

struct HttpBackendConfig {
    std::string endpoint;     // e.g. "http://host:8000"
    std::string model;
    std::string api_key_env;  // env var holding the bearer token; may be empty
    int timeout_ms = 60000;
    int embed_dim = 0;        // required for the embedding backend
};

class HttpChatBackend : public ChatBackend {
  public:
    explicit HttpChatBackend(HttpBackendConfig config);
    ChatResponse chat(const ChatRequest& request) override;
    std::string id() const override { return "http:" + config_.model; }

  private:
    HttpBackendConfig config_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
  public:
    explicit HttpEmbeddingBackend(HttpBackendConfig config);
    std::vector<Vec> embed(const std::vector<std::string>& texts) override;
    int dimension() const override { return config_.embed_dim; }

  private:
    HttpBackendConfig config_;
};

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

struct Extracted {
    std::string description;
    std::string code;
};

/// Splits an eoh-step reply into (description, code): the description is the
/// first balanced-brace span (outermost on nesting), the code the first
/// fenced block or, failing that, the raw text after the span. Either part
/// missing raises ExtractionError.
Extracted extract_boxed_description(const std::string& llm_text);

/// First fenced code block, or the whole trimmed text when unfenced.
/// Empty result raises ExtractionError.
std::string extract_code_block(const std::string& llm_text);

}  // namespace kevo
