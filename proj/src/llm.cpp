#include "kevo/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

using nlohmann::json;

namespace kevo {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

std::string to_string(TemplateId id) {
    switch (id) {
        case TemplateId::summarize_idea: return "summarize_idea";
        case TemplateId::seed_init: return "seed_init";
        case TemplateId::eoh_step: return "eoh_step";
    }
    throw InvariantError("unknown template id");
}

TemplateId template_id_from_string(const std::string& name) {
    if (name == "summarize_idea") return TemplateId::summarize_idea;
    if (name == "seed_init") return TemplateId::seed_init;
    if (name == "eoh_step") return TemplateId::eoh_step;
    throw ConfigError("unknown prompt template: " + name);
}

namespace {

const std::string kOptimizerSystem =
    "You are an expert in high-performance computing kernel optimization, trying to reduce "
    "the runtime of a {operation} kernel in RISC-V. Make sure the kernel returns the correct "
    "result. The kernel will be run on {hardware_type} with {extensions}.\n"
    "\n"
    "Here is a reference implementation of the kernel:\n"
    "    {code_of_reference_implementation}";

const PromptTemplate kTemplates[] = {
    {TemplateId::summarize_idea,
     "You are an expert in high-performance computing kernel optimization and try to learn "
     "the existing kernel optimization methods.",
     "Based on the given materials from a well-maintained code repository, please summarize "
     "the key idea of the commit messages and code diff records.\n"
     "\n"
     "Your summarization should only contain the information and be no longer than 20 words "
     "and begin with an action verb (e.g., \"Apply\", \"Utilize\")\n"
     "    {commit_records}"},
    {TemplateId::seed_init, kOptimizerSystem,
     "Please modify the code by the given thought and its code examples.\n"
     "    {thought}\n"
     "    {code_examples}"},
    {TemplateId::eoh_step, kOptimizerSystem,
     "1. First, describe your new thought and main steps in one sentence. The description "
     "must be inside within boxed {{}}.\n"
     "\n"
     "2. Next, optimize the following kernel by your new thought with RISC-V extensions:\n"
     "    {kernel_code}\n"
     "\n"
     "Do not give additional explanations."},
};

std::string render_text(const std::string& text,
                        const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '{') {
            if (i + 1 < text.size() && text[i + 1] == '{') {
                out.push_back('{');
                ++i;
                continue;
            }
            std::size_t end = text.find('}', i + 1);
            if (end == std::string::npos)
                throw TemplateError("malformed placeholder: unbalanced '{'");
            std::string name = text.substr(i + 1, end - i - 1);
            auto it = bindings.find(name);
            if (it == bindings.end()) throw TemplateError("unbound placeholder: " + name);
            out += it->second;
            i = end;
        } else if (c == '}') {
            if (i + 1 < text.size() && text[i + 1] == '}') {
                out.push_back('}');
                ++i;
                continue;
            }
            throw TemplateError("malformed placeholder: unbalanced '}'");
        } else {
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace

const PromptTemplate& prompt_template(TemplateId id) {
    for (const auto& t : kTemplates)
        if (t.id == id) return t;
    throw InvariantError("unknown template id");
}

RenderedPrompt render_prompt(TemplateId id, const std::map<std::string, std::string>& bindings) {
    const auto& tpl = prompt_template(id);
    return {render_text(tpl.system, bindings), render_text(tpl.base, bindings)};
}

// ---------------------------------------------------------------------------
// Request hashing and replay log
// ---------------------------------------------------------------------------

std::string request_hash(const ChatRequest& request) {
    std::ostringstream canon;
    canon << request.system << '\x1f' << request.user << '\x1f' << request.temperature << '\x1f'
          << request.max_tokens;
    return fnv1a64_hex(canon.str());
}

namespace {

json request_to_json(const ChatRequest& r) {
    return json{{"system", r.system},
                {"user", r.user},
                {"temperature", r.temperature},
                {"max_tokens", r.max_tokens}};
}

ChatRequest request_from_json(const json& j) {
    ChatRequest r;
    r.system = j.at("system").get<std::string>();
    r.user = j.at("user").get<std::string>();
    r.temperature = j.at("temperature").get<double>();
    r.max_tokens = j.at("max_tokens").get<int>();
    return r;
}

json response_to_json(const ChatResponse& r) {
    return json{{"text", r.text},
                {"prompt_tokens", r.prompt_tokens},
                {"completion_tokens", r.completion_tokens},
                {"backend_id", r.backend_id}};
}

ChatResponse response_from_json(const json& j) {
    ChatResponse r;
    r.text = j.at("text").get<std::string>();
    r.prompt_tokens = j.at("prompt_tokens").get<int>();
    r.completion_tokens = j.at("completion_tokens").get<int>();
    r.backend_id = j.at("backend_id").get<std::string>();
    return r;
}

}  // namespace

ReplayLog::ReplayLog(std::filesystem::path path, std::function<std::int64_t()> clock)
    : path_(std::move(path)), clock_(std::move(clock)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void ReplayLog::append(const ChatRequest& request, const ChatResponse& response) {
    json line{{"hash", request_hash(request)},
              {"request", request_to_json(request)},
              {"response", response_to_json(response)},
              {"ts", clock_ ? clock_() : 0}};
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw EnvironmentError("cannot append to replay log: " + path_.string());
    out << line.dump() << '\n';
}

std::vector<ReplayRecord> ReplayLog::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EnvironmentError("cannot open replay log: " + path.string());
    std::vector<ReplayRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        ReplayRecord rec;
        rec.hash = j.at("hash").get<std::string>();
        rec.request = request_from_json(j.at("request"));
        rec.response = response_from_json(j.at("response"));
        rec.ts = j.at("ts").get<std::int64_t>();
        records.push_back(std::move(rec));
    }
    return records;
}

ReplayChatBackend::ReplayChatBackend(const std::filesystem::path& log_path) {
    for (auto& rec : ReplayLog::load(log_path)) responses_[rec.hash] = rec.response;
}

ChatResponse ReplayChatBackend::chat(const ChatRequest& request) {
    auto it = responses_.find(request_hash(request));
    if (it == responses_.end())
        throw ProtocolError("replay: no recorded response for request " + request_hash(request));
    return it->second;
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

void MockChatBackend::add_rule(std::string pattern, std::string reply) {
    std::lock_guard<std::mutex> lock(mutex_);
    rules_.push_back({std::move(pattern), std::move(reply), 0});
}

void MockChatBackend::add_failing_rule(std::string pattern, std::string reply, int failures) {
    std::lock_guard<std::mutex> lock(mutex_);
    rules_.push_back({std::move(pattern), std::move(reply), failures});
}

void MockChatBackend::set_handler(
    std::function<std::optional<std::string>(const ChatRequest&)> handler) {
    std::lock_guard<std::mutex> lock(mutex_);
    handler_ = std::move(handler);
}

ChatResponse MockChatBackend::chat(const ChatRequest& request) {
    calls_.fetch_add(1);
    std::lock_guard<std::mutex> lock(mutex_);
    std::string haystack = request.system + "\n" + request.user;
    for (auto& rule : rules_) {
        if (haystack.find(rule.pattern) == std::string::npos) continue;
        if (rule.failures_left > 0) {
            --rule.failures_left;
            throw TransportError("mock: scripted transport failure for '" + rule.pattern + "'");
        }
        return {rule.reply, 0, 0, id()};
    }
    if (handler_) {
        if (auto reply = handler_(request)) return {*reply, 0, 0, id()};
    }
    throw ProtocolError("mock: no scripted reply matches request");
}

// ---------------------------------------------------------------------------
// Synth backend
// ---------------------------------------------------------------------------

namespace {

const char* kSynthTechniques[] = {
    "loop unrolling",       "vector fused multiply-add", "cache blocking",
    "software prefetching", "branch predication",        "register tiling",
    "strided vector loads", "strength reduction",
};

std::string synth_kernel_source(std::uint64_t h) {
    // Latency in [700, 1299] against the 1000ns toy reference.
    std::uint64_t latency = 700 + h % 600;
    std::ostringstream src;
    src << "// MOCK_OUTPUT: ref\n";
    src << "// MOCK_LATENCY_NS: " << latency << "\n";
    src << "void kernel(const float* in, float* out, int n) { /* variant " << fnv1a64_hex(std::to_string(h))
        << " */ }\n";
    return src.str();
}

}  // namespace

ChatResponse SynthChatBackend::chat(const ChatRequest& request) {
    std::uint64_t h = fnv1a64(request.system + "\x1f" + request.user);
    const std::string technique = kSynthTechniques[h % (sizeof(kSynthTechniques) / sizeof(char*))];

    std::string text;
    if (request.user.find("summarize the key idea") != std::string::npos) {
        text = "Apply " + technique + " to reduce kernel runtime";
    } else if (request.user.find("description must be inside within boxed") != std::string::npos) {
        text = "boxed {Apply " + technique + " to the hot loop}\n```c\n" + synth_kernel_source(h) +
               "```\n";
    } else if (request.user.find("Please modify the code by the given thought") !=
               std::string::npos) {
        text = synth_kernel_source(h);
    } else {
        text = "yes";
    }
    return {text, 0, 0, id()};
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

ChatGateway::ChatGateway(ChatBackend& backend, RetryPolicy policy, ReplayLog* replay_log)
    : backend_(backend), policy_(policy), replay_log_(replay_log) {}

ChatResponse ChatGateway::chat(const ChatRequest& request) {
    int attempts = std::max(1, policy_.max_attempts);
    for (int attempt = 0;; ++attempt) {
        try {
            ChatResponse response = backend_.chat(request);
            calls_.fetch_add(1);
            if (replay_log_) replay_log_->append(request, response);
            if (trim(response.text).empty())
                throw ProtocolError("chat backend returned an empty response");
            return response;
        } catch (const TransportError&) {
            if (attempt + 1 >= attempts) throw;
            if (policy_.base_delay_ms > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(policy_.base_delay_ms << attempt));
        }
    }
}

// ---------------------------------------------------------------------------
// Embedding backends
// ---------------------------------------------------------------------------

Vec embed_one(EmbeddingBackend& backend, const std::string& text) {
    return backend.embed({text}).at(0);
}

HashEmbeddingBackend::HashEmbeddingBackend(int dim) : dim_(dim) {
    if (dim < 1) throw ConfigError("embedding dimension must be positive");
}

std::vector<Vec> HashEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    std::vector<Vec> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        Vec v = Vec::Zero(dim_);
        std::string lower = to_lower(text);
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            v(static_cast<Eigen::Index>(fnv1a64(token) % static_cast<std::uint64_t>(dim_))) += 1.0;
            token.clear();
        };
        for (char c : lower) {
            if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
                token.push_back(c);
            else
                flush();
        }
        flush();
        out.push_back(l2_normalized(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP backends
// ---------------------------------------------------------------------------

namespace {

httplib::Headers auth_headers(const HttpBackendConfig& config) {
    httplib::Headers headers;
    if (!config.api_key_env.empty()) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (!key) throw ConfigError("auth env var not set: " + config.api_key_env);
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    return headers;
}

json post_json(const HttpBackendConfig& config, const std::string& path, const json& body) {
    httplib::Client client(config.endpoint);
    client.set_connection_timeout(0, config.timeout_ms * 1000);
    client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
    auto res = client.Post(path, auth_headers(config), body.dump(), "application/json");
    if (!res) throw TransportError("http: no response from " + config.endpoint + path);
    if (res->status >= 500)
        throw TransportError("http: status " + std::to_string(res->status) + " from " + path);
    if (res->status != 200)
        throw ProtocolError("http: status " + std::to_string(res->status) + " from " + path +
                            ": " + res->body);
    return json::parse(res->body);
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("chat backend endpoint not configured");
}

ChatResponse HttpChatBackend::chat(const ChatRequest& request) {
    json body{{"model", config_.model},
              {"messages",
               json::array({json{{"role", "system"}, {"content", request.system}},
                            json{{"role", "user"}, {"content", request.user}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    json reply = post_json(config_, "/v1/chat/completions", body);
    ChatResponse response;
    try {
        response.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("chat response malformed: ") + e.what());
    }
    if (reply.contains("usage")) {
        response.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
        response.completion_tokens = reply["usage"].value("completion_tokens", 0);
    }
    response.backend_id = id();
    return response;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("embedding backend endpoint not configured");
    if (config_.embed_dim < 1) throw ConfigError("embedding backend dimension not configured");
}

std::vector<Vec> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    json body{{"model", config_.model}, {"input", texts}};
    json reply = post_json(config_, "/v1/embeddings", body);
    std::vector<Vec> out;
    try {
        const auto& data = reply.at("data");
        out.reserve(data.size());
        for (const auto& item : data) {
            const auto& values = item.at("embedding");
            Vec v(static_cast<Eigen::Index>(values.size()));
            for (std::size_t i = 0; i < values.size(); ++i)
                v(static_cast<Eigen::Index>(i)) = values[i].get<double>();
            if (v.size() != config_.embed_dim)
                throw InvariantError("embedding dimension mismatch: got " +
                                     std::to_string(v.size()) + ", configured " +
                                     std::to_string(config_.embed_dim));
            out.push_back(l2_normalized(v));
        }
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("embeddings response malformed: ") + e.what());
    }
    if (out.size() != texts.size())
        throw ProtocolError("embeddings response count mismatch");
    return out;
}

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

Extracted extract_boxed_description(const std::string& llm_text) {
    std::size_t open = llm_text.find('{');
    if (open == std::string::npos)
        throw ExtractionError("no boxed description span in response");
    int depth = 0;
    std::size_t close = std::string::npos;
    for (std::size_t i = open; i < llm_text.size(); ++i) {
        if (llm_text[i] == '{') ++depth;
        if (llm_text[i] == '}') {
            --depth;
            if (depth == 0) {
                close = i;
                break;
            }
        }
    }
    if (close == std::string::npos)
        throw ExtractionError("unbalanced boxed description span in response");

    Extracted result;
    result.description = trim(llm_text.substr(open + 1, close - open - 1));
    if (result.description.empty()) throw ExtractionError("empty boxed description");
    result.code = extract_code_block(llm_text.substr(close + 1));
    return result;
}

std::string extract_code_block(const std::string& llm_text) {
    std::size_t fence = llm_text.find("```");
    if (fence != std::string::npos) {
        std::size_t body = llm_text.find('\n', fence + 3);
        if (body == std::string::npos) throw ExtractionError("malformed code fence");
        std::size_t closing = llm_text.find("```", body + 1);
        std::string code = closing == std::string::npos
                               ? llm_text.substr(body + 1)
                               : llm_text.substr(body + 1, closing - body - 1);
        if (trim(code).empty()) throw ExtractionError("empty fenced code block");
        return code;
    }
    std::string raw = trim(llm_text);
    if (raw.empty()) throw ExtractionError("no code in response");
    return raw;
}

}  // namespace kevo
