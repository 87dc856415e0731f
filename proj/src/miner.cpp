#include "kevo/miner.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"

using nlohmann::json;

namespace kevo {

FilterRules FilterRules::defaults() {
    FilterRules rules;
    rules.deny_patterns = {
        R"(\bversion\b)", R"(\bbump\b)",      R"(\bformat(ting|ted)?\b)",
        R"(\bstyle\b)",   R"(\btypo\b)",      R"(\bwhitespace\b)",
        R"(\bci\b)",      R"(\bdocs?\b)",     R"(\breadme\b)",
        R"(\bchangelog\b)", R"(\blicense\b)", R"(\bmerge (branch|pull))",
    };
    rules.use_llm_classifier = false;
    return rules;
}

FilterRules FilterRules::from_json_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("filter rules " + path.string() + ": " + e.what());
    }
    FilterRules rules;
    for (const auto& p : j.at("deny_patterns")) rules.deny_patterns.push_back(p.get<std::string>());
    rules.use_llm_classifier = j.value("use_llm_classifier", false);
    return rules;
}

std::vector<RawCommit> ingest_commits(std::istream& log_stream) {
    std::vector<RawCommit> commits;
    std::set<std::string> seen;
    std::string line;
    std::size_t offset = 0;
    std::size_t line_no = 0;
    while (std::getline(log_stream, line)) {
        ++line_no;
        std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (trim(line).empty()) continue;

        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("commit log: malformed record at byte offset " +
                             std::to_string(line_offset) + " (line " + std::to_string(line_no) +
                             "): " + e.what());
        }
        RawCommit commit;
        try {
            commit.id = record.at("id").get<std::string>();
            commit.ts = record.at("ts").get<std::int64_t>();
            commit.message = record.at("msg").get<std::string>();
            commit.diff = record.at("diff").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError("commit log: missing field at byte offset " +
                             std::to_string(line_offset) + " (line " + std::to_string(line_no) +
                             "): " + e.what());
        }
        if (commit.id.empty())
            throw ParseError("commit log: empty id at byte offset " + std::to_string(line_offset));
        if (!seen.insert(commit.id).second)
            throw ConflictError("commit log: duplicate id '" + commit.id + "' at byte offset " +
                                std::to_string(line_offset));
        commits.push_back(std::move(commit));
    }
    return commits;
}

std::vector<RawCommit> filter_commits(const std::vector<RawCommit>& commits,
                                      const FilterRules& rules, ChatGateway* classifier) {
    if (rules.deny_patterns.empty())
        throw ConfigError("filter rules must contain at least the default deny-patterns");

    std::vector<std::regex> patterns;
    patterns.reserve(rules.deny_patterns.size());
    for (const auto& p : rules.deny_patterns)
        patterns.emplace_back(p, std::regex::ECMAScript | std::regex::icase);

    std::vector<RawCommit> kept;
    for (const auto& commit : commits) {
        bool denied = std::any_of(patterns.begin(), patterns.end(), [&](const std::regex& re) {
            return std::regex_search(commit.message, re);
        });
        if (denied) continue;

        RawCommit out = commit;
        if (rules.use_llm_classifier && classifier) {
            ChatRequest req;
            req.system =
                "You are a software engineer triaging a kernel library's commit history.";
            req.user =
                "Does the following commit message describe a change relevant to kernel "
                "performance optimization? Answer yes or no.\n\nCommit message: " +
                commit.message;
            try {
                auto reply = classifier->chat(req);
                if (to_lower(reply.text).find("yes") == std::string::npos) continue;
            } catch (const TransportError&) {
                out.unclassified = true;  // fail-open: never silently drop data
            }
        }
        kept.push_back(std::move(out));
    }
    return kept;
}

std::vector<Commit> embed_messages(const std::vector<RawCommit>& commits,
                                   EmbeddingBackend& embedder) {
    std::vector<std::string> messages;
    messages.reserve(commits.size());
    for (const auto& c : commits) messages.push_back(c.message);

    auto vectors = embedder.embed(messages);
    if (vectors.size() != commits.size())
        throw InvariantError("embedding backend returned wrong batch size");

    std::vector<Commit> out;
    out.reserve(commits.size());
    for (std::size_t i = 0; i < commits.size(); ++i) {
        if (vectors[i].size() != embedder.dimension())
            throw InvariantError("embedding dimension mismatch within batch");
        Commit commit;
        commit.raw = commits[i];
        commit.embedding = l2_normalized(vectors[i]);
        out.push_back(std::move(commit));
    }
    return out;
}

std::vector<Commit> estimate_effectiveness(std::vector<Commit> commits,
                                           const std::vector<PpeRecord>& ppes,
                                           const EffectivenessOptions& options) {
    if (ppes.size() < 2)
        throw ConfigError("effectiveness estimation needs at least 2 PPE records, got " +
                          std::to_string(ppes.size()));

    std::vector<PpeRecord> sorted = ppes;
    std::sort(sorted.begin(), sorted.end(),
              [](const PpeRecord& a, const PpeRecord& b) { return a.ts < b.ts; });

    // window w covers [sorted[w].ts, sorted[w+1].ts)
    const std::size_t window_count = sorted.size() - 1;
    std::vector<std::vector<std::size_t>> window_members(window_count);
    std::vector<int> window_of(commits.size(), -1);
    for (std::size_t i = 0; i < commits.size(); ++i) {
        std::int64_t ts = commits[i].raw.ts;
        for (std::size_t w = 0; w < window_count; ++w) {
            if (ts >= sorted[w].ts && ts < sorted[w + 1].ts) {
                window_members[w].push_back(i);
                window_of[i] = static_cast<int>(w);
                break;
            }
        }
    }

    for (std::size_t i = 0; i < commits.size(); ++i) {
        commits[i].effectiveness = 0.0;
        commits[i].unwindowed = window_of[i] < 0;
    }

    for (std::size_t w = 0; w < window_count; ++w) {
        if (window_members[w].empty()) continue;
        double base = sorted[w].perf;
        if (base == 0.0)
            throw ArithmeticError("PPE window [" + std::to_string(sorted[w].ts) + ", " +
                                  std::to_string(sorted[w + 1].ts) +
                                  ") has zero baseline performance");
        double improvement = (sorted[w + 1].perf - base) / base;
        if (!options.higher_is_better) improvement = -improvement;

        if (options.weight) {
            double total = 0.0;
            for (auto i : window_members[w]) total += options.weight(commits[i]);
            if (total <= 0.0)
                throw ConfigError("commit weight hook produced a non-positive window total");
            for (auto i : window_members[w])
                commits[i].effectiveness = improvement * options.weight(commits[i]) / total;
        } else {
            double share = improvement / static_cast<double>(window_members[w].size());
            for (auto i : window_members[w]) commits[i].effectiveness = share;
        }
    }
    return commits;
}

std::vector<PpeRecord> load_ppe_csv(std::istream& in) {
    std::vector<PpeRecord> records;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (first) {
            first = false;
            if (t == "ts,perf") continue;
            throw ParseError("PPE csv: expected header 'ts,perf', got '" + t + "'");
        }
        auto comma = t.find(',');
        if (comma == std::string::npos)
            throw ParseError("PPE csv: malformed row at line " + std::to_string(line_no));
        try {
            PpeRecord rec;
            rec.ts = std::stoll(t.substr(0, comma));
            rec.perf = std::stod(t.substr(comma + 1));
            records.push_back(rec);
        } catch (const std::exception&) {
            throw ParseError("PPE csv: malformed row at line " + std::to_string(line_no));
        }
    }
    return records;
}

void save_commits(const std::filesystem::path& path, const std::vector<Commit>& commits,
                  int embedding_dim) {
    json doc;
    doc["schema"] = "kevo.commits.v1";
    doc["embedding_dim"] = embedding_dim;
    json list = json::array();
    for (const auto& c : commits) {
        json item{{"id", c.raw.id},       {"ts", c.raw.ts},
                  {"msg", c.raw.message}, {"diff", c.raw.diff},
                  {"effectiveness", c.effectiveness}, {"unwindowed", c.unwindowed},
                  {"unclassified", c.raw.unclassified}};
        json emb = json::array();
        for (Eigen::Index i = 0; i < c.embedding.size(); ++i) emb.push_back(c.embedding(i));
        item["embedding"] = std::move(emb);
        list.push_back(std::move(item));
    }
    doc["commits"] = std::move(list);
    write_file(path, doc.dump(2) + "\n");
}

std::vector<Commit> load_commits(const std::filesystem::path& path, int* embedding_dim) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("commit store " + path.string() + ": " + e.what());
    }
    if (doc.value("schema", "") != "kevo.commits.v1")
        throw ParseError("commit store " + path.string() + ": unknown schema");
    int dim = doc.at("embedding_dim").get<int>();
    if (embedding_dim) *embedding_dim = dim;

    std::vector<Commit> commits;
    for (const auto& item : doc.at("commits")) {
        Commit c;
        c.raw.id = item.at("id").get<std::string>();
        c.raw.ts = item.at("ts").get<std::int64_t>();
        c.raw.message = item.at("msg").get<std::string>();
        c.raw.diff = item.at("diff").get<std::string>();
        c.raw.unclassified = item.value("unclassified", false);
        c.effectiveness = item.at("effectiveness").get<double>();
        c.unwindowed = item.value("unwindowed", false);
        const auto& emb = item.at("embedding");
        c.embedding = Vec(static_cast<Eigen::Index>(emb.size()));
        for (std::size_t i = 0; i < emb.size(); ++i)
            c.embedding(static_cast<Eigen::Index>(i)) = emb[i].get<double>();
        if (c.embedding.size() != dim)
            throw ParseError("commit store: embedding dimension mismatch for " + c.raw.id);
        commits.push_back(std::move(c));
    }
    return commits;
}

}  // namespace kevo
