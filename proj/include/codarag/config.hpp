#pragma once
// Engine configuration: built-in defaults, overlaid by a JSON file, overlaid
// by command-line flags. Unknown keys are rejected so typos surface early.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "codarag/error.hpp"
#include "codarag/evaluator.hpp"
#include "codarag/gateway.hpp"
#include "codarag/indexer.hpp"
#include "codarag/mock_provider.hpp"
#include "codarag/navigator.hpp"
#include "codarag/pipeline.hpp"
#include "codarag/remote_provider.hpp"

namespace codarag {

struct ProviderConfig {
    std::string kind = "mock"; // "mock" | "remote"
    RemoteProfile remote;
    std::set<std::string> mock_eliminate; // names the mock judge drops
};

struct EngineConfig {
    std::uint64_t seed = 0;
    IndexerConfig indexer;
    NavigationConfig navigation;
    std::size_t chunk_top_k = 5;
    std::size_t context_budget = 8000;
    bool eliminate = true;
    std::size_t elimination_batch = 20;
    std::size_t parallelism = 4;
    RetryPolicy retry;
    ProviderConfig provider;
    EvalConfig eval;

    // Pushes the top-level seed into every seeded component.
    void propagate_seed() {
        navigation.seed = seed;
        navigation.fastrp.seed = seed;
    }

    void validate() const {
        indexer.chunking.validate();
        navigation.validate();
        if (indexer.type_cap == 0) throw PreconditionError("type_cap must be >= 1");
        if (indexer.gate_threshold < -1.0 || indexer.gate_threshold > 1.0) {
            throw PreconditionError("gate_threshold must be in [-1, 1]");
        }
        if (context_budget == 0) throw PreconditionError("context_budget must be >= 1");
        if (elimination_batch == 0) throw PreconditionError("elimination_batch must be >= 1");
        if (parallelism == 0) throw PreconditionError("parallelism must be >= 1");
        if (retry.attempts < 1) throw PreconditionError("retry.attempts must be >= 1");
        if (provider.kind != "mock" && provider.kind != "remote") {
            throw PreconditionError("provider.kind must be 'mock' or 'remote'");
        }
        if (eval.acc_alpha < 0.0 || eval.acc_alpha > 1.0) throw PreconditionError("eval.acc_alpha must be in [0, 1]");
        if (eval.rouge_beta <= 0.0) throw PreconditionError("eval.rouge_beta must be > 0");
    }

    PipelineConfig pipeline() const {
        return {navigation, chunk_top_k, context_budget, eliminate, elimination_batch};
    }
};

namespace detail {

inline const char* tokenizer_name(Tokenizer t) { return t == Tokenizer::provider ? "provider" : "whitespace"; }

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw PreconditionError("config: '" + where + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw PreconditionError("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
    }
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& dst, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw PreconditionError("config: bad value for '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
    }
}

} // namespace detail

// Serializes everything that affects outputs. The API key is never written.
inline nlohmann::json to_json(const EngineConfig& c) {
    const auto& n = c.navigation;
    const auto& r = c.provider.remote;
    return {
        {"seed", c.seed},
        {"chunking",
         {{"chunk_tokens", c.indexer.chunking.chunk_tokens},
          {"overlap_tokens", c.indexer.chunking.overlap_tokens},
          {"tokenizer", detail::tokenizer_name(c.indexer.chunking.tokenizer)}}},
        {"type_cap", c.indexer.type_cap},
        {"gate_threshold", c.indexer.gate_threshold},
        {"navigation",
         {{"alpha", n.alpha},
          {"beta", n.beta},
          {"tau", n.tau},
          {"damping", n.damping},
          {"top_k_entries", n.top_k_entries},
          {"top_neighbors", n.top_neighbors},
          {"top_ppr_nodes", n.top_ppr_nodes},
          {"top_fastrp_nodes", n.top_fastrp_nodes},
          {"ppr_tolerance", n.ppr_tolerance},
          {"ppr_max_iterations", n.ppr_max_iterations},
          {"fastrp",
           {{"dimension", n.fastrp.dimension},
            {"normalization_strength", n.fastrp.normalization_strength},
            {"iteration_weights", n.fastrp.iteration_weights}}}}},
        {"chunk_top_k", c.chunk_top_k},
        {"context_budget", c.context_budget},
        {"eliminate", c.eliminate},
        {"elimination_batch", c.elimination_batch},
        {"parallelism", c.parallelism},
        {"retry", {{"attempts", c.retry.attempts}, {"initial_backoff_ms", c.retry.initial_backoff.count()}}},
        {"provider",
         {{"kind", c.provider.kind},
          {"chat_url", r.chat_url},
          {"embedding_url", r.embedding_url},
          {"chat_model", r.chat_model},
          {"embedding_model", r.embedding_model},
          {"embedding_dimension", r.embedding_dimension},
          {"timeout_seconds", r.timeout_seconds},
          {"send_reasoning_effort", r.send_reasoning_effort},
          {"mock_eliminate", c.provider.mock_eliminate}}},
        {"eval", {{"rouge_beta", c.eval.rouge_beta}, {"acc_alpha", c.eval.acc_alpha}}},
    };
}

// Overlays the keys present in j onto c. Missing keys keep their current value.
inline void apply_json(EngineConfig& c, const nlohmann::json& j) {
    using detail::take;
    detail::reject_unknown(j,
                           {"seed", "chunking", "type_cap", "gate_threshold", "navigation", "chunk_top_k", "context_budget",
                            "eliminate", "elimination_batch", "parallelism", "retry", "provider", "eval"},
                           "");
    take(j, "seed", c.seed, "");
    if (j.contains("chunking")) {
        const auto& k = j["chunking"];
        detail::reject_unknown(k, {"chunk_tokens", "overlap_tokens", "tokenizer"}, "chunking");
        take(k, "chunk_tokens", c.indexer.chunking.chunk_tokens, "chunking");
        take(k, "overlap_tokens", c.indexer.chunking.overlap_tokens, "chunking");
        if (k.contains("tokenizer")) {
            std::string t;
            take(k, "tokenizer", t, "chunking");
            if (t == "whitespace") c.indexer.chunking.tokenizer = Tokenizer::whitespace;
            else if (t == "provider") c.indexer.chunking.tokenizer = Tokenizer::provider;
            else throw PreconditionError("config: chunking.tokenizer must be 'whitespace' or 'provider'");
        }
    }
    take(j, "type_cap", c.indexer.type_cap, "");
    take(j, "gate_threshold", c.indexer.gate_threshold, "");
    if (j.contains("navigation")) {
        const auto& k = j["navigation"];
        auto& n = c.navigation;
        detail::reject_unknown(k,
                               {"alpha", "beta", "tau", "damping", "top_k_entries", "top_neighbors", "top_ppr_nodes",
                                "top_fastrp_nodes", "ppr_tolerance", "ppr_max_iterations", "fastrp"},
                               "navigation");
        take(k, "alpha", n.alpha, "navigation");
        take(k, "beta", n.beta, "navigation");
        take(k, "tau", n.tau, "navigation");
        take(k, "damping", n.damping, "navigation");
        take(k, "top_k_entries", n.top_k_entries, "navigation");
        take(k, "top_neighbors", n.top_neighbors, "navigation");
        take(k, "top_ppr_nodes", n.top_ppr_nodes, "navigation");
        take(k, "top_fastrp_nodes", n.top_fastrp_nodes, "navigation");
        take(k, "ppr_tolerance", n.ppr_tolerance, "navigation");
        take(k, "ppr_max_iterations", n.ppr_max_iterations, "navigation");
        if (k.contains("fastrp")) {
            const auto& f = k["fastrp"];
            detail::reject_unknown(f, {"dimension", "normalization_strength", "iteration_weights"}, "navigation.fastrp");
            take(f, "dimension", n.fastrp.dimension, "navigation.fastrp");
            take(f, "normalization_strength", n.fastrp.normalization_strength, "navigation.fastrp");
            take(f, "iteration_weights", n.fastrp.iteration_weights, "navigation.fastrp");
        }
    }
    take(j, "chunk_top_k", c.chunk_top_k, "");
    take(j, "context_budget", c.context_budget, "");
    take(j, "eliminate", c.eliminate, "");
    take(j, "elimination_batch", c.elimination_batch, "");
    take(j, "parallelism", c.parallelism, "");
    if (j.contains("retry")) {
        const auto& k = j["retry"];
        detail::reject_unknown(k, {"attempts", "initial_backoff_ms"}, "retry");
        take(k, "attempts", c.retry.attempts, "retry");
        if (k.contains("initial_backoff_ms")) {
            long long ms = 0;
            take(k, "initial_backoff_ms", ms, "retry");
            c.retry.initial_backoff = std::chrono::milliseconds(ms);
        }
    }
    if (j.contains("provider")) {
        const auto& k = j["provider"];
        auto& r = c.provider.remote;
        detail::reject_unknown(k,
                               {"kind", "chat_url", "embedding_url", "chat_model", "embedding_model", "embedding_dimension",
                                "timeout_seconds", "send_reasoning_effort", "mock_eliminate"},
                               "provider");
        take(k, "kind", c.provider.kind, "provider");
        take(k, "chat_url", r.chat_url, "provider");
        take(k, "embedding_url", r.embedding_url, "provider");
        take(k, "chat_model", r.chat_model, "provider");
        take(k, "embedding_model", r.embedding_model, "provider");
        take(k, "embedding_dimension", r.embedding_dimension, "provider");
        take(k, "timeout_seconds", r.timeout_seconds, "provider");
        take(k, "send_reasoning_effort", r.send_reasoning_effort, "provider");
        take(k, "mock_eliminate", c.provider.mock_eliminate, "provider");
    }
    if (j.contains("eval")) {
        const auto& k = j["eval"];
        detail::reject_unknown(k, {"rouge_beta", "acc_alpha"}, "eval");
        take(k, "rouge_beta", c.eval.rouge_beta, "eval");
        take(k, "acc_alpha", c.eval.acc_alpha, "eval");
    }
}

// Parses a JSON config document; syntax errors carry line and column.
inline nlohmann::json parse_config_text(const std::string& body, const std::string& source) {
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        // Translate the byte offset into line:column.
        std::size_t line = 1, col = 1;
        const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, body.size());
        for (std::size_t i = 0; i < stop; ++i) {
            if (body[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(source, line, "column " + std::to_string(col) + ": invalid config syntax");
    }
}

inline nlohmann::json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string());
}

inline EngineConfig load_config(const std::filesystem::path& path) {
    EngineConfig c;
    apply_json(c, read_config_file(path));
    c.propagate_seed();
    c.validate();
    return c;
}

inline std::shared_ptr<Provider> make_provider(const EngineConfig& c) {
    if (c.provider.kind == "remote") return std::make_shared<RemoteProvider>(c.provider.remote);
    auto mock = std::make_shared<MockProvider>(c.seed);
    if (!c.provider.mock_eliminate.empty()) mock->set_eliminate(c.provider.mock_eliminate);
    return mock;
}

inline std::unique_ptr<Gateway> make_gateway(const EngineConfig& c) {
    return std::make_unique<Gateway>(make_provider(c), c.retry, static_cast<std::ptrdiff_t>(c.parallelism));
}

} // namespace codarag
