#pragma once
// Uniform access to completion, embedding and judging providers.

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "codarag/error.hpp"
#include "codarag/prompts.hpp"
#include "codarag/util.hpp"

namespace codarag {

enum class ReasoningEffort { low, medium, high };

inline std::string_view to_string(ReasoningEffort e) {
    switch (e) {
        case ReasoningEffort::low: return "low";
        case ReasoningEffort::medium: return "medium";
        case ReasoningEffort::high: return "high";
    }
    return "low";
}

struct CompletionRequest {
    std::string prompt;
    int max_output_tokens = 2048;
    double temperature = 0.0;
    ReasoningEffort reasoning_effort = ReasoningEffort::low;
};

struct EmbeddingVector {
    std::vector<float> values;
    std::string model_id;
};

enum class JudgeKind { support, reflect, merge, eliminate };

enum class Decision { supported, unsupported, merge, keep_distinct, keep, eliminate };

inline std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::supported: return "SUPPORTED";
        case Decision::unsupported: return "UNSUPPORTED";
        case Decision::merge: return "MERGE";
        case Decision::keep_distinct: return "KEEP_DISTINCT";
        case Decision::keep: return "KEEP";
        case Decision::eliminate: return "ELIMINATE";
    }
    return "?";
}

struct JudgeVerdict {
    Decision decision;
    std::string rationale;
};

// Legal verdict tokens per question kind.
inline std::vector<Decision> legal_decisions(JudgeKind k) {
    switch (k) {
        case JudgeKind::support:
        case JudgeKind::reflect: return {Decision::supported, Decision::unsupported};
        case JudgeKind::merge: return {Decision::merge, Decision::keep_distinct};
        case JudgeKind::eliminate: return {Decision::keep, Decision::eliminate};
    }
    return {};
}

// Parses "<TOKEN>[ -:] rationale" from the first non-empty line, case-insensitively.
inline JudgeVerdict parse_verdict(std::string_view reply, JudgeKind kind) {
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        if (line.empty()) continue;
        std::size_t n = 0;
        while (n < line.size() && (std::isalpha(static_cast<unsigned char>(line[n])) || line[n] == '_')) ++n;
        const std::string token = text::lower(line.substr(0, n));
        for (Decision d : legal_decisions(kind)) {
            if (token == text::lower(to_string(d))) {
                auto rest = line.substr(n);
                while (!rest.empty() && (rest.front() == '-' || rest.front() == ':' || std::isspace(static_cast<unsigned char>(rest.front()))))
                    rest.remove_prefix(1);
                std::string rationale(rest);
                // Rationale may continue on later lines.
                auto nl = reply.find(line);
                if (nl != std::string_view::npos) {
                    auto tail = text::trim(reply.substr(nl + line.size()));
                    if (!tail.empty()) rationale += (rationale.empty() ? "" : " ") + std::string(tail);
                }
                return {d, rationale};
            }
        }
        throw JudgeFormatError("unrecognized verdict token: " + std::string(line.substr(0, 40)));
    }
    throw JudgeFormatError("empty judge reply");
}

// Parses a relevance grade in {0, 0.5, 1} from the first non-empty line.
inline double parse_grade(std::string_view reply) {
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        if (line.empty()) continue;
        std::size_t n = 0;
        while (n < line.size() && (std::isdigit(static_cast<unsigned char>(line[n])) || line[n] == '.')) ++n;
        const auto tok = line.substr(0, n);
        if (tok == "1" || tok == "1.0") return 1.0;
        if (tok == "0.5" || tok == ".5") return 0.5;
        if (tok == "0" || tok == "0.0") return 0.0;
        throw JudgeFormatError("unrecognized grade: " + std::string(line.substr(0, 40)));
    }
    throw JudgeFormatError("empty grade reply");
}

// Backend contract. Implementations must be safe for concurrent calls.
class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    // Raw (not necessarily normalized) vectors, one per text.
    virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string model_id() const = 0;
    virtual std::vector<text::TokenSpan> tokenize(std::string_view s) const { return text::whitespace_tokens(s); }
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

class Gateway {
public:
    explicit Gateway(std::shared_ptr<Provider> provider, RetryPolicy retry = {}, std::ptrdiff_t parallelism = 4)
        : provider_(std::move(provider)), retry_(retry), slots_(std::max<std::ptrdiff_t>(1, parallelism)),
          parallelism_(std::max<std::ptrdiff_t>(1, parallelism)) {
        if (!provider_) throw PreconditionError("gateway requires a provider");
    }

    Provider& provider() { return *provider_; }
    std::size_t parallelism() const { return static_cast<std::size_t>(parallelism_); }
    std::size_t dimension() const { return provider_->dimension(); }
    std::string model_id() const { return provider_->model_id(); }

    std::string complete(const CompletionRequest& request) {
        if (text::trim(request.prompt).empty()) throw PreconditionError("completion prompt must be non-empty");
        if (request.max_output_tokens <= 0) throw PreconditionError("max_output_tokens must be positive");
        if (request.temperature < 0) throw PreconditionError("temperature must be >= 0");
        return with_retry([&] { return provider_->complete(request); });
    }

    std::string complete(std::string prompt) {
        CompletionRequest r;
        r.prompt = std::move(prompt);
        return complete(r);
    }

    std::string complete(const prompts::Template& t, const prompts::Vars& vars) {
        return complete(prompts::render(t, vars));
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) {
        if (texts.empty()) throw PreconditionError("embed requires at least one text");
        auto raw = with_retry([&] { return provider_->embed(texts); });
        if (raw.size() != texts.size()) throw ProviderError("embedding count mismatch");
        std::vector<EmbeddingVector> out;
        out.reserve(raw.size());
        const auto model = provider_->model_id();
        for (auto& v : raw) {
            if (v.size() != provider_->dimension()) {
                throw ProviderError("embedding dimension " + std::to_string(v.size()) + " != declared " +
                                    std::to_string(provider_->dimension()));
            }
            std::vector<double> d(v.begin(), v.end());
            out.push_back({vec::normalized(d), model});
        }
        return out;
    }

    std::vector<float> embed_one(const std::string& text) { return embed({text}).front().values; }

    // Fails if the provider's embedding space differs from the one a graph was built with.
    void expect_embedding_space(std::size_t dimension, const std::string& model_id) const {
        if (dimension != provider_->dimension()) {
            throw PreconditionError("embedding dimension mismatch against manifest: provider " +
                                    std::to_string(provider_->dimension()) + ", graph " + std::to_string(dimension));
        }
        if (!model_id.empty() && model_id != provider_->model_id()) {
            spdlog::warn("embedding model differs from manifest: {} vs {}", provider_->model_id(), model_id);
        }
    }

    // One judge call; on an unparseable reply retries once with the strict template.
    JudgeVerdict judge(JudgeKind kind, const prompts::Vars& payload) {
        const auto [normal, strict] = templates_for(kind);
        try {
            return parse_verdict(complete(*normal, payload), kind);
        } catch (const JudgeFormatError& e) {
            spdlog::debug("judge reply unparseable ({}), retrying strictly", e.what());
        }
        return parse_verdict(complete(*strict, payload), kind);
    }

    // Relevance grade from one of two independently phrased graders (0 or 1).
    double grade_relevance(int grader, const prompts::Vars& payload) {
        const auto& t = grader == 0 ? prompts::kGradeRelevanceA : prompts::kGradeRelevanceB;
        try {
            return parse_grade(complete(t, payload));
        } catch (const JudgeFormatError&) {
        }
        return parse_grade(complete(prompts::kGradeRelevanceStrict, payload));
    }

private:
    static std::pair<const prompts::Template*, const prompts::Template*> templates_for(JudgeKind k) {
        switch (k) {
            case JudgeKind::support: return {&prompts::kJudgeSupport, &prompts::kJudgeSupportStrict};
            case JudgeKind::reflect: return {&prompts::kJudgeReflect, &prompts::kJudgeReflectStrict};
            case JudgeKind::merge: return {&prompts::kMergeJudge, &prompts::kMergeJudgeStrict};
            case JudgeKind::eliminate: break;
        }
        throw PreconditionError("elimination is judged in batches; use the refiner");
    }

    template <typename Fn>
    auto with_retry(Fn&& fn) -> decltype(fn()) {
        struct Slot {
            std::counting_semaphore<1 << 16>& s;
            explicit Slot(std::counting_semaphore<1 << 16>& sem) : s(sem) { s.acquire(); }
            ~Slot() { s.release(); }
        };
        auto backoff = retry_.initial_backoff;
        for (int attempt = 1;; ++attempt) {
            try {
                Slot slot(slots_);
                return fn();
            } catch (const TransportError& e) {
                if (attempt >= retry_.attempts) {
                    throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)");
                }
                spdlog::warn("transport error (attempt {}/{}): {}", attempt, retry_.attempts, e.what());
            }
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }

    std::shared_ptr<Provider> provider_;
    RetryPolicy retry_;
    std::counting_semaphore<1 << 16> slots_;
    std::ptrdiff_t parallelism_;
};

} // namespace codarag
