#pragma once
// HTTP(S) provider speaking the common chat-completion / embeddings JSON
// dialect:
//   POST <chat_url>      {"model","messages":[{"role":"user","content"}],
//                         "max_completion_tokens","temperature","reasoning_effort"}
//                     -> {"choices":[{"message":{"content"}}]}
//   POST <embedding_url> {"model","input":[...]} -> {"data":[{"index","embedding"}]}
// Authorization: Bearer $CODA_API_KEY.

#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "codarag/gateway.hpp"

namespace codarag {

struct RemoteProfile {
    std::string chat_url;
    std::string embedding_url;
    std::string chat_model;
    std::string embedding_model;
    std::size_t embedding_dimension = 1536;
    std::string api_key;       // usually taken from CODA_API_KEY
    int timeout_seconds = 60;
    bool send_reasoning_effort = true;
};

namespace detail {

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string path;
};

inline Endpoint split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw PreconditionError("endpoint URL needs a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

} // namespace detail

class RemoteProvider : public Provider {
public:
    explicit RemoteProvider(RemoteProfile profile) : profile_(std::move(profile)) {
        if (profile_.api_key.empty()) {
            if (const char* key = std::getenv("CODA_API_KEY")) profile_.api_key = key;
        }
    }

    std::size_t dimension() const override { return profile_.embedding_dimension; }
    std::string model_id() const override { return profile_.embedding_model; }

    std::string complete(const CompletionRequest& request) override {
        nlohmann::json body = {
            {"model", profile_.chat_model},
            {"messages", {{{"role", "user"}, {"content", request.prompt}}}},
            {"max_completion_tokens", request.max_output_tokens},
            {"temperature", request.temperature},
        };
        if (profile_.send_reasoning_effort) body["reasoning_effort"] = std::string(to_string(request.reasoning_effort));
        const auto reply = post(profile_.chat_url, body);
        try {
            const auto& choice = reply.at("choices").at(0);
            if (choice.contains("message") && choice["message"].contains("refusal") &&
                choice["message"]["refusal"].is_string()) {
                throw ProviderError(choice["message"]["refusal"].get<std::string>());
            }
            const auto& content = choice.at("message").at("content");
            return content.is_null() ? std::string{} : content.get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("unexpected completion body: ") + e.what());
        }
    }

    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override {
        nlohmann::json body = {{"model", profile_.embedding_model}, {"input", texts}};
        const auto reply = post(profile_.embedding_url, body);
        std::vector<std::vector<float>> out(texts.size());
        try {
            const auto& data = reply.at("data");
            for (std::size_t i = 0; i < data.size(); ++i) {
                const std::size_t idx = data[i].value("index", i);
                if (idx >= out.size()) throw ProviderError("embedding index out of range");
                out[idx] = data[i].at("embedding").get<std::vector<float>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("unexpected embedding body: ") + e.what());
        }
        return out;
    }

private:
    nlohmann::json post(const std::string& url, const nlohmann::json& body) const {
        const auto ep = detail::split_url(url);
        httplib::Client client(ep.origin);
        client.set_connection_timeout(profile_.timeout_seconds, 0);
        client.set_read_timeout(profile_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!profile_.api_key.empty()) headers.emplace("Authorization", "Bearer " + profile_.api_key);
        auto res = client.Post(ep.path, headers, body.dump(), "application/json");
        if (!res) throw TransportError(url + ": " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300) {
            std::string msg = res->body;
            try {
                auto j = nlohmann::json::parse(res->body);
                if (j.contains("error")) {
                    const auto& err = j["error"];
                    msg = err.is_object() ? err.value("message", err.dump()) : err.dump();
                }
            } catch (const nlohmann::json::exception&) {
            }
            throw ProviderError("HTTP " + std::to_string(res->status) + ": " + msg);
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw ProviderError(std::string("provider returned non-JSON body: ") + e.what());
        }
    }

    RemoteProfile profile_;
};

} // namespace codarag
