#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "codarag/gateway.hpp"
#include "codarag/mock_provider.hpp"
#include "codarag/parallel.hpp"
#include "codarag/remote_provider.hpp"

using namespace codarag;
using namespace std::chrono_literals;

namespace {

Gateway mock_gateway(std::uint64_t seed = 0) { return Gateway(std::make_shared<MockProvider>(seed), {3, 1ms}, 2); }

// Scripted provider for exercising retry and parsing paths.
class ScriptedProvider : public Provider {
public:
    std::vector<std::string> replies;
    int transport_failures = 0;
    std::atomic<int> calls{0};

    std::string complete(const CompletionRequest&) override {
        const int n = calls++;
        if (n < transport_failures) throw TransportError("connection reset");
        const auto idx = static_cast<std::size_t>(n - transport_failures);
        return idx < replies.size() ? replies[idx] : replies.back();
    }
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override {
        return std::vector<std::vector<float>>(texts.size(), std::vector<float>{3.0f, 4.0f});
    }
    std::size_t dimension() const override { return 2; }
    std::string model_id() const override { return "scripted"; }
};

} // namespace

TEST(Mock, Echo) {
    auto gw = mock_gateway();
    EXPECT_EQ(gw.complete("please repeat\nECHO: x"), "x");
}

TEST(Gateway, EmptyPromptRejected) {
    auto gw = mock_gateway();
    EXPECT_THROW(gw.complete("   "), PreconditionError);
    CompletionRequest r;
    r.prompt = "ok";
    r.max_output_tokens = 0;
    EXPECT_THROW(gw.complete(r), PreconditionError);
}

TEST(Gateway, EmbedEmptyListRejected) {
    auto gw = mock_gateway();
    EXPECT_THROW(gw.embed({}), PreconditionError);
}

TEST(MockEmbedding, DeterministicAndUnitNorm) {
    auto gw = mock_gateway();
    const auto a = gw.embed_one("a");
    EXPECT_EQ(a, gw.embed_one("a"));
    EXPECT_EQ(a.size(), 64u);
    EXPECT_NEAR(vec::norm(a), 1.0, 1e-6);
    const auto x = gw.embed_one("x");
    EXPECT_NEAR(vec::cosine(x, gw.embed_one("x")), 1.0, 1e-6);
    EXPECT_NE(gw.embed_one("ab"), gw.embed_one("ba"));
}

TEST(MockEmbedding, OrderPreservedAndSeedSensitive) {
    auto gw = mock_gateway();
    const auto v = gw.embed({"alpha beta", "gamma", "alpha beta"});
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0].values, v[2].values);
    EXPECT_NE(v[0].values, v[1].values);
    auto other = mock_gateway(99);
    EXPECT_NE(other.embed_one("alpha beta"), v[0].values);
    EXPECT_NE(other.model_id(), gw.model_id());
}

TEST(Gateway, NormalizesProviderVectors) {
    Gateway gw(std::make_shared<ScriptedProvider>());
    const auto v = gw.embed_one("anything");
    EXPECT_NEAR(v[0], 0.6f, 1e-6);
    EXPECT_NEAR(v[1], 0.8f, 1e-6);
}

TEST(Gateway, EmbeddingSpaceMismatch) {
    auto gw = mock_gateway();
    EXPECT_THROW(gw.expect_embedding_space(1536, "other"), PreconditionError);
    EXPECT_NO_THROW(gw.expect_embedding_space(64, gw.model_id()));
}

TEST(Judge, MockSupportIsSubstringContainment) {
    auto gw = mock_gateway();
    EXPECT_EQ(gw.judge(JudgeKind::support, {{"claim", "X"}, {"context", "a X b"}}).decision, Decision::supported);
    EXPECT_EQ(gw.judge(JudgeKind::support, {{"claim", "X"}, {"context", "Y"}}).decision, Decision::unsupported);
    EXPECT_EQ(gw.judge(JudgeKind::reflect, {{"claim", "X"}, {"context", "Y"}}).decision, Decision::unsupported);
}

TEST(Judge, MockMergeIdenticalNames) {
    auto gw = mock_gateway();
    prompts::Vars v{{"name_a", "Google"}, {"description_a", "search"}, {"name_b", "Google"}, {"description_b", "ads"}};
    EXPECT_EQ(gw.judge(JudgeKind::merge, v).decision, Decision::merge);
    v["name_b"] = "Google Inc.";
    EXPECT_EQ(gw.judge(JudgeKind::merge, v).decision, Decision::merge);
    v["name_b"] = "DeepMind";
    EXPECT_EQ(gw.judge(JudgeKind::merge, v).decision, Decision::keep_distinct);
}

TEST(Judge, ParseVerdictCaseInsensitiveWithRationale) {
    const auto v = parse_verdict("  supported: the context says so\nmore detail", JudgeKind::support);
    EXPECT_EQ(v.decision, Decision::supported);
    EXPECT_EQ(v.rationale, "the context says so more detail");
    EXPECT_EQ(parse_verdict("Keep_Distinct", JudgeKind::merge).decision, Decision::keep_distinct);
    EXPECT_THROW(parse_verdict("MERGE", JudgeKind::support), JudgeFormatError);
    EXPECT_THROW(parse_verdict("", JudgeKind::support), JudgeFormatError);
}

TEST(Judge, StrictRetryThenFormatError) {
    auto p = std::make_shared<ScriptedProvider>();
    p->replies = {"I think yes", "UNSUPPORTED - no"};
    Gateway gw(p);
    EXPECT_EQ(gw.judge(JudgeKind::support, {{"claim", "c"}, {"context", "x"}}).decision, Decision::unsupported);
    EXPECT_EQ(p->calls.load(), 2);

    auto q = std::make_shared<ScriptedProvider>();
    q->replies = {"maybe", "perhaps"};
    Gateway gw2(q);
    EXPECT_THROW(gw2.judge(JudgeKind::support, {{"claim", "c"}, {"context", "x"}}), JudgeFormatError);
}

TEST(Judge, EliminationNotAllowedSingly) {
    auto gw = mock_gateway();
    EXPECT_THROW(gw.judge(JudgeKind::eliminate, {}), PreconditionError);
}

TEST(Grade, ParsesThreeLevels) {
    EXPECT_EQ(parse_grade("1"), 1.0);
    EXPECT_EQ(parse_grade("0.5 partially"), 0.5);
    EXPECT_EQ(parse_grade("\n0\n"), 0.0);
    EXPECT_THROW(parse_grade("0.7"), JudgeFormatError);
    EXPECT_THROW(parse_grade("high"), JudgeFormatError);
}

TEST(Retry, TransportErrorsRetriedThenSucceed) {
    auto p = std::make_shared<ScriptedProvider>();
    p->transport_failures = 2;
    p->replies = {"fine"};
    Gateway gw(p, {3, 1ms});
    EXPECT_EQ(gw.complete("hi"), "fine");
    EXPECT_EQ(p->calls.load(), 3);
}

TEST(Retry, GivesUpAfterThreeAttempts) {
    auto p = std::make_shared<ScriptedProvider>();
    p->transport_failures = 10;
    p->replies = {"never"};
    Gateway gw(p, {3, 1ms});
    EXPECT_THROW(gw.complete("hi"), TransportError);
    EXPECT_EQ(p->calls.load(), 3);
}

TEST(Retry, BackoffDoubles) {
    auto p = std::make_shared<ScriptedProvider>();
    p->transport_failures = 10;
    p->replies = {"never"};
    Gateway gw(p, {3, 20ms});
    const auto t0 = std::chrono::steady_clock::now();
    EXPECT_THROW(gw.complete("hi"), TransportError);
    EXPECT_GE(std::chrono::steady_clock::now() - t0, 60ms); // 20 + 40
}

TEST(Parallel, BoundedConcurrency) {
    struct Slow : Provider {
        std::atomic<int> live{0}, peak{0};
        std::string complete(const CompletionRequest&) override {
            const int now = ++live;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(5ms);
            --live;
            return "ok";
        }
        std::vector<std::vector<float>> embed(const std::vector<std::string>& t) override {
            return std::vector<std::vector<float>>(t.size(), std::vector<float>{1.0f});
        }
        std::size_t dimension() const override { return 1; }
        std::string model_id() const override { return "slow"; }
    };
    auto p = std::make_shared<Slow>();
    Gateway gw(p, {}, 2);
    parallel_for(16, 8, [&](std::size_t) { gw.complete("x"); });
    EXPECT_LE(p->peak.load(), 2);
}

TEST(Parallel, LowestIndexExceptionRethrown) {
    try {
        parallel_for(10, 4, [](std::size_t i) {
            if (i == 3 || i == 7) throw std::runtime_error("item " + std::to_string(i));
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "item 3");
    }
}

TEST(Remote, UnreachableHostIsTransportErrorAfterRetries) {
    RemoteProfile prof;
    prof.chat_url = "http://127.0.0.1:9/v1/chat/completions"; // discard port; nothing listens
    prof.embedding_url = "http://127.0.0.1:9/v1/embeddings";
    prof.timeout_seconds = 1;
    Gateway gw(std::make_shared<RemoteProvider>(prof), {3, 1ms});
    try {
        gw.complete("hello");
        FAIL() << "expected TransportError";
    } catch (const TransportError& e) {
        EXPECT_NE(std::string(e.what()).find("after 3 attempts"), std::string::npos);
    }
}

TEST(Remote, JsonMappingAgainstLocalServer) {
    httplib::Server server;
    std::string seen_auth, seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        auto j = nlohmann::json::parse(req.body);
        const std::string prompt = j["messages"][0]["content"];
        if (prompt == "refuse") {
            res.set_content(R"({"choices":[{"message":{"content":null,"refusal":"I cannot help with that."}}]})",
                            "application/json");
        } else if (prompt == "fail") {
            res.status = 429;
            res.set_content(R"({"error":{"message":"rate limited"}})", "application/json");
        } else {
            res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", "echo:" + prompt}}}}}}}.dump(),
                            "application/json");
        }
    });
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        auto j = nlohmann::json::parse(req.body);
        nlohmann::json data = nlohmann::json::array();
        // Reply out of order to exercise the index field.
        for (int i = static_cast<int>(j["input"].size()) - 1; i >= 0; --i) {
            data.push_back({{"index", i}, {"embedding", {static_cast<float>(i + 1), 0.0f, 0.0f}}});
        }
        res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteProfile prof;
    prof.chat_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    prof.embedding_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
    prof.chat_model = "chat-x";
    prof.embedding_model = "embed-x";
    prof.embedding_dimension = 3;
    prof.api_key = "sk-test";
    Gateway gw(std::make_shared<RemoteProvider>(prof), {3, 1ms});

    EXPECT_EQ(gw.complete("hi"), "echo:hi");
    EXPECT_EQ(seen_auth, "Bearer sk-test");
    const auto body = nlohmann::json::parse(seen_body);
    EXPECT_EQ(body["model"], "chat-x");
    EXPECT_EQ(body["reasoning_effort"], "low");
    EXPECT_EQ(body["temperature"], 0.0);

    const auto v = gw.embed({"a", "b"});
    EXPECT_EQ(v[0].model_id, "embed-x");
    EXPECT_FLOAT_EQ(v[0].values[0], 1.0f);

    try {
        gw.complete("refuse");
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_STREQ(e.what(), "I cannot help with that.");
    }
    try {
        gw.complete("fail");
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_NE(std::string(e.what()).find("rate limited"), std::string::npos);
    }

    server.stop();
    th.join();
}

TEST(Remote, ApiKeyFromEnvironment) {
    ::setenv("CODA_API_KEY", "env-key", 1);
    httplib::Server server;
    std::string seen;
    server.Post("/c", [&](const httplib::Request& req, httplib::Response& res) {
        seen = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    RemoteProfile prof;
    prof.chat_url = "http://127.0.0.1:" + std::to_string(port) + "/c";
    Gateway gw(std::make_shared<RemoteProvider>(prof));
    EXPECT_EQ(gw.complete("x"), "ok");
    EXPECT_EQ(seen, "Bearer env-key");
    server.stop();
    th.join();
    ::unsetenv("CODA_API_KEY");
}
