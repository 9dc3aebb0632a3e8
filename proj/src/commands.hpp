// Subcommand implementations behind the codarag binary.
// Exit codes: 0 success, 1 partial (eval with failed items), 2 usage or IO error.
#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "codarag/config.hpp"

namespace codarag::cli {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kUsage = 2;

// Fatal conditions the CLI reports with a fixed category.
struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Short label printed as "error [label]: message".
std::string category(const std::exception& e);

struct IndexArgs {
    std::string corpus, out, config;
    std::optional<std::uint64_t> seed;
};

struct QueryArgs {
    std::string graph, question, config, emit_subgraph, emit_context;
    bool kg_only = false;
    std::optional<std::size_t> top_k;
    std::optional<double> tau, alpha, beta, damping;
    std::optional<std::uint64_t> seed;
};

struct EvalArgs {
    std::string graph, questions, metrics, out, config;
};

int cmd_index(const IndexArgs& a);
int cmd_query(const QueryArgs& a);
int cmd_graph_stats(const std::string& graph);
int cmd_eval(const EvalArgs& a);
int cmd_merge_audit(const std::string& graph, std::size_t bins, const std::string& out);

} // namespace codarag::cli
