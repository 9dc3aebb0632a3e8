// codarag command-line front end: argument parsing and dispatch.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

using namespace codarag::cli;

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_st("codarag"));
    spdlog::set_level(spdlog::level::warn);

    CLI::App app{"codarag: graph-based retrieval-augmented generation"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

    IndexArgs ia;
    auto* index_cmd = app.add_subcommand("index", "Build a knowledge graph from a corpus directory");
    index_cmd->add_option("--corpus", ia.corpus, "Directory of plain-text documents")->required();
    index_cmd->add_option("--out", ia.out, "Output graph directory")->required();
    index_cmd->add_option("--config", ia.config, "JSON config file");
    index_cmd->add_option("--seed", ia.seed, "Seed override");

    QueryArgs qa;
    auto* query_cmd = app.add_subcommand("query", "Answer a question against a graph");
    query_cmd->add_option("--graph", qa.graph, "Graph directory")->required();
    query_cmd->add_option("question", qa.question, "Question text")->required();
    query_cmd->add_option("--config", qa.config, "JSON config file (overlays the graph's manifest)");
    query_cmd->add_flag("--kg-only", qa.kg_only, "Ground the answer in graph evidence only (no chunks)");
    query_cmd->add_option("--emit-subgraph", qa.emit_subgraph, "Write the evidence subgraph as JSON");
    query_cmd->add_option("--emit-context", qa.emit_context, "Write the assembled context to a file");
    query_cmd->add_option("--top-k", qa.top_k, "Number of entry entities");
    query_cmd->add_option("--tau", qa.tau, "Semantic pruning threshold");
    query_cmd->add_option("--alpha", qa.alpha, "Relation similarity weight");
    query_cmd->add_option("--beta", qa.beta, "Entity similarity weight");
    query_cmd->add_option("--damping", qa.damping, "PageRank damping factor");
    query_cmd->add_option("--seed", qa.seed, "Seed override");

    std::string stats_graph;
    auto* stats_cmd = app.add_subcommand("graph-stats", "Print structural statistics as CSV");
    stats_cmd->add_option("--graph", stats_graph, "Graph directory")->required();

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Score a question set; writes report.json and report.csv");
    eval_cmd->add_option("--graph", ea.graph, "Graph directory")->required();
    eval_cmd->add_option("--questions", ea.questions, "JSON-lines question file")->required();
    eval_cmd->add_option("--metrics", ea.metrics, "Comma-separated metric names (default: all)");
    eval_cmd->add_option("--out", ea.out, "Report directory (default: current directory)");
    eval_cmd->add_option("--config", ea.config, "JSON config file (overlays the graph's manifest)");

    std::string audit_graph, audit_out;
    std::size_t audit_bins = 10;
    auto* audit_cmd = app.add_subcommand("merge-audit", "Histogram of judged merge pairs by similarity");
    audit_cmd->add_option("--graph", audit_graph, "Graph directory")->required();
    audit_cmd->add_option("--bins", audit_bins, "Number of similarity bins");
    audit_cmd->add_option("--out", audit_out, "CSV output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    if (verbose) spdlog::set_level(spdlog::level::info);

    try {
        if (*index_cmd) return cmd_index(ia);
        if (*query_cmd) return cmd_query(qa);
        if (*stats_cmd) return cmd_graph_stats(stats_graph);
        if (*eval_cmd) return cmd_eval(ea);
        if (*audit_cmd) return cmd_merge_audit(audit_graph, audit_bins, audit_out);
    } catch (const std::exception& e) {
        std::cerr << "error [" << category(e) << "]: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
