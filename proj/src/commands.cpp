#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "codarag/evaluator.hpp"
#include "codarag/indexer.hpp"
#include "codarag/persist.hpp"
#include "codarag/pipeline.hpp"

namespace codarag::cli {

namespace fs = std::filesystem;

std::string category(const std::exception& e) {
    if (dynamic_cast<const CliError*>(&e)) return "usage";
    if (dynamic_cast<const ParseError*>(&e)) return "parse";
    if (dynamic_cast<const PreconditionError*>(&e)) return "config";
    if (dynamic_cast<const NotFoundError*>(&e)) return "not-found";
    if (dynamic_cast<const TransportError*>(&e)) return "transport";
    if (dynamic_cast<const ProviderError*>(&e)) return "provider";
    if (dynamic_cast<const JudgeFormatError*>(&e)) return "judge-format";
    if (dynamic_cast<const InvariantError*>(&e)) return "invariant";
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
    return "error";
}

namespace {

void write_text(const fs::path& p, const std::string& body) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError("cannot write " + p.string());
    out << body;
}

std::vector<Document> read_corpus(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw CliError("corpus not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Document> docs;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw CliError("cannot read " + f.string());
        std::stringstream ss;
        ss << in.rdbuf();
        docs.push_back({fs::relative(f, dir).generic_string(), ss.str()});
    }
    if (docs.empty()) throw CliError("corpus is empty: " + dir.string());
    return docs;
}

LoadedGraph load_graph(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw CliError("graph not found: " + dir.string());
    return load(dir);
}

nlohmann::json evidence_json(const PipelineRun& run, const KnowledgeGraph& g) {
    nlohmann::json ents = nlohmann::json::array();
    for (const auto& [id, tags] : run.evidence.entities) {
        nlohmann::json t = nlohmann::json::array();
        for (const auto& s : tags) t.push_back({{"pathway", std::string(to_string(s.pathway))}, {"score", s.score}});
        const auto* e = g.find_entity(id);
        ents.push_back({{"id", id}, {"name", e ? e->name : id}, {"entry", run.evidence.entries.count(id) > 0}, {"tags", t}});
    }
    nlohmann::json elim = nlohmann::json::array();
    for (const auto& x : run.refined.eliminated) {
        elim.push_back({{"kind", x.kind == ItemKind::entity ? "entity" : "relation"},
                        {"id", x.id},
                        {"rationale", x.rationale},
                        {"orphaned", x.orphaned}});
    }
    return {{"query", run.refined.query},
            {"cues", {{"high", run.cues.high_level}, {"low", run.cues.low_level}, {"fallback", run.cues.fallback}}},
            {"entities", ents},
            {"relations", run.evidence.relations},
            {"diagnostic", run.evidence.diagnostic},
            {"kept_entities", run.refined.kept_entities},
            {"kept_relations", run.refined.kept_relations},
            {"eliminated", elim},
            {"failed_batches", run.refined.failed_batches}};
}

// Config for commands that run on an existing graph: manifest, then file, then flags.
EngineConfig graph_config(const GraphManifest& m, const std::string& config_file) {
    EngineConfig c;
    if (!m.config.empty()) apply_json(c, m.config);
    if (!config_file.empty()) apply_json(c, read_config_file(config_file));
    return c;
}

std::unique_ptr<Gateway> gateway_for(EngineConfig& c, const GraphManifest& m) {
    c.propagate_seed();
    c.validate();
    auto gw = make_gateway(c);
    if (m.embedding_dimension) gw->expect_embedding_space(m.embedding_dimension, m.embedding_model);
    return gw;
}

} // namespace


int cmd_index(const IndexArgs& a) {
    EngineConfig c;
    if (!a.config.empty()) apply_json(c, read_config_file(a.config));
    if (a.seed) c.seed = *a.seed;
    c.propagate_seed();
    c.validate();
    const auto docs = read_corpus(a.corpus);
    auto gw = make_gateway(c);
    auto res = index(docs, c.indexer, *gw);

    GraphManifest m;
    m.config = to_json(c);
    m.embedding_model = gw->model_id();
    m.embedding_dimension = gw->provider().dimension();
    persist(res.graph, a.out, m);

    const auto& s = res.stats;
    nlohmann::json log = {{"documents", s.documents},
                          {"chunks", s.chunks},
                          {"types", s.types},
                          {"type_warnings", s.type_warnings},
                          {"extraction_failures", s.extraction_failures},
                          {"entities", res.graph.entity_count()},
                          {"relations", res.graph.relation_count()},
                          {"merge",
                           {{"candidate_pairs", s.merge.candidate_pairs},
                            {"approved_pairs", s.merge.approved_pairs},
                            {"judge_errors", s.merge.judge_errors},
                            {"entities_before", s.merge.entities_before},
                            {"entities_after", s.merge.entities_after},
                            {"self_loops_dropped", s.merge.self_loops_dropped}}}};
    write_text(fs::path(a.out) / "index_log.json", log.dump(2) + "\n");
    std::cout << "indexed " << s.documents << " documents, " << s.chunks << " chunks, " << res.graph.entity_count()
              << " entities, " << res.graph.relation_count() << " relations\n";
    return kOk;
}

int cmd_query(const QueryArgs& a) {
    if (text::trim(a.question).empty()) throw CliError("question must be non-empty");
    auto loaded = load_graph(a.graph);
    auto c = graph_config(loaded.manifest, a.config);
    if (a.top_k) c.navigation.top_k_entries = *a.top_k;
    if (a.tau) c.navigation.tau = *a.tau;
    if (a.alpha) c.navigation.alpha = *a.alpha;
    if (a.beta) c.navigation.beta = *a.beta;
    if (a.damping) c.navigation.damping = *a.damping;
    if (a.seed) c.seed = *a.seed;
    if (a.kg_only) c.chunk_top_k = 0;
    auto gw = gateway_for(c, loaded.manifest);

    Pipeline pipeline(loaded.graph, c.pipeline(), *gw);
    auto run = pipeline.run(a.question);
    if (!a.emit_subgraph.empty()) write_text(a.emit_subgraph, evidence_json(run, loaded.graph).dump(2) + "\n");
    if (!a.emit_context.empty()) write_text(a.emit_context, run.context.text());
    if (!run.evidence.diagnostic.empty()) spdlog::info("{}", run.evidence.diagnostic);
    std::cout << run.answer.text << "\n";
    return kOk;
}

int cmd_graph_stats(const std::string& graph) {
    const auto loaded = load_graph(graph);
    const auto m = graph_metrics(loaded.graph);
    std::printf("node_count,edge_count,avg_cc,lcc_ratio,iso_ratio,frag_ratio\n");
    std::printf("%zu,%zu,%.12g,%.12g,%.12g,%.12g\n", m.node_count, m.edge_count, m.avg_cc, m.lcc_ratio, m.iso_ratio,
                m.frag_ratio);
    return kOk;
}

int cmd_eval(const EvalArgs& a) {
    auto loaded = load_graph(a.graph);
    auto c = graph_config(loaded.manifest, a.config);
    auto gw = gateway_for(c, loaded.manifest);
    std::vector<std::string> metrics;
    if (a.metrics.empty()) {
        metrics = all_metrics();
    } else {
        for (auto m : text::split(a.metrics, ',')) {
            m = text::trim(m);
            if (!m.empty()) metrics.emplace_back(m);
        }
    }
    if (!fs::is_regular_file(a.questions)) throw CliError("questions file not found: " + a.questions);

    Pipeline pipeline(loaded.graph, c.pipeline(), *gw);
    const auto report = run_benchmark(a.questions, pipeline, metrics, c.eval);
    const fs::path out = a.out.empty() ? fs::path(".") : fs::path(a.out);
    write_text(out / "report.json", report.to_json().dump(2) + "\n");
    write_text(out / "report.csv", report.to_csv());
    std::cout << report.to_csv();
    if (report.failures > 0) {
        spdlog::warn("{} of {} items failed", report.failures, report.items.size());
        return kPartial;
    }
    return kOk;
}

int cmd_merge_audit(const std::string& graph, std::size_t bins, const std::string& out) {
    const auto loaded = load_graph(graph);
    EngineConfig c = graph_config(loaded.manifest, "");
    if (bins == 0) throw CliError("--bins must be >= 1");
    const auto csv = audit_csv(merge_audit(loaded.graph.merge_log(), c.indexer.gate_threshold, bins));
    if (out.empty()) {
        std::cout << csv;
    } else {
        write_text(out, csv);
    }
    return kOk;
}

} // namespace codarag::cli
