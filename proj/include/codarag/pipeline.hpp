#pragma once
// Query-time pipeline over one graph snapshot: cues -> navigation ->
// elimination -> chunk ranking -> context -> answer. The unfiltered context
// is kept alongside the filtered one so deletions can be audited.

#include <string>

#include "codarag/gateway.hpp"
#include "codarag/graph.hpp"
#include "codarag/navigator.hpp"
#include "codarag/refiner.hpp"

namespace codarag {

struct PipelineConfig {
    NavigationConfig navigation;
    std::size_t chunk_top_k = 5;     // 0 = graph-only context
    std::size_t context_budget = 8000;
    bool eliminate = true;           // false = identity filter
    std::size_t elimination_batch = 20;
};

struct PipelineRun {
    QueryCues cues;
    EvidenceSubgraph evidence;
    RefinedEvidence refined;
    AssembledContext unfiltered_context;
    AssembledContext context;
    Answer answer;
};

class Pipeline {
public:
    Pipeline(const KnowledgeGraph& graph, PipelineConfig config, Gateway& gateway)
        : graph_(graph), config_(std::move(config)), gateway_(gateway), navigator_(graph_, config_.navigation) {}

    const PipelineConfig& config() const { return config_; }
    const Navigator& navigator() const { return navigator_; }
    Gateway& gateway() { return gateway_; }

    PipelineRun run(const std::string& query) {
        PipelineRun run;
        run.cues = generate_cues(query, gateway_);
        run.evidence = navigator_.navigate(run.cues);

        const auto unfiltered = keep_all(run.evidence, query);
        run.unfiltered_context = build_context(unfiltered, graph_, rank_chunks(unfiltered, graph_, config_.chunk_top_k),
                                               config_.context_budget);
        if (config_.eliminate && !run.evidence.empty()) {
            run.refined = eliminate_interference(run.evidence, graph_, query, gateway_, config_.elimination_batch);
            run.context = build_context(run.refined, graph_, rank_chunks(run.refined, graph_, config_.chunk_top_k),
                                        config_.context_budget);
        } else {
            run.refined = unfiltered;
            run.context = run.unfiltered_context;
        }
        run.answer = generate_answer(query, run.context, gateway_);
        return run;
    }

private:
    const KnowledgeGraph& graph_;
    PipelineConfig config_;
    Gateway& gateway_;
    Navigator navigator_;
};

} // namespace codarag
