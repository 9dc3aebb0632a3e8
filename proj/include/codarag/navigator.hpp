#pragma once
// Retrieval-time navigation: entry finding followed by three association
// pathways (one-hop semantic expansion, query-conditioned personalized
// PageRank, and FastRP structural similarity).

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "codarag/error.hpp"
#include "codarag/gateway.hpp"
#include "codarag/graph.hpp"
#include "codarag/prompts.hpp"

namespace codarag {

struct FastRPConfig {
    std::size_t dimension = 256;
    double normalization_strength = -0.1;
    std::vector<double> iteration_weights{1.0, 1.0, 0.5, 0.25};
    std::uint64_t seed = 0;

    void validate() const {
        if (dimension == 0) throw PreconditionError("fastrp dimension must be >= 1");
        if (iteration_weights.empty()) throw PreconditionError("fastrp needs at least one iteration weight");
    }
};

struct NavigationConfig {
    double alpha = 0.5;
    double beta = 0.4;
    double tau = 0.35;
    double damping = 0.85;
    std::size_t top_k_entries = 10;
    std::size_t top_neighbors = 10;   // 0 disables semantic association
    std::size_t top_ppr_nodes = 20;   // 0 disables contextualized association
    std::size_t top_fastrp_nodes = 10; // 0 disables functional association
    double ppr_tolerance = 1e-8;
    std::size_t ppr_max_iterations = 100;
    FastRPConfig fastrp;
    std::uint64_t seed = 0;

    void validate() const {
        if (alpha < 0 || beta < 0) throw PreconditionError("alpha and beta must be >= 0");
        if (tau < 0 || tau > 1) throw PreconditionError("tau must lie in [0,1]");
        if (!(damping > 0 && damping < 1)) throw PreconditionError("damping must lie in (0,1)");
        if (top_k_entries == 0) throw PreconditionError("top_k_entries must be >= 1");
        fastrp.validate();
    }
};

struct QueryCues {
    std::vector<std::string> high_level;
    std::vector<std::string> low_level;
    std::vector<std::vector<float>> high_embeddings;
    std::vector<std::vector<float>> low_embeddings;
    bool fallback = false; // raw query used as the low-level cue
};

// Returns false when neither cue line is present.
inline bool parse_cues(std::string_view reply, std::vector<std::string>& high, std::vector<std::string>& low) {
    bool any = false;
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        std::vector<std::string>* target = nullptr;
        for (auto p : {"high_level", "high-level", "high level"}) {
            if (text::starts_with_ci(line, p)) target = &high;
        }
        for (auto p : {"low_level", "low-level", "low level"}) {
            if (text::starts_with_ci(line, p)) target = &low;
        }
        auto colon = line.find(':');
        if (!target || colon == std::string_view::npos) continue;
        any = true;
        for (auto part : text::split(line.substr(colon + 1), ',')) {
            std::string cue(text::trim(part));
            if (!cue.empty() && std::find(target->begin(), target->end(), cue) == target->end()) target->push_back(cue);
        }
    }
    return any;
}

inline void embed_cues(QueryCues& cues, Gateway& gateway) {
    std::vector<std::string> all(cues.high_level);
    all.insert(all.end(), cues.low_level.begin(), cues.low_level.end());
    if (all.empty()) return;
    auto vecs = gateway.embed(all);
    cues.high_embeddings.clear();
    cues.low_embeddings.clear();
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        (i < cues.high_level.size() ? cues.high_embeddings : cues.low_embeddings).push_back(std::move(vecs[i].values));
    }
}

inline QueryCues generate_cues(const std::string& query, Gateway& gateway) {
    if (text::trim(query).empty()) throw PreconditionError("query must be non-empty");
    QueryCues cues;
    const prompts::Vars vars{{"query", query}};
    std::string reply = gateway.complete(prompts::kCues, vars);
    if (!text::trim(reply).empty() && !parse_cues(reply, cues.high_level, cues.low_level)) {
        reply = gateway.complete(prompts::kCuesStrict, vars);
        if (!parse_cues(reply, cues.high_level, cues.low_level)) {
            spdlog::warn("cue reply unparseable after retry; using the raw query");
        }
    }
    if (cues.low_level.empty()) {
        cues.low_level.push_back(query);
        cues.fallback = true;
    }
    embed_cues(cues, gateway);
    return cues;
}

struct EntryResult {
    std::vector<ScoredEntity> entities;                  // ranked entry entities
    std::vector<std::pair<std::string, double>> relations; // ranked entry relations
    std::vector<std::string> entry_ids;                  // E0: entities plus entry-relation endpoints

    bool empty() const { return entry_ids.empty(); }
};

struct SemanticHit {
    std::string entity_id;
    double score = 0.0;
    std::string relation_id;
    std::string entry_id;
};

struct PathwayResult {
    std::vector<ScoredEntity> entities;
    std::set<std::string> relations;
    std::vector<double> scores; // full per-entity score vector in topology order, when applicable
};

inline double semantic_score(double alpha, double beta, double sim_rel, double sim_ent) {
    return alpha * sim_rel + beta * sim_ent;
}

// Row-stochastic transitions in CSR form; a row with no entries is dangling.
struct TransitionMatrix {
    std::vector<std::size_t> offsets; // n+1
    std::vector<std::size_t> target;
    std::vector<double> prob;

    std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

struct PprResult {
    std::vector<double> scores;
    std::size_t iterations = 0;
    double residual = 0.0;
};

// Iterates s <- (1-d) p + d (T^T s + m p), m = mass on dangling rows, from s = p
// until the L1 change drops below `tolerance` or `max_iterations` is reached.
inline PprResult personalized_pagerank(const TransitionMatrix& t, std::span<const double> personalization, double damping,
                                       double tolerance = 1e-8, std::size_t max_iterations = 100) {
    const std::size_t n = t.size();
    if (personalization.size() != n) throw PreconditionError("personalization size mismatch");
    PprResult res;
    res.scores.assign(personalization.begin(), personalization.end());
    std::vector<double> next(n);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        double dangling = 0.0;
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t u = 0; u < n; ++u) {
            const double s = res.scores[u];
            if (t.offsets[u] == t.offsets[u + 1]) {
                dangling += s;
                continue;
            }
            for (std::size_t k = t.offsets[u]; k < t.offsets[u + 1]; ++k) next[t.target[k]] += s * t.prob[k];
        }
        double delta = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            const double val = (1.0 - damping) * personalization[v] + damping * (next[v] + dangling * personalization[v]);
            delta += std::abs(val - res.scores[v]);
            next[v] = val;
        }
        res.scores.swap(next);
        res.iterations = it + 1;
        res.residual = delta;
        if (delta < tolerance) break;
    }
    return res;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - mx);
    for (auto& x : out) x /= sum;
    return out;
}

// Dense n x d row-major embedding table in topology order.
struct StructuralEmbeddings {
    std::vector<std::string> ids;
    std::size_t dimension = 0;
    std::vector<double> data;

    std::span<const double> row(std::size_t i) const { return {data.data() + i * dimension, dimension}; }
    std::map<std::string, std::vector<double>> by_id() const {
        std::map<std::string, std::vector<double>> out;
        for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], std::vector<double>(row(i).begin(), row(i).end()));
        return out;
    }
};

// Sparse {+1, 0, -1} row (nonzero with probability 1/3), seeded by (seed, entity id), unit L2 norm.
inline std::vector<double> random_projection_row(const std::string& entity_id, std::size_t dimension, std::uint64_t seed) {
    std::mt19937_64 rng(fnv1a64(entity_id) ^ splitmix64(seed));
    std::vector<double> row(dimension, 0.0);
    std::size_t nnz = 0;
    for (auto& x : row) {
        switch (rng() % 6) {
            case 0: x = 1.0; ++nnz; break;
            case 1: x = -1.0; ++nnz; break;
            default: break;
        }
    }
    if (nnz == 0) {
        row[fnv1a64(entity_id) % dimension] = 1.0;
        nnz = 1;
    }
    const double inv = 1.0 / std::sqrt(static_cast<double>(nnz));
    for (auto& x : row) x *= inv;
    return row;
}

// X = sum_k w_k D^r S^k R with S = D^-1/2 (A + I) D^-1/2, A the co-occurrence
// weighted adjacency and D the degree matrix of (A + I).
inline StructuralEmbeddings compute_structural_embeddings(const Topology& topo, const FastRPConfig& cfg) {
    cfg.validate();
    const std::size_t n = topo.size(), d = cfg.dimension;
    StructuralEmbeddings out;
    out.ids = topo.ids;
    out.dimension = d;
    out.data.assign(n * d, 0.0);
    if (n == 0) return out;

    std::vector<double> deg(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = topo.offsets[i]; k < topo.offsets[i + 1]; ++k) deg[i] += topo.relation_ptrs[topo.edge[k]]->weight;
    }
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);

    std::vector<double> cur(n * d), next(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = random_projection_row(topo.ids[i], d, cfg.seed);
        std::copy(r.begin(), r.end(), cur.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    auto accumulate = [&](double w) {
        for (std::size_t x = 0; x < n * d; ++x) out.data[x] += w * cur[x];
    };
    accumulate(cfg.iteration_weights[0]);
    for (std::size_t k = 1; k < cfg.iteration_weights.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            double* dst = next.data() + i * d;
            const double* self = cur.data() + i * d;
            const double self_w = 1.0 / deg[i];
            for (std::size_t c = 0; c < d; ++c) dst[c] = self_w * self[c];
            for (std::size_t e = topo.offsets[i]; e < topo.offsets[i + 1]; ++e) {
                const std::size_t j = topo.neighbor[e];
                const double w = topo.relation_ptrs[topo.edge[e]]->weight * inv_sqrt[i] * inv_sqrt[j];
                const double* src = cur.data() + j * d;
                for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
            }
        }
        cur.swap(next);
        accumulate(cfg.iteration_weights[k]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double scale = std::pow(deg[i], cfg.normalization_strength);
        for (std::size_t c = 0; c < d; ++c) out.data[i * d + c] *= scale;
    }
    return out;
}

inline StructuralEmbeddings compute_structural_embeddings(const KnowledgeGraph& g, const FastRPConfig& cfg) {
    return compute_structural_embeddings(Topology(g), cfg);
}

namespace detail {

inline bool ranked_before(const ScoredEntity& a, const ScoredEntity& b) {
    return a.score != b.score ? a.score > b.score : a.entity_id < b.entity_id;
}

inline std::set<std::string> induced_relations(const KnowledgeGraph& g, const std::set<std::string>& ids) {
    std::set<std::string> out;
    for (const auto& id : ids) {
        for (const auto& rid : g.adjacency().at(id)) {
            const Relation& r = g.relation(rid);
            if (ids.count(r.source_id) && ids.count(r.target_id)) out.insert(rid);
        }
    }
    return out;
}

} // namespace detail

// Union of pathway outputs: each entity keeps one tag per pathway (highest
// score if a pathway reached it twice); relations are unioned.
inline EvidenceSubgraph assemble_evidence(const EntryResult& entries, const std::vector<SemanticHit>& semantic,
                                          const PathwayResult& contextual, const PathwayResult& functional) {
    EvidenceSubgraph out;
    auto tag = [&](const std::string& id, double score, Pathway p) {
        auto& tags = out.entities[id];
        for (auto& t : tags) {
            if (t.pathway == p) {
                t.score = std::max(t.score, score);
                return;
            }
        }
        tags.push_back({id, score, p});
    };
    std::map<std::string, double> entry_score;
    for (const auto& e : entries.entities) entry_score[e.entity_id] = e.score;
    for (const auto& id : entries.entry_ids) {
        tag(id, entry_score.count(id) ? entry_score[id] : 0.0, Pathway::entry);
        out.entries.insert(id);
    }
    for (const auto& [rid, score] : entries.relations) out.relations.insert(rid);
    for (const auto& h : semantic) {
        tag(h.entity_id, h.score, Pathway::semantic);
        out.relations.insert(h.relation_id);
    }
    for (const auto& e : contextual.entities) tag(e.entity_id, e.score, Pathway::contextualized);
    out.relations.insert(contextual.relations.begin(), contextual.relations.end());
    for (const auto& e : functional.entities) tag(e.entity_id, e.score, Pathway::functional);
    out.relations.insert(functional.relations.begin(), functional.relations.end());
    for (auto& [id, tags] : out.entities) {
        std::sort(tags.begin(), tags.end(), [](const ScoredEntity& a, const ScoredEntity& b) { return a.pathway < b.pathway; });
    }
    return out;
}

// Navigation over one immutable graph snapshot. The topology and the
// structural embeddings are computed once at construction.
class Navigator {
public:
    Navigator(const KnowledgeGraph& graph, NavigationConfig config)
        : graph_(graph), config_(std::move(config)), topo_(graph) {
        config_.validate();
        structural_ = compute_structural_embeddings(topo_, config_.fastrp);
    }

    const NavigationConfig& config() const { return config_; }
    const Topology& topology() const { return topo_; }
    const StructuralEmbeddings& structural_embeddings() const { return structural_; }

    // Candidates with no positive similarity to any cue never become entries.
    EntryResult find_entries(const QueryCues& cues) const {
        EntryResult out;
        if (topo_.size() == 0) return out;
        std::vector<ScoredEntity> ents;
        if (!cues.low_embeddings.empty()) {
            for (std::size_t i = 0; i < topo_.size(); ++i) {
                const auto& emb = topo_.entity_ptrs[i]->embedding;
                if (emb.empty()) continue;
                const double sim = vec::max_cosine(emb, cues.low_embeddings);
                if (sim > 0.0) ents.push_back({topo_.ids[i], sim, Pathway::entry});
            }
        }
        top_k(ents, config_.top_k_entries);
        std::vector<std::pair<std::string, double>> rels;
        if (!cues.high_embeddings.empty()) {
            for (const auto* r : topo_.relation_ptrs) {
                if (r->embedding.empty()) continue;
                const double sim = vec::max_cosine(r->embedding, cues.high_embeddings);
                if (sim > 0.0) rels.emplace_back(r->id, sim);
            }
        }
        std::sort(rels.begin(), rels.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (rels.size() > config_.top_k_entries) rels.resize(config_.top_k_entries);

        std::set<std::string> seen;
        for (const auto& e : ents) {
            if (seen.insert(e.entity_id).second) out.entry_ids.push_back(e.entity_id);
        }
        for (const auto& [rid, s] : rels) {
            const Relation& r = graph_.relation(rid);
            for (const auto* id : {&r.source_id, &r.target_id}) {
                if (seen.insert(*id).second) out.entry_ids.push_back(*id);
            }
        }
        out.entities = std::move(ents);
        out.relations = std::move(rels);
        return out;
    }

    // One-hop expansion from each entry scored by alpha*sim_rel + beta*sim_ent,
    // pruned below tau and capped at top_neighbors per entry.
    std::vector<SemanticHit> semantic_association(const EntryResult& entries, const QueryCues& cues) const {
        std::vector<SemanticHit> out;
        if (config_.top_neighbors == 0) return out;
        for (const auto& entry : entries.entry_ids) {
            std::vector<SemanticHit> hits;
            for (const auto& nb : graph_.neighbors(entry)) {
                const double sim_rel = vec::max_cosine(nb.relation->embedding, cues.high_embeddings);
                const double sim_ent = vec::max_cosine(nb.entity->embedding, cues.low_embeddings);
                const double score = semantic_score(config_.alpha, config_.beta, sim_rel, sim_ent);
                if (score < config_.tau) continue;
                hits.push_back({nb.entity->id, score, nb.relation->id, entry});
            }
            std::sort(hits.begin(), hits.end(), [](const SemanticHit& a, const SemanticHit& b) {
                return a.score != b.score ? a.score > b.score : a.entity_id < b.entity_id;
            });
            if (hits.size() > config_.top_neighbors) hits.resize(config_.top_neighbors);
            out.insert(out.end(), hits.begin(), hits.end());
        }
        return out;
    }

    // Softmax personalization over E0 from low-level similarity.
    std::vector<double> personalization(const EntryResult& entries, const QueryCues& cues) const {
        std::vector<double> p(topo_.size(), 0.0);
        std::vector<double> logits;
        for (const auto& id : entries.entry_ids) {
            logits.push_back(vec::max_cosine(graph_.entity(id).embedding, cues.low_embeddings));
        }
        const auto w = softmax(logits);
        for (std::size_t k = 0; k < entries.entry_ids.size(); ++k) p[topo_.index.at(entries.entry_ids[k])] += w[k];
        return p;
    }

    // Softmax over each node's incident edges of the relation/high-cue
    // affinity; weight-proportional when the query has no high-level cues.
    TransitionMatrix transitions(const QueryCues& cues) const {
        TransitionMatrix t;
        t.offsets = topo_.offsets;
        t.target = topo_.neighbor;
        t.prob.assign(topo_.neighbor.size(), 0.0);
        std::vector<double> affinity(topo_.relation_ptrs.size());
        const bool use_cues = !cues.high_embeddings.empty();
        for (std::size_t r = 0; r < affinity.size(); ++r) {
            affinity[r] = use_cues ? vec::max_cosine(topo_.relation_ptrs[r]->embedding, cues.high_embeddings)
                                   : topo_.relation_ptrs[r]->weight;
        }
        std::vector<double> local;
        for (std::size_t i = 0; i < topo_.size(); ++i) {
            const std::size_t b = topo_.offsets[i], e = topo_.offsets[i + 1];
            if (b == e) continue;
            local.clear();
            for (std::size_t k = b; k < e; ++k) local.push_back(affinity[topo_.edge[k]]);
            if (use_cues) {
                const auto sm = softmax(local);
                std::copy(sm.begin(), sm.end(), t.prob.begin() + static_cast<std::ptrdiff_t>(b));
            } else {
                double sum = 0.0;
                for (double x : local) sum += x;
                for (std::size_t k = b; k < e; ++k) t.prob[k] = local[k - b] / sum;
            }
        }
        return t;
    }

    PathwayResult contextualized_association(const EntryResult& entries, const QueryCues& cues) const {
        PathwayResult out;
        if (config_.top_ppr_nodes == 0 || entries.empty()) return out;
        const auto p = personalization(entries, cues);
        auto ppr = personalized_pagerank(transitions(cues), p, config_.damping, config_.ppr_tolerance,
                                         config_.ppr_max_iterations);
        std::vector<ScoredEntity> ranked;
        ranked.reserve(topo_.size());
        for (std::size_t i = 0; i < topo_.size(); ++i) ranked.push_back({topo_.ids[i], ppr.scores[i], Pathway::contextualized});
        top_k(ranked, config_.top_ppr_nodes);
        std::set<std::string> ids;
        for (const auto& e : ranked) ids.insert(e.entity_id);
        out.relations = detail::induced_relations(graph_, ids);
        out.entities = std::move(ranked);
        out.scores = std::move(ppr.scores);
        return out;
    }

    // Mean structural cosine to the entry set; entries themselves excluded.
    PathwayResult functional_association(const EntryResult& entries) const {
        PathwayResult out;
        if (config_.top_fastrp_nodes == 0 || entries.empty()) return out;
        std::vector<std::size_t> entry_idx;
        std::set<std::string> entry_set(entries.entry_ids.begin(), entries.entry_ids.end());
        for (const auto& id : entries.entry_ids) entry_idx.push_back(topo_.index.at(id));
        std::vector<ScoredEntity> ranked;
        out.scores.assign(topo_.size(), 0.0);
        for (std::size_t i = 0; i < topo_.size(); ++i) {
            double s = 0.0;
            for (std::size_t e : entry_idx) s += vec::cosine(structural_.row(e), structural_.row(i));
            s /= static_cast<double>(entry_idx.size());
            out.scores[i] = s;
            if (!entry_set.count(topo_.ids[i])) ranked.push_back({topo_.ids[i], s, Pathway::functional});
        }
        top_k(ranked, config_.top_fastrp_nodes);
        std::set<std::string> ids(entry_set);
        for (const auto& e : ranked) ids.insert(e.entity_id);
        out.relations = detail::induced_relations(graph_, ids);
        out.entities = std::move(ranked);
        return out;
    }

    EvidenceSubgraph navigate(const QueryCues& cues) const {
        const auto entries = find_entries(cues);
        if (entries.empty()) {
            EvidenceSubgraph empty;
            empty.diagnostic = "no entry entities found";
            return empty;
        }
        return assemble_evidence(entries, semantic_association(entries, cues), contextualized_association(entries, cues),
                                 functional_association(entries));
    }

    EvidenceSubgraph navigate(const std::string& query, Gateway& gateway) const {
        return navigate(generate_cues(query, gateway));
    }

private:
    static void top_k(std::vector<ScoredEntity>& v, std::size_t k) {
        if (v.size() > k) {
            std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), detail::ranked_before);
            v.resize(k);
        } else {
            std::sort(v.begin(), v.end(), detail::ranked_before);
        }
    }

    const KnowledgeGraph& graph_;
    NavigationConfig config_;
    Topology topo_;
    StructuralEmbeddings structural_;
};

} // namespace codarag
