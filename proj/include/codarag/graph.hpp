#pragma once
// Knowledge-graph data model: entities, relations, chunks, the consolidated
// graph with its adjacency, evidence subgraphs and structural metrics.

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codarag/error.hpp"
#include "codarag/util.hpp"

namespace codarag {

inline constexpr std::string_view kDescriptionSeparator = " | ";
inline constexpr std::size_t kDescriptionCap = 2000;

struct Entity {
    std::string id;
    std::string name;
    std::string type_label;
    std::string description;
    std::set<std::string> aliases;   // always contains `name` once stored
    std::set<std::string> chunk_ids;
    std::vector<float> embedding;    // unit norm when present

    bool operator==(const Entity&) const = default;
};

struct Relation {
    std::string id;
    std::string source_id;
    std::string target_id;
    std::string description;
    std::vector<std::string> keywords;
    double weight = 1.0;             // corpus-level co-occurrence count
    std::set<std::string> chunk_ids;
    std::vector<float> embedding;

    bool operator==(const Relation&) const = default;
};

struct Chunk {
    std::string id;
    std::string doc_id;
    std::size_t ordinal = 0;
    std::string text;
    std::size_t token_begin = 0;     // [begin, end) in the document token sequence
    std::size_t token_end = 0;

    bool operator==(const Chunk&) const = default;
};

struct TypeDef {
    std::string label;
    std::string definition;
    std::vector<std::string> provenance; // suggesting document ids, sorted

    bool operator==(const TypeDef&) const = default;
};

// One judged pair from entity merging, kept for the merge audit.
struct MergeRecord {
    std::string entity_a;
    std::string entity_b;
    double similarity = 0.0;
    bool merged = false;

    bool operator==(const MergeRecord&) const = default;
};

inline std::string entity_id_for(std::string_view name) { return "ent:" + text::lower(text::trim(name)); }

inline std::string relation_id_for(const std::string& a, const std::string& b) {
    return a < b ? "rel:" + a + "|" + b : "rel:" + b + "|" + a;
}

// Appends `addition` unless already present as a segment; keeps the newest
// kDescriptionCap characters, dropping from the oldest end.
inline std::string accumulate_description(const std::string& existing, const std::string& addition) {
    if (addition.empty()) return existing;
    if (existing.empty()) return addition.substr(addition.size() > kDescriptionCap ? addition.size() - kDescriptionCap : 0);
    for (auto seg : text::split(existing, '|')) {
        if (text::trim(seg) == text::trim(addition)) return existing;
    }
    std::string out = existing;
    out.append(kDescriptionSeparator);
    out.append(addition);
    if (out.size() > kDescriptionCap) {
        std::size_t cut = out.size() - kDescriptionCap;
        auto sep = out.find(kDescriptionSeparator, cut);
        if (sep != std::string::npos && sep + kDescriptionSeparator.size() < out.size()) {
            cut = sep + kDescriptionSeparator.size();
        }
        out.erase(0, cut);
    }
    return out;
}

enum class Pathway { entry, semantic, contextualized, functional };

inline std::string_view to_string(Pathway p) {
    switch (p) {
        case Pathway::entry: return "entry";
        case Pathway::semantic: return "semantic";
        case Pathway::contextualized: return "contextualized";
        case Pathway::functional: return "functional";
    }
    return "?";
}

struct ScoredEntity {
    std::string entity_id;
    double score = 0.0;
    Pathway pathway = Pathway::entry;

    bool operator==(const ScoredEntity&) const = default;
};

// Query-relevant evidence: every entity keeps one tag per pathway that reached it.
struct EvidenceSubgraph {
    std::map<std::string, std::vector<ScoredEntity>> entities;
    std::set<std::string> relations;
    std::set<std::string> entries;
    std::string diagnostic;

    bool empty() const { return entities.empty(); }
    bool operator==(const EvidenceSubgraph&) const = default;
};

struct Neighbor {
    const Entity* entity;
    const Relation* relation;
};

class KnowledgeGraph {
public:
    const std::map<std::string, Entity>& entities() const { return entities_; }
    const std::map<std::string, Relation>& relations() const { return relations_; }
    const std::map<std::string, Chunk>& chunks() const { return chunks_; }
    const std::map<std::string, std::vector<std::string>>& adjacency() const { return adjacency_; }
    const std::vector<TypeDef>& type_inventory() const { return types_; }
    const std::vector<MergeRecord>& merge_log() const { return merge_log_; }

    std::size_t entity_count() const { return entities_.size(); }
    std::size_t relation_count() const { return relations_.size(); }

    void set_type_inventory(std::vector<TypeDef> types) { types_ = std::move(types); }
    void set_merge_log(std::vector<MergeRecord> log) { merge_log_ = std::move(log); }

    const Entity* find_entity(const std::string& id) const {
        auto it = entities_.find(id);
        return it == entities_.end() ? nullptr : &it->second;
    }
    const Relation* find_relation(const std::string& id) const {
        auto it = relations_.find(id);
        return it == relations_.end() ? nullptr : &it->second;
    }
    const Entity& entity(const std::string& id) const {
        if (auto* e = find_entity(id)) return *e;
        throw NotFoundError("entity not found: " + id);
    }
    const Relation& relation(const std::string& id) const {
        if (auto* r = find_relation(id)) return *r;
        throw NotFoundError("relation not found: " + id);
    }
    Entity& mutable_entity(const std::string& id) {
        auto it = entities_.find(id);
        if (it == entities_.end()) throw NotFoundError("entity not found: " + id);
        return it->second;
    }
    Relation& mutable_relation(const std::string& id) {
        auto it = relations_.find(id);
        if (it == relations_.end()) throw NotFoundError("relation not found: " + id);
        return it->second;
    }

    // Inserts, or merges into the entity with the same id.
    void upsert_entity(Entity e) {
        if (text::trim(e.name).empty()) throw PreconditionError("entity name must be non-empty");
        if (e.id.empty()) e.id = entity_id_for(e.name);
        auto it = entities_.find(e.id);
        if (it == entities_.end()) {
            e.aliases.insert(e.name);
            adjacency_.try_emplace(e.id);
            entities_.emplace(e.id, std::move(e));
            return;
        }
        Entity& cur = it->second;
        cur.description = accumulate_description(cur.description, e.description);
        cur.aliases.insert(e.name);
        cur.aliases.insert(e.aliases.begin(), e.aliases.end());
        cur.chunk_ids.insert(e.chunk_ids.begin(), e.chunk_ids.end());
        if (cur.type_label.empty()) cur.type_label = e.type_label;
        if (!e.embedding.empty()) cur.embedding = std::move(e.embedding);
    }

    // Inserts, or merges into the relation over the same unordered endpoint pair
    // (weights summed). Returns the id of the stored relation.
    std::string upsert_relation(Relation r) {
        if (r.source_id == r.target_id) throw InvariantError("self-loop rejected: " + r.source_id);
        if (!entities_.count(r.source_id)) throw NotFoundError("endpoint not found: " + r.source_id);
        if (!entities_.count(r.target_id)) throw NotFoundError("endpoint not found: " + r.target_id);
        if (r.weight < 1.0) throw InvariantError("relation weight must be >= 1");
        const auto key = pair_key(r.source_id, r.target_id);
        if (auto pit = pair_index_.find(key); pit != pair_index_.end()) {
            Relation& cur = relations_.at(pit->second);
            cur.description = accumulate_description(cur.description, r.description);
            for (auto& k : r.keywords) {
                if (std::find(cur.keywords.begin(), cur.keywords.end(), k) == cur.keywords.end())
                    cur.keywords.push_back(std::move(k));
            }
            cur.weight += r.weight;
            cur.chunk_ids.insert(r.chunk_ids.begin(), r.chunk_ids.end());
            if (!r.embedding.empty()) cur.embedding = std::move(r.embedding);
            return cur.id;
        }
        if (r.id.empty()) r.id = relation_id_for(r.source_id, r.target_id);
        if (relations_.count(r.id)) throw InvariantError("relation id reused for a different pair: " + r.id);
        link(r.source_id, r.id);
        link(r.target_id, r.id);
        pair_index_.emplace(key, r.id);
        std::string id = r.id;
        relations_.emplace(id, std::move(r));
        return id;
    }

    void upsert_chunk(Chunk c) { chunks_.insert_or_assign(c.id, std::move(c)); }

    // (neighbor, connecting relation) pairs ordered by neighbor id.
    std::vector<Neighbor> neighbors(const std::string& id) const {
        auto it = adjacency_.find(id);
        if (it == adjacency_.end()) throw NotFoundError("entity not found: " + id);
        std::vector<Neighbor> out;
        out.reserve(it->second.size());
        for (const auto& rid : it->second) {
            const Relation& r = relations_.at(rid);
            const auto& other = r.source_id == id ? r.target_id : r.source_id;
            out.push_back({&entities_.at(other), &r});
        }
        std::sort(out.begin(), out.end(),
                  [](const Neighbor& a, const Neighbor& b) { return a.entity->id < b.entity->id; });
        return out;
    }

    std::size_t degree(const std::string& id) const {
        auto it = adjacency_.find(id);
        return it == adjacency_.end() ? 0 : it->second.size();
    }

    // Adjacency rebuilt from scratch out of the relation map.
    std::map<std::string, std::vector<std::string>> rebuilt_adjacency() const {
        std::map<std::string, std::vector<std::string>> adj;
        for (const auto& [id, e] : entities_) adj[id];
        for (const auto& [rid, r] : relations_) {
            adj[r.source_id].push_back(rid);
            adj[r.target_id].push_back(rid);
        }
        for (auto& [id, list] : adj) std::sort(list.begin(), list.end());
        return adj;
    }

    bool adjacency_consistent() const { return rebuilt_adjacency() == adjacency_; }

    bool operator==(const KnowledgeGraph& o) const {
        return entities_ == o.entities_ && relations_ == o.relations_ && chunks_ == o.chunks_ &&
               types_ == o.types_ && merge_log_ == o.merge_log_ && adjacency_ == o.adjacency_;
    }

private:
    static std::pair<std::string, std::string> pair_key(const std::string& a, const std::string& b) {
        return a < b ? std::pair{a, b} : std::pair{b, a};
    }

    void link(const std::string& entity_id, const std::string& rel_id) {
        auto& list = adjacency_[entity_id];
        list.insert(std::upper_bound(list.begin(), list.end(), rel_id), rel_id);
    }

    std::map<std::string, Entity> entities_;
    std::map<std::string, Relation> relations_;
    std::map<std::string, Chunk> chunks_;
    std::map<std::string, std::vector<std::string>> adjacency_;
    std::map<std::pair<std::string, std::string>, std::string> pair_index_;
    std::vector<TypeDef> types_;
    std::vector<MergeRecord> merge_log_;
};

// Exactly the given entities plus every relation with both endpoints inside.
inline EvidenceSubgraph induced_subgraph(const KnowledgeGraph& g, const std::set<std::string>& ids) {
    EvidenceSubgraph out;
    for (const auto& id : ids) {
        if (!g.find_entity(id)) throw NotFoundError("entity not found: " + id);
        out.entities.try_emplace(id);
    }
    for (const auto& id : ids) {
        for (const auto& rid : g.adjacency().at(id)) {
            const Relation& r = g.relation(rid);
            if (ids.count(r.source_id) && ids.count(r.target_id)) out.relations.insert(rid);
        }
    }
    return out;
}

// Dense index over a graph snapshot: entity ids in sorted order and a CSR
// neighbor list carrying the relation index of every incident edge.
struct Topology {
    std::vector<std::string> ids;
    std::map<std::string, std::size_t> index;
    std::vector<const Entity*> entity_ptrs;
    std::vector<const Relation*> relation_ptrs;
    std::vector<std::size_t> offsets;   // size n+1
    std::vector<std::size_t> neighbor;  // entity index
    std::vector<std::size_t> edge;      // relation index

    explicit Topology(const KnowledgeGraph& g) {
        ids.reserve(g.entity_count());
        for (const auto& [id, e] : g.entities()) {
            index.emplace(id, ids.size());
            ids.push_back(id);
            entity_ptrs.push_back(&e);
        }
        std::map<std::string, std::size_t> rel_index;
        for (const auto& [rid, r] : g.relations()) {
            rel_index.emplace(rid, relation_ptrs.size());
            relation_ptrs.push_back(&r);
        }
        offsets.assign(ids.size() + 1, 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& adj = g.adjacency().at(ids[i]);
            offsets[i + 1] = offsets[i] + adj.size();
            for (const auto& rid : adj) {
                const Relation& r = g.relation(rid);
                const auto& other = r.source_id == ids[i] ? r.target_id : r.source_id;
                neighbor.push_back(index.at(other));
                edge.push_back(rel_index.at(rid));
            }
        }
    }

    std::size_t size() const { return ids.size(); }
    std::size_t degree(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

struct GraphMetrics {
    std::size_t node_count = 0;
    std::size_t edge_count = 0;
    double avg_cc = 0.0;     // mean local clustering coefficient, degree<2 counts as 0
    double lcc_ratio = 0.0;  // largest non-isolated component / nodes
    double iso_ratio = 0.0;  // isolated nodes / nodes
    double frag_ratio = 0.0; // non-isolated components / nodes

    bool operator==(const GraphMetrics&) const = default;
};

// Empty graph reports all-zero metrics.
inline GraphMetrics graph_metrics(const KnowledgeGraph& g) {
    GraphMetrics m;
    const Topology t(g);
    const std::size_t n = t.size();
    m.node_count = n;
    m.edge_count = g.relation_count();
    if (n == 0) return m;

    // Local clustering via sorted neighbor lists.
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i) {
        nbrs[i].assign(t.neighbor.begin() + t.offsets[i], t.neighbor.begin() + t.offsets[i + 1]);
        std::sort(nbrs[i].begin(), nbrs[i].end());
    }
    double cc_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = nbrs[i].size();
        if (k < 2) continue;
        std::size_t links = 0;
        for (std::size_t a = 0; a < k; ++a) {
            const auto& na = nbrs[nbrs[i][a]];
            for (std::size_t b = a + 1; b < k; ++b) {
                if (std::binary_search(na.begin(), na.end(), nbrs[i][b])) ++links;
            }
        }
        cc_sum += 2.0 * static_cast<double>(links) / (static_cast<double>(k) * static_cast<double>(k - 1));
    }
    m.avg_cc = cc_sum / static_cast<double>(n);

    // Components by union-find.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : nbrs[i]) {
            auto a = find(i), b = find(j);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    std::map<std::size_t, std::size_t> comp_size;
    std::size_t isolated = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (nbrs[i].empty()) {
            ++isolated;
        } else {
            ++comp_size[find(i)];
        }
    }
    std::size_t largest = 0;
    for (const auto& [root, size] : comp_size) largest = std::max(largest, size);
    const double dn = static_cast<double>(n);
    m.lcc_ratio = static_cast<double>(largest) / dn;
    m.iso_ratio = static_cast<double>(isolated) / dn;
    m.frag_ratio = static_cast<double>(comp_size.size()) / dn;
    return m;
}

} // namespace codarag
