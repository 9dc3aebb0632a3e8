#pragma once
// Indexing: corpus -> chunks -> type inventory -> extraction -> consolidated graph.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "codarag/error.hpp"
#include "codarag/gateway.hpp"
#include "codarag/graph.hpp"
#include "codarag/parallel.hpp"
#include "codarag/prompts.hpp"

namespace codarag {

enum class Tokenizer { whitespace, provider };

struct ChunkingConfig {
    std::size_t chunk_tokens = 1200;
    std::size_t overlap_tokens = 100;
    Tokenizer tokenizer = Tokenizer::whitespace;

    void validate() const {
        if (chunk_tokens == 0) throw PreconditionError("chunk_tokens must be positive");
        if (overlap_tokens >= chunk_tokens) throw PreconditionError("overlap_tokens must be < chunk_tokens");
    }
};

struct Document {
    std::string id;
    std::string text;
};

inline std::string chunk_id_for(const std::string& doc_id, std::size_t ordinal) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "#%05zu", ordinal);
    return doc_id + buf;
}

// Sliding windows of chunk_tokens with stride chunk_tokens - overlap_tokens.
// A document that fits one window yields one chunk; longer documents get a
// window at every stride offset below the token count, so the tail window
// may be short.
inline std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, const ChunkingConfig& config,
                                       const Provider* tokenizer = nullptr) {
    config.validate();
    std::vector<Chunk> out;
    const std::size_t stride = config.chunk_tokens - config.overlap_tokens;
    for (const auto& doc : docs) {
        const auto tokens = (config.tokenizer == Tokenizer::provider && tokenizer) ? tokenizer->tokenize(doc.text)
                                                                                    : text::whitespace_tokens(doc.text);
        const std::size_t n = tokens.size();
        if (n == 0) continue;
        std::vector<std::size_t> starts;
        if (n <= config.chunk_tokens) {
            starts.push_back(0);
        } else {
            for (std::size_t s = 0; s < n; s += stride) starts.push_back(s);
        }
        for (std::size_t k = 0; k < starts.size(); ++k) {
            const std::size_t b = starts[k];
            const std::size_t e = std::min(n, b + config.chunk_tokens);
            Chunk c;
            c.id = chunk_id_for(doc.id, k);
            c.doc_id = doc.id;
            c.ordinal = k;
            c.token_begin = b;
            c.token_end = e;
            c.text = doc.text.substr(tokens[b].begin, tokens[e - 1].end - tokens[b].begin);
            out.push_back(std::move(c));
        }
    }
    return out;
}

struct TypeCandidate {
    std::string label;
    std::string definition;
};

struct SuggestResult {
    std::vector<TypeCandidate> candidates;
    std::size_t warnings = 0; // malformed lines dropped
};

// "label: definition" lines; list markers and numbering are tolerated.
inline SuggestResult parse_type_lines(std::string_view reply) {
    SuggestResult out;
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        if (line.empty()) continue;
        while (!line.empty() && (line.front() == '-' || line.front() == '*')) line = text::trim(line.substr(1));
        std::size_t digits = 0;
        while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
        if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')'))
            line = text::trim(line.substr(digits + 1));
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            ++out.warnings;
            continue;
        }
        auto label = text::trim(line.substr(0, colon));
        auto def = text::trim(line.substr(colon + 1));
        while (!label.empty() && (label.front() == '`' || label.front() == '*')) label.remove_prefix(1);
        while (!label.empty() && (label.back() == '`' || label.back() == '*')) label.remove_suffix(1);
        if (label.empty() || label.size() > 64 || def.empty()) {
            ++out.warnings;
            continue;
        }
        out.candidates.push_back({text::lower(label), std::string(def)});
    }
    return out;
}

inline SuggestResult suggest_types(const Chunk& chunk, Gateway& gateway) {
    auto result = parse_type_lines(gateway.complete(prompts::kSuggestTypes, {{"text", chunk.text}}));
    if (result.warnings) spdlog::warn("chunk {}: dropped {} malformed type line(s)", chunk.id, result.warnings);
    return result;
}

// A suggested type together with the documents that suggested it.
struct AggregatedCandidate {
    std::string label;
    std::string definition;
    std::set<std::string> documents;
};

// Collapses exact (case-insensitive) duplicates, keeping first definition.
inline std::vector<AggregatedCandidate> aggregate_candidates(
    const std::vector<std::pair<std::string, TypeCandidate>>& by_document) {
    std::vector<AggregatedCandidate> out;
    std::map<std::string, std::size_t> pos;
    for (const auto& [doc, c] : by_document) {
        const auto key = text::lower(c.label);
        auto it = pos.find(key);
        if (it == pos.end()) {
            pos.emplace(key, out.size());
            out.push_back({key, c.definition, {doc}});
        } else {
            out[it->second].documents.insert(doc);
        }
    }
    return out;
}

inline std::vector<TypeDef> refine_types(const std::vector<AggregatedCandidate>& candidates, Gateway& gateway,
                                         std::size_t cap = 30) {
    if (candidates.empty()) throw PreconditionError("refine_types needs at least one candidate");
    if (cap == 0) throw PreconditionError("type cap must be positive");
    std::map<std::string, const AggregatedCandidate*> by_label;
    for (const auto& c : candidates) by_label.emplace(text::lower(c.label), &c);

    auto to_def = [](const AggregatedCandidate& c, std::string definition) {
        return TypeDef{c.label, std::move(definition), {c.documents.begin(), c.documents.end()}};
    };
    if (by_label.size() == 1) return {to_def(candidates.front(), candidates.front().definition)};

    std::string listing;
    for (const auto& c : candidates) listing += c.label + ": " + c.definition + "\n";
    const prompts::Vars vars{{"cap", std::to_string(cap)}, {"candidates", listing}};

    auto attempt = [&](const prompts::Template& t) {
        std::vector<TypeDef> inv;
        std::set<std::string> seen;
        const auto parsed = parse_type_lines(gateway.complete(t, vars));
        for (const auto& c : parsed.candidates) {
            auto it = by_label.find(c.label);
            if (it == by_label.end()) {
                spdlog::warn("refined type '{}' not among candidates; dropped", c.label);
                continue;
            }
            if (!seen.insert(c.label).second) continue;
            inv.push_back(to_def(*it->second, c.definition));
            if (inv.size() == cap) break;
        }
        return inv;
    };
    auto inv = attempt(prompts::kRefineTypes);
    if (inv.empty()) inv = attempt(prompts::kRefineTypesStrict);
    if (inv.empty()) throw JudgeFormatError("type refinement reply unparseable after retry");
    return inv;
}

struct ExtractionResult {
    std::vector<Entity> entities;
    std::vector<Relation> relations;
};

// Parses entity|... and relation|... records. Other lines are ignored; a
// record line with missing fields makes the whole reply unparseable.
inline ExtractionResult parse_extraction(std::string_view reply, const Chunk& chunk, const std::vector<TypeDef>& inventory) {
    ExtractionResult out;
    std::set<std::string> labels;
    for (const auto& t : inventory) labels.insert(text::lower(t.label));
    std::map<std::string, std::size_t> entity_pos;
    std::vector<std::vector<std::string_view>> relation_lines;
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        if (text::starts_with_ci(line, "entity|")) {
            auto f = text::split(line, '|');
            if (f.size() < 4 || text::trim(f[1]).empty()) throw JudgeFormatError("malformed entity record: " + std::string(line));
            Entity e;
            e.name = std::string(text::trim(f[1]));
            e.id = entity_id_for(e.name);
            const auto type = text::lower(text::trim(f[2]));
            e.type_label = labels.count(type) ? type : "other";
            std::vector<std::string_view> rest(f.begin() + 3, f.end());
            e.description = std::string(text::trim(text::join(rest, "|")));
            e.chunk_ids = {chunk.id};
            e.aliases = {e.name};
            if (auto it = entity_pos.find(e.id); it != entity_pos.end()) {
                auto& cur = out.entities[it->second];
                cur.description = accumulate_description(cur.description, e.description);
                cur.aliases.insert(e.name);
            } else {
                entity_pos.emplace(e.id, out.entities.size());
                out.entities.push_back(std::move(e));
            }
        } else if (text::starts_with_ci(line, "relation|")) {
            auto f = text::split(line, '|');
            if (f.size() < 5) throw JudgeFormatError("malformed relation record: " + std::string(line));
            relation_lines.push_back(std::move(f));
        }
    }
    for (const auto& f : relation_lines) {
        const auto a = entity_id_for(text::trim(f[1]));
        const auto b = entity_id_for(text::trim(f[2]));
        if (a == b || !entity_pos.count(a) || !entity_pos.count(b)) continue;
        Relation r;
        r.source_id = a;
        r.target_id = b;
        r.id = relation_id_for(a, b);
        for (auto k : text::split(f[3], ',')) {
            auto kw = text::lower(text::trim(k));
            if (!kw.empty() && std::find(r.keywords.begin(), r.keywords.end(), kw) == r.keywords.end()) r.keywords.push_back(kw);
        }
        std::vector<std::string_view> rest(f.begin() + 4, f.end());
        r.description = std::string(text::trim(text::join(rest, "|")));
        r.weight = 1.0;
        r.chunk_ids = {chunk.id};
        out.relations.push_back(std::move(r));
    }
    return out;
}

inline ExtractionResult extract(const Chunk& chunk, const std::vector<TypeDef>& inventory, Gateway& gateway) {
    if (inventory.empty()) throw PreconditionError("extraction needs a non-empty type inventory");
    std::string types;
    for (const auto& t : inventory) types += t.label + ": " + t.definition + "\n";
    return parse_extraction(gateway.complete(prompts::kExtract, {{"types", types}, {"text", chunk.text}}), chunk, inventory);
}

inline std::string entity_embedding_text(const Entity& e) { return e.name + ": " + e.description; }

inline std::string relation_embedding_text(const Relation& r) {
    return text::join(r.keywords, ", ") + ": " + r.description;
}

// Embeds the given entities and relations in fixed-size batches.
inline void embed_items(KnowledgeGraph& g, Gateway& gateway, const std::vector<std::string>& entity_ids,
                        const std::vector<std::string>& relation_ids, std::size_t batch = 64) {
    for (std::size_t i = 0; i < entity_ids.size(); i += batch) {
        std::vector<std::string> texts;
        const std::size_t end = std::min(entity_ids.size(), i + batch);
        for (std::size_t k = i; k < end; ++k) texts.push_back(entity_embedding_text(g.entity(entity_ids[k])));
        auto vecs = gateway.embed(texts);
        for (std::size_t k = i; k < end; ++k) g.mutable_entity(entity_ids[k]).embedding = std::move(vecs[k - i].values);
    }
    for (std::size_t i = 0; i < relation_ids.size(); i += batch) {
        std::vector<std::string> texts;
        const std::size_t end = std::min(relation_ids.size(), i + batch);
        for (std::size_t k = i; k < end; ++k) texts.push_back(relation_embedding_text(g.relation(relation_ids[k])));
        auto vecs = gateway.embed(texts);
        for (std::size_t k = i; k < end; ++k) g.mutable_relation(relation_ids[k]).embedding = std::move(vecs[k - i].values);
    }
}

inline void embed_all(KnowledgeGraph& g, Gateway& gateway) {
    std::vector<std::string> eids, rids;
    for (const auto& [id, e] : g.entities()) eids.push_back(id);
    for (const auto& [id, r] : g.relations()) rids.push_back(id);
    embed_items(g, gateway, eids, rids);
}

struct MergeStats {
    std::size_t candidate_pairs = 0; // pairs at or above the gate (all judged)
    std::size_t approved_pairs = 0;
    std::size_t judge_errors = 0;
    std::size_t entities_before = 0;
    std::size_t entities_after = 0;
    std::size_t self_loops_dropped = 0;
};

struct MergeResult {
    KnowledgeGraph graph;
    MergeStats stats;
    std::vector<MergeRecord> judged; // this run's judged pairs
};

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

} // namespace detail

// Similarity-gated, judge-approved entity merging with transitive closure.
inline MergeResult merge_entities(const KnowledgeGraph& graph, double gate_threshold, Gateway& gateway) {
    MergeResult res;
    std::vector<const Entity*> ents;
    for (const auto& [id, e] : graph.entities()) {
        if (e.embedding.empty()) throw PreconditionError("merge_entities: entity not embedded: " + id);
        ents.push_back(&e);
    }
    res.stats.entities_before = ents.size();

    std::vector<MergeRecord> candidates;
    for (std::size_t i = 0; i < ents.size(); ++i) {
        for (std::size_t j = i + 1; j < ents.size(); ++j) {
            const double sim = vec::cosine(ents[i]->embedding, ents[j]->embedding);
            if (sim >= gate_threshold) candidates.push_back({ents[i]->id, ents[j]->id, sim, false});
        }
    }
    res.stats.candidate_pairs = candidates.size();

    std::vector<char> failed(candidates.size(), 0);
    parallel_for(candidates.size(), gateway.parallelism(), [&](std::size_t k) {
        const Entity& a = graph.entity(candidates[k].entity_a);
        const Entity& b = graph.entity(candidates[k].entity_b);
        try {
            const auto v = gateway.judge(JudgeKind::merge, {{"name_a", a.name},
                                                            {"description_a", a.description},
                                                            {"name_b", b.name},
                                                            {"description_b", b.description}});
            candidates[k].merged = v.decision == Decision::merge;
        } catch (const Error& e) {
            spdlog::warn("merge judge failed for ({}, {}): {}; keeping distinct", a.id, b.id, e.what());
            failed[k] = 1;
        }
    });
    res.stats.judge_errors = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));

    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < ents.size(); ++i) pos.emplace(ents[i]->id, i);
    detail::UnionFind uf(ents.size());
    for (const auto& c : candidates) {
        if (!c.merged) continue;
        ++res.stats.approved_pairs;
        uf.unite(pos.at(c.entity_a), pos.at(c.entity_b));
    }

    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ents.size(); ++i) groups[uf.find(i)].push_back(i);

    KnowledgeGraph out;
    out.set_type_inventory(graph.type_inventory());
    for (const auto& [cid, c] : graph.chunks()) out.upsert_chunk(c);

    std::map<std::string, std::string> canonical_of;
    std::vector<std::string> reembed_entities;
    for (const auto& [root, members] : groups) {
        // Most frequent surface form (by supporting chunks), ties lexicographic.
        std::size_t best = members.front();
        for (std::size_t m : members) {
            const auto cm = ents[m]->chunk_ids.size(), cb = ents[best]->chunk_ids.size();
            if (cm > cb || (cm == cb && ents[m]->name < ents[best]->name)) best = m;
        }
        Entity merged = *ents[best];
        for (std::size_t m : members) {
            canonical_of[ents[m]->id] = merged.id;
            if (m == best) continue;
            merged.description = accumulate_description(merged.description, ents[m]->description);
            merged.aliases.insert(ents[m]->aliases.begin(), ents[m]->aliases.end());
            merged.aliases.insert(ents[m]->name);
            merged.chunk_ids.insert(ents[m]->chunk_ids.begin(), ents[m]->chunk_ids.end());
        }
        if (members.size() > 1) reembed_entities.push_back(merged.id);
        out.upsert_entity(std::move(merged));
    }

    std::map<std::string, int> contributions;
    for (const auto& [rid, r] : graph.relations()) {
        Relation moved = r;
        moved.source_id = canonical_of.at(r.source_id);
        moved.target_id = canonical_of.at(r.target_id);
        if (moved.source_id == moved.target_id) {
            ++res.stats.self_loops_dropped;
            continue;
        }
        if (moved.source_id != r.source_id || moved.target_id != r.target_id) {
            moved.id = relation_id_for(moved.source_id, moved.target_id);
        }
        ++contributions[out.upsert_relation(std::move(moved))];
    }
    std::vector<std::string> reembed_relations;
    for (const auto& [rid, n] : contributions) {
        if (n > 1) reembed_relations.push_back(rid);
    }
    embed_items(out, gateway, reembed_entities, reembed_relations);

    auto log = graph.merge_log();
    log.insert(log.end(), candidates.begin(), candidates.end());
    out.set_merge_log(std::move(log));
    res.judged = std::move(candidates);
    res.stats.entities_after = out.entity_count();
    res.graph = std::move(out);
    return res;
}

struct AuditBin {
    double low = 0.0;
    double high = 0.0;
    std::size_t merged = 0;
    std::size_t skipped = 0;
};

// Equal-width similarity bins over [gate, 1]; empty when nothing was judged.
inline std::vector<AuditBin> merge_audit(const std::vector<MergeRecord>& log, double gate_threshold, std::size_t bins = 10) {
    if (log.empty()) return {};
    if (bins == 0) throw PreconditionError("audit needs at least one bin");
    const double width = (1.0 - gate_threshold) / static_cast<double>(bins);
    std::vector<AuditBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].low = gate_threshold + width * static_cast<double>(b);
        out[b].high = b + 1 == bins ? 1.0 : gate_threshold + width * static_cast<double>(b + 1);
    }
    for (const auto& r : log) {
        std::size_t b = 0;
        if (width > 0) {
            const double pos = std::floor((r.similarity - gate_threshold) / width);
            b = pos < 0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
        }
        (r.merged ? out[b].merged : out[b].skipped)++;
    }
    return out;
}

inline std::string audit_csv(const std::vector<AuditBin>& bins) {
    std::string out = "bin_low,bin_high,merged,skipped\n";
    char buf[128];
    for (const auto& b : bins) {
        std::snprintf(buf, sizeof buf, "%.4f,%.4f,%zu,%zu\n", b.low, b.high, b.merged, b.skipped);
        out += buf;
    }
    return out;
}

struct IndexerConfig {
    ChunkingConfig chunking;
    std::size_t type_cap = 30;
    double gate_threshold = 0.88;
};

struct IndexStats {
    std::size_t documents = 0;
    std::size_t chunks = 0;
    std::size_t type_warnings = 0;
    std::size_t extraction_failures = 0;
    std::size_t types = 0;
    MergeStats merge;
};

struct IndexResult {
    KnowledgeGraph graph;
    IndexStats stats;
};

inline IndexResult index(const std::vector<Document>& documents, const IndexerConfig& config, Gateway& gateway) {
    IndexResult res;
    res.stats.documents = documents.size();
    const auto chunks = chunk_corpus(documents, config.chunking, &gateway.provider());
    res.stats.chunks = chunks.size();
    if (chunks.empty()) throw Error("no extractable content");

    // Suggest per chunk, refine once over the aggregate.
    std::vector<SuggestResult> suggestions(chunks.size());
    parallel_for(chunks.size(), gateway.parallelism(),
                 [&](std::size_t i) { suggestions[i] = suggest_types(chunks[i], gateway); });
    std::vector<std::pair<std::string, TypeCandidate>> by_doc;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        res.stats.type_warnings += suggestions[i].warnings;
        for (const auto& c : suggestions[i].candidates) by_doc.emplace_back(chunks[i].doc_id, c);
    }
    const auto aggregated = aggregate_candidates(by_doc);
    std::vector<TypeDef> inventory;
    if (aggregated.empty()) {
        spdlog::warn("no entity types suggested; falling back to a single 'other' type");
        inventory.push_back({"other", "any entity", {}});
    } else {
        inventory = refine_types(aggregated, gateway, config.type_cap);
    }
    res.stats.types = inventory.size();

    std::vector<std::optional<ExtractionResult>> extracted(chunks.size());
    parallel_for(chunks.size(), gateway.parallelism(), [&](std::size_t i) {
        try {
            extracted[i] = extract(chunks[i], inventory, gateway);
        } catch (const JudgeFormatError& e) {
            spdlog::warn("chunk {} skipped: {}", chunks[i].id, e.what());
        }
    });

    KnowledgeGraph g;
    g.set_type_inventory(inventory);
    for (const auto& c : chunks) g.upsert_chunk(c);
    std::size_t ok = 0;
    for (auto& x : extracted) {
        if (!x) {
            ++res.stats.extraction_failures;
            continue;
        }
        ++ok;
        for (auto& e : x->entities) g.upsert_entity(std::move(e));
        for (auto& r : x->relations) g.upsert_relation(std::move(r));
    }
    if (ok == 0) throw Error("no extractable content");

    embed_all(g, gateway);
    auto merged = merge_entities(g, config.gate_threshold, gateway);
    res.stats.merge = merged.stats;
    res.graph = std::move(merged.graph);
    return res;
}

} // namespace codarag
