#pragma once
// Post-retrieval: judge-based interference elimination, chunk ranking by
// evidence occurrence, budgeted context assembly and answer generation.

#include <algorithm>
#include <map>
#include <optional>
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

enum class ItemKind { entity, relation };

struct EliminatedItem {
    ItemKind kind;
    std::string id;
    std::string rationale;
    bool orphaned = false;

    bool operator==(const EliminatedItem&) const = default;
};

struct RefinedEvidence {
    std::string query;
    std::vector<std::string> kept_entities;   // sorted
    std::vector<std::string> kept_relations;  // sorted
    std::vector<EliminatedItem> eliminated;
    std::set<std::string> entries;
    std::size_t failed_batches = 0;
};

// Keeps everything; the elimination stage set to identity.
inline RefinedEvidence keep_all(const EvidenceSubgraph& sub, const std::string& query) {
    RefinedEvidence out;
    out.query = query;
    out.entries = sub.entries;
    for (const auto& [id, tags] : sub.entities) out.kept_entities.push_back(id);
    out.kept_relations.assign(sub.relations.begin(), sub.relations.end());
    return out;
}

namespace detail {

inline std::string clip(std::string_view s, std::size_t n) {
    if (s.size() <= n) return std::string(s);
    return std::string(s.substr(0, n)) + "...";
}

inline std::string single_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

struct ElimItem {
    ItemKind kind;
    std::string id;
    std::string line; // rendered without the number
};

// Parses "<n>: KEEP|ELIMINATE[ - reason]" lines. Returns verdicts by number;
// throws JudgeFormatError when no line parses.
inline std::map<std::size_t, JudgeVerdict> parse_batch_verdicts(std::string_view reply) {
    std::map<std::size_t, JudgeVerdict> out;
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        if (!line.empty() && line.front() == '[') line.remove_prefix(1);
        std::size_t n = 0;
        while (n < line.size() && std::isdigit(static_cast<unsigned char>(line[n]))) ++n;
        if (n == 0) continue;
        const std::size_t num = std::stoul(std::string(line.substr(0, n)));
        auto rest = line.substr(n);
        while (!rest.empty() && (rest.front() == ']' || rest.front() == ':' || rest.front() == '.' || rest.front() == ' '))
            rest.remove_prefix(1);
        try {
            out.emplace(num, parse_verdict(rest, JudgeKind::eliminate));
        } catch (const JudgeFormatError&) {
        }
    }
    if (out.empty()) throw JudgeFormatError("no per-item verdicts in elimination reply");
    return out;
}

} // namespace detail

// Batched keep/eliminate judgement over non-entry entities and all relations.
// Entries are never submitted. Relations that lose an endpoint are removed as
// orphaned. A failed batch keeps all of its items.
inline RefinedEvidence eliminate_interference(const EvidenceSubgraph& sub, const KnowledgeGraph& graph,
                                              const std::string& query, Gateway& gateway, std::size_t batch_size = 20) {
    if (sub.empty()) throw PreconditionError("eliminate_interference needs a non-empty subgraph");
    if (batch_size == 0) batch_size = 20;

    std::vector<detail::ElimItem> items;
    for (const auto& [id, tags] : sub.entities) {
        if (sub.entries.count(id)) continue;
        const Entity& e = graph.entity(id);
        std::vector<std::string> paths;
        for (const auto& t : tags) paths.emplace_back(to_string(t.pathway));
        items.push_back({ItemKind::entity, id,
                         "entity | " + e.name + " | " + e.type_label + " | " +
                             detail::single_line(detail::clip(e.description, 300)) + " | pathways: " + text::join(paths, ", ")});
    }
    for (const auto& rid : sub.relations) {
        const Relation& r = graph.relation(rid);
        items.push_back({ItemKind::relation, rid,
                         "relation | " + graph.entity(r.source_id).name + " -- " + graph.entity(r.target_id).name + " | " +
                             detail::single_line(detail::clip(r.description, 300)) + " | keywords: " + text::join(r.keywords, ", ")});
    }

    const std::size_t batches = (items.size() + batch_size - 1) / batch_size;
    std::vector<std::optional<std::map<std::size_t, JudgeVerdict>>> verdicts(batches);
    parallel_for(batches, gateway.parallelism(), [&](std::size_t b) {
        std::string listing;
        const std::size_t begin = b * batch_size, end = std::min(items.size(), begin + batch_size);
        for (std::size_t i = begin; i < end; ++i) listing += "[" + std::to_string(i - begin + 1) + "] " + items[i].line + "\n";
        const prompts::Vars vars{{"query", query}, {"items", listing}};
        try {
            try {
                verdicts[b] = detail::parse_batch_verdicts(gateway.complete(prompts::kEliminate, vars));
            } catch (const JudgeFormatError&) {
                verdicts[b] = detail::parse_batch_verdicts(gateway.complete(prompts::kJudgeEliminateStrict, vars));
            }
        } catch (const Error& e) {
            spdlog::warn("elimination batch {} failed ({}); keeping its items", b, e.what());
        }
    });

    RefinedEvidence out;
    out.query = query;
    out.entries = sub.entries;
    std::set<std::string> dropped_entities;
    std::set<std::string> dropped_relations;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& v = verdicts[i / batch_size];
        if (!v) continue;
        auto it = v->find(i % batch_size + 1);
        if (it == v->end() || it->second.decision != Decision::eliminate) continue;
        (items[i].kind == ItemKind::entity ? dropped_entities : dropped_relations).insert(items[i].id);
        out.eliminated.push_back({items[i].kind, items[i].id, it->second.rationale, false});
    }
    for (std::size_t b = 0; b < batches; ++b) out.failed_batches += verdicts[b] ? 0 : 1;

    for (const auto& [id, tags] : sub.entities) {
        if (!dropped_entities.count(id)) out.kept_entities.push_back(id);
    }
    for (const auto& rid : sub.relations) {
        if (dropped_relations.count(rid)) continue;
        const Relation& r = graph.relation(rid);
        if (dropped_entities.count(r.source_id) || dropped_entities.count(r.target_id)) {
            out.eliminated.push_back({ItemKind::relation, rid, "orphaned", true});
            continue;
        }
        out.kept_relations.push_back(rid);
    }
    return out;
}

struct RankedChunk {
    std::string chunk_id;
    std::size_t score = 0;

    bool operator==(const RankedChunk&) const = default;
};

// Score = kept entities citing the chunk + kept relations citing it.
inline std::vector<RankedChunk> rank_chunks(const RefinedEvidence& ev, const KnowledgeGraph& graph, std::size_t k = 5) {
    if (k == 0) return {};
    std::map<std::string, std::size_t> counts;
    for (const auto& id : ev.kept_entities) {
        for (const auto& c : graph.entity(id).chunk_ids) ++counts[c];
    }
    for (const auto& id : ev.kept_relations) {
        for (const auto& c : graph.relation(id).chunk_ids) ++counts[c];
    }
    std::vector<RankedChunk> out;
    for (const auto& [cid, n] : counts) {
        if (graph.chunks().count(cid)) out.push_back({cid, n});
    }
    std::sort(out.begin(), out.end(), [](const RankedChunk& a, const RankedChunk& b) {
        return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

struct BudgetReport {
    std::size_t entity_tokens = 0;
    std::size_t relation_tokens = 0;
    std::size_t chunk_tokens = 0;
    std::size_t total_tokens = 0;
    std::size_t budget = 0;
    bool truncated = false;
    bool over_budget = false; // entity names alone exceed the budget
};

struct AssembledContext {
    std::string entity_section;
    std::string relation_section;
    std::string chunk_section;
    std::vector<std::string> chunk_ids; // chunks that survived truncation
    BudgetReport budget_report;

    std::string text() const {
        std::string out;
        for (const auto* s : {&entity_section, &relation_section, &chunk_section}) {
            if (s->empty()) continue;
            if (!out.empty()) out += "\n";
            out += *s;
        }
        return out;
    }
    bool empty() const { return entity_section.empty() && relation_section.empty() && chunk_section.empty(); }
    std::string fingerprint() const { return hex64(fnv1a64(text())); }
};

namespace detail {

// A rendered line: a fixed head (never trimmed here) and a trimmable body.
struct ContextLine {
    std::string id;
    std::string head;
    std::vector<std::string> body; // whitespace tokens

    std::size_t tokens() const { return text::count_tokens(head) + body.size(); }
    std::string render(std::string_view sep) const {
        return body.empty() ? head : head + std::string(sep) + text::join(body, " ");
    }
};

inline std::vector<std::string> tokens_of(std::string_view s) {
    std::vector<std::string> out;
    for (auto t : text::whitespace_tokens(s)) out.emplace_back(s.substr(t.begin, t.end - t.begin));
    return out;
}

inline std::size_t section_tokens(const std::vector<ContextLine>& lines, std::string_view header) {
    if (lines.empty()) return 0;
    std::size_t n = text::count_tokens(header);
    for (const auto& l : lines) n += l.tokens();
    return n;
}

// Removes up to `over` tokens from line bodies, last line first. Lines whose
// body empties are removed entirely when `drop_lines` is set.
inline std::size_t trim_tail(std::vector<ContextLine>& lines, std::size_t over, bool drop_lines) {
    std::size_t removed = 0;
    for (std::size_t i = lines.size(); i-- > 0 && removed < over;) {
        auto& l = lines[i];
        const std::size_t take = std::min(l.body.size(), over - removed);
        if (drop_lines && take == l.body.size()) {
            removed += l.tokens();
            lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(i));
            continue;
        }
        l.body.resize(l.body.size() - take);
        removed += take;
    }
    return removed;
}

} // namespace detail

inline constexpr std::string_view kEntityHeader = "-----Entities-----";
inline constexpr std::string_view kRelationHeader = "-----Relations-----";
inline constexpr std::string_view kChunkHeader = "-----Sources-----";

// Renders entities, relations and chunks. Over budget, the chunk section is
// truncated tail-first, then relation descriptions, then entity descriptions;
// entity names are never removed.
inline AssembledContext build_context(const RefinedEvidence& ev, const KnowledgeGraph& graph,
                                      const std::vector<RankedChunk>& chunks, std::size_t budget = 8000) {
    using detail::ContextLine;
    std::vector<ContextLine> ents, rels, chks;
    for (const auto& id : ev.kept_entities) {
        const Entity& e = graph.entity(id);
        ents.push_back({id, "- " + e.name + " (" + (e.type_label.empty() ? "other" : e.type_label) + "):",
                        detail::tokens_of(e.description)});
    }
    for (const auto& id : ev.kept_relations) {
        const Relation& r = graph.relation(id);
        rels.push_back({id, "- " + graph.entity(r.source_id).name + " -- " + graph.entity(r.target_id).name + ":",
                        detail::tokens_of(r.description)});
    }
    for (const auto& c : chunks) {
        chks.push_back({c.chunk_id, "[" + c.chunk_id + "]", detail::tokens_of(graph.chunks().at(c.chunk_id).text)});
    }

    auto total = [&] {
        return detail::section_tokens(ents, kEntityHeader) + detail::section_tokens(rels, kRelationHeader) +
               detail::section_tokens(chks, kChunkHeader);
    };
    AssembledContext out;
    out.budget_report.budget = budget;
    if (total() > budget) {
        out.budget_report.truncated = true;
        // Dropping the last line of a section also drops its header.
        auto over = [&] { return total() > budget ? total() - budget : 0; };
        detail::trim_tail(chks, over(), true);
        if (over() > 0) detail::trim_tail(rels, over(), false);
        if (over() > 0) detail::trim_tail(ents, over(), false);
        out.budget_report.over_budget = total() > budget;
    }

    auto render = [](const std::vector<ContextLine>& lines, std::string_view header, std::string_view sep) {
        if (lines.empty()) return std::string{};
        std::string s(header);
        for (const auto& l : lines) s += "\n" + l.render(sep);
        return s;
    };
    out.entity_section = render(ents, kEntityHeader, " ");
    out.relation_section = render(rels, kRelationHeader, " ");
    out.chunk_section = render(chks, kChunkHeader, " ");
    for (const auto& c : chks) out.chunk_ids.push_back(c.id);
    out.budget_report.entity_tokens = detail::section_tokens(ents, kEntityHeader);
    out.budget_report.relation_tokens = detail::section_tokens(rels, kRelationHeader);
    out.budget_report.chunk_tokens = detail::section_tokens(chks, kChunkHeader);
    out.budget_report.total_tokens = total();
    return out;
}

struct Answer {
    std::string text;
    std::string context_fingerprint;
};

inline Answer generate_answer(const std::string& query, const AssembledContext& context, Gateway& gateway) {
    Answer a;
    a.context_fingerprint = context.fingerprint();
    if (context.empty()) {
        a.text = gateway.complete(prompts::kAnswerInsufficient, {{"query", query}});
    } else {
        a.text = gateway.complete(prompts::kAnswer, {{"query", query}, {"context", context.text()}});
    }
    return a;
}

} // namespace codarag
