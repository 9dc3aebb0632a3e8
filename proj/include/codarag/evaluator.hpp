#pragma once
// Retrieval and generation metrics (all in [0,1]), the false-deletion
// diagnostic, and a batch harness over JSON-lines question files.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "codarag/error.hpp"
#include "codarag/gateway.hpp"
#include "codarag/parallel.hpp"
#include "codarag/pipeline.hpp"

namespace codarag {

// ---------------------------------------------------------------------------
// Rouge-L

// Lowercase, strip punctuation, split on whitespace.
inline std::vector<std::string> rouge_tokens(std::string_view s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(c)));
    }
    std::vector<std::string> out;
    for (auto t : text::whitespace_tokens(cleaned)) out.push_back(cleaned.substr(t.begin, t.end - t.begin));
    return out;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// F = (1 + b^2) P R / (R + b^2 P) over LCS precision/recall; 0 if either side is empty.
inline double rouge_l_tokens(const std::vector<std::string>& gen, const std::vector<std::string>& ref, double beta = 1.0) {
    const std::size_t lcs = lcs_length(gen, ref);
    if (lcs == 0) return 0.0;
    const double p = static_cast<double>(lcs) / static_cast<double>(gen.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
    const double b2 = beta * beta;
    return (1.0 + b2) * p * r / (r + b2 * p);
}

inline double rouge_l(std::string_view generated, std::string_view reference, double beta = 1.0) {
    return rouge_l_tokens(rouge_tokens(generated), rouge_tokens(reference), beta);
}

// ---------------------------------------------------------------------------
// Claim-level metrics

struct ClaimCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

// 2TP / (2TP + FP + FN); 1 when there is nothing to compare on either side.
inline double factual_correctness(const ClaimCounts& c) {
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double answer_accuracy(double fc, double ss, double acc_alpha = 0.5) {
    return acc_alpha * fc + (1.0 - acc_alpha) * std::max(0.0, ss);
}

inline std::vector<std::string> extract_claims(const std::string& text_in, Gateway& gateway) {
    std::vector<std::string> out;
    if (text::trim(text_in).empty()) return out;
    const std::string reply = gateway.complete(prompts::kExtractClaims, {{"text", text_in}});
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        while (!line.empty() && (line.front() == '-' || line.front() == '*')) line = text::trim(line.substr(1));
        if (!line.empty()) out.emplace_back(line);
    }
    return out;
}

inline bool claim_supported(const std::string& claim, const std::string& context, Gateway& gateway,
                            JudgeKind kind = JudgeKind::support) {
    return gateway.judge(kind, {{"claim", claim}, {"context", context}}).decision == Decision::supported;
}

// TP: answer claims supported by the reference; FP: the rest; FN: reference
// claims the answer does not support. One side empty gives FC = 0.
inline ClaimCounts count_claims(const std::vector<std::string>& answer_claims, const std::vector<std::string>& reference_claims,
                                Gateway& gateway) {
    ClaimCounts c;
    const std::string reference = text::join(reference_claims, "\n");
    const std::string answer = text::join(answer_claims, "\n");
    for (const auto& a : answer_claims) (claim_supported(a, reference, gateway) ? c.tp : c.fp)++;
    for (const auto& r : reference_claims) {
        if (!claim_supported(r, answer, gateway)) ++c.fn;
    }
    return c;
}

inline double semantic_similarity(const std::string& generated, const std::string& reference, Gateway& gateway) {
    auto v = gateway.embed({generated.empty() ? std::string(" ") : generated, reference.empty() ? std::string(" ") : reference});
    return std::max(0.0, vec::cosine(v[0].values, v[1].values));
}

struct RelevanceResult {
    double value = 0.0;
    double grades[2] = {0.0, 0.0};
    bool flagged = false; // a grader reply was unparseable and counted as 0
};

inline RelevanceResult context_relevance(const std::string& query, const std::string& context, Gateway& gateway) {
    RelevanceResult r;
    for (int g = 0; g < 2; ++g) {
        try {
            r.grades[g] = gateway.grade_relevance(g, {{"query", query}, {"context", context}});
        } catch (const JudgeFormatError& e) {
            spdlog::warn("relevance grader {} unparseable: {}", g, e.what());
            r.grades[g] = 0.0;
            r.flagged = true;
        }
    }
    r.value = (r.grades[0] + r.grades[1]) / 2.0;
    return r;
}

inline double evidence_recall(const std::vector<std::string>& reference_claims, const std::string& context, Gateway& gateway) {
    if (reference_claims.empty()) throw PreconditionError("evidence_recall needs at least one reference claim");
    std::size_t hit = 0;
    for (const auto& c : reference_claims) hit += claim_supported(c, context, gateway) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(reference_claims.size());
}

struct FaithfulnessResult {
    double value = 1.0;
    std::size_t claims = 0;
    bool empty_claims = false; // nothing asserted; reported as 1.0
};

inline FaithfulnessResult faithfulness(const std::string& answer, const std::string& context, Gateway& gateway) {
    if (text::trim(answer).empty()) throw PreconditionError("faithfulness needs a non-empty answer");
    FaithfulnessResult r;
    const auto claims = extract_claims(answer, gateway);
    r.claims = claims.size();
    if (claims.empty()) {
        r.empty_claims = true;
        return r;
    }
    std::size_t hit = 0;
    for (const auto& c : claims) hit += claim_supported(c, context, gateway) ? 1 : 0;
    r.value = static_cast<double>(hit) / static_cast<double>(claims.size());
    return r;
}

inline double evidence_coverage(const std::vector<std::string>& required, const std::string& answer, Gateway& gateway) {
    if (required.empty()) throw PreconditionError("evidence_coverage needs at least one required evidence");
    std::size_t hit = 0;
    for (const auto& k : required) hit += claim_supported(k, answer, gateway, JudgeKind::reflect) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(required.size());
}

// ---------------------------------------------------------------------------
// False deletion diagnostic

struct DeletionAudit {
    std::vector<std::string> gold_evidences;
    std::string pre_filter_context;
    std::string post_filter_context;
};

struct QueryDeletion {
    std::size_t pre_supported = 0;
    std::size_t lost = 0;
    std::optional<double> rate; // undefined when nothing was supported before filtering
};

struct FalseDeletionReport {
    double rate = 0.0; // mean over queries with a defined rate
    std::vector<QueryDeletion> per_query;
};

inline QueryDeletion audit_deletion(const DeletionAudit& a, Gateway& gateway) {
    QueryDeletion q;
    for (const auto& ev : a.gold_evidences) {
        if (!claim_supported(ev, a.pre_filter_context, gateway)) continue;
        ++q.pre_supported;
        if (!claim_supported(ev, a.post_filter_context, gateway)) ++q.lost;
    }
    if (q.pre_supported > 0) q.rate = static_cast<double>(q.lost) / static_cast<double>(q.pre_supported);
    return q;
}

inline FalseDeletionReport false_deletion_rate(const std::vector<DeletionAudit>& audits, Gateway& gateway) {
    FalseDeletionReport r;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& a : audits) {
        r.per_query.push_back(audit_deletion(a, gateway));
        if (r.per_query.back().rate) {
            sum += *r.per_query.back().rate;
            ++n;
        }
    }
    r.rate = n ? sum / static_cast<double>(n) : 0.0;
    return r;
}

// Runs each query through the pipeline and compares pre/post-filter contexts.
inline FalseDeletionReport false_deletion_rate(const std::vector<std::pair<std::string, std::vector<std::string>>>& queries,
                                               Pipeline& pipeline) {
    std::vector<DeletionAudit> audits;
    for (const auto& [q, gold] : queries) {
        auto run = pipeline.run(q);
        audits.push_back({gold, run.unfiltered_context.text(), run.context.text()});
    }
    return false_deletion_rate(audits, pipeline.gateway());
}

// ---------------------------------------------------------------------------
// Benchmark harness

inline const std::vector<std::string>& all_metrics() {
    static const std::vector<std::string> names = {"context_relevance", "evidence_recall",     "rouge_l",
                                                   "answer_accuracy",   "factual_correctness", "semantic_similarity",
                                                   "faithfulness",      "evidence_coverage"};
    return names;
}

struct EvalConfig {
    double rouge_beta = 1.0;
    double acc_alpha = 0.5;
};

struct EvalItem {
    std::string query;
    std::string reference_answer;
    std::vector<std::string> reference_claims;
    std::vector<std::string> required_evidences;
    std::string question_type;
    std::string retrieved_context;
    std::string generated_answer;
    std::vector<std::string> extracted_answer_claims;
};

struct ItemReport {
    std::size_t line = 0;
    std::string query;
    std::string question_type;
    std::map<std::string, double> metrics;
    std::vector<std::string> flags;
    std::string error; // non-empty when the item failed
};

struct MetricReport {
    std::vector<std::string> metrics; // requested columns, in canonical order
    std::vector<ItemReport> items;
    std::map<std::string, double> macro;
    std::map<std::string, std::map<std::string, double>> macro_by_type;
    std::map<std::string, std::size_t> items_by_type;
    std::size_t failures = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["metrics"] = metrics;
        j["item_count"] = items.size();
        j["failures"] = failures;
        j["macro"] = macro;
        j["macro_by_type"] = macro_by_type;
        auto arr = nlohmann::json::array();
        for (const auto& it : items) {
            nlohmann::json o = {{"line", it.line}, {"query", it.query}, {"question_type", it.question_type},
                                {"metrics", it.metrics}, {"flags", it.flags}};
            if (!it.error.empty()) o["error"] = it.error;
            arr.push_back(o);
        }
        j["items"] = arr;
        return j;
    }

    std::string to_csv() const {
        std::string out = "group,items";
        for (const auto& m : metrics) out += "," + m;
        out += "\n";
        auto row = [&](const std::string& group, std::size_t n, const std::map<std::string, double>& vals) {
            out += group + "," + std::to_string(n);
            char buf[32];
            for (const auto& m : metrics) {
                auto it = vals.find(m);
                if (it == vals.end()) {
                    out += ",";
                } else {
                    std::snprintf(buf, sizeof buf, ",%.6f", it->second);
                    out += buf;
                }
            }
            out += "\n";
        };
        row("all", items.size() - failures, macro);
        for (const auto& [type, vals] : macro_by_type) row(type, items_by_type.at(type), vals);
        return out;
    }
};

inline std::vector<std::string> canonical_metric_set(const std::vector<std::string>& requested) {
    for (const auto& m : requested) {
        if (std::find(all_metrics().begin(), all_metrics().end(), m) == all_metrics().end()) {
            throw PreconditionError("unknown metric: " + m);
        }
    }
    std::vector<std::string> out;
    for (const auto& m : all_metrics()) {
        if (std::find(requested.begin(), requested.end(), m) != requested.end()) out.push_back(m);
    }
    return out;
}

// Item fields: question, answer, evidence (list), question_type, optional claims (list).
inline EvalItem parse_eval_item(const std::string& line) {
    static const std::set<std::string> kTypes = {"Fact", "Reason", "Summary", "Creation"};
    auto j = nlohmann::json::parse(line);
    EvalItem it;
    it.query = j.at("question").get<std::string>();
    it.reference_answer = j.at("answer").get<std::string>();
    it.required_evidences = j.at("evidence").get<std::vector<std::string>>();
    it.question_type = j.at("question_type").get<std::string>();
    if (!kTypes.count(it.question_type)) throw PreconditionError("unknown question_type: " + it.question_type);
    if (j.contains("claims")) it.reference_claims = j.at("claims").get<std::vector<std::string>>();
    if (text::trim(it.query).empty()) throw PreconditionError("empty question");
    return it;
}

inline void score_item(EvalItem& item, const std::vector<std::string>& metrics, const EvalConfig& cfg, Pipeline& pipeline,
                       ItemReport& rep) {
    auto want = [&](const char* m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
    Gateway& gw = pipeline.gateway();
    auto run = pipeline.run(item.query);
    item.retrieved_context = run.context.text();
    item.generated_answer = run.answer.text;
    if (item.reference_claims.empty()) item.reference_claims = extract_claims(item.reference_answer, gw);

    if (want("context_relevance")) {
        auto r = context_relevance(item.query, item.retrieved_context, gw);
        rep.metrics["context_relevance"] = r.value;
        if (r.flagged) rep.flags.push_back("context_relevance_grader_unparseable");
    }
    if (want("evidence_recall")) {
        if (item.reference_claims.empty()) {
            rep.flags.push_back("evidence_recall_no_reference_claims");
        } else {
            rep.metrics["evidence_recall"] = evidence_recall(item.reference_claims, item.retrieved_context, gw);
        }
    }
    if (want("rouge_l")) rep.metrics["rouge_l"] = rouge_l(item.generated_answer, item.reference_answer, cfg.rouge_beta);
    const bool need_fc = want("factual_correctness") || want("answer_accuracy");
    const bool need_ss = want("semantic_similarity") || want("answer_accuracy");
    double fc = 0.0, ss = 0.0;
    if (need_fc) {
        item.extracted_answer_claims = extract_claims(item.generated_answer, gw);
        const auto counts = count_claims(item.extracted_answer_claims, item.reference_claims, gw);
        fc = factual_correctness(counts);
        if (item.extracted_answer_claims.empty() != item.reference_claims.empty()) fc = 0.0;
        if (want("factual_correctness")) rep.metrics["factual_correctness"] = fc;
    }
    if (need_ss) {
        ss = semantic_similarity(item.generated_answer, item.reference_answer, gw);
        if (want("semantic_similarity")) rep.metrics["semantic_similarity"] = ss;
    }
    if (want("answer_accuracy")) rep.metrics["answer_accuracy"] = answer_accuracy(fc, ss, cfg.acc_alpha);
    if (want("faithfulness")) {
        if (text::trim(item.generated_answer).empty()) {
            rep.flags.push_back("faithfulness_empty_answer");
        } else {
            auto f = faithfulness(item.generated_answer, item.retrieved_context, gw);
            rep.metrics["faithfulness"] = f.value;
            if (f.empty_claims) rep.flags.push_back("faithfulness_empty_claims");
        }
    }
    if (want("evidence_coverage")) {
        if (item.required_evidences.empty()) {
            rep.flags.push_back("evidence_coverage_no_required_evidence");
        } else {
            rep.metrics["evidence_coverage"] = evidence_coverage(item.required_evidences, item.generated_answer, gw);
        }
    }
}

// Per-item failures are isolated and counted; throws only if every item fails.
inline MetricReport run_benchmark(const std::filesystem::path& question_file, Pipeline& pipeline,
                                  const std::vector<std::string>& metric_set, const EvalConfig& cfg = {}) {
    std::ifstream in(question_file);
    if (!in) throw Error("cannot open question file: " + question_file.string());
    MetricReport report;
    report.metrics = canonical_metric_set(metric_set);
    std::vector<std::string> lines;
    std::vector<std::size_t> line_numbers;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (text::trim(line).empty()) continue;
        lines.push_back(line);
        line_numbers.push_back(n);
    }
    report.items.resize(lines.size());
    parallel_for(lines.size(), pipeline.gateway().parallelism(), [&](std::size_t i) {
        auto& rep = report.items[i];
        rep.line = line_numbers[i];
        try {
            auto item = parse_eval_item(lines[i]);
            rep.query = item.query;
            rep.question_type = item.question_type;
            if (!report.metrics.empty()) score_item(item, report.metrics, cfg, pipeline, rep);
        } catch (const std::exception& e) {
            rep.error = e.what();
            rep.metrics.clear();
        }
    });

    std::map<std::string, std::pair<double, std::size_t>> sums;
    std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> type_sums;
    for (const auto& rep : report.items) {
        if (!rep.error.empty()) {
            ++report.failures;
            spdlog::warn("question line {} failed: {}", rep.line, rep.error);
            continue;
        }
        ++report.items_by_type[rep.question_type];
        type_sums[rep.question_type];
        for (const auto& [m, v] : rep.metrics) {
            sums[m].first += v;
            ++sums[m].second;
            type_sums[rep.question_type][m].first += v;
            ++type_sums[rep.question_type][m].second;
        }
    }
    for (const auto& [m, s] : sums) report.macro[m] = s.first / static_cast<double>(s.second);
    for (const auto& [t, ms] : type_sums) {
        auto& dst = report.macro_by_type[t];
        for (const auto& [m, s] : ms) dst[m] = s.first / static_cast<double>(s.second);
    }
    if (report.items.empty() || report.failures == report.items.size()) {
        throw Error("benchmark failed: no item could be evaluated");
    }
    return report;
}

} // namespace codarag
