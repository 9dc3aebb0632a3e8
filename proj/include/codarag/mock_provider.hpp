#pragma once
// Deterministic offline provider. Replies are a pure function of the prompt
// and the seed: it reads the task header and the labelled input blocks of the
// prompt templates and applies simple rules per task.

#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "codarag/gateway.hpp"
#include "codarag/prompts.hpp"
#include "codarag/util.hpp"

namespace codarag {

namespace mock_rules {

inline bool is_abbreviation(std::string_view tok) {
    static const std::set<std::string, std::less<>> abbr = {"Inc.", "Corp.", "Ltd.", "Co.", "Dr.", "Mr.", "Mrs.",
                                                           "Ms.", "St.", "Jr.", "Sr.", "Prof.", "U.S.", "e.g.", "i.e."};
    return abbr.count(tok) > 0;
}

inline bool is_stop_capital(std::string_view w) {
    static const std::set<std::string, std::less<>> stop = {
        "The", "A", "An", "In", "On", "At", "By", "For", "From", "Of", "To", "And", "But", "Or", "It",
        "Its", "This", "That", "These", "Those", "He", "She", "They", "We", "I", "His", "Her", "Their",
        "Our", "After", "Before", "When", "While", "As", "With", "However", "Meanwhile", "Today", "Later",
        "Also", "Both", "Each", "Several", "Many", "Some", "Who", "What", "Which", "Where", "Why", "How",
        "Is", "Are", "Was", "Were", "Did", "Does", "Do", "There", "Then", "Since", "During", "Under",
        "Over", "Between", "Among", "Despite", "Although", "Because", "If", "Not", "No", "Yes"};
    return stop.count(w) > 0;
}

inline bool is_stop_word(std::string_view w) {
    static const std::set<std::string, std::less<>> stop = {
        "the", "a", "an", "in", "on", "at", "by", "for", "from", "of", "to", "and", "but", "or", "it",
        "its", "this", "that", "these", "those", "he", "she", "they", "we", "his", "her", "their", "our",
        "is", "are", "was", "were", "be", "been", "did", "does", "do", "what", "which", "who", "whom",
        "where", "when", "why", "how", "with", "as", "into", "about", "there", "has", "have", "had",
        "also", "not", "can", "could", "would", "should", "will", "after", "before", "than", "then"};
    return stop.count(w) > 0;
}

// Sentences split at . ! ? (not after known abbreviations) and at newlines.
inline std::vector<std::string_view> sentences(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    auto push = [&](std::size_t end) {
        auto t = text::trim(s.substr(start, end - start));
        if (!t.empty()) out.push_back(t);
        start = end;
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '\n') {
            push(i);
            start = i + 1;
            continue;
        }
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t tb = i;
            while (tb > start && !std::isspace(static_cast<unsigned char>(s[tb - 1]))) --tb;
            if (c == '.' && is_abbreviation(s.substr(tb, i + 1 - tb))) continue;
            push(i + 1);
        }
    }
    push(s.size());
    return out;
}

// Maximal runs of capitalized, non-stopword tokens; each run is a verbatim slice.
inline std::vector<std::string_view> capitalized_names(std::string_view sentence) {
    std::vector<std::string_view> out;
    const auto toks = text::whitespace_tokens(sentence);
    std::size_t run_begin = 0, run_end = 0;
    bool in_run = false;
    auto close = [&] {
        if (in_run) out.push_back(sentence.substr(run_begin, run_end - run_begin));
        in_run = false;
    };
    for (const auto& t : toks) {
        std::size_t b = t.begin, e = t.end;
        while (b < e && std::string_view("(\"'[").find(sentence[b]) != std::string_view::npos) ++b;
        const bool opened = b != t.begin;
        std::string_view raw = sentence.substr(b, e - b);
        bool breaks = false;
        if (!is_abbreviation(raw)) {
            while (e > b && std::string_view(".,;:!?)\"']").find(sentence[e - 1]) != std::string_view::npos) {
                --e;
                breaks = true;
            }
            if (e > b + 2 && sentence.substr(e - 2, 2) == "'s") {
                e -= 2;
                breaks = true;
            }
        }
        std::string_view word = sentence.substr(b, e - b);
        const bool cap = !word.empty() && std::isupper(static_cast<unsigned char>(word.front())) && !is_stop_capital(word);
        if (opened) close();
        if (cap) {
            if (!in_run) {
                run_begin = b;
                in_run = true;
            }
            run_end = e;
            if (breaks) close();
        } else {
            close();
        }
    }
    close();
    return out;
}

struct Extraction {
    struct Ent {
        std::string name, type, description;
    };
    struct Rel {
        std::string source, target, keywords, description;
    };
    std::vector<Ent> entities;
    std::vector<Rel> relations;
};

inline Extraction extract(std::string_view passage, const std::vector<std::string>& types) {
    Extraction x;
    std::set<std::string> seen_entities;
    std::set<std::pair<std::string, std::string>> seen_pairs;
    for (auto sentence : sentences(passage)) {
        std::vector<std::string> names;
        for (auto n : capitalized_names(sentence)) {
            std::string name(n);
            if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
        }
        for (const auto& name : names) {
            if (!seen_entities.insert(name).second) continue;
            std::string type = types.empty() ? "other" : types[fnv1a64(text::lower(name)) % types.size()];
            x.entities.push_back({name, type, std::string(sentence)});
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            for (std::size_t j = i + 1; j < names.size(); ++j) {
                if (!seen_pairs.insert({names[i], names[j]}).second) continue;
                std::vector<std::string> kw;
                auto a = sentence.find(names[i]);
                auto b = sentence.find(names[j], a == std::string_view::npos ? 0 : a + names[i].size());
                if (a != std::string_view::npos && b != std::string_view::npos && b > a) {
                    for (auto& w : text::words(sentence.substr(a + names[i].size(), b - a - names[i].size()))) {
                        if (!is_stop_word(w) && kw.size() < 3) kw.push_back(w);
                    }
                }
                if (kw.empty()) kw.push_back("related");
                x.relations.push_back({names[i], names[j], text::join(kw, ","), std::string(sentence)});
            }
        }
    }
    return x;
}

// Case-folded name with trailing corporate designators removed.
inline std::string merge_key(std::string_view name) {
    auto w = text::words(name);
    static const std::set<std::string, std::less<>> suffix = {"inc", "corp", "corporation", "ltd", "co", "llc", "plc"};
    while (w.size() > 1 && suffix.count(w.back())) w.pop_back();
    return text::join(w, " ");
}

} // namespace mock_rules

class MockProvider : public Provider {
public:
    static constexpr std::size_t kDimension = 64;

    explicit MockProvider(std::uint64_t seed = 0) : seed_(seed) {}

    // Overrides the reply for one task id (e.g. "suggest_types").
    void set_reply(const std::string& task, std::string reply) {
        std::lock_guard lock(mu_);
        replies_[task] = std::move(reply);
    }

    // Item names (entity names or "A -- B" relation labels) the elimination judge drops.
    void set_eliminate(std::set<std::string> names) {
        std::lock_guard lock(mu_);
        eliminate_ = std::move(names);
    }

    std::size_t dimension() const override { return kDimension; }
    // The seed shapes the embedding space, so it is part of the model id.
    std::string model_id() const override { return "mock-hash-bow-" + std::to_string(kDimension) + "/seed-" + std::to_string(seed_); }

    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override {
        std::vector<std::vector<float>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_text(t));
        return out;
    }

    // Hashed bag of words: each token bumps coordinate hash(token) mod kDimension.
    std::vector<float> embed_text(std::string_view t) const {
        std::vector<double> v(kDimension, 0.0);
        const std::uint64_t basis = kFnvOffset ^ splitmix64(seed_);
        auto toks = text::words(t);
        if (toks.empty()) toks.emplace_back(t);
        for (const auto& w : toks) v[fnv1a64(w, basis) % kDimension] += 1.0;
        return vec::normalized(v);
    }

    std::string complete(const CompletionRequest& request) override {
        const std::string_view prompt = request.prompt;
        const std::string task(prompts::task_of(prompt));
        {
            std::lock_guard lock(mu_);
            if (auto it = replies_.find(task); it != replies_.end()) return it->second;
        }
        if (task.empty()) {
            for (auto line : text::split_lines(prompt)) {
                if (line.starts_with("ECHO: ")) return std::string(line.substr(6));
            }
            return std::string(text::trim(prompt));
        }
        auto sec = [&](std::string_view name) { return prompts::section_or_empty(prompt, name); };
        if (task == "suggest_types") return default_types();
        if (task == "refine_types" || task == "refine_types_strict") return refine(sec("CANDIDATES"), sec("CAP"));
        if (task == "extract") return extract(sec("TEXT"), sec("TYPES"));
        if (task == "merge_judge" || task == "merge_judge_strict") {
            const bool same = mock_rules::merge_key(sec("NAME_A")) == mock_rules::merge_key(sec("NAME_B"));
            return same ? "MERGE\nnames denote the same entity" : "KEEP_DISTINCT\nnames differ";
        }
        if (task == "cues" || task == "cues_strict") return cues(sec("QUERY"));
        if (task == "eliminate" || task == "eliminate_strict") return eliminate(sec("ITEMS"));
        if (task == "answer") return answer(sec("QUERY"), sec("CONTEXT"));
        if (task == "answer_insufficient") return "Insufficient context to answer the question.";
        if (task == "extract_claims") return claims(sec("TEXT"));
        if (task.starts_with("judge_support") || task.starts_with("judge_reflect")) {
            return sec("CONTEXT").find(sec("CLAIM")) != std::string::npos ? "SUPPORTED\nclaim appears verbatim"
                                                                          : "UNSUPPORTED\nclaim not found";
        }
        if (task.starts_with("grade_relevance")) return grade(sec("QUERY"), sec("CONTEXT"));
        throw ProviderError("mock provider: unknown task " + task);
    }

    static std::string default_types() {
        return "organization: companies, institutions and other formal groups\n"
               "person: named individuals\n"
               "location: places, regions and facilities\n"
               "product: named products, services and technologies\n"
               "event: dated occurrences such as deals, launches and meetings\n";
    }

private:
    static std::string refine(const std::string& candidates, const std::string& cap_text) {
        std::size_t cap = 30;
        try {
            cap = static_cast<std::size_t>(std::stoul(cap_text));
        } catch (...) {
        }
        std::set<std::string> seen;
        std::string out;
        for (auto line : text::split_lines(candidates)) {
            auto colon = line.find(':');
            if (colon == std::string_view::npos) continue;
            std::string_view label = text::trim(line.substr(0, colon));
            if (auto dot = label.find(". "); dot != std::string_view::npos) label = text::trim(label.substr(dot + 2));
            if (label.empty() || !seen.insert(text::lower(label)).second) continue;
            if (seen.size() > cap) break;
            out += std::string(label) + ":" + std::string(line.substr(colon + 1)) + "\n";
        }
        return out;
    }

    static std::string extract(const std::string& passage, const std::string& types_block) {
        std::vector<std::string> types;
        for (auto line : text::split_lines(types_block)) {
            auto colon = line.find(':');
            auto label = text::trim(colon == std::string_view::npos ? line : line.substr(0, colon));
            if (!label.empty()) types.emplace_back(label);
        }
        const auto x = mock_rules::extract(passage, types);
        std::string out;
        for (const auto& e : x.entities) out += "entity|" + e.name + "|" + e.type + "|" + e.description + "\n";
        for (const auto& r : x.relations) {
            out += "relation|" + r.source + "|" + r.target + "|" + r.keywords + "|" + r.description + "\n";
        }
        return out;
    }

    static std::string cues(const std::string& query) {
        std::vector<std::string> high, low;
        if (auto marker = query.find("||"); marker != std::string::npos) {
            for (auto p : text::split(std::string_view(query).substr(0, marker), ','))
                if (!text::trim(p).empty()) high.emplace_back(text::trim(p));
            for (auto p : text::split(std::string_view(query).substr(marker + 2), ','))
                if (!text::trim(p).empty()) low.emplace_back(text::trim(p));
        } else {
            std::set<std::string> in_names;
            for (auto s : mock_rules::sentences(query)) {
                for (auto n : mock_rules::capitalized_names(s)) {
                    if (std::find(low.begin(), low.end(), n) == low.end()) low.emplace_back(n);
                    for (auto& w : text::words(n)) in_names.insert(w);
                }
            }
            for (auto& w : text::words(query)) {
                if (w.size() >= 4 && !mock_rules::is_stop_word(w) && !in_names.count(w) &&
                    std::find(high.begin(), high.end(), w) == high.end())
                    high.push_back(w);
            }
        }
        if (high.empty() && low.empty()) return "";
        return "high_level: " + text::join(high, ", ") + "\nlow_level: " + text::join(low, ", ") + "\n";
    }

    std::string eliminate(const std::string& items) const {
        std::set<std::string> drop;
        {
            std::lock_guard lock(mu_);
            drop = eliminate_;
        }
        std::string out;
        for (auto line : text::split_lines(items)) {
            if (!line.starts_with("[")) continue;
            auto close = line.find(']');
            if (close == std::string_view::npos) continue;
            const auto num = line.substr(1, close - 1);
            auto fields = text::split(line.substr(close + 1), '|');
            const std::string name = fields.size() > 1 ? std::string(text::trim(fields[1])) : std::string{};
            if (drop.count(name)) {
                out += std::string(num) + ": ELIMINATE - not relevant to the query\n";
            } else {
                out += std::string(num) + ": KEEP\n";
            }
        }
        return out;
    }

    // The context sentence sharing the most query content words (first wins ties).
    // Every answer is a verbatim substring of the context.
    static std::string answer(const std::string& query, const std::string& context) {
        std::set<std::string> want;
        for (auto& w : text::words(query)) {
            if (!mock_rules::is_stop_word(w)) want.insert(w);
        }
        std::string best;
        std::size_t best_hits = 0;
        bool found = false;
        for (auto line : text::split_lines(context)) {
            std::string_view body;
            if (line.starts_with("-----")) continue;
            if (line.starts_with("[")) {
                auto close = line.find("] ");
                if (close == std::string_view::npos) continue;
                body = line.substr(close + 2);
            } else if (line.starts_with("- ")) {
                auto colon = line.find(": ");
                if (colon == std::string_view::npos) continue;
                body = line.substr(colon + 2);
            } else {
                continue;
            }
            for (auto segment : text::split(body, '|')) {
                for (auto sent : mock_rules::sentences(text::trim(segment))) {
                    sent = text::trim(sent);
                    if (sent.empty()) continue;
                    std::set<std::string> have;
                    for (auto& w : text::words(sent)) have.insert(w);
                    std::size_t hits = 0;
                    for (const auto& w : want) hits += have.count(w);
                    if (!found || hits > best_hits) {
                        best.assign(sent);
                        best_hits = hits;
                        found = true;
                    }
                }
            }
        }
        return found ? best : "Insufficient context to answer the question.";
    }

    static std::string claims(const std::string& textblock) {
        std::string out;
        for (auto s : mock_rules::sentences(textblock)) {
            while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?')) s.remove_suffix(1);
            s = text::trim(s);
            if (!s.empty()) out += std::string(s) + "\n";
        }
        return out;
    }

    static std::string grade(const std::string& query, const std::string& context) {
        std::size_t total = 0, hit = 0;
        auto ctx_words = text::words(context);
        std::set<std::string> ctx(ctx_words.begin(), ctx_words.end());
        std::set<std::string> qset;
        for (auto& w : text::words(query)) {
            if (w.size() < 3 || mock_rules::is_stop_word(w) || !qset.insert(w).second) continue;
            ++total;
            if (ctx.count(w)) ++hit;
        }
        if (total == 0 || hit == 0) return "0\nno query terms covered";
        if (hit == total) return "1\nall query terms covered";
        return "0.5\nsome query terms covered";
    }

    std::uint64_t seed_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> replies_;
    std::set<std::string> eliminate_;
};

} // namespace codarag
