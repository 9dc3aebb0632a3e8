#pragma once
// Versioned prompt templates. Every prompt starts with a "[task:<id> v<N>]"
// header line; inputs are placed in labelled BEGIN/END blocks so that replies
// can be reproduced offline by the mock provider.

#include <map>
#include <string>
#include <string_view>

#include "codarag/error.hpp"

namespace codarag::prompts {

struct Template {
    std::string_view id;
    int version;
    std::string_view body;
};

inline constexpr Template kSuggestTypes{"suggest_types", 1, R"(You are building an entity type schema for a document collection.
Read the passage below and:
1. Look at its content, its structure and the patterns typical of its domain.
2. Note the kinds of entities that recur and the roles they play.
3. Propose entity types that do not overlap and suit the domain.
Reply with one type per line in the form `label: one-line definition`. No other text.
---BEGIN TEXT---
{{text}}
---END TEXT---)"};

inline constexpr Template kRefineTypes{"refine_types", 1, R"(Below are candidate entity types proposed independently for parts of one corpus.
1. Find types that duplicate each other or overlap heavily in meaning.
2. Fold redundant types together but keep distinctions that matter for the domain.
3. Return a compact schema of at most {{cap}} types, consolidating the most overlapping labels first.
Only use labels that appear in the candidate list.
Reply with one type per line in the form `label: one-line definition`. No other text.
---BEGIN CAP---
{{cap}}
---END CAP---
---BEGIN CANDIDATES---
{{candidates}}
---END CANDIDATES---)"};

inline constexpr Template kRefineTypesStrict{"refine_types_strict", 1, R"(Your previous reply could not be parsed.
Return at most {{cap}} entity types chosen from the candidates below, exactly one per line as `label: definition`.
---BEGIN CAP---
{{cap}}
---END CAP---
---BEGIN CANDIDATES---
{{candidates}}
---END CANDIDATES---)"};

inline constexpr Template kExtract{"extract", 1, R"(Extract a knowledge graph from the passage.
1. Find the entities that belong to one of the allowed types; give each a consistent name and a short description.
2. Find direct relationships between those entities, splitting any complex interaction into binary relations.
3. Ground every name and description strictly in the passage.
Output format, one record per line:
entity|<name>|<type>|<description>
relation|<source name>|<target name>|<comma separated keywords>|<description>
Use the type `other` when no allowed type fits.
---BEGIN TYPES---
{{types}}
---END TYPES---
---BEGIN TEXT---
{{text}}
---END TEXT---)"};

inline constexpr Template kMergeJudge{"merge_judge", 1, R"(Decide whether two graph entities denote the same real-world entity.
1. Compare their names and descriptions for semantic equivalence.
2. Be strict: proper nouns must be consistent; superficial resemblance is not enough.
3. Merge only with high confidence; otherwise keep them distinct.
Reply with a first line of MERGE or KEEP_DISTINCT, then a short rationale.
---BEGIN NAME_A---
{{name_a}}
---END NAME_A---
---BEGIN DESCRIPTION_A---
{{description_a}}
---END DESCRIPTION_A---
---BEGIN NAME_B---
{{name_b}}
---END NAME_B---
---BEGIN DESCRIPTION_B---
{{description_b}}
---END DESCRIPTION_B---)"};

inline constexpr Template kMergeJudgeStrict{"merge_judge_strict", 1, R"(Reply with exactly one word on the first line: MERGE or KEEP_DISTINCT.
---BEGIN NAME_A---
{{name_a}}
---END NAME_A---
---BEGIN DESCRIPTION_A---
{{description_a}}
---END DESCRIPTION_A---
---BEGIN NAME_B---
{{name_b}}
---END NAME_B---
---BEGIN DESCRIPTION_B---
{{description_b}}
---END DESCRIPTION_B---)"};

inline constexpr Template kCues{"cues", 1, R"(Derive retrieval keywords from the user query.
1. High-level keywords: the overall intent and thematic scope of the query.
2. Low-level keywords: specific entities, terms and details it mentions.
3. Keep both sets short and taken strictly from the query.
Reply with exactly two lines:
high_level: <comma separated keywords>
low_level: <comma separated keywords>
---BEGIN QUERY---
{{query}}
---END QUERY---)"};

inline constexpr Template kCuesStrict{"cues_strict", 1, R"(Your previous reply could not be parsed. Reply with exactly two lines and nothing else:
high_level: <comma separated keywords>
low_level: <comma separated keywords>
---BEGIN QUERY---
{{query}}
---END QUERY---)"};

inline constexpr Template kEliminate{"eliminate", 1, R"(You are filtering retrieved evidence before an answer is written.
1. Go through the numbered entities and relations and find items that do not help answer the query.
2. Drop irrelevant or ambiguous items, but keep intermediate or supporting items that may be useful.
3. Leave a coherent evidence set; do not cut relational links the answer needs.
The pathway tags show how each item was retrieved; treat them as hints only.
Reply with one line per item: `<number>: KEEP` or `<number>: ELIMINATE - <reason>`.
---BEGIN QUERY---
{{query}}
---END QUERY---
---BEGIN ITEMS---
{{items}}
---END ITEMS---)"};

inline constexpr Template kAnswer{"answer", 1, R"(Answer the query using only the context.
1. Pick out the entities and relations in the context that matter for the query.
2. Back them with the supporting document chunks, reusing their wording where possible.
3. Write a precise answer containing only the facts needed, every statement supported by the context.
---BEGIN QUERY---
{{query}}
---END QUERY---
---BEGIN CONTEXT---
{{context}}
---END CONTEXT---)"};

inline constexpr Template kAnswerInsufficient{"answer_insufficient", 1, R"(No context was retrieved for the query below.
State briefly that the available context is insufficient to answer it. Do not guess.
---BEGIN QUERY---
{{query}}
---END QUERY---)"};

inline constexpr Template kExtractClaims{"extract_claims", 1, R"(Split the text into short atomic factual claims.
Reply with one claim per line, no numbering. Reply with nothing if the text makes no claim.
---BEGIN TEXT---
{{text}}
---END TEXT---)"};

inline constexpr Template kJudgeSupport{"judge_support", 1, R"(Is the claim supported by the context?
Reply with a first line of SUPPORTED or UNSUPPORTED, then a short rationale.
---BEGIN CLAIM---
{{claim}}
---END CLAIM---
---BEGIN CONTEXT---
{{context}}
---END CONTEXT---)"};

inline constexpr Template kJudgeSupportStrict{"judge_support_strict", 1, R"(Reply with exactly one word on the first line: SUPPORTED or UNSUPPORTED.
---BEGIN CLAIM---
{{claim}}
---END CLAIM---
---BEGIN CONTEXT---
{{context}}
---END CONTEXT---)"};

inline constexpr Template kJudgeReflect{"judge_reflect", 1, R"(Is the required evidence reflected in the answer?
Reply with a first line of SUPPORTED (reflected) or UNSUPPORTED (not reflected), then a short rationale.
---BEGIN CLAIM---
{{claim}}
---END CLAIM---
---BEGIN CONTEXT---
{{context}}
---END CONTEXT---)"};

inline constexpr Template kJudgeReflectStrict{"judge_reflect_strict", 1, R"(Reply with exactly one word on the first line: SUPPORTED or UNSUPPORTED.
---BEGIN CLAIM---
{{claim}}
---END CLAIM---
---BEGIN CONTEXT---
{{context}}
---END CONTEXT---)"};

inline constexpr Template kJudgeEliminateStrict{"eliminate_strict", 1, R"(Your previous reply could not be parsed.
Reply with one line per numbered item and nothing else: `<number>: KEEP` or `<number>: ELIMINATE - <reason>`.
---BEGIN QUERY---
{{query}}
---END QUERY---
---BEGIN ITEMS---
{{items}}
---END ITEMS---)"};

inline constexpr Template kGradeRelevanceA{"grade_relevance_a", 1, R"(Grade how relevant the retrieved context is to the query.
Use 1 if it fully covers what the query asks, 0.5 if it covers part of it, 0 if it is unrelated.
Reply with the grade on the first line, then a short rationale.
---BEGIN QUERY---
{{query}}
---END QUERY---
---BEGIN CONTEXT---
{{context}}
---END CONTEXT---)"};

inline constexpr Template kGradeRelevanceB{"grade_relevance_b", 1, R"(As a second reviewer, judge whether this context would let a careful reader answer the question.
Grades: 1 = sufficient and on topic, 0.5 = partially useful, 0 = off topic or useless.
Reply with the grade on the first line, then a short rationale.
---BEGIN QUERY---
{{query}}
---END QUERY---
---BEGIN CONTEXT---
{{context}}
---END CONTEXT---)"};

inline constexpr Template kGradeRelevanceStrict{"grade_relevance_strict", 1, R"(Reply with exactly one of 0, 0.5 or 1 on the first line: how relevant is the context to the query?
---BEGIN QUERY---
{{query}}
---END QUERY---
---BEGIN CONTEXT---
{{context}}
---END CONTEXT---)"};

using Vars = std::map<std::string, std::string, std::less<>>;

// Substitutes every {{name}}; unknown placeholders are a caller error.
inline std::string render(const Template& t, const Vars& vars) {
    std::string out = "[task:" + std::string(t.id) + " v" + std::to_string(t.version) + "]\n";
    const std::string_view body = t.body;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto open = body.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(body.substr(pos));
            break;
        }
        out.append(body.substr(pos, open - pos));
        auto close = body.find("}}", open);
        if (close == std::string_view::npos) throw PreconditionError("unterminated placeholder in " + std::string(t.id));
        auto name = body.substr(open + 2, close - open - 2);
        auto it = vars.find(name);
        if (it == vars.end()) {
            throw PreconditionError("missing placeholder '" + std::string(name) + "' for template " + std::string(t.id));
        }
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

// Task id from the header line, empty if absent.
inline std::string_view task_of(std::string_view prompt) {
    if (!prompt.starts_with("[task:")) return {};
    auto sp = prompt.find(' ');
    auto nl = prompt.find('\n');
    if (sp == std::string_view::npos || (nl != std::string_view::npos && sp > nl)) return {};
    return prompt.substr(6, sp - 6);
}

// Content of a ---BEGIN NAME--- ... ---END NAME--- block, or nullopt-like empty + found flag.
inline bool section(std::string_view prompt, std::string_view name, std::string& out) {
    const std::string begin = "---BEGIN " + std::string(name) + "---\n";
    const std::string end = "\n---END " + std::string(name) + "---";
    auto b = prompt.find(begin);
    if (b == std::string_view::npos) return false;
    b += begin.size();
    auto e = prompt.find(end, b > 0 ? b - 1 : b);
    if (e == std::string_view::npos) return false;
    out.assign(e >= b ? prompt.substr(b, e - b) : std::string_view{});
    return true;
}

inline std::string section_or_empty(std::string_view prompt, std::string_view name) {
    std::string s;
    section(prompt, name, s);
    return s;
}

} // namespace codarag::prompts
