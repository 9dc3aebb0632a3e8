#pragma once
// On-disk graph snapshot: entities.jsonl, relations.jsonl, chunks.jsonl and
// manifest.json. Embeddings are base64 of little-endian float32.

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codarag/error.hpp"
#include "codarag/graph.hpp"

namespace codarag {

inline constexpr std::string_view kSchemaVersion = "codarag-graph/1";

struct GraphManifest {
    nlohmann::json config = nlohmann::json::object();
    std::string embedding_model;
    std::size_t embedding_dimension = 0;

    std::string config_fingerprint() const { return hex64(fnv1a64(config.dump())); }
};

struct LoadedGraph {
    KnowledgeGraph graph;
    GraphManifest manifest;
};

namespace detail {

inline std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
}

inline std::string encode_floats(const std::vector<float>& v) {
    if (v.empty()) return {};
    std::vector<unsigned char> raw(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v[i]));
        std::memcpy(raw.data() + 4 * i, &bits, 4);
    }
    std::string out(4 * ((raw.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), raw.data(),
                                  static_cast<int>(raw.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

// Returns false on malformed input.
inline bool decode_floats(const std::string& b64, std::vector<float>& out) {
    out.clear();
    if (b64.empty()) return true;
    if (b64.size() % 4 != 0) return false;
    std::vector<unsigned char> raw(b64.size() / 4 * 3);
    const int n = EVP_DecodeBlock(raw.data(), reinterpret_cast<const unsigned char*>(b64.data()),
                                  static_cast<int>(b64.size()));
    if (n < 0) return false;
    std::size_t len = static_cast<std::size_t>(n);
    if (b64.back() == '=') --len;
    if (b64.size() >= 2 && b64[b64.size() - 2] == '=') --len;
    if (len % 4 != 0) return false;
    out.resize(len / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, raw.data() + 4 * i, 4);
        out[i] = std::bit_cast<float>(to_little(bits));
    }
    return true;
}

template <typename Set>
nlohmann::json to_array(const Set& s) {
    auto arr = nlohmann::json::array();
    for (const auto& x : s) arr.push_back(x);
    return arr;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
    if (!out) throw Error("write failed: " + p.string());
}

// Reads non-empty lines, calling fn(json, line_no) for each.
template <typename Fn>
std::size_t read_jsonl(const std::filesystem::path& p, Fn&& fn) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError(p.string(), 0, "cannot open file");
    std::string line;
    std::size_t line_no = 0, records = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(p.string(), line_no, std::string("malformed record: ") + e.what());
        }
        try {
            fn(j, line_no);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(p.string(), line_no, std::string("bad field: ") + e.what());
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(p.string(), line_no, e.what());
        }
        ++records;
    }
    return records;
}

} // namespace detail

inline nlohmann::json entity_to_json(const Entity& e) {
    return {{"id", e.id},
            {"name", e.name},
            {"type", e.type_label},
            {"description", e.description},
            {"aliases", detail::to_array(e.aliases)},
            {"chunk_ids", detail::to_array(e.chunk_ids)},
            {"embedding", detail::encode_floats(e.embedding)}};
}

inline nlohmann::json relation_to_json(const Relation& r) {
    return {{"id", r.id},
            {"source", r.source_id},
            {"target", r.target_id},
            {"description", r.description},
            {"keywords", r.keywords},
            {"weight", r.weight},
            {"chunk_ids", detail::to_array(r.chunk_ids)},
            {"embedding", detail::encode_floats(r.embedding)}};
}

inline nlohmann::json chunk_to_json(const Chunk& c) {
    return {{"id", c.id},
            {"doc_id", c.doc_id},
            {"ordinal", c.ordinal},
            {"text", c.text},
            {"token_span", {c.token_begin, c.token_end}}};
}

inline void persist(const KnowledgeGraph& g, const std::filesystem::path& dir,
                    const GraphManifest& manifest = {}) {
    std::filesystem::create_directories(dir);
    std::string buf;
    for (const auto& [id, e] : g.entities()) buf += entity_to_json(e).dump() + "\n";
    detail::write_file(dir / "entities.jsonl", buf);
    buf.clear();
    for (const auto& [id, r] : g.relations()) buf += relation_to_json(r).dump() + "\n";
    detail::write_file(dir / "relations.jsonl", buf);
    buf.clear();
    for (const auto& [id, c] : g.chunks()) buf += chunk_to_json(c).dump() + "\n";
    detail::write_file(dir / "chunks.jsonl", buf);

    nlohmann::json types = nlohmann::json::array();
    for (const auto& t : g.type_inventory()) {
        types.push_back({{"label", t.label}, {"definition", t.definition}, {"provenance", t.provenance}});
    }
    nlohmann::json audit = nlohmann::json::array();
    for (const auto& m : g.merge_log()) {
        audit.push_back({{"a", m.entity_a}, {"b", m.entity_b}, {"similarity", m.similarity}, {"merged", m.merged}});
    }
    nlohmann::json j = {
        {"schema_version", kSchemaVersion},
        {"type_inventory", types},
        {"config", manifest.config},
        {"config_fingerprint", manifest.config_fingerprint()},
        {"embedding", {{"model_id", manifest.embedding_model}, {"dimension", manifest.embedding_dimension}}},
        {"counts", {{"entities", g.entity_count()}, {"relations", g.relation_count()}, {"chunks", g.chunks().size()}}},
        {"merge_audit", audit},
    };
    detail::write_file(dir / "manifest.json", j.dump(2) + "\n");
}

inline LoadedGraph load(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw ParseError(manifest_path.string(), 0, "cannot open manifest");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json mj;
    try {
        mj = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(manifest_path.string(), 0, std::string("malformed manifest: ") + e.what());
    }

    LoadedGraph out;
    std::size_t want_entities = 0, want_relations = 0, want_chunks = 0;
    try {
        const auto version = mj.at("schema_version").get<std::string>();
        if (version != kSchemaVersion) {
            throw ParseError(manifest_path.string(), 0, "unknown schema version: " + version);
        }
        std::vector<TypeDef> types;
        for (const auto& t : mj.at("type_inventory")) {
            types.push_back({t.at("label").get<std::string>(), t.at("definition").get<std::string>(),
                             t.at("provenance").get<std::vector<std::string>>()});
        }
        out.graph.set_type_inventory(std::move(types));
        std::vector<MergeRecord> audit;
        for (const auto& m : mj.value("merge_audit", nlohmann::json::array())) {
            audit.push_back({m.at("a").get<std::string>(), m.at("b").get<std::string>(),
                             m.at("similarity").get<double>(), m.at("merged").get<bool>()});
        }
        out.graph.set_merge_log(std::move(audit));
        out.manifest.config = mj.at("config");
        out.manifest.embedding_model = mj.at("embedding").at("model_id").get<std::string>();
        out.manifest.embedding_dimension = mj.at("embedding").at("dimension").get<std::size_t>();
        want_entities = mj.at("counts").at("entities").get<std::size_t>();
        want_relations = mj.at("counts").at("relations").get<std::size_t>();
        want_chunks = mj.at("counts").at("chunks").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path.string(), 0, std::string("bad manifest field: ") + e.what());
    }

    auto check_count = [](const std::filesystem::path& p, std::size_t got, std::size_t want) {
        if (got != want) {
            throw ParseError(p.string(), got + 1,
                             "expected " + std::to_string(want) + " records, found " + std::to_string(got));
        }
    };

    auto embedding_of = [](const nlohmann::json& j) {
        std::vector<float> v;
        if (!detail::decode_floats(j.at("embedding").get<std::string>(), v)) throw Error("bad embedding encoding");
        return v;
    };

    auto p = dir / "chunks.jsonl";
    check_count(p, detail::read_jsonl(p, [&](const nlohmann::json& j, std::size_t) {
        Chunk c;
        c.id = j.at("id").get<std::string>();
        c.doc_id = j.at("doc_id").get<std::string>();
        c.ordinal = j.at("ordinal").get<std::size_t>();
        c.text = j.at("text").get<std::string>();
        c.token_begin = j.at("token_span").at(0).get<std::size_t>();
        c.token_end = j.at("token_span").at(1).get<std::size_t>();
        out.graph.upsert_chunk(std::move(c));
    }), want_chunks);

    p = dir / "entities.jsonl";
    check_count(p, detail::read_jsonl(p, [&](const nlohmann::json& j, std::size_t) {
        Entity e;
        e.id = j.at("id").get<std::string>();
        e.name = j.at("name").get<std::string>();
        e.type_label = j.at("type").get<std::string>();
        e.description = j.at("description").get<std::string>();
        e.aliases = j.at("aliases").get<std::set<std::string>>();
        e.chunk_ids = j.at("chunk_ids").get<std::set<std::string>>();
        e.embedding = embedding_of(j);
        if (out.graph.find_entity(e.id)) throw Error("duplicate entity id " + e.id);
        for (const auto& c : e.chunk_ids) {
            if (!out.graph.chunks().count(c)) throw Error("entity " + e.id + " cites unknown chunk " + c);
        }
        out.graph.upsert_entity(std::move(e));
    }), want_entities);

    p = dir / "relations.jsonl";
    check_count(p, detail::read_jsonl(p, [&](const nlohmann::json& j, std::size_t) {
        Relation r;
        r.id = j.at("id").get<std::string>();
        r.source_id = j.at("source").get<std::string>();
        r.target_id = j.at("target").get<std::string>();
        r.description = j.at("description").get<std::string>();
        r.keywords = j.at("keywords").get<std::vector<std::string>>();
        r.weight = j.at("weight").get<double>();
        r.chunk_ids = j.at("chunk_ids").get<std::set<std::string>>();
        r.embedding = embedding_of(j);
        const std::size_t before = out.graph.relation_count();
        out.graph.upsert_relation(std::move(r));
        if (out.graph.relation_count() == before) throw Error("duplicate relation endpoint pair");
    }), want_relations);

    return out;
}

} // namespace codarag
