#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "codarag/mock_provider.hpp"
#include "codarag/navigator.hpp"
#include "test_support.hpp"

using namespace codarag;
using namespace testing_support;

namespace {

std::vector<float> emb(Gateway& gw, const std::string& text) { return gw.embed({text})[0].values; }

std::vector<float> at_angle(double theta) { return {static_cast<float>(std::cos(theta)), static_cast<float>(std::sin(theta))}; }

QueryCues axis_cues() {
    QueryCues c;
    c.high_level = {"h"};
    c.low_level = {"l"};
    c.high_embeddings = {{1.0f, 0.0f}};
    c.low_embeddings = {{1.0f, 0.0f}};
    return c;
}

QueryCues random_cues(std::mt19937_64& rng, std::size_t dim, std::size_t high, std::size_t low) {
    QueryCues c;
    for (std::size_t i = 0; i < high; ++i) {
        c.high_level.push_back("h" + std::to_string(i));
        c.high_embeddings.push_back(random_unit(rng, dim));
    }
    for (std::size_t i = 0; i < low; ++i) {
        c.low_level.push_back("l" + std::to_string(i));
        c.low_embeddings.push_back(random_unit(rng, dim));
    }
    return c;
}

EntryResult entries_of(std::vector<std::string> ids) {
    EntryResult e;
    e.entry_ids = std::move(ids);
    return e;
}

void expect_evidence_invariants(const KnowledgeGraph& g, const EvidenceSubgraph& ev) {
    for (const auto& rid : ev.relations) {
        const auto& r = g.relation(rid);
        EXPECT_TRUE(ev.entities.count(r.source_id)) << rid;
        EXPECT_TRUE(ev.entities.count(r.target_id)) << rid;
    }
    for (const auto& id : ev.entries) EXPECT_TRUE(ev.entities.count(id)) << id;
}

} // namespace

TEST(Cues, MockMarkerSplit) {
    Gateway gw(std::make_shared<MockProvider>(0));
    const auto c = generate_cues("acquisition, research || Google, DeepMind", gw);
    EXPECT_EQ(c.high_level, (std::vector<std::string>{"acquisition", "research"}));
    EXPECT_EQ(c.low_level, (std::vector<std::string>{"Google", "DeepMind"}));
    ASSERT_EQ(c.high_embeddings.size(), 2u);
    ASSERT_EQ(c.low_embeddings.size(), 2u);
    EXPECT_EQ(c.low_embeddings[1], emb(gw, "DeepMind"));
    EXPECT_FALSE(c.fallback);
}

TEST(Cues, EmptyReplyFallsBackToQuery) {
    auto p = std::make_shared<MockProvider>(0);
    p->set_reply("cues", "");
    Gateway gw(p);
    const auto c = generate_cues("who founded DeepMind", gw);
    EXPECT_TRUE(c.high_level.empty());
    EXPECT_EQ(c.low_level, std::vector<std::string>{"who founded DeepMind"});
    EXPECT_TRUE(c.fallback);
    EXPECT_EQ(c.low_embeddings.size(), 1u);
}

TEST(Cues, UnparseableAfterRetryFallsBack) {
    auto p = std::make_shared<MockProvider>(0);
    p->set_reply("cues", "garbage");
    p->set_reply("cues_strict", "more garbage");
    Gateway gw(p);
    EXPECT_TRUE(generate_cues("query", gw).fallback);
    EXPECT_THROW(generate_cues("  ", gw), PreconditionError);
}

TEST(Entries, ExactMatchRanksFirst) {
    Gateway gw(std::make_shared<MockProvider>(0));
    KnowledgeGraph g;
    for (auto n : {"Google", "DeepMind", "London Office"}) g.upsert_entity(make_entity(n, emb(gw, n)));
    Navigator nav(g, {});
    QueryCues c;
    c.low_level = {"DeepMind"};
    c.low_embeddings = {emb(gw, "DeepMind")};
    const auto e = nav.find_entries(c);
    ASSERT_FALSE(e.entities.empty());
    EXPECT_EQ(e.entities[0].entity_id, "ent:deepmind");
    EXPECT_NEAR(e.entities[0].score, 1.0, 1e-6);
}

TEST(Entries, SmallPopulationAllReturned) {
    KnowledgeGraph g;
    for (int i = 0; i < 3; ++i) g.upsert_entity(make_entity(node_name(i), at_angle(0.1 * i)));
    Navigator nav(g, {});
    EXPECT_EQ(nav.find_entries(axis_cues()).entities.size(), 3u);
}

TEST(Entries, TiesBrokenByLowerId) {
    KnowledgeGraph g;
    g.upsert_entity(make_entity("Zeta", at_angle(0.0)));
    g.upsert_entity(make_entity("Alpha", at_angle(0.0)));
    NavigationConfig cfg;
    cfg.top_k_entries = 1;
    Navigator nav(g, cfg);
    const auto e = nav.find_entries(axis_cues());
    ASSERT_EQ(e.entities.size(), 1u);
    EXPECT_EQ(e.entities[0].entity_id, "ent:alpha");
}

TEST(Entries, RelationEndpointsJoinEntrySet) {
    KnowledgeGraph g;
    g.upsert_entity(make_entity("A", at_angle(3.0)));
    g.upsert_entity(make_entity("B", at_angle(3.0)));
    add_edge(g, "A", "B", 1.0, at_angle(0.0));
    Navigator nav(g, {});
    const auto e = nav.find_entries(axis_cues());
    EXPECT_TRUE(e.entities.empty());
    EXPECT_EQ(e.entry_ids, (std::vector<std::string>{"ent:a", "ent:b"}));
}

TEST(Entries, EmptyGraph) {
    KnowledgeGraph g;
    Navigator nav(g, {});
    EXPECT_TRUE(nav.find_entries(axis_cues()).empty());
    const auto ev = nav.navigate(axis_cues());
    EXPECT_TRUE(ev.empty());
    EXPECT_FALSE(ev.diagnostic.empty());
}

TEST(Semantic, WorkedScore) {
    EXPECT_NEAR(semantic_score(0.5, 0.4, 0.8, 0.6), 0.64, 1e-12);
    KnowledgeGraph g;
    g.upsert_entity(make_entity("Entry", at_angle(0.0)));
    g.upsert_entity(make_entity("Near", at_angle(std::acos(0.6))));
    add_edge(g, "Entry", "Near", 1.0, at_angle(std::acos(0.8)));
    Navigator nav(g, {});
    const auto hits = nav.semantic_association(entries_of({"ent:entry"}), axis_cues());
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_NEAR(hits[0].score, 0.64, 1e-6);
    EXPECT_EQ(hits[0].entry_id, "ent:entry");
}

TEST(Semantic, BelowTauPruned) {
    // sim_rel = 0.5, sim_ent = 0.225: 0.25 + 0.09 = 0.34 < 0.35
    KnowledgeGraph g;
    g.upsert_entity(make_entity("Entry", at_angle(0.0)));
    g.upsert_entity(make_entity("Far", at_angle(std::acos(0.225))));
    add_edge(g, "Entry", "Far", 1.0, at_angle(std::acos(0.5)));
    Navigator nav(g, {});
    EXPECT_TRUE(nav.semantic_association(entries_of({"ent:entry"}), axis_cues()).empty());
}

TEST(Semantic, CapKeepsTopNeighbors) {
    KnowledgeGraph g;
    g.upsert_entity(make_entity("Hub", at_angle(0.0)));
    std::vector<std::pair<double, std::string>> expected;
    for (int i = 0; i < 15; ++i) {
        const auto name = node_name(i);
        const double ent_angle = 0.05 * i, rel_angle = 0.03 * (15 - i);
        g.upsert_entity(make_entity(name, at_angle(ent_angle)));
        add_edge(g, "Hub", name, 1.0, at_angle(rel_angle));
    }
    // Independent recount of every neighbor's score, then sort and truncate.
    const auto cues = axis_cues();
    for (const auto& nb : g.neighbors("ent:hub")) {
        const double s = 0.5 * max_cos(nb.relation->embedding, cues.high_embeddings) +
                         0.4 * max_cos(nb.entity->embedding, cues.low_embeddings);
        if (s >= 0.35) expected.push_back({-s, nb.entity->id});
    }
    ASSERT_EQ(expected.size(), 15u);
    std::sort(expected.begin(), expected.end());
    Navigator nav(g, {});
    const auto hits = nav.semantic_association(entries_of({"ent:hub"}), cues);
    ASSERT_EQ(hits.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(hits[i].entity_id, expected[i].second);
        EXPECT_NEAR(hits[i].score, -expected[i].first, 1e-9);
    }
}

TEST(Semantic, AffineInCoefficients) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1), c(0, 3);
    for (int i = 0; i < 200; ++i) {
        const double a = c(rng), b = c(rng), sr = u(rng), se = u(rng), k = c(rng);
        EXPECT_NEAR(semantic_score(k * a, b, sr, se) - semantic_score(a, b, sr, se), (k - 1) * a * sr, 1e-12);
        EXPECT_NEAR(semantic_score(a, b, sr, se), semantic_score(a, 0, sr, se) + semantic_score(0, b, sr, se), 1e-12);
    }
}

TEST(Semantic, PruningSoundOnRandomGraphs) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_graph(rng, 40, 0.3, false, 8);
        const auto cues = random_cues(rng, 8, 2, 2);
        NavigationConfig cfg;
        cfg.tau = 0.1;
        cfg.top_neighbors = 4;
        Navigator nav(g, cfg);
        const std::string entry = entity_id_for(node_name(trial));
        const auto hits = nav.semantic_association(entries_of({entry}), cues);
        std::size_t qualifying = 0;
        for (const auto& nb : g.neighbors(entry)) {
            const double s = 0.5 * max_cos(nb.relation->embedding, cues.high_embeddings) +
                             0.4 * max_cos(nb.entity->embedding, cues.low_embeddings);
            if (s >= cfg.tau) ++qualifying;
        }
        EXPECT_EQ(hits.size(), std::min<std::size_t>(qualifying, cfg.top_neighbors));
        for (const auto& h : hits) {
            EXPECT_GE(h.score, cfg.tau);
            EXPECT_LE(h.score, cfg.alpha + cfg.beta + 1e-9);
        }
    }
}

TEST(Ppr, SingleIsolatedEntity) {
    KnowledgeGraph g;
    g.upsert_entity(make_entity("Solo", at_angle(0.0)));
    Navigator nav(g, {});
    const auto r = nav.contextualized_association(entries_of({"ent:solo"}), axis_cues());
    ASSERT_EQ(r.entities.size(), 1u);
    EXPECT_NEAR(r.entities[0].score, 1.0, 1e-12);
}

TEST(Ppr, TwoNodeSymmetry) {
    TransitionMatrix t;
    t.offsets = {0, 1, 2};
    t.target = {1, 0};
    t.prob = {1.0, 1.0};
    const std::vector<double> p{0.5, 0.5};
    const auto r = personalized_pagerank(t, p, 0.85);
    EXPECT_NEAR(r.scores[0], 0.5, 1e-12);
    EXPECT_NEAR(r.scores[1], 0.5, 1e-12);
}

TEST(Ppr, PathMatchesDenseOracle) {
    KnowledgeGraph g;
    for (auto n : {"A", "B", "C"}) g.upsert_entity(make_entity(n, at_angle(0.0)));
    add_edge(g, "A", "B", 1.0, at_angle(0.2));
    add_edge(g, "B", "C", 1.0, at_angle(0.9));
    Navigator nav(g, {});
    const auto cues = axis_cues();
    const auto r = nav.contextualized_association(entries_of({"ent:a"}), cues);
    const auto want = contextual_oracle(g, {"ent:a"}, cues, 0.85);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.scores[i], want(i), 1e-6);
}

TEST(Ppr, RandomGraphsMatchOracleAndSumToOne) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> size(2, 50);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = size(rng);
        const auto g = random_graph(rng, n, 0.12, true, 6);
        const auto cues = random_cues(rng, 6, trial % 3, 1 + trial % 2); // some trials without high cues
        std::vector<std::string> entries;
        for (std::size_t i = 0; i < n; i += 3) entries.push_back(entity_id_for(node_name(i)));
        Navigator nav(g, {});
        const auto r = nav.contextualized_association(entries_of(entries), cues);
        const auto want = contextual_oracle(g, entries, cues, 0.85);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_GE(r.scores[i], 0.0);
            EXPECT_NEAR(r.scores[i], want(static_cast<int>(i)), 1e-6);
            sum += r.scores[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        EXPECT_LE(r.entities.size(), 20u);
        for (const auto& e : r.entities) {
            EXPECT_GE(e.score, 0.0);
            EXPECT_LE(e.score, 1.0);
        }
    }
}

TEST(Ppr, VertexTransitiveCycleIsUniform) {
    KnowledgeGraph g;
    const std::size_t n = 9;
    std::vector<std::string> all;
    for (std::size_t i = 0; i < n; ++i) {
        g.upsert_entity(make_entity(node_name(i), at_angle(0.0)));
        all.push_back(entity_id_for(node_name(i)));
    }
    for (std::size_t i = 0; i < n; ++i) add_edge(g, node_name(i), node_name((i + 1) % n));
    QueryCues cues;
    cues.low_level = {"x"};
    cues.low_embeddings = {{1.0f, 0.0f}};
    Navigator nav(g, {});
    const auto r = nav.contextualized_association(entries_of(all), cues);
    for (double s : r.scores) EXPECT_NEAR(s, 1.0 / n, 1e-9);
}

TEST(FastRP, ZeroIterationsIsProjection) {
    std::mt19937_64 rng(1);
    const auto g = random_graph(rng, 12, 0.3, true);
    FastRPConfig cfg;
    cfg.dimension = 32;
    cfg.normalization_strength = 0.0;
    cfg.iteration_weights = {1.0};
    cfg.seed = 5;
    const auto x = compute_structural_embeddings(g, cfg);
    for (std::size_t i = 0; i < x.ids.size(); ++i) {
        const auto r = random_projection_row(x.ids[i], 32, 5);
        double norm = 0.0;
        for (std::size_t c = 0; c < 32; ++c) {
            EXPECT_EQ(x.row(i)[c], r[c]);
            norm += r[c] * r[c];
        }
        EXPECT_NEAR(norm, 1.0, 1e-12);
    }
}

TEST(FastRP, Shape) {
    std::mt19937_64 rng(2);
    const auto g = random_graph(rng, 17, 0.2);
    FastRPConfig cfg;
    cfg.dimension = 48;
    const auto x = compute_structural_embeddings(g, cfg);
    EXPECT_EQ(x.ids.size(), 17u);
    EXPECT_EQ(x.dimension, 48u);
    EXPECT_EQ(x.data.size(), 17u * 48u);
}

TEST(FastRP, WeightedFixtureMatchesDenseProduct) {
    KnowledgeGraph g;
    for (auto n : {"A", "B", "C", "D", "E"}) g.upsert_entity(make_entity(n));
    add_edge(g, "A", "B", 3.0);
    add_edge(g, "B", "C", 1.0);
    add_edge(g, "C", "D", 2.0);
    add_edge(g, "D", "A", 1.0);
    add_edge(g, "A", "C", 5.0); // E stays isolated
    const FastRPConfig cfg;
    const auto x = compute_structural_embeddings(g, cfg);
    const auto want = dense_fastrp(g, cfg);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t c = 0; c < cfg.dimension; ++c) {
            EXPECT_NEAR(x.row(i)[c], want(static_cast<int>(i), static_cast<int>(c)), 1e-9);
        }
    }
}

TEST(FastRP, RandomGraphsMatchDenseProduct) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 8; ++trial) {
        const auto g = random_graph(rng, 30, 0.15, true);
        FastRPConfig cfg;
        cfg.dimension = 64;
        cfg.seed = static_cast<std::uint64_t>(trial);
        cfg.normalization_strength = -0.1 * trial;
        const auto x = compute_structural_embeddings(g, cfg);
        const auto want = dense_fastrp(g, cfg);
        double worst = 0.0;
        for (std::size_t i = 0; i < x.ids.size(); ++i) {
            for (std::size_t c = 0; c < 64; ++c) {
                worst = std::max(worst, std::abs(x.row(i)[c] - want(static_cast<int>(i), static_cast<int>(c))));
            }
        }
        EXPECT_LT(worst, 1e-9);
    }
}

TEST(FastRP, DeterministicPerSeed) {
    std::mt19937_64 rng(3);
    const auto g = random_graph(rng, 20, 0.2);
    FastRPConfig cfg;
    const auto a = compute_structural_embeddings(g, cfg), b = compute_structural_embeddings(g, cfg);
    EXPECT_EQ(a.data, b.data);
    cfg.seed = 99;
    EXPECT_NE(compute_structural_embeddings(g, cfg).data, a.data);
}

TEST(FastRP, InsertionOrderIndependent) {
    std::mt19937_64 rng(6);
    const auto g = random_graph(rng, 25, 0.2, true);
    std::vector<std::string> order;
    for (const auto& [id, e] : g.entities()) order.push_back(id);
    std::shuffle(order.begin(), order.end(), rng);
    KnowledgeGraph h;
    for (const auto& id : order) h.upsert_entity(g.entity(id));
    std::vector<Relation> rels;
    for (const auto& [id, r] : g.relations()) rels.push_back(r);
    std::shuffle(rels.begin(), rels.end(), rng);
    for (auto r : rels) h.upsert_relation(std::move(r));
    const auto a = compute_structural_embeddings(g, {}), b = compute_structural_embeddings(h, {});
    std::map<std::string, std::vector<double>> by_id;
    for (std::size_t i = 0; i < b.ids.size(); ++i) by_id[b.ids[i]].assign(b.row(i).begin(), b.row(i).end());
    for (std::size_t i = 0; i < a.ids.size(); ++i) {
        EXPECT_EQ(std::vector<double>(a.row(i).begin(), a.row(i).end()), by_id.at(a.ids[i]));
    }
}

TEST(FastRP, InvalidConfig) {
    FastRPConfig cfg;
    cfg.iteration_weights.clear();
    EXPECT_THROW(cfg.validate(), PreconditionError);
    cfg = {};
    cfg.dimension = 0;
    EXPECT_THROW(cfg.validate(), PreconditionError);
}

namespace {

// Exhaustive mean-cosine ranking over the dense oracle embeddings.
std::vector<std::pair<double, std::string>> functional_oracle(const KnowledgeGraph& g, const FastRPConfig& cfg,
                                                              const std::vector<std::string>& entries, double scale) {
    const Dense d = dense_of(g);
    const Eigen::MatrixXd x = scale * dense_fastrp(g, cfg);
    std::vector<std::pair<double, std::string>> out;
    for (int i = 0; i < static_cast<int>(d.ids.size()); ++i) {
        if (std::find(entries.begin(), entries.end(), d.ids[i]) != entries.end()) continue;
        double s = 0.0;
        for (const auto& e : entries) {
            const auto row = x.row(d.index.at(e));
            s += row.dot(x.row(i)) / (row.norm() * x.row(i).norm());
        }
        out.push_back({-s / static_cast<double>(entries.size()), d.ids[i]});
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST(Functional, BarbellMatchesExhaustiveOracle) {
    KnowledgeGraph g;
    for (auto n : {"L1", "L2", "L3", "R1", "R2", "R3"}) g.upsert_entity(make_entity(n));
    add_edge(g, "L1", "L2");
    add_edge(g, "L2", "L3");
    add_edge(g, "L1", "L3");
    add_edge(g, "R1", "R2");
    add_edge(g, "R2", "R3");
    add_edge(g, "R1", "R3");
    add_edge(g, "L3", "R1");
    NavigationConfig cfg;
    cfg.top_fastrp_nodes = 5;
    Navigator nav(g, cfg);
    const std::vector<std::string> entries{"ent:l1"};
    const auto r = nav.functional_association(entries_of(entries));
    const auto want = functional_oracle(g, cfg.fastrp, entries, 1.0);
    ASSERT_EQ(r.entities.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(r.entities[i].entity_id, want[i].second);
        EXPECT_NEAR(r.entities[i].score, -want[i].first, 1e-9);
    }
    for (const auto& e : r.entities) EXPECT_NE(e.entity_id, "ent:l1");
}

TEST(Functional, RankingInvariantUnderPositiveScaling) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const auto g = random_graph(rng, 25, 0.15, true);
        NavigationConfig cfg;
        Navigator nav(g, cfg);
        const std::vector<std::string> entries{entity_id_for(node_name(0)), entity_id_for(node_name(7))};
        const auto r = nav.functional_association(entries_of(entries));
        const auto a = functional_oracle(g, cfg.fastrp, entries, 1.0);
        const auto b = functional_oracle(g, cfg.fastrp, entries, 37.5);
        for (std::size_t i = 0; i < r.entities.size(); ++i) {
            EXPECT_EQ(a[i].second, b[i].second);
            EXPECT_EQ(r.entities[i].entity_id, a[i].second);
            EXPECT_GE(r.entities[i].score, -1.0 - 1e-12);
            EXPECT_LE(r.entities[i].score, 1.0 + 1e-12);
        }
    }
}

TEST(Navigate, UnionOfPathways) {
    std::mt19937_64 rng(40);
    const auto g = random_graph(rng, 60, 0.08, true, 8);
    const auto cues = random_cues(rng, 8, 2, 2);
    NavigationConfig cfg;
    cfg.top_k_entries = 2;
    cfg.top_neighbors = 3;
    cfg.top_ppr_nodes = 4;
    cfg.top_fastrp_nodes = 2;
    cfg.tau = 0.0;
    Navigator nav(g, cfg);
    const auto entries = nav.find_entries(cues);
    std::set<std::string> want(entries.entry_ids.begin(), entries.entry_ids.end());
    for (const auto& h : nav.semantic_association(entries, cues)) want.insert(h.entity_id);
    for (const auto& e : nav.contextualized_association(entries, cues).entities) want.insert(e.entity_id);
    for (const auto& e : nav.functional_association(entries).entities) want.insert(e.entity_id);
    const auto ev = nav.navigate(cues);
    std::set<std::string> got;
    for (const auto& [id, tags] : ev.entities) got.insert(id);
    EXPECT_EQ(got, want);
    expect_evidence_invariants(g, ev);
}

TEST(Navigate, DisjointPathwaysSumSizes) {
    // Low cue on the x axis, high cue on the y axis. No relation has positive
    // high-cue affinity, so the entry set is exactly {E, F}. E's neighbours
    // S1..S3 pass tau on entity similarity alone; F's neighbours P1..P4 take
    // the PPR slots because F carries the larger personalization weight; X1,X2
    // touch both entries through low-affinity edges, which makes them the
    // closest structural matches while keeping them out of the other two.
    KnowledgeGraph g;
    const std::vector<float> flat{1.0f, 0.0f}, away{0.0f, -1.0f};
    g.upsert_entity(make_entity("F", at_angle(0.0)));
    g.upsert_entity(make_entity("E", at_angle(std::acos(0.3))));
    for (int i = 1; i <= 3; ++i) {
        const auto n = "S" + std::to_string(i);
        g.upsert_entity(make_entity(n, at_angle(std::acos(0.3 - 0.05 * i))));
        add_edge(g, "E", n, 1.0, flat);
    }
    for (int i = 1; i <= 4; ++i) {
        const auto n = "P" + std::to_string(i);
        g.upsert_entity(make_entity(n, at_angle(2.0)));
        add_edge(g, "F", n, 1.0, flat);
    }
    for (int i = 1; i <= 2; ++i) {
        const auto n = "X" + std::to_string(i);
        g.upsert_entity(make_entity(n, at_angle(2.0)));
        add_edge(g, "E", n, 1.0, away);
        add_edge(g, "F", n, 1.0, away);
    }
    NavigationConfig cfg;
    cfg.top_k_entries = 2;
    cfg.top_neighbors = 3;
    cfg.tau = 0.05;
    cfg.top_ppr_nodes = 6;
    cfg.top_fastrp_nodes = 2;
    Navigator nav(g, cfg);
    QueryCues cues;
    cues.high_level = {"h"};
    cues.low_level = {"l"};
    cues.high_embeddings = {{0.0f, 1.0f}};
    cues.low_embeddings = {{1.0f, 0.0f}};
    const auto entries = nav.find_entries(cues);
    ASSERT_EQ(entries.entry_ids, (std::vector<std::string>{"ent:f", "ent:e"}));
    std::set<std::string> sem, ctx, fun;
    for (const auto& h : nav.semantic_association(entries, cues)) sem.insert(h.entity_id);
    for (const auto& e : nav.contextualized_association(entries, cues).entities) {
        if (e.entity_id != "ent:e" && e.entity_id != "ent:f") ctx.insert(e.entity_id);
    }
    for (const auto& e : nav.functional_association(entries).entities) fun.insert(e.entity_id);
    EXPECT_EQ(sem, (std::set<std::string>{"ent:s1", "ent:s2", "ent:s3"}));
    EXPECT_EQ(ctx, (std::set<std::string>{"ent:p1", "ent:p2", "ent:p3", "ent:p4"}));
    EXPECT_EQ(fun, (std::set<std::string>{"ent:x1", "ent:x2"}));
    const auto ev = nav.navigate(cues);
    EXPECT_EQ(ev.entries.size(), 2u);
    EXPECT_EQ(ev.entities.size(), 11u);
    expect_evidence_invariants(g, ev);
}

TEST(Navigate, AllPathwaysOffLeavesEntries) {
    std::mt19937_64 rng(41);
    const auto g = random_graph(rng, 30, 0.1, false, 8);
    NavigationConfig cfg;
    cfg.top_neighbors = cfg.top_ppr_nodes = cfg.top_fastrp_nodes = 0;
    Navigator nav(g, cfg);
    const auto cues = random_cues(rng, 8, 1, 2);
    const auto ev = nav.navigate(cues);
    std::set<std::string> got;
    for (const auto& [id, tags] : ev.entities) got.insert(id);
    EXPECT_EQ(got, ev.entries);
    EXPECT_FALSE(got.empty());
}

TEST(Navigate, DeterministicUnderMock) {
    Gateway gw(std::make_shared<MockProvider>(0));
    KnowledgeGraph g;
    for (auto n : {"Google", "DeepMind", "AlphaFold", "London"}) g.upsert_entity(make_entity(n, emb(gw, n)));
    add_edge(g, "Google", "DeepMind", 1.0, emb(gw, "Google acquired DeepMind"));
    add_edge(g, "DeepMind", "AlphaFold", 1.0, emb(gw, "DeepMind built AlphaFold"));
    add_edge(g, "DeepMind", "London", 1.0, emb(gw, "DeepMind is based in London"));
    Navigator nav(g, {});
    const auto a = nav.navigate("What did DeepMind build?", gw);
    const auto b = nav.navigate("What did DeepMind build?", gw);
    EXPECT_TRUE(a == b);
    EXPECT_TRUE(a.entries.count("ent:deepmind"));
    expect_evidence_invariants(g, a);
}

TEST(Navigate, InvariantsOnRandomGraphs) {
    std::mt19937_64 rng(50);
    for (int trial = 0; trial < 15; ++trial) {
        const auto g = random_graph(rng, 45, 0.07, true, 8);
        Navigator nav(g, {});
        expect_evidence_invariants(g, nav.navigate(random_cues(rng, 8, 2, 3)));
    }
}

TEST(Config, ValidationRejectsBadValues) {
    NavigationConfig c;
    c.damping = 1.0;
    EXPECT_THROW(c.validate(), PreconditionError);
    c = {};
    c.tau = 1.5;
    EXPECT_THROW(c.validate(), PreconditionError);
    c = {};
    c.alpha = -0.1;
    EXPECT_THROW(c.validate(), PreconditionError);
    c = {};
    c.top_k_entries = 0;
    EXPECT_THROW(c.validate(), PreconditionError);
}
