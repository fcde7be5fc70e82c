#include <random>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "darer/graphs.hpp"
#include "tables.hpp"

using namespace darer;
using namespace darer::tables;

namespace {

void expect_partition(const RelationalGraph& g) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    for (std::size_t j = 0; j < g.num_nodes; ++j) {
      std::size_t hits = 0;
      for (const auto& a : g.adjacency) hits += a(i, j) ? 1 : 0;
      ASSERT_EQ(hits, i == j ? 0u : 1u) << "pair " << i << "," << j;
      total += hits;
    }
  EXPECT_EQ(total, g.num_nodes * (g.num_nodes - 1));
  EXPECT_EQ(g.edge_count(), total);
}

}  // namespace

TEST(Satg, RelationIdsMatchReferenceTable) {
  for (const auto& c : kSatgTable)
    EXPECT_EQ(relation_id_satg(c.speaker_i, c.speaker_j, c.order, 2), c.id);
}

TEST(Satg, RelationIdRejectsUnknownSpeaker) {
  EXPECT_THROW(relation_id_satg(3, 1, SpeakerOrder::after, 2), std::out_of_range);
  EXPECT_THROW(relation_id_satg(0, 1, SpeakerOrder::after, 2), std::out_of_range);
}

TEST(Satg, RelationIdsInjectiveForThreeSpeakers) {
  std::set<int> seen;
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b)
      for (auto o : {SpeakerOrder::after, SpeakerOrder::not_after}) {
        const int id = relation_id_satg(a, b, o, 3);
        EXPECT_GE(id, 1);
        EXPECT_LE(id, 18);
        seen.insert(id);
      }
  EXPECT_EQ(seen.size(), 18u);
}

TEST(Satg, EdgesIntoThirdUtterance) {
  RelationalGraph g = build_satg({1, 2, 1, 2, 1});
  EXPECT_EQ(g.num_relations, 8u);
  EXPECT_TRUE(g.view(2)(0, 2));  // u1 -> u3, same speaker, earlier
  EXPECT_TRUE(g.view(5)(3, 2));  // u4 -> u3, speaker 2 -> 1, later
  EXPECT_TRUE(g.view(6)(1, 2));  // u2 -> u3
  EXPECT_TRUE(g.view(1)(4, 2));  // u5 -> u3
}

TEST(Satg, SingleUtteranceHasNoEdges) {
  RelationalGraph g = build_satg({1}, 2);
  EXPECT_EQ(g.num_nodes, 1u);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(Satg, NeighborCountsSingleSpeaker) {
  RelationalGraph g = build_satg({1, 1, 1}, 2);
  EXPECT_EQ(neighbor_count(g, 1, 2), 0u);
  EXPECT_EQ(neighbor_count(g, 2, 2), 2u);
}

TEST(Satg, EmptyDialogRejected) { EXPECT_THROW(build_satg({}), std::invalid_argument); }

TEST(Satg, RelationNames) {
  EXPECT_EQ(satg_relation_name(1, 2), "spk1->spk1:>");
  EXPECT_EQ(satg_relation_name(4, 2), "spk1->spk2:<=");
}

TEST(Drtg, RelationIdsMatchReferenceTable) {
  for (const auto& c : kDrtgTable) EXPECT_EQ(relation_id_drtg(c.task_i, c.task_j, c.order), c.id);
}

TEST(Drtg, RelationNames) {
  EXPECT_EQ(drtg_relation_name(1), "S->S:<");
  EXPECT_EQ(drtg_relation_name(5), "S->A:=");
  EXPECT_EQ(drtg_relation_name(12), "A->A:>");
}

TEST(Drtg, SingleUtteranceLinksDualNodes) {
  RelationalGraph g = build_drtg(1);
  EXPECT_EQ(g.num_nodes, 2u);
  EXPECT_EQ(g.num_relations, 12u);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_TRUE(g.view(5)(0, 1));
  EXPECT_TRUE(g.view(8)(1, 0));
}

TEST(Drtg, LayoutAndEdgeCount) {
  RelationalGraph g = build_drtg(2);
  EXPECT_EQ(g.edge_count(), 12u);
  EXPECT_EQ(g.node_task[0], NodeTask::sentiment);
  EXPECT_EQ(g.node_task[3], NodeTask::act);
  EXPECT_EQ(g.node_position[1], 1u);
  EXPECT_EQ(g.node_position[3], 1u);
  EXPECT_THROW(build_drtg(0), std::invalid_argument);
}

TEST(Drtg, EveryEdgeLabelledByTaskAndOrder) {
  RelationalGraph g = build_drtg(4);
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    for (std::size_t j = 0; j < g.num_nodes; ++j) {
      if (i == j) continue;
      const auto pi = g.node_position[i], pj = g.node_position[j];
      const TaskOrder o = pi < pj ? TaskOrder::before : pi == pj ? TaskOrder::equal : TaskOrder::after;
      const int id = relation_id_drtg(g.node_task[i], g.node_task[j], o);
      EXPECT_TRUE(g.view(id)(i, j));
    }
}

TEST(Partition, ExhaustiveUpToTwelveNodes) {
  std::mt19937_64 rng(5);
  for (std::size_t n = 1; n <= 12; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<int> speakers(n);
      for (auto& s : speakers) s = std::uniform_int_distribution<int>(1, 3)(rng);
      RelationalGraph g = build_satg(speakers, 3);
      EXPECT_EQ(g.num_relations, 18u);
      expect_partition(g);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t in = 0;
        for (int r = 1; r <= 18; ++r) in += neighbor_count(g, r, i);
        EXPECT_EQ(in, n - 1);
      }
    }
    if (2 * n <= 12) {
      RelationalGraph d = build_drtg(n);
      expect_partition(d);
    }
  }
}

TEST(Partition, DrtgInNeighbourSum) {
  RelationalGraph g = build_drtg(6);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    std::size_t in = 0;
    for (int r = 1; r <= kDrtgRelations; ++r) in += neighbor_count(g, r, i);
    EXPECT_EQ(in, g.num_nodes - 1);
  }
}

TEST(Graphs, IncomingMaskIsTransposedAdjacency) {
  RelationalGraph g = build_satg({1, 2, 2, 1});
  for (int r = 1; r <= 8; ++r) EXPECT_EQ(g.incoming_mask(r), g.view(r).transposed());
}
