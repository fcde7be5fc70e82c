#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "darer/tensor.hpp"

namespace darer {

enum class NodeTask { none, sentiment, act };

/// Temporal comparison of an edge's source utterance against its target.
enum class SpeakerOrder { after, not_after };
enum class TaskOrder { before, equal, after };

/// Relation-disentangled directed graph.
///
/// Relation ids are 1-based; `adjacency[id - 1](i, j)` is true iff the edge
/// i -> j (information flows from i into j) carries relation `id`. Every
/// ordered pair of distinct nodes lies in exactly one view and no view has
/// self-pairs.
struct RelationalGraph {
  std::size_t num_nodes = 0;
  std::size_t num_relations = 0;
  std::vector<BoolMatrix> adjacency;
  std::vector<std::size_t> node_position;
  std::vector<NodeTask> node_task;

  const BoolMatrix& view(int relation_id) const;
  /// Attention-style mask for relation `id`: mask(i, j) is true iff j is an
  /// in-neighbour of i.
  BoolMatrix incoming_mask(int relation_id) const;
  std::size_t edge_count() const;
};

/// Relation id (1..2S^2) for a SATG edge between speakers in 1..S.
int relation_id_satg(int speaker_i, int speaker_j, SpeakerOrder order, int num_speakers);
/// Relation id (1..12) for a DRTG edge. Only sentiment and act tasks are valid.
int relation_id_drtg(NodeTask task_i, NodeTask task_j, TaskOrder order);

std::string satg_relation_name(int relation_id, int num_speakers);
std::string drtg_relation_name(int relation_id);

/// Speaker-aware temporal graph over utterances. Speakers are 1-based;
/// `num_speakers` fixes the relation space (defaults to the largest id seen).
RelationalGraph build_satg(const std::vector<int>& speakers, int num_speakers = 0);
/// Dual-task graph: nodes 0..N-1 are sentiment nodes, N..2N-1 act nodes.
RelationalGraph build_drtg(std::size_t num_utterances);

/// |N_i^r|: number of j with an edge j -> i under relation `relation_id`.
std::size_t neighbor_count(const RelationalGraph& graph, int relation_id, std::size_t node);

inline constexpr int kDrtgRelations = 12;

}  // namespace darer
