#include "darer/graphs.hpp"

#include <algorithm>
#include <stdexcept>

namespace darer {

const BoolMatrix& RelationalGraph::view(int relation_id) const {
  if (relation_id < 1 || static_cast<std::size_t>(relation_id) > num_relations)
    throw std::out_of_range("relation id " + std::to_string(relation_id) + " outside 1.." +
                            std::to_string(num_relations));
  return adjacency[static_cast<std::size_t>(relation_id - 1)];
}

BoolMatrix RelationalGraph::incoming_mask(int relation_id) const {
  return view(relation_id).transposed();
}

std::size_t RelationalGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adjacency) n += a.count();
  return n;
}

int relation_id_satg(int speaker_i, int speaker_j, SpeakerOrder order, int num_speakers) {
  if (num_speakers < 1) throw std::invalid_argument("num_speakers must be >= 1");
  for (int s : {speaker_i, speaker_j})
    if (s < 1 || s > num_speakers)
      throw std::out_of_range("speaker id " + std::to_string(s) + " outside 1.." +
                              std::to_string(num_speakers));
  const int pair = (speaker_i - 1) * num_speakers + (speaker_j - 1);
  return pair * 2 + (order == SpeakerOrder::after ? 0 : 1) + 1;
}

namespace {

int task_index(NodeTask t) {
  switch (t) {
    case NodeTask::sentiment: return 0;
    case NodeTask::act: return 1;
    default: throw std::invalid_argument("DRTG relation needs a sentiment or act node");
  }
}

int order_index(TaskOrder o) {
  switch (o) {
    case TaskOrder::before: return 0;
    case TaskOrder::equal: return 1;
    case TaskOrder::after: return 2;
  }
  return 0;
}

}  // namespace

int relation_id_drtg(NodeTask task_i, NodeTask task_j, TaskOrder order) {
  return (task_index(task_i) * 2 + task_index(task_j)) * 3 + order_index(order) + 1;
}

std::string satg_relation_name(int relation_id, int num_speakers) {
  const int k = relation_id - 1;
  const int pair = k / 2;
  const int si = pair / num_speakers + 1;
  const int sj = pair % num_speakers + 1;
  return "spk" + std::to_string(si) + "->spk" + std::to_string(sj) + (k % 2 == 0 ? ":>" : ":<=");
}

std::string drtg_relation_name(int relation_id) {
  static const char* tasks[] = {"S", "A"};
  static const char* orders[] = {"<", "=", ">"};
  const int k = relation_id - 1;
  const int pair = k / 3;
  return std::string(tasks[pair / 2]) + "->" + tasks[pair % 2] + ":" + orders[k % 3];
}

RelationalGraph build_satg(const std::vector<int>& speakers, int num_speakers) {
  if (speakers.empty()) throw std::invalid_argument("build_satg: empty dialog");
  if (num_speakers == 0) num_speakers = *std::max_element(speakers.begin(), speakers.end());
  const std::size_t n = speakers.size();
  RelationalGraph g;
  g.num_nodes = n;
  g.num_relations = static_cast<std::size_t>(2 * num_speakers * num_speakers);
  g.adjacency.assign(g.num_relations, BoolMatrix(n, n));
  g.node_task.assign(n, NodeTask::none);
  for (std::size_t i = 0; i < n; ++i) g.node_position.push_back(i);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto order = i > j ? SpeakerOrder::after : SpeakerOrder::not_after;
      const int r = relation_id_satg(speakers[i], speakers[j], order, num_speakers);
      g.adjacency[static_cast<std::size_t>(r - 1)].set(i, j, true);
    }
  return g;
}

RelationalGraph build_drtg(std::size_t num_utterances) {
  if (num_utterances == 0) throw std::invalid_argument("build_drtg: empty dialog");
  const std::size_t n = num_utterances;
  const std::size_t m = 2 * n;
  RelationalGraph g;
  g.num_nodes = m;
  g.num_relations = kDrtgRelations;
  g.adjacency.assign(g.num_relations, BoolMatrix(m, m));
  for (std::size_t i = 0; i < m; ++i) {
    g.node_position.push_back(i % n);
    g.node_task.push_back(i < n ? NodeTask::sentiment : NodeTask::act);
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const std::size_t pi = g.node_position[i], pj = g.node_position[j];
      const auto order = pi < pj ? TaskOrder::before : (pi == pj ? TaskOrder::equal : TaskOrder::after);
      const int r = relation_id_drtg(g.node_task[i], g.node_task[j], order);
      g.adjacency[static_cast<std::size_t>(r - 1)].set(i, j, true);
    }
  return g;
}

std::size_t neighbor_count(const RelationalGraph& graph, int relation_id, std::size_t node) {
  const auto& a = graph.view(relation_id);
  std::size_t c = 0;
  for (std::size_t j = 0; j < graph.num_nodes; ++j)
    if (a(j, node)) ++c;
  return c;
}

}  // namespace darer
