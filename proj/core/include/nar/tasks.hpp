#pragma once

#include <map>
#include <string>
#include <vector>

namespace nar {

enum class TaskId { sorting, minimum, binary_search, bfs, bellman_ford, mst_kruskal };

TaskId task_from_string(const std::string& name);
const std::string& to_string(TaskId task);

enum class Loc { node, edge, graph };
enum class Kind { scalar, mask, mask_one, pointer };

struct FeatureSpec {
  std::string name;
  Loc loc = Loc::node;
  Kind kind = Kind::scalar;
};

struct TaskSchema {
  TaskId task;
  std::vector<FeatureSpec> inputs;
  FeatureSpec output;
  bool is_graph = false;              // drives the step-count family
  bool contrastive_supported = false; // equivalence-class augmentations exist
  bool node_scalar_equivalence = false; // equivalence scalars live on nodes
  int min_n = 1;
};

const TaskSchema& schema(TaskId task);

/// One problem instance: inputs per the task schema plus the ground-truth
/// output. Node feature arrays have length n, edge arrays n*n (row-major),
/// graph features a single value. Outputs are stored as integers:
/// pointer -> target index per node; mask_one -> 0/1 per node (exactly one 1);
/// edge mask -> 0/1 per ordered edge (symmetric).
struct ProblemInstance {
  TaskId task = TaskId::sorting;
  int n = 0;
  std::map<std::string, std::vector<float>> node_features;
  std::map<std::string, std::vector<float>> edge_features;
  std::map<std::string, float> graph_features;
  std::vector<int> output;

  const std::vector<float>& node(const std::string& name) const { return node_features.at(name); }
  const std::vector<float>& edge(const std::string& name) const { return edge_features.at(name); }
  float graph(const std::string& name) const { return graph_features.at(name); }
};

/// Base instance plus one augmentation drawn from the same equivalence class;
/// outputs are identical by construction.
struct EquivalencePair {
  ProblemInstance base;
  ProblemInstance augmented;
};

/// Insertion-sort execution trace over the predecessor-chain representation.
/// Entry t holds the chain after the first t+1 elements (in index order) have
/// been inserted, plus the compared pair (i = final predecessor of the moved
/// element, j = the moved element). The final entry equals the sorted-order
/// pointers.
struct HintTrajectory {
  struct Step {
    std::vector<int> pred;
    int i = 0;
    int j = 0;
  };
  std::vector<Step> steps;
};

/// rank[i] = number of j with values[j] < values[i].
std::vector<int> rank_vector(const std::vector<float>& values);

}  // namespace nar
