#include "nar/tasks.hpp"

#include <stdexcept>

namespace nar {

namespace {

const std::map<std::string, TaskId> kByName = {
    {"sorting", TaskId::sorting},           {"minimum", TaskId::minimum},
    {"binary_search", TaskId::binary_search}, {"bfs", TaskId::bfs},
    {"bellman_ford", TaskId::bellman_ford}, {"mst_kruskal", TaskId::mst_kruskal},
};

}  // namespace

TaskId task_from_string(const std::string& name) {
  auto it = kByName.find(name);
  if (it == kByName.end()) throw std::invalid_argument("unknown task '" + name + "'");
  return it->second;
}

const std::string& to_string(TaskId task) {
  for (const auto& [name, id] : kByName) {
    if (id == task) return name;
  }
  throw std::logic_error("unmapped task id");
}

const TaskSchema& schema(TaskId task) {
  static const TaskSchema sorting{TaskId::sorting,
                                  {{"key", Loc::node, Kind::scalar}},
                                  {"pred", Loc::node, Kind::pointer},
                                  false,
                                  true,
                                  true,
                                  1};
  static const TaskSchema minimum{TaskId::minimum,
                                  {{"key", Loc::node, Kind::scalar}},
                                  {"min", Loc::node, Kind::mask_one},
                                  false,
                                  true,
                                  true,
                                  1};
  static const TaskSchema binary_search{TaskId::binary_search,
                                        {{"key", Loc::node, Kind::scalar}, {"target", Loc::graph, Kind::scalar}},
                                        {"return", Loc::node, Kind::mask_one},
                                        false,
                                        true,
                                        true,
                                        1};
  static const TaskSchema bfs{TaskId::bfs,
                              {{"adj", Loc::edge, Kind::mask}, {"source", Loc::node, Kind::mask_one}},
                              {"pi", Loc::node, Kind::pointer},
                              true,
                              false,
                              false,
                              2};
  static const TaskSchema bellman_ford{
      TaskId::bellman_ford,
      {{"adj", Loc::edge, Kind::mask}, {"weight", Loc::edge, Kind::scalar}, {"source", Loc::node, Kind::mask_one}},
      {"pi", Loc::node, Kind::pointer},
      true,
      false,
      false,
      2};
  static const TaskSchema mst_kruskal{TaskId::mst_kruskal,
                                      {{"adj", Loc::edge, Kind::mask}, {"weight", Loc::edge, Kind::scalar}},
                                      {"in_mst", Loc::edge, Kind::mask},
                                      true,
                                      true,
                                      false,
                                      2};
  switch (task) {
    case TaskId::sorting: return sorting;
    case TaskId::minimum: return minimum;
    case TaskId::binary_search: return binary_search;
    case TaskId::bfs: return bfs;
    case TaskId::bellman_ford: return bellman_ford;
    case TaskId::mst_kruskal: return mst_kruskal;
  }
  throw std::logic_error("unmapped task id");
}

std::vector<int> rank_vector(const std::vector<float>& values) {
  const int n = static_cast<int>(values.size());
  std::vector<int> rank(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (values[static_cast<size_t>(j)] < values[static_cast<size_t>(i)]) ++rank[static_cast<size_t>(i)];
    }
  }
  return rank;
}

}  // namespace nar
