#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nar/autodiff.hpp"
#include "nar/tensor.hpp"

namespace nar {

enum class Init { xavier_weight, zero_bias, ln_scale, ln_shift };

struct ParamDef {
  std::string path;
  std::vector<int> shape;
  Init init = Init::xavier_weight;
};

/// Named map of parameter tensors. Paths are dot-separated and unique;
/// iteration is lexicographic (std::map).
class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor>;

  void insert(const std::string& path, Tensor t);
  bool contains(const std::string& path) const { return items_.count(path) > 0; }
  const Tensor& at(const std::string& path) const;
  Tensor& at(const std::string& path);

  const Map& items() const { return items_; }
  Map& items() { return items_; }
  size_t size() const { return items_.size(); }
  int64_t total_elements() const;

  const std::string& version() const { return version_; }
  void set_version(std::string v) { version_ = std::move(v); }

 private:
  Map items_;
  std::string version_ = "1";
};

/// Draws every tensor from its own seed stream (derived from `seed` and the
/// parameter path), so a given path's values do not depend on which other
/// parameters exist. Weights are Xavier-uniform with bound
/// sqrt(6/(fan_in+fan_out)); biases and layer-norm shifts are zero; layer-norm
/// scales are one. Duplicate paths fail.
ParameterSet init_parameters(const std::vector<ParamDef>& spec, uint64_t seed);

/// Per-tape view of a ParameterSet: one leaf Var per parameter.
class VarMap {
 public:
  VarMap(Tape* tape, const ParameterSet& params, bool requires_grad);

  const Var& at(const std::string& path) const;
  bool contains(const std::string& path) const { return vars_.count(path) > 0; }
  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  std::map<std::string, Var> vars_;
};

using GradMap = std::map<std::string, Tensor>;

/// Gradients accumulated on the leaves after Tape::backward. Parameters whose
/// gradient was never touched come back as zeros.
GradMap extract_grads(const VarMap& vars, const ParameterSet& params);

// ---- parameterized building blocks -----------------------------------------

/// x (rows, in) -> x*W + b with W = `name`.w (in, out) and b = `name`.b (out).
Var linear(const VarMap& vars, const std::string& name, const Var& x);
/// Weight-only variant (no bias path is looked up).
Var linear_nobias(const VarMap& vars, const std::string& name, const Var& x);

/// Alternating linear layers and ReLU with no activation after the final
/// layer. Layers are named `name`.l0, `name`.l1, ...
Var mlp(const VarMap& vars, const std::string& name, const Var& x, int num_layers);

/// ParamDefs for a linear layer / an MLP with the given width chain.
void add_linear(std::vector<ParamDef>& spec, const std::string& name, int in, int out, bool bias = true);
void add_mlp(std::vector<ParamDef>& spec, const std::string& name, const std::vector<int>& widths);

}  // namespace nar
