#include "nar/params.hpp"

#include <cmath>
#include <stdexcept>

#include "nar/rng.hpp"

namespace nar {

void ParameterSet::insert(const std::string& path, Tensor t) {
  auto [it, ok] = items_.emplace(path, std::move(t));
  (void)it;
  if (!ok) throw std::invalid_argument("parameters: duplicate path '" + path + "'");
}

const Tensor& ParameterSet::at(const std::string& path) const {
  auto it = items_.find(path);
  if (it == items_.end()) throw std::out_of_range("parameters: missing path '" + path + "'");
  return it->second;
}

Tensor& ParameterSet::at(const std::string& path) {
  auto it = items_.find(path);
  if (it == items_.end()) throw std::out_of_range("parameters: missing path '" + path + "'");
  return it->second;
}

int64_t ParameterSet::total_elements() const {
  int64_t n = 0;
  for (const auto& [path, t] : items_) n += t.numel();
  return n;
}

ParameterSet init_parameters(const std::vector<ParamDef>& spec, uint64_t seed) {
  ParameterSet ps;
  Rng root(seed);
  for (const ParamDef& def : spec) {
    Tensor t(def.shape);
    switch (def.init) {
      case Init::xavier_weight: {
        if (def.shape.size() != 2) {
          throw std::invalid_argument("init: xavier weight '" + def.path + "' must be rank 2, got " +
                                      Tensor::shape_str(def.shape));
        }
        const double fan_in = def.shape[0];
        const double fan_out = def.shape[1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Rng rng = root.split(def.path);
        for (int64_t i = 0; i < t.numel(); ++i) {
          t[i] = static_cast<float>((rng.uniform() * 2.0 - 1.0) * bound);
        }
        break;
      }
      case Init::zero_bias:
      case Init::ln_shift:
        break;  // zeros
      case Init::ln_scale:
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = 1.0f;
        break;
    }
    ps.insert(def.path, std::move(t));
  }
  return ps;
}

VarMap::VarMap(Tape* tape, const ParameterSet& params, bool requires_grad) {
  for (const auto& [path, tensor] : params.items()) {
    vars_.emplace(path, tape ? tape->leaf(tensor, requires_grad) : constant(tensor));
  }
}

const Var& VarMap::at(const std::string& path) const {
  auto it = vars_.find(path);
  if (it == vars_.end()) throw std::out_of_range("parameters: missing path '" + path + "'");
  return it->second;
}

GradMap extract_grads(const VarMap& vars, const ParameterSet& params) {
  GradMap grads;
  for (const auto& [path, var] : vars.vars()) {
    if (var.has_grad()) {
      grads.emplace(path, var.grad());
    } else {
      grads.emplace(path, Tensor::zeros(params.at(path).shape()));
    }
  }
  return grads;
}

Var linear(const VarMap& vars, const std::string& name, const Var& x) {
  return add(matmul(x, vars.at(name + ".w")), vars.at(name + ".b"));
}

Var linear_nobias(const VarMap& vars, const std::string& name, const Var& x) {
  return matmul(x, vars.at(name + ".w"));
}

Var mlp(const VarMap& vars, const std::string& name, const Var& x, int num_layers) {
  Var h = x;
  for (int l = 0; l < num_layers; ++l) {
    h = linear(vars, name + ".l" + std::to_string(l), h);
    if (l + 1 < num_layers) h = relu(h);
  }
  return h;
}

void add_linear(std::vector<ParamDef>& spec, const std::string& name, int in, int out, bool bias) {
  spec.push_back({name + ".w", {in, out}, Init::xavier_weight});
  if (bias) spec.push_back({name + ".b", {out}, Init::zero_bias});
}

void add_mlp(std::vector<ParamDef>& spec, const std::string& name, const std::vector<int>& widths) {
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    add_linear(spec, name + ".l" + std::to_string(l), widths[l], widths[l + 1]);
  }
}

}  // namespace nar
