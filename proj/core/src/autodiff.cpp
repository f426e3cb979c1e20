#include "nar/autodiff.hpp"

#include <atomic>
#include <stdexcept>

namespace nar {

namespace {
std::atomic<bool> g_checked{false};
const Tensor kEmpty{};
}  // namespace

void set_checked_mode(bool enabled) { g_checked.store(enabled, std::memory_order_relaxed); }
bool checked_mode() { return g_checked.load(std::memory_order_relaxed); }

const Tensor& Var::grad() const {
  if (!node_ || !node_->has_grad) return kEmpty;
  return node_->grad;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->is_leaf = true;
  node->tape = this;
  record(node);
  Var v;
  v.node_ = std::move(node);
  return v;
}

Var constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->is_leaf = true;
  Var v;
  v.node_ = std::move(node);
  return v;
}

void Tape::backward(const Var& loss) {
  if (backward_done_) throw std::logic_error("tape: backward called twice");
  backward_done_ = true;
  auto loss_node = loss.node_;
  if (!loss_node || loss_node->tape != this) throw std::invalid_argument("tape: loss is not recorded on this tape");
  if (loss_node->value.numel() != 1) {
    throw std::invalid_argument("tape: backward needs a scalar loss, got " + loss_node->value.shape_str());
  }
  loss_node->grad = Tensor::full(loss_node->value.shape(), 1.0f);
  loss_node->has_grad = true;

  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node* node = it->get();
    if (node->has_grad && node->backward) node->backward();
    if (!node->is_leaf) {
      // Consumers have already read this grad; free it to bound peak memory.
      node->grad = Tensor();
      node->has_grad = false;
      node->backward = nullptr;
    }
  }
}

}  // namespace nar
