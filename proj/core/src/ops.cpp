#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <utility>

#include "nar/autodiff.hpp"

namespace nar {

struct OpAccess {
  static const std::shared_ptr<detail::Node>& node(const Var& v) { return v.node_; }
  static Var make(std::shared_ptr<detail::Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }
  static void record(Tape* t, const std::shared_ptr<detail::Node>& n) { t->record(n); }
};

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const MatRM>;
using MutMap = Eigen::Map<MatRM>;

[[noreturn]] void fail(const char* op, const std::string& msg) {
  throw std::invalid_argument(std::string(op) + ": " + msg);
}

void require(bool ok, const char* op, const std::string& msg) {
  if (!ok) fail(op, msg);
}

detail::Node* raw(const Var& v) { return OpAccess::node(v).get(); }

Tensor& grad_buf(detail::Node* n) {
  if (!n->has_grad) {
    n->grad = Tensor::zeros(n->value.shape());
    n->has_grad = true;
  }
  return n->grad;
}

/// Builds the result node: infers the tape from the inputs, propagates
/// requires_grad, runs the checked-mode finiteness scan, and registers the
/// backward closure when gradients are needed.
Var make_result(const char* op, std::vector<Var> parents, Tensor value, std::function<void(detail::Node*)> bwd) {
  Tape* tape = nullptr;
  bool req = false;
  for (const auto& p : parents) {
    const auto& n = OpAccess::node(p);
    if (!n) fail(op, "undefined input");
    if (n->tape) {
      if (tape && tape != n->tape) fail(op, "inputs recorded on different tapes");
      tape = n->tape;
    }
    req = req || n->requires_grad;
  }
  if (checked_mode() && !value.all_finite()) {
    throw std::runtime_error(std::string(op) + ": non-finite output");
  }
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->tape = tape;
  node->requires_grad = req && tape != nullptr;
  if (node->requires_grad && bwd) {
    detail::Node* self = node.get();
    node->backward = [self, bwd = std::move(bwd), parents = std::move(parents)]() { bwd(self); };
  }
  if (tape) OpAccess::record(tape, node);
  return OpAccess::make(std::move(node));
}

bool is_suffix(const std::vector<int>& small, const std::vector<int>& big) {
  if (small.size() > big.size()) return false;
  for (size_t i = 0; i < small.size(); ++i) {
    if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
  }
  return true;
}

enum class Ew { Add, Sub, Mul };

Var ewise(const char* op, Ew kind, const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(is_suffix(bv.shape(), av.shape()), op,
          "shape " + bv.shape_str() + " is not a trailing suffix of " + av.shape_str());
  const int64_t an = av.numel();
  const int64_t bn = bv.numel();
  Tensor out(av.shape());
  const float* ap = av.data();
  const float* bp = bv.data();
  float* op_ = out.data();
  switch (kind) {
    case Ew::Add:
      for (int64_t i = 0; i < an; ++i) op_[i] = ap[i] + bp[bn == an ? i : i % bn];
      break;
    case Ew::Sub:
      for (int64_t i = 0; i < an; ++i) op_[i] = ap[i] - bp[bn == an ? i : i % bn];
      break;
    case Ew::Mul:
      for (int64_t i = 0; i < an; ++i) op_[i] = ap[i] * bp[bn == an ? i : i % bn];
      break;
  }
  return make_result(op, {a, b}, std::move(out), [kind, a, b, an, bn](detail::Node* self) {
    const float* g = self->grad.data();
    detail::Node* na = raw(a);
    detail::Node* nb = raw(b);
    if (na->requires_grad) {
      float* da = grad_buf(na).data();
      if (kind == Ew::Mul) {
        const float* bp = nb->value.data();
        for (int64_t i = 0; i < an; ++i) da[i] += g[i] * bp[i % bn];
      } else {
        for (int64_t i = 0; i < an; ++i) da[i] += g[i];
      }
    }
    if (nb->requires_grad) {
      float* db = grad_buf(nb).data();
      const float* ap = na->value.data();
      switch (kind) {
        case Ew::Add:
          for (int64_t i = 0; i < an; ++i) db[i % bn] += g[i];
          break;
        case Ew::Sub:
          for (int64_t i = 0; i < an; ++i) db[i % bn] -= g[i];
          break;
        case Ew::Mul:
          for (int64_t i = 0; i < an; ++i) db[i % bn] += g[i] * ap[i];
          break;
      }
    }
  });
}

struct AxisSplit {
  int64_t outer, len, inner;
};

AxisSplit split_axis(const char* op, const std::vector<int>& shape, int axis) {
  require(axis >= 0 && axis < static_cast<int>(shape.size()), op,
          "axis " + std::to_string(axis) + " out of range for " + Tensor::shape_str(shape));
  AxisSplit s{1, shape[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::vector<int> drop_axis(const std::vector<int>& shape, int axis) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[static_cast<size_t>(i)]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

Var add(const Var& a, const Var& b) { return ewise("add", Ew::Add, a, b); }
Var sub(const Var& a, const Var& b) { return ewise("sub", Ew::Sub, a, b); }
Var mul(const Var& a, const Var& b) { return ewise("mul", Ew::Mul, a, b); }

Var affine(const Var& x, float scale, float shift) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  const int64_t n = xv.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = scale * xv[i] + shift;
  return make_result("affine", {x}, std::move(out), [x, scale, n](detail::Node* self) {
    detail::Node* nx = raw(x);
    if (!nx->requires_grad) return;
    float* dx = grad_buf(nx).data();
    const float* g = self->grad.data();
    for (int64_t i = 0; i < n; ++i) dx[i] += scale * g[i];
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() >= 2, "matmul", "lhs must be rank >= 2, got " + av.shape_str());
  require(bv.rank() == 2, "matmul", "rhs must be rank 2, got " + bv.shape_str());
  const int64_t M = av.rows();
  const int K = av.cols();
  require(bv.extent(0) == K, "matmul", "inner extents differ: " + av.shape_str() + " vs " + bv.shape_str());
  const int N = bv.extent(1);
  std::vector<int> out_shape(av.shape());
  out_shape.back() = N;
  Tensor out(out_shape);
  MutMap(out.data(), M, N).noalias() = ConstMap(av.data(), M, K) * ConstMap(bv.data(), K, N);
  return make_result("matmul", {a, b}, std::move(out), [a, b, M, K, N](detail::Node* self) {
    ConstMap g(self->grad.data(), M, N);
    detail::Node* na = raw(a);
    detail::Node* nb = raw(b);
    if (na->requires_grad) {
      MutMap(grad_buf(na).data(), M, K).noalias() += g * ConstMap(nb->value.data(), K, N).transpose();
    }
    if (nb->requires_grad) {
      MutMap(grad_buf(nb).data(), K, N).noalias() += ConstMap(na->value.data(), M, K).transpose() * g;
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() >= 2, "matmul_nt", "lhs must be rank >= 2, got " + av.shape_str());
  require(bv.rank() == 2, "matmul_nt", "rhs must be rank 2, got " + bv.shape_str());
  const int64_t M = av.rows();
  const int K = av.cols();
  require(bv.extent(1) == K, "matmul_nt", "inner extents differ: " + av.shape_str() + " vs " + bv.shape_str());
  const int N = bv.extent(0);
  std::vector<int> out_shape(av.shape());
  out_shape.back() = N;
  Tensor out(out_shape);
  MutMap(out.data(), M, N).noalias() = ConstMap(av.data(), M, K) * ConstMap(bv.data(), N, K).transpose();
  return make_result("matmul_nt", {a, b}, std::move(out), [a, b, M, K, N](detail::Node* self) {
    ConstMap g(self->grad.data(), M, N);
    detail::Node* na = raw(a);
    detail::Node* nb = raw(b);
    if (na->requires_grad) {
      MutMap(grad_buf(na).data(), M, K).noalias() += g * ConstMap(nb->value.data(), N, K);
    }
    if (nb->requires_grad) {
      MutMap(grad_buf(nb).data(), N, K).noalias() += g.transpose() * ConstMap(na->value.data(), M, K);
    }
  });
}

Var concat_last(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_last", "no inputs");
  const auto& first = parts.front().value();
  std::vector<int> lead(first.shape().begin(), first.shape().end() - 1);
  int width = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    const Tensor& t = p.value();
    std::vector<int> pl(t.shape().begin(), t.shape().end() - 1);
    require(t.rank() >= 1 && pl == lead, "concat_last",
            "leading axes differ: " + first.shape_str() + " vs " + t.shape_str());
    widths.push_back(t.cols());
    width += t.cols();
  }
  std::vector<int> out_shape = lead;
  out_shape.push_back(width);
  Tensor out(out_shape);
  const int64_t rows = first.rows();
  float* op = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    float* dst = op + r * width;
    for (size_t p = 0; p < parts.size(); ++p) {
      const int w = widths[p];
      std::memcpy(dst, parts[p].value().data() + r * w, sizeof(float) * static_cast<size_t>(w));
      dst += w;
    }
  }
  return make_result("concat_last", parts, std::move(out), [parts, widths, rows, width](detail::Node* self) {
    const float* g = self->grad.data();
    int offset = 0;
    for (size_t p = 0; p < parts.size(); ++p) {
      detail::Node* np = raw(parts[p]);
      const int w = widths[p];
      if (np->requires_grad) {
        float* dp = grad_buf(np).data();
        for (int64_t r = 0; r < rows; ++r) {
          const float* src = g + r * width + offset;
          float* dst = dp + r * w;
          for (int c = 0; c < w; ++c) dst[c] += src[c];
        }
      }
      offset += w;
    }
  });
}

Var edge_concat(const Var& a, const Var& b, const Var& e, const Var& g) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2, "edge_concat", "node inputs must be rank 2");
  const int n = av.extent(0);
  require(bv.extent(0) == n, "edge_concat", "node counts differ: " + av.shape_str() + " vs " + bv.shape_str());
  const int da = av.extent(1);
  const int db = bv.extent(1);
  int de = 0, dg = 0;
  if (e.defined()) {
    const Tensor& ev = e.value();
    require(ev.rank() == 3 && ev.extent(0) == n && ev.extent(1) == n, "edge_concat",
            "edge input must be (n,n,de), got " + ev.shape_str());
    de = ev.extent(2);
  }
  if (g.defined()) {
    const Tensor& gv = g.value();
    require(gv.rank() == 1, "edge_concat", "graph input must be rank 1, got " + gv.shape_str());
    dg = gv.extent(0);
  }
  const int width = da + db + de + dg;
  Tensor out({n, n, width});
  float* op = out.data();
  const float* ap = av.data();
  const float* bp = bv.data();
  const float* ep = e.defined() ? e.value().data() : nullptr;
  const float* gp = g.defined() ? g.value().data() : nullptr;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      float* dst = op + (static_cast<int64_t>(i) * n + j) * width;
      std::memcpy(dst, ap + static_cast<int64_t>(i) * da, sizeof(float) * static_cast<size_t>(da));
      dst += da;
      std::memcpy(dst, bp + static_cast<int64_t>(j) * db, sizeof(float) * static_cast<size_t>(db));
      dst += db;
      if (ep) {
        std::memcpy(dst, ep + (static_cast<int64_t>(i) * n + j) * de, sizeof(float) * static_cast<size_t>(de));
        dst += de;
      }
      if (gp) std::memcpy(dst, gp, sizeof(float) * static_cast<size_t>(dg));
    }
  }
  std::vector<Var> parents{a, b};
  if (e.defined()) parents.push_back(e);
  if (g.defined()) parents.push_back(g);
  return make_result("edge_concat", std::move(parents), std::move(out),
                     [a, b, e, g, n, da, db, de, dg, width](detail::Node* self) {
                       const float* gr = self->grad.data();
                       detail::Node* na = raw(a);
                       detail::Node* nb = raw(b);
                       float* pa = na->requires_grad ? grad_buf(na).data() : nullptr;
                       float* pb = nb->requires_grad ? grad_buf(nb).data() : nullptr;
                       float* pe = (e.defined() && raw(e)->requires_grad) ? grad_buf(raw(e)).data() : nullptr;
                       float* pg = (g.defined() && raw(g)->requires_grad) ? grad_buf(raw(g)).data() : nullptr;
                       for (int i = 0; i < n; ++i) {
                         for (int j = 0; j < n; ++j) {
                           const float* src = gr + (static_cast<int64_t>(i) * n + j) * width;
                           if (pa) {
                             float* dst = pa + static_cast<int64_t>(i) * da;
                             for (int c = 0; c < da; ++c) dst[c] += src[c];
                           }
                           src += da;
                           if (pb) {
                             float* dst = pb + static_cast<int64_t>(j) * db;
                             for (int c = 0; c < db; ++c) dst[c] += src[c];
                           }
                           src += db;
                           if (de) {
                             if (pe) {
                               float* dst = pe + (static_cast<int64_t>(i) * n + j) * de;
                               for (int c = 0; c < de; ++c) dst[c] += src[c];
                             }
                             src += de;
                           }
                           if (pg) {
                             for (int c = 0; c < dg; ++c) pg[c] += src[c];
                           }
                         }
                       }
                     });
}

Var triplet_combine(const Var& pi, const Var& pj, const Var& pk, const Var& pij, const Var& pik, const Var& pkj,
                    const Var& pg) {
  const int n = pi.value().extent(0);
  const int w = pi.value().extent(1);
  auto check_node = [&](const Var& v, const char* what) {
    require(v.value().rank() == 2 && v.value().extent(0) == n && v.value().extent(1) == w, "triplet_combine",
            std::string(what) + " must be (n,w), got " + v.value().shape_str());
  };
  auto check_edge = [&](const Var& v, const char* what) {
    require(v.value().rank() == 3 && v.value().extent(0) == n && v.value().extent(1) == n && v.value().extent(2) == w,
            "triplet_combine", std::string(what) + " must be (n,n,w), got " + v.value().shape_str());
  };
  check_node(pj, "pj");
  check_node(pk, "pk");
  check_edge(pij, "pij");
  check_edge(pik, "pik");
  check_edge(pkj, "pkj");
  require(pg.value().rank() == 1 && pg.value().extent(0) == w, "triplet_combine",
          "pg must be (w), got " + pg.value().shape_str());

  Tensor out({n, n, n, w});
  {
    const float* vi = pi.value().data();
    const float* vj = pj.value().data();
    const float* vk = pk.value().data();
    const float* vij = pij.value().data();
    const float* vik = pik.value().data();
    const float* vkj = pkj.value().data();
    const float* vg = pg.value().data();
    float* op = out.data();
    std::vector<float> base(static_cast<size_t>(w));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const float* bij = vij + (static_cast<int64_t>(i) * n + j) * w;
        for (int c = 0; c < w; ++c) base[static_cast<size_t>(c)] = vi[i * w + c] + vj[j * w + c] + bij[c] + vg[c];
        for (int k = 0; k < n; ++k) {
          const float* bik = vik + (static_cast<int64_t>(i) * n + k) * w;
          const float* bkj = vkj + (static_cast<int64_t>(k) * n + j) * w;
          float* dst = op + ((static_cast<int64_t>(i) * n + j) * n + k) * w;
          for (int c = 0; c < w; ++c) dst[c] = base[static_cast<size_t>(c)] + vk[k * w + c] + bik[c] + bkj[c];
        }
      }
    }
  }
  std::vector<Var> parents{pi, pj, pk, pij, pik, pkj, pg};
  return make_result("triplet_combine", std::move(parents), std::move(out),
                     [pi, pj, pk, pij, pik, pkj, pg, n, w](detail::Node* self) {
                       const float* g = self->grad.data();
                       auto buf = [](const Var& v) -> float* {
                         detail::Node* nd = raw(v);
                         return nd->requires_grad ? grad_buf(nd).data() : nullptr;
                       };
                       float* di = buf(pi);
                       float* dj = buf(pj);
                       float* dk = buf(pk);
                       float* dij = buf(pij);
                       float* dik = buf(pik);
                       float* dkj = buf(pkj);
                       float* dg = buf(pg);
                       for (int i = 0; i < n; ++i) {
                         for (int j = 0; j < n; ++j) {
                           const int64_t ij = static_cast<int64_t>(i) * n + j;
                           for (int k = 0; k < n; ++k) {
                             const float* src = g + (ij * n + k) * w;
                             for (int c = 0; c < w; ++c) {
                               const float gv = src[c];
                               if (di) di[i * w + c] += gv;
                               if (dj) dj[j * w + c] += gv;
                               if (dk) dk[k * w + c] += gv;
                               if (dij) dij[ij * w + c] += gv;
                               if (dik) dik[(static_cast<int64_t>(i) * n + k) * w + c] += gv;
                               if (dkj) dkj[(static_cast<int64_t>(k) * n + j) * w + c] += gv;
                               if (dg) dg[c] += gv;
                             }
                           }
                         }
                       }
                     });
}

Var tile0(const Var& x, int m) {
  require(m >= 0, "tile0", "negative tile count");
  const Tensor& xv = x.value();
  std::vector<int> out_shape{m};
  out_shape.insert(out_shape.end(), xv.shape().begin(), xv.shape().end());
  Tensor out(out_shape);
  const int64_t n = xv.numel();
  for (int r = 0; r < m; ++r) {
    std::memcpy(out.data() + static_cast<int64_t>(r) * n, xv.data(), sizeof(float) * static_cast<size_t>(n));
  }
  return make_result("tile0", {x}, std::move(out), [x, m, n](detail::Node* self) {
    detail::Node* nx = raw(x);
    if (!nx->requires_grad) return;
    float* dx = grad_buf(nx).data();
    const float* g = self->grad.data();
    for (int r = 0; r < m; ++r) {
      const float* src = g + static_cast<int64_t>(r) * n;
      for (int64_t i = 0; i < n; ++i) dx[i] += src[i];
    }
  });
}

Var swap01(const Var& x) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 2, "swap01", "rank must be >= 2, got " + xv.shape_str());
  const int a = xv.extent(0);
  const int b = xv.extent(1);
  int64_t inner = 1;
  for (int i = 2; i < xv.rank(); ++i) inner *= xv.extent(i);
  std::vector<int> out_shape(xv.shape());
  std::swap(out_shape[0], out_shape[1]);
  Tensor out(out_shape);
  for (int i = 0; i < a; ++i) {
    for (int j = 0; j < b; ++j) {
      std::memcpy(out.data() + (static_cast<int64_t>(j) * a + i) * inner,
                  xv.data() + (static_cast<int64_t>(i) * b + j) * inner, sizeof(float) * static_cast<size_t>(inner));
    }
  }
  return make_result("swap01", {x}, std::move(out), [x, a, b, inner](detail::Node* self) {
    detail::Node* nx = raw(x);
    if (!nx->requires_grad) return;
    float* dx = grad_buf(nx).data();
    const float* g = self->grad.data();
    for (int i = 0; i < a; ++i) {
      for (int j = 0; j < b; ++j) {
        const float* src = g + (static_cast<int64_t>(j) * a + i) * inner;
        float* dst = dx + (static_cast<int64_t>(i) * b + j) * inner;
        for (int64_t c = 0; c < inner; ++c) dst[c] += src[c];
      }
    }
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  const Tensor& xv = x.value();
  require(Tensor::numel_of(shape) == xv.numel(), "reshape",
          "numel mismatch: " + xv.shape_str() + " -> " + Tensor::shape_str(shape));
  Tensor out(std::move(shape), xv.vec());
  const int64_t n = xv.numel();
  return make_result("reshape", {x}, std::move(out), [x, n](detail::Node* self) {
    detail::Node* nx = raw(x);
    if (!nx->requires_grad) return;
    float* dx = grad_buf(nx).data();
    const float* g = self->grad.data();
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i];
  });
}

namespace {

template <typename Fwd, typename BwdFactor>
Var unary(const char* op, const Var& x, Fwd fwd, BwdFactor factor_from) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  const int64_t n = xv.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = fwd(xv[i]);
  return make_result(op, {x}, std::move(out), [x, n, factor_from](detail::Node* self) {
    detail::Node* nx = raw(x);
    if (!nx->requires_grad) return;
    float* dx = grad_buf(nx).data();
    const float* g = self->grad.data();
    const float* xv = nx->value.data();
    const float* yv = self->value.data();
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * factor_from(xv[i], yv[i]);
  });
}

float stable_sigmoid(float x) {
  if (x >= 0.0f) {
    const float e = std::exp(-static_cast<double>(x));
    return static_cast<float>(1.0 / (1.0 + e));
  }
  const double e = std::exp(static_cast<double>(x));
  return static_cast<float>(e / (1.0 + e));
}

}  // namespace

Var relu(const Var& x) {
  return unary(
      "relu", x, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float, float y) { return y > 0.0f ? 1.0f : 0.0f; });
}

Var sigmoid(const Var& x) {
  return unary("sigmoid", x, &stable_sigmoid, [](float, float y) { return y * (1.0f - y); });
}

Var exp_op(const Var& x) {
  return unary(
      "exp", x, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Var log_op(const Var& x) {
  return unary(
      "log", x, [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

Var softplus(const Var& x) {
  return unary(
      "softplus", x,
      [](float v) {
        const double a = static_cast<double>(v);
        return static_cast<float>(a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)));
      },
      [](float v, float) { return stable_sigmoid(v); });
}

namespace {

enum class Red { Sum, Mean, Max };

Var reduce(const char* op, Red kind, const Var& x, int axis) {
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(op, xv.shape(), axis);
  require(s.len > 0, op, "cannot reduce over empty axis of " + xv.shape_str());
  Tensor out(drop_axis(xv.shape(), axis));
  std::vector<int32_t> argmax;
  if (kind == Red::Max) argmax.assign(static_cast<size_t>(s.outer * s.inner), 0);
  const float* xp = xv.data();
  float* op_ = out.data();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t i = 0; i < s.inner; ++i) {
      const float* base = xp + (o * s.len) * s.inner + i;
      if (kind == Red::Max) {
        float best = base[0];
        int32_t bi = 0;
        for (int64_t l = 1; l < s.len; ++l) {
          const float v = base[l * s.inner];
          if (v > best) {  // strict: first argmax wins ties
            best = v;
            bi = static_cast<int32_t>(l);
          }
        }
        op_[o * s.inner + i] = best;
        argmax[static_cast<size_t>(o * s.inner + i)] = bi;
      } else {
        double acc = 0.0;
        for (int64_t l = 0; l < s.len; ++l) acc += base[l * s.inner];
        if (kind == Red::Mean) acc /= static_cast<double>(s.len);
        op_[o * s.inner + i] = static_cast<float>(acc);
      }
    }
  }
  return make_result(op, {x}, std::move(out), [x, s, kind, argmax = std::move(argmax)](detail::Node* self) {
    detail::Node* nx = raw(x);
    if (!nx->requires_grad) return;
    float* dx = grad_buf(nx).data();
    const float* g = self->grad.data();
    for (int64_t o = 0; o < s.outer; ++o) {
      for (int64_t i = 0; i < s.inner; ++i) {
        const float gv = g[o * s.inner + i];
        float* base = dx + (o * s.len) * s.inner + i;
        switch (kind) {
          case Red::Sum:
            for (int64_t l = 0; l < s.len; ++l) base[l * s.inner] += gv;
            break;
          case Red::Mean:
            for (int64_t l = 0; l < s.len; ++l) base[l * s.inner] += gv / static_cast<float>(s.len);
            break;
          case Red::Max:
            base[argmax[static_cast<size_t>(o * s.inner + i)] * s.inner] += gv;
            break;
        }
      }
    }
  });
}

}  // namespace

Var reduce_sum(const Var& x, int axis) { return reduce("reduce_sum", Red::Sum, x, axis); }
Var reduce_mean(const Var& x, int axis) { return reduce("reduce_mean", Red::Mean, x, axis); }
Var reduce_max(const Var& x, int axis) { return reduce("reduce_max", Red::Max, x, axis); }

Var sum_all(const Var& x) {
  const Tensor& xv = x.value();
  double acc = 0.0;
  const int64_t n = xv.numel();
  for (int64_t i = 0; i < n; ++i) acc += xv[i];
  return make_result("sum_all", {x}, Tensor::scalar(static_cast<float>(acc)), [x, n](detail::Node* self) {
    detail::Node* nx = raw(x);
    if (!nx->requires_grad) return;
    float* dx = grad_buf(nx).data();
    const float g = self->grad[0];
    for (int64_t i = 0; i < n; ++i) dx[i] += g;
  });
}

namespace {

Var softmax_impl(const char* op, const Var& x, bool log_form) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 1 && xv.cols() > 0, op, "needs a non-empty last axis, got " + xv.shape_str());
  const int64_t rows = xv.rows();
  const int d = xv.cols();
  Tensor out(xv.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const float* xp = xv.data() + r * d;
    float* op_ = out.data() + r * d;
    float m = xp[0];
    for (int c = 1; c < d; ++c) m = std::max(m, xp[c]);
    double denom = 0.0;
    for (int c = 0; c < d; ++c) denom += std::exp(static_cast<double>(xp[c]) - m);
    if (log_form) {
      const double ld = std::log(denom);
      for (int c = 0; c < d; ++c) op_[c] = static_cast<float>(static_cast<double>(xp[c]) - m - ld);
    } else {
      for (int c = 0; c < d; ++c) op_[c] = static_cast<float>(std::exp(static_cast<double>(xp[c]) - m) / denom);
    }
  }
  return make_result(op, {x}, std::move(out), [x, rows, d, log_form](detail::Node* self) {
    detail::Node* nx = raw(x);
    if (!nx->requires_grad) return;
    float* dx = grad_buf(nx).data();
    const float* g = self->grad.data();
    const float* y = self->value.data();
    for (int64_t r = 0; r < rows; ++r) {
      const float* gr = g + r * d;
      const float* yr = y + r * d;
      float* dr = dx + r * d;
      if (log_form) {
        double gsum = 0.0;
        for (int c = 0; c < d; ++c) gsum += gr[c];
        for (int c = 0; c < d; ++c) {
          dr[c] += static_cast<float>(gr[c] - std::exp(static_cast<double>(yr[c])) * gsum);
        }
      } else {
        double dot = 0.0;
        for (int c = 0; c < d; ++c) dot += static_cast<double>(gr[c]) * yr[c];
        for (int c = 0; c < d; ++c) dr[c] += static_cast<float>(yr[c] * (gr[c] - dot));
      }
    }
  });
}

}  // namespace

Var softmax(const Var& x) { return softmax_impl("softmax", x, false); }
Var log_softmax(const Var& x) { return softmax_impl("log_softmax", x, true); }

Var layer_norm(const Var& x, const Var& scale, const Var& shift) {
  const Tensor& xv = x.value();
  const int d = xv.cols();
  require(scale.value().rank() == 1 && scale.value().extent(0) == d, "layer_norm",
          "scale must be (" + std::to_string(d) + "), got " + scale.value().shape_str());
  require(shift.value().rank() == 1 && shift.value().extent(0) == d, "layer_norm",
          "shift must be (" + std::to_string(d) + "), got " + shift.value().shape_str());
  const int64_t rows = xv.rows();
  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<float> inv_std(static_cast<size_t>(rows));
  const float* sp = scale.value().data();
  const float* bp = shift.value().data();
  for (int64_t r = 0; r < rows; ++r) {
    const float* xp = xv.data() + r * d;
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += xp[c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      const double dv = xp[c] - mean;
      var += dv * dv;
    }
    var /= d;
    const float inv = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(kLayerNormEps)));
    inv_std[static_cast<size_t>(r)] = inv;
    float* hp = xhat.data() + r * d;
    float* op = out.data() + r * d;
    for (int c = 0; c < d; ++c) {
      hp[c] = static_cast<float>((xp[c] - mean)) * inv;
      op[c] = hp[c] * sp[c] + bp[c];
    }
  }
  return make_result("layer_norm", {x, scale, shift}, std::move(out),
                     [x, scale, shift, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node* self) {
                       detail::Node* nx = raw(x);
                       detail::Node* ns = raw(scale);
                       detail::Node* nb = raw(shift);
                       const float* g = self->grad.data();
                       const float* sp = ns->value.data();
                       float* dscale = ns->requires_grad ? grad_buf(ns).data() : nullptr;
                       float* dshift = nb->requires_grad ? grad_buf(nb).data() : nullptr;
                       float* dx = nx->requires_grad ? grad_buf(nx).data() : nullptr;
                       for (int64_t r = 0; r < rows; ++r) {
                         const float* gr = g + r * d;
                         const float* hr = xhat.data() + r * d;
                         if (dscale || dshift) {
                           for (int c = 0; c < d; ++c) {
                             if (dscale) dscale[c] += gr[c] * hr[c];
                             if (dshift) dshift[c] += gr[c];
                           }
                         }
                         if (dx) {
                           double a = 0.0, b = 0.0;
                           for (int c = 0; c < d; ++c) {
                             const double gs = static_cast<double>(gr[c]) * sp[c];
                             a += gs;
                             b += gs * hr[c];
                           }
                           a /= d;
                           b /= d;
                           const float inv = inv_std[static_cast<size_t>(r)];
                           float* dr = dx + r * d;
                           for (int c = 0; c < d; ++c) {
                             const double gs = static_cast<double>(gr[c]) * sp[c];
                             dr[c] += static_cast<float>(inv * (gs - a - hr[c] * b));
                           }
                         }
                       }
                     });
}

}  // namespace nar
