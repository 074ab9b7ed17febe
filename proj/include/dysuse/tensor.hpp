#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dysuse/common.hpp"

namespace dysuse {

// Dense 64-bit real tensor participating in reverse-mode autodiff. Values are
// immutable once recorded on a tape; parameters are leaves whose grad buffers
// persist across tapes.
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated iff the node participates in backward
  bool requires_grad = false;
  std::string name;
  std::function<void()> backward_fn;  // accumulates into parents' grads
  std::vector<std::shared_ptr<TensorNode>> parents;

  std::size_t size() const { return value.size(); }
};

inline std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace tensor_pool {

// Thread-local recycling of tensor buffers. Buffers are binned by power-of-
// two capacity; returning storage here instead of the allocator keeps the
// heap stable across the many short-lived tensors a forward pass creates.
class BufferPool {
 public:
  std::vector<double> get(std::size_t n) {
    if (n == 0) return {};
    const unsigned c = size_class(n);
    for (unsigned b = c; b < c + 2 && b < kClasses; ++b) {
      auto& bin = bins_[b];
      if (!bin.empty()) {
        std::vector<double> v = std::move(bin.back());
        bin.pop_back();
        bytes_ -= v.capacity() * sizeof(double);
        v.resize(n);
        return v;
      }
    }
    std::vector<double> v;
    v.reserve(std::size_t{1} << c);
    v.resize(n);
    return v;
  }

  void put(std::vector<double>&& v) {
    const std::size_t cap = v.capacity();
    if (cap == 0) return;
    if (bytes_ + cap * sizeof(double) > kMaxBytes) return;  // let it free
    unsigned b = 0;
    while (b + 1 < kClasses && (std::size_t{1} << (b + 1)) <= cap) ++b;
    bytes_ += cap * sizeof(double);
    bins_[b].push_back(std::move(v));
  }

 private:
  static unsigned size_class(std::size_t n) {
    unsigned c = 0;
    while ((std::size_t{1} << c) < n && c + 1 < kClasses) ++c;
    return c;
  }
  static constexpr unsigned kClasses = 28;
  static constexpr std::size_t kMaxBytes = std::size_t{64} << 20;
  std::vector<std::vector<double>> bins_[kClasses];
  std::size_t bytes_ = 0;
};

inline BufferPool& pool() {
  static thread_local BufferPool p;
  return p;
}

// contents unspecified; every element must be written or zeroed by the caller
inline std::vector<double> get(std::size_t n) { return pool().get(n); }

inline std::vector<double> get_zero(std::size_t n) {
  std::vector<double> v = pool().get(n);
  std::fill(v.begin(), v.end(), 0.0);
  return v;
}

inline std::vector<double> get_copy(const std::vector<double>& src) {
  std::vector<double> v = pool().get(src.size());
  std::copy(src.begin(), src.end(), v.begin());
  return v;
}

}  // namespace tensor_pool

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->size(); }
  std::size_t rank() const { return node_->shape.size(); }
  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& mutable_value() { return node_->value; }
  const std::vector<double>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }

  double scalar() const {
    if (size() != 1) throw ValidationError("tensor: scalar() on non-scalar");
    return node_->value[0];
  }
  double at(std::size_t i) const { return node_->value[i]; }
  double at(std::size_t i, std::size_t j) const {
    return node_->value[i * node_->shape[1] + j];
  }

  TensorNode* raw() const { return node_.get(); }
  const std::shared_ptr<TensorNode>& ptr() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Leaf tensors -----------------------------------------------------------

// Nodes return their buffers to the thread-local pool when they die.
inline std::shared_ptr<TensorNode> alloc_node() {
  return std::shared_ptr<TensorNode>(new TensorNode, [](TensorNode* n) {
    tensor_pool::pool().put(std::move(n->value));
    tensor_pool::pool().put(std::move(n->grad));
    delete n;
  });
}

inline Tensor make_constant(std::vector<std::size_t> shape, std::vector<double> values) {
  if (numel(shape) != values.size()) throw ValidationError("tensor: shape/data length mismatch");
  auto n = alloc_node();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(std::move(n));
}

inline Tensor make_scalar(double x) { return make_constant({1}, {x}); }

// Trainable leaf; grad buffer persists and accumulates across backward calls.
inline Tensor make_param(std::vector<std::size_t> shape, std::vector<double> values,
                         std::string name = {}) {
  if (numel(shape) != values.size()) throw ValidationError("tensor: shape/data length mismatch");
  auto n = alloc_node();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->grad.assign(n->value.size(), 0.0);
  n->requires_grad = true;
  n->name = std::move(name);
  return Tensor(std::move(n));
}

inline void zero_grad(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) std::fill(p.raw()->grad.begin(), p.raw()->grad.end(), 0.0);
}

// Tape ---------------------------------------------------------------------
//
// Records operations in creation order (a topological order by construction);
// backward replays the list once, in reverse. With grad disabled the same ops
// compute plain values and record nothing.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t recorded_ops() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void backward(const Tensor& loss) {
    if (!grad_enabled_) throw ValidationError("tape: backward on a no-grad tape");
    if (loss.size() != 1) throw ValidationError("tape: backward requires a scalar loss");
    if (!loss.requires_grad())
      throw ValidationError("tape: loss does not depend on any parameter");
    loss.raw()->grad[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if ((*it)->backward_fn) (*it)->backward_fn();
  }

  // ---- ops ----

  Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank(a, 2, "matmul lhs");
    check_rank(b, 2, "matmul rhs");
    const std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) throw ValidationError("matmul: inner dimensions differ");
    std::vector<double> out = tensor_pool::get(m * n);
    {
      const double* __restrict av = a.value().data();
      const double* __restrict bv = b.value().data();
      double* __restrict ov = out.data();
      if (n <= 32) {
        // narrow outputs accumulate in registers
        double acc[32];
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) acc[j] = 0.0;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = bv + kk * n;
            for (std::size_t j = 0; j < n; ++j) acc[j] += aik * brow[j];
          }
          for (std::size_t j = 0; j < n; ++j) ov[i * n + j] = acc[j];
        }
      } else {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aik * bv[kk * n + j];
          }
      }
    }
    return emit({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode* self, TensorNode* pa,
                                                          TensorNode* pb) {
      const auto& g = self->grad;
      if (!pa->grad.empty())
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb->value[kk * n + j];
            pa->grad[i * k + kk] += acc;
          }
      if (!pb->grad.empty())
        for (std::size_t kk = 0; kk < k; ++kk)
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += pa->value[i * k + kk] * g[i * n + j];
            pb->grad[kk * n + j] += acc;
          }
    });
  }

  // add: same shape, or b a row vector matching a's last dim, or b scalar.
  Tensor add(const Tensor& a, const Tensor& b) {
    const std::size_t an = a.size(), bn = b.size();
    std::vector<double> out = tensor_pool::get_copy(a.value());
    if (bn == an && a.shape() == b.shape()) {
      for (std::size_t i = 0; i < an; ++i) out[i] += b.value()[i];
      return emit(a.shape(), std::move(out), {a, b}, [an](TensorNode* self, TensorNode* pa,
                                                          TensorNode* pb) {
        for (std::size_t i = 0; i < an; ++i) {
          if (!pa->grad.empty()) pa->grad[i] += self->grad[i];
          if (!pb->grad.empty()) pb->grad[i] += self->grad[i];
        }
      });
    }
    if (bn == 1) {
      const double bv = b.value()[0];
      for (auto& x : out) x += bv;
      return emit(a.shape(), std::move(out), {a, b}, [an](TensorNode* self, TensorNode* pa,
                                                          TensorNode* pb) {
        for (std::size_t i = 0; i < an; ++i) {
          if (!pa->grad.empty()) pa->grad[i] += self->grad[i];
          if (!pb->grad.empty()) pb->grad[0] += self->grad[i];
        }
      });
    }
    if (b.rank() == 1 && !a.shape().empty() && a.shape().back() == bn) {
      const std::size_t cols = bn, rows = an / cols;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += b.value()[c];
      return emit(a.shape(), std::move(out), {a, b},
                  [rows, cols](TensorNode* self, TensorNode* pa, TensorNode* pb) {
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < cols; ++c) {
                        if (!pa->grad.empty()) pa->grad[r * cols + c] += self->grad[r * cols + c];
                        if (!pb->grad.empty()) pb->grad[c] += self->grad[r * cols + c];
                      }
                  });
    }
    throw ValidationError("add: incompatible shapes");
  }

  // mul: elementwise same shape, or b scalar.
  Tensor mul(const Tensor& a, const Tensor& b) {
    const std::size_t an = a.size(), bn = b.size();
    std::vector<double> out = tensor_pool::get_copy(a.value());
    if (bn == an && a.shape() == b.shape()) {
      for (std::size_t i = 0; i < an; ++i) out[i] *= b.value()[i];
      return emit(a.shape(), std::move(out), {a, b}, [an](TensorNode* self, TensorNode* pa,
                                                          TensorNode* pb) {
        for (std::size_t i = 0; i < an; ++i) {
          if (!pa->grad.empty()) pa->grad[i] += self->grad[i] * pb->value[i];
          if (!pb->grad.empty()) pb->grad[i] += self->grad[i] * pa->value[i];
        }
      });
    }
    if (bn == 1) {
      const double bv = b.value()[0];
      for (auto& x : out) x *= bv;
      return emit(a.shape(), std::move(out), {a, b}, [an](TensorNode* self, TensorNode* pa,
                                                          TensorNode* pb) {
        for (std::size_t i = 0; i < an; ++i) {
          if (!pa->grad.empty()) pa->grad[i] += self->grad[i] * pb->value[0];
          if (!pb->grad.empty()) pb->grad[0] += self->grad[i] * pa->value[i];
        }
      });
    }
    if (a.rank() == 2 && b.rank() == 2 && b.shape()[1] == 1 && b.shape()[0] == a.shape()[0]) {
      // row-wise scaling: [R,C] * [R,1]
      const std::size_t rows = a.shape()[0], cols = a.shape()[1];
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] *= b.value()[r];
      return emit(a.shape(), std::move(out), {a, b},
                  [rows, cols](TensorNode* self, TensorNode* pa, TensorNode* pb) {
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < cols; ++c) {
                        const double g = self->grad[r * cols + c];
                        if (!pa->grad.empty()) pa->grad[r * cols + c] += g * pb->value[r];
                        if (!pb->grad.empty()) pb->grad[r] += g * pa->value[r * cols + c];
                      }
                  });
    }
    throw ValidationError("mul: incompatible shapes");
  }

  Tensor scale(const Tensor& a, double c) {
    std::vector<double> out = tensor_pool::get_copy(a.value());
    for (auto& x : out) x *= c;
    return emit(a.shape(), std::move(out), {a}, [c](TensorNode* self, TensorNode* pa) {
      if (!pa->grad.empty())
        for (std::size_t i = 0; i < self->grad.size(); ++i) pa->grad[i] += c * self->grad[i];
    });
  }

  // out = leaky_relu(alpha * a + beta * b), alpha/beta scalar tensors; the
  // single fused pass matters on the training fast path.
  Tensor axpby_leaky(const Tensor& a, const Tensor& b, const Tensor& alpha, const Tensor& beta,
                     double slope) {
    if (a.shape() != b.shape() || alpha.size() != 1 || beta.size() != 1)
      throw ValidationError("axpby_leaky: shape mismatch");
    const std::size_t n = a.size();
    std::vector<double> out = tensor_pool::get(n);
    {
      const double al = alpha.value()[0], be = beta.value()[0];
      const double* __restrict ap = a.value().data();
      const double* __restrict bp = b.value().data();
      double* __restrict op = out.data();
      for (std::size_t i = 0; i < n; ++i) {
        const double z = al * ap[i] + be * bp[i];
        op[i] = z > 0.0 ? z : slope * z;
      }
    }
    auto node = fresh_node(a.shape(), std::move(out));
    if (grad_enabled_ && (a.requires_grad() || b.requires_grad() || alpha.requires_grad() ||
                          beta.requires_grad())) {
      TensorNode* self = node.get();
      TensorNode* pa = a.raw();
      TensorNode* pb = b.raw();
      TensorNode* pal = alpha.raw();
      TensorNode* pbe = beta.raw();
      record(node, {a, b, alpha, beta}, [self, pa, pb, pal, pbe, slope, n] {
        const double al = pal->value[0], be = pbe->value[0];
        double dal = 0.0, dbe = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double z = al * pa->value[i] + be * pb->value[i];
          const double g = self->grad[i] * (z > 0.0 ? 1.0 : slope);
          if (!pa->grad.empty()) pa->grad[i] += g * al;
          if (!pb->grad.empty()) pb->grad[i] += g * be;
          dal += g * pa->value[i];
          dbe += g * pb->value[i];
        }
        if (!pal->grad.empty()) pal->grad[0] += dal;
        if (!pbe->grad.empty()) pbe->grad[0] += dbe;
      });
    }
    return Tensor(std::move(node));
  }

  // out = sigmoid(alpha * a + beta * b) for scalar alpha/beta.
  Tensor axpby_sigmoid(const Tensor& a, const Tensor& b, const Tensor& alpha,
                       const Tensor& beta) {
    if (a.shape() != b.shape() || alpha.size() != 1 || beta.size() != 1)
      throw ValidationError("axpby_sigmoid: shape mismatch");
    const std::size_t n = a.size();
    std::vector<double> out = tensor_pool::get(n);
    {
      const double al = alpha.value()[0], be = beta.value()[0];
      const double* __restrict ap = a.value().data();
      const double* __restrict bp = b.value().data();
      double* __restrict op = out.data();
      for (std::size_t i = 0; i < n; ++i)
        op[i] = 1.0 / (1.0 + std::exp(-(al * ap[i] + be * bp[i])));
    }
    auto node = fresh_node(a.shape(), std::move(out));
    if (grad_enabled_ && (a.requires_grad() || b.requires_grad() || alpha.requires_grad() ||
                          beta.requires_grad())) {
      TensorNode* self = node.get();
      TensorNode* pa = a.raw();
      TensorNode* pb = b.raw();
      TensorNode* pal = alpha.raw();
      TensorNode* pbe = beta.raw();
      record(node, {a, b, alpha, beta}, [self, pa, pb, pal, pbe, n] {
        const double al = pal->value[0], be = pbe->value[0];
        double dal = 0.0, dbe = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double y = self->value[i];
          const double g = self->grad[i] * y * (1.0 - y);
          if (!pa->grad.empty()) pa->grad[i] += g * al;
          if (!pb->grad.empty()) pb->grad[i] += g * be;
          dal += g * pa->value[i];
          dbe += g * pb->value[i];
        }
        if (!pal->grad.empty()) pal->grad[0] += dal;
        if (!pbe->grad.empty()) pbe->grad[0] += dbe;
      });
    }
    return Tensor(std::move(node));
  }

  // InfluGate over an edge list in one pass:
  // out[e] = dot(wr[src[e]], beta[0:h]) + dot(wr[dst[e]], beta[h:2h]).
  Tensor edge_gate(const Tensor& wr, const Tensor& beta, const std::vector<std::size_t>& srcs,
                   const std::vector<std::size_t>& dsts) {
    check_rank(wr, 2, "edge_gate wr");
    const std::size_t n_edges = srcs.size(), h = wr.shape()[1];
    if (dsts.size() != n_edges || beta.size() != 2 * h)
      throw ValidationError("edge_gate: shape mismatch");
    std::vector<double> out = tensor_pool::get(n_edges);
    {
      const double* __restrict rp = wr.value().data();
      const double* __restrict bu = beta.value().data();
      const double* __restrict bv = bu + h;
      double* __restrict op = out.data();
      for (std::size_t e = 0; e < n_edges; ++e) {
        const double* su = rp + srcs[e] * h;
        const double* sv = rp + dsts[e] * h;
        double acc = 0.0;
        for (std::size_t j = 0; j < h; ++j) acc += su[j] * bu[j] + sv[j] * bv[j];
        op[e] = acc;
      }
    }
    auto node = fresh_node({n_edges, 1}, std::move(out));
    if (grad_enabled_ && (wr.requires_grad() || beta.requires_grad())) {
      TensorNode* self = node.get();
      TensorNode* pw = wr.raw();
      TensorNode* pb = beta.raw();
      record(node, {wr, beta}, [self, pw, pb, srcs, dsts, h] {
        for (std::size_t e = 0; e < srcs.size(); ++e) {
          const double g = self->grad[e];
          if (g == 0.0) continue;
          const double* su = pw->value.data() + srcs[e] * h;
          const double* sv = pw->value.data() + dsts[e] * h;
          if (!pw->grad.empty()) {
            double* gu = pw->grad.data() + srcs[e] * h;
            double* gv = pw->grad.data() + dsts[e] * h;
            for (std::size_t j = 0; j < h; ++j) {
              gu[j] += g * pb->value[j];
              gv[j] += g * pb->value[h + j];
            }
          }
          if (!pb->grad.empty()) {
            for (std::size_t j = 0; j < h; ++j) {
              pb->grad[j] += g * su[j];
              pb->grad[h + j] += g * sv[j];
            }
          }
        }
      });
    }
    return Tensor(std::move(node));
  }

  // Rows [begin, end) of a 2-D tensor; gradient accumulates into that range.
  Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
    check_rank(a, 2, "slice_rows");
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (begin > end || end > rows) throw ValidationError("slice_rows: range out of bounds");
    std::vector<double> out = tensor_pool::get((end - begin) * cols);
    std::copy(a.value().begin() + static_cast<std::ptrdiff_t>(begin * cols),
              a.value().begin() + static_cast<std::ptrdiff_t>(end * cols), out.begin());
    return emit({end - begin, cols}, std::move(out), {a},
                [begin, cols](TensorNode* self, TensorNode* pa) {
                  if (pa->grad.empty()) return;
                  for (std::size_t i = 0; i < self->grad.size(); ++i)
                    pa->grad[begin * cols + i] += self->grad[i];
                });
  }

  // y = x W + b with b broadcast across rows.
  Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_rank(x, 2, "affine input");
    check_rank(w, 2, "affine weight");
    const std::size_t m = x.shape()[0], k = x.shape()[1], n = w.shape()[1];
    if (w.shape()[0] != k || b.size() != n) throw ValidationError("affine: shape mismatch");
    std::vector<double> out = tensor_pool::get(m * n);
    {
      const double* __restrict xp = x.value().data();
      const double* __restrict wp = w.value().data();
      const double* __restrict bp = b.value().data();
      double* __restrict op = out.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) op[i * n + j] = bp[j];
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double xik = xp[i * k + kk];
          if (xik == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) op[i * n + j] += xik * wp[kk * n + j];
        }
      }
    }
    auto node = fresh_node({m, n}, std::move(out));
    if (grad_enabled_ && (x.requires_grad() || w.requires_grad() || b.requires_grad())) {
      TensorNode* self = node.get();
      TensorNode* px = x.raw();
      TensorNode* pw = w.raw();
      TensorNode* pb = b.raw();
      record(node, {x, w, b}, [self, px, pw, pb, m, k, n] {
        const auto& g = self->grad;
        if (!px->grad.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pw->value[kk * n + j];
              px->grad[i * k + kk] += acc;
            }
        if (!pw->grad.empty())
          for (std::size_t kk = 0; kk < k; ++kk)
            for (std::size_t j = 0; j < n; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < m; ++i) acc += px->value[i * k + kk] * g[i * n + j];
              pw->grad[kk * n + j] += acc;
            }
        if (!pb->grad.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) pb->grad[j] += g[i * n + j];
      });
    }
    return Tensor(std::move(node));
  }

  Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check_rank(a, 2, "concat lhs");
    check_rank(b, 2, "concat rhs");
    if (a.shape()[0] != b.shape()[0]) throw ValidationError("concat: row counts differ");
    const std::size_t r = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
    std::vector<double> out = tensor_pool::get(r * (ca + cb));
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = a.value()[i * ca + j];
      for (std::size_t j = 0; j < cb; ++j) out[i * (ca + cb) + ca + j] = b.value()[i * cb + j];
    }
    return emit({r, ca + cb}, std::move(out), {a, b},
                [r, ca, cb](TensorNode* self, TensorNode* pa, TensorNode* pb) {
                  for (std::size_t i = 0; i < r; ++i) {
                    if (!pa->grad.empty())
                      for (std::size_t j = 0; j < ca; ++j)
                        pa->grad[i * ca + j] += self->grad[i * (ca + cb) + j];
                    if (!pb->grad.empty())
                      for (std::size_t j = 0; j < cb; ++j)
                        pb->grad[i * cb + j] += self->grad[i * (ca + cb) + ca + j];
                  }
                });
  }

  Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.value()) s += x;
    return emit({1}, {s}, {a}, [](TensorNode* self, TensorNode* pa) {
      if (!pa->grad.empty())
        for (auto& g : pa->grad) g += self->grad[0];
    });
  }

  Tensor sigmoid(const Tensor& a) {
    std::vector<double> out = tensor_pool::get(a.size());
    const double* __restrict ap = a.value().data();
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-ap[i]));
    return emit(a.shape(), std::move(out), {a}, [](TensorNode* self, TensorNode* pa) {
      if (!pa->grad.empty())
        for (std::size_t i = 0; i < self->grad.size(); ++i)
          pa->grad[i] += self->grad[i] * self->value[i] * (1.0 - self->value[i]);
    });
  }

  Tensor leaky_relu(const Tensor& a, double slope = 0.01) {
    std::vector<double> out = tensor_pool::get(a.size());
    const double* __restrict ap = a.value().data();
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = ap[i] > 0.0 ? ap[i] : slope * ap[i];
    // left derivative at the kink: slope
    return emit(a.shape(), std::move(out), {a}, [slope](TensorNode* self, TensorNode* pa) {
      if (!pa->grad.empty())
        for (std::size_t i = 0; i < self->grad.size(); ++i)
          pa->grad[i] += self->grad[i] * (pa->value[i] > 0.0 ? 1.0 : slope);
    });
  }

  // relu1(x) = min(max(x, 0), 1); left derivatives at both kinks.
  Tensor relu1(const Tensor& a) {
    std::vector<double> out = tensor_pool::get(a.size());
    const double* __restrict ap = a.value().data();
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::min(std::max(ap[i], 0.0), 1.0);
    return emit(a.shape(), std::move(out), {a}, [](TensorNode* self, TensorNode* pa) {
      if (!pa->grad.empty())
        for (std::size_t i = 0; i < self->grad.size(); ++i) {
          const double x = pa->value[i];
          pa->grad[i] += self->grad[i] * ((x > 0.0 && x <= 1.0) ? 1.0 : 0.0);
        }
    });
  }

  // Softmax over the last dimension with an additive {0, -inf} mask. The mask
  // repeats over leading dimensions; fully masked rows yield all-zero output.
  // Masked entries never enter the max/sum, so unmasked results are bit-exact
  // functions of unmasked inputs only.
  Tensor softmax_masked(const Tensor& a, const Tensor& mask) {
    if (a.shape().empty()) throw ValidationError("softmax: needs rank >= 1");
    const std::size_t cols = a.shape().back();
    if (mask.size() == 0 || mask.size() % cols != 0 || a.size() % mask.size() != 0)
      throw ValidationError("softmax: mask shape incompatible");
    const std::size_t rows = a.size() / cols;
    const auto& mv = mask.value();
    std::vector<double> out = tensor_pool::get_zero(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t mbase = (r * cols) % mv.size();
      double mx = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t c = 0; c < cols; ++c) {
        if (std::isinf(mv[mbase + c]) && mv[mbase + c] < 0) continue;
        any = true;
        mx = std::max(mx, a.value()[r * cols + c]);
      }
      if (!any) continue;
      double z = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        if (std::isinf(mv[mbase + c]) && mv[mbase + c] < 0) continue;
        const double e = std::exp(a.value()[r * cols + c] - mx);
        out[r * cols + c] = e;
        z += e;
      }
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= z;
    }
    Tensor mask_keep = mask;  // keep mask alive through backward
    return emit(a.shape(), std::move(out), {a, mask_keep},
                [rows, cols](TensorNode* self, TensorNode* pa, TensorNode* pm) {
                  if (pa->grad.empty()) return;
                  const auto& mv = pm->value;
                  for (std::size_t r = 0; r < rows; ++r) {
                    const std::size_t mbase = (r * cols) % mv.size();
                    double dot = 0.0;
                    for (std::size_t c = 0; c < cols; ++c)
                      dot += self->grad[r * cols + c] * self->value[r * cols + c];
                    for (std::size_t c = 0; c < cols; ++c) {
                      if (std::isinf(mv[mbase + c]) && mv[mbase + c] < 0) continue;
                      const double y = self->value[r * cols + c];
                      pa->grad[r * cols + c] += y * (self->grad[r * cols + c] - dot);
                    }
                  }
                });
  }

  // Mean absolute error; subgradient 0 at exact ties.
  Tensor mae(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ValidationError("mae: shape mismatch");
    const std::size_t n = a.size();
    if (n == 0) throw ValidationError("mae: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(a.value()[i] - b.value()[i]);
    return emit({1}, {s / static_cast<double>(n)}, {a, b},
                [n](TensorNode* self, TensorNode* pa, TensorNode* pb) {
                  const double g = self->grad[0] / static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double d = pa->value[i] - pb->value[i];
                    const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                    if (!pa->grad.empty()) pa->grad[i] += g * sgn;
                    if (!pb->grad.empty()) pb->grad[i] -= g * sgn;
                  }
                });
  }

  static std::size_t row_width(const Tensor& a) {
    std::size_t w = 1;
    for (std::size_t d = 1; d < a.rank(); ++d) w *= a.shape()[d];
    return w;
  }

  Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx) {
    if (a.rank() < 1) throw ValidationError("gather_rows: needs rank >= 1");
    const std::size_t n_rows = a.shape()[0];
    const std::size_t row = row_width(a);
    for (std::size_t i : idx)
      if (i >= n_rows) throw ValidationError("gather_rows: index out of range");
    std::vector<std::size_t> shape = a.shape();
    shape[0] = idx.size();
    std::vector<double> out = tensor_pool::get(idx.size() * row);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < row; ++c) out[k * row + c] = a.value()[idx[k] * row + c];
    return emit(std::move(shape), std::move(out), {a},
                [idx, row](TensorNode* self, TensorNode* pa) {
                  if (pa->grad.empty()) return;
                  for (std::size_t k = 0; k < idx.size(); ++k)
                    for (std::size_t c = 0; c < row; ++c)
                      pa->grad[idx[k] * row + c] += self->grad[k * row + c];
                });
  }

  Tensor scatter_sum_rows(const Tensor& a, const std::vector<std::size_t>& idx,
                          std::size_t n_rows) {
    if (a.rank() < 1 || a.shape()[0] != idx.size())
      throw ValidationError("scatter_sum_rows: row count must match index count");
    const std::size_t row = row_width(a);
    for (std::size_t i : idx)
      if (i >= n_rows) throw ValidationError("scatter_sum_rows: index out of range");
    std::vector<std::size_t> shape = a.shape();
    shape[0] = n_rows;
    std::vector<double> out = tensor_pool::get_zero(n_rows * row);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < row; ++c) out[idx[k] * row + c] += a.value()[k * row + c];
    return emit(std::move(shape), std::move(out), {a},
                [idx, row](TensorNode* self, TensorNode* pa) {
                  if (pa->grad.empty()) return;
                  for (std::size_t k = 0; k < idx.size(); ++k)
                    for (std::size_t c = 0; c < row; ++c)
                      pa->grad[k * row + c] += self->grad[idx[k] * row + c];
                });
  }

  // Weighted message passing in one pass: out[dst[e]] += coeff[e] * x[src[e]]
  // for every edge e, without materializing [E, cols] intermediates.
  Tensor scatter_weighted_rows(const Tensor& x, const Tensor& coeff,
                               const std::vector<std::size_t>& srcs,
                               const std::vector<std::size_t>& dsts, std::size_t n_rows) {
    const std::size_t n_edges = srcs.size();
    if (dsts.size() != n_edges || coeff.size() != n_edges)
      throw ValidationError("scatter_weighted_rows: edge count mismatch");
    const std::size_t cols = row_width(x);
    const std::size_t x_rows = x.rank() >= 1 ? x.shape()[0] : 0;
    for (std::size_t e = 0; e < n_edges; ++e)
      if (srcs[e] >= x_rows || dsts[e] >= n_rows)
        throw ValidationError("scatter_weighted_rows: index out of range");
    std::vector<std::size_t> shape = x.shape();
    shape[0] = n_rows;
    std::vector<double> out = tensor_pool::get_zero(n_rows * cols);
    {
      const double* __restrict xp = x.value().data();
      const double* __restrict cp = coeff.value().data();
      double* __restrict op = out.data();
      for (std::size_t e = 0; e < n_edges; ++e) {
        const double c = cp[e];
        if (c == 0.0) continue;
        const double* src_row = xp + srcs[e] * cols;
        double* dst_row = op + dsts[e] * cols;
        for (std::size_t j = 0; j < cols; ++j) dst_row[j] += c * src_row[j];
      }
    }
    return emit(std::move(shape), std::move(out), {x, coeff},
                [srcs, dsts, cols](TensorNode* self, TensorNode* px, TensorNode* pc) {
                  for (std::size_t e = 0; e < srcs.size(); ++e) {
                    const double* g = self->grad.data() + dsts[e] * cols;
                    const double* xr = px->value.data() + srcs[e] * cols;
                    if (!px->grad.empty()) {
                      double* xg = px->grad.data() + srcs[e] * cols;
                      const double c = pc->value[e];
                      for (std::size_t j = 0; j < cols; ++j) xg[j] += c * g[j];
                    }
                    if (!pc->grad.empty()) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < cols; ++j) dot += g[j] * xr[j];
                      pc->grad[e] += dot;
                    }
                  }
                });
  }

  // out[n,i,j] = a[n,i] * b[n,j]
  Tensor batch_outer(const Tensor& a, const Tensor& b) {
    check_rank(a, 2, "batch_outer lhs");
    if (a.shape() != b.shape()) throw ValidationError("batch_outer: shape mismatch");
    const std::size_t n = a.shape()[0], t = a.shape()[1];
    std::vector<double> out = tensor_pool::get(n * t * t);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j)
          out[(k * t + i) * t + j] = a.value()[k * t + i] * b.value()[k * t + j];
    return emit({n, t, t}, std::move(out), {a, b},
                [n, t](TensorNode* self, TensorNode* pa, TensorNode* pb) {
                  for (std::size_t k = 0; k < n; ++k)
                    for (std::size_t i = 0; i < t; ++i)
                      for (std::size_t j = 0; j < t; ++j) {
                        const double g = self->grad[(k * t + i) * t + j];
                        if (g == 0.0) continue;
                        if (!pa->grad.empty()) pa->grad[k * t + i] += g * pb->value[k * t + j];
                        if (!pb->grad.empty()) pb->grad[k * t + j] += g * pa->value[k * t + i];
                      }
                });
  }

  // out[n,i] = sum_j m[n,i,j] * v[n,j]
  Tensor batch_matvec(const Tensor& m, const Tensor& v) {
    check_rank(m, 3, "batch_matvec lhs");
    check_rank(v, 2, "batch_matvec rhs");
    const std::size_t n = m.shape()[0], t = m.shape()[1];
    if (m.shape()[2] != t || v.shape()[0] != n || v.shape()[1] != t)
      throw ValidationError("batch_matvec: shape mismatch");
    std::vector<double> out = tensor_pool::get_zero(n * t);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < t; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < t; ++j)
          acc += m.value()[(k * t + i) * t + j] * v.value()[k * t + j];
        out[k * t + i] = acc;
      }
    return emit({n, t}, std::move(out), {m, v},
                [n, t](TensorNode* self, TensorNode* pm, TensorNode* pv) {
                  for (std::size_t k = 0; k < n; ++k)
                    for (std::size_t i = 0; i < t; ++i) {
                      const double g = self->grad[k * t + i];
                      if (g == 0.0) continue;
                      for (std::size_t j = 0; j < t; ++j) {
                        if (!pm->grad.empty())
                          pm->grad[(k * t + i) * t + j] += g * pv->value[k * t + j];
                        if (!pv->grad.empty())
                          pv->grad[k * t + j] += g * pm->value[(k * t + i) * t + j];
                      }
                    }
                });
  }

  // k column tensors [N,1] -> [N,k]
  Tensor stack_cols(const std::vector<Tensor>& cols) {
    if (cols.empty()) throw ValidationError("stack_cols: no inputs");
    const std::size_t n = cols.front().shape()[0];
    const std::size_t k = cols.size();
    for (const Tensor& c : cols)
      if (c.rank() != 2 || c.shape()[0] != n || c.shape()[1] != 1)
        throw ValidationError("stack_cols: inputs must be [N,1]");
    std::vector<double> out = tensor_pool::get(n * k);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < n; ++i) out[i * k + j] = cols[j].value()[i];
    auto node = std::make_shared<TensorNode>();
    node->shape = {n, k};
    node->value = std::move(out);
    if (grad_enabled_) {
      bool any = false;
      for (const Tensor& c : cols) any = any || c.requires_grad();
      if (any) {
        node->requires_grad = true;
        node->grad.assign(node->value.size(), 0.0);
        for (const Tensor& c : cols) node->parents.push_back(c.ptr());
        TensorNode* self = node.get();
        std::vector<TensorNode*> ps;
        for (const Tensor& c : cols) ps.push_back(c.raw());
        node->backward_fn = [self, ps, n, k] {
          for (std::size_t j = 0; j < k; ++j) {
            if (ps[j]->grad.empty()) continue;
            for (std::size_t i = 0; i < n; ++i) ps[j]->grad[i] += self->grad[i * k + j];
          }
        };
        nodes_.push_back(node);
      }
    }
    return Tensor(std::move(node));
  }

  // [N,T] -> [N,1], column j
  Tensor select_col(const Tensor& a, std::size_t j) {
    check_rank(a, 2, "select_col");
    const std::size_t n = a.shape()[0], t = a.shape()[1];
    if (j >= t) throw ValidationError("select_col: column out of range");
    std::vector<double> out = tensor_pool::get(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a.value()[i * t + j];
    return emit({n, 1}, std::move(out), {a}, [j, n, t](TensorNode* self, TensorNode* pa) {
      if (pa->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) pa->grad[i * t + j] += self->grad[i];
    });
  }

 private:
  static void check_rank(const Tensor& t, std::size_t r, const char* what) {
    if (t.rank() != r)
      throw ValidationError(std::string(what) + ": expected rank " + std::to_string(r));
  }

  std::shared_ptr<TensorNode> fresh_node(std::vector<std::size_t> shape,
                                          std::vector<double> value) {
    auto node = alloc_node();
    node->shape = std::move(shape);
    node->value = std::move(value);
    return node;
  }

  void record(const std::shared_ptr<TensorNode>& node,
              std::initializer_list<Tensor> parents, std::function<void()> fn) {
    node->requires_grad = true;
    node->grad = tensor_pool::get_zero(node->value.size());
    for (const Tensor& p : parents) node->parents.push_back(p.ptr());
    node->backward_fn = std::move(fn);
    nodes_.push_back(node);
  }

  template <class Fn>
  Tensor emit(std::vector<std::size_t> shape, std::vector<double> value,
              std::initializer_list<Tensor> parents, Fn&& fn) {
    auto node = fresh_node(std::move(shape), std::move(value));
    if (grad_enabled_) {
      bool any = false;
      for (const Tensor& p : parents) any = any || p.requires_grad();
      if (any) {
        TensorNode* self = node.get();
        std::vector<TensorNode*> ps;
        for (const Tensor& p : parents) ps.push_back(p.raw());
        if (ps.size() == 1) {
          record(node, parents, [self, p0 = ps[0], f = std::forward<Fn>(fn)] {
            if constexpr (std::is_invocable_v<Fn, TensorNode*, TensorNode*>) f(self, p0);
          });
        } else {
          record(node, parents, [self, p0 = ps[0], p1 = ps[1], f = std::forward<Fn>(fn)] {
            if constexpr (std::is_invocable_v<Fn, TensorNode*, TensorNode*, TensorNode*>)
              f(self, p0, p1);
          });
        }
      }
    }
    return Tensor(std::move(node));
  }

  std::vector<std::shared_ptr<TensorNode>> nodes_;
  bool grad_enabled_;
};

}  // namespace dysuse
