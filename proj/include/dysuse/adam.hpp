#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "dysuse/tensor.hpp"

namespace dysuse {

// Adaptive moment estimation with bias correction; first and second moments
// persist between calls.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Tensor>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const Tensor& p : params) {
      TensorNode* node = p.raw();
      if (node->grad.size() != node->value.size())
        throw ValidationError("adam: parameter has no gradient buffer");
      Moments& mo = moments_[node];
      if (mo.m.size() != node->value.size()) {
        mo.m.assign(node->value.size(), 0.0);
        mo.v.assign(node->value.size(), 0.0);
      }
      for (std::size_t i = 0; i < node->value.size(); ++i) {
        const double g = node->grad[i];
        mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
        mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
        const double mhat = mo.m[i] / bc1;
        const double vhat = mo.v[i] / bc2;
        node->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::unordered_map<TensorNode*, Moments> moments_;
};

}  // namespace dysuse
