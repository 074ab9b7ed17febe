#pragma once

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "dysuse/tensor.hpp"

// Central finite differences against the analytic gradient; the loss is
// rebuilt from scratch for every probe so the oracle stays independent of
// the tape path it checks.
inline void check_gradients(const std::vector<dysuse::Tensor>& params,
                            const std::function<dysuse::Tensor(dysuse::Tape&)>& loss_fn,
                            double tol = 1e-4, double h = 1e-5) {
  using dysuse::Tape;
  using dysuse::Tensor;
  Tape tape;
  const Tensor loss = loss_fn(tape);
  dysuse::zero_grad(params);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const Tensor& p : params) analytic.push_back(p.raw()->grad);

  auto eval = [&] {
    Tape t(false);
    return loss_fn(t).scalar();
  };
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    for (std::size_t i = 0; i < params[pi].size(); ++i) {
      double& x = params[pi].raw()->value[i];
      const double saved = x;
      x = saved + h;
      const double up = eval();
      x = saved - h;
      const double dn = eval();
      x = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double an = analytic[pi][i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1.0});
      INFO("param " << pi << " (" << params[pi].name() << ") component " << i << " analytic "
                    << an << " fd " << fd);
      CHECK(std::abs(an - fd) / denom <= tol);
    }
  }
}
