#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nesylab/tensor.hpp"

namespace nesylab::ad {

// Adam with bias correction. Moment buffers are created on the first step
// and must keep their shapes afterwards.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline void adam_step(AdamState& s, const std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(params.size()) +
                                " params vs " + std::to_string(grads.size()) +
                                " grads");
  }
  if (s.m.empty()) {
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor* p : params) {
      s.m.emplace_back(p->shape);
      s.v.emplace_back(p->shape);
    }
  }
  if (s.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter count changed from " +
                                std::to_string(s.m.size()) + " to " +
                                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!same_shape(*params[i], *grads[i]) ||
        !same_shape(*params[i], s.m[i])) {
      throw std::invalid_argument("adam_step: shape mismatch at parameter " +
                                  std::to_string(i));
    }
    for (double g : grads[i]->data) {
      if (!std::isfinite(g)) {
        throw std::invalid_argument("adam_step: non-finite gradient at "
                                    "parameter " + std::to_string(i));
      }
    }
  }

  s.t += 1;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = s.m[i];
    Tensor& v = s.v[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      m.data[j] = s.beta1 * m.data[j] + (1.0 - s.beta1) * g.data[j];
      v.data[j] = s.beta2 * v.data[j] + (1.0 - s.beta2) * g.data[j] * g.data[j];
      const double mhat = m.data[j] / c1;
      const double vhat = v.data[j] / c2;
      p.data[j] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

}  // namespace nesylab::ad
