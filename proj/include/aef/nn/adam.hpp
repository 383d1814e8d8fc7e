#pragma once

#include "aef/nn/layers.hpp"

#include <vector>

namespace aef::nn {

// Standard Adam with bias correction. The caller owns the learning-rate
// schedule and passes the current lr each step.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step(double lr);
  int64_t steps() const { return t_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace aef::nn
