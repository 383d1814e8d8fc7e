#include "aef/nn/adam.hpp"

#include <cmath>

namespace aef::nn {

Adam::Adam(std::vector<Param*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape);
    v_.emplace_back(p->value.shape);
  }
}

void Adam::zero_grad() {
  for (auto* p : params_)
    std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0f);
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto& val = params_[pi]->value.data;
    auto& grd = params_[pi]->grad.data;
    auto& m = m_[pi].data;
    auto& v = v_[pi].data;
    for (size_t i = 0; i < val.size(); ++i) {
      const double g = grd[i];
      m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * g);
      v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * g * g);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

}  // namespace aef::nn
