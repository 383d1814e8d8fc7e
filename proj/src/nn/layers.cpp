#include "aef/nn/layers.hpp"

#include "aef/nn/ops.hpp"

#include <cmath>

namespace aef::nn {

Conv2d::Conv2d(std::string name, int in_c_, int out_c_, int k_, int stride_,
               int pad_)
    : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_) {
  w.name = name + ".w";
  b.name = name + ".b";
  w.value = Tensor({out_c, in_c, k, k});
  b.value = Tensor({out_c});
  w.grad = Tensor(w.value.shape);
  b.grad = Tensor(b.value.shape);
}

void Conv2d::init_weights(Rng& rng) {
  const double fan_in = static_cast<double>(in_c) * k * k;
  const double bound = std::sqrt(6.0 / fan_in);
  for (auto& v : w.value.data)
    v = static_cast<float>(rng.uniform(-bound, bound));
  for (auto& v : b.value.data) v = 0.0f;
}

Tensor Conv2d::forward(const Tensor& x) {
  cached_x_ = x;
  return conv2d_forward(x, w.value, b.value, stride, pad);
}

Tensor Conv2d::backward(const Tensor& dy) {
  auto g = conv2d_backward(cached_x_, w.value, dy, stride, pad);
  for (size_t i = 0; i < w.grad.data.size(); ++i) w.grad.data[i] += g.dw.data[i];
  for (size_t i = 0; i < b.grad.data.size(); ++i) b.grad.data[i] += g.db.data[i];
  return std::move(g.dx);
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

Tensor LeakyReLU::forward(const Tensor& x) {
  cached_x_ = x;
  return leaky_relu_forward(x, slope_);
}

Tensor LeakyReLU::backward(const Tensor& dy) {
  return leaky_relu_backward(cached_x_, dy, slope_);
}

Tensor Upsample2x::forward(const Tensor& x) { return upsample2x_forward(x); }
Tensor Upsample2x::backward(const Tensor& dy) { return upsample2x_backward(dy); }

Tensor MaxPool3x3s2::forward(const Tensor& x) {
  in_shape_ = x.shape;
  return maxpool3x3s2_forward(x, argmax_);
}

Tensor MaxPool3x3s2::backward(const Tensor& dy) {
  return maxpool3x3s2_backward(dy, argmax_, in_shape_);
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
  in_shape_ = x.shape;
  return global_avg_pool_forward(x);
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  return global_avg_pool_backward(dy, in_shape_);
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur);
  return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor cur = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect_params(std::vector<Param*>& out) {
  for (auto& l : layers_) l->collect_params(out);
}

void Sequential::init_weights(Rng& rng) {
  for (auto& l : layers_) l->init_weights(rng);
}

Residual::Residual(std::unique_ptr<Sequential> main, std::unique_ptr<Conv2d> proj)
    : main_(std::move(main)), proj_(std::move(proj)) {}

Tensor Residual::forward(const Tensor& x) {
  Tensor y = main_->forward(x);
  if (proj_) {
    Tensor s = proj_->forward(x);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += s.data[i];
  } else {
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
  }
  cached_sum_ = y;
  return leaky_relu_forward(y, 0.0f);
}

Tensor Residual::backward(const Tensor& dy) {
  Tensor dsum = leaky_relu_backward(cached_sum_, dy, 0.0f);
  Tensor dx = main_->backward(dsum);
  if (proj_) {
    Tensor ds = proj_->backward(dsum);
    for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += ds.data[i];
  } else {
    for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dsum.data[i];
  }
  return dx;
}

void Residual::collect_params(std::vector<Param*>& out) {
  main_->collect_params(out);
  if (proj_) proj_->collect_params(out);
}

void Residual::init_weights(Rng& rng) {
  main_->init_weights(rng);
  if (proj_) proj_->init_weights(rng);
}

size_t parameter_count(Layer& l) {
  std::vector<Param*> ps;
  l.collect_params(ps);
  size_t n = 0;
  for (auto* p : ps) n += p->value.numel();
  return n;
}

}  // namespace aef::nn
