#pragma once

#include "aef/nn/tensor.hpp"
#include "aef/rng.hpp"

#include <memory>
#include <string>
#include <vector>

namespace aef::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Single-use autograd chain: forward caches what backward needs. One logical
// training thread drives a layer at a time; data parallelism lives inside
// the ops.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  // Deterministic re-init; containers recurse in declaration order.
  virtual void init_weights(Rng& rng) {}
  virtual std::string kind() const = 0;
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_c, int out_c, int k, int stride, int pad);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init_weights(Rng& rng) override;  // Kaiming-uniform weights, zero bias
  std::string kind() const override { return "conv2d"; }

  Param w, b;
  int in_c, out_c, k, stride, pad;

 private:
  Tensor cached_x_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(float slope = 0.0f) : slope_(slope) {}
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::string kind() const override { return slope_ > 0 ? "leaky_relu" : "relu"; }

 private:
  float slope_;
  Tensor cached_x_;
};

class Upsample2x : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::string kind() const override { return "upsample2x"; }
};

class MaxPool3x3s2 : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::string kind() const override { return "maxpool3x3s2"; }

 private:
  std::vector<int> argmax_;
  std::vector<int> in_shape_;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::string kind() const override { return "global_avg_pool"; }

 private:
  std::vector<int> in_shape_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init_weights(Rng& rng) override;
  std::string kind() const override { return "sequential"; }
  size_t size() const { return layers_.size(); }
  Layer& at(size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// y = relu(main(x) + proj(x)); proj is identity when null.
class Residual : public Layer {
 public:
  Residual(std::unique_ptr<Sequential> main, std::unique_ptr<Conv2d> proj);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init_weights(Rng& rng) override;
  std::string kind() const override { return "residual"; }

 private:
  std::unique_ptr<Sequential> main_;
  std::unique_ptr<Conv2d> proj_;
  Tensor cached_sum_;
};

size_t parameter_count(Layer& l);

}  // namespace aef::nn
