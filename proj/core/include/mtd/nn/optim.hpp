#pragma once

#include <vector>

#include "mtd/nn/layers.hpp"
#include "mtd/tensor.hpp"

namespace mtd::nn {

/// SGD with momentum and decoupled-into-gradient weight decay:
///   v <- momentum*v + g + weight_decay*w;  w <- w - lr*v
class Sgd {
 public:
  Sgd(std::vector<ParamTensor*> params, double lr, double momentum, double weight_decay);

  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  std::vector<ParamTensor*> params_;
  std::vector<Tensor> velocity_;
  double lr_, momentum_, weight_decay_;
};

/// Adam over one flat tensor; used on the masked pixels during trigger
/// reverse engineering.
class Adam {
 public:
  explicit Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(float* value, const float* grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace mtd::nn
