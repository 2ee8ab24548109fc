#include "mtd/nn/optim.hpp"

#include <cmath>

namespace mtd::nn {

Sgd::Sgd(std::vector<ParamTensor*> params, double lr, double momentum, double weight_decay)
    : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.reserve(params_.size());
  for (ParamTensor* p : params_) velocity_.emplace_back(p->value.shape());
}

void Sgd::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ParamTensor& p = *params_[k];
    Tensor& v = velocity_[k];
    const float mu = static_cast<float>(momentum_);
    const float wd = static_cast<float>(weight_decay_);
    const float lr = static_cast<float>(lr_);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const float g = p.grad[i] + wd * p.value[i];
      v[i] = mu * v[i] + g;
      p.value[i] -= lr * v[i];
    }
  }
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(float* value, const float* grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const double g = grad[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    value[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
  }
}

}  // namespace mtd::nn
