#include "dd/layers.hpp"

#include <cmath>

#include "dd/kernels.hpp"

namespace dd {

Dense::Dense(std::size_t in, std::size_t out, const std::string& name)
    : weight(name + ".weight", out, in), bias(name + ".bias", 1, out) {}

void Dense::init(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in() + out()));
  for (auto& w : weight.value.data) w = rng.uniform(-limit, limit);
  bias.value.fill(0.0);
}

Matrix Dense::forward(const Matrix& x) const {
  Matrix y;
  kernels::affine(x, weight.value, bias.value.data, y);
  return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy, bool accumulate) {
  if (accumulate) kernels::accumulate_weight_grad(dy, x, weight.grad, bias.grad.data);
  Matrix dx;
  kernels::backprop_input(dy, weight.value, dx);
  return dx;
}

double softplus(double x) {
  // log(1 + e^x) without overflow for large x.
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix tanh_forward(const Matrix& x) {
  Matrix y = x;
  for (auto& v : y.data) v = std::tanh(v);
  return y;
}

Matrix tanh_backward(const Matrix& y, const Matrix& dy) {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= 1.0 - y.data[i] * y.data[i];
  return dx;
}

Adam::Adam(std::vector<Parameter*> params, Options opts) : params_(std::move(params)), opts_(opts) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.rows, p->value.cols);
    v_.emplace_back(p->value.rows, p->value.cols);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& value = params_[k]->value.data;
    const auto& grad = params_[k]->grad.data;
    auto& m = m_[k].data;
    auto& v = v_[k].data;
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * grad[i];
      v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * grad[i] * grad[i];
      value[i] -= opts_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opts_.eps);
    }
  }
}

}  // namespace dd
