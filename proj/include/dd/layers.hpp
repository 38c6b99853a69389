#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dd/rng.hpp"
#include "dd/tensor.hpp"

namespace dd {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

// Fully connected layer y = x W^T + b.
class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, const std::string& name);

  std::size_t in() const { return weight.value.cols; }
  std::size_t out() const { return weight.value.rows; }

  // Glorot-uniform weights, zero bias.
  void init(Rng& rng);

  Matrix forward(const Matrix& x) const;
  // Returns dL/dx. Parameter gradients are accumulated only when `accumulate`.
  Matrix backward(const Matrix& x, const Matrix& dy, bool accumulate);

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::vector<const Parameter*> parameters() const { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;
};

double softplus(double x);
double sigmoid(double x);

Matrix tanh_forward(const Matrix& x);
// dy * (1 - y^2) where y = tanh(x).
Matrix tanh_backward(const Matrix& y, const Matrix& dy);

// Adam with bias-corrected moments over a fixed list of parameters.
class Adam {
 public:
  struct Options {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(std::vector<Parameter*> params, Options opts);

  void step();
  std::uint64_t steps() const { return t_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  std::vector<Parameter*> params_;
  Options opts_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t t_ = 0;
};

}  // namespace dd
