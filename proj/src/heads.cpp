#include "dd/heads.hpp"

#include <algorithm>
#include <cmath>

#include "dd/errors.hpp"

namespace dd {

Discriminator::Discriminator(std::size_t d_z, std::size_t hidden_width, std::size_t classes,
                             const std::string& name, double dropout)
    : hidden(d_z, hidden_width, name + ".hidden"), output(hidden_width, classes, name + ".output"),
      dropout_(dropout) {
  if (classes < 2) throw ConfigError(name + ": a discriminator needs at least two classes");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError(name + ": dropout must lie in [0, 1)");
}

void Discriminator::init(Rng& rng) {
  hidden.init(rng);
  output.init(rng);
}

Discriminator::Forward Discriminator::forward(const Matrix& z, bool training, Rng* rng) const {
  if (!z.all_finite()) throw NumericError("discriminator input contains non-finite values");
  Forward f;
  f.hidden = tanh_forward(hidden.forward(z));
  f.dropped = f.hidden;
  if (training && dropout_ > 0.0) {
    if (!rng) throw StateError("training-mode discriminator needs a random stream");
    f.mask = Matrix(f.hidden.rows, f.hidden.cols);
    const double keep = 1.0 - dropout_;
    for (std::size_t i = 0; i < f.mask.size(); ++i) {
      f.mask.data[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      f.dropped.data[i] *= f.mask.data[i];
    }
  }
  f.probs = softmax_rows(output.forward(f.dropped));
  return f;
}

Matrix Discriminator::backward(const Matrix& z, const Forward& fwd, const Matrix& dlogits, bool accumulate) {
  Matrix d = output.backward(fwd.dropped, dlogits, accumulate);
  if (fwd.mask.size())
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] *= fwd.mask.data[i];
  return hidden.backward(z, tanh_backward(fwd.hidden, d), accumulate);
}

std::vector<double> Discriminator::d_forward(std::span<const double> z, bool training, Rng* rng) const {
  Matrix m(1, z.size());
  std::copy(z.begin(), z.end(), m.data.begin());
  return forward(m, training, rng).probs.data;
}

std::vector<Parameter*> Discriminator::parameters() {
  return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

Matrix ReversalGate::backward(const Matrix& upstream) const {
  Matrix out = upstream;
  for (auto& v : out.data) v *= -lambda;
  return out;
}

std::vector<double> ReversalGate::backward(std::span<const double> upstream) const {
  std::vector<double> out(upstream.begin(), upstream.end());
  for (auto& v : out) v *= -lambda;
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t r = 0; r < p.rows; ++r) {
    auto row = p.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
  return p;
}

double cross_entropy(std::span<const double> probs, std::size_t true_class) {
  if (true_class >= probs.size())
    throw ValidationError("cross_entropy: class " + std::to_string(true_class) + " out of range");
  return -std::log(std::max(probs[true_class], kProbFloor));
}

double cross_entropy_rows(const Matrix& probs, std::span<const std::size_t> labels, double scale,
                          Matrix* dlogits) {
  if (labels.size() != probs.rows) throw ValidationError("cross_entropy_rows: label count mismatch");
  if (dlogits) *dlogits = Matrix(probs.rows, probs.cols);
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows; ++r) {
    auto p = probs.row(r);
    total += cross_entropy(p, labels[r]);
    // The clamp makes the loss flat below the floor.
    if (dlogits && p[labels[r]] >= kProbFloor) {
      auto d = dlogits->row(r);
      for (std::size_t c = 0; c < p.size(); ++c) d[c] = scale * (p[c] - (c == labels[r] ? 1.0 : 0.0));
    }
  }
  return probs.rows ? total / static_cast<double>(probs.rows) : 0.0;
}

}  // namespace dd
