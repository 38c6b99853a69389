#pragma once

#include <span>
#include <string>
#include <vector>

#include "dd/layers.hpp"
#include "dd/rng.hpp"
#include "dd/tensor.hpp"

namespace dd {

inline constexpr double kProbFloor = 1e-12;
inline constexpr std::size_t kDefaultHeadHidden = 64;
inline constexpr double kDefaultDropout = 0.5;

// z -> tanh hidden -> dropout -> logits -> softmax.
class Discriminator {
 public:
  struct Forward {
    Matrix hidden;   // tanh activations before dropout
    Matrix mask;     // inverted-dropout multipliers, empty in inference mode
    Matrix dropped;  // hidden * mask
    Matrix probs;
  };

  Discriminator() = default;
  Discriminator(std::size_t d_z, std::size_t hidden, std::size_t classes, const std::string& name,
                double dropout = kDefaultDropout);

  void init(Rng& rng);

  // Dropout is active only when `training` is set, drawing from `rng`.
  Forward forward(const Matrix& z, bool training, Rng* rng) const;
  // Backpropagates dL/dlogits, returns dL/dz.
  Matrix backward(const Matrix& z, const Forward& fwd, const Matrix& dlogits, bool accumulate);

  std::vector<double> d_forward(std::span<const double> z, bool training = false, Rng* rng = nullptr) const;

  std::size_t class_count() const { return output.out(); }
  std::size_t input_dim() const { return hidden.in(); }
  double dropout() const { return dropout_; }

  std::vector<Parameter*> parameters();

  Dense hidden;
  Dense output;

 private:
  double dropout_ = kDefaultDropout;
};

// Identity forward; multiplies the gradient by -lambda on the way back.
struct ReversalGate {
  double lambda = 1.0;

  const Matrix& forward(const Matrix& z) const { return z; }
  Matrix backward(const Matrix& upstream) const;
  std::vector<double> backward(std::span<const double> upstream) const;
};

Matrix softmax_rows(const Matrix& logits);

// -log(max(probs[true_class], 1e-12)).
double cross_entropy(std::span<const double> probs, std::size_t true_class);

// Mean cross-entropy over rows. When `dlogits` is non-null it receives
// scale * d(sum of row losses)/d(logits) for softmax outputs.
double cross_entropy_rows(const Matrix& probs, std::span<const std::size_t> labels, double scale,
                          Matrix* dlogits);

}  // namespace dd
