#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace fdl {

enum class Activation { Tanh, SiLU };

/// Fully connected network with a linear output layer and reverse-mode
/// gradients. Samples are columns. Parameters live in one flat vector laid
/// out layer by layer as [W (column-major, out x in), b].
template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// Activations and pre-activations recorded by a forward pass.
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each hidden layer
  };

  Mlp() = default;
  Mlp(std::vector<int> widths, Activation act) : widths_(std::move(widths)), act_(act) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp: need >= 2 widths");
    offsets_.push_back(0);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      offsets_.push_back(offsets_.back() +
                         static_cast<Eigen::Index>(widths_[l + 1]) * (widths_[l] + 1));
    }
  }

  Eigen::Index parameter_count() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return act_; }
  std::size_t layer_count() const { return widths_.size() - 1; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  template <typename Rng>
  Vector initial_parameters(Rng& rng) const {
    Vector params(parameter_count());
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const Scalar bound = Scalar(1) / std::sqrt(Scalar(widths_[l]));
      std::uniform_real_distribution<Scalar> dist(-bound, bound);
      for (Eigen::Index i = offsets_[l]; i < offsets_[l + 1]; ++i) params(i) = dist(rng);
    }
    return params;
  }

  Matrix forward(const Vector& params, const Matrix& x) const {
    Matrix h = x;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      Matrix z = (weight(params, l) * h).colwise() + bias(params, l);
      h = (l + 1 == layer_count()) ? std::move(z) : activate(z);
    }
    return h;
  }

  Matrix forward(const Vector& params, const Matrix& x, Tape& tape) const {
    tape.inputs.clear();
    tape.pre.clear();
    Matrix h = x;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      tape.inputs.push_back(h);
      Matrix z = (weight(params, l) * h).colwise() + bias(params, l);
      if (l + 1 == layer_count()) {
        h = std::move(z);
      } else {
        h = activate(z);
        tape.pre.push_back(std::move(z));
      }
    }
    return h;
  }

  /// Accumulates dL/dparams into `grad` (which must be sized) given
  /// dL/doutput. Optionally returns dL/dinput.
  void backward(const Vector& params, const Tape& tape, const Matrix& d_out,
                Vector& grad, Matrix* d_input = nullptr) const {
    Matrix delta = d_out;
    for (std::size_t l = layer_count(); l-- > 0;) {
      if (l + 1 != layer_count()) {
        delta.array() *= activate_prime(tape.pre[l], tape.inputs[l + 1]).array();
      }
      const Eigen::Index rows = widths_[l + 1];
      const Eigen::Index cols = widths_[l];
      Eigen::Map<Matrix> gw(grad.data() + offsets_[l], rows, cols);
      Eigen::Map<Vector> gb(grad.data() + offsets_[l] + rows * cols, rows);
      gw.noalias() += delta * tape.inputs[l].transpose();
      gb.noalias() += delta.rowwise().sum();
      if (l > 0 || d_input != nullptr) {
        Matrix next = weight(params, l).transpose() * delta;
        delta = std::move(next);
      }
    }
    if (d_input != nullptr) *d_input = std::move(delta);
  }

 private:
  Eigen::Map<const Matrix> weight(const Vector& params, std::size_t l) const {
    return {params.data() + offsets_[l], widths_[l + 1], widths_[l]};
  }
  Eigen::Map<const Vector> bias(const Vector& params, std::size_t l) const {
    return {params.data() + offsets_[l] + static_cast<Eigen::Index>(widths_[l + 1]) * widths_[l],
            widths_[l + 1]};
  }

  // tanh through the vectorised exp; saturates cleanly to +-1.
  Matrix activate(const Matrix& z) const {
    if (act_ == Activation::Tanh) {
      return (Scalar(1) - Scalar(2) / ((Scalar(2) * z.array()).exp() + Scalar(1))).matrix();
    }
    return (z.array() / (Scalar(1) + (-z.array()).exp())).matrix();
  }

  /// Derivative at pre-activation z, given the activation h = activate(z).
  Matrix activate_prime(const Matrix& z, const Matrix& h) const {
    if (act_ == Activation::Tanh) return (Scalar(1) - h.array().square()).matrix();
    const auto s = Scalar(1) / (Scalar(1) + (-z.array()).exp());
    return (s * (Scalar(1) + z.array() * (Scalar(1) - s))).matrix();
  }

  std::vector<int> widths_;
  Activation act_ = Activation::Tanh;
  std::vector<Eigen::Index> offsets_;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

  /// Descends along `grad`; pass the negated gradient to ascend.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

/// FNV-1a over the raw bytes of a parameter vector; used as a checkpoint hash
/// and to assert that frozen models are never mutated.
inline std::uint64_t checksum(const Eigen::VectorXd& params) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(params.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(params.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace fdl
