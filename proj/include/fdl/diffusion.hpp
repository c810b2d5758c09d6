#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fdl/mlp.hpp"

namespace fdl {

/// Linear-beta DDPM schedule. Steps are 1-based: t in [1, T].
class NoiseSchedule {
 public:
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_(index(t)); }
  double alpha(int t) const { return 1.0 - betas_(index(t)); }
  double alpha_bar(int t) const { return alpha_bars_(index(t)); }
  /// Standard deviation of the fixed reverse-step variance, the posterior
  /// beta~_t = (1 - abar_{t-1}) / (1 - abar_t) beta_t (zero at t = 1).
  double posterior_std(int t) const;

  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

 private:
  Eigen::Index index(int t) const;

  Eigen::VectorXd betas_;
  Eigen::VectorXd alpha_bars_;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
};

/// T = 50 with beta 1e-4 -> 0.2, so that abar_T < 0.01.
NoiseSchedule default_schedule();

struct Concept {
  std::string label;
  Eigen::Vector2d mean;
  double variance = 0.25;
};

struct LabeledSamples {
  Eigen::Matrix2Xd x;
  std::vector<int> labels;
};

/// Named 2-D isotropic mixture components plus the "empty" (null) concept,
/// whose id is kEmbeddingDim and whose embedding is all zeros.
class ConceptSet {
 public:
  static constexpr int kEmbeddingDim = 8;

  ConceptSet() = default;
  explicit ConceptSet(std::vector<Concept> concepts);

  /// Four concepts A, B, C, D at (4,4), (-4,4), (-4,-4), (4,-4), variance 0.25.
  static ConceptSet standard();

  int size() const { return static_cast<int>(concepts_.size()); }
  static constexpr int empty_id() { return kEmbeddingDim; }
  const Concept& operator[](int id) const { return concepts_.at(static_cast<std::size_t>(id)); }
  const std::vector<Concept>& concepts() const { return concepts_; }

  /// Accepts a concept label or "empty".
  int index_of(const std::string& label) const;
  std::string label_of(int id) const;

  /// One-hot row of the embedding table; zeros for the empty concept.
  Eigen::VectorXd embedding(int id) const;

  LabeledSamples draw(int n_per_concept, std::uint64_t seed) const;
  Eigen::Matrix2Xd draw_component(int id, int n, std::uint64_t seed) const;

 private:
  std::vector<Concept> concepts_;
};

struct DenoiserArch {
  int hidden_width = 128;
  int hidden_layers = 3;
  int time_features = 16;

  int input_dim() const { return 2 + ConceptSet::kEmbeddingDim + time_features; }
};

/// Conditional noise predictor eps_hat = Phi(x_t, c, t) on 2-D data: an MLP over
/// [x_t, one-hot concept embedding, sinusoidal features of t / T].
class DenoiserNet {
 public:
  using Tape = Mlp<double>::Tape;

  DenoiserNet() = default;
  DenoiserNet(DenoiserArch arch, int steps, std::uint64_t seed);

  const DenoiserArch& arch() const { return arch_; }
  int steps() const { return steps_; }
  const Mlp<double>& mlp() const { return mlp_; }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  std::uint64_t checksum() const { return fdl::checksum(params_); }

  Eigen::MatrixXd inputs(const Eigen::Matrix2Xd& xt, std::span<const int> concepts,
                         std::span<const int> steps) const;

  Eigen::Matrix2Xd predict(const Eigen::Matrix2Xd& xt, std::span<const int> concepts,
                           std::span<const int> steps) const;
  Eigen::Matrix2Xd predict(const Eigen::Matrix2Xd& xt, std::span<const int> concepts,
                           std::span<const int> steps, Tape& tape) const;
  /// Adds dL/dphi into grad given dL/d(prediction).
  void backward(const Tape& tape, const Eigen::MatrixXd& d_out, Eigen::VectorXd& grad) const;

 private:
  DenoiserArch arch_;
  int steps_ = 0;
  Mlp<double> mlp_;
  Eigen::VectorXd params_;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, columnwise.
Eigen::Matrix2Xd forward_noise(const Eigen::Matrix2Xd& x0, int t, const Eigen::Matrix2Xd& eps,
                               const NoiseSchedule& schedule);

struct PretrainOptions {
  int epochs = 150;
  int batch_size = 256;
  double learning_rate = 2e-3;
  /// Probability of replacing the concept by the empty concept during training.
  double uncond_prob = 0.1;
  std::uint64_t seed = 0;
  DenoiserArch arch{};
};

/// Standard eps-prediction training. Requires >= 1000 samples per concept.
/// Throws TrainingFailure on a non-finite loss.
DenoiserNet pretrain(const LabeledSamples& data, const ConceptSet& concepts,
                     const NoiseSchedule& schedule, const PretrainOptions& options);

struct SampleResult {
  Eigen::Matrix2Xd x0;
  /// trajectory[t] holds x_t for t = 0..T when recording was requested.
  std::vector<Eigen::Matrix2Xd> trajectory;
};

/// Ancestral sampling with the fixed posterior variance.
SampleResult sample(const DenoiserNet& net, int concept_id, const NoiseSchedule& schedule,
                    int n, std::uint64_t seed, bool record_trajectory = false);

}  // namespace fdl
