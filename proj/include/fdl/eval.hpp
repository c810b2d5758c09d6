#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdl/diffusion.hpp"
#include "fdl/unlearning.hpp"

namespace fdl {

struct ConceptReport {
  std::string concept_label;
  double accuracy = 0.0;
  double mean_shift = 0.0;
  double w2 = 0.0;
};

/// Nearest component mean under |x - mu_c|^2 / var_c, per column.
std::vector<int> classify(const Eigen::Matrix2Xd& x, const ConceptSet& concepts);

/// Fraction of columns classified as `concept_id`.
double concept_accuracy(const Eigen::Matrix2Xd& x, int concept_id, const ConceptSet& concepts);

/// Sliced 2-Wasserstein distance over `projections` random unit directions,
/// comparing empirical quantiles at max(n_x, n_y) midpoints.
double sliced_w2(const Eigen::Matrix2Xd& x, const Eigen::Matrix2Xd& y, int projections = 64,
                 std::uint64_t seed = 0x5eed);

/// One report per concept from n_per_concept generated samples; reference
/// samples for w2 come from the true mixture component. Throws
/// std::invalid_argument when n_per_concept < 1.
std::vector<ConceptReport> evaluate(const DenoiserNet& net, const ConceptSet& concepts,
                                    const NoiseSchedule& schedule, int n_per_concept,
                                    std::uint64_t seed);

struct SweepEntry {
  DivergenceName divergence;
  UnlearnMode mode;
};

/// Fixed schema; failed runs keep NaN metrics and carry the error message.
struct SweepRow {
  DivergenceName divergence = DivergenceName::KL;
  UnlearnMode mode = UnlearnMode::ClosedForm;
  bool ok = false;
  double target_accuracy = 0.0;
  double preserve_accuracy = 0.0;  // mean over untouched concepts
  double preserve_w2 = 0.0;        // mean over untouched concepts
  double mean_grad_norm = 0.0;
  std::string error;
};

/// Concepts other than the target and the anchor.
std::vector<int> untouched_concepts(const ConceptSet& concepts, const UnlearnConfig& config);

/// Erase/preserve summary of one finished run.
SweepRow summarize_run(const UnlearnResult& result, const ConceptSet& concepts,
                       const NoiseSchedule& schedule, const UnlearnConfig& config,
                       int n_per_concept, std::uint64_t eval_seed);

std::vector<SweepRow> divergence_sweep(const DenoiserNet& base, const ConceptSet& concepts,
                                       const NoiseSchedule& schedule,
                                       const std::vector<SweepEntry>& entries,
                                       const UnlearnConfig& common, int n_per_concept = 500);

struct StageReport {
  int stage = 0;
  std::string target;
  std::vector<ConceptReport> reports;
};

struct MultiEraseResult {
  DenoiserNet net;
  std::vector<StageReport> stages;
};

/// Unlearns the targets one after another, each run starting from the
/// previous result; config.target is replaced per stage. Throws
/// std::invalid_argument on repeated targets.
MultiEraseResult sequential_multi_erase(const DenoiserNet& base, const ConceptSet& concepts,
                                        const NoiseSchedule& schedule,
                                        const std::vector<std::string>& targets,
                                        const UnlearnConfig& config, int n_per_concept = 500);

struct ExperimentManifest {
  std::string run_id;
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::uint64_t>> checkpoint_hashes;
  std::vector<std::string> metric_files;

  nlohmann::json to_json() const;
  static ExperimentManifest from_json(const nlohmann::json& j);
};

}  // namespace fdl
