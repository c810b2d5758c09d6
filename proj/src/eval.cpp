#include "fdl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace fdl {

std::vector<int> classify(const Eigen::Matrix2Xd& x, const ConceptSet& concepts) {
  std::vector<int> out(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int c = 0; c < concepts.size(); ++c) {
      const double d = (x.col(j) - concepts[c].mean).squaredNorm() / concepts[c].variance;
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    out[static_cast<std::size_t>(j)] = arg;
  }
  return out;
}

double concept_accuracy(const Eigen::Matrix2Xd& x, int concept_id, const ConceptSet& concepts) {
  if (x.cols() == 0) throw std::invalid_argument("concept_accuracy: no samples");
  const std::vector<int> labels = classify(x, concepts);
  return static_cast<double>(std::count(labels.begin(), labels.end(), concept_id)) /
         static_cast<double>(labels.size());
}

namespace {

std::vector<double> projected_sorted(const Eigen::Matrix2Xd& x, const Eigen::Vector2d& dir) {
  std::vector<double> v(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) v[static_cast<std::size_t>(j)] = dir.dot(x.col(j));
  std::sort(v.begin(), v.end());
  return v;
}

double quantile(const std::vector<double>& sorted, double level) {
  const auto n = static_cast<double>(sorted.size());
  const auto idx = static_cast<std::size_t>(std::min(n - 1.0, std::floor(level * n)));
  return sorted[idx];
}

}  // namespace

double sliced_w2(const Eigen::Matrix2Xd& x, const Eigen::Matrix2Xd& y, int projections,
                 std::uint64_t seed) {
  if (x.cols() == 0 || y.cols() == 0) throw std::invalid_argument("sliced_w2: empty sample set");
  if (projections < 1) throw std::invalid_argument("sliced_w2: projections >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const Eigen::Index m = std::max(x.cols(), y.cols());
  double total = 0.0;
  for (int k = 0; k < projections; ++k) {
    const double a = angle(rng);
    const Eigen::Vector2d dir(std::cos(a), std::sin(a));
    const std::vector<double> px = projected_sorted(x, dir);
    const std::vector<double> py = projected_sorted(y, dir);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double level = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
      const double d = quantile(px, level) - quantile(py, level);
      sum += d * d;
    }
    total += sum / static_cast<double>(m);
  }
  return std::sqrt(total / projections);
}

std::vector<ConceptReport> evaluate(const DenoiserNet& net, const ConceptSet& concepts,
                                    const NoiseSchedule& schedule, int n_per_concept,
                                    std::uint64_t seed) {
  if (n_per_concept < 1) throw std::invalid_argument("evaluate: n_per_concept must be >= 1");
  std::mt19937_64 seeder(seed);
  std::vector<ConceptReport> reports;
  for (int c = 0; c < concepts.size(); ++c) {
    const Eigen::Matrix2Xd x = sample(net, c, schedule, n_per_concept, seeder()).x0;
    const Eigen::Matrix2Xd ref = concepts.draw_component(c, n_per_concept, seeder());
    ConceptReport r;
    r.concept_label = concepts[c].label;
    r.accuracy = concept_accuracy(x, c, concepts);
    r.mean_shift = (x.rowwise().mean() - concepts[c].mean).norm();
    r.w2 = sliced_w2(x, ref);
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<int> untouched_concepts(const ConceptSet& concepts, const UnlearnConfig& config) {
  const int target = concepts.index_of(config.target);
  const int anchor = concepts.index_of(config.anchor);
  std::vector<int> out;
  for (int c = 0; c < concepts.size(); ++c) {
    if (c != target && c != anchor) out.push_back(c);
  }
  return out;
}

SweepRow summarize_run(const UnlearnResult& result, const ConceptSet& concepts,
                       const NoiseSchedule& schedule, const UnlearnConfig& config,
                       int n_per_concept, std::uint64_t eval_seed) {
  SweepRow row;
  row.divergence = config.divergence;
  row.mode = config.mode;
  const std::vector<ConceptReport> reports =
      evaluate(result.net, concepts, schedule, n_per_concept, eval_seed);
  row.ok = true;
  row.target_accuracy = reports[static_cast<std::size_t>(concepts.index_of(config.target))].accuracy;
  const std::vector<int> keep = untouched_concepts(concepts, config);
  row.preserve_accuracy = 0.0;
  row.preserve_w2 = 0.0;
  for (int c : keep) {
    row.preserve_accuracy += reports[static_cast<std::size_t>(c)].accuracy;
    row.preserve_w2 += reports[static_cast<std::size_t>(c)].w2;
  }
  if (!keep.empty()) {
    row.preserve_accuracy /= static_cast<double>(keep.size());
    row.preserve_w2 /= static_cast<double>(keep.size());
  }
  double g = 0.0;
  for (const StepMetrics& m : result.metrics) g += m.grad_norm;
  row.mean_grad_norm = result.metrics.empty() ? 0.0 : g / static_cast<double>(result.metrics.size());
  return row;
}

std::vector<SweepRow> divergence_sweep(const DenoiserNet& base, const ConceptSet& concepts,
                                       const NoiseSchedule& schedule,
                                       const std::vector<SweepEntry>& entries,
                                       const UnlearnConfig& common, int n_per_concept) {
  std::vector<SweepRow> rows;
  for (const SweepEntry& e : entries) {
    UnlearnConfig cfg = common;
    cfg.divergence = e.divergence;
    cfg.mode = e.mode;
    try {
      const UnlearnResult r = unlearn(base, concepts, schedule, cfg);
      rows.push_back(summarize_run(r, concepts, schedule, cfg, n_per_concept, common.seed + 1));
    } catch (const std::exception& ex) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rows.push_back({e.divergence, e.mode, false, nan, nan, nan, nan, ex.what()});
    }
  }
  return rows;
}

MultiEraseResult sequential_multi_erase(const DenoiserNet& base, const ConceptSet& concepts,
                                        const NoiseSchedule& schedule,
                                        const std::vector<std::string>& targets,
                                        const UnlearnConfig& config, int n_per_concept) {
  std::set<std::string> seen;
  for (const std::string& t : targets) {
    if (!seen.insert(t).second) {
      throw std::invalid_argument("sequential_multi_erase: repeated target " + t);
    }
  }
  MultiEraseResult out{base, {}};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    UnlearnConfig cfg = config;
    cfg.target = targets[i];
    UnlearnResult r = unlearn(out.net, concepts, schedule, cfg);
    out.net = std::move(r.net);
    out.stages.push_back({static_cast<int>(i) + 1, targets[i],
                          evaluate(out.net, concepts, schedule, n_per_concept, config.seed + 1)});
  }
  return out;
}

nlohmann::json ExperimentManifest::to_json() const {
  nlohmann::json hashes = nlohmann::json::array();
  for (const auto& [name, hash] : checkpoint_hashes) hashes.push_back({{"name", name}, {"checksum", hash}});
  return {{"run_id", run_id},
          {"config", config},
          {"seeds", seeds},
          {"checkpoint_hashes", hashes},
          {"metric_files", metric_files}};
}

ExperimentManifest ExperimentManifest::from_json(const nlohmann::json& j) {
  ExperimentManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.config = j.at("config");
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& h : j.at("checkpoint_hashes")) {
    m.checkpoint_hashes.emplace_back(h.at("name").get<std::string>(),
                                     h.at("checksum").get<std::uint64_t>());
  }
  m.metric_files = j.at("metric_files").get<std::vector<std::string>>();
  return m;
}

}  // namespace fdl
