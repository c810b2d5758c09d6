#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "fdl/checkpoint.hpp"
#include "fdl/config.hpp"
#include "fdl/csv.hpp"
#include "fdl/divergence.hpp"
#include "fdl/dynamics.hpp"
#include "fdl/eval.hpp"
#include "fdl/gaussian.hpp"
#include "fdl/quadrature.hpp"
#include "fdl/svg.hpp"
#include "fdl/unlearning.hpp"
#include "fdl/variational.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fdl;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<DivergenceName> parse_divergence_list(const std::string& s) {
  std::vector<DivergenceName> out;
  if (s == "all") return {kAllDivergences.begin(), kAllDivergences.end()};
  for (const std::string& tok : split_list(s)) out.push_back(parse_divergence(tok));
  return out;
}

std::string num(double v) { return format_number(v); }

void write_json(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

UnlearnConfig load_unlearn_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = path.empty() ? json::object() : read_json_file(path);
  apply_overrides(j, overrides);
  return unlearn_config_from_json(j);
}

std::string run_id(const json& config, std::uint64_t checksum) {
  std::uint64_t h = 1469598103934665603ULL ^ checksum;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

// divergence

struct DivergenceArgs {
  std::string names = "all";
  double p_mean = 1.0, p_var = 1.0, q_mean = 0.0, q_var = 1.0;
  std::string out;
};

int run_divergence(const DivergenceArgs& a) {
  const Gaussian p = Gaussian::scalar(a.p_mean, a.p_var);
  const Gaussian q = Gaussian::scalar(a.q_mean, a.q_var);
  std::vector<std::vector<std::string>> rows;
  for (DivergenceName name : parse_divergence_list(a.names)) {
    const DivergenceSpec spec = make_spec(name);
    std::string closed = "";
    try {
      switch (name) {
        case DivergenceName::KL: closed = num(kl(p, q)); break;
        case DivergenceName::Jeffreys: closed = num(jeffreys(p, q)); break;
        case DivergenceName::SquaredHellinger: closed = num(hellinger2(p, q)); break;
        case DivergenceName::PearsonChi2: closed = num(chi2(p, q)); break;
        default: break;
      }
    } catch (const DivergenceUndefined&) {
      closed = "undefined";
    }
    std::string oracle;
    try {
      oracle = num(quadrature_divergence(spec, p, q));
    } catch (const std::exception&) {
      oracle = "failed";
    }
    std::string index = "unsupported";
    if (spec.strictly_convex_conjugate()) index = num(convergence_speed_index(spec));
    const auto bound = boundedness(spec);
    double residual = 0.0;
    std::string conj = "n/a";
    if (spec.strictly_convex_conjugate()) {
      for (int i = 0; i < 200; ++i) {
        const double u = std::exp(-3.0 + 6.0 * i / 199.0);
        residual = std::max(residual, check_conjugate_identity(spec, u));
      }
      conj = num(residual);
    }
    rows.push_back({std::string(cli_name(name)), closed, oracle, index,
                    bound ? num(*bound) : "inf", conj});
  }
  const std::vector<std::string> header{"divergence", "closed_form", "quadrature", "speed_index",
                                        "bound", "conjugate_residual"};
  if (!a.out.empty()) {
    CsvWriter w(a.out, header);
    for (const auto& r : rows) w.row(r);
    w.close();
  }
  for (std::size_t i = 0; i < header.size(); ++i) std::cout << (i ? "," : "") << header[i];
  std::cout << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) std::cout << (i ? "," : "") << r[i];
    std::cout << '\n';
  }
  return 0;
}

// estimate

struct EstimateArgs {
  std::string divergence = "kl";
  double p_mean = 1.0, p_sd = 1.0, q_mean = 0.0, q_sd = 1.0;
  int samples = 20000;
  EstimatorOptions options;
  std::string out;
};

int run_estimate(const EstimateArgs& a) {
  const DivergenceSpec spec = make_spec(a.divergence);
  std::mt19937_64 rng(a.options.seed);
  std::normal_distribution<double> normal;
  if (!(a.p_sd > 0.0) || !(a.q_sd > 0.0)) throw std::invalid_argument("sigma must be > 0");
  Eigen::MatrixXd sp(1, a.samples), sq(1, a.samples);
  for (int i = 0; i < a.samples; ++i) sp(0, i) = a.p_mean + a.p_sd * normal(rng);
  for (int i = 0; i < a.samples; ++i) sq(0, i) = a.q_mean + a.q_sd * normal(rng);
  EstimatorOptions opts = a.options;
  opts.seed = rng();
  const VariationalEstimate est = fit_estimate(spec, sp, sq, opts);
  std::cout << "estimate," << num(est.value) << '\n';
  try {
    const double oracle = quadrature_divergence(spec, Gaussian::scalar(a.p_mean, a.p_sd * a.p_sd),
                                                Gaussian::scalar(a.q_mean, a.q_sd * a.q_sd));
    std::cout << "quadrature," << num(oracle) << '\n';
  } catch (const std::exception& e) {
    std::cout << "quadrature,failed\n";
  }
  if (!a.out.empty()) {
    CsvWriter w(a.out, {"step", "objective", "lower_bound"});
    for (std::size_t i = 0; i < est.objective_trace.size(); ++i) {
      w.row({std::to_string(i + 1), num(est.objective_trace[i]), num(est.lower_bound_trace[i])});
    }
    w.close();
  }
  return 0;
}

// train-diffusion

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  int samples_per_concept = 4000;
  std::uint64_t data_seed = 1;
  std::string out = "model.json";
};

int run_train(const TrainArgs& a) {
  json j = a.config.empty() ? json::object() : read_json_file(a.config);
  apply_overrides(j, a.overrides);
  const PretrainOptions opts = pretrain_options_from_json(j);
  const ConceptSet concepts = ConceptSet::standard();
  const NoiseSchedule schedule = default_schedule();
  const LabeledSamples data = concepts.draw(a.samples_per_concept, a.data_seed);
  Checkpoint ckpt{schedule, concepts, pretrain(data, concepts, schedule, opts)};
  save_checkpoint(ckpt, a.out);
  std::cout << "checkpoint," << a.out << "\nchecksum," << ckpt.net.checksum() << '\n';
  return 0;
}

// sample

struct SampleArgs {
  std::string checkpoint;
  std::string concept_label = "A";
  int n = 500;
  std::uint64_t seed = 0;
  std::string out = "samples.csv";
  std::string trajectory;
};

int run_sample(const SampleArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const int id = ckpt.concepts.index_of(a.concept_label);
  const SampleResult r = sample(ckpt.net, id, ckpt.schedule, a.n, a.seed, !a.trajectory.empty());
  CsvWriter w(a.out, {"x", "y", "concept"});
  for (Eigen::Index j = 0; j < r.x0.cols(); ++j) {
    w.row({num(r.x0(0, j)), num(r.x0(1, j)), a.concept_label});
  }
  w.close();
  if (!a.trajectory.empty()) {
    CsvWriter t(a.trajectory, {"t", "sample", "x", "y"});
    for (int s = ckpt.schedule.steps(); s >= 0; --s) {
      const Eigen::Matrix2Xd& x = r.trajectory[static_cast<std::size_t>(s)];
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        t.row({std::to_string(s), std::to_string(j), num(x(0, j)), num(x(1, j))});
      }
    }
    t.close();
  }
  return 0;
}

// unlearn

struct UnlearnArgs {
  std::string checkpoint;
  std::string config;
  std::vector<std::string> overrides;
  std::string out_dir = "unlearn_out";
  int eval_samples = 500;
};

void write_unlearn_outputs(const fs::path& dir, const UnlearnResult& r, const ConceptSet& concepts,
                           std::vector<std::string>& files) {
  {
    CsvWriter w(dir / "metrics.csv",
                {"step", "loss", "mse", "grad_norm", "preservation_loss", "critic_objective"});
    for (const StepMetrics& m : r.metrics) {
      w.row({std::to_string(m.step), num(m.loss), num(m.mse), num(m.grad_norm),
             num(m.preservation_loss), num(m.critic_objective)});
    }
    w.close();
    files.push_back("metrics.csv");
  }
  if (!r.evals.empty()) {
    std::vector<std::string> header{"step"};
    for (const Concept& c : concepts.concepts()) header.push_back("acc_" + c.label);
    CsvWriter w(dir / "evals.csv", header);
    for (const EvalSnapshot& s : r.evals) {
      std::vector<std::string> row{std::to_string(s.step)};
      for (double acc : s.accuracy) row.push_back(num(acc));
      w.row(row);
    }
    w.close();
    files.push_back("evals.csv");
  }
  if (!r.grad_log.empty()) {
    CsvWriter w(dir / "grad_log.csv", {"step", "mse", "grad_norm_kl", "grad_norm_h2",
                                       "grad_norm_chi2", "max_relation_error", "chi2_skipped"});
    for (const GradLogRecord& g : r.grad_log) {
      w.row({std::to_string(g.step), num(g.mse_value), num(g.grad_norm_kl), num(g.grad_norm_h2),
             num(g.grad_norm_chi2), num(g.max_relation_error), std::to_string(g.chi2_skipped)});
    }
    w.close();
    files.push_back("grad_log.csv");
  }
}

void write_reports(const fs::path& path, const std::vector<ConceptReport>& reports) {
  CsvWriter w(path, {"concept", "accuracy", "mean_shift", "w2"});
  for (const ConceptReport& r : reports) {
    w.row({r.concept_label, num(r.accuracy), num(r.mean_shift), num(r.w2)});
  }
  w.close();
}

int run_unlearn(const UnlearnArgs& a) {
  const Checkpoint base = load_checkpoint(a.checkpoint);
  const UnlearnConfig cfg = load_unlearn_config(a.config, a.overrides);
  cfg.validate(base.concepts);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);

  const UnlearnResult r = unlearn(base.net, base.concepts, base.schedule, cfg);
  std::vector<std::string> files;
  write_unlearn_outputs(dir, r, base.concepts, files);
  const std::vector<ConceptReport> reports =
      evaluate(r.net, base.concepts, base.schedule, a.eval_samples, cfg.seed + 1);
  write_reports(dir / "report.csv", reports);
  files.push_back("report.csv");
  const Checkpoint out{base.schedule, base.concepts, r.net};
  save_checkpoint(out, dir / "unlearned.json");

  ExperimentManifest m;
  m.config = to_json(cfg);
  m.run_id = run_id(m.config, base.net.checksum());
  m.seeds = {cfg.seed, cfg.seed + 1};
  m.checkpoint_hashes = {{"base", base.net.checksum()}, {"unlearned", r.net.checksum()}};
  m.metric_files = files;
  write_json(dir / "manifest.json", m.to_json());

  for (const ConceptReport& rep : reports) {
    std::cout << rep.concept_label << ",accuracy," << num(rep.accuracy) << ",w2," << num(rep.w2)
              << '\n';
  }
  return 0;
}

// dynamics

struct DynamicsArgs {
  std::string divergences = "kl,rkl,hellinger2,js,chi2";
  int dim = 1;
  RankingOptions options;
  std::string out_dir = "dynamics_out";
};

json complex_list(const std::vector<std::complex<double>>& v) {
  json out = json::array();
  for (const auto& c : v) out.push_back({c.real(), c.imag()});
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

int run_dynamics(const DynamicsArgs& a) {
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  const std::vector<DivergenceName> names = parse_divergence_list(a.divergences);
  std::vector<Series> decay;
  bool all_pass = true;
  for (DivergenceName name : names) {
    const TractableGame game = a.dim == 1 ? TractableGame::scalar(name, a.options.mu, a.options.sigma)
                                          : TractableGame::planar(name);
    const std::string tag(cli_name(name));
    const JacobianReport rep = jacobian_at_equilibrium(game);
    const bool pass = rep.hurwitz() && rep.bounds.min_slack >= 1e-6 && rep.k_tt_mismatch <= 1e-3 &&
                      rep.top_left_norm <= 1e-4;
    all_pass = all_pass && pass;
    json jr = {{"divergence", tag},
               {"k_tp", matrix_json(rep.k_tp)},
               {"k_tt", matrix_json(rep.k_tt)},
               {"k_tp_fd", matrix_json(rep.k_tp_fd)},
               {"k_tt_fd", matrix_json(rep.k_tt_fd)},
               {"jacobian", matrix_json(rep.jacobian)},
               {"eigenvalues", complex_list(rep.eigenvalues)},
               {"bounds",
                {{"real_bound_im0", rep.bounds.real_bound_im0},
                 {"real_bound_imneq0", rep.bounds.real_bound_imneq0},
                 {"min_slack", rep.bounds.min_slack}}},
               {"top_left_norm", rep.top_left_norm},
               {"k_tt_mismatch", rep.k_tt_mismatch},
               {"k_tp_rank", rep.k_tp_rank},
               {"k_tp_full_row_rank", rep.k_tp_full_row_rank},
               {"pass", pass}};
    write_json(dir / ("jacobian_" + tag + ".json"), jr);

    DynState start{game.equilibrium_phi(), game.equilibrium_omega(), 0.0};
    start.phi(0) += a.options.perturbation;
    const int every = std::max(1, static_cast<int>(std::lround(0.05 / a.options.dt)));
    const auto traj = integrate(game, start, a.options.horizon, a.options.dt, every);
    CsvWriter w(dir / ("trajectory_" + tag + ".csv"), {"t", "phi_dist", "omega_dist"});
    Series s{std::string(display_name(name)), {}, {}};
    for (const DynState& st : traj) {
      const double dp = (st.phi - game.equilibrium_phi()).norm();
      const double dw = (st.omega - game.equilibrium_omega()).norm();
      w.row({num(st.time), num(dp), num(dw)});
      s.x.push_back(st.time);
      s.y.push_back(distance_to_equilibrium(game, st));
    }
    w.close();
    decay.push_back(std::move(s));
    std::cout << tag << ",hurwitz," << rep.hurwitz() << ",min_slack," << num(rep.bounds.min_slack)
              << ",pass," << pass << '\n';
  }
  if (a.dim == 1) {
    std::vector<DivergenceName> rankable;
    for (DivergenceName n : names) {
      if (make_spec(n).strictly_convex_conjugate()) rankable.push_back(n);
    }
    const auto rows = speed_ranking_experiment(rankable, a.options);
    CsvWriter w(dir / "ranking.csv", {"divergence", "decay_rate", "speed_index"});
    for (const RankingRow& r : rows) {
      w.row({std::string(cli_name(r.divergence)), num(r.decay_rate), num(r.speed_index)});
    }
    w.close();
  }
  PlotOptions po{"Distance to equilibrium", "time", "|state - equilibrium|", true};
  write_text_file(dir / "decay.svg", line_plot_svg(decay, po));
  return all_pass ? 0 : 2;
}

// eval

struct EvalArgs {
  std::string checkpoint;
  int n = 500;
  std::uint64_t seed = 0;
  std::string out = "report.csv";
};

int run_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto reports = evaluate(ckpt.net, ckpt.concepts, ckpt.schedule, a.n, a.seed);
  write_reports(a.out, reports);
  for (const ConceptReport& r : reports) {
    std::cout << r.concept_label << ",accuracy," << num(r.accuracy) << ",w2," << num(r.w2) << '\n';
  }
  return 0;
}

// sweep

struct SweepArgs {
  std::string checkpoint;
  std::string config;
  std::vector<std::string> overrides;
  std::string entries = "kl:closed_form,hellinger2:closed_form,chi2:closed_form,js:variational";
  int n = 500;
  std::string out = "sweep.csv";
};

int run_sweep(const SweepArgs& a) {
  const Checkpoint base = load_checkpoint(a.checkpoint);
  const UnlearnConfig cfg = load_unlearn_config(a.config, a.overrides);
  std::vector<SweepEntry> entries;
  for (const std::string& e : split_list(a.entries)) {
    const auto colon = e.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("sweep entry must be divergence:mode, got '" + e + "'");
    }
    entries.push_back({parse_divergence(e.substr(0, colon)), parse_mode(e.substr(colon + 1))});
  }
  const auto rows = divergence_sweep(base.net, base.concepts, base.schedule, entries, cfg, a.n);
  CsvWriter w(a.out, {"divergence", "mode", "ok", "target_accuracy", "preserve_accuracy",
                      "preserve_w2", "mean_grad_norm", "error"});
  for (const SweepRow& r : rows) {
    std::string err = r.error;
    for (char& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    w.row({std::string(cli_name(r.divergence)), std::string(mode_name(r.mode)), r.ok ? "1" : "0",
           num(r.target_accuracy), num(r.preserve_accuracy), num(r.preserve_w2),
           num(r.mean_grad_norm), err});
  }
  w.close();
  std::cout << "rows," << rows.size() << '\n';
  return 0;
}

// multi-erase

struct MultiArgs {
  std::string checkpoint;
  std::string config;
  std::vector<std::string> overrides;
  std::string targets = "A,C";
  int n = 500;
  std::string out_dir = "multi_out";
};

int run_multi(const MultiArgs& a) {
  const Checkpoint base = load_checkpoint(a.checkpoint);
  const UnlearnConfig cfg = load_unlearn_config(a.config, a.overrides);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  const MultiEraseResult r = sequential_multi_erase(base.net, base.concepts, base.schedule,
                                                    split_list(a.targets), cfg, a.n);
  CsvWriter w(dir / "stages.csv", {"stage", "target", "concept", "accuracy", "mean_shift", "w2"});
  for (const StageReport& s : r.stages) {
    for (const ConceptReport& c : s.reports) {
      w.row({std::to_string(s.stage), s.target, c.concept_label, num(c.accuracy),
             num(c.mean_shift), num(c.w2)});
    }
  }
  w.close();
  save_checkpoint({base.schedule, base.concepts, r.net}, dir / "unlearned.json");
  std::cout << "stages," << r.stages.size() << '\n';
  return 0;
}

// plot

struct PlotArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> labels;
  std::string kind = "grad";
  std::string out = "plot.svg";
};

int run_plot(const PlotArgs& a) {
  std::vector<Series> series;
  PlotOptions po;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const CsvTable t = read_csv(a.inputs[i]);
    const std::string label = i < a.labels.size() ? a.labels[i] : fs::path(a.inputs[i]).stem().string();
    if (t.rows.empty()) continue;
    if (a.kind == "grad") {
      series.push_back({label, t.numeric("step"), t.numeric("grad_norm")});
      po = {"Gradient norm per step", "step", "|grad|", true};
    } else if (a.kind == "decay") {
      const auto dp = t.numeric("phi_dist");
      const auto dw = t.numeric("omega_dist");
      std::vector<double> d(dp.size());
      for (std::size_t k = 0; k < d.size(); ++k) d[k] = std::hypot(dp[k], dw[k]);
      series.push_back({label, t.numeric("t"), d});
      po = {"Distance to equilibrium", "time", "distance", true};
    } else if (a.kind == "scatter") {
      const auto xs = t.numeric("x");
      const auto ys = t.numeric("y");
      const std::size_t c = t.column("concept");
      std::map<std::string, Series> by;
      for (std::size_t k = 0; k < t.rows.size(); ++k) {
        Series& s = by[label + ":" + t.rows[k][c]];
        s.label = label + ":" + t.rows[k][c];
        s.x.push_back(xs[k]);
        s.y.push_back(ys[k]);
      }
      for (auto& [k, s] : by) series.push_back(std::move(s));
      po = {"Generated samples", "x", "y", false};
    } else {
      throw std::invalid_argument("unknown plot kind '" + a.kind + "' (grad, decay, scatter)");
    }
  }
  if (series.empty()) {
    std::cerr << "warning: no data rows in the inputs; no plot written\n";
    return 0;
  }
  write_text_file(a.out, a.kind == "scatter" ? scatter_plot_svg(series, po)
                                             : line_plot_svg(series, po));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"f-divergence unlearning lab"};
  app.require_subcommand(1);

  DivergenceArgs div;
  auto* c_div = app.add_subcommand("divergence", "closed forms, quadrature and metadata");
  c_div->add_option("--names", div.names, "comma list of divergences or 'all'");
  c_div->add_option("--p-mean", div.p_mean, "mean of the 1-D P");
  c_div->add_option("--p-var", div.p_var, "variance of P");
  c_div->add_option("--q-mean", div.q_mean, "mean of the 1-D Q");
  c_div->add_option("--q-var", div.q_var, "variance of Q");
  c_div->add_option("--out", div.out, "CSV output");

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "variational divergence estimate on 1-D Gaussians");
  c_est->add_option("--divergence", est.divergence, "divergence name");
  c_est->add_option("--mu-p", est.p_mean, "mean of P");
  c_est->add_option("--sigma-p", est.p_sd, "standard deviation of P");
  c_est->add_option("--mu-q", est.q_mean, "mean of Q");
  c_est->add_option("--sigma-q", est.q_sd, "standard deviation of Q");
  c_est->add_option("--samples", est.samples, "samples drawn from each side");
  c_est->add_option("--steps", est.options.steps, "critic ascent steps");
  c_est->add_option("--lr", est.options.learning_rate, "Adam step size");
  c_est->add_option("--batch", est.options.batch_size, "minibatch size per side");
  c_est->add_option("--seed", est.options.seed, "critic init and minibatch seed");
  c_est->add_option("--out", est.out, "trace CSV");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-diffusion", "pretrain the toy conditional denoiser");
  c_tr->add_option("--config", tr.config, "JSON pretrain options");
  c_tr->add_option("--override", tr.overrides, "key=value")->take_all();
  c_tr->add_option("--samples-per-concept", tr.samples_per_concept, "training samples per concept");
  c_tr->add_option("--data-seed", tr.data_seed, "seed of the training draw");
  c_tr->add_option("--out", tr.out, "checkpoint path");

  SampleArgs sa;
  auto* c_sa = app.add_subcommand("sample", "ancestral samples from a checkpoint");
  c_sa->add_option("--checkpoint", sa.checkpoint, "model checkpoint")->required();
  c_sa->add_option("--concept", sa.concept_label, "concept label or 'empty'");
  c_sa->add_option("--n", sa.n, "number of samples");
  c_sa->add_option("--seed", sa.seed, "sampling seed");
  c_sa->add_option("--out", sa.out, "CSV of final samples");
  c_sa->add_option("--trajectory", sa.trajectory, "also write x_T..x_0 to this CSV");

  UnlearnArgs un;
  auto* c_un = app.add_subcommand("unlearn", "erase a concept from a checkpoint");
  c_un->add_option("--checkpoint", un.checkpoint, "base checkpoint")->required();
  c_un->add_option("--config", un.config, "JSON unlearn config");
  c_un->add_option("--override", un.overrides, "key=value")->take_all();
  c_un->add_option("--out-dir", un.out_dir, "run directory");
  c_un->add_option("--eval-samples", un.eval_samples, "samples per concept for evaluation");

  DynamicsArgs dy;
  auto* c_dy = app.add_subcommand("dynamics", "min-max flow, Jacobian report and speed ranking");
  c_dy->add_option("--divergences", dy.divergences, "comma list of divergences");
  c_dy->add_option("--dim", dy.dim, "game dimension")->check(CLI::IsMember({1, 2}));
  c_dy->add_option("--mu", dy.options.mu, "target mean");
  c_dy->add_option("--sigma", dy.options.sigma, "target standard deviation");
  c_dy->add_option("--perturbation", dy.options.perturbation, "initial offset of the generator mean");
  c_dy->add_option("--horizon", dy.options.horizon, "integration time");
  c_dy->add_option("--dt", dy.options.dt, "RK4 step");
  c_dy->add_option("--out-dir", dy.out_dir, "output directory");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "per-concept accuracy, mean shift and sliced W2");
  c_ev->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  c_ev->add_option("--n", ev.n, "samples per concept");
  c_ev->add_option("--seed", ev.seed, "sampling seed");
  c_ev->add_option("--out", ev.out, "CSV output");

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "one unlearning run per divergence:mode entry");
  c_sw->add_option("--checkpoint", sw.checkpoint, "base checkpoint")->required();
  c_sw->add_option("--config", sw.config, "JSON unlearn config shared by all entries");
  c_sw->add_option("--override", sw.overrides, "key=value")->take_all();
  c_sw->add_option("--entries", sw.entries, "e.g. kl:closed_form,js:variational");
  c_sw->add_option("--n", sw.n, "evaluation samples per concept");
  c_sw->add_option("--out", sw.out, "CSV output");

  MultiArgs mu;
  auto* c_mu = app.add_subcommand("multi-erase", "sequentially erase several concepts");
  c_mu->add_option("--checkpoint", mu.checkpoint, "base checkpoint")->required();
  c_mu->add_option("--config", mu.config, "JSON unlearn config");
  c_mu->add_option("--override", mu.overrides, "key=value")->take_all();
  c_mu->add_option("--targets", mu.targets, "comma list of concepts, erased in order");
  c_mu->add_option("--n", mu.n, "evaluation samples per concept");
  c_mu->add_option("--out-dir", mu.out_dir, "output directory");

  PlotArgs pl;
  auto* c_pl = app.add_subcommand("plot", "SVG plots from metric CSVs");
  c_pl->add_option("--input", pl.inputs, "metric CSV files")->required()->take_all();
  c_pl->add_option("--label", pl.labels, "legend label per input")->take_all();
  c_pl->add_option("--kind", pl.kind, "plot type")->check(CLI::IsMember({"grad", "decay", "scatter"}));
  c_pl->add_option("--out", pl.out, "SVG path");

  CLI11_PARSE(app, argc, argv);
  try {
    if (c_div->parsed()) return run_divergence(div);
    if (c_est->parsed()) return run_estimate(est);
    if (c_tr->parsed()) return run_train(tr);
    if (c_sa->parsed()) return run_sample(sa);
    if (c_un->parsed()) return run_unlearn(un);
    if (c_dy->parsed()) return run_dynamics(dy);
    if (c_ev->parsed()) return run_eval(ev);
    if (c_sw->parsed()) return run_sweep(sw);
    if (c_mu->parsed()) return run_multi(mu);
    if (c_pl->parsed()) return run_plot(pl);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
