#include "fdl/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace fdl {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) throw std::invalid_argument("unknown " + where + " key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type: " +
                                j.at(key).dump());
  }
}

}  // namespace

json to_json(const UnlearnConfig& c) {
  return {{"target", c.target},
          {"anchor", c.anchor},
          {"mode", mode_name(c.mode)},
          {"divergence", cli_name(c.divergence)},
          {"omega_t", c.omega_t},
          {"sigma", c.sigma},
          {"regularizers",
           {{"prior_preservation", c.regularizers.prior_preservation},
            {"preservation_weight", c.regularizers.preservation_weight},
            {"gradient_surgery", c.regularizers.gradient_surgery},
            {"importance_sampling", c.regularizers.importance_sampling},
            {"cutoff", c.regularizers.cutoff}}},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"discriminator_ratio", c.discriminator_ratio},
          {"critic_learning_rate", c.critic_learning_rate},
          {"critic_width", c.critic_width},
          {"critic_warmup", c.critic_warmup},
          {"variational_beta1", c.variational_beta1},
          {"coupled_noise", c.coupled_noise},
          {"trajectory_source", source_name(c.trajectory_source)},
          {"trajectory_pool", c.trajectory_pool},
          {"eval_every", c.eval_every},
          {"eval_samples", c.eval_samples},
          {"grad_log_every", c.grad_log_every}};
}

UnlearnConfig unlearn_config_from_json(const json& j) {
  reject_unknown(j,
                 {"target", "anchor", "mode", "divergence", "omega_t", "sigma", "regularizers",
                  "steps", "learning_rate", "batch_size", "seed", "discriminator_ratio",
                  "critic_learning_rate", "critic_width", "critic_warmup", "variational_beta1",
                  "coupled_noise", "trajectory_source", "trajectory_pool",
                  "eval_every", "eval_samples", "grad_log_every"},
                 "unlearn config");
  UnlearnConfig c;
  read(j, "target", c.target);
  read(j, "anchor", c.anchor);
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("divergence")) c.divergence = parse_divergence(j.at("divergence").get<std::string>());
  read(j, "omega_t", c.omega_t);
  read(j, "sigma", c.sigma);
  if (j.contains("regularizers")) {
    const json& r = j.at("regularizers");
    reject_unknown(r,
                   {"prior_preservation", "preservation_weight", "gradient_surgery",
                    "importance_sampling", "cutoff"},
                   "regularizers");
    read(r, "prior_preservation", c.regularizers.prior_preservation);
    read(r, "preservation_weight", c.regularizers.preservation_weight);
    read(r, "gradient_surgery", c.regularizers.gradient_surgery);
    read(r, "importance_sampling", c.regularizers.importance_sampling);
    read(r, "cutoff", c.regularizers.cutoff);
  }
  read(j, "steps", c.steps);
  read(j, "learning_rate", c.learning_rate);
  read(j, "batch_size", c.batch_size);
  read(j, "seed", c.seed);
  read(j, "discriminator_ratio", c.discriminator_ratio);
  read(j, "critic_learning_rate", c.critic_learning_rate);
  read(j, "critic_width", c.critic_width);
  read(j, "critic_warmup", c.critic_warmup);
  read(j, "variational_beta1", c.variational_beta1);
  read(j, "coupled_noise", c.coupled_noise);
  if (j.contains("trajectory_source")) {
    c.trajectory_source = parse_source(j.at("trajectory_source").get<std::string>());
  }
  read(j, "trajectory_pool", c.trajectory_pool);
  read(j, "eval_every", c.eval_every);
  read(j, "eval_samples", c.eval_samples);
  read(j, "grad_log_every", c.grad_log_every);
  return c;
}

json to_json(const PretrainOptions& o) {
  return {{"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"learning_rate", o.learning_rate},
          {"uncond_prob", o.uncond_prob},
          {"seed", o.seed},
          {"hidden_width", o.arch.hidden_width},
          {"hidden_layers", o.arch.hidden_layers},
          {"time_features", o.arch.time_features}};
}

PretrainOptions pretrain_options_from_json(const json& j) {
  reject_unknown(j,
                 {"epochs", "batch_size", "learning_rate", "uncond_prob", "seed", "hidden_width",
                  "hidden_layers", "time_features"},
                 "pretrain config");
  PretrainOptions o;
  read(j, "epochs", o.epochs);
  read(j, "batch_size", o.batch_size);
  read(j, "learning_rate", o.learning_rate);
  read(j, "uncond_prob", o.uncond_prob);
  read(j, "seed", o.seed);
  read(j, "hidden_width", o.arch.hidden_width);
  read(j, "hidden_layers", o.arch.hidden_layers);
  read(j, "time_features", o.arch.time_features);
  return o;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override must look like key=value: '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void apply_overrides(json& j, const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) apply_override(j, a);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace fdl
