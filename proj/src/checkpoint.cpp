#include "fdl/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace fdl {

using nlohmann::json;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json j;
  j["format"] = "fdl-denoiser";
  j["version"] = kCheckpointVersion;
  j["schedule"] = {{"steps", ckpt.schedule.steps()},
                   {"beta_start", ckpt.schedule.beta_start()},
                   {"beta_end", ckpt.schedule.beta_end()}};
  json concepts = json::array();
  for (const Concept& c : ckpt.concepts.concepts()) {
    concepts.push_back({{"label", c.label},
                        {"mean", {c.mean(0), c.mean(1)}},
                        {"variance", c.variance}});
  }
  j["concepts"] = std::move(concepts);
  const DenoiserArch& arch = ckpt.net.arch();
  j["arch"] = {{"hidden_width", arch.hidden_width},
               {"hidden_layers", arch.hidden_layers},
               {"time_features", arch.time_features}};
  j["checksum"] = ckpt.net.checksum();
  const Eigen::VectorXd& p = ckpt.net.parameters();
  j["parameters"] = std::vector<double>(p.data(), p.data() + p.size());

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "fdl-denoiser") throw std::runtime_error("not a denoiser checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw std::runtime_error("unsupported checkpoint version " + j.at("version").dump());
    }
    const json& s = j.at("schedule");
    NoiseSchedule schedule = NoiseSchedule::linear(
        s.at("steps").get<int>(), s.at("beta_start").get<double>(), s.at("beta_end").get<double>());

    std::vector<Concept> concepts;
    for (const json& c : j.at("concepts")) {
      const auto mean = c.at("mean").get<std::vector<double>>();
      if (mean.size() != 2) throw std::runtime_error("concept mean must have 2 entries");
      concepts.push_back({c.at("label").get<std::string>(), {mean[0], mean[1]},
                          c.at("variance").get<double>()});
    }

    const json& a = j.at("arch");
    DenoiserArch arch;
    arch.hidden_width = a.at("hidden_width").get<int>();
    arch.hidden_layers = a.at("hidden_layers").get<int>();
    arch.time_features = a.at("time_features").get<int>();

    DenoiserNet net(arch, schedule.steps(), 0);
    const auto params = j.at("parameters").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(params.size()) != net.parameters().size()) {
      throw std::runtime_error("parameter count " + std::to_string(params.size()) +
                               " does not match architecture (" +
                               std::to_string(net.parameters().size()) + ")");
    }
    net.parameters() = Eigen::Map<const Eigen::VectorXd>(params.data(),
                                                         static_cast<Eigen::Index>(params.size()));
    if (net.checksum() != j.at("checksum").get<std::uint64_t>()) {
      throw std::runtime_error("checksum mismatch");
    }
    return {std::move(schedule), ConceptSet(std::move(concepts)), std::move(net)};
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace fdl
