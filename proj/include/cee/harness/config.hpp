#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cee/core/error.hpp"
#include "cee/mask/causal_mask.hpp"
#include "cee/models/common.hpp"
#include "cee/training/phase1.hpp"
#include "cee/training/phase2.hpp"
#include "cee/training/ppo.hpp"

namespace cee::harness {

using Json = nlohmann::ordered_json;

/// Environment variable that overrides `output_dir`.
inline constexpr const char* kOutputDirEnv = "CEE_OUTPUT_DIR";

struct ExperimentConfig {
  std::string task = "maze-6";
  std::vector<std::uint64_t> seeds{0};
  mask::MaskMode mode = mask::MaskMode::Cee;
  std::int64_t phase1_steps = 50000;
  std::int64_t phase2_steps = 200000;
  training::Phase1Config phase1;
  training::PpoConfig ppo;
  mask::MaskConfig mask;  // mode lives in `mode`
  models::NetworkConfig network;
  std::vector<std::int64_t> heatmap_milestones{50000, 100000, 200000, 500000};
  int eval_episodes = 20;
  std::string output_dir = "runs";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  mask::MaskConfig mask_config() const {
    mask::MaskConfig m = mask;
    m.mode = mode;
    return m;
  }

  training::Phase1Config phase1_config() const {
    training::Phase1Config c = phase1;
    c.steps = phase1_steps;
    return c;
  }

  training::Phase2Config phase2_config() const {
    training::Phase2Config c;
    c.steps = phase2_steps;
    c.ppo = ppo;
    c.mask = mask_config();
    c.heatmap_milestones = heatmap_milestones;
    return c;
  }

  void validate() const {
    if (seeds.empty()) throw ConfigError("config: seed list is empty");
    if (task.empty()) throw ConfigError("config: task id is empty");
    if (phase1_steps < 0 || phase2_steps < 0) throw ConfigError("config: negative step budget");
    if (!(mask.epsilon > 0.0)) throw ConfigError("config: epsilon must be positive");
    if (!(mask.tau > 0.0 && mask.tau < 1.0)) throw ConfigError("config: tau must lie in (0, 1)");
    if (!(mask.temperature > 0.0)) throw ConfigError("config: temperature must be positive");
    if (eval_episodes < 1) throw ConfigError("config: eval_episodes must be >= 1");
    for (auto h : network.hidden)
      if (h == 0) throw ConfigError("config: hidden layer of width 0");
    ppo.validate();
    phase1_config().validate();
  }
};

inline Json to_json(const training::PpoConfig& p) {
  return Json{{"lr", p.lr},
              {"gamma", p.gamma},
              {"lambda", p.lambda},
              {"clip", p.clip},
              {"value_clip", p.value_clip},
              {"value_coef", p.value_coef},
              {"entropy_coef", p.entropy_coef},
              {"epochs", p.epochs},
              {"batch_size", p.batch_size},
              {"n_steps", p.n_steps}};
}

inline Json to_json(const ExperimentConfig& c) {
  const auto& p1 = c.phase1;
  return Json{{"task", c.task},
              {"seeds", c.seeds},
              {"mode", mask::to_string(c.mode)},
              {"phase1_steps", c.phase1_steps},
              {"phase2_steps", c.phase2_steps},
              {"phase1",
               {{"rollout_steps", p1.rollout_steps},
                {"epochs", p1.epochs},
                {"batch_size", p1.batch_size},
                {"K", p1.nvalue_interval},
                {"use_curiosity", p1.use_curiosity},
                {"add_extrinsic", p1.add_extrinsic},
                {"lr", p1.lr},
                {"anneal_lr", p1.anneal_lr},
                {"buffer_capacity", p1.buffer_capacity},
                {"ppo", to_json(p1.ppo)}}},
              {"ppo", to_json(c.ppo)},
              {"mask",
               {{"epsilon", c.mask.epsilon},
                {"tau", c.mask.tau},
                {"temperature", c.mask.temperature},
                {"tau_abs", c.mask.tau_abs},
                {"relative_form", mask::to_string(c.mask.form)}}},
              {"hidden", c.network.hidden},
              {"heatmap_milestones", c.heatmap_milestones},
              {"eval_episodes", c.eval_episodes},
              {"output_dir", c.output_dir}};
}

namespace detail {

// Unknown keys are errors so that typos do not silently fall back to defaults.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("config: unknown key '" + where + k + "'");
  }
}

template <typename V>
void read(const Json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline void read_ppo(const Json& j, training::PpoConfig& p, const std::string& where) {
  check_keys(j, {"lr", "gamma", "lambda", "clip", "value_clip", "value_coef", "entropy_coef", "epochs", "batch_size",
                 "n_steps"},
             where);
  read(j, "lr", p.lr);
  read(j, "gamma", p.gamma);
  read(j, "lambda", p.lambda);
  read(j, "clip", p.clip);
  read(j, "value_clip", p.value_clip);
  read(j, "value_coef", p.value_coef);
  read(j, "entropy_coef", p.entropy_coef);
  read(j, "epochs", p.epochs);
  read(j, "batch_size", p.batch_size);
  read(j, "n_steps", p.n_steps);
}

}  // namespace detail

/// Missing keys keep their defaults.
inline ExperimentConfig config_from_json(const Json& j) {
  using detail::read;
  detail::check_keys(j,
                     {"task", "seeds", "mode", "phase1_steps", "phase2_steps", "phase1", "ppo", "mask", "hidden",
                      "heatmap_milestones", "eval_episodes", "output_dir"},
                     "");
  ExperimentConfig c;
  read(j, "task", c.task);
  read(j, "seeds", c.seeds);
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) throw ConfigError("config: mode must be a string");
    c.mode = mask::parse_mask_mode(j["mode"].get<std::string>());
  }
  read(j, "phase1_steps", c.phase1_steps);
  read(j, "phase2_steps", c.phase2_steps);
  if (j.contains("phase1")) {
    const Json& p = j["phase1"];
    detail::check_keys(p,
                       {"rollout_steps", "epochs", "batch_size", "K", "use_curiosity", "add_extrinsic", "lr",
                        "anneal_lr", "buffer_capacity", "ppo"},
                       "phase1.");
    read(p, "rollout_steps", c.phase1.rollout_steps);
    read(p, "epochs", c.phase1.epochs);
    read(p, "batch_size", c.phase1.batch_size);
    read(p, "K", c.phase1.nvalue_interval);
    read(p, "use_curiosity", c.phase1.use_curiosity);
    read(p, "add_extrinsic", c.phase1.add_extrinsic);
    read(p, "lr", c.phase1.lr);
    read(p, "anneal_lr", c.phase1.anneal_lr);
    read(p, "buffer_capacity", c.phase1.buffer_capacity);
    if (p.contains("ppo")) detail::read_ppo(p["ppo"], c.phase1.ppo, "phase1.ppo.");
  }
  if (j.contains("ppo")) detail::read_ppo(j["ppo"], c.ppo, "ppo.");
  if (j.contains("mask")) {
    const Json& m = j["mask"];
    detail::check_keys(m, {"epsilon", "tau", "temperature", "tau_abs", "relative_form"}, "mask.");
    read(m, "epsilon", c.mask.epsilon);
    read(m, "tau", c.mask.tau);
    read(m, "temperature", c.mask.temperature);
    read(m, "tau_abs", c.mask.tau_abs);
    if (m.contains("relative_form")) {
      if (!m["relative_form"].is_string()) throw ConfigError("config: relative_form must be a string");
      c.mask.form = mask::parse_relative_effect_form(m["relative_form"].get<std::string>());
    }
  }
  read(j, "hidden", c.network.hidden);
  read(j, "heatmap_milestones", c.heatmap_milestones);
  read(j, "eval_episodes", c.eval_episodes);
  read(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/**
 * Applies "dotted.key=value" overrides. The value is parsed as JSON when
 * possible and taken as a plain string otherwise.
 */
inline ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& overrides) {
  Json j = to_json(base);
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    std::string pointer = "/" + o.substr(0, eq);
    for (char& ch : pointer)
      if (ch == '.') ch = '/';
    const std::string raw = o.substr(eq + 1);
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    const Json::json_pointer ptr(pointer);
    if (!j.contains(ptr)) throw ConfigError("override: unknown key '" + o.substr(0, eq) + "'");
    j[ptr] = value;
  }
  return config_from_json(j);
}

/// Applies the output-directory environment override, if set.
inline ExperimentConfig with_env_overrides(ExperimentConfig c) {
  if (const char* dir = std::getenv(kOutputDirEnv); dir != nullptr && *dir != '\0') c.output_dir = dir;
  return c;
}

}  // namespace cee::harness
