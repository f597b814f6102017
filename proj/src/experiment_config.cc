//
// Copyright 2026 The DPDM Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dpdm/experiment_config.h"

#include <cmath>
#include <fstream>
#include <set>

namespace dpdm {
namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  const json& Raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double Number(const std::string& key, double fallback) {
    if (!Has(key)) return fallback;
    const json& v = Raw(key);
    if (!v.is_number()) throw ConfigError(Path(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(Path(key) + " must be finite");
    return d;
  }

  int64_t Integer(const std::string& key, int64_t fallback) {
    if (!Has(key)) return fallback;
    const json& v = Raw(key);
    if (!v.is_number_integer()) throw ConfigError(Path(key) + " must be an integer");
    return v.get<int64_t>();
  }

  bool Bool(const std::string& key, bool fallback) {
    if (!Has(key)) return fallback;
    const json& v = Raw(key);
    if (!v.is_boolean()) throw ConfigError(Path(key) + " must be a boolean");
    return v.get<bool>();
  }

  std::string String(const std::string& key, const std::string& fallback) {
    if (!Has(key)) return fallback;
    const json& v = Raw(key);
    if (!v.is_string()) throw ConfigError(Path(key) + " must be a string");
    return v.get<std::string>();
  }

  // Rejects keys that were never read.
  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + Path(it.key()));
    }
  }

  std::string Path(const std::string& key) const { return name_ + "." + key; }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void Require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

GmmSpec ParseGmm(const json& j) {
  Section s(j, "data.gmm");
  GmmSpec g;
  const json& means = s.Raw("means");
  Require(means.is_array() && !means.empty(), "data.gmm.means must be a non-empty array");
  for (const json& m : means) {
    Require(m.is_array() && m.size() == 2 && m[0].is_number() && m[1].is_number(),
            "each mean must be [x, y]");
    g.means.push_back({m[0].get<double>(), m[1].get<double>()});
  }
  g.component_std = s.Number("component_std", 0.0);
  if (s.Has("weights")) {
    const json& w = s.Raw("weights");
    Require(w.is_array(), "data.gmm.weights must be an array");
    for (const json& v : w) {
      Require(v.is_number(), "weights must be numbers");
      g.weights.push_back(v.get<double>());
    }
  } else {
    g.weights.assign(g.means.size(), 1.0 / g.means.size());
  }
  s.Finish();
  try {
    g.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("data.gmm: ") + e.what());
  }
  return g;
}

}  // namespace

int64_t ExperimentConfig::total_steps() const {
  if (steps) return *steps;
  return StepsForEpochs(epochs.value_or(1.0), data_size,
                        static_cast<double>(batch_size));
}

ExperimentConfig ParseConfig(const json& j) {
  Section top(j, "config");
  ExperimentConfig cfg;

  if (top.Has("data")) {
    Section s(top.Raw("data"), "data");
    if (s.Has("gmm")) {
      const json& g = s.Raw("gmm");
      if (g.is_string()) {
        Require(g.get<std::string>() == "default9",
                "data.gmm must be \"default9\" or an object");
      } else {
        cfg.gmm = ParseGmm(g);
        cfg.gmm_is_default = false;
      }
    }
    cfg.data_size = s.Integer("n", cfg.data_size);
    Require(cfg.data_size >= 1, "data.n must be >= 1");
    const int64_t seed = s.Integer("seed", 0);
    Require(seed >= 0, "data.seed must be >= 0");
    cfg.data_seed = static_cast<uint64_t>(seed);
    s.Finish();
  }

  if (top.Has("model")) {
    Section s(top.Raw("model"), "model");
    try {
      cfg.dm = ParseDmKind(s.String("dm", "edm"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    cfg.arch.depth = static_cast<int>(s.Integer("depth", cfg.arch.depth));
    cfg.arch.width = static_cast<int>(s.Integer("width", cfg.arch.width));
    cfg.arch.fourier_freqs =
        static_cast<int>(s.Integer("fourier_freqs", cfg.arch.fourier_freqs));
    cfg.arch.embed_dim = static_cast<int>(s.Integer("embed_dim", cfg.arch.embed_dim));
    cfg.conditional = s.Bool("conditional", cfg.conditional);
    cfg.label_dropout = s.Number("label_dropout", cfg.label_dropout);
    Require(cfg.label_dropout >= 0.0 && cfg.label_dropout <= 1.0,
            "model.label_dropout must lie in [0, 1]");
    s.Finish();
  }
  cfg.arch.num_classes = cfg.gmm.num_components();
  try {
    cfg.arch.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  if (top.Has("privacy")) {
    const json& p = top.Raw("privacy");
    if (p.is_string()) {
      Require(p.get<std::string>() == "non-private",
              "privacy must be \"non-private\" or an object");
    } else {
      Section s(p, "privacy");
      PrivacySection ps;
      ps.clip = s.Number("clip", ps.clip);
      Require(ps.clip > 0.0, "privacy.clip must be > 0");
      if (s.Has("sigma_dp")) ps.sigma_dp = s.Number("sigma_dp", 0.0);
      if (s.Has("target_epsilon")) ps.target_epsilon = s.Number("target_epsilon", 0.0);
      Require(ps.sigma_dp.has_value() != ps.target_epsilon.has_value(),
              "privacy needs exactly one of sigma_dp / target_epsilon");
      Require(!ps.sigma_dp || *ps.sigma_dp > 0.0, "privacy.sigma_dp must be > 0");
      Require(!ps.target_epsilon || *ps.target_epsilon > 0.0,
              "privacy.target_epsilon must be > 0");
      ps.delta = s.Number("delta", ps.delta);
      Require(ps.delta > 0.0 && ps.delta < 1.0, "privacy.delta must lie in (0, 1)");
      try {
        ps.conversion = ParseConversion(s.String("conversion", "refined"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      s.Finish();
      cfg.privacy = ps;
    }
  }

  if (top.Has("optimizer")) {
    Section s(top.Raw("optimizer"), "optimizer");
    cfg.optimizer.learning_rate = s.Number("lr", cfg.optimizer.learning_rate);
    cfg.optimizer.beta1 = s.Number("beta1", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = s.Number("beta2", cfg.optimizer.beta2);
    cfg.optimizer.epsilon = s.Number("eps", cfg.optimizer.epsilon);
    cfg.ema_decay = s.Number("ema_decay", cfg.ema_decay);
    Require(cfg.optimizer.learning_rate > 0.0, "optimizer.lr must be > 0");
    Require(cfg.optimizer.beta1 >= 0.0 && cfg.optimizer.beta1 < 1.0 &&
                cfg.optimizer.beta2 >= 0.0 && cfg.optimizer.beta2 < 1.0,
            "optimizer betas must lie in [0, 1)");
    Require(cfg.optimizer.epsilon > 0.0, "optimizer.eps must be > 0");
    Require(cfg.ema_decay >= 0.0 && cfg.ema_decay <= 1.0,
            "optimizer.ema_decay must lie in [0, 1]");
    s.Finish();
  }

  if (top.Has("sampler")) {
    Section s(top.Raw("sampler"), "sampler");
    SamplerSection& ss = cfg.sampler;
    ss.kind = s.String("sampler", ss.kind);
    Require(ss.kind == "ddim-det" || ss.kind == "ddim-stoch" || ss.kind == "churn",
            "sampler.sampler must be ddim-det, ddim-stoch or churn");
    ss.schedule.steps = static_cast<int>(s.Integer("steps", ss.schedule.steps));
    ss.schedule.sigma_min = s.Number("sigma_min", ss.schedule.sigma_min);
    ss.schedule.sigma_max = s.Number("sigma_max", ss.schedule.sigma_max);
    ss.schedule.rho = s.Number("rho", ss.schedule.rho);
    ss.churn.s_churn = s.Number("s_churn", ss.churn.s_churn);
    ss.churn.s_min = s.Number("s_min", ss.churn.s_min);
    if (s.Has("s_max")) ss.churn.s_max = s.Number("s_max", 0.0);
    ss.churn.s_noise = s.Number("s_noise", ss.churn.s_noise);
    ss.guidance.scale = s.Number("guidance_scale", ss.guidance.scale);
    ss.guidance.label = static_cast<int>(s.Integer("label", ss.guidance.label));
    s.Finish();
    Require(ss.schedule.steps >= 2, "sampler.steps must be >= 2");
    Require(ss.schedule.sigma_min > 0.0 && ss.schedule.sigma_min < ss.schedule.sigma_max,
            "sampler needs 0 < sigma_min < sigma_max");
    Require(ss.schedule.rho > 0.0, "sampler.rho must be > 0");
    try {
      ss.churn.Validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("sampler: ") + e.what());
    }
  }

  if (top.Has("run")) {
    Section s(top.Raw("run"), "run");
    const int64_t seed = s.Integer("seed", 0);
    Require(seed >= 0, "run.seed must be >= 0");
    cfg.seed = static_cast<uint64_t>(seed);
    cfg.batch_size = s.Integer("batch_size", cfg.batch_size);
    if (s.Has("epochs")) cfg.epochs = s.Number("epochs", 0.0);
    if (s.Has("steps")) cfg.steps = s.Integer("steps", 0);
    Require(!(cfg.epochs && cfg.steps), "run takes epochs or steps, not both");
    cfg.noise_multiplicity = static_cast<int>(s.Integer("K", cfg.noise_multiplicity));
    cfg.output_dir = s.String("output_dir", cfg.output_dir);
    cfg.threads = static_cast<int>(s.Integer("threads", cfg.threads));
    cfg.chunk_size = static_cast<int>(s.Integer("chunk_size", cfg.chunk_size));
    s.Finish();
  }
  Require(cfg.batch_size >= 1 && cfg.batch_size <= cfg.data_size,
          "run.batch_size must lie in [1, data.n]");
  Require(!cfg.epochs || *cfg.epochs >= 0.0, "run.epochs must be >= 0");
  Require(!cfg.steps || *cfg.steps >= 0, "run.steps must be >= 0");
  Require(cfg.noise_multiplicity >= 1, "run.K must be >= 1");
  Require(cfg.threads >= 0, "run.threads must be >= 0");
  Require(cfg.chunk_size >= 1, "run.chunk_size must be >= 1");
  top.Finish();
  return cfg;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return ParseConfig(j);
}

json ToJson(const ExperimentConfig& cfg) {
  json j;
  if (cfg.gmm_is_default) {
    j["data"]["gmm"] = "default9";
  } else {
    json means = json::array();
    for (const Point2& m : cfg.gmm.means) means.push_back({m.x, m.y});
    j["data"]["gmm"] = {{"means", means},
                        {"component_std", cfg.gmm.component_std},
                        {"weights", cfg.gmm.weights}};
  }
  j["data"]["n"] = cfg.data_size;
  j["data"]["seed"] = cfg.data_seed;
  j["model"] = {{"dm", std::string(DmKindName(cfg.dm))},
                {"depth", cfg.arch.depth},
                {"width", cfg.arch.width},
                {"fourier_freqs", cfg.arch.fourier_freqs},
                {"embed_dim", cfg.arch.embed_dim},
                {"conditional", cfg.conditional},
                {"label_dropout", cfg.label_dropout}};
  if (cfg.privacy) {
    json p = {{"clip", cfg.privacy->clip},
              {"delta", cfg.privacy->delta},
              {"conversion", std::string(ConversionName(cfg.privacy->conversion))}};
    if (cfg.privacy->sigma_dp) p["sigma_dp"] = *cfg.privacy->sigma_dp;
    if (cfg.privacy->target_epsilon) p["target_epsilon"] = *cfg.privacy->target_epsilon;
    j["privacy"] = p;
  } else {
    j["privacy"] = "non-private";
  }
  j["optimizer"] = {{"lr", cfg.optimizer.learning_rate},
                    {"beta1", cfg.optimizer.beta1},
                    {"beta2", cfg.optimizer.beta2},
                    {"eps", cfg.optimizer.epsilon},
                    {"ema_decay", cfg.ema_decay}};
  json sampler = {{"sampler", cfg.sampler.kind},
                  {"steps", cfg.sampler.schedule.steps},
                  {"sigma_min", cfg.sampler.schedule.sigma_min},
                  {"sigma_max", cfg.sampler.schedule.sigma_max},
                  {"rho", cfg.sampler.schedule.rho},
                  {"s_churn", cfg.sampler.churn.s_churn},
                  {"s_min", cfg.sampler.churn.s_min},
                  {"s_noise", cfg.sampler.churn.s_noise},
                  {"guidance_scale", cfg.sampler.guidance.scale},
                  {"label", cfg.sampler.guidance.label}};
  if (std::isfinite(cfg.sampler.churn.s_max)) sampler["s_max"] = cfg.sampler.churn.s_max;
  j["sampler"] = sampler;
  json run = {{"seed", cfg.seed},
              {"batch_size", cfg.batch_size},
              {"K", cfg.noise_multiplicity},
              {"output_dir", cfg.output_dir},
              {"threads", cfg.threads},
              {"chunk_size", cfg.chunk_size}};
  if (cfg.steps) run["steps"] = *cfg.steps;
  if (cfg.epochs) run["epochs"] = *cfg.epochs;
  j["run"] = run;
  return j;
}

}  // namespace dpdm
