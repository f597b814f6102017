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

// Command-line runner: train, sample, account, calibrate, eval, oracle-info.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "run_io.h"

#include "dpdm/accountant.h"
#include "dpdm/checkpoint.h"
#include "dpdm/csv_writer.h"
#include "dpdm/denoiser.h"
#include "dpdm/dm_config.h"
#include "dpdm/dp_sgd.h"
#include "dpdm/experiment_config.h"
#include "dpdm/gmm_oracle.h"
#include "dpdm/metrics.h"
#include "dpdm/parallel.h"
#include "dpdm/samplers.h"

namespace dpdm::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Errors in user input detected after argument parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void Require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

std::string WriteCsvFile(const fs::path& path, const std::string& contents) {
  WriteFileAtomic(path, contents);
  return path.string();
}

void WriteManifest(const fs::path& dir, ojson manifest, const OutputFiles& files) {
  manifest["outputs"] = files.ToJson();
  WriteFileAtomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

ojson ManifestHeader(std::string_view command, uint64_t seed) {
  ojson m;
  m["tool"] = "dpdm";
  m["version"] = DPDM_VERSION;
  m["command"] = command;
  m["seed"] = seed;
  return m;
}

fs::path PrepareDir(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

std::string SamplesCsv(std::span<const Point2> x, int label) {
  std::ostringstream out;
  CsvWriter w(out, {"x", "y", "label"});
  for (const Point2& p : x) w.Add(p.x).Add(p.y).Add(label).EndRow();
  return out.str();
}

std::vector<Point2> ReadSamplesCsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read samples " + path.string());
  std::string line;
  std::getline(in, line);
  Require(line.rfind("x,y", 0) == 0, "samples CSV must start with an x,y header");
  std::vector<Point2> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    std::getline(row, a, ',');
    std::getline(row, b, ',');
    out.push_back({std::stod(a), std::stod(b)});
  }
  Require(!out.empty(), "samples CSV has no rows");
  return out;
}

std::vector<double> ParseDoubleList(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      Require(used == item.size(), "bad number in list: " + item);
    } catch (const std::logic_error&) {
      throw UsageError("bad number in list: " + item);
    }
  }
  Require(!out.empty(), "empty list");
  return out;
}

// ---------------------------------------------------------------- sampling

struct SamplerFlags {
  std::string kind = "ddim-det";
  std::optional<int> steps;
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
  double s_churn = 0.0;
  double s_min = 0.0;
  double s_max = std::numeric_limits<double>::infinity();
  double s_noise = 1.0;
  double w = 1.0;
  int label = kNullLabel;
  int64_t n = 10000;
  uint64_t seed = 0;
  int threads = 1;
};

void AddSamplerFlags(CLI::App* cmd, SamplerFlags& f) {
  cmd->add_option("--sampler", f.kind, "ddim-det | ddim-stoch | churn")
      ->check(CLI::IsMember({"ddim-det", "ddim-stoch", "churn"}));
  cmd->add_option("--steps", f.steps,
                  "number of noise levels M (default 50 for ddim-det, else 1000)");
  cmd->add_option("--sigma-min", f.sigma_min, "smallest noise level");
  cmd->add_option("--sigma-max", f.sigma_max, "largest noise level");
  cmd->add_option("--rho", f.rho, "schedule curvature");
  cmd->add_option("--s-churn", f.s_churn, "churn strength");
  cmd->add_option("--s-min", f.s_min, "lower noise level for churn");
  cmd->add_option("--s-max", f.s_max, "upper noise level for churn");
  cmd->add_option("--s-noise", f.s_noise, "churn noise inflation factor");
  cmd->add_option("--w", f.w, "guidance scale (1 = conditional, 0 = unconditional)");
  cmd->add_option("--label", f.label, "class label for conditional sampling (-1 = none)");
  cmd->add_option("-n,--num", f.n, "number of particles");
  cmd->add_option("--seed", f.seed, "sampler seed");
  cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
}

// Fills flags the user did not pass from a config's sampler section.
void ApplySamplerDefaults(const CLI::App& cmd, const SamplerSection& s, SamplerFlags& f) {
  auto unset = [&](const char* name) { return cmd.count(name) == 0; };
  if (unset("--sampler")) f.kind = s.kind;
  if (unset("--steps")) f.steps = s.schedule.steps;
  if (unset("--sigma-min")) f.sigma_min = s.schedule.sigma_min;
  if (unset("--sigma-max")) f.sigma_max = s.schedule.sigma_max;
  if (unset("--rho")) f.rho = s.schedule.rho;
  if (unset("--s-churn")) f.s_churn = s.churn.s_churn;
  if (unset("--s-min")) f.s_min = s.churn.s_min;
  if (unset("--s-max")) f.s_max = s.churn.s_max;
  if (unset("--s-noise")) f.s_noise = s.churn.s_noise;
  if (unset("--w")) f.w = s.guidance.scale;
  if (unset("--label")) f.label = s.guidance.label;
}

ScheduleSpec ScheduleFrom(const SamplerFlags& f) {
  ScheduleSpec s;
  s.steps = f.steps.value_or(f.kind == "ddim-det" ? 50 : 1000);
  s.sigma_min = f.sigma_min;
  s.sigma_max = f.sigma_max;
  s.rho = f.rho;
  Require(s.steps >= 2, "--steps must be >= 2");
  Require(s.sigma_min > 0 && s.sigma_min < s.sigma_max,
          "need 0 < --sigma-min < --sigma-max");
  Require(s.rho > 0, "--rho must be > 0");
  return s;
}

struct DenoiserSource {
  std::optional<Checkpoint> checkpoint;
  DmConfig dm;
  std::optional<DenoiserParams> weights;  // EMA or raw weights
  GmmSpec gmm = GmmSpec::Default9();
};

DenoiserSource LoadSource(const std::string& checkpoint, bool oracle, bool use_raw,
                          const std::string& config_path) {
  Require(oracle != !checkpoint.empty(), "give exactly one of --checkpoint / --oracle");
  DenoiserSource src;
  if (!config_path.empty()) src.gmm = LoadConfig(config_path).gmm;
  if (oracle) return src;
  Require(fs::is_regular_file(checkpoint), "checkpoint not found: " + checkpoint);
  src.checkpoint = ReadCheckpoint(checkpoint);
  src.dm = DmConfig::Make(src.checkpoint->dm_kind);
  if (use_raw) {
    src.weights = src.checkpoint->params;
  } else {
    DenoiserParams ema(src.checkpoint->params.arch);
    ema.values = src.checkpoint->ema.shadow;
    src.weights = std::move(ema);
  }
  return src;
}

BatchDenoiser BuildDenoiser(const DenoiserSource& src, const SamplerFlags& f) {
  if (!src.weights) {
    Require(f.label == kNullLabel || (f.label >= 0 && f.label < src.gmm.num_components()),
            "--label out of range for the mixture");
    if (f.label == kNullLabel) return OracleDenoiser(src.gmm);
    return GuidedDenoiser(OracleDenoiser(src.gmm, f.label), OracleDenoiser(src.gmm), f.w);
  }
  const DenoiserParams& p = *src.weights;
  Require(f.label == kNullLabel || (f.label >= 0 && f.label < p.arch.num_classes),
          "--label out of range for the checkpoint");
  if (f.label == kNullLabel) return NetworkDenoiser(p, src.dm);
  return GuidedDenoiser(NetworkDenoiser(p, src.dm, f.label), NetworkDenoiser(p, src.dm),
                        f.w);
}

std::vector<Point2> RunSampler(const BatchDenoiser& d, const SamplerFlags& f,
                               SamplerStats* stats) {
  const ScheduleSpec sched = ScheduleFrom(f);
  SamplerOptions opt;
  opt.seed = f.seed;
  opt.threads = ResolveThreads(f.threads);
  Require(f.n >= 1, "--num must be >= 1");
  if (f.kind == "churn") {
    ChurnSpec churn{f.s_churn, f.s_min, f.s_max, f.s_noise};
    try {
      churn.Validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return ChurnSample(d, sched, churn, f.n, opt, stats);
  }
  return DdimSample(d, sched, f.kind == "ddim-stoch", f.n, opt);
}

ojson SamplerJson(const SamplerFlags& f) {
  const ScheduleSpec s = ScheduleFrom(f);
  ojson j = {{"sampler", f.kind},     {"steps", s.steps}, {"sigma_min", s.sigma_min},
             {"sigma_max", s.sigma_max}, {"rho", s.rho},  {"w", f.w},
             {"label", f.label},      {"n", f.n},         {"seed", f.seed}};
  if (f.kind == "churn") {
    j["s_churn"] = f.s_churn;
    j["s_min"] = f.s_min;
    j["s_max"] = std::isfinite(f.s_max) ? ojson(f.s_max) : ojson("inf");
    j["s_noise"] = f.s_noise;
  }
  return j;
}

std::string VicinityCsv(const GmmSpec& spec, std::span<const Point2> x) {
  std::ostringstream out;
  CsvWriter w(out, {"h", "fraction", "gaussian_reference"});
  for (int h = 1; h <= 6; ++h) {
    w.Add(h).Add(HVicinity(spec, x, h)).Add(GaussianDiskMass(h)).EndRow();
  }
  return out.str();
}

// ------------------------------------------------------------------- train

int CmdTrain(const std::string& config_path, const std::string& out_override,
             std::optional<int> threads) {
  const ExperimentConfig cfg = LoadConfig(config_path);
  const int64_t steps = cfg.total_steps();
  const double q = cfg.subsample_rate();

  TrainOptions opt;
  opt.dm = DmConfig::Make(cfg.dm);
  opt.arch = cfg.arch;
  opt.optimizer = cfg.optimizer;
  opt.noise_multiplicity = cfg.noise_multiplicity;
  opt.ema_decay = cfg.ema_decay;
  opt.seed = cfg.seed;
  opt.conditional = cfg.conditional;
  opt.label_dropout = cfg.label_dropout;
  opt.chunk_size = cfg.chunk_size;
  // Thread count never changes results, so an override stays out of the snapshot.
  opt.threads = ResolveThreads(threads.value_or(cfg.threads));

  ojson privacy_json;
  std::optional<DpBudget> precheck;
  if (cfg.privacy) {
    const PrivacySection& ps = *cfg.privacy;
    double sigma = 0.0;
    if (ps.sigma_dp) {
      sigma = *ps.sigma_dp;
    } else {
      CalibrationOptions co;
      co.conversion = ps.conversion;
      try {
        sigma = CalibrateSigma({*ps.target_epsilon, ps.delta}, q, steps, co);
      } catch (const std::runtime_error& e) {
        throw UsageError(std::string("infeasible privacy target: ") + e.what());
      }
    }
    opt.privacy = {ps.clip, sigma, q, steps, ps.delta};
    precheck = ComputeEpsilon(sigma, q, steps, ps.delta, ps.conversion);
    std::printf("privacy pre-check: sigma_dp=%.6g q=%.6g steps=%lld delta=%g -> epsilon=%.6g"
                " (order %g, %s conversion)\n",
                sigma, q, static_cast<long long>(steps), ps.delta, precheck->epsilon,
                precheck->order, std::string(ConversionName(ps.conversion)).c_str());
  } else {
    opt.privacy = PrivacySpec::NonPrivate(q, steps);
    std::printf("privacy pre-check: non-private run, %lld steps\n",
                static_cast<long long>(steps));
  }
  opt.privacy.Validate();

  const fs::path dir =
      PrepareDir(ResolveOutputDir(out_override.empty() ? cfg.output_dir : out_override,
                                  "train-seed" + std::to_string(cfg.seed)));
  const std::vector<LabeledSample> data = SampleData(cfg.gmm, cfg.data_size, cfg.data_seed);

  std::ostringstream log_csv;
  CsvWriter log(log_csv, {"step", "loss_mean", "realized_B", "median_grad_norm",
                          "fraction_clipped"});
  const int64_t report_every = std::max<int64_t>(1, steps / 20);
  const TrainResult result = Train(data, opt, [&](const StepLog& s) {
    log.Add(static_cast<long long>(s.step))
        .Add(s.loss_mean)
        .Add(static_cast<long long>(s.realized_batch))
        .Add(s.median_grad_norm)
        .Add(s.fraction_clipped)
        .EndRow();
    if ((s.step + 1) % report_every == 0 || s.step + 1 == steps) {
      std::printf("step %lld/%lld loss %.5g batch %lld\n", static_cast<long long>(s.step + 1),
                  static_cast<long long>(steps), s.loss_mean,
                  static_cast<long long>(s.realized_batch));
      std::fflush(stdout);
    }
  });

  if (result.releases.releases != steps) {
    throw std::runtime_error("executed " + std::to_string(result.releases.releases) +
                             " steps but accounted for " + std::to_string(steps));
  }
  OutputFiles files;
  Checkpoint ckpt{cfg.dm, result.params, result.ema};
  const fs::path ckpt_tmp = dir / "checkpoint.bin.tmp";
  WriteCheckpoint(ckpt_tmp, ckpt);
  fs::rename(ckpt_tmp, dir / "checkpoint.bin");
  files.Add("checkpoint", dir / "checkpoint.bin");
  files.Add("training_log", WriteCsvFile(dir / "train_log.csv", log_csv.str()));

  ojson manifest = ManifestHeader("train", cfg.seed);
  manifest["config"] = ojson::parse(ToJson(cfg).dump());
  manifest["parameter_count"] = result.params.size();
  manifest["steps_executed"] = result.releases.releases;
  manifest["steps_accounted"] = steps;
  if (cfg.privacy) {
    const DpBudget post = ComputeEpsilon(result.releases.sigma_dp, result.releases.q,
                                         result.releases.releases, cfg.privacy->delta,
                                         cfg.privacy->conversion);
    if (post.epsilon != precheck->epsilon) {
      throw std::runtime_error("post-run privacy report disagrees with the pre-check");
    }
    manifest["privacy"] = {{"epsilon", post.epsilon},
                           {"delta", post.delta},
                           {"order", post.order},
                           {"conversion", ConversionName(cfg.privacy->conversion)},
                           {"sigma_dp", result.releases.sigma_dp},
                           {"clip", result.releases.clip_c},
                           {"q", result.releases.q},
                           {"releases", result.releases.releases}};
    std::printf("privacy: epsilon=%.6g at delta=%g\n", post.epsilon, post.delta);
  } else {
    manifest["privacy"] = {{"epsilon", "non-private"}};
  }
  WriteManifest(dir, manifest, files);
  std::printf("wrote %s\n", (dir / "manifest.json").string().c_str());
  return kExitOk;
}

// ------------------------------------------------------------------ sample

int CmdSample(const std::string& checkpoint, bool oracle, bool use_raw,
              const std::string& config_path, SamplerFlags f, const std::string& out_dir,
              bool svg) {
  const DenoiserSource src = LoadSource(checkpoint, oracle, use_raw, config_path);
  const BatchDenoiser d = BuildDenoiser(src, f);
  const ojson sampler_json = SamplerJson(f);
  const fs::path dir = PrepareDir(ResolveOutputDir(out_dir, "sample"));
  SamplerStats stats;
  const std::vector<Point2> x = RunSampler(d, f, &stats);
  OutputFiles files;
  files.Add("samples", WriteCsvFile(dir / "samples.csv", SamplesCsv(x, f.label)));
  if (svg) {
    WriteFileAtomic(dir / "samples.svg", ScatterSvg(x, src.gmm));
    files.Add("scatter_svg", dir / "samples.svg");
  }
  ojson manifest = ManifestHeader("sample", f.seed);
  manifest["source"] = oracle ? "oracle" : checkpoint;
  manifest["weights"] = oracle ? "analytic" : (use_raw ? "raw" : "ema");
  manifest["sampler"] = sampler_json;
  manifest["sigma_clamps"] = stats.sigma_clamps;
  ojson coverage;
  for (int h = 1; h <= 6; ++h) coverage[std::to_string(h)] = HVicinity(src.gmm, x, h);
  manifest["h_vicinity"] = coverage;
  WriteManifest(dir, manifest, files);
  std::printf("%lld samples -> %s (h=3 coverage %.4f, h=4 coverage %.4f)\n",
              static_cast<long long>(x.size()), (dir / "samples.csv").string().c_str(),
              HVicinity(src.gmm, x, 3), HVicinity(src.gmm, x, 4));
  if (stats.sigma_clamps > 0) {
    std::printf("note: %lld denoiser calls clamped the inflated noise level to sigma_max\n",
                static_cast<long long>(stats.sigma_clamps));
  }
  return kExitOk;
}

// -------------------------------------------------------- account/calibrate

struct AccountFlags {
  std::optional<double> q;
  std::optional<int64_t> batch;
  std::optional<int64_t> n;
  std::optional<double> epochs;
  std::optional<int64_t> steps;
  double delta = 1e-5;
  std::string conversion = "refined";
  std::string csv;
};

void AddAccountFlags(CLI::App* cmd, AccountFlags& f) {
  auto* q = cmd->add_option("--q", f.q, "subsampling rate");
  auto* b = cmd->add_option("--batch", f.batch, "expected batch size (with --n)");
  q->excludes(b);
  cmd->add_option("--n", f.n, "dataset size");
  auto* e = cmd->add_option("--epochs", f.epochs, "epochs; steps = epochs * round(n / B)");
  auto* s = cmd->add_option("--steps", f.steps, "number of releases");
  e->excludes(s);
  cmd->add_option("--delta", f.delta, "target delta");
  cmd->add_option("--conversion", f.conversion, "RDP to DP conversion")
      ->check(CLI::IsMember({"classic", "refined"}));
  cmd->add_option("--csv", f.csv, "write the RDP curve to this CSV file");
}

struct Accounting {
  double q;
  int64_t steps;
  double delta;
  Conversion conversion;
};

Accounting ResolveAccounting(const AccountFlags& f) {
  Accounting a{};
  if (f.q) {
    a.q = *f.q;
  } else {
    Require(f.batch && f.n, "give --q, or --batch together with --n");
    Require(*f.n >= 1, "--n must be >= 1");
    a.q = static_cast<double>(*f.batch) / static_cast<double>(*f.n);
  }
  Require(a.q > 0 && a.q <= 1, "subsampling rate must lie in (0, 1]");
  if (f.steps) {
    a.steps = *f.steps;
  } else {
    Require(f.epochs.has_value(), "give --epochs or --steps");
    Require(f.n.has_value(), "--epochs needs --n");
    Require(*f.epochs >= 0, "--epochs must be >= 0");
    a.steps = StepsForEpochs(*f.epochs, *f.n, a.q * static_cast<double>(*f.n));
  }
  Require(a.steps >= 0, "steps must be >= 0");
  Require(f.delta > 0 && f.delta < 1, "--delta must lie in (0, 1)");
  a.delta = f.delta;
  a.conversion = ParseConversion(f.conversion);
  return a;
}

void WriteCurveCsv(const std::string& path, double sigma, const Accounting& a) {
  if (path.empty()) return;
  const std::vector<double> orders = DefaultOrders();
  const RdpCurve curve = Compose(SubsampledGaussianCurve(a.q, sigma, orders), a.steps);
  std::ostringstream out;
  CsvWriter w(out, {"order", "rdp_epsilon", "dp_epsilon"});
  for (const RdpPoint& p : curve) {
    const double eps = a.steps == 0 ? 0.0 : ToDp({p}, a.delta, a.conversion).epsilon;
    w.Add(p.order).Add(p.epsilon).Add(eps).EndRow();
  }
  const fs::path file(path);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  WriteFileAtomic(file, out.str());
}

int CmdAccount(double sigma, const AccountFlags& f) {
  Require(sigma > 0, "--sigma must be > 0");
  const Accounting a = ResolveAccounting(f);
  const DpBudget b = ComputeEpsilon(sigma, a.q, a.steps, a.delta, a.conversion);
  std::printf("sigma=%.6g q=%.6g steps=%lld delta=%g conversion=%s\n", sigma, a.q,
              static_cast<long long>(a.steps), a.delta,
              std::string(ConversionName(a.conversion)).c_str());
  if (a.steps == 0) {
    std::printf("epsilon=0 (no releases)\n");
  } else {
    std::printf("epsilon=%.6g (order %g)\n", b.epsilon, b.order);
  }
  WriteCurveCsv(f.csv, sigma, a);
  return kExitOk;
}

int CmdCalibrate(double target, const AccountFlags& f) {
  Require(target > 0, "--target-eps must be > 0");
  const Accounting a = ResolveAccounting(f);
  CalibrationOptions co;
  co.conversion = a.conversion;
  double sigma = 0.0;
  try {
    sigma = CalibrateSigma({target, a.delta}, a.q, a.steps, co);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  const DpBudget b = ComputeEpsilon(sigma, a.q, a.steps, a.delta, a.conversion);
  std::printf("target epsilon=%.6g q=%.6g steps=%lld delta=%g conversion=%s\n", target, a.q,
              static_cast<long long>(a.steps), a.delta,
              std::string(ConversionName(a.conversion)).c_str());
  std::printf("sigma=%.6g (achieved epsilon=%.6g at order %g)\n", sigma, b.epsilon, b.order);
  WriteCurveCsv(f.csv, sigma, a);
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalFlags {
  std::string metric;
  std::string checkpoint;
  bool oracle = false;
  bool use_raw = false;
  std::string config;
  std::string samples;
  std::string sigmas = "0.005,0.02,0.1,0.5,1,2,5";
  int64_t n_mc = 2000;
  bool end_to_end = false;
  int e2e_steps = 100;
  int64_t e2e_n = 100000;
  std::string ks = "1,2,4,8,16,32";
  int reseeds = 1000;
  int loss_reseeds = 10000;
  int64_t data_n = 1000000;
  uint64_t seed = 0;
  std::string out_dir;
  bool svg = false;
};

int EvalVicinity(const EvalFlags& e, SamplerFlags f) {
  std::vector<Point2> x;
  GmmSpec gmm = GmmSpec::Default9();
  if (!e.config.empty()) gmm = LoadConfig(e.config).gmm;
  std::string source;
  if (!e.samples.empty()) {
    Require(!e.oracle && e.checkpoint.empty(),
            "--samples excludes --oracle and --checkpoint");
    x = ReadSamplesCsv(e.samples);
    source = e.samples;
  } else if (e.oracle) {
    Require(e.data_n >= 1, "--data-n must be >= 1");
    for (const LabeledSample& s : SampleData(gmm, e.data_n, e.seed)) x.push_back(s.point);
    source = "data";
  } else {
    const DenoiserSource src = LoadSource(e.checkpoint, false, e.use_raw, e.config);
    if (!f.steps && f.kind == "ddim-det") f.steps = 100;
    x = RunSampler(BuildDenoiser(src, f), f, nullptr);
    source = e.checkpoint;
  }
  const fs::path dir = PrepareDir(ResolveOutputDir(e.out_dir, "eval"));
  OutputFiles files;
  files.Add("vicinity", WriteCsvFile(dir / "vicinity.csv", VicinityCsv(gmm, x)));
  ojson manifest = ManifestHeader("eval", e.seed);
  manifest["metric"] = "vicinity";
  manifest["source"] = source;
  manifest["points"] = x.size();
  WriteManifest(dir, manifest, files);
  std::printf("h  fraction  gaussian_reference\n");
  for (int h = 1; h <= 6; ++h) {
    std::printf("%d  %.4f    %.4f\n", h, HVicinity(gmm, x, h), GaussianDiskMass(h));
  }
  return kExitOk;
}

int EvalComplexity(const EvalFlags& e) {
  const DenoiserSource src = LoadSource(e.checkpoint, e.oracle, e.use_raw, e.config);
  const std::vector<double> sigmas = ParseDoubleList(e.sigmas);
  Require(e.n_mc >= 2, "--n-mc must be >= 2");
  JacobianFn jac;
  if (src.weights) {
    const DenoiserParams& p = *src.weights;
    const DmConfig cfg = src.dm;
    jac = [&p, cfg](Point2 x, double s) { return InputJacobian(p, cfg, x, s); };
  } else {
    const GmmSpec gmm = src.gmm;
    jac = [gmm](Point2 x, double s) { return IdealDenoiserJacobian(gmm, x, s); };
  }
  std::ostringstream out;
  CsvWriter w(out, {"kind", "sigma", "estimate", "stderr"});
  std::printf("sigma  J_F  stderr\n");
  for (double s : sigmas) {
    Require(s > 0, "sigmas must be > 0");
    const McEstimate est = JacobianFrobeniusDenoiser(jac, src.gmm, s, e.n_mc, e.seed);
    w.Add("denoiser").Add(s).Add(est.estimate).Add(est.std_error).EndRow();
    std::printf("%g  %.6g  %.3g\n", s, est.estimate, est.std_error);
  }
  if (e.end_to_end) {
    SamplerFlags f;
    f.steps = e.e2e_steps;
    const ScheduleSpec sched = ScheduleFrom(f);
    const BatchDenoiser d = BuildDenoiser(src, f);
    const SamplerMap map{[&](std::span<const Point2> x) {
                           return DdimFromInitial(d, sched, false, x);
                         },
                         true};
    const McEstimate est = JacobianFrobeniusEndToEnd(map, sched.sigma_max, e.e2e_n, e.seed);
    w.Add("end_to_end").Add(std::nan("")).Add(est.estimate).Add(est.std_error).EndRow();
    std::printf("end-to-end (deterministic DDIM-%d): %.6g  %.3g\n", sched.steps,
                est.estimate, est.std_error);
  }
  const fs::path dir = PrepareDir(ResolveOutputDir(e.out_dir, "eval"));
  OutputFiles files;
  files.Add("complexity", WriteCsvFile(dir / "complexity.csv", out.str()));
  ojson manifest = ManifestHeader("eval", e.seed);
  manifest["metric"] = "complexity";
  manifest["source"] = e.oracle ? "oracle" : e.checkpoint;
  manifest["n_mc"] = e.n_mc;
  WriteManifest(dir, manifest, files);
  return kExitOk;
}

int EvalVariance(const EvalFlags& e) {
  DmConfig cfg = DmConfig::Make(DmKind::kEdm);
  std::optional<DenoiserParams> params;
  GmmSpec gmm = GmmSpec::Default9();
  if (!e.config.empty()) gmm = LoadConfig(e.config).gmm;
  Require(!e.oracle, "the variance metric needs network parameters, not --oracle");
  if (!e.checkpoint.empty()) {
    const DenoiserSource src = LoadSource(e.checkpoint, false, e.use_raw, e.config);
    cfg = src.dm;
    params = *src.weights;
  } else {
    Architecture arch;
    arch.num_classes = gmm.num_components();
    params = DenoiserParams::Initialize(arch, e.seed);
  }
  std::vector<int> ks;
  for (double k : ParseDoubleList(e.ks)) {
    Require(k >= 1 && k == std::floor(k), "K values must be positive integers");
    ks.push_back(static_cast<int>(k));
  }
  Require(e.loss_reseeds >= 2, "--loss-reseeds must be >= 2");
  const LabeledSample x{SampleData(gmm, 1, e.seed)[0].point, kNullLabel};
  VarianceReport report;
  try {
    report = GradientVarianceExperiment(*params, cfg, x, ks, e.reseeds, e.seed);
  } catch (const std::invalid_argument& err) {
    throw UsageError(err.what());
  }
  std::vector<double> kd, loss_var;
  std::ostringstream summary, hist;
  CsvWriter ws(summary, {"K", "mean_grad_variance", "loss_variance"});
  CsvWriter wh(hist, {"K", "bin_lo", "bin_hi", "count"});
  std::printf("K  mean_grad_variance  loss_variance\n");
  for (const VarianceRow& row : report.rows) {
    const double lv = LossVariance(*params, cfg, x, row.K, e.loss_reseeds, e.seed);
    kd.push_back(row.K);
    loss_var.push_back(lv);
    ws.Add(row.K).Add(row.mean_variance).Add(lv).EndRow();
    for (size_t b = 0; b < row.counts.size(); ++b) {
      wh.Add(row.K)
          .Add(row.bin_edges[b])
          .Add(row.bin_edges[b + 1])
          .Add(static_cast<long long>(row.counts[b]))
          .EndRow();
    }
    std::printf("%d  %.6g  %.6g\n", row.K, row.mean_variance, lv);
  }
  const fs::path dir = PrepareDir(ResolveOutputDir(e.out_dir, "eval"));
  OutputFiles files;
  files.Add("variance", WriteCsvFile(dir / "variance.csv", summary.str()));
  files.Add("variance_histogram", WriteCsvFile(dir / "variance_histogram.csv", hist.str()));
  if (e.svg) {
    WriteFileAtomic(dir / "variance.svg", LogLogSvg(kd, loss_var, "K", "Var loss"));
    files.Add("variance_svg", dir / "variance.svg");
  }
  ojson manifest = ManifestHeader("eval", e.seed);
  manifest["metric"] = "variance";
  manifest["source"] = e.checkpoint.empty() ? "initialization" : e.checkpoint;
  manifest["reseeds"] = e.reseeds;
  manifest["loss_reseeds"] = e.loss_reseeds;
  if (kd.size() >= 2) {
    const double slope = LogLogSlope(kd, loss_var);
    manifest["loss_variance_slope"] = slope;
    std::printf("log-log slope of loss variance vs K: %.4f\n", slope);
  }
  WriteManifest(dir, manifest, files);
  return kExitOk;
}

// ------------------------------------------------------------- oracle-info

int CmdOracleInfo(const std::string& config_path) {
  GmmSpec gmm = GmmSpec::Default9();
  Architecture arch;
  if (!config_path.empty()) {
    const ExperimentConfig cfg = LoadConfig(config_path);
    gmm = cfg.gmm;
    arch = cfg.arch;
  }
  ojson j;
  ojson means = ojson::array();
  for (const Point2& m : gmm.means) means.push_back({m.x, m.y});
  j["gmm"] = {{"components", gmm.num_components()},
              {"component_std", gmm.component_std},
              {"means", means},
              {"weights", gmm.weights}};
  ojson vicinity;
  for (int h = 1; h <= 6; ++h) vicinity[std::to_string(h)] = GaussianDiskMass(h);
  j["exact_data_h_vicinity"] = vicinity;
  ojson kinds;
  for (DmKind k : {DmKind::kVp, DmKind::kVe, DmKind::kVPred, DmKind::kEdm}) {
    const DmConfig c = DmConfig::Make(k);
    ojson kj;
    switch (k) {
      case DmKind::kVp:
        kj = {{"beta_d", c.beta_d}, {"beta_min", c.beta_min}, {"eps_t", c.eps_t},
              {"m_disc", c.m_disc}};
        break;
      case DmKind::kVe:
        kj = {{"sigma_min", c.sigma_min}, {"sigma_max", c.sigma_max}};
        break;
      case DmKind::kVPred:
        kj = {{"eps_min", c.eps_min}, {"eps_max", c.eps_max}};
        break;
      case DmKind::kEdm:
        kj = {{"p_mean", c.p_mean}, {"p_std", c.p_std}, {"sigma_data", c.sigma_data}};
        break;
    }
    kinds[std::string(DmKindName(k))] = kj;
  }
  j["dm_configs"] = kinds;
  j["architecture"] = {{"depth", arch.depth},
                       {"width", arch.width},
                       {"fourier_freqs", arch.fourier_freqs},
                       {"embed_dim", arch.embed_dim},
                       {"num_classes", arch.num_classes},
                       {"parameters", arch.ParameterCount()}};
  j["version"] = DPDM_VERSION;
  std::printf("%s\n", j.dump(2).c_str());
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"Differentially private diffusion models on a 2D Gaussian-mixture toy"};
  app.set_version_flag("--version", DPDM_VERSION);
  app.require_subcommand(1);

  std::string train_config, train_out;
  std::optional<int> train_threads;
  auto* train = app.add_subcommand("train", "train a denoiser with DP-SGD");
  train->add_option("config", train_config, "experiment config (JSON)")->required();
  train->add_option("--out-dir", train_out, "output directory (overrides run.output_dir)");
  train->add_option("--threads", train_threads, "worker threads (0 = all cores)");

  SamplerFlags sample_flags;
  std::string sample_ckpt, sample_config, sample_out;
  bool sample_oracle = false, sample_raw = false, sample_svg = false;
  auto* sample = app.add_subcommand("sample", "generate samples from a checkpoint or oracle");
  sample->add_option("--checkpoint", sample_ckpt, "checkpoint file");
  sample->add_flag("--oracle", sample_oracle, "use the analytic denoiser");
  sample->add_flag("--use-raw", sample_raw, "use raw instead of EMA weights");
  sample->add_option("--config", sample_config, "config supplying the mixture for --oracle");
  sample->add_option("--out-dir", sample_out, "output directory");
  sample->add_flag("--svg", sample_svg, "also write a scatter plot");
  AddSamplerFlags(sample, sample_flags);

  double account_sigma = 0.0;
  AccountFlags account_flags;
  auto* account = app.add_subcommand("account", "privacy cost of a DP-SGD run");
  account->add_option("--sigma", account_sigma, "DP noise multiplier")->required();
  AddAccountFlags(account, account_flags);

  double target_eps = 0.0;
  AccountFlags calib_flags;
  auto* calibrate = app.add_subcommand("calibrate", "noise multiplier for a target epsilon");
  calibrate->add_option("--target-eps", target_eps, "target epsilon")->required();
  AddAccountFlags(calibrate, calib_flags);

  EvalFlags eval_flags;
  SamplerFlags eval_sampler;
  auto* eval = app.add_subcommand("eval", "evaluation metrics");
  eval->add_option("--metric", eval_flags.metric, "vicinity | complexity | variance")
      ->required()
      ->check(CLI::IsMember({"vicinity", "complexity", "variance"}));
  eval->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint file");
  eval->add_flag("--oracle", eval_flags.oracle, "use the analytic denoiser / exact data");
  eval->add_flag("--use-raw", eval_flags.use_raw, "use raw instead of EMA weights");
  eval->add_option("--config", eval_flags.config, "config supplying the mixture");
  eval->add_option("--samples", eval_flags.samples, "samples CSV to score (vicinity)");
  eval->add_option("--data-n", eval_flags.data_n, "exact data points for --oracle vicinity");
  eval->add_option("--sigmas", eval_flags.sigmas, "comma-separated noise levels");
  eval->add_option("--n-mc", eval_flags.n_mc, "Monte-Carlo points per noise level");
  eval->add_flag("--end-to-end", eval_flags.end_to_end,
                 "also measure the deterministic DDIM end-to-end map");
  eval->add_option("--e2e-steps", eval_flags.e2e_steps, "DDIM steps for --end-to-end");
  eval->add_option("--e2e-n", eval_flags.e2e_n, "latents for --end-to-end");
  eval->add_option("--K", eval_flags.ks, "comma-separated noise multiplicities");
  eval->add_option("--reseeds", eval_flags.reseeds, "reseeds for gradient variance");
  eval->add_option("--loss-reseeds", eval_flags.loss_reseeds, "reseeds for loss variance");
  eval->add_option("--eval-seed", eval_flags.seed, "Monte-Carlo seed");
  eval->add_option("--out-dir", eval_flags.out_dir, "output directory");
  eval->add_flag("--svg", eval_flags.svg, "also write plots");
  AddSamplerFlags(eval, eval_sampler);

  std::string info_config;
  auto* info = app.add_subcommand("oracle-info", "describe the mixture and defaults");
  info->add_option("--config", info_config, "config supplying the mixture");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*train) return CmdTrain(train_config, train_out, train_threads);
    if (*sample) {
      if (!sample_config.empty()) {
        ApplySamplerDefaults(*sample, LoadConfig(sample_config).sampler, sample_flags);
      }
      return CmdSample(sample_ckpt, sample_oracle, sample_raw, sample_config, sample_flags,
                       sample_out, sample_svg);
    }
    if (*account) return CmdAccount(account_sigma, account_flags);
    if (*calibrate) return CmdCalibrate(target_eps, calib_flags);
    if (*eval) {
      if (eval_flags.metric == "vicinity") return EvalVicinity(eval_flags, eval_sampler);
      if (eval_flags.metric == "complexity") return EvalComplexity(eval_flags);
      return EvalVariance(eval_flags);
    }
    if (*info) return CmdOracleInfo(info_config);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace
}  // namespace dpdm::cli

int main(int argc, char** argv) { return dpdm::cli::Main(argc, argv); }
