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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "dpdm/accountant.h"
#include "dpdm/denoiser.h"
#include "dpdm/dm_config.h"
#include "dpdm/dp_sgd.h"
#include "dpdm/experiment_config.h"
#include "dpdm/gmm_oracle.h"
#include "dpdm/metrics.h"
#include "dpdm/parallel.h"
#include "dpdm/rng.h"
#include "dpdm/samplers.h"
#include "oracles.h"

namespace dpdm {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void Check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

std::vector<Point2> Points(const std::vector<LabeledSample>& s) {
  std::vector<Point2> out;
  out.reserve(s.size());
  for (const LabeledSample& v : s) out.push_back(v.point);
  return out;
}

// ---------------------------------------------------------------- criteria

Outcome AccountantTable() {
  Outcome o;
  const double q = 4096.0 / 60000.0;
  const int64_t steps = StepsForEpochs(300, 60000, 4096);
  o.Check(steps == 4500, "T=" + std::to_string(steps));
  const double eps1 = ComputeEpsilon(18.28125, q, steps, 1e-5).epsilon;
  const double eps10 = ComputeEpsilon(2.48779, q, steps, 1e-5).epsilon;
  o.Check(eps1 >= 0.85 && eps1 <= 1.15, Fmt("eps(18.28125)=%.4f", eps1));
  o.Check(eps10 >= 8.5 && eps10 <= 11.5, Fmt("eps(2.48779)=%.4f", eps10));
  const double s1 = CalibrateSigma({1.0, 1e-5}, q, steps);
  const double s10 = CalibrateSigma({10.0, 1e-5}, q, steps);
  o.Check(std::abs(s1 / 18.28125 - 1) <= 0.1, Fmt("calibrated sigma(eps=1)=%.4f", s1));
  o.Check(std::abs(s10 / 2.48779 - 1) <= 0.1, Fmt("calibrated sigma(eps=10)=%.4f", s10));
  return o;
}

Outcome RdpQuadrature() {
  Outcome o;
  const int alphas[] = {2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 24, 32, 2, 3, 5, 8, 12, 16, 24, 32};
  CounterRng rng(2024, StreamTag::kMonteCarlo);
  double worst_exact = 0.0;
  int matched = 0, bounded = 0;
  for (int alpha : alphas) {
    const double q = std::exp(std::log(1e-3) + rng.Uniform() * (std::log(0.5) - std::log(1e-3)));
    const double sigma = 0.8 + 4.2 * rng.Uniform();
    const double bound = RdpSubsampledGaussian(alpha, q, sigma);
    const double oracle = testing::SubsampledRdpQuadrature(alpha, q, sigma);
    const double err = std::abs(bound - oracle);
    if (err <= 1e-6) {
      ++matched;
      worst_exact = std::max(worst_exact, err);
    } else if (bound >= oracle && bound - oracle <= 1e-3) {
      ++bounded;
    } else {
      o.Check(false, Fmt("alpha=%g q=%.4g sigma=%.3g: bound %.8g vs quadrature %.8g", alpha, q,
                         sigma, bound) + Fmt(" (%.8g)", oracle));
    }
  }
  o.Check(matched + bounded == 20,
          Fmt("%g/20 within 1e-6 (max err %.2e), %g loose-but-valid", matched, worst_exact,
              bounded));
  return o;
}

Architecture SmallArch() {
  Architecture a;
  a.depth = 2;
  a.width = 32;
  a.fourier_freqs = 8;
  a.embed_dim = 8;
  return a;
}

DenoiserParams PerturbedParams(const Architecture& arch, uint64_t seed, double scale) {
  DenoiserParams p = DenoiserParams::Initialize(arch, seed);
  CounterRng rng(seed, StreamTag::kMonteCarlo, {77});
  for (Eigen::Index i = 0; i < p.size(); ++i) p.values(i) += scale * rng.Normal();
  return p;
}

Outcome VarianceScaling() {
  Outcome o;
  const DenoiserParams p = PerturbedParams(SmallArch(), 7, 0.1);
  const DmConfig cfg = DmConfig::Make(DmKind::kEdm);
  const LabeledSample x{{-0.3, 0.5}, kNullLabel};
  std::vector<double> ks, vars;
  for (int k : {1, 2, 4, 8, 16, 32}) {
    ks.push_back(k);
    vars.push_back(LossVariance(p, cfg, x, k, 10000, 7));
  }
  const double slope = LogLogSlope(ks, vars);
  o.Check(std::abs(slope + 1) <= 0.15, Fmt("loss-variance slope %.4f", slope));
  const double ratio = vars[4] / vars[0];
  o.Check(ratio >= 1.0 / 24 && ratio <= 1.0 / 10,
          Fmt("Var(K=16)/Var(K=1)=1/%.2f", 1.0 / ratio));
  const std::vector<int> grad_ks = {1, 16};
  const VarianceReport g = GradientVarianceExperiment(p, cfg, x, grad_ks, 1000, 7);
  const double gratio = g.rows[1].mean_variance / g.rows[0].mean_variance;
  o.Check(gratio >= 1.0 / 24 && gratio <= 1.0 / 10,
          Fmt("gradient variance K=16/K=1 = 1/%.2f", 1.0 / gratio));
  return o;
}

Outcome Sensitivity() {
  Outcome o;
  Architecture arch = SmallArch();
  arch.width = 16;
  const DmConfig cfg = DmConfig::Make(DmKind::kEdm);
  const GmmSpec spec = GmmSpec::Default9();
  CounterRng rng(8, StreamTag::kMonteCarlo);
  double worst_excess = -1e300, worst_row = 0.0;
  for (int t = 0; t < 100; ++t) {
    const DenoiserParams p = PerturbedParams(arch, t, 0.2);
    const int rows = 2 + t % 15;
    const auto data = SampleData(spec, rows + 1, 100 + t);
    std::vector<uint64_t> ids(rows + 1);
    for (int i = 0; i <= rows; ++i) ids[i] = i;
    const NoiseKey key{static_cast<uint64_t>(t), 0};
    const auto full = PerSampleLossAndGrads(p, cfg, data, ids, 2, key);
    const auto part = PerSampleLossAndGrads(p, cfg, std::span(data).first(rows),
                                            std::span(ids).first(rows), 2, key);
    const double c = 0.05 + rng.Uniform();
    const double b = 0.5 * rows + 1;
    const double diff =
        (ClippedAverage(full.grads, c, b) - ClippedAverage(part.grads, c, b)).norm();
    worst_excess = std::max(worst_excess, diff - c / b);
    for (Eigen::Index i = 0; i < full.grads.rows(); ++i) {
      worst_row = std::max(worst_row, Clip(full.grads.row(i).transpose(), c).norm() / c);
    }
  }
  o.Check(worst_excess <= 1e-9, Fmt("max ||dG|| - C/B = %.3e", worst_excess));
  o.Check(worst_row <= 1 + 1e-12, Fmt("max clipped row norm / C = %.15f", worst_row));
  return o;
}

Outcome SamplerCoverage() {
  Outcome o;
  const GmmSpec spec = GmmSpec::Default9();
  const int64_t n = 100000;
  SamplerOptions opt;
  opt.seed = 5;
  opt.threads = ResolveThreads(0);
  const auto ddim = DdimSample(OracleDenoiser(spec), ScheduleSpec{1000}, true, n, opt);
  const double d3 = HVicinity(spec, ddim, 3), d4 = HVicinity(spec, ddim, 4);
  o.Check(d3 >= 0.97 && d4 >= 0.995, Fmt("stochastic DDIM-1000 h3=%.4f h4=%.4f", d3, d4));
  ChurnSpec churn;
  churn.s_churn = 50;
  const auto heun = ChurnSample(OracleDenoiser(spec), ScheduleSpec{100}, churn, n, opt);
  const double c3 = HVicinity(spec, heun, 3), c4 = HVicinity(spec, heun, 4);
  o.Check(c3 >= 0.97 && c4 >= 0.995, Fmt("Churn-100 (S_churn=50) h3=%.4f h4=%.4f", c3, c4));

  const int64_t m = 1000000;
  const auto data = Points(SampleData(spec, m, 11));
  const double reference[] = {0.394, 0.865, 0.989};
  std::string line = "exact data";
  bool ok = true;
  for (int h = 1; h <= 3; ++h) {
    const double f = HVicinity(spec, data, h);
    const double p = GaussianDiskMass(h);
    const double se = std::sqrt(p * (1 - p) / m);
    // The printed reference carries three significant digits.
    ok = ok && std::abs(f - p) <= 3 * se && std::abs(f - reference[h - 1]) <= 3 * se + 5e-4;
    line += Fmt(" h%g=%.4f", h, f);
  }
  o.Check(ok, line + " (3 SE of 39.4/86.5/98.9)");
  return o;
}

Outcome FlowExactness() {
  Outcome o;
  const Point2 mu{0.3, -0.2};
  const double s0 = 0.04;
  const GmmSpec g = GmmSpec::SingleGaussian(mu, s0);
  auto worst_error = [&](const std::vector<Point2>& x0, const std::vector<Point2>& out) {
    double worst = 0.0;
    for (size_t i = 0; i < x0.size(); ++i) {
      const Point2 flow = testing::GaussianFlow(mu, s0, x0[i], 80, 0.002);
      const Point2 expected = testing::GaussianPosteriorMean(mu, s0, flow, 0.002);
      worst = std::max(worst, (out[i] - expected).Norm());
    }
    return worst;
  };
  const ScheduleSpec s200{200, 0.002, 80, 7};
  const auto x0 = InitialParticles(1000, 80, 4);
  const double ddim = worst_error(x0, DdimFromInitial(OracleDenoiser(g), s200, false, x0));
  o.Check(ddim < 1e-2, Fmt("DDIM-200 max error %.2e", ddim));
  const ScheduleSpec s100{100, 0.002, 80, 7};
  const auto heun_out = ChurnFromInitial(OracleDenoiser(g), s100, ChurnSpec{}, x0);
  const double heun = worst_error(x0, heun_out);
  o.Check(heun < 1e-3, Fmt("Churn-100 (S_churn=0) max error %.2e", heun));
  const double ddim100 = worst_error(x0, DdimFromInitial(OracleDenoiser(g), s100, false, x0));
  o.Check(heun < ddim100, Fmt("Heun beats DDIM-100 (%.2e)", ddim100));
  return o;
}

Outcome Identities() {
  Outcome o;
  const GmmSpec spec = GmmSpec::Default9();
  CounterRng rng(11, StreamTag::kMonteCarlo);
  double fd = 0, ident = 0, from_denoiser = 0;
  auto logp = [&](Point2 x, double s) { return LogPerturbedDensity(spec, x, s); };
  auto ideal = [&](Point2 x, double s) { return IdealDenoiser(spec, x, s); };
  for (int i = 0; i < 200; ++i) {
    const Point2 x{2 * rng.Uniform() - 1, 2 * rng.Uniform() - 1};
    const double s =
        std::exp(std::log(0.002) + rng.Uniform() * (std::log(80.0) - std::log(0.002)));
    const Point2 score = AnalyticScore(spec, x, s);
    // Fourth-order central differences; step chosen for truncation vs rounding balance.
    const double h = 2e-4;
    auto d = [&](Point2 e) {
      return (-logp(x + 2 * h * e, s) + 8 * logp(x + h * e, s) - 8 * logp(x - h * e, s) +
              logp(x - 2 * h * e, s)) /
             (12 * h);
    };
    fd = std::max({fd, std::abs(d({1, 0}) - score.x), std::abs(d({0, 1}) - score.y)});
    const Point2 lhs = IdealDenoiser(spec, x, s) - x;
    const Point2 rhs = (s * s) * score;
    ident = std::max({ident, std::abs(lhs.x - rhs.x), std::abs(lhs.y - rhs.y)});
    const Point2 via = ScoreFromDenoiser(ideal, x, s);
    from_denoiser = std::max(from_denoiser, (via - score).Norm() / std::max(1.0, score.Norm()));
  }
  o.Check(fd < 1e-5, Fmt("score vs FD %.2e", fd));
  o.Check(ident < 1e-12, Fmt("D-x vs sigma^2 score %.2e", ident));
  o.Check(from_denoiser < 1e-10, Fmt("score from ideal denoiser %.2e", from_denoiser));
  return o;
}

Outcome PerSampleAutodiff() {
  Outcome o;
  Architecture arch;
  arch.depth = 2;
  arch.width = 8;
  arch.fourier_freqs = 4;
  arch.embed_dim = 4;
  arch.num_classes = 3;
  const std::vector<LabeledSample> batch = {
      {{0.5, -0.2}, 0}, {{-0.7, 0.1}, kNullLabel}, {{0.05, 0.66}, 2}};
  const std::vector<uint64_t> ids = {0, 1, 2};
  double worst_fd = 0.0;
  for (DmKind kind : {DmKind::kEdm, DmKind::kVp, DmKind::kVe, DmKind::kVPred}) {
    const DmConfig cfg = DmConfig::Make(kind);
    DenoiserParams p = PerturbedParams(arch, 8, 0.3);
    const NoiseKey key{21, 3};
    const PerSampleResult r = PerSampleLossAndGrads(p, cfg, batch, ids, 2, key);
    CounterRng rng(8, StreamTag::kMonteCarlo, {3});
    std::vector<Eigen::Index> picks;
    for (int t = 0; t < 20; ++t) picks.push_back(static_cast<Eigen::Index>(rng.Uniform() * p.size()));
    for (int i = 0; i < 3; ++i) {
      const std::span<const LabeledSample> one(&batch[i], 1);
      const std::span<const uint64_t> one_id(&ids[i], 1);
      double err2 = 0, ref2 = 0;
      for (Eigen::Index j : picks) {
        const double saved = p.values(j);
        const double h = 1e-6 * std::max(1.0, std::abs(saved));
        p.values(j) = saved + h;
        const double up = PerSampleLosses(p, cfg, one, one_id, 2, key)[0];
        p.values(j) = saved - h;
        const double dn = PerSampleLosses(p, cfg, one, one_id, 2, key)[0];
        p.values(j) = saved;
        const double g = (up - dn) / (2 * h);
        err2 += (g - r.grads(i, j)) * (g - r.grads(i, j));
        ref2 += g * g;
      }
      worst_fd = std::max(worst_fd, std::sqrt(err2 / ref2));
    }
  }
  o.Check(worst_fd < 1e-4, Fmt("rows vs FD relative error %.2e", worst_fd));

  const Architecture full;
  const DenoiserParams p = PerturbedParams(full, 10, 0.3);
  const DmConfig cfg = DmConfig::Make(DmKind::kEdm);
  std::vector<LabeledSample> big;
  std::vector<uint64_t> big_ids;
  CounterRng rng(10, StreamTag::kMonteCarlo, {4});
  for (int i = 0; i < 40; ++i) {
    big.push_back({{rng.Normal(), rng.Normal()}, i % 10 == 9 ? kNullLabel : i % 9});
    big_ids.push_back(100 + 3 * i);
  }
  const NoiseKey key{5, 77};
  const auto r = PerSampleLossAndGrads(p, cfg, big, big_ids, 3, key);
  Eigen::VectorXd summed;
  SummedLossAndGradient(p, cfg, big, big_ids, 3, key, &summed);
  const double rel = (Eigen::VectorXd(r.grads.colwise().sum().transpose()) - summed).norm() /
                     summed.norm();
  o.Check(rel < 1e-10, Fmt("row sum vs batch gradient %.2e", rel));
  return o;
}

Outcome Complexity() {
  Outcome o;
  const GmmSpec spec = GmmSpec::Default9();
  const JacobianFn jac = [&](Point2 x, double s) { return IdealDenoiserJacobian(spec, x, s); };
  const double sigmas[] = {0.005, 0.02, 0.1, 0.5, 1, 2, 5};
  std::vector<double> jf;
  std::string line = "J_F:";
  for (double s : sigmas) {
    jf.push_back(JacobianFrobeniusDenoiser(jac, spec, s, 2000, 3).estimate);
    line += Fmt(" %g->%.4g", s, jf.back());
  }
  o.Check(jf[4] > jf[5] && jf[5] > jf[6] && jf[6] < 0.01, line);
  const ScheduleSpec sched{100};
  const SamplerMap map{[&](std::span<const Point2> x) {
                         return DdimFromInitial(OracleDenoiser(spec), sched, false, x);
                       },
                       true};
  const McEstimate e2e = JacobianFrobeniusEndToEnd(map, sched.sigma_max, 100000, 3);
  const double peak = *std::max_element(jf.begin(), jf.end());
  o.Check(e2e.estimate >= 10 * peak,
          Fmt("end-to-end DDIM-100 J_F %.4g +- %.2g vs 10 x max per-sigma %.4g", e2e.estimate,
              e2e.std_error, 10 * peak));
  return o;
}

TrainOptions OptionsFrom(const ExperimentConfig& cfg) {
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
  opt.threads = ResolveThreads(0);
  const int64_t steps = cfg.total_steps();
  const double q = cfg.subsample_rate();
  if (!cfg.privacy) {
    opt.privacy = PrivacySpec::NonPrivate(q, steps);
  } else {
    const PrivacySection& ps = *cfg.privacy;
    CalibrationOptions co;
    co.conversion = ps.conversion;
    const double sigma =
        ps.sigma_dp ? *ps.sigma_dp : CalibrateSigma({*ps.target_epsilon, ps.delta}, q, steps, co);
    opt.privacy = {ps.clip, sigma, q, steps, ps.delta};
  }
  return opt;
}

std::vector<Point2> SampleEma(const TrainResult& r, const TrainOptions& opt, int64_t n) {
  DenoiserParams ema(r.params.arch);
  ema.values = r.ema.shadow;
  SamplerOptions so;
  so.seed = 1;
  so.threads = opt.threads;
  return DdimSample(NetworkDenoiser(ema, opt.dm), ScheduleSpec{100}, false, n, so);
}

Outcome EndToEndTraining() {
  Outcome o;
  const GmmSpec spec = GmmSpec::Default9();
  {
    const ExperimentConfig cfg = LoadConfig(DPDM_SOURCE_DIR "/configs/toy_nonprivate.json");
    const TrainOptions opt = OptionsFrom(cfg);
    const auto data = SampleData(cfg.gmm, cfg.data_size, cfg.data_seed);
    const TrainResult r = Train(data, opt);
    const auto x = SampleEma(r, opt, 10000);
    const double h3 = HVicinity(spec, x, 3);
    o.Check(opt.privacy.total_steps == 5000 && h3 >= 0.90,
            Fmt("non-private %g steps: DDIM-100 h3=%.4f", opt.privacy.total_steps, h3));
  }
  {
    const ExperimentConfig cfg = LoadConfig(DPDM_SOURCE_DIR "/configs/toy_dp_eps10.json");
    const TrainOptions opt = OptionsFrom(cfg);
    const DpBudget eps = ComputeEpsilon(opt.privacy.sigma_dp, opt.privacy.q,
                                        opt.privacy.total_steps, opt.privacy.delta);
    const auto data = SampleData(cfg.gmm, cfg.data_size, cfg.data_seed);
    const TrainResult r = Train(data, opt);
    const bool finite = r.params.AllFinite() && r.ema.shadow.allFinite();
    const auto x = SampleEma(r, opt, 10000);
    const double h4 = HVicinity(spec, x, 4);
    o.Check(finite && h4 >= 0.5 && eps.epsilon <= 10.0 && cfg.data_size == 100000,
            Fmt("DP eps=%.4f sigma_dp=%.4f over %g steps: finite=%g", eps.epsilon,
                opt.privacy.sigma_dp, opt.privacy.total_steps, finite) +
                Fmt(", DDIM-100 h4=%.4f", h4));
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // <= 0 means no stated limit
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace dpdm

int main(int argc, char** argv) {
  using dpdm::Criterion;
  const std::vector<Criterion> criteria = {
      {1, "accountant vs noise-multiplier table", 5, dpdm::AccountantTable},
      {2, "subsampled RDP vs quadrature", 30, dpdm::RdpQuadrature},
      {3, "noise-multiplicity variance scaling", 120, dpdm::VarianceScaling},
      {4, "clipped-average sensitivity", 60, dpdm::Sensitivity},
      {5, "oracle sampler mode coverage", 300, dpdm::SamplerCoverage},
      {6, "probability-flow exactness", 60, dpdm::FlowExactness},
      {7, "score/denoiser identities", 0, dpdm::Identities},
      {8, "per-sample autodiff", 0, dpdm::PerSampleAutodiff},
      {9, "complexity metric", 180, dpdm::Complexity},
      {10, "end-to-end toy training", 1800, dpdm::EndToEndTraining},
  };
  // Optional arguments select criteria by number; default is all of them.
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failures = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    dpdm::Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.Check(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0) {
      out.Check(secs <= c.limit_seconds,
                dpdm::Fmt("runtime %.1f s (limit %g s)", secs, c.limit_seconds));
    } else {
      out.Check(true, dpdm::Fmt("runtime %.1f s", secs));
    }
    failures += out.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
