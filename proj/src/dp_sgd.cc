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

#include "dpdm/dp_sgd.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dpdm/parallel.h"

namespace dpdm {

PrivacySpec PrivacySpec::NonPrivate(double q, int64_t steps) {
  PrivacySpec p;
  p.clip_c = kNoClipping;
  p.sigma_dp = 0.0;
  p.q = q;
  p.total_steps = steps;
  return p;
}

void PrivacySpec::Validate() const {
  if (!(clip_c > 0.0)) throw std::invalid_argument("clip constant must be > 0");
  if (!(sigma_dp >= 0.0) || !std::isfinite(sigma_dp)) {
    throw std::invalid_argument("sigma_dp must be finite and >= 0");
  }
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::invalid_argument("subsampling rate q must lie in (0, 1]");
  }
  if (total_steps < 0) throw std::invalid_argument("total steps must be >= 0");
  if (is_private()) {
    if (!std::isfinite(clip_c)) {
      throw std::invalid_argument("private training needs a finite clip constant");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw std::invalid_argument("delta must lie in (0, 1)");
    }
  }
}

std::vector<int64_t> PoissonSample(int64_t n, double q, CounterRng& rng) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in [0, 1]");
  std::vector<int64_t> out;
  if (q == 0.0) return out;
  out.reserve(static_cast<size_t>(n * q * 1.1) + 16);
  for (int64_t i = 0; i < n; ++i) {
    if (q == 1.0 || rng.Uniform() < q) out.push_back(i);
  }
  return out;
}

double ClipFactor(double norm, double clip_c) {
  if (norm == 0.0 || norm <= clip_c) return 1.0;
  return clip_c / norm;
}

double ClipInPlace(std::span<double> g, double clip_c) {
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  const double f = ClipFactor(norm, clip_c);
  if (f != 1.0) {
    for (double& v : g) v *= f;
  }
  return norm;
}

Eigen::VectorXd Clip(const Eigen::VectorXd& g, double clip_c) {
  Eigen::VectorXd out = g;
  ClipInPlace(std::span<double>(out.data(), out.size()), clip_c);
  return out;
}

Eigen::VectorXd ClippedAverage(const PerSampleGrads& per_sample, double clip_c,
                               double expected_batch) {
  if (!(expected_batch > 0.0)) {
    throw std::invalid_argument("expected batch size must be > 0");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(per_sample.cols());
  for (Eigen::Index i = 0; i < per_sample.rows(); ++i) {
    const double f = ClipFactor(per_sample.row(i).norm(), clip_c);
    sum += f * per_sample.row(i).transpose();
  }
  return sum / expected_batch;
}

SanitizedGradient Sanitize(const PerSampleGrads& per_sample, double clip_c,
                           double sigma_dp, double expected_batch,
                           CounterRng& rng) {
  SanitizedGradient out;
  out.gradient = ClippedAverage(per_sample, clip_c, expected_batch);
  out.actual_batch_size = per_sample.rows();
  if (sigma_dp > 0.0) {
    const double scale = clip_c * sigma_dp / expected_batch;
    for (Eigen::Index j = 0; j < out.gradient.size(); ++j) {
      out.gradient(j) += scale * rng.Normal();
    }
  }
  return out;
}

Adam::Adam(const OptimizerSpec& spec, Eigen::Index dim)
    : spec_(spec),
      m_(Eigen::VectorXd::Zero(dim)),
      v_(Eigen::VectorXd::Zero(dim)) {
  if (!(spec.learning_rate > 0.0)) {
    throw std::invalid_argument("learning rate must be > 0");
  }
}

void Adam::Step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = spec_.beta1 * m_ + (1.0 - spec_.beta1) * grad;
  v_ = spec_.beta2 * v_ + (1.0 - spec_.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
  theta.array() -= spec_.learning_rate * (m_.array() / bc1) /
                   ((v_.array() / bc2).sqrt() + spec_.epsilon);
}

int64_t StepsForEpochs(double epochs, int64_t dataset_size,
                       double expected_batch) {
  const double per_epoch =
      std::round(static_cast<double>(dataset_size) / expected_batch);
  return static_cast<int64_t>(std::llround(epochs * per_epoch));
}

namespace {

struct ChunkResult {
  Eigen::VectorXd grad_sum;
  double loss_sum = 0.0;
  std::vector<double> norms;
};

double Median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

}  // namespace

TrainResult Train(std::span<const LabeledSample> data,
                  const TrainOptions& options,
                  const std::function<void(const StepLog&)>& on_step) {
  const PrivacySpec& privacy = options.privacy;
  privacy.Validate();
  options.dm.Validate();
  if (data.empty()) throw std::invalid_argument("training data is empty");
  if (options.noise_multiplicity < 1) {
    throw std::invalid_argument("noise multiplicity K must be >= 1");
  }
  if (options.chunk_size < 1) throw std::invalid_argument("chunk size must be >= 1");

  const int64_t n = static_cast<int64_t>(data.size());
  const double expected_batch = privacy.q * static_cast<double>(n);
  const bool clipping = std::isfinite(privacy.clip_c);

  TrainResult result{DenoiserParams::Initialize(options.arch, options.seed),
                     EmaParams{}, {}, {}};
  result.ema.shadow = result.params.values;
  result.ema.decay = options.ema_decay;
  Adam adam(options.optimizer, result.params.size());

  for (int64_t step = 0; step < privacy.total_steps; ++step) {
    const uint64_t ustep = static_cast<uint64_t>(step);
    CounterRng poisson_rng(options.seed, StreamTag::kPoisson, {ustep});
    const std::vector<int64_t> indices = PoissonSample(n, privacy.q, poisson_rng);

    std::vector<LabeledSample> batch;
    std::vector<uint64_t> ids;
    batch.reserve(indices.size());
    ids.reserve(indices.size());
    for (int64_t idx : indices) {
      LabeledSample s = data[idx];
      if (!options.conditional) {
        s.label = kNullLabel;
      } else if (options.label_dropout > 0.0) {
        CounterRng drop(options.seed, StreamTag::kLabelDropout,
                        {ustep, static_cast<uint64_t>(idx)});
        if (drop.Uniform() < options.label_dropout) s.label = kNullLabel;
      }
      batch.push_back(s);
      ids.push_back(static_cast<uint64_t>(idx));
    }

    const NoiseKey key{options.seed, ustep};
    const int64_t num_chunks =
        (static_cast<int64_t>(batch.size()) + options.chunk_size - 1) /
        options.chunk_size;
    std::vector<ChunkResult> chunks(num_chunks);
    ParallelFor(num_chunks, options.threads, [&](int64_t c) {
      const size_t begin = static_cast<size_t>(c * options.chunk_size);
      const size_t len =
          std::min<size_t>(options.chunk_size, batch.size() - begin);
      const std::span<const LabeledSample> part(batch.data() + begin, len);
      const std::span<const uint64_t> part_ids(ids.data() + begin, len);
      ChunkResult& out = chunks[c];
      if (!clipping) {
        out.loss_sum =
            SummedLossAndGradient(result.params, options.dm, part, part_ids,
                                  options.noise_multiplicity, key, &out.grad_sum);
        return;
      }
      PerSampleResult ps =
          PerSampleLossAndGrads(result.params, options.dm, part, part_ids,
                                options.noise_multiplicity, key);
      out.grad_sum = Eigen::VectorXd::Zero(result.params.size());
      for (Eigen::Index i = 0; i < ps.grads.rows(); ++i) {
        auto row = ps.grads.row(i);
        const double norm =
            ClipInPlace(std::span<double>(row.data(), row.size()), privacy.clip_c);
        if (!std::isfinite(norm)) {
          std::ostringstream msg;
          msg << "non-finite per-sample gradient at step " << step
              << " for dataset element " << part_ids[i];
          throw std::runtime_error(msg.str());
        }
        const double clipped_norm = row.norm();
        if (!(clipped_norm <= privacy.clip_c * (1.0 + 1e-12))) {
          throw std::logic_error("clipped per-sample gradient exceeds C");
        }
        out.norms.push_back(norm);
        out.grad_sum += row.transpose();
        out.loss_sum += ps.losses[i];
      }
    });

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(result.params.size());
    double loss_sum = 0.0;
    std::vector<double> norms;
    for (const ChunkResult& c : chunks) {
      grad += c.grad_sum;
      loss_sum += c.loss_sum;
      norms.insert(norms.end(), c.norms.begin(), c.norms.end());
    }
    grad /= expected_batch;
    if (privacy.is_private()) {
      CounterRng noise(options.seed, StreamTag::kDpNoise, {ustep});
      const double scale = privacy.clip_c * privacy.sigma_dp / expected_batch;
      for (Eigen::Index j = 0; j < grad.size(); ++j) grad(j) += scale * noise.Normal();
    }

    adam.Step(result.params.values, grad);
    result.ema = EmaUpdate(std::move(result.ema), result.params);

    if (!result.params.AllFinite() || !result.ema.shadow.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite parameters after step " << step
          << " (realized batch " << batch.size() << ", loss sum " << loss_sum
          << ", gradient norm " << grad.norm() << ")";
      throw std::runtime_error(msg.str());
    }

    StepLog entry;
    entry.step = step;
    entry.realized_batch = static_cast<int64_t>(batch.size());
    entry.loss_mean = batch.empty() ? std::nan("") : loss_sum / batch.size();
    entry.median_grad_norm = Median(norms);
    if (clipping && !norms.empty()) {
      const auto clipped = std::count_if(norms.begin(), norms.end(), [&](double v) {
        return v > privacy.clip_c;
      });
      entry.fraction_clipped = static_cast<double>(clipped) / norms.size();
    } else {
      // Nothing is clipped: either the batch is empty or clipping is off.
      entry.fraction_clipped = 0.0;
    }
    result.log.push_back(entry);
    ++result.releases.releases;
    if (on_step) on_step(entry);
  }
  result.releases.clip_c = privacy.clip_c;
  result.releases.sigma_dp = privacy.sigma_dp;
  result.releases.q = privacy.q;
  return result;
}

}  // namespace dpdm
