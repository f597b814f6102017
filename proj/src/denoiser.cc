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

#include "dpdm/denoiser.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dpdm/rng.h"

namespace dpdm {
namespace {

using Eigen::Index;
using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Geometric frequencies from 0.5 to 64 radians per unit of noise input.
double FourierFrequency(int j, int count) {
  if (count == 1) return 1.0;
  const double lo = std::log(0.5);
  const double hi = std::log(64.0);
  return std::exp(lo + (hi - lo) * j / (count - 1));
}

int EmbeddingRow(const Architecture& arch, int label) {
  if (label == kNullLabel) return arch.num_classes;
  if (label < 0 || label >= arch.num_classes) {
    throw std::invalid_argument("label " + std::to_string(label) +
                                " outside [0, " +
                                std::to_string(arch.num_classes) + ")");
  }
  return label;
}

double Sigmoid(double h) { return 1.0 / (1.0 + std::exp(-h)); }

// One network evaluation over the columns of an input matrix, keeping every
// intermediate needed for reverse passes.
class Pass {
 public:
  Pass(const DenoiserParams& params, MatrixXd inputs)
      : arch_(params.arch), layout_(params.arch), theta_(params.values),
        a0_(std::move(inputs)) {
    if (theta_.size() != layout_.total || a0_.rows() != arch_.input_dim()) {
      throw std::invalid_argument(
          "parameter vector does not match the architecture descriptor");
    }
    const Index r = a0_.cols();
    const int w = arch_.width;
    h_.resize(arch_.depth + 1);
    u_.resize(arch_.depth + 1);
    h_[0].noalias() = Weight(layout_.w_in, w, arch_.input_dim()) * a0_;
    h_[0].colwise() += Bias(layout_.b_in, w);
    for (int l = 0; l < arch_.depth; ++l) {
      u_[l] = h_[l].unaryExpr([](double v) { return v * Sigmoid(v); });
      h_[l + 1] = h_[l];
      h_[l + 1].noalias() += Weight(layout_.w_block[l], w, w) * u_[l];
      h_[l + 1].colwise() += Bias(layout_.b_block[l], w);
    }
    u_[arch_.depth] =
        h_[arch_.depth].unaryExpr([](double v) { return v * Sigmoid(v); });
    out_.resize(2, r);
    out_.noalias() = Weight(layout_.w_out, 2, w) * u_[arch_.depth];
    out_.colwise() += Bias(layout_.b_out, 2);
  }

  const MatrixXd& output() const { return out_; }

  void Backward(const MatrixXd& d_out) {
    d_out_ = d_out;
    const int w = arch_.width;
    dh_.resize(arch_.depth + 1);
    dh_[arch_.depth].noalias() =
        Weight(layout_.w_out, 2, w).transpose() * d_out_;
    dh_[arch_.depth].array() *= SiluPrime(h_[arch_.depth]).array();
    for (int l = arch_.depth - 1; l >= 0; --l) {
      MatrixXd du = Weight(layout_.w_block[l], w, w).transpose() * dh_[l + 1];
      dh_[l] = dh_[l + 1] + (du.array() * SiluPrime(h_[l]).array()).matrix();
    }
  }

  // Gradient with respect to the network input matrix.
  MatrixXd InputGrad() const {
    return Weight(layout_.w_in, arch_.width, arch_.input_dim()).transpose() *
           dh_[0];
  }

  // Adds the parameter gradient contributed by columns [col, col + n) to the
  // flat vector at dst. embedding_rows[c] is the embedding row used by
  // column c.
  void AccumulateGrads(Index col, Index n, std::span<const int> embedding_rows,
                       double* dst) const {
    const int w = arch_.width;
    const int in = arch_.input_dim();
    auto cols = [&](const MatrixXd& m) { return m.middleCols(col, n); };

    Map<MatrixXd>(dst + layout_.w_in, w, in).noalias() +=
        cols(dh_[0]) * cols(a0_).transpose();
    Map<VectorXd>(dst + layout_.b_in, w) += cols(dh_[0]).rowwise().sum();
    for (int l = 0; l < arch_.depth; ++l) {
      Map<MatrixXd>(dst + layout_.w_block[l], w, w).noalias() +=
          cols(dh_[l + 1]) * cols(u_[l]).transpose();
      Map<VectorXd>(dst + layout_.b_block[l], w) +=
          cols(dh_[l + 1]).rowwise().sum();
    }
    Map<MatrixXd>(dst + layout_.w_out, 2, w).noalias() +=
        cols(d_out_) * cols(u_[arch_.depth]).transpose();
    Map<VectorXd>(dst + layout_.b_out, 2) += cols(d_out_).rowwise().sum();

    const int e = arch_.embed_dim;
    const int e_off = 2 + 2 * arch_.fourier_freqs;
    const MatrixXd d_emb =
        Weight(layout_.w_in, w, in).middleCols(e_off, e).transpose() *
        cols(dh_[0]);
    Map<MatrixXd> emb(dst + layout_.embedding, e, arch_.num_classes + 1);
    for (Index c = 0; c < n; ++c) {
      emb.col(embedding_rows[col + c]) += d_emb.col(c);
    }
  }

 private:
  Map<const MatrixXd> Weight(Index off, Index rows, Index cols) const {
    return Map<const MatrixXd>(theta_.data() + off, rows, cols);
  }
  Map<const VectorXd> Bias(Index off, Index n) const {
    return Map<const VectorXd>(theta_.data() + off, n);
  }
  static MatrixXd SiluPrime(const MatrixXd& h) {
    return h.unaryExpr([](double v) {
      const double s = Sigmoid(v);
      return s * (1.0 + v * (1.0 - s));
    });
  }

  const Architecture& arch_;
  ParameterLayout layout_;
  const VectorXd& theta_;
  MatrixXd a0_;
  std::vector<MatrixXd> h_, u_, dh_;
  MatrixXd out_, d_out_;
};

// Writes one input column: scaled point, Fourier features, class embedding.
void FillInputColumn(const DenoiserParams& params, const ParameterLayout& layout,
                     Point2 scaled_x, double noise_input, int embedding_row,
                     Eigen::Ref<VectorXd> col) {
  const Architecture& arch = params.arch;
  col(0) = scaled_x.x;
  col(1) = scaled_x.y;
  for (int j = 0; j < arch.fourier_freqs; ++j) {
    const double a = FourierFrequency(j, arch.fourier_freqs) * noise_input;
    col(2 + 2 * j) = std::sin(a);
    col(3 + 2 * j) = std::cos(a);
  }
  const int e_off = 2 + 2 * arch.fourier_freqs;
  col.segment(e_off, arch.embed_dim) = params.values.segment(
      layout.embedding + static_cast<Index>(embedding_row) * arch.embed_dim,
      arch.embed_dim);
}

// Noisy inputs and everything else needed to evaluate the weighted denoising loss for
// K draws per element.
struct LossBatch {
  MatrixXd inputs;                 // input_dim x (n K)
  std::vector<int> embedding_rows; // per column
  std::vector<Preconditioning> pre;
  std::vector<double> weight;      // lambda(sigma)
  std::vector<Point2> noisy;       // x + n
  std::vector<Point2> clean;
};

LossBatch BuildLossBatch(const DenoiserParams& params, const DmConfig& cfg,
                         std::span<const LabeledSample> batch,
                         std::span<const uint64_t> element_ids, int K,
                         NoiseKey key) {
  if (K < 1) throw std::invalid_argument("noise multiplicity K must be >= 1");
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (element_ids.size() != batch.size()) {
    throw std::invalid_argument("element id count does not match batch size");
  }
  const ParameterLayout layout(params.arch);
  const Index cols = static_cast<Index>(batch.size()) * K;
  LossBatch lb;
  lb.inputs.resize(params.arch.input_dim(), cols);
  lb.embedding_rows.resize(cols);
  lb.pre.resize(cols);
  lb.weight.resize(cols);
  lb.noisy.resize(cols);
  lb.clean.resize(cols);
  for (size_t i = 0; i < batch.size(); ++i) {
    const int row = EmbeddingRow(params.arch, batch[i].label);
    for (int k = 0; k < K; ++k) {
      const Index c = static_cast<Index>(i) * K + k;
      const LossDraw draw = DrawLossNoise(cfg, key, element_ids[i], k);
      const Preconditioning p = Precondition(cfg, draw.sigma);
      lb.clean[c] = batch[i].point;
      lb.noisy[c] = batch[i].point + draw.noise;
      lb.pre[c] = p;
      lb.weight[c] = LossWeight(cfg, draw.sigma);
      lb.embedding_rows[c] = row;
      FillInputColumn(params, layout, p.c_in * lb.noisy[c],
                      NoiseFeatureInput(cfg, p.c_noise), row,
                      lb.inputs.col(c));
    }
  }
  return lb;
}

// Per-column loss term lambda ||D - x||^2 / K and, optionally, dLoss/dF.
std::vector<double> ColumnLosses(const LossBatch& lb, const MatrixXd& f, int K,
                                 MatrixXd* d_out) {
  const Index cols = f.cols();
  std::vector<double> terms(cols);
  if (d_out) d_out->resize(2, cols);
  for (Index c = 0; c < cols; ++c) {
    const Preconditioning& p = lb.pre[c];
    const Point2 d = p.c_skip * lb.noisy[c] + p.c_out * Point2{f(0, c), f(1, c)};
    const Point2 r = d - lb.clean[c];
    terms[c] = lb.weight[c] * r.SquaredNorm() / K;
    if (d_out) {
      const double s = 2.0 * lb.weight[c] * p.c_out / K;
      (*d_out)(0, c) = s * r.x;
      (*d_out)(1, c) = s * r.y;
    }
  }
  return terms;
}

}  // namespace

int64_t Architecture::ParameterCount() const {
  return ParameterLayout(*this).total;
}

void Architecture::Validate() const {
  if (depth < 0 || width < 1 || fourier_freqs < 1 || embed_dim < 1 ||
      num_classes < 0) {
    throw std::invalid_argument("invalid denoiser architecture");
  }
}

ParameterLayout::ParameterLayout(const Architecture& arch) {
  arch.Validate();
  const Index w = arch.width;
  Index off = 0;
  w_in = off;
  off += w * arch.input_dim();
  b_in = off;
  off += w;
  for (int l = 0; l < arch.depth; ++l) {
    w_block.push_back(off);
    off += w * w;
    b_block.push_back(off);
    off += w;
  }
  w_out = off;
  off += 2 * w;
  b_out = off;
  off += 2;
  embedding = off;
  off += static_cast<Index>(arch.embed_dim) * (arch.num_classes + 1);
  total = off;
}

DenoiserParams::DenoiserParams(const Architecture& a)
    : arch(a), values(VectorXd::Zero(ParameterLayout(a).total)) {}

DenoiserParams DenoiserParams::Initialize(const Architecture& arch,
                                          uint64_t seed) {
  DenoiserParams p(arch);
  const ParameterLayout layout(arch);
  auto fill_uniform = [&](Index off, Index n, double bound, uint64_t tensor) {
    CounterRng rng(seed, StreamTag::kInit, {tensor});
    for (Index i = 0; i < n; ++i) {
      p.values(off + i) = bound * (2.0 * rng.Uniform() - 1.0);
    }
  };
  const double w = arch.width;
  fill_uniform(layout.w_in, arch.width * arch.input_dim(),
               1.0 / std::sqrt(arch.input_dim()), 0);
  for (int l = 0; l < arch.depth; ++l) {
    fill_uniform(layout.w_block[l], arch.width * arch.width,
                 1.0 / std::sqrt(w), 1 + l);
  }
  fill_uniform(layout.embedding,
               static_cast<Index>(arch.embed_dim) * (arch.num_classes + 1), 1.0,
               1000);
  return p;
}

EmaParams EmaUpdate(EmaParams ema, const DenoiserParams& params) {
  if (ema.shadow.size() != params.values.size()) {
    throw std::invalid_argument("EMA dimension mismatch");
  }
  if (!(ema.decay >= 0.0 && ema.decay <= 1.0)) {
    throw std::invalid_argument("EMA decay must lie in [0, 1]");
  }
  ema.shadow = ema.decay * ema.shadow + (1.0 - ema.decay) * params.values;
  return ema;
}

double NoiseFeatureInput(const DmConfig& cfg, double c_noise) {
  switch (cfg.kind) {
    case DmKind::kVp:
      return c_noise / (cfg.m_disc - 1);
    case DmKind::kVe:
      return 0.25 * c_noise;
    case DmKind::kVPred:
    case DmKind::kEdm:
      return c_noise;
  }
  return c_noise;
}

Point2 RawForward(const DenoiserParams& params, Point2 scaled_x,
                  double noise_input, int label) {
  const ParameterLayout layout(params.arch);
  MatrixXd in(params.arch.input_dim(), 1);
  FillInputColumn(params, layout, scaled_x, noise_input,
                  EmbeddingRow(params.arch, label), in.col(0));
  const Pass pass(params, std::move(in));
  return {pass.output()(0, 0), pass.output()(1, 0)};
}

Point2 Forward(const DenoiserParams& params, const DmConfig& cfg, Point2 x,
               double sigma, int label) {
  Point2 out;
  ForwardBatch(params, cfg, std::span<const Point2>(&x, 1), sigma, label,
               std::span<Point2>(&out, 1));
  return out;
}

void ForwardBatch(const DenoiserParams& params, const DmConfig& cfg,
                  std::span<const Point2> x, double sigma, int label,
                  std::span<Point2> out) {
  if (out.size() != x.size()) {
    throw std::invalid_argument("ForwardBatch output size mismatch");
  }
  if (x.empty()) return;
  const ParameterLayout layout(params.arch);
  const Preconditioning p = Precondition(cfg, sigma);
  const int row = EmbeddingRow(params.arch, label);
  MatrixXd in(params.arch.input_dim(), static_cast<Index>(x.size()));
  FillInputColumn(params, layout, Point2{}, NoiseFeatureInput(cfg, p.c_noise),
                  row, in.col(0));
  for (Index c = 1; c < in.cols(); ++c) in.col(c) = in.col(0);
  for (size_t i = 0; i < x.size(); ++i) {
    in(0, i) = p.c_in * x[i].x;
    in(1, i) = p.c_in * x[i].y;
  }
  const Pass pass(params, std::move(in));
  const MatrixXd& f = pass.output();
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = p.c_skip * x[i] + p.c_out * Point2{f(0, i), f(1, i)};
  }
}

Mat2 InputJacobian(const DenoiserParams& params, const DmConfig& cfg, Point2 x,
                   double sigma, int label) {
  const ParameterLayout layout(params.arch);
  const Preconditioning p = Precondition(cfg, sigma);
  MatrixXd in(params.arch.input_dim(), 2);
  FillInputColumn(params, layout, p.c_in * x, NoiseFeatureInput(cfg, p.c_noise),
                  EmbeddingRow(params.arch, label), in.col(0));
  in.col(1) = in.col(0);
  Pass pass(params, std::move(in));
  // Column r seeds output coordinate r.
  pass.Backward(MatrixXd::Identity(2, 2));
  const MatrixXd g = pass.InputGrad();
  Mat2 j;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      j(r, c) = (r == c ? p.c_skip : 0.0) + p.c_out * p.c_in * g(c, r);
    }
  }
  return j;
}

VectorXd OutputParamGradient(const DenoiserParams& params, const DmConfig& cfg,
                             Point2 x, double sigma, int label,
                             Point2 cotangent) {
  const ParameterLayout layout(params.arch);
  const Preconditioning p = Precondition(cfg, sigma);
  const int row = EmbeddingRow(params.arch, label);
  MatrixXd in(params.arch.input_dim(), 1);
  FillInputColumn(params, layout, p.c_in * x, NoiseFeatureInput(cfg, p.c_noise),
                  row, in.col(0));
  Pass pass(params, std::move(in));
  MatrixXd d_out(2, 1);
  d_out << p.c_out * cotangent.x, p.c_out * cotangent.y;
  pass.Backward(d_out);
  VectorXd grad = VectorXd::Zero(params.size());
  const int rows[] = {row};
  pass.AccumulateGrads(0, 1, rows, grad.data());
  return grad;
}

LossDraw DrawLossNoise(const DmConfig& cfg, NoiseKey key, uint64_t element,
                       int k) {
  CounterRng rng(key.seed, StreamTag::kLossNoise,
                 {key.step, element, static_cast<uint64_t>(k)});
  LossDraw d;
  d.sigma = SampleTrainingSigma(cfg, rng);
  const double zx = rng.Normal();
  const double zy = rng.Normal();
  d.noise = d.sigma * Point2{zx, zy};
  return d;
}

PerSampleResult PerSampleLossAndGrads(const DenoiserParams& params,
                                      const DmConfig& cfg,
                                      std::span<const LabeledSample> batch,
                                      std::span<const uint64_t> element_ids,
                                      int K, NoiseKey key) {
  LossBatch lb = BuildLossBatch(params, cfg, batch, element_ids, K, key);
  Pass pass(params, std::move(lb.inputs));
  MatrixXd d_out;
  const std::vector<double> terms = ColumnLosses(lb, pass.output(), K, &d_out);
  pass.Backward(d_out);

  const Index n = static_cast<Index>(batch.size());
  PerSampleResult res;
  res.losses.assign(n, 0.0);
  res.grads = PerSampleGrads::Zero(n, params.size());
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) res.losses[i] += terms[i * K + k];
    pass.AccumulateGrads(i * K, K, lb.embedding_rows, res.grads.row(i).data());
  }
  return res;
}

std::vector<double> PerSampleLosses(const DenoiserParams& params,
                                    const DmConfig& cfg,
                                    std::span<const LabeledSample> batch,
                                    std::span<const uint64_t> element_ids,
                                    int K, NoiseKey key) {
  LossBatch lb = BuildLossBatch(params, cfg, batch, element_ids, K, key);
  const Pass pass(params, std::move(lb.inputs));
  const std::vector<double> terms = ColumnLosses(lb, pass.output(), K, nullptr);
  std::vector<double> losses(batch.size(), 0.0);
  for (size_t i = 0; i < batch.size(); ++i) {
    for (int k = 0; k < K; ++k) losses[i] += terms[i * K + k];
  }
  return losses;
}

double SummedLossAndGradient(const DenoiserParams& params, const DmConfig& cfg,
                             std::span<const LabeledSample> batch,
                             std::span<const uint64_t> element_ids, int K,
                             NoiseKey key, VectorXd* grad) {
  LossBatch lb = BuildLossBatch(params, cfg, batch, element_ids, K, key);
  Pass pass(params, std::move(lb.inputs));
  MatrixXd d_out;
  const std::vector<double> terms = ColumnLosses(lb, pass.output(), K, &d_out);
  pass.Backward(d_out);
  *grad = VectorXd::Zero(params.size());
  pass.AccumulateGrads(0, d_out.cols(), lb.embedding_rows, grad->data());
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

}  // namespace dpdm
