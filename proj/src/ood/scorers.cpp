// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/ood/scorers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "triaug/common/keyvalue.hpp"
#include "triaug/diffcore/ops.hpp"
#include "triaug/errors.hpp"
#include "triaug/metrics/metrics.hpp"

namespace triaug::ood {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const MatrixRM> as_matrix(const diff::Tensor& t) {
  return Eigen::Map<const MatrixRM>(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                                    static_cast<Eigen::Index>(t.cols()));
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

diff::Tensor normalized_embeddings(const model::TriAugModel& model, const diff::Tensor& x) {
  diff::Tensor f = model.embed(x);
  for (std::size_t r = 0; r < f.rows(); ++r) {
    double s = 0.0;
    for (double v : f.row(r)) s += v * v;
    if (s == 0.0) throw DegenerateInputError("zero embedding for sample " + std::to_string(r));
  }
  return model::normalize_embedding(f);
}

EmbeddingBank build_bank(const model::TriAugModel& model, const data::SplitView& train) {
  if (train.empty()) throw DegenerateInputError("build_bank: empty training split");
  EmbeddingBank bank;
  bank.z = normalized_embeddings(model, data::feature_matrix(train));
  bank.labels.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) bank.labels.push_back(static_cast<std::uint16_t>(train[i].y));
  return bank;
}

double knn_score(std::span<const double> z, const EmbeddingBank& bank, std::size_t k) {
  const std::size_t n = bank.size();
  if (k == 0 || k > n) {
    throw DegenerateInputError("knn_score: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  if (z.size() != bank.dim()) {
    throw ShapeError("knn_score: embedding of dimension " + std::to_string(z.size()) + " for a bank of dimension " +
                     std::to_string(bank.dim()));
  }
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = bank.z.row(i);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double d = row[c] - z[c];
      s += d * d;
    }
    dist[i] = std::sqrt(s);
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
  return -dist[k - 1];
}

std::vector<double> knn_scores(const diff::Tensor& z, const EmbeddingBank& bank, std::size_t k, unsigned threads) {
  std::vector<double> out(z.rows());
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) out[r] = knn_score(z.row(r), bank, k);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(z.rows())));
  if (threads == 1) {
    work(0, z.rows());
    return out;
  }
  // validate once up front so worker threads never throw
  knn_score(z.row(0), bank, k);
  std::vector<std::thread> pool;
  const std::size_t chunk = (z.rows() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(z.rows(), begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  for (auto& th : pool) th.join();
  return out;
}

std::size_t clamp_k(std::size_t k, std::size_t n, bool* clamped) {
  const std::size_t out = std::clamp<std::size_t>(k, 1, n);
  if (clamped) *clamped = out != k;
  return out;
}

double calibrate_tau(std::span<const double> id_val_scores, double tpr_target) {
  if (id_val_scores.empty()) throw DegenerateInputError("calibrate_tau: no validation scores");
  return metrics::threshold_at_tpr(id_val_scores, tpr_target);
}

double max_softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw DegenerateInputError("max_softmax: empty logits");
  if (!(temperature > 0.0)) throw DegenerateInputError("max_softmax: temperature must be positive");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double g : logits) s += std::exp((g - mx) / temperature);
  return 1.0 / s;
}

double msp_score(std::span<const double> logits) { return max_softmax(logits, 1.0); }

std::vector<double> msp_scores(const diff::Tensor& logits) {
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = msp_score(logits.row(r));
  return out;
}

std::vector<double> odin_scores(const model::TriAugModel& model, const diff::Tensor& x, const OdinParams& params) {
  if (!(params.temperature > 0.0)) throw ConfigError("ODIN temperature must be positive");
  if (!(params.epsilon >= 0.0)) throw ConfigError("ODIN epsilon must be non-negative");

  diff::Tensor perturbed = x;
  if (params.epsilon > 0.0) {
    diff::Graph g;
    const auto bound = model.bind(g, false);
    const diff::Var input = g.input(x, true);
    const diff::Var logits = model.average_logits(bound, input);
    std::vector<std::size_t> top(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) top[r] = argmax(logits.value().row(r));
    // rows are independent, so d(sum_r log S_r)/dx_r = d(log S_r)/dx_r
    const diff::Var objective =
        diff::sum(diff::pick(diff::log_softmax(diff::scale(logits, 1.0 / params.temperature)), top));
    const diff::Gradients grads = g.backward(objective);
    if (!grads.contains(input)) throw GraphError("ODIN: input gradient unavailable");
    const diff::Tensor& dx = grads[input];
    for (std::size_t i = 0; i < perturbed.numel(); ++i) {
      // x - eps * sign(-grad)
      const double gneg = -dx[i];
      const double sign = gneg > 0.0 ? 1.0 : (gneg < 0.0 ? -1.0 : 0.0);
      perturbed[i] = x[i] - params.epsilon * sign;
    }
  }
  const diff::Tensor logits = model.average_logits(perturbed);
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = max_softmax(logits.row(r), params.temperature);
  return out;
}

MahalanobisModel make_mahalanobis(diff::Tensor mu, diff::Tensor sigma) {
  if (sigma.rank() != 2 || sigma.rows() != sigma.cols() || mu.rank() != 2 || mu.cols() != sigma.cols()) {
    throw ShapeError("make_mahalanobis: means " + diff::to_string(mu.shape()) + " with covariance " +
                     diff::to_string(sigma.shape()));
  }
  const auto s = as_matrix(sigma);
  if (!s.isApprox(s.transpose(), 1e-12)) throw NumericError("Mahalanobis covariance is not symmetric");
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericError("Mahalanobis covariance is singular; increase the shrinkage epsilon");
  }
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
  if (!inv.allFinite()) throw NumericError("Mahalanobis covariance is singular; increase the shrinkage epsilon");
  diff::Tensor precision(sigma.shape());
  for (Eigen::Index i = 0; i < inv.rows(); ++i)
    for (Eigen::Index j = 0; j < inv.cols(); ++j)
      precision(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 0.5 * (inv(i, j) + inv(j, i));
  return {std::move(mu), std::move(sigma), std::move(precision)};
}

MahalanobisModel fit_mahalanobis(const EmbeddingBank& bank, std::size_t num_classes, double shrinkage) {
  if (!(shrinkage >= 0.0)) throw ConfigError("Mahalanobis shrinkage must be non-negative");
  const std::size_t d = bank.dim();
  std::vector<std::size_t> counts(num_classes, 0);
  diff::Tensor mu({num_classes, d});
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const std::size_t c = bank.labels[i];
    if (c >= num_classes) throw DegenerateInputError("bank label " + std::to_string(c) + " out of range");
    ++counts[c];
    auto row = bank.z.row(i);
    for (std::size_t k = 0; k < d; ++k) mu(c, k) += row[k];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] < 2) {
      throw DegenerateInputError("class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                 " bank vectors; Mahalanobis needs at least 2");
    }
    for (std::size_t k = 0; k < d; ++k) mu(c, k) /= static_cast<double>(counts[c]);
  }
  diff::Tensor sigma({d, d});
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto row = bank.z.row(i);
    const std::size_t c = bank.labels[i];
    for (std::size_t a = 0; a < d; ++a) {
      const double da = row[a] - mu(c, a);
      for (std::size_t b = 0; b < d; ++b) sigma(a, b) += da * (row[b] - mu(c, b));
    }
  }
  const double n = static_cast<double>(bank.size());
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) sigma(a, b) /= n;
    sigma(a, a) += shrinkage;
  }
  return make_mahalanobis(std::move(mu), std::move(sigma));
}

double mahalanobis_score(std::span<const double> z, const MahalanobisModel& model) {
  const std::size_t d = model.sigma.cols();
  if (z.size() != d) {
    throw ShapeError("mahalanobis_score: embedding of dimension " + std::to_string(z.size()) + ", model dimension " +
                     std::to_string(d));
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> diffv(d);
  for (std::size_t c = 0; c < model.mu.rows(); ++c) {
    for (std::size_t k = 0; k < d; ++k) diffv[k] = z[k] - model.mu(c, k);
    double q = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < d; ++b) s += model.precision(a, b) * diffv[b];
      q += diffv[a] * s;
    }
    best = std::min(best, q);
  }
  return -best;
}

void ScoreReport::add(double score, Origin origin, std::size_t predicted, std::optional<std::size_t> truth) {
  records.push_back({score, score >= tau ? Origin::id : Origin::ood, origin, predicted, truth});
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

void save_bank(const EmbeddingBank& bank, const std::filesystem::path& path) {
  std::string out = "TAEB";
  put_u32(out, static_cast<std::uint32_t>(bank.size()));
  put_u32(out, static_cast<std::uint32_t>(bank.dim()));
  for (double v : bank.z.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  for (std::uint16_t l : bank.labels) {
    out.push_back(static_cast<char>(l & 0xffu));
    out.push_back(static_cast<char>(l >> 8));
  }
  write_text_file(path, out);
}

EmbeddingBank load_bank(const std::filesystem::path& path) {
  const std::string in = read_text_file(path);
  if (in.size() < 12 || in.compare(0, 4, "TAEB") != 0) throw IoError(path.string() + ": not an embedding bank");
  const std::size_t n = get_u32(in, 4);
  const std::size_t d = get_u32(in, 8);
  if (n == 0 || d == 0) throw IoError(path.string() + ": empty embedding bank");
  if (in.size() != 12 + 4 * n * d + 2 * n) throw IoError(path.string() + ": truncated embedding bank");
  EmbeddingBank bank;
  bank.z = diff::Tensor({n, d});
  for (std::size_t i = 0; i < n * d; ++i) bank.z[i] = std::bit_cast<float>(get_u32(in, 12 + 4 * i));
  const std::size_t label_at = 12 + 4 * n * d;
  for (std::size_t i = 0; i < n; ++i) {
    bank.labels.push_back(static_cast<std::uint16_t>(static_cast<unsigned char>(in[label_at + 2 * i]) |
                                                     (static_cast<unsigned char>(in[label_at + 2 * i + 1]) << 8)));
  }
  return bank;
}

}  // namespace triaug::ood
