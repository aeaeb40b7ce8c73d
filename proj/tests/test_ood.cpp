// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "triaug/common/keyvalue.hpp"
#include "triaug/errors.hpp"
#include "triaug/model/training.hpp"
#include "triaug/ood/scorers.hpp"

namespace triaug::ood {
namespace {

using diff::Tensor;

Tensor unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  Tensor t = testing::random_tensor({n, d}, rng, -1, 1);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0;
    for (double v : t.row(r)) s += v * v;
    for (double& v : t.row(r)) v /= std::sqrt(s);
  }
  return t;
}

EmbeddingBank random_bank(std::size_t n, std::size_t d, Rng& rng) {
  EmbeddingBank b{unit_rows(n, d, rng), std::vector<std::uint16_t>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) b.labels[i] = static_cast<std::uint16_t>(i % 3);
  return b;
}

TEST(Knn, ExamplesOnBasisVectors) {
  const EmbeddingBank bank{Tensor::matrix(2, 2, {1, 0, 0, 1}), {0, 1}};
  const std::vector<double> e1{1, 0};
  EXPECT_EQ(knn_score(e1, bank, 1), 0.0);
  EXPECT_DOUBLE_EQ(knn_score(e1, bank, 2), -std::sqrt(2.0));
  EXPECT_THROW(knn_score(e1, bank, 3), Error);
  EXPECT_THROW(knn_score(e1, bank, 0), Error);
}

TEST(Knn, MatchesSortOracleOn500Banks) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 60;
    const EmbeddingBank bank = random_bank(n, 5, rng);
    const Tensor z = unit_rows(1, 5, rng);
    const std::size_t k = 1 + static_cast<std::size_t>(trial * 7) % n;
    ASSERT_EQ(knn_score(z.row(0), bank, k), oracle::knn_score(z.row(0), bank, k)) << "trial " << trial;
  }
}

TEST(Knn, DuplicateRowsCountSeparately) {
  const EmbeddingBank bank{Tensor::matrix(3, 2, {1, 0, 1, 0, 0, 1}), {0, 0, 1}};
  const std::vector<double> e1{1, 0};
  EXPECT_EQ(knn_score(e1, bank, 2), 0.0);
  EXPECT_DOUBLE_EQ(knn_score(e1, bank, 3), -std::sqrt(2.0));
}

TEST(Knn, InvariantToBankPermutation) {
  Rng rng(2);
  const EmbeddingBank bank = random_bank(40, 6, rng);
  const Tensor z = unit_rows(10, 6, rng);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::ranges::shuffle(perm, rng);
  EmbeddingBank shuffled{Tensor({40, 6}), bank.labels};
  for (std::size_t r = 0; r < 40; ++r) std::ranges::copy(bank.z.row(perm[r]), shuffled.z.row(r).begin());
  for (std::size_t k : {1, 7, 40}) EXPECT_EQ(knn_scores(z, bank, k), knn_scores(z, shuffled, k));
}

TEST(Knn, NonIncreasingInK) {
  Rng rng(3);
  const EmbeddingBank bank = random_bank(30, 4, rng);
  const Tensor z = unit_rows(5, 4, rng);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t k = 2; k <= 30; ++k) EXPECT_LE(knn_score(z.row(r), bank, k), knn_score(z.row(r), bank, k - 1));
  }
}

TEST(Knn, DistanceAndCosineRankingsAgree) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const EmbeddingBank bank = random_bank(25, 8, rng);
    const Tensor z = unit_rows(1, 8, rng);
    std::vector<std::size_t> by_dist(25);
    std::iota(by_dist.begin(), by_dist.end(), 0);
    std::vector<std::size_t> by_cos(by_dist);
    std::vector<double> dist(25), cosv(25);
    for (std::size_t i = 0; i < 25; ++i) {
      double s = 0, c = 0;
      for (std::size_t j = 0; j < 8; ++j) {
        s += (bank.z(i, j) - z[j]) * (bank.z(i, j) - z[j]);
        c += bank.z(i, j) * z[j];
      }
      dist[i] = s;
      cosv[i] = c;
      EXPECT_NEAR(s, 2 - 2 * c, 1e-12);
    }
    std::ranges::stable_sort(by_dist, [&](auto a, auto b) { return dist[a] < dist[b]; });
    std::ranges::stable_sort(by_cos, [&](auto a, auto b) { return cosv[a] > cosv[b]; });
    EXPECT_EQ(by_dist, by_cos);
  }
}

TEST(Knn, ThreadCountDoesNotChangeScores) {
  Rng rng(5);
  const EmbeddingBank bank = random_bank(200, 16, rng);
  const Tensor z = unit_rows(33, 16, rng);
  const auto one = knn_scores(z, bank, 10, 1);
  EXPECT_EQ(knn_scores(z, bank, 10, 4), one);
  EXPECT_EQ(knn_scores(z, bank, 10, 64), one);
}

TEST(ClampK, ReducesToBankSize) {
  bool clamped = false;
  EXPECT_EQ(clamp_k(1000, 4236, &clamped), 1000u);
  EXPECT_FALSE(clamped);
  EXPECT_EQ(clamp_k(1000, 300, &clamped), 300u);
  EXPECT_TRUE(clamped);
}

TEST(CalibrateTau, Examples) {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  EXPECT_EQ(calibrate_tau(s, 0.95), 6.0);
  EXPECT_EQ(std::ranges::count_if(s, [](double v) { return v >= 6.0; }), 95);
  EXPECT_EQ(calibrate_tau(s, 1.0), 1.0);
  const std::vector<double> same(30, 0.25);
  EXPECT_EQ(calibrate_tau(same), 0.25);
  EXPECT_THROW(calibrate_tau(std::vector<double>{}), Error);
}

TEST(CalibrateTau, EnumerationOracleWithTies) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(20 + trial);
    for (double& v : s) v = static_cast<double>(std::uniform_int_distribution<int>(0, trial % 4 == 0 ? 2 : 1000)(rng));
    const double tau = calibrate_tau(s);
    ASSERT_EQ(tau, oracle::threshold(s, 0.95));
  }
}

TEST(Msp, Examples) {
  EXPECT_NEAR(msp_score(std::vector<double>{2, 2, 2, 2}), 0.25, 1e-15);
  const double big = msp_score(std::vector<double>{10, 0, 0});
  EXPECT_NEAR(big, 1 / (1 + 2 * std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(big, 0.99991, 1e-5);
  EXPECT_NEAR(msp_score(std::vector<double>{1, 3, -2}), msp_score(std::vector<double>{101, 103, 98}), 1e-15);
  EXPECT_NEAR(max_softmax(std::vector<double>{0, 10}, 10), 1 / (1 + std::exp(-1.0)), 1e-15);
}

class TrainedToy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data::DatasetSpec s;
    s.id_classes = 4;
    s.ood_classes = 2;
    s.feature_dim = 8;
    s.head_class_size = 80;
    s.imbalance_ratio = 4;
    s.ood_class_size = 20;
    s.seed = 3;
    ds_ = new data::Dataset(data::generate(s));
    sp_ = new data::Splits(data::split(*ds_, {}, 3));
    const auto train = sp_->view(*ds_, data::Split::train);
    model::TriAugConfig mc;
    mc.embed_dim = 8;
    mc.hidden_sizes = {16};
    model_ = new model::TriAugModel(mc, 8, 4, model::init_seed(1));
    model::TrainingConfig tc;
    tc.epochs = 20;
    tc.batch_size = 32;
    tc.learning_rate = 0.05;
    tc.seed = 1;
    const auto pri = data::class_priors(train, 4);
    model::fit(*model_, train, pri, loss::MaskM({0, 1, 0, 1}), tc, {});
  }
  static void TearDownTestSuite() {
    delete model_;
    delete sp_;
    delete ds_;
  }
  static inline data::Dataset* ds_ = nullptr;
  static inline data::Splits* sp_ = nullptr;
  static inline model::TriAugModel* model_ = nullptr;

  Tensor val_x() const { return data::feature_matrix(sp_->view(*ds_, data::Split::val)); }
};

TEST_F(TrainedToy, BankRowsAreUnitAndDeterministic) {
  const auto train = sp_->view(*ds_, data::Split::train);
  const EmbeddingBank a = build_bank(*model_, train);
  ASSERT_EQ(a.size(), train.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    double s = 0;
    for (double v : a.z.row(r)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, kBankNormTolerance);
    EXPECT_EQ(a.labels[r], train[r].y);
  }
  const EmbeddingBank b = build_bank(*model_, train);
  EXPECT_EQ(a.z, b.z);
}

TEST_F(TrainedToy, OdinWithoutPerturbationIsScaledMsp) {
  const Tensor x = val_x();
  const Tensor g = model_->average_logits(x);
  const auto t1 = odin_scores(*model_, x, {1.0, 0.0});
  const auto t50 = odin_scores(*model_, x, {50.0, 0.0});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    EXPECT_NEAR(t1[r], msp_score(g.row(r)), 1e-15);
    EXPECT_NEAR(t50[r], max_softmax(g.row(r), 50.0), 1e-15);
  }
}

TEST_F(TrainedToy, PerturbationRaisesMostScores) {
  const Tensor x = val_x();
  const auto base = odin_scores(*model_, x, {1000.0, 0.0});
  const auto pert = odin_scores(*model_, x, {1000.0, 1e-3});
  std::size_t raised = 0;
  for (std::size_t r = 0; r < base.size(); ++r) raised += pert[r] > base[r];
  EXPECT_GE(static_cast<double>(raised), 0.9 * static_cast<double>(base.size()));
}

TEST(Mahalanobis, IdentityCovarianceIsSquaredDistance) {
  const auto m = make_mahalanobis(Tensor::matrix(2, 2, {0, 0, 3, 4}), Tensor::matrix(2, 2, {1, 0, 0, 1}));
  EXPECT_NEAR(mahalanobis_score(std::vector<double>{1, 1}, m), -2.0, 1e-14);
  EXPECT_NEAR(mahalanobis_score(std::vector<double>{3, 3}, m), -1.0, 1e-14);
  EXPECT_EQ(mahalanobis_score(std::vector<double>{3, 4}, m), 0.0);
}

TEST(Mahalanobis, HandFittedTwoClassExample) {
  // class 0: (0,0),(2,0),(0,2),(2,2) mean (1,1); class 1: (5,5),(7,5) mean (6,5)
  const EmbeddingBank bank{Tensor::matrix(6, 2, {0, 0, 2, 0, 0, 2, 2, 2, 5, 5, 7, 5}), {0, 0, 0, 0, 1, 1}};
  const double shrink = 0.5;
  const MahalanobisModel m = fit_mahalanobis(bank, 2, shrink);
  // pooled scatter: class 0 diag(4,4), class 1 diag(2,0); over n = 6
  const double a = 6.0 / 6 + shrink, b = 0.0, d = 4.0 / 6 + shrink;
  EXPECT_NEAR(m.sigma(0, 0), a, 1e-14);
  EXPECT_NEAR(m.sigma(0, 1), b, 1e-14);
  EXPECT_NEAR(m.sigma(1, 1), d, 1e-14);
  const double det = a * d - b * b;
  const std::vector<double> z{3, 2};
  auto quad = [&](double mx, double my) {
    const double u = z[0] - mx, v = z[1] - my;
    return (d * u * u - 2 * b * u * v + a * v * v) / det;
  };
  EXPECT_NEAR(mahalanobis_score(z, m), -std::min(quad(1, 1), quad(6, 5)), 1e-12);
}

TEST(Mahalanobis, AffineInvariance) {
  Rng rng(7);
  const std::size_t d = 3;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor mu = testing::random_tensor({2, d}, rng, -2, 2);
    Tensor l = testing::random_tensor({d, d}, rng, -0.5, 0.5);
    for (std::size_t i = 0; i < d; ++i) l(i, i) += 2;  // well conditioned
    // sigma = l l^T + I
    Tensor sigma({d, d});
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < d; ++k) sigma(i, j) += l(i, k) * l(j, k);
        sigma(i, j) += i == j;
      }
    }
    Tensor a = testing::random_tensor({d, d}, rng, -0.5, 0.5);
    for (std::size_t i = 0; i < d; ++i) a(i, i) += 1.5;
    const Tensor shift = testing::random_tensor({1, d}, rng);
    auto map = [&](std::span<const double> v) {
      std::vector<double> out(d);
      for (std::size_t i = 0; i < d; ++i) {
        out[i] = shift[i];
        for (std::size_t j = 0; j < d; ++j) out[i] += a(i, j) * v[j];
      }
      return out;
    };
    Tensor mu2({2, d});
    for (std::size_t c = 0; c < 2; ++c) std::ranges::copy(map(mu.row(c)), mu2.row(c).begin());
    Tensor s2({d, d});  // A sigma A^T
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t p = 0; p < d; ++p) {
          for (std::size_t q = 0; q < d; ++q) s2(i, j) += a(i, p) * sigma(p, q) * a(j, q);
        }
      }
    }
    const auto m1 = make_mahalanobis(mu, sigma);
    const auto m2 = make_mahalanobis(mu2, s2);
    const Tensor z = testing::random_tensor({1, d}, rng, -3, 3);
    const double s1 = mahalanobis_score(z.row(0), m1);
    EXPECT_NEAR(mahalanobis_score(map(z.row(0)), m2), s1, 1e-6 * std::max(1.0, std::abs(s1)));
  }
}

TEST(Mahalanobis, Errors) {
  EXPECT_THROW(make_mahalanobis(Tensor::matrix(1, 2, {0, 0}), Tensor::matrix(2, 2, {1, 2, 2, 1})), NumericError);
  const EmbeddingBank lonely{Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1}), {0, 0, 1}};
  EXPECT_THROW(fit_mahalanobis(lonely, 2), Error);
}

TEST(ScoreReport, DecisionFollowsTau) {
  ScoreReport r;
  r.tau = 0.5;
  r.add(0.5, Origin::id, 2, 2);
  r.add(0.49, Origin::ood, 1, std::nullopt);
  EXPECT_EQ(r.records[0].decision, Origin::id);
  EXPECT_EQ(r.records[1].decision, Origin::ood);
  EXPECT_FALSE(r.records[1].truth.has_value());
}

class BankIo : public ::testing::Test {
 protected:
  std::filesystem::path path = std::filesystem::temp_directory_path() / "triaug_bank_test.taeb";
  void TearDown() override { std::filesystem::remove(path); }
};

TEST_F(BankIo, RoundTripAndLayout) {
  Rng rng(8);
  EmbeddingBank b = random_bank(7, 3, rng);
  for (double& v : b.z.values()) v = static_cast<float>(v);
  save_bank(b, path);
  EXPECT_EQ(std::filesystem::file_size(path), 4 + 4 + 4 + 7 * 3 * 4 + 7 * 2u);
  const std::string bytes = read_text_file(path);
  EXPECT_EQ(bytes.substr(0, 4), "TAEB");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 7);
  const EmbeddingBank r = load_bank(path);
  EXPECT_EQ(r.z, b.z);
  EXPECT_EQ(r.labels, b.labels);
}

TEST_F(BankIo, RejectsBadMagicAndTruncation) {
  write_text_file(path, "XXXX");
  EXPECT_THROW(load_bank(path), IoError);
  Rng rng(9);
  save_bank(random_bank(4, 2, rng), path);
  const std::string bytes = read_text_file(path);
  write_text_file(path, bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(load_bank(path), IoError);
}

}  // namespace
}  // namespace triaug::ood
