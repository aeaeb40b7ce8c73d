// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "triaug/common/keyvalue.hpp"
#include "triaug/data/augment.hpp"
#include "triaug/data/dataset.hpp"
#include "triaug/data/dataset_io.hpp"
#include "triaug/errors.hpp"

namespace triaug::data {
namespace {

namespace fs = std::filesystem;

DatasetSpec small_spec() {
  DatasetSpec s;
  s.head_class_size = 120;
  s.imbalance_ratio = 8.0;
  s.ood_class_size = 20;
  s.feature_dim = 16;
  return s;
}

// Hand-built dataset: class c gets groups[c] groups of `per_group` samples.
Dataset grouped_dataset(const std::vector<std::size_t>& groups, std::size_t per_group, std::size_t ood_groups = 0) {
  Dataset ds;
  ds.spec.id_classes = groups.size();
  ds.spec.ood_classes = ood_groups ? 1 : 0;
  ds.spec.feature_dim = 2;
  std::uint32_t gid = 0;
  auto add_class = [&](std::uint32_t c, std::size_t n_groups) {
    for (std::size_t g = 0; g < n_groups; ++g, ++gid) {
      for (std::size_t k = 0; k < per_group; ++k) ds.samples.push_back({{float(c), float(k)}, c, 0, gid});
    }
  };
  for (std::size_t c = 0; c < groups.size(); ++c) add_class(static_cast<std::uint32_t>(c), groups[c]);
  if (ood_groups) add_class(static_cast<std::uint32_t>(groups.size()), ood_groups);
  ds.malignant.assign(groups.size() + (ood_groups ? 1 : 0), 0);
  return ds;
}

TEST(ClassSizes, DefaultProfileMatchesImbalanceRatio) {
  const DatasetSpec spec;
  const auto n = class_sizes(spec);
  ASSERT_EQ(n.size(), 8u);
  EXPECT_EQ(n.front(), 960u);
  EXPECT_GE(n.back(), 20u);
  const double ratio = double(n.front()) / double(n.back());
  EXPECT_GE(ratio, 46.0);
  EXPECT_LE(ratio, 50.0);
  EXPECT_TRUE(std::is_sorted(n.rbegin(), n.rend()));
}

TEST(ClassSizes, FollowsGeometricProfile) {
  const DatasetSpec spec;
  const auto n = class_sizes(spec);
  const double r = std::pow(spec.imbalance_ratio, -1.0 / 7.0);
  for (std::size_t c = 0; c < n.size(); ++c) {
    EXPECT_EQ(n[c], static_cast<std::size_t>(std::llround(960.0 * std::pow(r, double(c)))));
  }
}

TEST(ClassSizes, RatioOneIsBalanced) {
  DatasetSpec spec;
  spec.imbalance_ratio = 1.0;
  const auto n = class_sizes(spec);
  EXPECT_TRUE(std::all_of(n.begin(), n.end(), [&](std::size_t v) { return v == n.front(); }));
}

TEST(ClassSizes, TailRoundingToZeroAsksForLargerHead) {
  DatasetSpec spec;
  spec.head_class_size = 10;
  spec.imbalance_ratio = 100.0;
  try {
    class_sizes(spec);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("head_class_size"), std::string::npos);
  }
}

TEST(DatasetSpec, RejectsInvalidSpecs) {
  DatasetSpec s;
  s.id_classes = 1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.imbalance_ratio = 0.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.benign_fraction = 1.0;  // no malignant class left
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.benign_fraction = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.center_concentration = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.near_ood_classes = 6;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(MalignantMask, DefaultHasTwoEvenlySpreadMalignantClasses) {
  const auto m = malignant_mask(DatasetSpec{});
  EXPECT_EQ(m, (std::vector<std::uint8_t>{0, 0, 0, 1, 0, 0, 0, 1}));
}

TEST(Generate, SameSeedIsBitIdentical) {
  const auto a = generate(small_spec());
  const auto b = generate(small_spec());
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.malignant, b.malignant);
  DatasetSpec other = small_spec();
  other.seed = 1;
  EXPECT_NE(generate(other).samples, a.samples);
}

TEST(Generate, SizesLabelsAndGroups) {
  const DatasetSpec spec = small_spec();
  const auto ds = generate(spec);
  const auto sizes = class_sizes(spec);
  std::vector<std::size_t> count(spec.total_classes(), 0);
  std::map<std::uint32_t, std::set<std::uint32_t>> classes_of_group;
  std::map<std::uint32_t, std::size_t> group_size;
  for (const auto& s : ds.samples) {
    ASSERT_EQ(s.x.size(), spec.feature_dim);
    ++count[s.y];
    EXPECT_EQ(s.y_star, ds.malignant[s.y]);
    classes_of_group[s.group_id].insert(s.y);
    ++group_size[s.group_id];
  }
  for (std::size_t c = 0; c < spec.id_classes; ++c) EXPECT_EQ(count[c], sizes[c]);
  for (std::size_t c = spec.id_classes; c < spec.total_classes(); ++c) EXPECT_EQ(count[c], spec.ood_class_size);
  for (const auto& [g, cls] : classes_of_group) EXPECT_EQ(cls.size(), 1u) << "group " << g;
  for (const auto& [g, n] : group_size) {
    EXPECT_GE(n, spec.min_group_size);
    EXPECT_LE(n, spec.max_group_size);
  }
}

std::vector<std::vector<double>> class_means(const Dataset& ds) {
  std::vector<std::vector<double>> mean(ds.spec.total_classes(), std::vector<double>(ds.feature_dim(), 0.0));
  std::vector<std::size_t> n(ds.spec.total_classes(), 0);
  for (const auto& s : ds.samples) {
    ++n[s.y];
    for (std::size_t k = 0; k < s.x.size(); ++k) mean[s.y][k] += s.x[k];
  }
  for (std::size_t c = 0; c < mean.size(); ++c) {
    for (double& v : mean[c]) v /= double(n[c]);
  }
  return mean;
}

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

TEST(Generate, HemispheresAndOodPlacement) {
  DatasetSpec spec;
  spec.near_ood_classes = 2;
  const auto ds = generate(spec);
  const auto mean = class_means(ds);
  for (std::size_t c = 0; c < spec.id_classes; ++c) {
    // benign in x0 > 0, malignant in x0 < 0
    EXPECT_EQ(mean[c][0] < 0.0, ds.malignant[c] == 1) << "class " << c;
    EXPECT_NEAR(norm(mean[c]), spec.cluster_separation, 1.5) << "class " << c;
  }
  for (std::size_t o = 0; o < spec.ood_classes; ++o) {
    const double expected = o < spec.near_ood_classes ? spec.cluster_separation
                                                      : spec.far_ood_distance * spec.cluster_separation;
    EXPECT_NEAR(norm(mean[spec.id_classes + o]), expected, 1.5) << "OOD class " << o;
  }
}

TEST(Generate, FarOodIsFartherFromIdThanIdClassesAreFromEachOther) {
  const DatasetSpec spec;
  const auto mean = class_means(generate(spec));
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  };
  double max_id = 0.0;
  for (std::size_t a = 0; a < spec.id_classes; ++a) {
    for (std::size_t b = a + 1; b < spec.id_classes; ++b) max_id = std::max(max_id, dist(mean[a], mean[b]));
  }
  for (std::size_t o = spec.id_classes; o < spec.total_classes(); ++o) {
    for (std::size_t c = 0; c < spec.id_classes; ++c) EXPECT_GT(dist(mean[o], mean[c]), max_id);
  }
}

TEST(Split, TenGroupsSplitSevenOneTwo) {
  const auto ds = grouped_dataset({10, 10}, 3, 4);
  const auto sp = split(ds, {}, 9);
  auto groups_in = [&](const std::vector<std::size_t>& idx, std::uint32_t cls) {
    std::set<std::uint32_t> g;
    for (auto i : idx) {
      if (ds.samples[i].y == cls) g.insert(ds.samples[i].group_id);
    }
    return g.size();
  };
  for (std::uint32_t c = 0; c < 2; ++c) {
    EXPECT_EQ(groups_in(sp.train, c), 7u);
    EXPECT_EQ(groups_in(sp.val, c), 1u);
    EXPECT_EQ(groups_in(sp.test, c), 2u);
  }
}

TEST(Split, NoGroupStraddlesAndOodOnlyInTest) {
  const auto ds = generate(small_spec());
  const auto sp = split(ds, {}, 3);
  std::map<std::uint32_t, int> where;
  std::size_t seen = 0;
  for (int part = 0; part < 3; ++part) {
    for (auto i : sp.indices(static_cast<Split>(part))) {
      ++seen;
      const auto& s = ds.samples[i];
      auto [it, inserted] = where.try_emplace(s.group_id, part);
      EXPECT_EQ(it->second, part) << "group " << s.group_id << " straddles splits";
      if (part != 2) {
        EXPECT_FALSE(ds.is_ood(s));
      }
    }
  }
  EXPECT_EQ(seen, ds.samples.size());
  std::size_t ood_in_test = 0;
  for (auto i : sp.test) ood_in_test += ds.is_ood(ds.samples[i]);
  EXPECT_EQ(ood_in_test, small_spec().ood_classes * small_spec().ood_class_size);
}

TEST(Split, DeterministicGivenSeed) {
  const auto ds = generate(small_spec());
  const auto a = split(ds, {}, 5);
  const auto b = split(ds, {}, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_NE(split(ds, {}, 6).train, a.train);
}

TEST(Split, TooFewGroupsNamesTheClass) {
  const auto ds = grouped_dataset({10, 2}, 3);
  try {
    split(ds, {}, 0);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(split(grouped_dataset({10, 10}, 3), {0.5, 0.5, 0.5}, 0), ConfigError);
  EXPECT_THROW(split(grouped_dataset({10, 10}, 3), {1.0, 0.0, 0.0}, 0), ConfigError);
}

TEST(Priors, UniformAndHandCounts) {
  const auto u = priors_from_counts({100, 100, 100, 100});
  for (double p : u.pi) EXPECT_EQ(p, 0.25);
  const auto p = priors_from_counts({90, 9, 1});
  EXPECT_DOUBLE_EQ(p.pi[0], 0.90);
  EXPECT_DOUBLE_EQ(p.pi[1], 0.09);
  EXPECT_DOUBLE_EQ(p.pi[2], 0.01);
  EXPECT_EQ(p.total, 100u);
  EXPECT_THROW(priors_from_counts({5, 0, 3}), DegenerateInputError);
}

TEST(Priors, GeneratedTrainSplitMatchesRecount) {
  const DatasetSpec spec;
  const auto ds = generate(spec);
  const auto sp = split(ds, {}, 0);
  const auto pri = class_priors(sp.view(ds, Split::train), spec.id_classes);
  std::vector<std::size_t> recount(spec.id_classes, 0);
  for (auto i : sp.train) ++recount[ds.samples[i].y];
  EXPECT_EQ(pri.counts, recount);
  EXPECT_EQ(std::accumulate(recount.begin(), recount.end(), std::size_t{0}), pri.total);
  double sum = 0.0;
  for (std::size_t c = 0; c < pri.pi.size(); ++c) {
    EXPECT_EQ(pri.pi[c], double(recount[c]) / double(pri.total));
    sum += pri.pi[c];
  }
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_TRUE(std::is_sorted(pri.pi.rbegin(), pri.pi.rend()));
}

TEST(Priors, EmptyClassOrEmptySplitThrows) {
  const auto ds = grouped_dataset({10, 10}, 3);
  const std::vector<std::size_t> only_class0{0, 1, 2};
  EXPECT_THROW(class_priors(SplitView(ds, only_class0, Split::train), 2), DegenerateInputError);
  EXPECT_THROW(class_priors(SplitView(ds, {}, Split::train), 2), DegenerateInputError);
}

TEST(AccessLog, CountsReadsPerSplitAndOrigin) {
  const auto ds = grouped_dataset({5, 5}, 2, 3);
  const auto sp = split(ds, {}, 1);
  AccessLog log;
  const auto train = sp.view(ds, Split::train, &log);
  for (std::size_t i = 0; i < train.size(); ++i) (void)train[i];
  EXPECT_EQ(log.reads[0], train.size());
  EXPECT_EQ(log.total_ood_reads(), 0u);
  const auto test = sp.view(ds, Split::test, &log);
  (void)feature_matrix(test);
  EXPECT_EQ(log.ood_reads[2], 6u);
}

TEST(Augment, MagnitudeZeroIsIdentityForEveryOp) {
  Rng rng(1);
  const auto x = testing::random_tensor({1, 32}, rng);
  for (AugmentOp op : AugmentationPolicy{}.op_pool) {
    std::vector<double> y(x.values().begin(), x.values().end());
    apply_augment_op(op, y, 0.0, rng);
    EXPECT_TRUE(std::equal(y.begin(), y.end(), x.values().begin())) << to_string(op);
  }
  AugmentationPolicy p;
  p.magnitude = 0.0;
  p.num_ops = 4;
  const auto y = rand_augment(x.values(), p, rng);
  EXPECT_TRUE(std::equal(y.begin(), y.end(), x.values().begin()));
}

TEST(Augment, ReproducibleWithFixedSeedAndShapePreserving) {
  Rng data_rng(2);
  const auto batch = testing::random_tensor({8, 24}, data_rng);
  const AugmentationPolicy p{3, 0.7};
  Rng r1(42), r2(42);
  const auto a = rand_augment_rows(batch, p, r1);
  const auto b = rand_augment_rows(batch, p, r2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.shape(), batch.shape());
  EXPECT_TRUE(a.all_finite());
  EXPECT_NE(a, batch);
}

TEST(Augment, FullMagnitudeNoiseAlwaysMoves) {
  Rng rng(3);
  std::size_t moved = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto x = testing::random_tensor({1, 16}, rng);
    std::vector<double> y(x.values().begin(), x.values().end());
    apply_augment_op(AugmentOp::gaussian_noise, y, 1.0, rng);
    double d = 0;
    for (std::size_t k = 0; k < y.size(); ++k) d += (y[k] - x[k]) * (y[k] - x[k]);
    moved += d > 0.0;
  }
  EXPECT_EQ(moved, 1000u);
}

TEST(Augment, PolicyValidation) {
  AugmentationPolicy p;
  p.magnitude = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.op_pool.clear();
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Mix, BoundaryAndSymmetricCases) {
  Rng rng(4);
  const auto a = testing::random_tensor({3, 5}, rng);
  const auto b = testing::random_tensor({3, 5}, rng);
  EXPECT_EQ(mix(a, b, 1.0), a);
  EXPECT_EQ(mix(a, b, 0.0), b);
  diff::Tensor neg = a;
  for (double& v : neg.values()) v = -v;
  const auto zero = mix(a, neg, 0.5);
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
}

TEST(Mix, ReverseMixIsMixWithComplementWeight) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = testing::random_tensor({2, 7}, rng);
    const auto b = testing::random_tensor({2, 7}, rng);
    const double lam = sample_lambda(rng);
    EXPECT_EQ(reverse_mix(a, b, lam), mix(a, b, 1.0 - lam));
    const auto m = mix(a, b, lam);
    const auto r = reverse_mix(a, b, lam);
    for (std::size_t i = 0; i < m.numel(); ++i) EXPECT_NEAR(m[i] + r[i], a[i] + b[i], 1e-15);
  }
}

TEST(Mix, RejectsBadLambdaAndShapes) {
  const diff::Tensor a = diff::Tensor::vector({1, 2});
  EXPECT_THROW(mix(a, a, 1.5), DegenerateInputError);
  EXPECT_THROW(mix(a, a, -0.1), DegenerateInputError);
  EXPECT_THROW(reverse_mix(a, a, 2.0), DegenerateInputError);
  EXPECT_THROW(mix(a, diff::Tensor::vector({1, 2, 3}), 0.5), ShapeError);
}

TEST(Lambda, DyadicGridAndUniformMoments) {
  Rng rng(6);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double lam = sample_lambda(rng);
    ASSERT_GE(lam, 0.0);
    ASSERT_LE(lam, 1.0);
    const double k = lam * 4294967296.0;
    ASSERT_EQ(k, std::floor(k));
    ASSERT_EQ(1.0 - (1.0 - lam), lam);
    sum += lam;
    sq += lam * lam;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.005);
}

TEST(Triple, PartnersArePermutedBatchRows) {
  Rng rng(7);
  const auto x = testing::random_tensor({6, 3}, rng);
  const std::vector<std::size_t> y{0, 1, 2, 3, 4, 5};
  const std::vector<std::uint8_t> ys{0, 1, 0, 1, 0, 1};
  const auto t = make_triple(x, y, ys, rng);
  EXPECT_EQ(t.x_i, x);
  EXPECT_EQ(t.y_i, y);
  std::vector<std::size_t> sorted = t.y_j;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, y);
  for (std::size_t r = 0; r < 6; ++r) {
    const std::size_t src = t.y_j[r];
    EXPECT_TRUE(std::equal(t.x_j.row(r).begin(), t.x_j.row(r).end(), x.row(src).begin()));
    EXPECT_EQ(t.y_star_j[r], ys[src]);
  }
  const std::vector<std::size_t> short_y{0, 1};
  EXPECT_THROW(make_triple(x, short_y, ys, rng), ShapeError);
}

class DatasetIo : public ::testing::Test {
 protected:
  fs::path dir = fs::temp_directory_path() /
                 (std::string("triaug_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  void TearDown() override { fs::remove_all(dir); }
};

TEST_F(DatasetIo, RoundTripIsLossless) {
  const auto ds = generate(small_spec());
  save_dataset(ds, dir / "a");
  const auto back = load_dataset(dir / "a");
  EXPECT_EQ(back.samples, ds.samples);
  EXPECT_EQ(back.malignant, ds.malignant);
  KeyValueDoc a, b;
  write_spec(ds.spec, a);
  write_spec(back.spec, b);
  EXPECT_EQ(a.to_text(), b.to_text());
}

TEST_F(DatasetIo, RegenerationIsByteIdentical) {
  save_dataset(generate(small_spec()), dir / "a");
  save_dataset(generate(small_spec()), dir / "b");
  for (const char* f : {kManifestFile, kSamplesFile}) {
    EXPECT_EQ(read_text_file(dir / "a" / f), read_text_file(dir / "b" / f)) << f;
  }
}

TEST_F(DatasetIo, HeaderAndCountsAreChecked) {
  save_dataset(generate(small_spec()), dir / "a");
  const std::string text = read_text_file(dir / "a" / kSamplesFile);
  const std::string body = text.substr(text.find('\n'));
  write_text_file(dir / "a" / kSamplesFile, "17,8,5" + body);
  EXPECT_THROW(load_dataset(dir / "a"), IoError);
  write_text_file(dir / "a" / kSamplesFile, "16,8,5" + body.substr(0, body.rfind('\n', body.size() - 2) + 1));
  EXPECT_THROW(load_dataset(dir / "a"), IoError);
  EXPECT_THROW(load_dataset(dir / "missing"), IoError);
}

}  // namespace
}  // namespace triaug::data
