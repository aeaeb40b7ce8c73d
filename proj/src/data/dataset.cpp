// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "triaug/errors.hpp"
#include "triaug/random.hpp"

namespace triaug::data {

namespace {

constexpr std::uint64_t kCenterStream = 1;
constexpr std::uint64_t kClassStreamBase = 100;
constexpr std::uint64_t kSplitStreamBase = 10000;

std::vector<double> random_direction(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  return v;
}

void set_length(std::vector<double>& v, double length) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x *= length / norm;
}

std::size_t count_malignant(const DatasetSpec& spec) {
  return static_cast<std::size_t>(
      std::lround((1.0 - spec.benign_fraction) * static_cast<double>(spec.id_classes)));
}

}  // namespace

void DatasetSpec::validate() const {
  if (id_classes < 2) throw ConfigError("dataset.id_classes must be at least 2");
  if (id_classes + ood_classes > 65535) throw ConfigError("too many classes for 16-bit labels");
  if (feature_dim == 0) throw ConfigError("dataset.feature_dim must be positive");
  if (!(imbalance_ratio >= 1.0) || !std::isfinite(imbalance_ratio)) {
    throw ConfigError("dataset.imbalance_ratio must be >= 1");
  }
  if (head_class_size == 0) throw ConfigError("dataset.head_class_size must be positive");
  if (ood_classes > 0 && ood_class_size == 0) {
    throw ConfigError("dataset.ood_class_size must be positive when OOD classes exist");
  }
  if (near_ood_classes > ood_classes) {
    throw ConfigError("dataset.near_ood_classes exceeds dataset.ood_classes");
  }
  if (!(cluster_separation > 0.0)) throw ConfigError("dataset.cluster_separation must be positive");
  if (!(intra_class_spread > 0.0)) throw ConfigError("dataset.intra_class_spread must be positive");
  if (!(center_concentration >= 0.0 && center_concentration < 1.0)) {
    throw ConfigError("dataset.center_concentration must lie in [0, 1)");
  }
  if (!(far_ood_distance > 0.0)) throw ConfigError("dataset.far_ood_distance must be positive");
  if (!(benign_fraction > 0.0 && benign_fraction < 1.0)) {
    throw ConfigError("dataset.benign_fraction must lie in (0, 1)");
  }
  const std::size_t mal = count_malignant(*this);
  if (mal == 0 || mal >= id_classes) {
    throw ConfigError("dataset.benign_fraction must leave at least one benign and one malignant ID class");
  }
  if (min_group_size == 0 || min_group_size > max_group_size) {
    throw ConfigError("dataset group sizes must satisfy 1 <= min_group_size <= max_group_size");
  }
}

std::vector<std::size_t> class_sizes(const DatasetSpec& spec) {
  spec.validate();
  const double c_last = static_cast<double>(spec.id_classes - 1);
  const double r = std::pow(spec.imbalance_ratio, -1.0 / c_last);
  std::vector<std::size_t> sizes(spec.id_classes);
  for (std::size_t c = 0; c < spec.id_classes; ++c) {
    const double n = static_cast<double>(spec.head_class_size) * std::pow(r, static_cast<double>(c));
    sizes[c] = static_cast<std::size_t>(std::llround(n));
    if (sizes[c] == 0) {
      throw ConfigError("class " + std::to_string(c) +
                        " rounds to zero samples; increase dataset.head_class_size");
    }
  }
  return sizes;
}

std::vector<std::uint8_t> malignant_mask(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t mal = count_malignant(spec);
  const std::size_t c_count = spec.id_classes;
  std::vector<std::uint8_t> mask(c_count, 0);
  for (std::size_t c = 0; c < c_count; ++c) {
    if ((c + 1) * mal / c_count > c * mal / c_count) mask[c] = 1;
  }
  return mask;
}

Dataset generate(const DatasetSpec& spec) {
  const std::vector<std::size_t> sizes = class_sizes(spec);
  const std::size_t dim = spec.feature_dim;

  Dataset ds;
  ds.spec = spec;
  ds.malignant = malignant_mask(spec);

  Rng center_rng(derive_seed(spec.seed, kCenterStream));
  std::vector<double> anchor = random_direction(dim, center_rng);
  if (dim > 1) {
    anchor[0] = 0.0;
    set_length(anchor, 1.0);
  }
  const double rho = spec.center_concentration;
  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < spec.id_classes; ++c) {
    std::vector<double> v = random_direction(dim, center_rng);
    set_length(v, 1.0);
    for (std::size_t i = 0; i < dim; ++i) v[i] = (1.0 - rho) * v[i] + rho * anchor[i];
    // benign centers in the x_0 > 0 hemisphere, malignant in x_0 < 0
    const double side = ds.malignant[c] ? -1.0 : 1.0;
    if (dim > 1) {
      v[0] = side * (std::abs(v[0]) + 0.5);
    } else {
      v[0] = side;
    }
    set_length(v, spec.cluster_separation);
    centers.push_back(std::move(v));
  }

  std::uniform_int_distribution<std::size_t> pick_class(0, spec.id_classes - 1);
  for (std::size_t o = 0; o < spec.ood_classes; ++o) {
    std::vector<double> v;
    if (o < spec.near_ood_classes) {
      // between two distinct ID clusters, projected back onto the ID sphere
      for (;;) {
        const std::size_t a = pick_class(center_rng);
        const std::size_t b = pick_class(center_rng);
        if (a == b) continue;
        v.assign(dim, 0.0);
        double norm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
          v[i] = centers[a][i] + centers[b][i];
          norm += v[i] * v[i];
        }
        if (norm > 1e-6 * spec.cluster_separation * spec.cluster_separation) break;
      }
      set_length(v, spec.cluster_separation);
    } else {
      v = random_direction(dim, center_rng);
      set_length(v, spec.far_ood_distance * spec.cluster_separation);
    }
    centers.push_back(std::move(v));
    ds.malignant.push_back(centers.back()[0] < 0.0 ? 1 : 0);
  }

  std::uint32_t next_group = 0;
  const std::size_t total_classes = spec.total_classes();
  for (std::size_t c = 0; c < total_classes; ++c) {
    const std::size_t n = c < spec.id_classes ? sizes[c] : spec.ood_class_size;
    Rng rng(derive_seed(spec.seed, kClassStreamBase + c));
    std::normal_distribution<double> noise(0.0, spec.intra_class_spread);
    std::uniform_int_distribution<std::size_t> group_size(spec.min_group_size, spec.max_group_size);

    std::vector<std::uint32_t> groups(n);
    std::size_t filled = 0;
    while (filled < n) {
      std::size_t g = group_size(rng);
      if (n - filled - std::min(g, n - filled) < spec.min_group_size) g = n - filled;
      for (std::size_t i = 0; i < g && filled < n; ++i) groups[filled++] = next_group;
      ++next_group;
    }

    for (std::size_t i = 0; i < n; ++i) {
      LabeledSample s;
      s.x.resize(dim);
      for (std::size_t k = 0; k < dim; ++k) {
        s.x[k] = static_cast<float>(centers[c][k] + noise(rng));
      }
      s.y = static_cast<std::uint32_t>(c);
      s.y_star = ds.malignant[c];
      s.group_id = groups[i];
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

const std::vector<std::size_t>& Splits::indices(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return test;
}

Splits split(const Dataset& dataset, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0) ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  const std::size_t c_id = dataset.id_classes();

  // groups of each ID class, in order of first appearance
  std::vector<std::vector<std::uint32_t>> class_groups(c_id);
  std::map<std::uint32_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const LabeledSample& s = dataset.samples[i];
    if (dataset.is_ood(s)) continue;
    auto [it, inserted] = members.try_emplace(s.group_id);
    if (inserted) class_groups[s.y].push_back(s.group_id);
    it->second.push_back(i);
  }

  Splits out;
  for (std::size_t c = 0; c < c_id; ++c) {
    std::vector<std::uint32_t>& groups = class_groups[c];
    const std::size_t g = groups.size();
    if (g < 3) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(g) +
                        " groups; at least 3 are needed to split");
    }
    Rng rng(derive_seed(seed, kSplitStreamBase + c));
    std::shuffle(groups.begin(), groups.end(), rng);
    const double gd = static_cast<double>(g);
    const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ratios.val * gd)));
    const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ratios.test * gd)));
    if (n_val + n_test >= g) {
      throw ConfigError("class " + std::to_string(c) + " has too few groups for the requested ratios");
    }
    const std::size_t n_train = g - n_val - n_test;
    for (std::size_t k = 0; k < g; ++k) {
      std::vector<std::size_t>& dst = k < n_train ? out.train : (k < n_train + n_val ? out.val : out.test);
      const auto& idx = members.at(groups[k]);
      dst.insert(dst.end(), idx.begin(), idx.end());
    }
  }
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    if (dataset.is_ood(dataset.samples[i])) out.test.push_back(i);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

ClassPriors priors_from_counts(std::vector<std::size_t> counts) {
  ClassPriors p;
  p.total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw DegenerateInputError("class " + std::to_string(c) +
                                 " has no training samples; its log prior would be -inf");
    }
  }
  p.pi.resize(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    p.pi[c] = static_cast<double>(counts[c]) / static_cast<double>(p.total);
  }
  p.counts = std::move(counts);
  return p;
}

ClassPriors class_priors(const SplitView& train, std::size_t num_classes) {
  if (train.empty()) throw DegenerateInputError("class_priors: empty training split");
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const LabeledSample& s = train[i];
    if (s.y >= num_classes) {
      throw DegenerateInputError("class_priors: label " + std::to_string(s.y) +
                                 " outside the " + std::to_string(num_classes) + " ID classes");
    }
    ++counts[s.y];
  }
  return priors_from_counts(std::move(counts));
}

diff::Tensor feature_matrix(const SplitView& view, std::span<const std::size_t> positions) {
  const std::size_t d = view.dataset().feature_dim();
  diff::Tensor out({positions.size(), d});
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const LabeledSample& s = view[positions[r]];
    std::copy(s.x.begin(), s.x.end(), out.row(r).begin());
  }
  return out;
}

diff::Tensor feature_matrix(const SplitView& view) {
  std::vector<std::size_t> all(view.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return feature_matrix(view, all);
}

}  // namespace triaug::data
