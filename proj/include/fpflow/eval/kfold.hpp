// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/data/dataset.hpp"
#include "fpflow/errors.hpp"
#include "fpflow/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace fpflow::eval {

struct FoldSplit {
  int fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Stratum key: TPs are (0, -1), FPs are (1, class).
using StratumKey = std::pair<int, int>;

inline std::map<StratumKey, std::vector<std::size_t>> strata(const data::Dataset& ds) {
  std::map<StratumKey, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.samples()[i];
    out[{int(s.label), s.fp_class}].push_back(i);
  }
  return out;
}

/// Stratified k-fold split. Test folds partition the dataset; within each
/// fold, `val_fraction` of the whole dataset is drawn per stratum from the
/// non-test part (so k=5, val_fraction=0.1 gives 7:1:2).
inline std::vector<FoldSplit> kfold_split(const data::Dataset& ds, int k, double val_fraction,
                                          std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold: k must be at least 2");
  const double test_fraction = 1.0 / double(k);
  if (!(val_fraction >= 0.0 && val_fraction < 1.0 - test_fraction)) {
    throw ConfigError("kfold: val_fraction must lie in [0, 1 - 1/k)");
  }
  const auto groups = strata(ds);
  for (const auto& [key, idx] : groups) {
    if (idx.size() < std::size_t(k)) {
      const std::string name = key.first == 0 ? std::string("TP")
                                              : "FP class '" + ds.class_names()[std::size_t(key.second)] + "'";
      throw ConfigError("kfold: " + name + " has " + std::to_string(idx.size()) + " samples, fewer than k=" +
                        std::to_string(k));
    }
  }

  // Test assignment: shuffle each stratum, then deal round-robin with an
  // offset carried across strata so fold sizes differ by at most one.
  std::vector<std::vector<std::vector<std::size_t>>> per_stratum_test;  // [stratum][fold]
  std::size_t offset = 0;
  for (const auto& [key, idx] : groups) {
    std::vector<std::size_t> order = idx;
    Rng rng(derive_seed(seed, {1, std::uint64_t(key.first), std::uint64_t(key.second + 1)}));
    shuffle_in_place(order, rng);
    std::vector<std::vector<std::size_t>> by_fold(static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < order.size(); ++j) by_fold[(offset + j) % std::size_t(k)].push_back(order[j]);
    offset = (offset + order.size()) % std::size_t(k);
    per_stratum_test.push_back(std::move(by_fold));
  }

  const double val_ratio = val_fraction / (1.0 - test_fraction);
  std::vector<FoldSplit> folds;
  for (int f = 0; f < k; ++f) {
    FoldSplit split;
    split.fold = f;
    // Non-test members per stratum, and their largest-remainder val counts.
    std::vector<std::vector<std::size_t>> rest;
    std::vector<double> quota;
    double total_nontest = 0.0;
    std::size_t s = 0;
    for (const auto& [key, idx] : groups) {
      std::vector<std::size_t> in_test = per_stratum_test[s][std::size_t(f)];
      std::sort(in_test.begin(), in_test.end());
      std::vector<std::size_t> r;
      for (std::size_t i : idx)
        if (!std::binary_search(in_test.begin(), in_test.end(), i)) r.push_back(i);
      split.test.insert(split.test.end(), in_test.begin(), in_test.end());
      Rng rng(derive_seed(seed, {2, std::uint64_t(f), std::uint64_t(key.first), std::uint64_t(key.second + 1)}));
      shuffle_in_place(r, rng);
      quota.push_back(double(r.size()) * val_ratio);
      total_nontest += double(r.size());
      rest.push_back(std::move(r));
      ++s;
    }
    const auto target = std::size_t(std::llround(total_nontest * val_ratio));
    std::vector<std::size_t> count(rest.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < rest.size(); ++i) {
      count[i] = std::size_t(std::floor(quota[i]));
      assigned += count[i];
    }
    std::vector<std::size_t> by_remainder(rest.size());
    for (std::size_t i = 0; i < rest.size(); ++i) by_remainder[i] = i;
    std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
      return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
    });
    for (std::size_t j = 0; assigned < target && j < by_remainder.size(); ++j) {
      const std::size_t i = by_remainder[j];
      if (count[i] < rest[i].size()) {
        ++count[i];
        ++assigned;
      }
    }
    for (std::size_t i = 0; i < rest.size(); ++i) {
      split.val.insert(split.val.end(), rest[i].begin(), rest[i].begin() + std::ptrdiff_t(count[i]));
      split.train.insert(split.train.end(), rest[i].begin() + std::ptrdiff_t(count[i]), rest[i].end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    folds.push_back(std::move(split));
  }
  return folds;
}

struct Holdout {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Single stratified train/validation split: round(fraction * n) members of
/// every stratum go to validation.
inline Holdout holdout_split(const data::Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout: val_fraction must lie in [0, 1)");
  Holdout h;
  for (const auto& [key, idx] : strata(ds)) {
    std::vector<std::size_t> order = idx;
    Rng rng(derive_seed(seed, {3, std::uint64_t(key.first), std::uint64_t(key.second + 1)}));
    shuffle_in_place(order, rng);
    const auto n_val = std::min(order.size(), std::size_t(std::llround(fraction * double(order.size()))));
    h.val.insert(h.val.end(), order.begin(), order.begin() + std::ptrdiff_t(n_val));
    h.train.insert(h.train.end(), order.begin() + std::ptrdiff_t(n_val), order.end());
  }
  std::sort(h.train.begin(), h.train.end());
  std::sort(h.val.begin(), h.val.end());
  return h;
}

/// Downsamples the majority label so both labels appear equally often.
inline std::vector<std::size_t> balance_labels(const data::Dataset& ds, const std::vector<std::size_t>& idx,
                                               std::uint64_t seed) {
  std::vector<std::size_t> tp, fp;
  for (std::size_t i : idx) (ds.samples()[i].label == Label::tp ? tp : fp).push_back(i);
  auto& major = tp.size() > fp.size() ? tp : fp;
  const std::size_t keep = std::min(tp.size(), fp.size());
  Rng rng(seed);
  shuffle_in_place(major, rng);
  major.resize(keep);
  std::vector<std::size_t> out = tp;
  out.insert(out.end(), fp.begin(), fp.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fpflow::eval
