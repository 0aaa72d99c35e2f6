// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/errors.hpp"
#include "fpflow/label.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace fpflow::data {

/// One detection.
struct Sample {
  std::int64_t id = 0;
  Eigen::VectorXd x;
  Label label = Label::tp;
  /// Index into Dataset::class_names for FPs, -1 for TPs.
  int fp_class = -1;
  /// Cross-validation fold, -1 when unassigned.
  int fold = -1;

  bool operator==(const Sample& o) const {
    return id == o.id && label == o.label && fp_class == o.fp_class && fold == o.fold &&
           x.size() == o.x.size() && x == o.x;
  }
};

/// Validated collection of samples. Every constructor path checks feature
/// length, finiteness, label/class consistency and id uniqueness.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<Sample> samples, Eigen::Index d_in, std::vector<std::string> class_names,
          std::string provenance = {})
      : samples_(std::move(samples)),
        d_in_(d_in),
        class_names_(std::move(class_names)),
        provenance_(std::move(provenance)) {
    validate();
  }

  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  Eigen::Index d_in() const { return d_in_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  std::size_t count(Label l) const {
    return std::size_t(std::count_if(samples_.begin(), samples_.end(),
                                     [l](const Sample& s) { return s.label == l; }));
  }

  /// Feature rows for the given sample indices.
  Eigen::MatrixXd features(const std::vector<std::size_t>& idx) const {
    Eigen::MatrixXd m(Eigen::Index(idx.size()), d_in_);
    for (std::size_t i = 0; i < idx.size(); ++i) m.row(Eigen::Index(i)) = samples_[idx[i]].x.transpose();
    return m;
  }

  std::vector<std::size_t> indices_where(Label l) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples_.size(); ++i)
      if (samples_[i].label == l) out.push_back(i);
    return out;
  }

  /// Copy restricted to `idx`, in that order.
  Dataset subset(const std::vector<std::size_t>& idx) const {
    std::vector<Sample> s;
    s.reserve(idx.size());
    for (std::size_t i : idx) s.push_back(samples_.at(i));
    return Dataset(std::move(s), d_in_, class_names_, provenance_);
  }

  /// Copy sorted by sample id; experiments run on this canonical order so
  /// results do not depend on file row order.
  Dataset canonical() const {
    std::vector<Sample> s = samples_;
    std::sort(s.begin(), s.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return Dataset(std::move(s), d_in_, class_names_, provenance_);
  }

  bool operator==(const Dataset& o) const {
    return d_in_ == o.d_in_ && class_names_ == o.class_names_ && samples_ == o.samples_;
  }

 private:
  void validate() const {
    if (d_in_ <= 0) throw DataError("dataset: feature dimension must be positive");
    std::vector<std::int64_t> ids;
    ids.reserve(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const Sample& s = samples_[i];
      const std::string where = "dataset: row " + std::to_string(i) + " (id " + std::to_string(s.id) + ")";
      if (s.x.size() != d_in_) {
        throw DataError(where + ": feature length " + std::to_string(s.x.size()) +
                        " != " + std::to_string(d_in_));
      }
      if (!s.x.allFinite()) throw DataError(where + ": non-finite feature value");
      if (s.label == Label::fp) {
        if (s.fp_class < 0 || std::size_t(s.fp_class) >= class_names_.size()) {
          throw DataError(where + ": FP sample without a valid class tag");
        }
      } else if (s.label == Label::tp) {
        if (s.fp_class != -1) throw DataError(where + ": TP sample carries a class tag");
      } else {
        throw DataError(where + ": label outside {TP, FP}");
      }
      ids.push_back(s.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw DataError("dataset: duplicate sample id");
    }
  }

  std::vector<Sample> samples_;
  Eigen::Index d_in_ = 1;
  std::vector<std::string> class_names_;
  std::string provenance_;
};

}  // namespace fpflow::data
