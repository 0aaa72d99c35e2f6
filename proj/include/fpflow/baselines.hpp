// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace fpflow::baselines {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Kind { kde, pca, gaussian };

inline std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::kde: return "kde";
    case Kind::pca: return "pca";
    case Kind::gaussian: return "gaussian";
  }
  return "?";
}

inline std::optional<Kind> parse_kind(std::string_view s) {
  if (s == "kde") return Kind::kde;
  if (s == "pca") return Kind::pca;
  if (s == "gaussian") return Kind::gaussian;
  return std::nullopt;
}

struct BaselineConfig {
  Kind kind = Kind::kde;
  /// KDE bandwidth; unset means Scott's factor n^(-1/(d+4)) times the mean
  /// per-feature standard deviation.
  std::optional<double> bandwidth;
  /// PCA component count.
  Eigen::Index pca_k = 2;
  /// Covariance shrinkage toward tr(S)/d * I.
  double shrinkage = 0.05;
};

struct KdeModel {
  Matrix points;
  double bandwidth = 1.0;
};

struct PcaModel {
  Vector mean;
  Matrix basis;  // d x k, orthonormal columns
};

struct GaussianModel {
  Vector mean;
  Matrix covariance;
  Eigen::LLT<Matrix> chol;
};

using BaselineModel = std::variant<KdeModel, PcaModel, GaussianModel>;

inline double scott_bandwidth(const Matrix& x) {
  const double n = double(x.rows());
  const double d = double(x.cols());
  const Vector mean = x.colwise().mean();
  const Vector sd = ((x.rowwise() - mean.transpose()).array().square().colwise().sum() / (n - 1.0)).sqrt();
  return std::pow(n, -1.0 / (d + 4.0)) * sd.mean();
}

/// Sample covariance (n - 1 normalization).
inline Matrix sample_covariance(const Matrix& x, const Vector& mean) {
  const Matrix c = x.rowwise() - mean.transpose();
  return (c.transpose() * c) / double(x.rows() - 1);
}

inline KdeModel fit_kde(const Matrix& x, std::optional<double> bandwidth = std::nullopt) {
  if (x.rows() < 2) throw ConfigError("kde: at least 2 samples are required");
  const double bw = bandwidth ? *bandwidth : scott_bandwidth(x);
  if (!(bw > 0.0) || !std::isfinite(bw)) {
    throw NumericError("kde: bandwidth is not positive (constant features?); pass an explicit bandwidth");
  }
  return {x, bw};
}

inline PcaModel fit_pca(const Matrix& x, Eigen::Index k) {
  if (x.rows() < 2) throw ConfigError("pca: at least 2 samples are required");
  if (k < 1 || k > std::min<Eigen::Index>(x.rows() - 1, x.cols())) {
    throw ConfigError("pca: k=" + std::to_string(k) + " must lie in [1, min(n-1, d)] = [1, " +
                      std::to_string(std::min<Eigen::Index>(x.rows() - 1, x.cols())) + "]");
  }
  PcaModel m;
  m.mean = x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sample_covariance(x, m.mean));
  if (es.info() != Eigen::Success) throw NumericError("pca: eigen decomposition failed");
  // Eigenvalues ascend; take the last k columns, largest first.
  m.basis.resize(x.cols(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Vector v = es.eigenvectors().col(x.cols() - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;  // sign convention: largest-magnitude entry positive
    m.basis.col(j) = v;
  }
  return m;
}

inline GaussianModel fit_gaussian(const Matrix& x, double shrinkage) {
  if (x.rows() < 2) throw ConfigError("gaussian: at least 2 samples are required");
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ConfigError("gaussian: shrinkage must lie in [0, 1]");
  GaussianModel m;
  m.mean = x.colwise().mean();
  const Matrix s = sample_covariance(x, m.mean);
  const double iso = s.trace() / double(x.cols());
  m.covariance = (1.0 - shrinkage) * s + shrinkage * iso * Matrix::Identity(x.cols(), x.cols());
  m.chol.compute(m.covariance);
  // Treat a pivot below 1e-10 of the largest as singular; rounding can leave
  // tiny positive pivots for rank-deficient data.
  const Vector piv = m.chol.matrixLLT().diagonal();
  if (m.chol.info() != Eigen::Success || !(piv.minCoeff() > 1e-10 * piv.maxCoeff())) {
    throw NumericError("gaussian: covariance is not positive definite with shrinkage " +
                       std::to_string(shrinkage) + "; raise the shrinkage");
  }
  return m;
}

inline BaselineModel fit_baseline(const BaselineConfig& cfg, const Matrix& tp) {
  switch (cfg.kind) {
    case Kind::kde: return fit_kde(tp, cfg.bandwidth);
    case Kind::pca: return fit_pca(tp, cfg.pca_k);
    case Kind::gaussian: return fit_gaussian(tp, cfg.shrinkage);
  }
  throw ConfigError("unknown baseline kind");
}

/// -log((1/n) sum_i N(x; x_i, bw^2 I)), evaluated with log-sum-exp.
inline Vector score(const KdeModel& m, const Matrix& x) {
  const double d = double(m.points.cols());
  const double h2 = m.bandwidth * m.bandwidth;
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi * h2) - std::log(double(m.points.rows()));
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector e = -0.5 * (m.points.rowwise() - x.row(i)).rowwise().squaredNorm() / h2;
    const double top = e.maxCoeff();
    out(i) = -(top + std::log((e.array() - top).exp().sum()) + log_norm);
  }
  return out;
}

/// Squared reconstruction error after projecting onto the principal subspace.
inline Vector score(const PcaModel& m, const Matrix& x) {
  const Matrix c = x.rowwise() - m.mean.transpose();
  const Matrix resid = c - (c * m.basis) * m.basis.transpose();
  return resid.rowwise().squaredNorm();
}

/// Squared Mahalanobis distance.
inline Vector score(const GaussianModel& m, const Matrix& x) {
  const Matrix c = (x.rowwise() - m.mean.transpose()).transpose();
  const Matrix w = m.chol.matrixL().solve(c);
  return w.colwise().squaredNorm().transpose();
}

inline Eigen::Index input_dim(const BaselineModel& m) {
  return std::visit(
      [](const auto& v) -> Eigen::Index {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, KdeModel>) return v.points.cols();
        else return v.mean.size();
      },
      m);
}

inline Vector score_baseline(const BaselineModel& m, const Matrix& x) {
  if (x.cols() != input_dim(m)) {
    throw std::invalid_argument("baseline: input has " + std::to_string(x.cols()) + " features, model expects " +
                                std::to_string(input_dim(m)));
  }
  return std::visit([&](const auto& v) { return score(v, x); }, m);
}

}  // namespace fpflow::baselines
