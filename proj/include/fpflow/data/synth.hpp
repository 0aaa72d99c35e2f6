// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/data/dataset.hpp"
#include "fpflow/errors.hpp"
#include "fpflow/random.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fpflow::data {

/// Gaussian component of the TP mixture in the 2-D latent plane.
struct TpComponent {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> stddev{1.0, 1.0};
  double rotation = 0.0;  // radians
  double weight = 1.0;
};

enum class FpShape { gaussian, ring, box, mimic };

inline std::string_view to_string(FpShape s) {
  switch (s) {
    case FpShape::gaussian: return "gaussian";
    case FpShape::ring: return "ring";
    case FpShape::box: return "box";
    case FpShape::mimic: return "mimic";
  }
  return "?";
}

inline std::optional<FpShape> parse_fp_shape(std::string_view s) {
  if (s == "gaussian") return FpShape::gaussian;
  if (s == "ring") return FpShape::ring;
  if (s == "box" || s == "uniform-box") return FpShape::box;
  if (s == "mimic") return FpShape::mimic;
  return std::nullopt;
}

/// One FP class. Latent draws depend on the shape:
///   gaussian: center + scale * N(0, I)
///   ring:     center + (scale + width * N(0,1)) * (cos a, sin a), a ~ U(0, 2 pi)
///   box:      center + U(-scale, scale)^2
///   mimic:    a TP-mixture draw shifted by center
/// and the lifted point is moved by `offplane` along a class-specific unit
/// direction orthogonal to the TP plane.
struct FpClassSpec {
  std::string name;
  FpShape shape = FpShape::gaussian;
  std::array<double, 2> center{0.0, 0.0};
  double scale = 1.0;
  double width = 0.3;
  double offplane = 0.0;
  std::size_t count = 300;
};

/// TPs come from a 2-D Gaussian mixture mapped into R^d_in by an orthonormal
/// d_in x 2 lift, plus isotropic noise on every coordinate.
struct SynthSpec {
  std::size_t d_in = 16;
  std::vector<TpComponent> tp_components;
  std::size_t tp_count = 2000;
  std::vector<FpClassSpec> fp_classes;
  double noise = 0.5;
  /// Use the first two coordinate axes as the lift instead of a random one.
  bool axis_lift = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (d_in < 3) throw ConfigError("synth: d_in must be at least 3");
    if (tp_components.empty()) throw ConfigError("synth: at least one TP component is required");
    if (tp_count < 1) throw ConfigError("synth: tp_count must be >= 1");
    if (!(noise >= 0.0)) throw ConfigError("synth: noise must be non-negative");
    double wsum = 0.0;
    for (const auto& c : tp_components) {
      if (!(c.weight > 0.0) || c.stddev[0] < 0.0 || c.stddev[1] < 0.0) {
        throw ConfigError("synth: TP component weights must be positive and stddevs non-negative");
      }
      wsum += c.weight;
    }
    if (!(wsum > 0.0)) throw ConfigError("synth: invalid TP weights");
    for (const auto& f : fp_classes) {
      if (f.count < 1) throw ConfigError("synth: FP class '" + f.name + "' needs count >= 1");
      if (f.name.empty()) throw ConfigError("synth: FP classes need names");
      if (!(f.scale >= 0.0) || !(f.width >= 0.0)) throw ConfigError("synth: negative scale");
    }
    if (fp_classes.size() + 2 > d_in) {
      throw ConfigError("synth: d_in too small for the number of off-plane directions");
    }
  }
};

/// Named difficulty presets.
///   default    - near-gaussian 3 sigma off a TP component, surrounding ring,
///                uniform box lifted 3 sigma off the TP plane
///   easy       - the same classes 6 sigma away
///   hard       - the same classes about 1 sigma away, overlapping the TPs
///   confounded - FPs share the TP mixture in the plane and differ only by an
///                off-plane shift, meant for dimension-reducing encoders
inline SynthSpec synth_preset(std::string_view name, std::uint64_t seed = 0) {
  SynthSpec s;
  s.seed = seed;
  s.tp_components = {
      {{-3.0, 0.0}, {1.0, 1.0}, 0.0, 1.0},
      {{3.0, 0.0}, {1.0, 1.0}, 0.0, 1.0},
      {{0.0, 3.0}, {1.0, 1.0}, 0.0, 1.0},
  };
  if (name == "default") {
    s.fp_classes = {
        {"near", FpShape::gaussian, {3.0, -3.0}, 1.0, 0.3, 0.0, 300},
        {"ring", FpShape::ring, {0.0, 1.0}, 7.0, 0.4, 0.0, 300},
        {"box", FpShape::box, {0.0, 1.0}, 3.0, 0.3, 3.0, 300},
    };
  } else if (name == "easy") {
    s.fp_classes = {
        {"near", FpShape::gaussian, {3.0, -6.0}, 1.0, 0.3, 0.0, 300},
        {"ring", FpShape::ring, {0.0, 1.0}, 10.0, 0.4, 0.0, 300},
        {"box", FpShape::box, {0.0, 1.0}, 3.0, 0.3, 6.0, 300},
    };
  } else if (name == "hard") {
    s.fp_classes = {
        {"near", FpShape::gaussian, {3.0, -1.0}, 1.0, 0.3, 0.0, 300},
        {"ring", FpShape::ring, {0.0, 1.0}, 4.5, 0.4, 0.0, 300},
        {"box", FpShape::box, {0.0, 1.0}, 3.0, 0.3, 1.0, 300},
    };
  } else if (name == "confounded") {
    s.noise = 0.3;
    s.fp_classes = {
        {"shifted", FpShape::mimic, {0.0, 0.0}, 1.0, 0.3, 1.5, 900},
    };
  } else {
    throw ConfigError("synth: unknown preset '" + std::string(name) +
                      "' (expected default, easy, hard or confounded)");
  }
  return s;
}

namespace detail {

inline Eigen::MatrixXd orthonormal_lift(std::size_t d, bool axis, Rng& rng) {
  if (axis) return Eigen::MatrixXd::Identity(Eigen::Index(d), 2);
  Eigen::MatrixXd g = normal_matrix(Eigen::Index(d), 2, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(Eigen::Index(d), 2);
}

/// Unit vector orthogonal to every column of `basis`.
inline Eigen::VectorXd orthogonal_direction(const Eigen::MatrixXd& basis, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd v = normal_matrix(basis.rows(), 1, rng);
    for (int pass = 0; pass < 2; ++pass) v -= basis * (basis.transpose() * v);
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
  throw ConfigError("synth: could not draw an off-plane direction");
}

inline std::array<double, 2> draw_component(const TpComponent& c, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double a = c.stddev[0] * n01(rng);
  const double b = c.stddev[1] * n01(rng);
  const double cs = std::cos(c.rotation), sn = std::sin(c.rotation);
  return {c.mean[0] + cs * a - sn * b, c.mean[1] + sn * a + cs * b};
}

inline std::size_t pick_component(const std::vector<TpComponent>& comps, Rng& rng) {
  double total = 0.0;
  for (const auto& c : comps) total += c.weight;
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (r < comps[i].weight) return i;
    r -= comps[i].weight;
  }
  return comps.size() - 1;
}

}  // namespace detail

/// Deterministic under spec.seed. Sample ids are 0..n-1, TPs first, then
/// each FP class in order.
inline Dataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto d = Eigen::Index(spec.d_in);
  const Eigen::MatrixXd lift = detail::orthonormal_lift(spec.d_in, spec.axis_lift, rng);
  Eigen::MatrixXd basis = lift;
  std::vector<Eigen::VectorXd> directions;
  for (std::size_t c = 0; c < spec.fp_classes.size(); ++c) {
    directions.push_back(detail::orthogonal_direction(basis, rng));
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = directions.back();
  }

  std::normal_distribution<double> n01(0.0, 1.0);
  auto lifted = [&](const std::array<double, 2>& z) {
    Eigen::VectorXd x = lift.col(0) * z[0] + lift.col(1) * z[1];
    if (spec.noise > 0.0)
      for (Eigen::Index j = 0; j < d; ++j) x(j) += spec.noise * n01(rng);
    return x;
  };

  std::vector<Sample> samples;
  std::int64_t next_id = 0;

  // Deterministic per-component counts: floor of the weighted share, remainder
  // handed out in component order.
  double wsum = 0.0;
  for (const auto& c : spec.tp_components) wsum += c.weight;
  std::vector<std::size_t> counts;
  std::size_t assigned = 0;
  for (const auto& c : spec.tp_components) {
    counts.push_back(std::size_t(std::floor(double(spec.tp_count) * c.weight / wsum)));
    assigned += counts.back();
  }
  for (std::size_t i = 0; assigned < spec.tp_count; i = (i + 1) % counts.size(), ++assigned) counts[i] += 1;

  for (std::size_t k = 0; k < spec.tp_components.size(); ++k) {
    for (std::size_t i = 0; i < counts[k]; ++i) {
      samples.push_back({next_id++, lifted(detail::draw_component(spec.tp_components[k], rng)),
                         Label::tp, -1, -1});
    }
  }

  std::vector<std::string> names;
  for (std::size_t c = 0; c < spec.fp_classes.size(); ++c) {
    const auto& f = spec.fp_classes[c];
    names.push_back(f.name);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> box(-f.scale, f.scale);
    for (std::size_t i = 0; i < f.count; ++i) {
      std::array<double, 2> z{};
      switch (f.shape) {
        case FpShape::gaussian:
          z = {f.center[0] + f.scale * n01(rng), f.center[1] + f.scale * n01(rng)};
          break;
        case FpShape::ring: {
          const double a = angle(rng);
          const double r = f.scale + f.width * n01(rng);
          z = {f.center[0] + r * std::cos(a), f.center[1] + r * std::sin(a)};
          break;
        }
        case FpShape::box:
          z = {f.center[0] + box(rng), f.center[1] + box(rng)};
          break;
        case FpShape::mimic: {
          const auto& comp = spec.tp_components[detail::pick_component(spec.tp_components, rng)];
          z = detail::draw_component(comp, rng);
          z[0] += f.center[0];
          z[1] += f.center[1];
          break;
        }
      }
      Eigen::VectorXd x = lifted(z) + f.offplane * directions[c];
      samples.push_back({next_id++, std::move(x), Label::fp, int(c), -1});
    }
  }
  return Dataset(std::move(samples), d, std::move(names), "synth:seed=" + std::to_string(spec.seed));
}

/// Two interleaved half circles with Gaussian noise, n rows of 2-D points.
inline Eigen::MatrixXd two_moons(std::size_t n, double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd out(Eigen::Index(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = u(rng);
    double x, y;
    if (i % 2 == 0) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    out(Eigen::Index(i), 0) = x + noise * n01(rng);
    out(Eigen::Index(i), 1) = y + noise * n01(rng);
  }
  return out;
}

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json to_json(const SynthSpec& s) {
  nlohmann::json j;
  j["d_in"] = s.d_in;
  j["tp_count"] = s.tp_count;
  j["noise"] = s.noise;
  j["axis_lift"] = s.axis_lift;
  j["seed"] = s.seed;
  j["tp_components"] = nlohmann::json::array();
  for (const auto& c : s.tp_components) {
    j["tp_components"].push_back(
        {{"mean", c.mean}, {"stddev", c.stddev}, {"rotation", c.rotation}, {"weight", c.weight}});
  }
  j["fp_classes"] = nlohmann::json::array();
  for (const auto& f : s.fp_classes) {
    j["fp_classes"].push_back({{"name", f.name},
                               {"shape", std::string(to_string(f.shape))},
                               {"center", f.center},
                               {"scale", f.scale},
                               {"width", f.width},
                               {"offplane", f.offplane},
                               {"count", f.count}});
  }
  return j;
}

/// Fields missing from `j` keep the values of `base`, so a file can override
/// a preset partially. Component/class lists replace the preset lists.
inline SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec base = synth_preset("default")) {
  try {
    SynthSpec s = std::move(base);
    s.d_in = j.value("d_in", s.d_in);
    s.tp_count = j.value("tp_count", s.tp_count);
    s.noise = j.value("noise", s.noise);
    s.axis_lift = j.value("axis_lift", s.axis_lift);
    s.seed = j.value("seed", s.seed);
    if (j.contains("tp_components")) {
      s.tp_components.clear();
      for (const auto& c : j.at("tp_components")) {
        TpComponent tc;
        tc.mean = c.value("mean", tc.mean);
        tc.stddev = c.value("stddev", tc.stddev);
        tc.rotation = c.value("rotation", tc.rotation);
        tc.weight = c.value("weight", tc.weight);
        s.tp_components.push_back(tc);
      }
    }
    if (j.contains("fp_classes")) {
      s.fp_classes.clear();
      for (const auto& f : j.at("fp_classes")) {
        FpClassSpec fc;
        fc.name = f.at("name").get<std::string>();
        const auto shape = parse_fp_shape(f.value("shape", std::string("gaussian")));
        if (!shape) throw ConfigError("synth: unknown FP shape in class '" + fc.name + "'");
        fc.shape = *shape;
        fc.center = f.value("center", fc.center);
        fc.scale = f.value("scale", fc.scale);
        fc.width = f.value("width", fc.width);
        fc.offplane = f.value("offplane", fc.offplane);
        fc.count = f.value("count", fc.count);
        s.fp_classes.push_back(fc);
      }
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
}

}  // namespace fpflow::data
