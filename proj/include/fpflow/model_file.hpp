// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/binary.hpp"
#include "fpflow/encoder.hpp"
#include "fpflow/errors.hpp"
#include "fpflow/flow/flow.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

// Model file layout (all integers and floats little-endian):
//
//   "FPFLOWMD"  u32 version
//   encoder:    u8 kind (0 identity, 1 linear, 2 mlp), u64 in, u64 out,
//               u8 trainable, u32 depth, u64 widths[depth + 1],
//               then per affine map: weights (row-major), bias
//   flow:       u64 d, u32 N, u64 hidden, u32 hidden_layers, f64 s_max,
//               u8 base (0 = standard normal), u8 transforms_second_half[N],
//               then per layer: scale net maps, shift net maps

namespace fpflow::model_file {

inline constexpr std::string_view kMagic = "FPFLOWMD";
inline constexpr std::uint32_t kVersion = 1;

struct Model {
  EncoderModel encoder;
  flow::FlowModel flow;
};

namespace detail {

inline void put_tensor(std::string& out, const Tensor& t) {
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) binary::put_f64(out, t(r, c));
}

inline Tensor get_tensor(binary::Reader& in, Eigen::Index rows, Eigen::Index cols) {
  Tensor t(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) t(r, c) = in.f64();
  return t;
}

inline void put_maps(std::string& out, const Perceptron& p) {
  for (std::size_t i = 0; i < p.depth(); ++i) {
    put_tensor(out, p.weights[i]);
    put_tensor(out, p.biases[i]);
  }
}

inline Perceptron get_maps(binary::Reader& in, const std::vector<Eigen::Index>& widths) {
  Perceptron p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    p.weights.push_back(get_tensor(in, widths[i], widths[i + 1]));
    p.biases.push_back(get_tensor(in, 1, widths[i + 1]));
  }
  return p;
}

inline Eigen::Index checked_dim(std::uint64_t v, const char* what) {
  if (v == 0 || v > (1u << 20)) throw DataError(std::string("model file: implausible ") + what);
  return Eigen::Index(v);
}

}  // namespace detail

inline std::string encode(const EncoderModel& enc, const flow::FlowModel& model) {
  std::string out(kMagic);
  binary::put_u32(out, kVersion);

  binary::put_u8(out, std::uint8_t(enc.kind()));
  binary::put_u64(out, std::uint64_t(enc.in_dim()));
  binary::put_u64(out, std::uint64_t(enc.out_dim()));
  binary::put_u8(out, enc.trainable() ? 1 : 0);
  if (enc.kind() == EncoderKind::identity) {
    binary::put_u32(out, 0);
  } else {
    const auto& net = enc.network();
    binary::put_u32(out, std::uint32_t(net.depth()));
    binary::put_u64(out, std::uint64_t(net.in_dim()));
    for (const auto& w : net.weights) binary::put_u64(out, std::uint64_t(w.cols()));
    detail::put_maps(out, net);
  }

  for (const auto& l : model.layers()) {
    if (l.s_max != model.s_max() || l.scale_net.depth() != model.layers()[0].scale_net.depth()) {
      throw std::invalid_argument("model file: layers must share s_max and depth");
    }
  }
  binary::put_u64(out, std::uint64_t(model.dim()));
  binary::put_u32(out, std::uint32_t(model.size()));
  binary::put_u64(out, std::uint64_t(model.hidden()));
  binary::put_u32(out, std::uint32_t(model.mlp_hidden_layers()));
  binary::put_f64(out, model.s_max());
  binary::put_u8(out, 0);
  for (const auto& l : model.layers()) binary::put_u8(out, l.transform_second_half ? 1 : 0);
  for (const auto& l : model.layers()) {
    detail::put_maps(out, l.scale_net);
    detail::put_maps(out, l.shift_net);
  }
  return out;
}

inline Model decode(std::string_view bytes) {
  try {
    binary::Reader in(bytes);
    if (in.bytes(kMagic.size()) != kMagic) throw DataError("model file: bad magic");
    if (const auto v = in.u32(); v != kVersion) {
      throw DataError("model file: unsupported version " + std::to_string(v));
    }

    const auto kind_byte = in.u8();
    if (kind_byte > 2) throw DataError("model file: unknown encoder kind");
    const auto kind = EncoderKind(kind_byte);
    const auto e_in = detail::checked_dim(in.u64(), "encoder input dimension");
    const auto e_out = detail::checked_dim(in.u64(), "encoder output dimension");
    const bool trainable = in.u8() != 0;
    const auto depth = in.u32();
    Model m;
    if (kind == EncoderKind::identity) {
      if (depth != 0) throw DataError("model file: identity encoder with parameters");
      m.encoder = EncoderModel::identity(e_in);
    } else {
      if (depth == 0 || depth > 64) throw DataError("model file: bad encoder depth");
      std::vector<Eigen::Index> widths;
      for (std::uint32_t i = 0; i <= depth; ++i) widths.push_back(detail::checked_dim(in.u64(), "encoder width"));
      m.encoder = EncoderModel::from_parts(kind, e_in, e_out, detail::get_maps(in, widths), trainable);
    }

    const auto d = detail::checked_dim(in.u64(), "flow dimension");
    const auto n_layers = in.u32();
    const auto hidden = Eigen::Index(in.u64());
    const auto hidden_layers = in.u32();
    const double s_max = in.f64();
    if (in.u8() != 0) throw DataError("model file: unknown base distribution");
    if (hidden_layers > 64 || (n_layers > 0 && hidden_layers > 0 && (hidden <= 0 || hidden > (1 << 20)))) {
      throw DataError("model file: bad flow hidden width");
    }
    std::vector<bool> second_half;
    for (std::uint32_t i = 0; i < n_layers; ++i) second_half.push_back(in.u8() != 0);
    std::vector<Eigen::Index> widths{d / 2};
    for (std::uint32_t i = 0; i < hidden_layers; ++i) widths.push_back(hidden);
    widths.push_back(d / 2);
    std::vector<flow::CouplingLayer> layers;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      flow::CouplingLayer l;
      l.scale_net = detail::get_maps(in, widths);
      l.shift_net = detail::get_maps(in, widths);
      l.transform_second_half = second_half[i];
      l.s_max = s_max;
      layers.push_back(std::move(l));
    }
    if (in.remaining() != 0) throw DataError("model file: trailing bytes");
    m.flow = flow::FlowModel(d, std::move(layers));
    if (m.encoder.out_dim() != m.flow.dim()) throw DataError("model file: encoder output does not match flow dimension");
    return m;
  } catch (const std::out_of_range&) {
    throw DataError("model file: truncated");
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

inline nlohmann::json describe(const EncoderModel& enc, const flow::FlowModel& model) {
  return {
      {"format_version", kVersion},
      {"encoder",
       {{"kind", std::string(to_string(enc.kind()))},
        {"in_dim", enc.in_dim()},
        {"out_dim", enc.out_dim()},
        {"trainable", enc.trainable()}}},
      {"flow",
       {{"dim", model.dim()},
        {"layers", model.size()},
        {"hidden", model.hidden()},
        {"mlp_hidden_layers", model.mlp_hidden_layers()},
        {"s_max", model.s_max()},
        {"base", "standard_normal"},
        {"alternation", "second half first, alternating"}}},
  };
}

/// Writes `path` and a JSON sidecar `path + ".json"` holding `metadata`
/// merged with the structural description.
inline void save(const std::filesystem::path& path, const EncoderModel& enc, const flow::FlowModel& model,
                 const nlohmann::json& metadata = nlohmann::json::object()) {
  const std::string bytes = encode(enc, model);
  binary::write_file(path.string(), bytes);
  nlohmann::json side = describe(enc, model);
  side["sha256"] = binary::sha256_hex(bytes);
  for (auto it = metadata.begin(); it != metadata.end(); ++it) side[it.key()] = it.value();
  binary::write_file(path.string() + ".json", side.dump(2) + "\n");
}

inline Model load(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = binary::read_file(path.string());
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
  return decode(bytes);
}

}  // namespace fpflow::model_file
