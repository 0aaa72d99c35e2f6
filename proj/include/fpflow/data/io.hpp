// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/binary.hpp"
#include "fpflow/data/dataset.hpp"
#include "fpflow/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <optional>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

// On-disk dataset layout: a JSON manifest next to one payload file.
//
//   manifest: {schema_version, d_in, n_samples, class_names, payload,
//              payload_format ("csv" | "binary"), payload_sha256, provenance}
//   csv:      header "id,label,fp_class,f0,...,f{d-1}", label TP|FP,
//             fp_class holds the class name (empty for TPs), numbers %.17g
//   binary:   32-byte header "FPFEATS1", u64 version, u64 n, u64 d, then per
//             row (id, label 0/1, class index or -1, features...) as float64,
//             all little-endian

namespace fpflow::data {

enum class PayloadFormat { csv, binary };

inline constexpr int kManifestVersion = 1;
inline constexpr std::string_view kBinaryMagic = "FPFEATS1";
inline constexpr std::uint64_t kBinaryVersion = 1;

inline std::string_view to_string(PayloadFormat f) { return f == PayloadFormat::csv ? "csv" : "binary"; }

inline PayloadFormat parse_payload_format(std::string_view s) {
  if (s == "csv") return PayloadFormat::csv;
  if (s == "binary" || s == "bin") return PayloadFormat::binary;
  throw ConfigError("unknown payload format '" + std::string(s) + "' (expected csv or binary)");
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, std::size_t(n));
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Parses a full field as double; accepts nan/inf spellings so that they can
/// be rejected later with a precise message.
inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty();
}

inline bool parse_int64(std::string_view s, std::int64_t& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty();
}

inline void check_class_names(const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (n.empty() || n.find_first_of(",\n\r") != std::string::npos) {
      throw DataError("class name '" + n + "' is empty or contains a separator");
    }
  }
}

}  // namespace detail

inline std::string encode_csv(const Dataset& ds) {
  detail::check_class_names(ds.class_names());
  std::string out = "id,label,fp_class";
  for (Eigen::Index j = 0; j < ds.d_in(); ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (const auto& s : ds.samples()) {
    out += std::to_string(s.id);
    out += ',';
    out += to_string(s.label);
    out += ',';
    if (s.label == Label::fp) out += ds.class_names()[std::size_t(s.fp_class)];
    for (Eigen::Index j = 0; j < ds.d_in(); ++j) {
      out += ',';
      out += detail::format_double(s.x(j));
    }
    out += '\n';
  }
  return out;
}

/// `class_names` may be empty, in which case names are collected in order of
/// first appearance. Rows are reported 0-based, excluding the header.
inline Dataset decode_csv(std::string_view text, std::vector<std::string> class_names = {},
                          std::optional<Eigen::Index> expected_dim = std::nullopt) {
  const bool discover = class_names.empty();
  std::map<std::string, int, std::less<>> class_index;
  for (std::size_t i = 0; i < class_names.size(); ++i) class_index.emplace(class_names[i], int(i));

  std::size_t line_start = 0;
  auto next_line = [&](std::string_view& line) {
    if (line_start >= text.size()) return false;
    auto end = text.find('\n', line_start);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(line_start, end - line_start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    line_start = end + 1;
    return true;
  };

  std::string_view header;
  if (!next_line(header)) throw DataError("csv: empty payload");
  const auto cols = detail::split(header, ',');
  if (cols.size() < 4 || cols[0] != "id" || cols[1] != "label" || cols[2] != "fp_class") {
    throw DataError("csv: header must start with id,label,fp_class followed by feature columns");
  }
  const auto d = Eigen::Index(cols.size() - 3);
  if (expected_dim && *expected_dim != d) {
    throw DataError("csv: header has " + std::to_string(d) + " feature columns, manifest says " +
                    std::to_string(*expected_dim));
  }

  std::vector<Sample> samples;
  std::string_view line;
  std::size_t row = 0;
  while (next_line(line)) {
    if (line.empty()) continue;
    const std::string where = "csv row " + std::to_string(row);
    const auto f = detail::split(line, ',');
    if (f.size() != cols.size()) {
      throw DataError(where + ": expected " + std::to_string(cols.size()) + " fields, got " +
                      std::to_string(f.size()));
    }
    Sample s;
    if (!detail::parse_int64(f[0], s.id)) throw DataError(where + ": bad id '" + std::string(f[0]) + "'");
    const auto label = parse_label(f[1]);
    if (!label) throw DataError(where + ": label '" + std::string(f[1]) + "' outside {TP, FP}");
    s.label = *label;
    if (s.label == Label::fp) {
      if (f[2].empty()) throw DataError(where + ": FP sample without a class tag");
      auto it = class_index.find(f[2]);
      if (it == class_index.end()) {
        if (!discover) throw DataError(where + ": unknown FP class '" + std::string(f[2]) + "'");
        it = class_index.emplace(std::string(f[2]), int(class_names.size())).first;
        class_names.emplace_back(f[2]);
      }
      s.fp_class = it->second;
    } else if (!f[2].empty()) {
      throw DataError(where + ": TP sample carries a class tag");
    }
    s.x.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      double v = 0.0;
      if (!detail::parse_double(f[std::size_t(j) + 3], v)) {
        throw DataError(where + ": unparsable feature f" + std::to_string(j));
      }
      if (!std::isfinite(v)) throw DataError(where + ": non-finite feature f" + std::to_string(j));
      s.x(j) = v;
    }
    samples.push_back(std::move(s));
    ++row;
  }
  return Dataset(std::move(samples), d, std::move(class_names));
}

inline std::string encode_binary(const Dataset& ds) {
  std::string out(kBinaryMagic);
  binary::put_u64(out, kBinaryVersion);
  binary::put_u64(out, ds.size());
  binary::put_u64(out, std::uint64_t(ds.d_in()));
  for (const auto& s : ds.samples()) {
    binary::put_f64(out, double(s.id));
    binary::put_f64(out, s.label == Label::fp ? 1.0 : 0.0);
    binary::put_f64(out, double(s.fp_class));
    for (Eigen::Index j = 0; j < ds.d_in(); ++j) binary::put_f64(out, s.x(j));
  }
  return out;
}

inline Dataset decode_binary(std::string_view bytes, std::vector<std::string> class_names) {
  try {
    binary::Reader r(bytes);
    if (r.bytes(kBinaryMagic.size()) != kBinaryMagic) throw DataError("binary payload: bad magic");
    if (const auto v = r.u64(); v != kBinaryVersion) {
      throw DataError("binary payload: unsupported version " + std::to_string(v));
    }
    const std::uint64_t n = r.u64();
    const std::uint64_t d = r.u64();
    if (d == 0 || d > (1u << 20)) throw DataError("binary payload: implausible feature dimension");
    if (r.remaining() != n * (d + 3) * 8) {
      throw DataError("binary payload: size does not match header (" + std::to_string(n) + " rows x " +
                      std::to_string(d) + " features)");
    }
    std::vector<Sample> samples;
    samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::string where = "binary row " + std::to_string(i);
      Sample s;
      const double id = r.f64(), label = r.f64(), cls = r.f64();
      if (!(std::abs(id) < 9.0e15) || id != std::floor(id)) throw DataError(where + ": bad id");
      s.id = std::int64_t(id);
      if (label == 0.0) {
        s.label = Label::tp;
      } else if (label == 1.0) {
        s.label = Label::fp;
      } else {
        throw DataError(where + ": label outside {TP, FP}");
      }
      if (!(cls >= -1.0 && cls < double(class_names.size())) || cls != std::floor(cls)) {
        throw DataError(where + ": invalid class index");
      }
      s.fp_class = int(cls);
      s.x.resize(Eigen::Index(d));
      for (std::uint64_t j = 0; j < d; ++j) {
        const double v = r.f64();
        if (!std::isfinite(v)) throw DataError(where + ": non-finite feature f" + std::to_string(j));
        s.x(Eigen::Index(j)) = v;
      }
      samples.push_back(std::move(s));
    }
    return Dataset(std::move(samples), Eigen::Index(d), std::move(class_names));
  } catch (const std::out_of_range&) {
    throw DataError("binary payload: truncated");
  }
}

/// Writes `<dir>/<stem>.json` and the payload next to it. Returns the
/// manifest path.
inline std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir,
                                          const std::string& stem, PayloadFormat fmt) {
  std::filesystem::create_directories(dir);
  const std::string payload = fmt == PayloadFormat::csv ? encode_csv(ds) : encode_binary(ds);
  const std::string payload_name = stem + (fmt == PayloadFormat::csv ? ".csv" : ".bin");
  binary::write_file((dir / payload_name).string(), payload);
  nlohmann::json m;
  m["schema_version"] = kManifestVersion;
  m["d_in"] = ds.d_in();
  m["n_samples"] = ds.size();
  m["n_tp"] = ds.count(Label::tp);
  m["n_fp"] = ds.count(Label::fp);
  m["class_names"] = ds.class_names();
  m["payload"] = payload_name;
  m["payload_format"] = std::string(to_string(fmt));
  m["payload_sha256"] = binary::sha256_hex(payload);
  m["provenance"] = ds.provenance();
  const auto manifest = dir / (stem + ".json");
  binary::write_file(manifest.string(), m.dump(2) + "\n");
  return manifest;
}

/// Loads a dataset from a manifest. A bare .csv path is also accepted; class
/// names are then taken in order of first appearance and no digest is checked.
inline Dataset load_dataset(const std::filesystem::path& path) {
  std::string text;
  try {
    text = binary::read_file(path.string());
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
  if (path.extension() == ".csv") {
    auto ds = decode_csv(text);
    ds.set_provenance("csv:" + path.filename().string());
    return ds;
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  try {
    if (m.at("schema_version").get<int>() != kManifestVersion) {
      throw DataError("manifest: unsupported schema_version");
    }
    const auto d_in = m.at("d_in").get<Eigen::Index>();
    const auto n = m.at("n_samples").get<std::size_t>();
    auto names = m.at("class_names").get<std::vector<std::string>>();
    const auto payload_path = path.parent_path() / m.at("payload").get<std::string>();
    const auto fmt = parse_payload_format(m.at("payload_format").get<std::string>());
    std::string payload;
    try {
      payload = binary::read_file(payload_path.string());
    } catch (const std::runtime_error& e) {
      throw DataError(e.what());
    }
    const auto digest = binary::sha256_hex(payload);
    if (digest != m.at("payload_sha256").get<std::string>()) {
      throw DataError("payload " + payload_path.string() + ": sha256 mismatch (file " + digest + ")");
    }
    Dataset ds = fmt == PayloadFormat::csv ? decode_csv(payload, names, d_in) : decode_binary(payload, names);
    if (ds.d_in() != d_in) throw DataError("payload feature dimension disagrees with manifest");
    if (ds.size() != n) {
      throw DataError("payload has " + std::to_string(ds.size()) + " rows, manifest says " + std::to_string(n));
    }
    ds.set_provenance(m.value("provenance", std::string()));
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
}

}  // namespace fpflow::data
