// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace fpflow {

/// Detection outcome. FP is the anomaly class (positive for AP/precision).
enum class Label : std::uint8_t { tp = 0, fp = 1 };

inline std::string_view to_string(Label l) { return l == Label::tp ? "TP" : "FP"; }

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "TP") return Label::tp;
  if (s == "FP") return Label::fp;
  return std::nullopt;
}

}  // namespace fpflow
