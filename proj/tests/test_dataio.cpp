// SPDX-License-Identifier: Apache-2.0
#include "fpflow/data/io.hpp"
#include "fpflow/data/synth.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

using namespace fpflow;
using namespace fpflow::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fpflow_dataio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool bit_identical(const Dataset& a, const Dataset& b) {
  if (!(a == b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.samples()[i].x;
    const auto& y = b.samples()[i].x;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * std::size_t(x.size())) != 0) return false;
  }
  return true;
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return s.replace(pos, from.size(), to);
}

SynthSpec small_spec(std::uint64_t seed) {
  auto s = synth_preset("default", seed);
  s.tp_count = 120;
  for (auto& c : s.fp_classes) c.count = 20;
  return s;
}

}  // namespace

TEST(Synth, SameSeedSameDataset) {
  EXPECT_TRUE(bit_identical(synth_generate(small_spec(4)), synth_generate(small_spec(4))));
  EXPECT_FALSE(synth_generate(small_spec(4)) == synth_generate(small_spec(5)));
}

TEST(Synth, CountsAndClasses) {
  const auto ds = synth_generate(synth_preset("default", 1));
  EXPECT_EQ(ds.count(Label::tp), 2000u);
  EXPECT_EQ(ds.count(Label::fp), 900u);
  EXPECT_EQ(ds.d_in(), 16);
  EXPECT_EQ(ds.class_names(), (std::vector<std::string>{"near", "ring", "box"}));
  for (const char* name : {"easy", "hard", "confounded"}) EXPECT_NO_THROW(synth_generate(synth_preset(name, 2)));
  EXPECT_THROW(synth_preset("impossible"), ConfigError);
}

TEST(Synth, ZeroNoiseAxisLiftStaysInThePlane) {
  auto s = synth_preset("default", 3);
  s.noise = 0.0;
  s.axis_lift = true;
  const auto ds = synth_generate(s);
  for (const auto& smp : ds.samples()) {
    if (smp.label != Label::tp) continue;
    EXPECT_EQ(smp.x.tail(14).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Synth, EmpiricalMeanMatchesComponent) {
  SynthSpec s;
  s.d_in = 4;
  s.axis_lift = true;
  s.noise = 0.0;
  s.tp_count = 20000;
  s.tp_components = {{{1.5, -2.0}, {0.7, 1.3}, 0.0, 1.0}};
  s.seed = 11;
  const auto ds = synth_generate(s);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& smp : ds.samples()) mean += smp.x.head(2);
  mean /= double(ds.size());
  const double n = double(ds.size());
  EXPECT_LT(std::abs(mean(0) - 1.5), 3.0 * 0.7 / std::sqrt(n));
  EXPECT_LT(std::abs(mean(1) + 2.0), 3.0 * 1.3 / std::sqrt(n));
}

TEST(Synth, OffplaneShiftIsOrthogonalToThePlane) {
  SynthSpec s;
  s.d_in = 6;
  s.axis_lift = true;
  s.noise = 0.0;
  s.tp_count = 10;
  s.tp_components = {{{0.0, 0.0}, {1.0, 1.0}, 0.0, 1.0}};
  s.fp_classes = {{"lifted", FpShape::box, {0.0, 0.0}, 1.0, 0.3, 2.5, 50}};
  const auto ds = synth_generate(s);
  for (const auto& smp : ds.samples()) {
    if (smp.label == Label::fp) EXPECT_NEAR(smp.x.tail(4).norm(), 2.5, 1e-12);
  }
}

TEST(Synth, SpecJsonRoundTrip) {
  const auto s = synth_preset("hard", 9);
  const auto back = synth_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_TRUE(bit_identical(synth_generate(s), synth_generate(back)));
  EXPECT_THROW(synth_spec_from_json(nlohmann::json{{"d_in", 2}}), ConfigError);
}

TEST(TwoMoons, ShapeAndDeterminism) {
  const auto a = two_moons(100, 0.05, 3);
  EXPECT_EQ(a.rows(), 100);
  EXPECT_EQ(a.cols(), 2);
  EXPECT_EQ(a, two_moons(100, 0.05, 3));
}

TEST(DataIo, CsvRoundTripIsBitExact) {
  const auto dir = scratch("csv");
  const auto ds = synth_generate(small_spec(6));
  const auto manifest = save_dataset(ds, dir, "set", PayloadFormat::csv);
  EXPECT_TRUE(bit_identical(load_dataset(manifest), ds));
}

TEST(DataIo, BinaryRoundTripIsBitExact) {
  const auto dir = scratch("bin");
  const auto ds = synth_generate(small_spec(7));
  const auto manifest = save_dataset(ds, dir, "set", PayloadFormat::binary);
  EXPECT_TRUE(bit_identical(load_dataset(manifest), ds));
  const auto bytes = binary::read_file((dir / "set.bin").string());
  EXPECT_EQ(bytes.substr(0, 8), "FPFEATS1");
  EXPECT_EQ(bytes.size(), 32 + ds.size() * std::size_t(ds.d_in() + 3) * 8);
}

TEST(DataIo, BareCsvLoadsWithDiscoveredClasses) {
  const auto dir = scratch("bare");
  binary::write_file((dir / "x.csv").string(),
                     "id,label,fp_class,f0,f1\n3,TP,,1,2\n4,FP,glare,0.5,-1\n5,FP,blur,0,0\n");
  const auto ds = load_dataset(dir / "x.csv");
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.class_names(), (std::vector<std::string>{"glare", "blur"}));
  EXPECT_EQ(ds.samples()[2].fp_class, 1);
}

TEST(DataIo, DigestMismatchIsRejected) {
  const auto dir = scratch("digest");
  const auto ds = synth_generate(small_spec(8));
  const auto manifest = save_dataset(ds, dir, "set", PayloadFormat::csv);
  auto text = binary::read_file((dir / "set.csv").string());
  text[text.size() - 3] = text[text.size() - 3] == '1' ? '2' : '1';
  binary::write_file((dir / "set.csv").string(), text);
  EXPECT_THROW(load_dataset(manifest), DataError);
}

namespace {

/// Writes a CSV payload plus a manifest with a matching digest.
fs::path write_with_manifest(const fs::path& dir, const std::string& csv,
                             const std::vector<std::string>& classes, int d, int n) {
  binary::write_file((dir / "p.csv").string(), csv);
  nlohmann::json m{{"schema_version", 1},         {"d_in", d},
                   {"n_samples", n},              {"class_names", classes},
                   {"payload", "p.csv"},          {"payload_format", "csv"},
                   {"payload_sha256", binary::sha256_hex(csv)}};
  binary::write_file((dir / "p.json").string(), m.dump());
  return dir / "p.json";
}

std::string error_of(const fs::path& manifest) {
  try {
    load_dataset(manifest);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(DataIo, NonFiniteFeatureNamesTheRow) {
  const auto dir = scratch("nan");
  const auto m = write_with_manifest(dir, "id,label,fp_class,f0,f1\n0,TP,,1,2\n1,TP,,nan,2\n", {}, 2, 2);
  const auto msg = error_of(m);
  EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("non-finite"), std::string::npos) << msg;
}

TEST(DataIo, BadLabelsAndTagsAreRejected) {
  const auto dir = scratch("labels");
  auto msg = error_of(write_with_manifest(dir, "id,label,fp_class,f0\n0,MAYBE,,1\n", {}, 1, 1));
  EXPECT_NE(msg.find("outside {TP, FP}"), std::string::npos) << msg;
  msg = error_of(write_with_manifest(dir, "id,label,fp_class,f0\n0,TP,,1\n1,FP,,2\n", {"a"}, 1, 2));
  EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("class tag"), std::string::npos) << msg;
  msg = error_of(write_with_manifest(dir, "id,label,fp_class,f0\n0,TP,,1\n0,TP,,2\n", {}, 1, 2));
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(DataIo, DimensionMismatchIsRejected) {
  const auto dir = scratch("dim");
  auto msg = error_of(write_with_manifest(dir, "id,label,fp_class,f0,f1\n0,TP,,1,2\n", {}, 3, 1));
  EXPECT_NE(msg.find("feature columns"), std::string::npos) << msg;
  msg = error_of(write_with_manifest(dir, "id,label,fp_class,f0,f1\n0,TP,,1\n", {}, 2, 1));
  EXPECT_NE(msg.find("row 0"), std::string::npos) << msg;
}

TEST(DataIo, MissingFilesAreDataErrors) {
  EXPECT_THROW(load_dataset("/nonexistent/fpflow/manifest.json"), DataError);
}

TEST(DataIo, Sha256KnownVector) {
  EXPECT_EQ(binary::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
