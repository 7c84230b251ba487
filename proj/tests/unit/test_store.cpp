#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "neuroscope/activation_store.hpp"
#include "neuroscope/half.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace neuroscope;
namespace fs = std::filesystem;

namespace {

ActivationSet sample_set(std::size_t sentences, std::size_t layers, std::size_t width, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 3.0f);
  ActivationSet acts;
  acts.layer_count = layers;
  acts.layer_width = width;
  for (std::size_t s = 0; s < sentences; ++s) {
    SentenceActivations sa;
    sa.sentence_index = s;
    sa.layer_count = layers;
    sa.layer_width = width;
    for (std::size_t t = 0; t < 2 + s; ++t) sa.tokens.push_back("t" + std::to_string(s) + "_" + std::to_string(t));
    sa.values.resize(layers * sa.tokens.size() * width);
    for (auto& v : sa.values) v = normal(rng);
    acts.sentences.push_back(std::move(sa));
  }
  return acts;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

ErrorKind thrown_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("minimal json file") {
  TempDir dir;
  write_text(dir / "a.json",
             R"({"linex_index": 0, "features": [{"token": "hi", "layers": [{"index": 0, "values": [1, 2, 3]}]},)"
             R"( {"token": "there", "layers": [{"index": 0, "values": [4, 5, 6]}]}]})"
             "\n");
  const auto acts = read_activations(dir / "a.json");
  CHECK(acts.layer_count == 1);
  CHECK(acts.layer_width == 3);
  REQUIRE(acts.sentences.size() == 1);
  CHECK(acts.sentences[0].tokens == std::vector<std::string>{"hi", "there"});
  CHECK(acts.sentences[0].at(0, 1, 2) == 6.0f);
}

TEST_CASE("f32 round trips are bit-exact in both formats") {
  TempDir dir;
  const auto acts = sample_set(4, 3, 5);
  for (const char* name : {"x.json", "x.hdf5", "x.jsonl", "x.h5"}) {
    write_activations(acts, dir / name, infer_format(dir / name), Precision::f32);
    const auto back = read_activations(dir / name);
    CHECK(back == acts);
  }
}

TEST_CASE("f16 writes equal the rounding oracle and shrink the file") {
  TempDir dir;
  auto acts = sample_set(5, 2, 64);
  acts.sentences[0].values[0] = 1.00048828125f;
  acts.sentences[0].values[1] = -65504.0f;
  for (auto format : {FileFormat::json, FileFormat::hdf5}) {
    const auto path = dir / (format == FileFormat::json ? "h.json" : "h.hdf5");
    write_activations(acts, path, format, Precision::f16);
    const auto back = read_activations(path);
    CHECK(back.precision == Precision::f16);
    for (std::size_t s = 0; s < acts.sentences.size(); ++s) {
      for (std::size_t i = 0; i < acts.sentences[s].values.size(); ++i) {
        REQUIRE(back.sentences[s].values[i] == oracle::round_to_half(acts.sentences[s].values[i]));
      }
    }
    CHECK(back.sentences[0].values[0] == 1.0f);
  }
  write_activations(acts, dir / "f.hdf5", FileFormat::hdf5, Precision::f32);
  CHECK(fs::file_size(dir / "h.hdf5") < fs::file_size(dir / "f.hdf5"));
}

TEST_CASE("f16 refuses values outside the half range") {
  TempDir dir;
  auto acts = sample_set(1, 1, 2);
  acts.sentences[0].values[1] = 70000.0f;
  CHECK(thrown_kind([&] { write_activations(acts, dir / "o.hdf5", FileFormat::hdf5, Precision::f16); }) ==
        ErrorKind::PrecisionOverflow);
  CHECK(thrown_kind([&] { write_activations(acts, dir / "o.json", FileFormat::json, Precision::f16); }) ==
        ErrorKind::PrecisionOverflow);
}

TEST_CASE("format inference") {
  CHECK(infer_format("a.json") == FileFormat::json);
  CHECK(infer_format("a.JSONL") == FileFormat::json);
  CHECK(infer_format("a.h5") == FileFormat::hdf5);
  CHECK(thrown_kind([] { infer_format("a.npy"); }) == ErrorKind::MalformedFile);
}

TEST_CASE("convert between formats and precisions") {
  TempDir dir;
  const auto acts = sample_set(3, 2, 4);
  write_activations(acts, dir / "in.json", FileFormat::json, Precision::f32);
  convert(dir / "in.json", dir / "out.hdf5", FileFormat::hdf5, Precision::f32);
  CHECK(read_activations(dir / "out.hdf5") == acts);
  convert(dir / "out.hdf5", dir / "half.hdf5", FileFormat::hdf5, Precision::f16);
  CHECK(fs::file_size(dir / "half.hdf5") < fs::file_size(dir / "out.hdf5"));
}

TEST_CASE("inconsistent widths across sentences") {
  TempDir dir;
  write_text(dir / "w.json",
             R"({"linex_index": 0, "features": [{"token": "a", "layers": [{"index": 0, "values": [1, 2, 3]}]}]})"
             "\n"
             R"({"linex_index": 1, "features": [{"token": "b", "layers": [{"index": 0, "values": [1, 2, 3, 4]}]}]})"
             "\n");
  CHECK(thrown_kind([&] { read_activations(dir / "w.json"); }) == ErrorKind::InconsistentShape);
  const auto report = validate(dir / "w.json");
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].locator.find("line 2") != std::string::npos);
}

TEST_CASE("validate names every violation with a locator") {
  TempDir dir;
  std::string text;
  for (int s = 0; s < 4; ++s) {
    const std::string second = s == 3 ? "NaN" : "0.5";
    text += R"({"linex_index": )" + std::to_string(s) +
            R"(, "features": [{"token": "a", "layers": [{"index": 0, "values": [1, 2]}]},)"
            R"( {"token": "b", "layers": [{"index": 0, "values": [)" +
            second + R"(, 2]}]}]})" + "\n";
  }
  text += R"({"linex_index": 4, "features": [{"token": "c", "lay)" "\n";
  write_text(dir / "bad.json", text);

  const auto report = validate(dir / "bad.json");
  REQUIRE(report.violations.size() == 2);
  CHECK(report.violations[0].kind == ErrorKind::NonFiniteValue);
  CHECK(report.violations[0].locator.find("sentence 3, token 1") != std::string::npos);
  CHECK(report.violations[1].kind == ErrorKind::MalformedFile);
  CHECK(report.violations[1].locator == "line 5");
  CHECK(thrown_kind([&] { read_activations(dir / "bad.json"); }) == ErrorKind::NonFiniteValue);

  write_activations(sample_set(2, 1, 3), dir / "good.hdf5", FileFormat::hdf5, Precision::f32);
  CHECK(validate(dir / "good.hdf5").ok());
  CHECK_FALSE(validate(dir / "missing.hdf5").ok());
  CHECK(thrown_kind([&] { read_activations(dir / "missing.hdf5"); }) == ErrorKind::IoFailure);
}

TEST_CASE("non-finite values cannot be written") {
  TempDir dir;
  auto acts = sample_set(1, 1, 2);
  acts.sentences[0].values[0] = INFINITY;
  CHECK(thrown_kind([&] { write_activations(acts, dir / "n.hdf5", FileFormat::hdf5, Precision::f32); }) ==
        ErrorKind::NonFiniteValue);
}

TEST_CASE("checked-in fixtures") {
  const fs::path fixtures = NEUROSCOPE_FIXTURE_DIR;
  const auto f32 = read_activations(fixtures / "word_acts.hdf5");
  const auto json = read_activations(fixtures / "word_acts.json");
  const auto f16 = read_activations(fixtures / "word_acts_f16.hdf5");
  CHECK(f32.layer_count == 2);
  CHECK(f32.layer_width == 8);
  CHECK(f32.sentences.size() == json.sentences.size());
  CHECK(f16.precision == Precision::f16);
  for (std::size_t s = 0; s < f32.sentences.size(); ++s) {
    CHECK(f32.sentences[s].tokens == json.sentences[s].tokens);
    for (std::size_t i = 0; i < f32.sentences[s].values.size(); ++i) {
      REQUIRE(f16.sentences[s].values[i] == oracle::round_to_half(f32.sentences[s].values[i]));
    }
  }
}
