#include "neuroscope/activation_store.hpp"

#include <hdf5.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <utility>

#include <nlohmann/json.hpp>

#include "neuroscope/half.hpp"

namespace neuroscope {

using nlohmann::json;

std::size_t ActivationSet::token_total() const noexcept {
  std::size_t total = 0;
  for (const auto& s : sentences) total += s.token_count();
  return total;
}

std::string_view to_string(FileFormat format) {
  switch (format) {
    case FileFormat::json: return "json";
    case FileFormat::hdf5: return "hdf5";
    case FileFormat::automatic: return "auto";
  }
  return "auto";
}

FileFormat parse_format(std::string_view text) {
  if (text == "json") return FileFormat::json;
  if (text == "hdf5") return FileFormat::hdf5;
  if (text == "auto") return FileFormat::automatic;
  throw Error(ErrorKind::InvalidArgument, "unknown format '" + std::string(text) + "'");
}

FileFormat infer_format(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".json" || ext == ".jsonl") return FileFormat::json;
  if (ext == ".hdf5" || ext == ".h5") return FileFormat::hdf5;
  throw Error(ErrorKind::MalformedFile, "cannot infer activation format from extension '" + ext + "'",
              path.string());
}

namespace {

FileFormat resolve(const std::filesystem::path& path, FileFormat format) {
  return format == FileFormat::automatic ? infer_format(path) : format;
}

/// Either throws on the first problem or records all of them.
class Diagnostics {
 public:
  explicit Diagnostics(bool collect) : collect_(collect) {}

  void report(ErrorKind kind, std::string locator, std::string message) {
    if (!collect_) throw Error(kind, message, locator);
    items_.push_back({kind, std::move(locator), std::move(message)});
  }
  bool failed() const noexcept { return !items_.empty(); }
  std::vector<Violation> take() { return std::move(items_); }

 private:
  bool collect_;
  std::vector<Violation> items_;
};

/// Tracks the shape every sentence must agree on.
class ShapeTracker {
 public:
  void check(Diagnostics& diag, const std::string& locator, std::size_t layers, std::size_t width) {
    if (!layers_) {
      layers_ = layers;
      width_ = width;
      return;
    }
    if (layers != *layers_ || width != width_) {
      diag.report(ErrorKind::InconsistentShape, locator,
                  "shape (layers=" + std::to_string(layers) + ", width=" + std::to_string(width) +
                      ") differs from first sentence (layers=" + std::to_string(*layers_) +
                      ", width=" + std::to_string(width_) + ")");
    }
  }
  std::size_t layers() const { return layers_.value_or(0); }
  std::size_t width() const { return width_; }

 private:
  std::optional<std::size_t> layers_;
  std::size_t width_ = 0;
};

void check_finite(Diagnostics& diag, const SentenceActivations& s, const std::string& where) {
  for (std::size_t l = 0; l < s.layer_count; ++l) {
    for (std::size_t t = 0; t < s.token_count(); ++t) {
      const auto v = s.vector(l, t);
      for (std::size_t n = 0; n < v.size(); ++n) {
        if (!std::isfinite(v[n])) {
          diag.report(ErrorKind::NonFiniteValue,
                      "sentence " + std::to_string(s.sentence_index) + ", token " + std::to_string(t) +
                          ", layer " + std::to_string(l) + ", neuron " + std::to_string(n) + where,
                      "non-finite activation value");
          return;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// JSON lines

/// Python's json module emits NaN/Infinity literals; nlohmann rejects them.
/// Rewrite them to null outside of strings so they surface as NonFiniteValue.
std::string sanitize_non_finite_literals(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < line.size()) {
        out.push_back(line[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    const auto rest = line.substr(i);
    if (rest.starts_with("NaN")) {
      out += "null";
      i += 2;
    } else if (rest.starts_with("-Infinity")) {
      out += "null";
      i += 8;
    } else if (rest.starts_with("Infinity")) {
      out += "null";
      i += 7;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::optional<SentenceActivations> parse_json_sentence(const json& doc, std::size_t expected_index,
                                                       const std::string& line_loc, Diagnostics& diag) {
  if (!doc.is_object() || !doc.contains("linex_index") || !doc.contains("features")) {
    diag.report(ErrorKind::MalformedFile, line_loc, "expected object with 'linex_index' and 'features'");
    return std::nullopt;
  }
  const auto& index = doc.at("linex_index");
  if (!index.is_number_integer() || index.get<long long>() != static_cast<long long>(expected_index)) {
    diag.report(ErrorKind::MalformedFile, line_loc,
                "linex_index must be " + std::to_string(expected_index) + " (sentences in corpus order)");
    return std::nullopt;
  }
  const auto& features = doc.at("features");
  if (!features.is_array() || features.empty()) {
    diag.report(ErrorKind::MalformedFile, line_loc, "'features' must be a non-empty array");
    return std::nullopt;
  }

  SentenceActivations s;
  s.sentence_index = expected_index;
  const std::size_t token_count = features.size();
  std::size_t layer_count = 0;
  bool non_finite_reported = false;

  for (std::size_t t = 0; t < token_count; ++t) {
    const auto& feat = features[t];
    const std::string tok_loc = line_loc + ", token " + std::to_string(t);
    if (!feat.is_object() || !feat.contains("token") || !feat.at("token").is_string() ||
        !feat.contains("layers") || !feat.at("layers").is_array()) {
      diag.report(ErrorKind::MalformedFile, tok_loc, "feature needs string 'token' and array 'layers'");
      return std::nullopt;
    }
    const auto& layers = feat.at("layers");
    if (t == 0) {
      layer_count = layers.size();
      if (layer_count == 0) {
        diag.report(ErrorKind::MalformedFile, tok_loc, "token has no layers");
        return std::nullopt;
      }
    } else if (layers.size() != layer_count) {
      diag.report(ErrorKind::InconsistentShape, tok_loc,
                  "token has " + std::to_string(layers.size()) + " layers, expected " + std::to_string(layer_count));
      return std::nullopt;
    }
    s.tokens.push_back(feat.at("token").get<std::string>());

    for (std::size_t l = 0; l < layer_count; ++l) {
      const auto& layer = layers[l];
      const std::string layer_loc = tok_loc + ", layer " + std::to_string(l);
      if (!layer.is_object() || !layer.contains("values") || !layer.at("values").is_array()) {
        diag.report(ErrorKind::MalformedFile, layer_loc, "layer needs array 'values'");
        return std::nullopt;
      }
      if (layer.contains("index") &&
          (!layer.at("index").is_number_integer() || layer.at("index").get<long long>() != static_cast<long long>(l))) {
        diag.report(ErrorKind::MalformedFile, layer_loc, "layer 'index' must be " + std::to_string(l));
        return std::nullopt;
      }
      const auto& values = layer.at("values");
      if (t == 0 && l == 0) {
        s.layer_width = values.size();
        if (s.layer_width == 0) {
          diag.report(ErrorKind::MalformedFile, layer_loc, "empty 'values'");
          return std::nullopt;
        }
        s.layer_count = layer_count;
        s.values.assign(layer_count * token_count * s.layer_width, 0.0f);
      } else if (values.size() != s.layer_width) {
        diag.report(ErrorKind::InconsistentShape, layer_loc,
                    "width " + std::to_string(values.size()) + ", expected " + std::to_string(s.layer_width));
        return std::nullopt;
      }
      // tokens is still growing; index the flat buffer directly
      float* dst = s.values.data() + (l * token_count + t) * s.layer_width;
      for (std::size_t n = 0; n < s.layer_width; ++n) {
        const auto& v = values[n];
        if (v.is_null()) {
          if (!non_finite_reported) {
            diag.report(ErrorKind::NonFiniteValue,
                        "sentence " + std::to_string(expected_index) + ", token " + std::to_string(t) +
                            ", layer " + std::to_string(l) + ", neuron " + std::to_string(n) + " (" + line_loc + ")",
                        "non-finite activation value");
            non_finite_reported = true;
          }
          dst[n] = std::numeric_limits<float>::quiet_NaN();
          continue;
        }
        if (!v.is_number()) {
          diag.report(ErrorKind::MalformedFile, layer_loc + ", value " + std::to_string(n), "value is not a number");
          return std::nullopt;
        }
        dst[n] = static_cast<float>(v.get<double>());
        if (!std::isfinite(dst[n]) && !non_finite_reported) {
          diag.report(ErrorKind::NonFiniteValue,
                      "sentence " + std::to_string(expected_index) + ", token " + std::to_string(t) + ", layer " +
                          std::to_string(l) + ", neuron " + std::to_string(n) + " (" + line_loc + ")",
                      "value outside float range");
          non_finite_reported = true;
        }
      }
    }
  }
  return s;
}

ActivationSet read_json(const std::filesystem::path& path, Diagnostics& diag) {
  std::ifstream in(path);
  if (!in) {
    diag.report(ErrorKind::IoFailure, path.string(), "cannot open file");
    return {};
  }
  ActivationSet acts;
  ShapeTracker shape;
  std::optional<Precision> precision;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string loc = "line " + std::to_string(line_no);
    json doc;
    try {
      doc = json::parse(sanitize_non_finite_literals(line));
    } catch (const json::parse_error& e) {
      diag.report(ErrorKind::MalformedFile, loc, std::string("invalid JSON: ") + e.what());
      continue;
    }
    if (doc.is_object() && doc.contains("precision") && doc.at("precision").is_string() && !precision) {
      try {
        precision = parse_precision(doc.at("precision").get<std::string>());
      } catch (const Error&) {
        diag.report(ErrorKind::MalformedFile, loc, "unknown precision tag");
      }
    }
    auto sentence = parse_json_sentence(doc, acts.sentences.size(), loc, diag);
    if (!sentence) continue;
    shape.check(diag, loc, sentence->layer_count, sentence->layer_width);
    acts.sentences.push_back(std::move(*sentence));
  }
  if (acts.sentences.empty() && !diag.failed()) {
    diag.report(ErrorKind::MalformedFile, path.string(), "file contains no sentences");
  }
  acts.layer_count = shape.layers();
  acts.layer_width = shape.width();
  acts.precision = precision.value_or(Precision::f32);
  return acts;
}

void append_float(std::string& out, float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void write_json(const ActivationSet& acts, const std::filesystem::path& path, Precision precision) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open for writing", path.string());
  std::string line;
  for (std::size_t i = 0; i < acts.sentences.size(); ++i) {
    const auto& s = acts.sentences[i];
    line.clear();
    line += "{\"linex_index\": ";
    line += std::to_string(i);
    if (precision == Precision::f16) line += ", \"precision\": \"f16\"";
    line += ", \"features\": [";
    for (std::size_t t = 0; t < s.token_count(); ++t) {
      if (t) line += ", ";
      line += "{\"token\": ";
      line += json(s.tokens[t]).dump();
      line += ", \"layers\": [";
      for (std::size_t l = 0; l < s.layer_count; ++l) {
        if (l) line += ", ";
        line += "{\"index\": ";
        line += std::to_string(l);
        line += ", \"values\": [";
        const auto v = s.vector(l, t);
        for (std::size_t n = 0; n < v.size(); ++n) {
          if (n) line += ", ";
          append_float(line, precision == Precision::f16 ? round_to_half(v[n]) : v[n]);
        }
        line += "]}";
      }
      line += "]}";
    }
    line += "]}\n";
    out << line;
  }
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write failed", path.string());
}

// ---------------------------------------------------------------------------
// HDF5

// The serial HDF5 build is not thread-safe.
std::mutex& hdf5_mutex() {
  static std::mutex m;
  return m;
}

/// Silences HDF5's automatic error stack printing for the current scope.
class QuietHdf5 {
 public:
  QuietHdf5() {
    H5Eget_auto2(H5E_DEFAULT, &func_, &data_);
    H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
  }
  ~QuietHdf5() { H5Eset_auto2(H5E_DEFAULT, func_, data_); }
  QuietHdf5(const QuietHdf5&) = delete;
  QuietHdf5& operator=(const QuietHdf5&) = delete;

 private:
  H5E_auto2_t func_ = nullptr;
  void* data_ = nullptr;
};

/// Owning wrapper around an hid_t with the matching close function.
template <herr_t (*Close)(hid_t)>
class Handle {
 public:
  Handle() = default;
  explicit Handle(hid_t id) : id_(id) {}
  ~Handle() { reset(); }
  Handle(Handle&& o) noexcept : id_(std::exchange(o.id_, H5I_INVALID_HID)) {}
  Handle& operator=(Handle&& o) noexcept {
    if (this != &o) {
      reset();
      id_ = std::exchange(o.id_, H5I_INVALID_HID);
    }
    return *this;
  }
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;

  hid_t get() const noexcept { return id_; }
  bool valid() const noexcept { return id_ >= 0; }
  void reset() {
    if (id_ >= 0) Close(id_);
    id_ = H5I_INVALID_HID;
  }

 private:
  hid_t id_ = H5I_INVALID_HID;
};

using FileHandle = Handle<H5Fclose>;
using DatasetHandle = Handle<H5Dclose>;
using SpaceHandle = Handle<H5Sclose>;
using TypeHandle = Handle<H5Tclose>;
using AttrHandle = Handle<H5Aclose>;

/// IEEE binary16 little-endian, laid out the way h5py defines its 'f2' type.
TypeHandle make_half_type() {
  TypeHandle t(H5Tcopy(H5T_IEEE_F32LE));
  H5Tset_fields(t.get(), 15, 10, 5, 0, 10);
  H5Tset_size(t.get(), 2);
  H5Tset_ebias(t.get(), 15);
  H5Tset_precision(t.get(), 16);
  return t;
}

TypeHandle make_vlen_string_type() {
  TypeHandle t(H5Tcopy(H5T_C_S1));
  H5Tset_size(t.get(), H5T_VARIABLE);
  H5Tset_cset(t.get(), H5T_CSET_UTF8);
  return t;
}

constexpr const char* kSentenceIndexName = "sentence_to_index";
constexpr const char* kTokensAttr = "tokens";

std::optional<std::string> read_vlen_string_dataset(hid_t dset) {
  SpaceHandle space(H5Dget_space(dset));
  const hssize_t n = H5Sget_simple_extent_npoints(space.get());
  if (n != 1) return std::nullopt;
  TypeHandle ftype(H5Dget_type(dset));
  if (H5Tget_class(ftype.get()) != H5T_STRING) return std::nullopt;
  if (H5Tis_variable_str(ftype.get()) > 0) {
    auto mtype = make_vlen_string_type();
    char* data = nullptr;
    if (H5Dread(dset, mtype.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, &data) < 0 || data == nullptr) return std::nullopt;
    std::string out(data);
    H5Dvlen_reclaim(mtype.get(), space.get(), H5P_DEFAULT, &data);
    return out;
  }
  const std::size_t size = H5Tget_size(ftype.get());
  std::string buf(size, '\0');
  TypeHandle mtype(H5Tcopy(H5T_C_S1));
  H5Tset_size(mtype.get(), size);
  if (H5Dread(dset, mtype.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, buf.data()) < 0) return std::nullopt;
  buf.resize(std::strlen(buf.c_str()));
  return buf;
}

std::optional<std::string> read_string_attribute(hid_t obj, const char* name) {
  if (H5Aexists(obj, name) <= 0) return std::nullopt;
  AttrHandle attr(H5Aopen(obj, name, H5P_DEFAULT));
  if (!attr.valid()) return std::nullopt;
  TypeHandle ftype(H5Aget_type(attr.get()));
  if (H5Tget_class(ftype.get()) != H5T_STRING || H5Tis_variable_str(ftype.get()) <= 0) return std::nullopt;
  auto mtype = make_vlen_string_type();
  char* data = nullptr;
  if (H5Aread(attr.get(), mtype.get(), &data) < 0 || data == nullptr) return std::nullopt;
  std::string out(data);
  SpaceHandle space(H5Screate(H5S_SCALAR));
  H5Dvlen_reclaim(mtype.get(), space.get(), H5P_DEFAULT, &data);
  return out;
}

void write_string_attribute(hid_t obj, const char* name, const std::string& value) {
  auto type = make_vlen_string_type();
  SpaceHandle space(H5Screate(H5S_SCALAR));
  AttrHandle attr(H5Acreate2(obj, name, type.get(), space.get(), H5P_DEFAULT, H5P_DEFAULT));
  const char* ptr = value.c_str();
  if (!attr.valid() || H5Awrite(attr.get(), type.get(), &ptr) < 0) {
    throw Error(ErrorKind::IoFailure, std::string("cannot write attribute '") + name + "'");
  }
}

std::vector<std::string> link_names(hid_t file) {
  H5G_info_t info;
  if (H5Gget_info(file, &info) < 0) return {};
  std::vector<std::string> names;
  for (hsize_t i = 0; i < info.nlinks; ++i) {
    const ssize_t len = H5Lget_name_by_idx(file, ".", H5_INDEX_NAME, H5_ITER_INC, i, nullptr, 0, H5P_DEFAULT);
    if (len < 0) continue;
    std::string name(static_cast<std::size_t>(len), '\0');
    H5Lget_name_by_idx(file, ".", H5_INDEX_NAME, H5_ITER_INC, i, name.data(), name.size() + 1, H5P_DEFAULT);
    names.push_back(std::move(name));
  }
  return names;
}

std::optional<std::size_t> parse_index(const std::string& name) {
  if (name.empty() || name.size() > 12) return std::nullopt;
  std::size_t value = 0;
  const auto res = std::from_chars(name.data(), name.data() + name.size(), value);
  if (res.ec != std::errc() || res.ptr != name.data() + name.size()) return std::nullopt;
  if (name.size() > 1 && name[0] == '0') return std::nullopt;
  return value;
}

std::vector<std::string> split_on_space(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

ActivationSet read_hdf5(const std::filesystem::path& path, Diagnostics& diag) {
  std::lock_guard lock(hdf5_mutex());
  QuietHdf5 quiet;
  if (!std::filesystem::exists(path)) {
    diag.report(ErrorKind::IoFailure, path.string(), "file does not exist");
    return {};
  }
  FileHandle file(H5Fopen(path.string().c_str(), H5F_ACC_RDONLY, H5P_DEFAULT));
  if (!file.valid()) {
    diag.report(ErrorKind::MalformedFile, path.string(), "not a readable HDF5 file");
    return {};
  }

  std::map<std::size_t, std::string> sentence_datasets;
  bool has_index = false;
  for (const auto& name : link_names(file.get())) {
    if (name == kSentenceIndexName) {
      has_index = true;
    } else if (auto idx = parse_index(name)) {
      sentence_datasets.emplace(*idx, name);
    }
  }

  // Fallback token source: inverted sentence_to_index, sentence text split on spaces.
  std::map<std::size_t, std::string> index_to_sentence;
  if (has_index) {
    DatasetHandle d(H5Dopen2(file.get(), kSentenceIndexName, H5P_DEFAULT));
    const auto text = d.valid() ? read_vlen_string_dataset(d.get()) : std::nullopt;
    json mapping = text ? json::parse(*text, nullptr, false) : json();
    if (!mapping.is_object()) {
      diag.report(ErrorKind::MalformedFile, std::string("dataset '") + kSentenceIndexName + "'",
                  "expected a JSON object mapping sentence text to index");
    } else {
      for (const auto& [sentence, idx] : mapping.items()) {
        std::optional<std::size_t> i;
        if (idx.is_string()) i = parse_index(idx.get<std::string>());
        else if (idx.is_number_unsigned()) i = idx.get<std::size_t>();
        if (i) index_to_sentence[*i] = sentence;
      }
    }
  }

  if (sentence_datasets.empty()) {
    diag.report(ErrorKind::MalformedFile, path.string(), "file contains no sentence datasets");
    return {};
  }

  ActivationSet acts;
  ShapeTracker shape;
  std::optional<Precision> precision;
  std::size_t expected = 0;
  for (const auto& [index, name] : sentence_datasets) {
    const std::string loc = "dataset '" + name + "'";
    if (index != expected) {
      diag.report(ErrorKind::MalformedFile, loc,
                  "sentence datasets must be numbered contiguously from 0; missing " + std::to_string(expected));
      break;
    }
    ++expected;

    DatasetHandle dset(H5Dopen2(file.get(), name.c_str(), H5P_DEFAULT));
    if (!dset.valid()) {
      diag.report(ErrorKind::MalformedFile, loc, "cannot open dataset");
      continue;
    }
    SpaceHandle space(H5Dget_space(dset.get()));
    if (H5Sget_simple_extent_ndims(space.get()) != 3) {
      diag.report(ErrorKind::MalformedFile, loc, "expected rank-3 dataset (layers, tokens, width)");
      continue;
    }
    hsize_t dims[3];
    H5Sget_simple_extent_dims(space.get(), dims, nullptr);
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
      diag.report(ErrorKind::MalformedFile, loc, "dataset has an empty dimension");
      continue;
    }
    TypeHandle ftype(H5Dget_type(dset.get()));
    if (H5Tget_class(ftype.get()) != H5T_FLOAT) {
      diag.report(ErrorKind::MalformedFile, loc, "dataset is not floating point");
      continue;
    }
    const std::size_t type_size = H5Tget_size(ftype.get());
    Precision p;
    if (type_size == 2) p = Precision::f16;
    else if (type_size == 4) p = Precision::f32;
    else if (type_size == 8) p = Precision::f64;
    else {
      diag.report(ErrorKind::MalformedFile, loc, "unsupported float width " + std::to_string(type_size));
      continue;
    }
    if (!precision) precision = p;

    SentenceActivations s;
    s.sentence_index = index;
    s.layer_count = dims[0];
    s.layer_width = dims[2];
    const std::size_t token_count = dims[1];
    const std::size_t n = dims[0] * dims[1] * dims[2];
    s.values.resize(n);
    herr_t status = 0;
    if (p == Precision::f16) {
      std::vector<std::uint16_t> raw(n);
      auto mtype = make_half_type();
      status = H5Dread(dset.get(), mtype.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data());
      halves_to_floats(raw, s.values);
    } else if (p == Precision::f32) {
      status = H5Dread(dset.get(), H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, s.values.data());
    } else {
      std::vector<double> raw(n);
      status = H5Dread(dset.get(), H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data());
      std::transform(raw.begin(), raw.end(), s.values.begin(), [](double v) { return static_cast<float>(v); });
    }
    if (status < 0) {
      diag.report(ErrorKind::MalformedFile, loc, "failed to read dataset values");
      continue;
    }

    if (auto tokens_json = read_string_attribute(dset.get(), kTokensAttr)) {
      json tokens = json::parse(*tokens_json, nullptr, false);
      if (tokens.is_array() && std::all_of(tokens.begin(), tokens.end(), [](const json& t) { return t.is_string(); })) {
        for (const auto& t : tokens) s.tokens.push_back(t.get<std::string>());
      }
    } else if (auto it = index_to_sentence.find(index); it != index_to_sentence.end()) {
      s.tokens = split_on_space(it->second);
    }
    if (s.tokens.size() != token_count) {
      diag.report(ErrorKind::MalformedFile, loc,
                  "token strings unavailable or count " + std::to_string(s.tokens.size()) +
                      " does not match token dimension " + std::to_string(token_count));
      s.tokens.resize(token_count);
    }
    shape.check(diag, loc, s.layer_count, s.layer_width);
    check_finite(diag, s, " (" + loc + ")");
    acts.sentences.push_back(std::move(s));
  }
  acts.layer_count = shape.layers();
  acts.layer_width = shape.width();
  acts.precision = precision.value_or(Precision::f32);
  return acts;
}

void write_hdf5(const ActivationSet& acts, const std::filesystem::path& path, Precision precision) {
  std::lock_guard lock(hdf5_mutex());
  QuietHdf5 quiet;
  FileHandle file(H5Fcreate(path.string().c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT));
  if (!file.valid()) throw Error(ErrorKind::IoFailure, "cannot create HDF5 file", path.string());

  auto half_type = make_half_type();
  json sentence_to_index = json::object();
  std::vector<std::uint16_t> halves;
  for (std::size_t i = 0; i < acts.sentences.size(); ++i) {
    const auto& s = acts.sentences[i];
    const std::string name = std::to_string(i);
    const hsize_t dims[3] = {s.layer_count, s.token_count(), s.layer_width};
    SpaceHandle space(H5Screate_simple(3, dims, nullptr));
    const hid_t file_type = precision == Precision::f16 ? half_type.get() : H5T_IEEE_F32LE;
    DatasetHandle dset(
        H5Dcreate2(file.get(), name.c_str(), file_type, space.get(), H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT));
    if (!dset.valid()) throw Error(ErrorKind::IoFailure, "cannot create dataset '" + name + "'", path.string());
    herr_t status;
    if (precision == Precision::f16) {
      halves.resize(s.values.size());
      floats_to_halves(s.values, halves);
      status = H5Dwrite(dset.get(), half_type.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, halves.data());
    } else {
      status = H5Dwrite(dset.get(), H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, s.values.data());
    }
    if (status < 0) throw Error(ErrorKind::IoFailure, "cannot write dataset '" + name + "'", path.string());
    write_string_attribute(dset.get(), kTokensAttr, json(s.tokens).dump());

    std::string sentence;
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      if (t) sentence += ' ';
      sentence += s.tokens[t];
    }
    sentence_to_index[sentence] = name;
  }

  // Shape (1,) variable-length string holding the JSON mapping.
  const std::string mapping = sentence_to_index.dump();
  auto str_type = make_vlen_string_type();
  const hsize_t one = 1;
  SpaceHandle space(H5Screate_simple(1, &one, nullptr));
  DatasetHandle dset(
      H5Dcreate2(file.get(), kSentenceIndexName, str_type.get(), space.get(), H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT));
  const char* ptr = mapping.c_str();
  if (!dset.valid() || H5Dwrite(dset.get(), str_type.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, &ptr) < 0) {
    throw Error(ErrorKind::IoFailure, "cannot write sentence_to_index", path.string());
  }
}

ActivationSet load(const std::filesystem::path& path, FileFormat format, Diagnostics& diag) {
  FileFormat resolved;
  try {
    resolved = resolve(path, format);
  } catch (const Error& e) {
    diag.report(e.kind(), e.locator(), e.message());
    return {};
  }
  return resolved == FileFormat::json ? read_json(path, diag) : read_hdf5(path, diag);
}

}  // namespace

ActivationSet read_activations(const std::filesystem::path& path, FileFormat format) {
  Diagnostics diag(false);
  return load(path, format, diag);
}

ValidationReport validate(const std::filesystem::path& path, FileFormat format) {
  Diagnostics diag(true);
  load(path, format, diag);
  return ValidationReport{diag.take()};
}

void check_activation_set(const ActivationSet& acts) {
  Diagnostics diag(false);
  if (acts.sentences.empty()) diag.report(ErrorKind::MalformedFile, "", "activation set has no sentences");
  ShapeTracker shape;
  for (const auto& s : acts.sentences) {
    const std::string loc = "sentence " + std::to_string(s.sentence_index);
    if (s.token_count() == 0) diag.report(ErrorKind::MalformedFile, loc, "sentence has no tokens");
    if (s.values.size() != s.layer_count * s.token_count() * s.layer_width) {
      diag.report(ErrorKind::InconsistentShape, loc, "value buffer size does not match shape");
    }
    shape.check(diag, loc, s.layer_count, s.layer_width);
    check_finite(diag, s, "");
  }
  if (acts.layer_count != shape.layers() || acts.layer_width != shape.width()) {
    diag.report(ErrorKind::InconsistentShape, "", "set-level shape does not match sentences");
  }
}

void write_activations(const ActivationSet& acts, const std::filesystem::path& path, FileFormat format,
                       Precision precision) {
  if (precision == Precision::f64) {
    throw Error(ErrorKind::InvalidArgument, "f64 is accepted on read only; write f32 or f16");
  }
  check_activation_set(acts);
  const FileFormat resolved = resolve(path, format);
  if (precision == Precision::f16) {
    for (const auto& s : acts.sentences) {
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        if (std::fabs(s.values[i]) > kHalfMax) {
          const std::size_t per_layer = s.token_count() * s.layer_width;
          const std::size_t layer = i / per_layer;
          const std::size_t token = (i % per_layer) / s.layer_width;
          throw Error(ErrorKind::PrecisionOverflow,
                      "value " + std::to_string(s.values[i]) + " exceeds the f16 range",
                      "sentence " + std::to_string(s.sentence_index) + ", token " + std::to_string(token) +
                          ", layer " + std::to_string(layer) + ", neuron " + std::to_string(i % s.layer_width));
        }
      }
    }
  }
  if (resolved == FileFormat::json) {
    write_json(acts, path, precision);
  } else {
    write_hdf5(acts, path, precision);
  }
}

void convert(const std::filesystem::path& in_path, const std::filesystem::path& out_path, FileFormat out_format,
             Precision precision) {
  const auto acts = read_activations(in_path, FileFormat::automatic);
  write_activations(acts, out_path, out_format, precision);
}

}  // namespace neuroscope
