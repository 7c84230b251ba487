#include "neuroscope/json_util.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "neuroscope/error.hpp"

namespace neuroscope {

double round_significant(double value, int digits) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return std::strtod(buf, nullptr);
}

nlohmann::json rounded(std::span<const double> values) {
  auto out = nlohmann::json::array();
  for (double v : values) out.push_back(round_significant(v));
  return out;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open for writing", path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "write failed", path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open file", path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedFile, e.what(), path.string());
  }
}

}  // namespace neuroscope
