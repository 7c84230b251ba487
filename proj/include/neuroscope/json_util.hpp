#pragma once

#include <filesystem>
#include <span>

#include <nlohmann/json.hpp>

namespace neuroscope {

/// Report floats carry 9 significant digits so identical runs serialize identically.
inline constexpr int kReportDigits = 9;

double round_significant(double value, int digits = kReportDigits);
nlohmann::json rounded(std::span<const double> values);

/// Pretty-printed JSON followed by a newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace neuroscope
