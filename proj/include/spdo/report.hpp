#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace spdo {

using Json = nlohmann::ordered_json;

/// Non-finite numbers become null.
Json finite_or_null(double v);
Json finite_or_null(const std::vector<double>& v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
};

std::string to_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Pretty-printed, sorted by insertion, trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace spdo
