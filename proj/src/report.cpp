#include "spdo/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "spdo/errors.hpp"

namespace spdo {

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json finite_or_null(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(finite_or_null(x));
  return out;
}

std::string to_csv(const CsvTable& table) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < table.header.size(); ++i) os << (i ? "," : "") << table.header[i];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      if (std::isfinite(row[i]))
        os << row[i];
      else
        os << (std::isnan(row[i]) ? "nan" : (row[i] > 0 ? "inf" : "-inf"));
    }
    os << '\n';
  }
  return os.str();
}

namespace {
void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParameterError("cannot write " + path.string());
  f << text;
}
}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_text(path, to_csv(table)); }

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace spdo
