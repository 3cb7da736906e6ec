// Artifact files: CSV series, JSON summaries and manifests with digests.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace vibro::harness {

using json = nlohmann::json;

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

// 17 significant digits; nan for missing values.
std::string fmt17(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add(const std::vector<double>& row);
  void add_cells(const std::vector<std::string>& cells);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::string> rows_;
};

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 when absent
  std::vector<double> numbers(const std::string& name) const;
};

CsvData read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);
// Stable, indented JSON with a trailing newline.
std::string dump_json(const json& j);

inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigEcho = "config.echo.ini";
inline constexpr const char* kSeriesFile = "series.csv";

// Inventory of every regular file in dir (manifest excluded), sorted by name.
json file_inventory(const std::filesystem::path& dir);

}  // namespace vibro::harness
