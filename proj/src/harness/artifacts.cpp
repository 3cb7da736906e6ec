#include "vibrolab/harness/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace vibro::harness {

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add(const std::vector<double>& row) {
  std::vector<std::string> cells;
  cells.reserve(row.size());
  for (double v : row) cells.push_back(fmt17(v));
  add_cells(cells);
}

void CsvTable::add_cells(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size())
    throw std::logic_error("csv: row has " + std::to_string(cells.size()) + " cells, header " +
                           std::to_string(header_.size()));
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
  rows_.push_back(std::move(line));
}

std::string CsvTable::str() const {
  std::string s;
  for (std::size_t i = 0; i < header_.size(); ++i) s += (i ? "," : "") + header_[i];
  s += "\n";
  for (const auto& r : rows_) s += r + "\n";
  return s;
}

int CsvData::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> CsvData::numbers(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw std::invalid_argument("csv: no column '" + name + "'");
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)] == "nan" ? NAN : std::stod(r[static_cast<std::size_t>(c)]));
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvData read_csv(const std::filesystem::path& path) {
  std::istringstream is(read_text(path));
  CsvData d;
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("csv: empty file " + path.string());
  d.header = split_csv_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != d.header.size()) throw std::invalid_argument("csv: ragged row in " + path.string());
    d.rows.push_back(std::move(cells));
  }
  return d;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json file_inventory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != kManifestFile) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  json inv = json::array();
  for (const auto& f : files)
    inv.push_back({{"name", f.filename().string()},
                   {"bytes", std::filesystem::file_size(f)},
                   {"sha256", sha256_file(f)}});
  return inv;
}

}  // namespace vibro::harness
