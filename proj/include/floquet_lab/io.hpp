#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace flab {

/// Parses a JSON file; a missing or malformed file raises a Config error naming the path.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Writes via a sibling temporary and rename, so readers never see a partial file.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Shortest-form-independent float rendering with 9 significant digits.
std::string format_float(double v);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string content_hash(std::string_view bytes);

/// In-memory CSV table with a fixed header; numeric cells use format_float.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  void add_row(const std::vector<double>& values);
  void add_row(std::vector<std::string> cells);

  std::string str() const;
  void write(const std::filesystem::path& path) const { write_text_atomic(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace flab
