#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace homest {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

/// Small in-memory CSV table written in one shot; numeric cells use
/// format_double so identical inputs give byte-identical files.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  void add_row(const std::vector<double>& values);
  void add_row(std::vector<std::string> cells);

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parsed CSV: header plus string cells.
struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

CsvData read_csv(const std::filesystem::path& path);

}  // namespace homest
