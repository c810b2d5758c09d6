#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fdl {

/// Fixed "%.10g" rendering, so equal doubles always produce equal bytes.
std::string format_number(double v);

class CsvWriter {
 public:
  /// Throws std::runtime_error when the file cannot be opened.
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::ofstream out_;
  std::size_t width_;
  std::filesystem::path path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws std::out_of_range for an unknown column.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  /// Parses a column as doubles; throws std::runtime_error on bad cells.
  std::vector<double> numeric(const std::string& name) const;
};

/// Comma-separated, no quoting. Throws std::runtime_error on a missing file,
/// empty input or rows whose width differs from the header.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace fdl
