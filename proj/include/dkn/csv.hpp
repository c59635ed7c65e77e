#pragma once

#include "dkn/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dkn {

/// Shortest round-trip decimal form of a double; "NA" for NaN.
std::string format_number(double value);

/// In-memory CSV with a fixed header. Output uses LF line endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes to a temporary sibling then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Splits one CSV line; double-quoted fields may contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

struct CsvLoadOptions {
  bool header = true;
  /// Response column name (requires a header); the last column when empty.
  std::optional<std::string> response;
};

Dataset load_dataset_csv(const std::string& path, const CsvLoadOptions& options = {});
Dataset parse_dataset_csv(const std::string& text, const CsvLoadOptions& options = {});

/// Columns group_id, count, M, pi, selected.
std::string record_csv(const SelectionRecord& record);
SelectionRecord parse_record_csv(const std::string& text);

}  // namespace dkn
