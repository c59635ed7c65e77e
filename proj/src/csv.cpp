#include "dkn/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dkn {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, std::size_t line) {
  const std::string t = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    std::ostringstream msg;
    msg << "line " << line << ": '" << t << "' is not a number";
    fail(ErrorKind::Data, msg.str());
  }
  return value;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) fail(ErrorKind::Argument, "CSV row width does not match the header");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  emit(header_);
  for (const auto& r : rows_) emit(r);
  return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Data, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) fail(ErrorKind::Data, "write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

Dataset parse_dataset_csv(const std::string& text, const CsvLoadOptions& options) {
  const std::vector<std::string> lines = lines_of(text);
  if (lines.empty()) fail(ErrorKind::Data, "CSV is empty");
  std::vector<std::string> header;
  std::size_t first = 0;
  if (options.header) {
    header = split_csv_line(lines[0]);
    first = 1;
  }
  const std::size_t width = split_csv_line(lines[first < lines.size() ? first : 0]).size();
  if (width < 2) fail(ErrorKind::Data, "CSV needs at least one feature column and a response column");
  if (options.header && header.size() != width) fail(ErrorKind::Data, "header width does not match the data");

  std::size_t response = width - 1;
  if (options.response) {
    if (!options.header) fail(ErrorKind::Config, "a named response column requires a header row");
    const auto it = std::find(header.begin(), header.end(), *options.response);
    if (it == header.end()) fail(ErrorKind::Data, "response column '" + *options.response + "' not found");
    response = static_cast<std::size_t>(it - header.begin());
  }

  const std::size_t n = lines.size() - first;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width - 1));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const std::vector<std::string> fields = split_csv_line(lines[first + r]);
    if (fields.size() != width) {
      std::ostringstream msg;
      msg << "line " << first + r + 1 << " has " << fields.size() << " fields, expected " << width;
      fail(ErrorKind::Data, msg.str());
    }
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = parse_number(fields[c], first + r + 1);
      if (c == response) {
        y(static_cast<Eigen::Index>(r)) = v;
      } else {
        x(static_cast<Eigen::Index>(r), col++) = v;
      }
    }
  }
  std::vector<std::string> names;
  if (options.header) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c != response) names.push_back(header[c]);
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(names));
}

Dataset load_dataset_csv(const std::string& path, const CsvLoadOptions& options) {
  return parse_dataset_csv(read_file(path), options);
}

std::string record_csv(const SelectionRecord& record) {
  CsvTable table({"group_id", "count", "M", "pi", "selected"});
  for (int g = 0; g < record.num_groups(); ++g) {
    table.add({std::to_string(g), std::to_string(record.counts()[static_cast<std::size_t>(g)]),
               std::to_string(record.m_runs()), format_number(record.frequency(g)),
               record.final_set().contains(g) ? "1" : "0"});
  }
  return table.str();
}

SelectionRecord parse_record_csv(const std::string& text) {
  const std::vector<std::string> lines = lines_of(text);
  if (lines.empty()) fail(ErrorKind::Data, "record CSV is empty");
  const std::vector<std::string> header = split_csv_line(lines[0]);
  const std::vector<std::string> expected{"group_id", "count", "M", "pi", "selected"};
  if (header != expected) fail(ErrorKind::Data, "record CSV header must be group_id,count,M,pi,selected");
  std::vector<int> counts;
  int m_runs = -1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> f = split_csv_line(lines[i]);
    if (f.size() != 5) fail(ErrorKind::Data, "record CSV rows need 5 fields");
    if (static_cast<std::size_t>(parse_number(f[0], i + 1)) != counts.size()) fail(ErrorKind::Data, "record CSV group ids must be 0, 1, 2, ...");
    const int m = static_cast<int>(parse_number(f[2], i + 1));
    if (m_runs >= 0 && m != m_runs) fail(ErrorKind::Data, "record CSV mixes different M");
    m_runs = m;
    counts.push_back(static_cast<int>(parse_number(f[1], i + 1)));
  }
  if (counts.empty()) fail(ErrorKind::Data, "record CSV has no groups");
  // eta is not stored; callers re-threshold as needed.
  return SelectionRecord::from_counts(std::move(counts), m_runs, 1.0);
}

}  // namespace dkn
