#ifndef QBUFFER_CSV_HPP
#define QBUFFER_CSV_HPP

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbuffer {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimal RFC-4180 table writer. Numbers are printed with %.17g so the
// emitted bytes are identical for identical values, regardless of worker
// count, and round-trip exactly.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& cell(const std::string& v) {
    row_.push_back(quote(v));
    return *this;
  }
  CsvTable& cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    row_.emplace_back(buf);
    return *this;
  }
  CsvTable& cell(long long v) {
    row_.push_back(std::to_string(v));
    return *this;
  }
  CsvTable& cell(int v) { return cell(static_cast<long long>(v)); }

  void end_row() {
    if (row_.size() != header_.size())
      throw std::logic_error("CsvTable: row width does not match header");
    rows_.push_back(join(row_));
    row_.clear();
  }

  std::string str() const {
    std::string out = join_quoted_header();
    for (const auto& r : rows_) {
      out += r;
      out += "\r\n";
    }
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("io-error: cannot open " + path);
    const std::string body = str();
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!os) throw IoError("io-error: write failed for " + path);
  }

  std::size_t row_count() const { return rows_.size(); }

 private:
  static std::string quote(const std::string& v) {
    if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
    return out;
  }
  static std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    return out;
  }
  std::string join_quoted_header() const {
    std::vector<std::string> quoted;
    quoted.reserve(header_.size());
    for (const auto& h : header_) quoted.push_back(quote(h));
    return join(quoted) + "\r\n";
  }

  std::vector<std::string> header_;
  std::vector<std::string> row_;
  std::vector<std::string> rows_;
};

}  // namespace qbuffer

#endif
