#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace slg::csv {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header);
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  Writer& field(std::string_view s);
  Writer& field(double v);
  Writer& field(std::int64_t v);
  Writer& field(int v) { return field(static_cast<std::int64_t>(v)); }
  Writer& field(std::size_t v) { return field(static_cast<std::int64_t>(v)); }
  void end_row();

  std::size_t rows() const noexcept { return rows_; }
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::string line_;
  bool first_ = true;
  std::size_t rows_ = 0;
};

/// Line reader that validates the header on open.
class Reader {
 public:
  Reader(const std::filesystem::path& path, const std::vector<std::string>& expected_header);
  /// Reader that accepts any header; inspect it with header().
  explicit Reader(const std::filesystem::path& path);

  bool next(std::vector<std::string_view>& fields);
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::filesystem::path& path() const noexcept { return path_; }
  std::size_t line_number() const noexcept { return line_no_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::string line_;
  std::vector<std::string> header_;
  std::size_t line_no_ = 0;
};

/// Column names prefix000..prefix{n-1}.
std::vector<std::string> numbered_columns(const std::string& prefix, std::size_t n);

}  // namespace slg::csv
