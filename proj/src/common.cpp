#include <array>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "slg/csv.hpp"
#include "slg/error.hpp"
#include "slg/hash.hpp"
#include "slg/parallel.hpp"

namespace slg {

namespace {
std::atomic<std::size_t> g_threads{1};
}

std::size_t thread_count() noexcept { return g_threads.load(); }
void set_thread_count(std::size_t n) noexcept { g_threads.store(n == 0 ? 1 : n); }

namespace {

std::string to_hex(const unsigned char* bytes, unsigned int len) {
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(bytes[i]);
  return os.str();
}

struct DigestCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  DigestCtx() { EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr); }
  ~DigestCtx() { EVP_MD_CTX_free(ctx); }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx, p, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, out.data(), &len);
    return to_hex(out.data(), len);
  }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  DigestCtx d;
  d.update(data.data(), data.size());
  return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing", path.string());
  DigestCtx d;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

namespace csv {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> numbered_columns(const std::string& prefix, std::size_t n) {
  std::vector<std::string> cols;
  cols.reserve(n);
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%03zu", i);
    cols.push_back(prefix + buf);
  }
  return cols;
}

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot open for writing", path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

Writer& Writer::field(std::string_view s) {
  if (!first_) line_.push_back(',');
  line_.append(s);
  first_ = false;
  return *this;
}

Writer& Writer::field(double v) { return field(std::string_view(format_double(v))); }

Writer& Writer::field(std::int64_t v) {
  std::array<char, 24> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return field(std::string_view(buf.data(), static_cast<std::size_t>(ptr - buf.data())));
}

void Writer::end_row() {
  line_.push_back('\n');
  out_.write(line_.data(), static_cast<std::streamsize>(line_.size()));
  line_.clear();
  first_ = true;
  ++rows_;
}

void Writer::close() {
  out_.flush();
  if (!out_) throw IoError("write failed", path_.string());
  out_.close();
}

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open for reading", path.string());
  if (!std::getline(in_, line_)) throw IoError("missing CSV header", path.string());
  ++line_no_;
  if (!line_.empty() && line_.back() == '\r') line_.pop_back();
  for (auto f : split(line_)) header_.emplace_back(f);
}

Reader::Reader(const std::filesystem::path& path, const std::vector<std::string>& expected_header)
    : Reader(path) {
  if (header_ != expected_header) throw IoError("unexpected CSV header", path.string());
}

bool Reader::next(std::vector<std::string_view>& fields) {
  while (std::getline(in_, line_)) {
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_.empty()) continue;
    fields = split(line_);
    if (fields.size() != header_.size())
      throw IoError("wrong field count on line " + std::to_string(line_no_), path_.string());
    return true;
  }
  return false;
}

}  // namespace csv
}  // namespace slg
