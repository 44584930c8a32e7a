#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "slg/synthgen.hpp"

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("slg-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// A generator config small enough for unit tests.
inline slg::synth::GeneratorConfig small_generator(std::uint64_t seed = 7) {
  slg::synth::GeneratorConfig g;
  g.n_users = 600;
  g.n_transactions = 1600;
  g.n_rings = 3;
  g.ring_size = 8;
  g.hub_entity_count = 2;
  g.hub_min_size = 30;
  g.hub_max_size = 40;
  g.seed = seed;
  return g;
}

#include "slg/hash.hpp"

inline bool sha256_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
  return slg::sha256_file(a) == slg::sha256_file(b);
}
