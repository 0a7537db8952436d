#pragma once

#include <cstdint>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::testing {

inline numerics::DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows,
                                           std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  numerics::DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = n(rng);
  return m;
}

inline numerics::Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  return random_matrix(rng, 1, n, scale).data();
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ctxproto_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace ctxproto::testing
