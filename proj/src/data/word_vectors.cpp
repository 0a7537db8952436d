#include "ctxproto/data/word_vectors.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ctxproto/error.hpp"
#include "ctxproto/model/config.hpp"

namespace ctxproto::data {

WordTable load_word_vectors(const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open word-vector file '{}'", path.string()));
  WordTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    numerics::Vector v;
    std::string raw;
    while (fields >> raw) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(raw, &used));
        if (used != raw.size()) throw std::invalid_argument(raw);
      } catch (const std::exception&) {
        throw ParseError(fmt::format("{}:{}: '{}' is not a number", path.string(), line_no, raw));
      }
    }
    if (v.size() != expected_dim) {
      throw ParseError(fmt::format("{}:{}: token '{}' has {} values, expected dimension {}",
                                   path.string(), line_no, token, v.size(), expected_dim));
    }
    table.insert_or_assign(std::move(token), std::move(v));
  }
  return table;
}

numerics::Vector fallback_word_vector(const std::string& token, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ model::fnv1a64(token));
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  numerics::Vector v(dim);
  for (double& x : v) x = dist(rng);
  return v;
}

numerics::DenseMatrix lookup_words(const WordTable& table, const std::vector<std::string>& tokens,
                                   std::size_t dim, std::uint64_t seed) {
  numerics::DenseMatrix out(tokens.size(), dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = table.find(tokens[i]);
    if (it != table.end()) {
      if (it->second.size() != dim) {
        throw DataError(fmt::format("word vector for '{}' has dimension {}, expected {}", tokens[i],
                                    it->second.size(), dim));
      }
      out.set_row(i, it->second);
    } else {
      spdlog::warn("no word vector for '{}'; using a seeded random fallback", tokens[i]);
      out.set_row(i, fallback_word_vector(tokens[i], dim, seed));
    }
  }
  return out;
}

}  // namespace ctxproto::data
