#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::data {

using WordTable = std::map<std::string, numerics::Vector, std::less<>>;

// Whitespace-separated text, one token per line followed by its floats (the
// GloVe text layout). Throws ParseError naming the line when a row's width
// differs from expected_dim.
WordTable load_word_vectors(const std::filesystem::path& path, std::size_t expected_dim);

// Stacks the vectors for `tokens`. Tokens missing from the table get a
// N(0, 1/sqrt(dim)) vector seeded by (seed, token) and a logged warning, so
// the fallback does not depend on lookup order.
numerics::DenseMatrix lookup_words(const WordTable& table, const std::vector<std::string>& tokens,
                                   std::size_t dim, std::uint64_t seed);

numerics::Vector fallback_word_vector(const std::string& token, std::size_t dim, std::uint64_t seed);

}  // namespace ctxproto::data
