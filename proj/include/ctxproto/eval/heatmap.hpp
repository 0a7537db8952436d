#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::eval {

struct SimilarityHeatmap {
  numerics::DenseMatrix delta;    // cos(adapted) - cos(static), R x R
  numerics::DenseMatrix adapted;  // cos(adapted), R x R
};

SimilarityHeatmap similarity_heatmap(const numerics::DenseMatrix& static_prototypes,
                                     const numerics::DenseMatrix& adapted);

// Comma-separated grid: a header row of predicate names, then one row per
// predicate led by its name. Values use 17 significant digits.
std::string grid_csv(const numerics::DenseMatrix& grid, std::span<const std::string> names);

struct HeatmapFiles {
  std::filesystem::path delta;
  std::filesystem::path similarity;
};

// Writes <prefix>.delta.csv and <prefix>.similarity.csv.
HeatmapFiles heatmap_export(const numerics::DenseMatrix& static_prototypes,
                            const numerics::DenseMatrix& adapted,
                            std::span<const std::string> names,
                            const std::filesystem::path& prefix);

}  // namespace ctxproto::eval
