#include "ctxproto/eval/heatmap.hpp"

#include <fstream>

#include <fmt/format.h>

#include "ctxproto/error.hpp"
#include "ctxproto/model/model.hpp"

namespace ctxproto::eval {

SimilarityHeatmap similarity_heatmap(const numerics::DenseMatrix& static_prototypes,
                                     const numerics::DenseMatrix& adapted) {
  return {model::similarity_shift(static_prototypes, adapted), model::cosine_matrix(adapted)};
}

std::string grid_csv(const numerics::DenseMatrix& grid, std::span<const std::string> names) {
  if (grid.rows() != names.size() || grid.cols() != names.size()) {
    throw DimensionError(fmt::format("heatmap grid {} does not match {} predicate names",
                                     grid.shape_string(), names.size()));
  }
  std::string out = "predicate";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    out += names[r];
    for (std::size_t c = 0; c < grid.cols(); ++c) out += fmt::format(",{:.17g}", grid(r, c));
    out += "\n";
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace

HeatmapFiles heatmap_export(const numerics::DenseMatrix& static_prototypes,
                            const numerics::DenseMatrix& adapted,
                            std::span<const std::string> names,
                            const std::filesystem::path& prefix) {
  const auto maps = similarity_heatmap(static_prototypes, adapted);
  const std::string delta = grid_csv(maps.delta, names);
  const std::string similarity = grid_csv(maps.adapted, names);
  HeatmapFiles files{prefix.string() + ".delta.csv", prefix.string() + ".similarity.csv"};
  write_text(files.delta, delta);
  write_text(files.similarity, similarity);
  return files;
}

}  // namespace ctxproto::eval
