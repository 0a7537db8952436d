#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ctxproto/data/scene.hpp"

namespace ctxproto::data {

inline constexpr const char* kSceneFormatTag = "ctxproto-scenes/1";

// Line-delimited JSON. Line 1 is the dataset header, every following line one
// scene. Doubles are written in shortest round-trip form. See docs/formats.md.
void save_scenes(const std::filesystem::path& path, const Dataset& dataset);
void write_scenes(std::ostream& out, const Dataset& dataset);

// Throws ParseError naming the line for malformed records and DataError for
// records that violate the header (e.g. label >= num_predicates).
Dataset load_scenes(const std::filesystem::path& path);
Dataset read_scenes(std::istream& in, const std::string& source_name = "<stream>");

}  // namespace ctxproto::data
