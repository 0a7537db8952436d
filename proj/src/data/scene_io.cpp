#include "ctxproto/data/scene_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ctxproto/error.hpp"

namespace ctxproto::data {

using nlohmann::json;

namespace {

json header_to_json(const DatasetHeader& h) {
  json j;
  j["format"] = kSceneFormatTag;
  j["num_predicates"] = h.num_predicates;
  j["num_categories"] = h.num_categories;
  j["visual_dim"] = h.visual_dim;
  j["predicate_names"] = h.predicate_names;
  j["category_names"] = h.category_names;
  return j;
}

json scene_to_json(const Scene& s) {
  json j;
  j["scene_id"] = s.scene_id;
  j["context"] = s.context_tag;
  j["gt_count"] = s.gt_count;
  json cands = json::array();
  for (const auto& c : s.candidates) {
    json cj;
    cj["subj_cat"] = c.subject_category;
    cj["obj_cat"] = c.object_category;
    cj["subj_feat"] = c.subject_feature;
    cj["obj_feat"] = c.object_feature;
    cj["label"] = c.label ? json(*c.label) : json(nullptr);
    cj["ambiguous"] = c.ambiguous;
    cands.push_back(std::move(cj));
  }
  j["candidates"] = std::move(cands);
  return j;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(fmt::format("missing field '{}'", key));
  return j.at(key).get<T>();
}

DatasetHeader header_from_json(const json& j) {
  if (!j.is_object() || field<std::string>(j, "format") != kSceneFormatTag) {
    throw ParseError(fmt::format("expected a '{}' header record", kSceneFormatTag));
  }
  DatasetHeader h;
  h.num_predicates = field<std::size_t>(j, "num_predicates");
  h.num_categories = field<std::size_t>(j, "num_categories");
  h.visual_dim = field<std::size_t>(j, "visual_dim");
  h.predicate_names = field<std::vector<std::string>>(j, "predicate_names");
  h.category_names = field<std::vector<std::string>>(j, "category_names");
  if (h.predicate_names.size() != h.num_predicates || h.category_names.size() != h.num_categories) {
    throw ParseError("header name lists do not match num_predicates / num_categories");
  }
  return h;
}

Scene scene_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("scene record is not an object");
  Scene s;
  s.scene_id = field<std::string>(j, "scene_id");
  s.context_tag = field<std::string>(j, "context");
  s.gt_count = field<std::size_t>(j, "gt_count");
  for (const auto& cj : field<json>(j, "candidates")) {
    Candidate c;
    c.subject_category = field<int>(cj, "subj_cat");
    c.object_category = field<int>(cj, "obj_cat");
    c.subject_feature = field<Vector>(cj, "subj_feat");
    c.object_feature = field<Vector>(cj, "obj_feat");
    const json& label = cj.at("label");
    if (!label.is_null()) c.label = label.get<int>();
    c.ambiguous = field<bool>(cj, "ambiguous");
    s.candidates.push_back(std::move(c));
  }
  return s;
}

}  // namespace

void write_scenes(std::ostream& out, const Dataset& dataset) {
  out << header_to_json(dataset.header).dump() << '\n';
  for (const auto& s : dataset.scenes) out << scene_to_json(s).dump() << '\n';
}

void save_scenes(const std::filesystem::path& path, const Dataset& dataset) {
  for (const auto& s : dataset.scenes) validate_scene(s, dataset.header);
  std::ostringstream buffer;
  write_scenes(buffer, dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  out << buffer.str();
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

Dataset read_scenes(std::istream& in, const std::string& source_name) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: malformed record: {}", source_name, line_no, e.what()));
    }
    try {
      if (!have_header) {
        ds.header = header_from_json(j);
        have_header = true;
        continue;
      }
      Scene s = scene_from_json(j);
      validate_scene(s, ds.header);
      ds.scenes.push_back(std::move(s));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", source_name, line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", source_name, line_no, e.what()));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: bad field: {}", source_name, line_no, e.what()));
    }
  }
  if (!have_header) throw ParseError(fmt::format("{}: empty scene file", source_name));
  return ds;
}

Dataset load_scenes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open scene file '{}'", path.string()));
  return read_scenes(in, path.string());
}

}  // namespace ctxproto::data
