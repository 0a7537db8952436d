#include "ctxproto/cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads typed fields out of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(fmt::format("{} must be an object", where()));
  }

  bool has(const char* key) {
    if (!doc_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  void get(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_number()) fail(key, "a number");
    out = v.get<double>();
  }
  void get(const char* key, std::size_t& out) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
    out = v.get<std::size_t>();
  }
  void get(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_boolean()) fail(key, "true or false");
    out = v.get<bool>();
  }
  void get(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_string()) fail(key, "a string");
    out = v.get<std::string>();
  }

  const json& raw(const char* key) { return doc_.at(key); }
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError(fmt::format("{} must be {}", child(key), expected));
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError(fmt::format("unknown config key '{}'", child(key.c_str())));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::pair<int, int>> int_pairs(const json& v, const std::string& name) {
  if (!v.is_array()) throw ConfigError(fmt::format("{} must be a list of [a, b] pairs", name));
  std::vector<std::pair<int, int>> out;
  for (const auto& p : v) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw ConfigError(fmt::format("{} must be a list of [a, b] integer pairs", name));
    }
    out.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  return out;
}

nlohmann::json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open {} '{}'", what, path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  json doc = json::parse(buf.str(), nullptr, false, true);
  if (doc.is_discarded()) throw ConfigError(fmt::format("{} '{}' is not valid JSON", what, path.string()));
  return doc;
}

void read_model(Section s, model::ModelConfig& m) {
  s.get("word_dim", m.word_dim);
  s.get("model_dim", m.model_dim);
  if (s.has("updater")) {
    const json& v = s.raw("updater");
    if (!v.is_string()) s.fail("updater", "a string");
    m.updater = model::parse_updater(v.get<std::string>());
  }
  s.get("edge", m.edge_enabled);
  s.get("temperature", m.temperature);
  s.get("layer_norm_epsilon", m.layer_norm_epsilon);
  s.finish();
}

void read_loss(Section s, losses::LossConfig& l) {
  s.get("gamma_div", l.gamma_div);
  s.get("gamma_align", l.gamma_align);
  s.get("lambda_sim", l.lambda_sim);
  s.get("lambda_div", l.lambda_div);
  s.get("lambda_align", l.lambda_align);
  s.get("reweight", l.reweight);
  s.get("reweight_beta", l.reweight_beta);
  if (s.has("reweight_clip")) {
    const json& v = s.raw("reweight_clip");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      s.fail("reweight_clip", "a [min, max] pair of numbers");
    }
    l.reweight_min = v[0].get<double>();
    l.reweight_max = v[1].get<double>();
  }
  s.finish();
}

void read_train(Section s, train::TrainConfig& t) {
  s.get("iterations", t.iterations);
  s.get("batch_size", t.batch_size);
  s.get("lr", t.lr);
  s.get("momentum", t.momentum);
  s.get("weight_decay", t.weight_decay);
  s.get("seed", t.seed);
  s.get("log_every", t.log_every);
  s.get("checkpoint_every", t.checkpoint_every);
  s.get("divergence_threshold", t.divergence_threshold);
  s.finish();
}

void read_generator(Section s, data::GeneratorSpec& g, std::size_t& scenes) {
  s.get("num_predicates", g.num_predicates);
  s.get("num_categories", g.num_categories);
  s.get("visual_dim", g.visual_dim);
  if (s.has("confusable_pairs")) {
    g.confusable_pairs.clear();
    for (auto [a, b] : int_pairs(s.raw("confusable_pairs"), s.child("confusable_pairs"))) {
      g.confusable_pairs.push_back({a, b});
    }
  }
  s.get("noise_sigma", g.noise_sigma);
  s.get("fillers_per_scene", g.fillers_per_scene);
  s.get("ambiguous_per_scene", g.ambiguous_per_scene);
  s.get("tail_skew", g.tail_skew);
  s.get("class_scale", g.class_scale);
  s.get("context_scale", g.context_scale);
  s.get("layout_seed", g.layout_seed);
  s.get("seed", g.seed);
  s.get("scenes", scenes);
  s.finish();
}

void read_eval(Section s, EvalOptions& e) {
  if (s.has("recall_ks")) {
    const json& v = s.raw("recall_ks");
    if (!v.is_array()) s.fail("recall_ks", "a list of positive integers");
    e.recall_ks.clear();
    for (const auto& k : v) {
      if (!k.is_number_unsigned()) s.fail("recall_ks", "a list of positive integers");
      e.recall_ks.push_back(k.get<std::size_t>());
    }
  }
  if (s.has("confusion_pairs")) {
    e.confusion_pairs.clear();
    for (auto [gt, confused] : int_pairs(s.raw("confusion_pairs"), s.child("confusion_pairs"))) {
      e.confusion_pairs.push_back({gt, confused});
    }
  }
  s.get("confusion_limit", e.confusion_limit);
  s.finish();
}

void read_words(Section s, WordOptions& w) {
  s.get("predicate_vectors", w.predicate_vectors);
  s.get("category_vectors", w.category_vectors);
  s.get("fallback_seed", w.fallback_seed);
  s.finish();
}

void read_paths(Section s, PathOptions& p) {
  s.get("data", p.data);
  s.get("eval_data", p.eval_data);
  s.get("out", p.out);
  s.get("checkpoint", p.checkpoint);
  s.get("compare", p.compare);
  s.get("report", p.report);
  s.get("trace", p.trace);
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  generator.validate();
  if (scenes == 0) throw ConfigError("generator.scenes must be >= 1");
  if (eval.recall_ks.empty()) throw ConfigError("eval.recall_ks must not be empty");
  for (std::size_t k : eval.recall_ks) {
    if (k == 0) throw ConfigError("eval.recall_ks entries must be >= 1");
  }
  for (const auto& p : eval.confusion_pairs) {
    if (p.gt < 0 || p.confused < 0) throw ConfigError("eval.confusion_pairs entries must be >= 0");
  }
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  Section root(doc, "");
  if (root.has("model")) read_model(Section(root.raw("model"), "model"), c.train.model);
  if (root.has("loss")) read_loss(Section(root.raw("loss"), "loss"), c.train.loss);
  if (root.has("train")) read_train(Section(root.raw("train"), "train"), c.train);
  if (root.has("generator")) {
    read_generator(Section(root.raw("generator"), "generator"), c.generator, c.scenes);
  }
  if (root.has("eval")) read_eval(Section(root.raw("eval"), "eval"), c.eval);
  if (root.has("words")) read_words(Section(root.raw("words"), "words"), c.words);
  if (root.has("paths")) read_paths(Section(root.raw("paths"), "paths"), c.paths);
  root.finish();
  return c;
}

ordered_json run_config_to_json(const RunConfig& c) {
  const auto& m = c.train.model;
  const auto& l = c.train.loss;
  const auto& t = c.train;
  const auto& g = c.generator;
  ordered_json j;
  j["model"] = {{"word_dim", m.word_dim},
                {"model_dim", m.model_dim},
                {"updater", std::string(model::to_string(m.updater))},
                {"edge", m.edge_enabled},
                {"temperature", m.temperature},
                {"layer_norm_epsilon", m.layer_norm_epsilon}};
  j["loss"] = {{"gamma_div", l.gamma_div},       {"gamma_align", l.gamma_align},
               {"lambda_sim", l.lambda_sim},     {"lambda_div", l.lambda_div},
               {"lambda_align", l.lambda_align}, {"reweight", l.reweight},
               {"reweight_beta", l.reweight_beta},
               {"reweight_clip", {l.reweight_min, l.reweight_max}}};
  j["train"] = {{"iterations", t.iterations},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"momentum", t.momentum},
                {"weight_decay", t.weight_decay},
                {"seed", t.seed},
                {"log_every", t.log_every},
                {"checkpoint_every", t.checkpoint_every},
                {"divergence_threshold", t.divergence_threshold}};
  ordered_json pairs = ordered_json::array();
  for (const auto& p : g.confusable_pairs) pairs.push_back({p.context_a, p.context_b});
  j["generator"] = {{"num_predicates", g.num_predicates},
                    {"num_categories", g.num_categories},
                    {"visual_dim", g.visual_dim},
                    {"confusable_pairs", pairs},
                    {"noise_sigma", g.noise_sigma},
                    {"fillers_per_scene", g.fillers_per_scene},
                    {"ambiguous_per_scene", g.ambiguous_per_scene},
                    {"tail_skew", g.tail_skew},
                    {"class_scale", g.class_scale},
                    {"context_scale", g.context_scale},
                    {"layout_seed", g.layout_seed},
                    {"seed", g.seed},
                    {"scenes", c.scenes}};
  ordered_json cpairs = ordered_json::array();
  for (const auto& p : c.eval.confusion_pairs) cpairs.push_back({p.gt, p.confused});
  j["eval"] = {{"recall_ks", c.eval.recall_ks},
               {"confusion_pairs", cpairs},
               {"confusion_limit", c.eval.confusion_limit}};
  j["words"] = {{"predicate_vectors", c.words.predicate_vectors},
                {"category_vectors", c.words.category_vectors},
                {"fallback_seed", c.words.fallback_seed}};
  const auto& p = c.paths;
  j["paths"] = {{"data", p.data},           {"eval_data", p.eval_data}, {"out", p.out},
                {"checkpoint", p.checkpoint}, {"compare", p.compare},   {"report", p.report},
                {"trace", p.trace}};
  return j;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not of the form key.path=value", assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(fmt::format("override key '{}' has an empty segment", key));
    if (!node->is_object()) {
      throw ConfigError(fmt::format("override key '{}' descends into a non-object", key));
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  json doc = path.empty() ? json::object() : read_json_file(path, "config file");
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig config = run_config_from_json(doc);
  config.validate();
  return config;
}

AblationGrid ablation_grid_from_json(const json& doc, const RunConfig& base) {
  AblationGrid grid;
  Section s(doc, "grid");
  auto list = [&](const char* key) -> const json& {
    const json& v = s.raw(key);
    if (!v.is_array() || v.empty()) s.fail(key, "a non-empty list");
    return v;
  };
  if (s.has("edge")) {
    for (const auto& v : list("edge")) {
      if (!v.is_boolean()) s.fail("edge", "a list of booleans");
      grid.edge.push_back(v.get<bool>());
    }
  } else {
    grid.edge.push_back(base.train.model.edge_enabled);
  }
  if (s.has("updater")) {
    for (const auto& v : list("updater")) {
      if (!v.is_string()) s.fail("updater", "a list of updater names");
      grid.updaters.push_back(model::parse_updater(v.get<std::string>()));
    }
  } else {
    grid.updaters.push_back(base.train.model.updater);
  }
  if (s.has("lambdas")) {
    std::size_t i = 0;
    for (const auto& v : list("lambdas")) {
      LambdaSet set;
      set.lambda_sim = base.train.loss.lambda_sim;
      set.lambda_div = base.train.loss.lambda_div;
      set.lambda_align = base.train.loss.lambda_align;
      Section entry(v, fmt::format("grid.lambdas[{}]", i++));
      entry.get("name", set.name);
      entry.get("lambda_sim", set.lambda_sim);
      entry.get("lambda_div", set.lambda_div);
      entry.get("lambda_align", set.lambda_align);
      entry.finish();
      if (set.lambda_sim < 0.0 || set.lambda_div < 0.0 || set.lambda_align < 0.0) {
        throw ConfigError("grid lambdas must be >= 0");
      }
      if (set.name.empty()) {
        set.name = fmt::format("{:g}/{:g}/{:g}", set.lambda_sim, set.lambda_div, set.lambda_align);
      }
      grid.lambdas.push_back(set);
    }
  } else {
    const auto& l = base.train.loss;
    grid.lambdas.push_back({"base", l.lambda_sim, l.lambda_div, l.lambda_align});
  }
  if (s.has("seeds")) {
    for (const auto& v : list("seeds")) {
      if (!v.is_number_unsigned()) s.fail("seeds", "a list of non-negative integers");
      grid.seeds.push_back(v.get<std::uint64_t>());
    }
  } else {
    grid.seeds.push_back(base.train.seed);
  }
  s.finish();
  return grid;
}

AblationGrid load_ablation_grid(const std::filesystem::path& path, const RunConfig& base) {
  return ablation_grid_from_json(read_json_file(path, "grid file"), base);
}

void OutputSet::add(std::filesystem::path path, std::string contents) {
  files_.emplace_back(std::move(path), std::move(contents));
}

void OutputSet::commit() {
  namespace fs = std::filesystem;
  std::vector<fs::path> staged;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : staged) fs::remove(p, ec);
  };
  for (const auto& [path, contents] : files_) {
    fs::path tmp = path;
    tmp += ".partial";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.close();
    if (!out) {
      staged.push_back(tmp);
      cleanup();
      throw DataError(fmt::format("cannot write '{}'", path.string()));
    }
    staged.push_back(tmp);
  }
  for (std::size_t i = 0; i < files_.size(); ++i) {
    std::error_code ec;
    fs::rename(staged[i], files_[i].first, ec);
    if (ec) {
      cleanup();
      throw DataError(fmt::format("cannot move output into '{}': {}", files_[i].first.string(),
                                  ec.message()));
    }
  }
  files_.clear();
}

}  // namespace ctxproto::cli
