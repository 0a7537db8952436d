#include "ctxproto/train/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ctxproto/error.hpp"

namespace ctxproto::train {

using nlohmann::ordered_json;

namespace {

ordered_json config_to_json(const model::ModelConfig& c) {
  ordered_json j;
  j["num_predicates"] = c.num_predicates;
  j["num_categories"] = c.num_categories;
  j["word_dim"] = c.word_dim;
  j["visual_dim"] = c.visual_dim;
  j["model_dim"] = c.model_dim;
  j["updater"] = std::string(model::to_string(c.updater));
  j["edge_enabled"] = c.edge_enabled;
  j["temperature"] = c.temperature;
  j["layer_norm_epsilon"] = c.layer_norm_epsilon;
  return j;
}

model::ModelConfig config_from_json(const ordered_json& j) {
  model::ModelConfig c;
  c.num_predicates = j.at("num_predicates").get<std::size_t>();
  c.num_categories = j.at("num_categories").get<std::size_t>();
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.visual_dim = j.at("visual_dim").get<std::size_t>();
  c.model_dim = j.at("model_dim").get<std::size_t>();
  c.updater = model::parse_updater(j.at("updater").get<std::string>());
  c.edge_enabled = j.at("edge_enabled").get<bool>();
  c.temperature = j.at("temperature").get<double>();
  c.layer_norm_epsilon = j.at("layer_norm_epsilon").get<double>();
  return c;
}

ordered_json params_to_json(const model::ModelParams& p) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : p.entries()) {
    ordered_json j;
    j["name"] = e.name;
    j["rows"] = e.value.rows();
    j["cols"] = e.value.cols();
    j["trainable"] = e.trainable;
    j["decay"] = e.decay;
    j["data"] = e.value.data();
    arr.push_back(std::move(j));
  }
  return arr;
}

model::ModelParams params_from_json(const ordered_json& arr) {
  model::ModelParams p;
  for (const auto& j : arr) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) {
      throw ParseError(fmt::format("array '{}' holds {} values for shape {}x{}",
                                   j.at("name").get<std::string>(), data.size(), rows, cols));
    }
    p.add(j.at("name").get<std::string>(), numerics::DenseMatrix(rows, cols, std::move(data)),
          j.at("trainable").get<bool>(), j.at("decay").get<bool>());
  }
  return p;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& c) {
  ordered_json j;
  j["format"] = kCheckpointFormatTag;
  j["config_digest"] = c.config.digest();
  j["config"] = config_to_json(c.config);
  j["seed"] = c.seed;
  j["iteration"] = c.iteration;
  j["params"] = params_to_json(c.params);
  j["momentum"] = params_to_json(c.momentum);
  ordered_json trace = ordered_json::array();
  for (const auto& t : c.trace) {
    trace.push_back({t.iteration, t.loss.cls, t.loss.reg_sim, t.loss.reg_div, t.loss.align,
                     t.loss.total});
  }
  j["trace_columns"] = {"iteration", "cls", "reg_sim", "reg_div", "align", "total"};
  j["trace"] = std::move(trace);
  return j.dump(1) + "\n";
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string text = checkpoint_to_string(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

Checkpoint checkpoint_from_string(const std::string& text) {
  Checkpoint c;
  try {
    const ordered_json j = ordered_json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormatTag) {
      throw ParseError(fmt::format("unsupported checkpoint format '{}'", j.at("format").get<std::string>()));
    }
    c.config = config_from_json(j.at("config"));
    if (j.at("config_digest").get<std::string>() != c.config.digest()) {
      throw ParseError("checkpoint digest does not match its stored config");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
    c.iteration = j.at("iteration").get<std::size_t>();
    c.params = params_from_json(j.at("params"));
    c.momentum = params_from_json(j.at("momentum"));
    for (const auto& row : j.at("trace")) {
      TraceEntry t;
      t.iteration = row.at(0).get<std::size_t>();
      t.loss = {row.at(1).get<double>(), row.at(2).get<double>(), row.at(3).get<double>(),
                row.at(4).get<double>(), row.at(5).get<double>()};
      c.trace.push_back(t);
    }
  } catch (const ordered_json::exception& e) {
    throw ParseError(fmt::format("malformed checkpoint: {}", e.what()));
  } catch (const ConfigError& e) {
    throw ParseError(fmt::format("malformed checkpoint: {}", e.what()));
  }
  const auto layout = model::init_params(c.config, 0).zeros_like();
  auto same_layout = [&](const model::ModelParams& p) {
    if (p.entries().size() != layout.entries().size()) return false;
    for (std::size_t i = 0; i < p.entries().size(); ++i) {
      const auto& a = p.entries()[i];
      const auto& b = layout.entries()[i];
      if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
        return false;
      }
    }
    return true;
  };
  if (!same_layout(c.params) || !same_layout(c.momentum)) {
    throw ParseError("checkpoint parameter layout does not match its config");
  }
  return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open checkpoint '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return checkpoint_from_string(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void require_compatible(const Checkpoint& checkpoint, const model::ModelConfig& expected) {
  if (checkpoint.config.digest() != expected.digest()) {
    throw IncompatibleCheckpointError(fmt::format(
        "checkpoint config digest {} (updater={}, edge={}) is incompatible with the requested "
        "config digest {} (updater={}, edge={})",
        checkpoint.config.digest(), model::to_string(checkpoint.config.updater),
        checkpoint.config.edge_enabled, expected.digest(), model::to_string(expected.updater),
        expected.edge_enabled));
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected) {
  Checkpoint c = load_checkpoint(path);
  require_compatible(c, expected);
  return c;
}

}  // namespace ctxproto::train
