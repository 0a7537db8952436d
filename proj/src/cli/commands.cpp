#include "ctxproto/cli/commands.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ctxproto/cli/run_config.hpp"
#include "ctxproto/data/generator.hpp"
#include "ctxproto/data/scene_io.hpp"
#include "ctxproto/data/word_vectors.hpp"
#include "ctxproto/error.hpp"
#include "ctxproto/eval/evaluate.hpp"
#include "ctxproto/eval/heatmap.hpp"
#include "ctxproto/eval/report.hpp"
#include "ctxproto/train/checkpoint.hpp"
#include "ctxproto/train/gradient_suite.hpp"
#include "ctxproto/train/trainer.hpp"

namespace ctxproto::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

inline constexpr const char* kAblationFormatTag = "ctxproto-ablation/1";

// Flags every run-config command shares.
struct Common {
  std::string config;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "run config file (JSON)");
    cmd->add_option("--set", overrides, "override a config key, e.g. --set train.lr=0.01")
        ->take_all();
  }
  RunConfig load() const { return load_run_config(config, overrides); }
};

std::string pick(const std::string& flag, const std::string& from_config, const char* name) {
  const std::string& v = flag.empty() ? from_config : flag;
  if (v.empty()) throw ConfigError(fmt::format("{} is required", name));
  return v;
}

std::string dataset_summary(const data::Dataset& dataset) {
  std::size_t candidates = 0, labeled = 0;
  std::array<std::size_t, eval::kNumDensityBins> bins{};
  for (const auto& s : dataset.scenes) {
    candidates += s.candidates.size();
    labeled += s.gt_count;
    ++bins[static_cast<std::size_t>(eval::density_bin(s.gt_count))];
  }
  std::string out = fmt::format("scenes      {}\ncandidates  {}\nlabeled     {}\n\n", dataset.scenes.size(),
                                candidates, labeled);
  out += fmt::format("{:<16} {:>8}\n", "predicate", "count");
  const auto hist = data::label_histogram(dataset);
  for (std::size_t r = 0; r < hist.size(); ++r) {
    out += fmt::format("{:<16} {:>8}\n", dataset.header.predicate_names[r], hist[r]);
  }
  out += fmt::format("\n{:<16} {:>8}\n", "density bin", "scenes");
  for (std::size_t b = 0; b < bins.size(); ++b) {
    out += fmt::format("{:<16} {:>8}\n", eval::to_string(static_cast<eval::DensityBin>(b)), bins[b]);
  }
  return out;
}

void require_matches(const data::DatasetHeader& header, const model::ModelConfig& config,
                     const std::string& source) {
  if (header.num_predicates != config.num_predicates ||
      header.num_categories != config.num_categories || header.visual_dim != config.visual_dim) {
    throw DataError(fmt::format(
        "{}: dataset (R={}, C={}, d_vis={}) does not match the model (R={}, C={}, d_vis={})", source,
        header.num_predicates, header.num_categories, header.visual_dim, config.num_predicates,
        config.num_categories, config.visual_dim));
  }
}

train::WordInit load_words(const RunConfig& config, const data::DatasetHeader& header) {
  train::WordInit words;
  const std::size_t dim = config.train.model.word_dim;
  if (!config.words.predicate_vectors.empty()) {
    const auto table = data::load_word_vectors(config.words.predicate_vectors, dim);
    words.predicate_words =
        data::lookup_words(table, header.predicate_names, dim, config.words.fallback_seed);
  }
  if (!config.words.category_vectors.empty()) {
    const auto table = data::load_word_vectors(config.words.category_vectors, dim);
    words.category_words =
        data::lookup_words(table, header.category_names, dim, config.words.fallback_seed);
  }
  return words;
}

std::string trace_csv(const std::vector<train::TraceEntry>& trace) {
  std::string out = "iteration,cls,reg_sim,reg_div,align,total\n";
  for (const auto& t : trace) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", t.iteration, t.loss.cls,
                       t.loss.reg_sim, t.loss.reg_div, t.loss.align, t.loss.total);
  }
  return out;
}

train::Checkpoint train_model(const RunConfig& config, const data::Dataset& dataset,
                              const train::CheckpointCallback& on_checkpoint = {}) {
  train::TrainConfig tc = config.train;
  data::apply_header(tc.model, dataset.header);
  tc.validate();
  return train::train(dataset, tc, load_words(config, dataset.header), on_checkpoint);
}

struct Evaluation {
  eval::ModelRun run;
  eval::MetricsReport report;
};

Evaluation evaluate(const train::Checkpoint& checkpoint, const data::Dataset& dataset,
                    const EvalOptions& options) {
  Evaluation e;
  e.run = eval::run_model(dataset, checkpoint.params, checkpoint.config);
  e.report = eval::build_report(e.run.scenes, options.recall_ks, checkpoint.config.num_predicates);
  e.report.ambiguous_accuracy = eval::ambiguous_accuracy(e.run);
  e.report.drift = e.run.mean_drift;
  return e;
}

// ---- commands ----------------------------------------------------------------

struct GenDataArgs {
  Common common;
  std::string spec, out;
  std::optional<std::size_t> scenes;
  std::optional<std::uint64_t> seed;
  bool json_summary = false;
};

int gen_data(GenDataArgs& a, std::ostream& out) {
  if (!a.spec.empty() && a.common.config.empty()) a.common.config = a.spec;
  RunConfig config = a.common.load();
  if (a.scenes) config.scenes = *a.scenes;
  if (a.seed) config.generator.seed = *a.seed;
  config.validate();
  const std::string path = pick(a.out, config.paths.out, "--out");

  const data::Dataset dataset = data::generate_dataset(config.generator, config.scenes);
  std::ostringstream text;
  data::write_scenes(text, dataset);
  OutputSet outputs;
  outputs.add(path, text.str());
  outputs.commit();

  if (a.json_summary) {
    ordered_json j;
    j["scenes"] = dataset.scenes.size();
    std::size_t candidates = 0;
    std::array<std::size_t, eval::kNumDensityBins> bins{};
    for (const auto& s : dataset.scenes) {
      candidates += s.candidates.size();
      ++bins[static_cast<std::size_t>(eval::density_bin(s.gt_count))];
    }
    j["candidates"] = candidates;
    j["label_histogram"] = data::label_histogram(dataset);
    j["density_bins"] = bins;
    out << j.dump() << "\n";
  } else {
    out << "wrote " << path << "\n" << dataset_summary(dataset);
  }
  return kExitOk;
}

struct TrainArgs {
  Common common;
  std::string data, out, trace;
};

int train_command(TrainArgs& a, std::ostream& out) {
  const RunConfig config = a.common.load();
  const std::string data_path = pick(a.data, config.paths.data, "--data");
  const std::string ckpt_path = pick(a.out, config.paths.out, "--out");
  const std::string trace_path =
      !a.trace.empty() ? a.trace : !config.paths.trace.empty() ? config.paths.trace : ckpt_path + ".trace.csv";

  const data::Dataset dataset = data::load_scenes(data_path);
  auto save_intermediate = [&](const train::Checkpoint& c) {
    if (c.iteration == config.train.iterations) return;
    OutputSet o;
    o.add(fmt::format("{}.iter{}", ckpt_path, c.iteration), train::checkpoint_to_string(c));
    o.commit();
  };
  train::Checkpoint result;
  try {
    result = train_model(config, dataset, save_intermediate);
  } catch (const train::TrainingAborted& e) {
    throw NumericError(fmt::format("training aborted after {} logged iterations: {}",
                                   e.trace().size(), e.what()));
  }
  OutputSet outputs;
  outputs.add(ckpt_path, train::checkpoint_to_string(result));
  outputs.add(trace_path, trace_csv(result.trace));
  outputs.commit();
  const auto& last = result.trace.empty() ? train::TraceEntry{} : result.trace.back();
  out << fmt::format("trained {} iterations; final loss {:.6f}\nwrote {}\nwrote {}\n", result.iteration,
                     last.loss.total, ckpt_path, trace_path);
  return kExitOk;
}

struct EvalArgs {
  Common common;
  std::string checkpoint, data, report, compare;
};

int eval_command(EvalArgs& a, std::ostream& out) {
  const RunConfig config = a.common.load();
  const std::string ckpt_path = pick(a.checkpoint, config.paths.checkpoint, "--checkpoint");
  const std::string data_path = pick(a.data, config.paths.data, "--data");
  const std::string compare_path = a.compare.empty() ? config.paths.compare : a.compare;
  const std::string report_path = a.report.empty() ? config.paths.report : a.report;

  const train::Checkpoint checkpoint = train::load_checkpoint(ckpt_path);
  std::optional<train::Checkpoint> baseline;
  if (!compare_path.empty()) baseline = train::load_checkpoint(compare_path);
  const data::Dataset dataset = data::load_scenes(data_path);
  require_matches(dataset.header, checkpoint.config, ckpt_path);
  if (baseline) require_matches(dataset.header, baseline->config, compare_path);

  Evaluation main = evaluate(checkpoint, dataset, config.eval);
  if (baseline) {
    const eval::ModelRun base_run = eval::run_model(dataset, baseline->params, baseline->config);
    std::vector<eval::ConfusionPair> pairs = config.eval.confusion_pairs;
    if (pairs.empty()) pairs = eval::top_confusions(base_run, config.eval.confusion_limit);
    const auto a_preds = eval::flatten_labeled(base_run);
    const auto b_preds = eval::flatten_labeled(main.run);
    main.report.confusion =
        eval::confusion_resolution(a_preds.predicted, b_preds.predicted, a_preds.labels, pairs);
  }
  const auto& names = dataset.header.predicate_names;
  if (!report_path.empty()) {
    OutputSet outputs;
    outputs.add(report_path, eval::report_to_string(main.report, names));
    outputs.commit();
  }
  out << eval::report_table(main.report, names);
  if (!report_path.empty()) out << "\nwrote " << report_path << "\n";
  return kExitOk;
}

struct AblateArgs {
  Common common;
  std::string data, eval_data, grid, out;
};

int ablate_command(AblateArgs& a, std::ostream& out) {
  const RunConfig config = a.common.load();
  const std::string data_path = pick(a.data, config.paths.data, "--data");
  const std::string eval_path =
      !a.eval_data.empty() ? a.eval_data : !config.paths.eval_data.empty() ? config.paths.eval_data : data_path;
  const std::string out_path = a.out.empty() ? config.paths.report : a.out;
  const AblationGrid grid =
      a.grid.empty() ? ablation_grid_from_json(nlohmann::json::object(), config)
                     : load_ablation_grid(a.grid, config);
  // Validate every grid point before training any of them.
  for (auto u : grid.updaters) {
    for (bool edge : grid.edge) {
      for (const auto& l : grid.lambdas) {
        RunConfig c = config;
        c.train.model.updater = u;
        c.train.model.edge_enabled = edge;
        c.train.loss.lambda_sim = l.lambda_sim;
        c.train.loss.lambda_div = l.lambda_div;
        c.train.loss.lambda_align = l.lambda_align;
        c.validate();
      }
    }
  }

  const data::Dataset train_set = data::load_scenes(data_path);
  const data::Dataset eval_set = eval_path == data_path ? train_set : data::load_scenes(eval_path);
  if (!(eval_set.header.num_predicates == train_set.header.num_predicates &&
        eval_set.header.num_categories == train_set.header.num_categories &&
        eval_set.header.visual_dim == train_set.header.visual_dim)) {
    throw DataError("evaluation data does not match the training data header");
  }

  ordered_json rows = ordered_json::array();
  std::string table = fmt::format("{:<6} {:<10} {:<14} {:>5}", "edge", "updater", "lambdas", "seed");
  for (std::size_t k : config.eval.recall_ks) {
    table += fmt::format(" {:>8} {:>8} {:>8}", fmt::format("R@{}", k), fmt::format("mR@{}", k),
                         fmt::format("F@{}", k));
  }
  table += fmt::format(" {:>10} {:>8}\n", "drift", "amb.acc");
  for (bool edge : grid.edge) {
    for (auto u : grid.updaters) {
      for (const auto& l : grid.lambdas) {
        for (auto seed : grid.seeds) {
          RunConfig c = config;
          c.train.model.updater = u;
          c.train.model.edge_enabled = edge;
          c.train.loss.lambda_sim = l.lambda_sim;
          c.train.loss.lambda_div = l.lambda_div;
          c.train.loss.lambda_align = l.lambda_align;
          c.train.seed = seed;
          train::Checkpoint ckpt;
          try {
            ckpt = train_model(c, train_set);
          } catch (const train::TrainingAborted& e) {
            throw NumericError(fmt::format("ablation run (edge={}, updater={}, lambdas={}, seed={}) "
                                           "aborted: {}",
                                           edge, model::to_string(u), l.name, seed, e.what()));
          }
          const Evaluation ev = evaluate(ckpt, eval_set, c.eval);
          ordered_json row;
          row["edge"] = edge;
          row["updater"] = std::string(model::to_string(u));
          row["lambdas"] = {{"name", l.name},
                            {"lambda_sim", l.lambda_sim},
                            {"lambda_div", l.lambda_div},
                            {"lambda_align", l.lambda_align}};
          row["seed"] = seed;
          ordered_json at_k = ordered_json::array();
          table += fmt::format("{:<6} {:<10} {:<14} {:>5}", edge ? "on" : "off", model::to_string(u),
                               l.name, seed);
          for (const auto& m : ev.report.at_k) {
            at_k.push_back({{"k", m.k}, {"r", m.recall}, {"mr", m.mean_recall}, {"f", m.f}});
            table += fmt::format(" {:>8.2f} {:>8.2f} {:>8.2f}", m.recall, m.mean_recall, m.f);
          }
          row["at_k"] = std::move(at_k);
          row["drift"] = ev.run.mean_drift;
          const auto amb = ev.report.ambiguous_accuracy;
          row["ambiguous_accuracy"] = amb ? ordered_json(*amb) : ordered_json(nullptr);
          table += fmt::format(" {:>10.6f} {:>8}\n", ev.run.mean_drift,
                               amb ? fmt::format("{:.2f}", *amb) : std::string("n/a"));
          rows.push_back(std::move(row));
        }
      }
    }
  }
  if (!out_path.empty()) {
    ordered_json doc;
    doc["format"] = kAblationFormatTag;
    doc["rows"] = std::move(rows);
    OutputSet outputs;
    outputs.add(out_path, doc.dump(2) + "\n");
    outputs.commit();
  }
  out << table;
  if (!out_path.empty()) out << "\nwrote " << out_path << "\n";
  return kExitOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string dims;
  std::size_t points = 20;
  std::string report;
  std::string inject_bug;
};

train::GradientSuiteDims parse_dims(const std::string& text) {
  train::GradientSuiteDims d;
  if (text.empty()) return d;
  std::vector<std::size_t> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(part, &used);
      if (used != part.size() || n <= 0) throw std::invalid_argument(part);
      v.push_back(static_cast<std::size_t>(n));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("--dims entry '{}' is not a positive integer", part));
    }
  }
  if (v.size() != 6) {
    throw ConfigError("--dims takes six values: predicates,categories,word,visual,model,candidates");
  }
  if (v[0] < 2 || v[1] < 1) throw ConfigError("--dims needs at least 2 predicates and 1 category");
  d.num_predicates = v[0];
  d.num_categories = v[1];
  d.word_dim = v[2];
  d.visual_dim = v[3];
  d.model_dim = v[4];
  d.candidates = v[5];
  return d;
}

int gradcheck_command(const GradcheckArgs& a, std::ostream& out) {
  train::GradientSuiteOptions options;
  options.seed = a.seed;
  options.points = a.points;
  options.dims = parse_dims(a.dims);
  options.inject_bug = a.inject_bug;
  const auto result = train::run_gradient_suite(options);

  std::size_t passed = 0;
  ordered_json cases = ordered_json::array();
  for (const auto& r : result.reports) {
    passed += r.pass ? 1 : 0;
    out << fmt::format("{:<28} max_rel {:.3e}  forward {:.1e}  params {:>4}  {}\n", r.op_name,
                       r.max_relative_error, r.forward_discrepancy, r.element_count,
                       r.pass ? "pass" : "FAIL");
    cases.push_back({{"name", r.op_name},
                     {"max_relative_error", r.max_relative_error},
                     {"forward_discrepancy", r.forward_discrepancy},
                     {"parameters", r.element_count},
                     {"pass", r.pass}});
  }
  out << fmt::format("gradcheck: {}/{} cases pass at {} points (tolerance {:g})\n", passed,
                     result.reports.size(), options.points, options.check.tolerance);
  if (!a.report.empty()) {
    ordered_json doc;
    doc["seed"] = a.seed;
    doc["points"] = options.points;
    doc["tolerance"] = options.check.tolerance;
    doc["pass"] = result.pass();
    doc["cases"] = std::move(cases);
    OutputSet outputs;
    outputs.add(a.report, doc.dump(2) + "\n");
    outputs.commit();
  }
  return result.pass() ? kExitOk : kExitNumeric;
}

struct HeatmapArgs {
  Common common;
  std::string checkpoint, scene_id, data, out;
};

int heatmap_command(HeatmapArgs& a, std::ostream& out) {
  const RunConfig config = a.common.load();
  const std::string ckpt_path = pick(a.checkpoint, config.paths.checkpoint, "--checkpoint");
  const std::string data_path = pick(a.data, config.paths.data, "--data");
  const std::string prefix = pick(a.out, config.paths.out, "--out");
  if (a.scene_id.empty()) throw ConfigError("--scene-id is required");

  const train::Checkpoint checkpoint = train::load_checkpoint(ckpt_path);
  const data::Dataset dataset = data::load_scenes(data_path);
  require_matches(dataset.header, checkpoint.config, ckpt_path);
  const data::Scene* scene = nullptr;
  for (const auto& s : dataset.scenes) {
    if (s.scene_id == a.scene_id) scene = &s;
  }
  if (!scene) throw DataError(fmt::format("scene '{}' not found in {}", a.scene_id, data_path));

  const auto batch = data::to_batch(*scene, checkpoint.config.visual_dim);
  const auto pass = model::forward_image(batch, checkpoint.params, checkpoint.config);
  const auto map = eval::similarity_heatmap(pass.static_prototypes, pass.adapted);
  const auto& names = dataset.header.predicate_names;
  const std::string delta_path = prefix + ".delta.csv";
  const std::string sim_path = prefix + ".similarity.csv";
  OutputSet outputs;
  outputs.add(delta_path, eval::grid_csv(map.delta, names));
  outputs.add(sim_path, eval::grid_csv(map.adapted, names));
  outputs.commit();
  out << "wrote " << delta_path << "\nwrote " << sim_path << "\n";
  return kExitOk;
}

void use_stderr_logger() {
  if (!spdlog::get("ctxproto")) spdlog::set_default_logger(spdlog::stderr_color_mt("ctxproto"));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  use_stderr_logger();
  CLI::App app{"Context-adaptive prototype feedback for predicate classification", "ctxproto"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every command");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic polysemy scene file");
  gen.common.attach(gen_cmd);
  gen_cmd->add_option("--spec", gen.spec, "generator spec (a run config; its generator section is used)");
  gen_cmd->add_option("--out", gen.out, "scene file to write");
  gen_cmd->add_option("--scenes", gen.scenes, "number of scenes");
  gen_cmd->add_option("--seed", gen.seed, "per-scene sampling seed");
  gen_cmd->add_flag("--json", gen.json_summary, "print the summary as JSON");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  tr.common.attach(train_cmd);
  train_cmd->add_option("--data", tr.data, "training scene file");
  train_cmd->add_option("--out", tr.out, "checkpoint to write");
  train_cmd->add_option("--trace", tr.trace, "loss trace CSV (default <out>.trace.csv)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  ev.common.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint to evaluate");
  eval_cmd->add_option("--data", ev.data, "evaluation scene file");
  eval_cmd->add_option("--report", ev.report, "metrics report to write (JSON)");
  eval_cmd->add_option("--compare", ev.compare,
                       "baseline checkpoint; adds the confusion-resolution table");

  AblateArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate a configuration grid");
  ab.common.attach(ablate_cmd);
  ablate_cmd->add_option("--data", ab.data, "training scene file");
  ablate_cmd->add_option("--eval-data", ab.eval_data, "evaluation scene file (default: --data)");
  ablate_cmd->add_option("--grid", ab.grid, "grid file (JSON)");
  ablate_cmd->add_option("--out", ab.out, "comparison table to write (JSON)");

  GradcheckArgs gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
  grad_cmd->add_option("--seed", gc.seed, "suite seed");
  grad_cmd->add_option("--dims", gc.dims,
                       "composite shapes: predicates,categories,word,visual,model,candidates");
  grad_cmd->add_option("--points", gc.points, "random points per case")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--report", gc.report, "per-case results to write (JSON)");
  grad_cmd->add_option("--inject-bug", gc.inject_bug)->group("");

  HeatmapArgs hm;
  auto* heat_cmd = app.add_subcommand("heatmap", "export prototype similarity grids for one scene");
  hm.common.attach(heat_cmd);
  heat_cmd->add_option("--checkpoint", hm.checkpoint, "checkpoint");
  heat_cmd->add_option("--scene-id", hm.scene_id, "scene to forward");
  heat_cmd->add_option("--data", hm.data, "scene file containing the scene");
  heat_cmd->add_option("--out", hm.out, "output prefix; writes <out>.delta.csv and <out>.similarity.csv");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return gen_data(gen, out);
    if (*train_cmd) return train_command(tr, out);
    if (*eval_cmd) return eval_command(ev, out);
    if (*ablate_cmd) return ablate_command(ab, out);
    if (*grad_cmd) return gradcheck_command(gc, out);
    if (*heat_cmd) return heatmap_command(hm, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace ctxproto::cli
