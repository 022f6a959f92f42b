// perfgat - synthetic perfusion cohorts, spatiotemporal graph training and
// evaluation from one flat config file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "perfgat/checkpoint.hpp"
#include "perfgat/cohort_io.hpp"
#include "perfgat/config.hpp"
#include "perfgat/container.hpp"
#include "perfgat/errors.hpp"
#include "perfgat/graphgen.hpp"
#include "perfgat/metrics.hpp"
#include "perfgat/synthdata.hpp"
#include "perfgat/trainer.hpp"

namespace {

using nlohmann::json;
using namespace perfgat;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string cohort_dir;
  std::string checkpoint_path;
  std::string split = "test";
  std::optional<std::uint64_t> seed_override;
};

io::RunConfig load_config(const Options& opt) {
  io::RunConfig cfg = io::RunConfig::load(opt.config_path);
  if (opt.seed_override) cfg.set_seed(*opt.seed_override);
  return cfg;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw DataError("cannot create output directory '" + dir + "'");
  }
}

json metrics_to_json(const train::MetricsReport& m, const std::string& split,
                     double threshold) {
  json j;
  j["split"] = split;
  j["threshold"] = threshold;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["tn"] = m.tn;
  j["fn"] = m.fn;
  j["acc"] = m.acc;
  j["balanced_acc"] = m.balanced_acc;
  j["spec"] = m.spec;
  j["sens"] = m.sens;
  j["f1"] = m.f1;
  if (m.auc) {
    j["auc"] = *m.auc;
  } else {
    j["auc"] = nullptr;
  }
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
}

void write_roc_csv(const std::filesystem::path& path, const train::MetricsReport& m) {
  std::string csv = "fpr,tpr\n";
  char line[64];
  for (const auto& [fpr, tpr] : m.roc_points) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g\n", fpr, tpr);
    csv += line;
  }
  write_text(path, csv);
}

// Training insists on stratification; evaluation falls back to a plain
// seeded split so degenerate cohorts can still be scored.
train::SplitIndices split_for_eval(const std::vector<int>& labels,
                                   const io::RunConfig& cfg) {
  try {
    return train::split_dataset(labels, cfg.train.split_ratios, cfg.seed);
  } catch (const DomainError&) {
    // Unstratified: shuffle indices and cut by the ratios.
    train::SplitIndices out;
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(cfg.seed, rng_stream::kSplit));
    rng.shuffle(order);
    const std::size_t n_train =
        static_cast<std::size_t>(cfg.train.split_ratios[0] * static_cast<double>(order.size()));
    const std::size_t n_val =
        static_cast<std::size_t>(cfg.train.split_ratios[1] * static_cast<double>(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i < n_train) {
        out.train.push_back(order[i]);
      } else if (i < n_train + n_val) {
        out.val.push_back(order[i]);
      } else {
        out.test.push_back(order[i]);
      }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
  }
}

std::vector<train::Subject> pick(const std::vector<train::Subject>& all,
                                 const std::vector<std::size_t>& idx) {
  std::vector<train::Subject> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

void require_cohort_matches_config(const io::LoadedCohort& cohort, const io::RunConfig& cfg) {
  if (cohort.n_regions != cfg.cohort.n_regions ||
      cohort.n_timepoints != cfg.cohort.n_timepoints ||
      cohort.patch_size != cfg.cohort.patch_size) {
    throw DataError("cohort dims (regions/timepoints/patch) do not match the config");
  }
}

int cmd_synth(const Options& opt) {
  const io::RunConfig cfg = load_config(opt);
  ensure_out_dir(opt.out_dir);
  const std::vector<synth::LabeledVolume> cohort = synth::generate_cohort(cfg.cohort);
  io::write_cohort(opt.out_dir, cohort, cfg);
  std::cout << "wrote " << cohort.size() << " subjects ("
            << synth::minority_count(cfg.cohort) << " minority) to " << opt.out_dir << "\n";
  return kExitOk;
}

int cmd_build_graph(const Options& opt) {
  const io::RunConfig cfg = load_config(opt);
  const io::LoadedCohort cohort = io::read_cohort(opt.cohort_dir);
  require_cohort_matches_config(cohort, cfg);
  ensure_out_dir(opt.out_dir);

  json manifest;
  manifest["kind"] = "graphs";
  manifest["schema_version"] = io::kSchemaVersion;
  manifest["tau"] = cfg.graph.tau;
  manifest["k"] = cfg.graph.k;
  json files = json::array();

  for (std::size_t i = 0; i < cohort.volumes.size(); ++i) {
    const graph::SpatioTemporalGraph g =
        graph::build_graphs(cohort.volumes[i], cfg.graph.tau, cfg.graph.k,
                            cfg.graph.use_abs_correlation);
    io::ArtifactContainer c;
    c.add_matrix("x", g.x);
    const std::size_t n = g.a_temporal.size();
    num::Matrix at(n, n), as(n, n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t s = 0; s < n; ++s) {
        at(r, s) = g.a_temporal.at(r, s) ? 1.0 : 0.0;
        as(r, s) = g.a_spatial.at(r, s) ? 1.0 : 0.0;
      }
    }
    c.add_matrix("a_temporal", at);
    c.add_matrix("a_spatial", as);
    std::vector<double> cents;
    for (const Point3& p : g.centroids) {
      cents.push_back(p.x);
      cents.push_back(p.y);
      cents.push_back(p.z);
    }
    c.add("centroids", {g.centroids.size(), 3}, std::move(cents));
    json meta;
    meta["kind"] = "graphs";
    meta["subject_index"] = i;
    meta["label"] = cohort.labels[i];
    c.set_meta_json(meta.dump());

    char name[32];
    std::snprintf(name, sizeof(name), "graphs_%05zu.pgc", i);
    c.write_file(std::filesystem::path(opt.out_dir) / name);
    files.push_back(name);
  }
  manifest["files"] = std::move(files);
  write_text(std::filesystem::path(opt.out_dir) / "graphs.json", manifest.dump(2) + "\n");
  std::cout << "wrote graphs for " << cohort.volumes.size() << " subjects to " << opt.out_dir
            << "\n";
  return kExitOk;
}

int cmd_train(const Options& opt) {
  const io::RunConfig cfg = load_config(opt);
  const io::LoadedCohort cohort = io::read_cohort(opt.cohort_dir);
  require_cohort_matches_config(cohort, cfg);
  ensure_out_dir(opt.out_dir);

  const std::vector<train::Subject> subjects = train::prepare_subjects(
      cohort.volumes, cfg.graph.tau, cfg.graph.k, cfg.graph.use_abs_correlation);
  const train::SplitIndices split =
      train::split_dataset(cohort.labels, cfg.train.split_ratios, cfg.seed);

  const model::ModelParams init = model::init_params(cfg.model_config(), cfg.seed);
  const train::TrainResult result =
      train::train(init, pick(subjects, split.train), pick(subjects, split.val), cfg.train);

  std::string log;
  for (const train::EpochRecord& r : result.history) {
    json line;
    line["epoch"] = r.epoch;
    line["train_loss"] = r.train_loss;
    line["val_loss"] = r.val_loss;
    line["best_val_loss"] = r.best_val_loss;
    line["epochs_since_best"] = r.epochs_since_best;
    log += line.dump() + "\n";
  }
  write_text(std::filesystem::path(opt.out_dir) / "train_log.jsonl", log);

  io::write_checkpoint(std::filesystem::path(opt.out_dir) / "checkpoint.pgc", result.params,
                       &result.state, cfg);

  const train::MetricsReport val_metrics = train::evaluate(
      result.params, pick(subjects, split.val), cfg.train.decision_threshold);
  const json vj = metrics_to_json(val_metrics, "val", cfg.train.decision_threshold);
  write_text(std::filesystem::path(opt.out_dir) / "val_metrics.json", vj.dump(2) + "\n");
  std::cout << vj.dump() << "\n";
  return kExitOk;
}

int cmd_retrain(const Options& opt) {
  io::LoadedCheckpoint ckpt = io::read_checkpoint(opt.checkpoint_path);
  io::RunConfig cfg = opt.config_path.empty() ? ckpt.config : load_config(opt);
  if (opt.seed_override) cfg.set_seed(*opt.seed_override);
  const io::LoadedCohort cohort = io::read_cohort(opt.cohort_dir);
  require_cohort_matches_config(cohort, cfg);
  io::check_compatible(ckpt, cohort.n_timepoints, cohort.patch_size);
  ensure_out_dir(opt.out_dir);

  const std::vector<train::Subject> subjects = train::prepare_subjects(
      cohort.volumes, cfg.graph.tau, cfg.graph.k, cfg.graph.use_abs_correlation);
  const train::SplitIndices split =
      train::split_dataset(cohort.labels, cfg.train.split_ratios, cfg.seed);

  const train::RetrainResult result =
      train::retrain_classifier(ckpt.model, pick(subjects, split.train), cfg.train);

  std::string log;
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    json line;
    line["epoch"] = e + 1;
    line["retrain_loss"] = result.loss_history[e];
    log += line.dump() + "\n";
  }
  write_text(std::filesystem::path(opt.out_dir) / "retrain_log.jsonl", log);
  io::write_checkpoint(std::filesystem::path(opt.out_dir) / "checkpoint.pgc", result.params,
                       nullptr, cfg);

  const train::MetricsReport val_metrics = train::evaluate(
      result.params, pick(subjects, split.val), cfg.train.decision_threshold);
  const json vj = metrics_to_json(val_metrics, "val", cfg.train.decision_threshold);
  write_text(std::filesystem::path(opt.out_dir) / "val_metrics.json", vj.dump(2) + "\n");
  std::cout << vj.dump() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& opt, bool roc_only) {
  const io::LoadedCheckpoint ckpt = io::read_checkpoint(opt.checkpoint_path);
  const io::RunConfig& cfg = ckpt.config;
  const io::LoadedCohort cohort = io::read_cohort(opt.cohort_dir);
  io::check_compatible(ckpt, cohort.n_timepoints, cohort.patch_size);
  ensure_out_dir(opt.out_dir);

  const std::vector<train::Subject> subjects = train::prepare_subjects(
      cohort.volumes, cfg.graph.tau, cfg.graph.k, cfg.graph.use_abs_correlation);
  const train::SplitIndices split = split_for_eval(cohort.labels, cfg);
  const std::vector<train::Subject> chosen =
      pick(subjects, opt.split == "val" ? split.val : split.test);
  if (chosen.empty()) throw DataError("selected split is empty");

  const train::MetricsReport m =
      train::evaluate(ckpt.model, chosen, cfg.train.decision_threshold);
  write_roc_csv(std::filesystem::path(opt.out_dir) / "roc.csv", m);
  if (!roc_only) {
    const json j = metrics_to_json(m, opt.split, cfg.train.decision_threshold);
    write_text(std::filesystem::path(opt.out_dir) / "metrics.json", j.dump(2) + "\n");
    std::cout << j.dump() << "\n";
  } else if (m.auc) {
    std::cout << "auc " << *m.auc << "\n";
  } else {
    std::cout << "auc undefined\n";
  }
  return kExitOk;
}

int dispatch(const std::string& cmd, const Options& opt) {
  try {
    if (cmd == "synth") return cmd_synth(opt);
    if (cmd == "build-graph") return cmd_build_graph(opt);
    if (cmd == "train") return cmd_train(opt);
    if (cmd == "retrain") return cmd_retrain(opt);
    if (cmd == "eval") return cmd_eval(opt, false);
    if (cmd == "roc") return cmd_eval(opt, true);
    std::cerr << "unknown subcommand " << cmd << "\n";
    return kExitFailure;
  } catch (const ConfigError& e) {
    json err{{"error", "config"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    json err{{"error", "numeric"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    json err{{"error", "data"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    json err{{"error", "data"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return kExitData;
  } catch (const Error& e) {
    json err{{"error", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "perfgat: synthetic perfusion cohorts, spatiotemporal graph training, evaluation"};
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed_value = 0;

  const auto add_common = [&](CLI::App* sub, bool needs_config, bool needs_cohort,
                              bool needs_checkpoint, bool needs_split) {
    if (needs_config) {
      sub->add_option("--config", opt.config_path, "run config (JSON)")->required();
    } else {
      sub->add_option("--config", opt.config_path, "run config override (JSON)");
    }
    sub->add_option("--out", opt.out_dir, "output directory")->required();
    auto* seed_opt = sub->add_option("--seed", seed_value, "seed override");
    sub->callback([&, seed_opt]() {
      if (seed_opt->count() > 0) opt.seed_override = seed_value;
    });
    if (needs_cohort) {
      sub->add_option("--cohort", opt.cohort_dir, "cohort directory")->required();
    }
    if (needs_checkpoint) {
      sub->add_option("--checkpoint", opt.checkpoint_path, "checkpoint file")->required();
    }
    if (needs_split) {
      sub->add_option("--split", opt.split, "val or test")
          ->check(CLI::IsMember({"val", "test"}));
    }
  };

  add_common(app.add_subcommand("synth", "generate a synthetic cohort"), true, false, false,
             false);
  add_common(app.add_subcommand("build-graph", "export spatiotemporal graphs"), true, true,
             false, false);
  add_common(app.add_subcommand("train", "train on a cohort"), true, true, false, false);
  add_common(app.add_subcommand("retrain", "class-balanced classifier retraining"), false,
             true, true, false);
  add_common(app.add_subcommand("eval", "evaluate a checkpoint on a split"), false, true,
             true, true);
  add_common(app.add_subcommand("roc", "write ROC points for a split"), false, true, true,
             true);

  CLI11_PARSE(app, argc, argv);
  return dispatch(app.get_subcommands().front()->get_name(), opt);
}
