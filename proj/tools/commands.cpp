#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "dice/evaluator.hpp"

namespace dice::cli {

namespace fs = std::filesystem;

KeyValueConfig resolve_config(const CommonOptions& opts) {
  KeyValueConfig cfg = KeyValueConfig::with_defaults();
  if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    }
    cfg.set_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string resolve_output_dir(const std::string& dir) {
  const char* root = std::getenv("DICE_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && fs::path(dir).is_relative()) {
    return (fs::path(root) / dir).string();
  }
  return dir;
}

namespace {

RunManifest base_manifest(const std::string& command, const KeyValueConfig& cfg) {
  RunManifest m;
  m.command = command;
  m.tool_version = kToolVersion;
  m.timestamp_utc = iso8601_utc_now();
  m.resolved_config = cfg.values();
  m.notes["entropy_log_base"] = "e";
  m.notes["batch_reduction"] = "sum";
  m.notes["margin_unit"] = "absolute popularity counts";
  return m;
}

bool trainable_model(const std::string& model) {
  static const std::vector<std::string> names = {"dice",   "mf",      "ips",
                                                 "ips-c",  "ips-cn",  "ips-cnsr",
                                                 "bias-u", "bias-i",  "bias-ui",
                                                 "cause"};
  return std::find(names.begin(), names.end(), model) != names.end();
}

void check_dims(const std::string& what, std::uint64_t got_users,
                std::uint64_t got_items, const SplitBundle& split) {
  if (got_users != split.n_users || got_items != split.n_items) {
    throw std::runtime_error(what + " shape (" + std::to_string(got_users) + " users, " +
                             std::to_string(got_items) + " items) does not match bundle (" +
                             std::to_string(split.n_users) + " users, " +
                             std::to_string(split.n_items) + " items)");
  }
}

std::vector<std::int64_t> bundle_training_popularity(const SplitBundle& split) {
  std::vector<std::int64_t> pop(split.n_items, 0);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    pop[i] = split.train_normal.popularity[i] + split.train_intervened.popularity[i];
  }
  return pop;
}

}  // namespace

void run_prepare(const CommonOptions& opts, const std::string& ratings_path,
                 const std::string& out_dir) {
  const KeyValueConfig cfg = resolve_config(opts);
  std::string ratings = ratings_path;
  if (ratings.empty()) {
    if (!cfg.values().count("dataset.ratings")) {
      throw ConfigError("no ratings file given (flag --ratings or dataset.ratings)");
    }
    ratings = cfg.get("dataset.ratings");
  }
  const std::string out = resolve_output_dir(out_dir);
  fs::create_directories(out);

  const std::vector<RawRating> raw = parse_ratings_file(ratings, cfg.parse_format());
  const InteractionTable table = build_table(binarize(raw, cfg.rating_threshold()));
  if (table.records.empty()) {
    throw std::runtime_error("no interactions survive binarization of " + ratings);
  }
  const SplitBundle bundle = draw_split(table, cfg.split_config());
  save_bundle(bundle, table, out);

  RunManifest m = base_manifest("prepare", cfg);
  m.inputs["ratings"] = ratings;
  m.inputs["ratings_digest"] = file_digest(ratings);
  m.outputs["bundle"] = out;
  m.notes["n_users"] = std::to_string(table.n_users);
  m.notes["n_items"] = std::to_string(table.n_items);
  m.notes["n_records"] = std::to_string(table.records.size());
  write_manifest(m, (fs::path(out) / "manifest.json").string());

  std::printf("prepared %zu records (%u users, %u items) into %s\n",
              table.records.size(), table.n_users, table.n_items, out.c_str());
  std::printf("entropy: train_normal=%.4f train_intervened=%.4f validation=%.4f test=%.4f\n",
              bundle.entropy.train_normal, bundle.entropy.train_intervened,
              bundle.entropy.validation, bundle.entropy.test);
}

void run_train(const CommonOptions& opts, const std::string& model,
               const std::string& bundle_dir, const std::string& out_dir) {
  if (model == "itempop") {
    throw ConfigError("itempop has no parameters to train; evaluate it directly");
  }
  if (!trainable_model(model)) {
    throw ConfigError("unknown model name '" + model + "'");
  }
  const KeyValueConfig cfg = resolve_config(opts);
  const SplitBundle bundle = load_bundle(bundle_dir);
  const std::string out = resolve_output_dir(out_dir);
  fs::create_directories(out);
  const TrainConfig tcfg = cfg.train_config();

  const std::string ckpt_path = (fs::path(out) / (model + ".ckpt")).string();
  const std::string log_path = (fs::path(out) / (model + ".log.jsonl")).string();
  RunManifest m = base_manifest("train", cfg);
  m.inputs["bundle"] = bundle_dir;
  m.outputs["checkpoint"] = ckpt_path;
  m.outputs["training_log"] = log_path;

  if (model == "dice") {
    const TrainResult result = fit(bundle, tcfg);
    save_checkpoint(to_checkpoint(result.embeddings), ckpt_path);
    write_training_log(result.log, log_path);
    m.notes["resolved_m_up0"] = std::to_string(result.resolved_m_up0);
    m.notes["resolved_m_down0"] = std::to_string(result.resolved_m_down0);
    m.notes["best_epoch"] = std::to_string(result.best_epoch);
    if (result.aborted) m.notes["aborted"] = "non-finite loss";
    std::printf("trained dice: %zu epochs, best epoch %lld\n", result.log.size(),
                static_cast<long long>(result.best_epoch));
  } else {
    const BaselineModel bm =
        train_baseline(parse_baseline_kind(model), bundle, tcfg, cfg.baseline_config());
    save_checkpoint(to_checkpoint(bm), ckpt_path);
    // Baselines log only the fact of completion; the DICE log carries the
    // per-epoch loss components.
    std::ofstream log(log_path);
    nlohmann::json j;
    j["model"] = model;
    j["epochs"] = tcfg.epochs;
    log << j.dump() << '\n';
    std::printf("trained %s\n", model.c_str());
  }
  write_manifest(m, (fs::path(out) / (model + ".manifest.json")).string());
}

void run_evaluate(const CommonOptions& opts, const std::string& model,
                  const std::string& checkpoint_path, const std::string& bundle_dir,
                  const std::string& out_dir, const std::vector<std::string>& variants,
                  bool per_user) {
  const KeyValueConfig cfg = resolve_config(opts);
  const SplitBundle bundle = load_bundle(bundle_dir);
  const std::string out = resolve_output_dir(out_dir);
  fs::create_directories(out);

  EvalOptions eopts;
  eopts.ks = cfg.eval_ks();
  eopts.exclude_validation = cfg.exclude_validation();
  const std::vector<int> iou_ks = cfg.iou_ks();

  struct Variant {
    std::string name;
    ItemScorer scorer;
  };
  std::vector<Variant> to_run;

  // Keep whichever parameter object backs the scorers alive for the whole run.
  CausalEmbeddings emb;
  BaselineModel baseline;

  std::string model_name = model;
  if (model == "itempop") {
    baseline.kind = BaselineKind::itempop;
    baseline.n_items = bundle.n_items;
    const auto pop = bundle_training_popularity(bundle);
    baseline.popularity.assign(pop.begin(), pop.end());
    if (!variants.empty() && !(variants.size() == 1 && variants[0] == "full")) {
      throw ConfigError("itempop supports only the 'full' variant");
    }
    to_run.push_back({"full", make_baseline_scorer(baseline)});
  } else {
    if (checkpoint_path.empty()) {
      throw ConfigError("evaluate needs --checkpoint (or --model itempop)");
    }
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (!model.empty() && model != ckpt.kind) {
      throw ConfigError("checkpoint holds model '" + ckpt.kind + "', not '" + model +
                        "'");
    }
    model_name = ckpt.kind;
    if (ckpt.kind == "dice") {
      emb = embeddings_from_checkpoint(ckpt);
      check_dims("checkpoint", emb.n_users, emb.n_items, bundle);
      std::vector<std::string> wanted = variants;
      if (wanted.empty()) wanted = {"full"};
      for (const std::string& v : wanted) {
        const ScoreVariant sv = parse_score_variant(v);
        to_run.push_back({to_string(sv), make_embedding_scorer(emb, sv)});
      }
    } else {
      baseline = baseline_from_checkpoint(ckpt);
      check_dims("checkpoint", baseline.n_users, baseline.n_items, bundle);
      if (!variants.empty() && !(variants.size() == 1 && variants[0] == "full")) {
        throw ConfigError("model '" + ckpt.kind +
                          "' has no interest/conformity variants; use 'full'");
      }
      to_run.push_back({"full", make_baseline_scorer(baseline)});
    }
  }

  RunManifest m = base_manifest("evaluate", cfg);
  m.inputs["bundle"] = bundle_dir;
  if (!checkpoint_path.empty()) m.inputs["checkpoint"] = checkpoint_path;

  for (const Variant& v : to_run) {
    std::vector<PerUserMetric> per_user_rows;
    MetricsReport report =
        evaluate_scorer(v.scorer, bundle, eopts, per_user ? &per_user_rows : nullptr);
    report.model = model_name;
    report.variant = v.name;
    const std::string stem = "report_" + model_name + "_" + v.name;
    const std::string json_path = (fs::path(out) / (stem + ".json")).string();
    const std::string csv_path = (fs::path(out) / (stem + ".csv")).string();
    const std::string iou_path =
        (fs::path(out) / ("iou_" + model_name + "_" + v.name + ".csv")).string();
    write_report_json(report, json_path);
    write_report_csv(report, csv_path);
    if (per_user) {
      const std::string pu_path =
          (fs::path(out) / ("per_user_" + model_name + "_" + v.name + ".csv")).string();
      write_per_user_csv(model_name, v.name, per_user_rows, pu_path);
      m.outputs["per_user_" + v.name] = pu_path;
    }
    const std::vector<IouPoint> curve = iou_with_itempop(v.scorer, bundle, iou_ks);
    write_iou_csv(model_name, v.name, curve, iou_path);
    m.outputs["report_" + v.name] = json_path;
    m.outputs["iou_" + v.name] = iou_path;
    std::printf("%s[%s]:", model_name.c_str(), v.name.c_str());
    for (const int k : eopts.ks) {
      std::printf(" recall@%d=%.4f ndcg@%d=%.4f", k, report.recall.at(k), k,
                  report.ndcg.at(k));
    }
    std::printf(" (users=%u)\n", report.evaluated_users);
  }
  write_manifest(m, (fs::path(out) / ("evaluate_" + model_name + ".manifest.json")).string());
}

void run_compare(const std::vector<std::string>& report_paths,
                 const std::string& reference_model, const std::string& out_dir) {
  if (report_paths.size() < 2) {
    throw ConfigError("compare needs at least two reports");
  }
  std::vector<MetricsReport> reports;
  for (const std::string& p : report_paths) reports.push_back(read_report_json(p));
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].ks != reports[0].ks) {
      throw ConfigError("reports disagree on Ks: " + report_paths[0] + " vs " +
                        report_paths[i]);
    }
  }
  std::string reference = reference_model;
  if (reference.empty()) reference = reports[0].model;
  const auto ref_it =
      std::find_if(reports.begin(), reports.end(), [&](const MetricsReport& r) {
        return r.model == reference;
      });
  if (ref_it == reports.end()) {
    throw ConfigError("reference model '" + reference + "' not among the reports");
  }

  struct Col {
    std::string name;
    const std::map<int, double> MetricsReport::* field;
    int k;
  };
  std::vector<Col> cols;
  for (const int k : reports[0].ks) {
    cols.push_back({"recall@" + std::to_string(k), &MetricsReport::recall, k});
    cols.push_back({"hit_ratio@" + std::to_string(k), &MetricsReport::hit_ratio, k});
    cols.push_back({"ndcg@" + std::to_string(k), &MetricsReport::ndcg, k});
  }

  const std::string out = resolve_output_dir(out_dir);
  fs::create_directories(out);
  const std::string csv_path = (fs::path(out) / "compare.csv").string();
  const std::string md_path = (fs::path(out) / "compare.md").string();

  const auto value_of = [&](const MetricsReport& r, const Col& c) {
    return (r.*(c.field)).at(c.k);
  };
  const auto best_row = [&](const Col& c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
      if (value_of(reports[i], c) > value_of(reports[best], c)) best = i;
    }
    return best;
  };
  const auto label = [](const MetricsReport& r) {
    return r.variant.empty() || r.variant == "full" ? r.model
                                                    : r.model + "[" + r.variant + "]";
  };

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "model";
  for (const Col& c : cols) csv << ',' << c.name;
  for (const Col& c : cols) csv << ",delta_" << c.name << "_vs_" << reference;
  csv << '\n';
  char buf[64];
  for (const MetricsReport& r : reports) {
    csv << label(r);
    for (const Col& c : cols) {
      std::snprintf(buf, sizeof(buf), "%.6f", value_of(r, c));
      csv << ',' << buf;
    }
    for (const Col& c : cols) {
      const double ref = value_of(*ref_it, c);
      const double delta = ref == 0.0 ? 0.0 : (value_of(r, c) - ref) / ref;
      std::snprintf(buf, sizeof(buf), "%+.4f", delta);
      csv << ',' << buf;
    }
    csv << '\n';
  }
  csv << "best";
  for (const Col& c : cols) csv << ',' << label(reports[best_row(c)]);
  for (const Col& c : cols) {
    (void)c;
    csv << ',';
  }
  csv << '\n';

  std::ofstream md(md_path);
  if (!md) throw std::runtime_error("cannot write " + md_path);
  md << "| model |";
  for (const Col& c : cols) md << ' ' << c.name << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
  md << '\n';
  for (std::size_t r = 0; r < reports.size(); ++r) {
    md << "| " << label(reports[r]) << " |";
    for (const Col& c : cols) {
      const bool best = best_row(c) == r;
      std::snprintf(buf, sizeof(buf), "%.4f", value_of(reports[r], c));
      md << ' ' << (best ? "**" : "") << buf << (best ? "**" : "") << " |";
    }
    md << '\n';
  }
  std::printf("compare: wrote %s and %s (reference: %s)\n", csv_path.c_str(),
              md_path.c_str(), reference.c_str());
}

void run_export_embeddings(const std::string& checkpoint_path,
                           const std::string& bundle_dir, const std::string& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.kind != "dice") {
    throw ConfigError("export-embeddings needs a dice checkpoint; got '" + ckpt.kind +
                      "'");
  }
  const CausalEmbeddings emb = embeddings_from_checkpoint(ckpt);
  const SplitBundle bundle = load_bundle(bundle_dir);
  const InteractionTable table = load_bundle_table(bundle_dir);
  check_dims("checkpoint", emb.n_users, emb.n_items, bundle);
  const std::string out = resolve_output_dir(out_dir);
  export_embeddings(emb, table, bundle_training_popularity(bundle), out);

  KeyValueConfig cfg = KeyValueConfig::with_defaults();
  RunManifest m = base_manifest("export-embeddings", cfg);
  m.inputs["checkpoint"] = checkpoint_path;
  m.inputs["bundle"] = bundle_dir;
  m.outputs["embeddings"] = (fs::path(out) / "embeddings.csv").string();
  m.outputs["items_meta"] = (fs::path(out) / "items_meta.csv").string();
  write_manifest(m, (fs::path(out) / "export.manifest.json").string());
  std::printf("exported embeddings to %s\n", out.c_str());
}

}  // namespace dice::cli
