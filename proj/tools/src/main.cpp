// fairmf command-line front end. Exit codes: 0 success, 1 invalid input,
// 2 numerical failure, 3 I/O failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "fairmf/antidote.hpp"
#include "fairmf/baselines.hpp"
#include "fairmf/data.hpp"
#include "fairmf/error.hpp"
#include "fairmf/factorization.hpp"
#include "fairmf/harness.hpp"
#include "fairmf/metrics.hpp"

namespace fs = std::filesystem;
using namespace fairmf;
using cli::Json;

namespace {

struct DataOptions {
  std::string ratings;
  std::string groups;
  std::string item_groups;
  std::string scale = "binary";
  std::string antidote;

  void attach(CLI::App* app, bool with_antidote) {
    app->add_option("--ratings", ratings, "ratings CSV (user_id,item_id,rating)")->required();
    app->add_option("--groups", groups, "group CSV (user_id,group with group D or A)")->required();
    app->add_option("--item-groups", item_groups, "optional item label CSV (item_id,label)");
    app->add_option("--scale", scale, "rating scale: binary or LO-HI")->capture_default_str();
    if (with_antidote) app->add_option("--antidote", antidote, "antidote CSV to append before use");
  }

  RatingDataset load() const {
    RatingDataset ds = load_groups(groups, load_ratings(ratings, cli::parse_scale(scale)));
    if (!item_groups.empty()) ds = load_item_groups(item_groups, ds);
    if (!antidote.empty()) ds = inject_antidote(ds, read_antidote_csv(antidote, ds));
    return ds;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<MetricKind> parse_metrics(const std::vector<std::string>& names) {
  std::vector<MetricKind> out;
  for (const auto& n : names) out.push_back(parse_metric(n));
  return out;
}

// Flags shared by the experiment commands; each overrides the config file.
struct ExperimentOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string method;
  std::vector<std::string> metrics;
  std::vector<double> fractions;
  std::vector<Index> fillers;
  int trials = 0;
  int steps = -1;
  double lr = 0.0;
  bool no_deflect = false;
  CLI::Option* trials_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* lr_opt = nullptr;

  void attach(CLI::App* app, bool with_method) {
    app->add_option("--config", config, "JSON config file");
    app->add_option("--seed", seed, "base seed; trial t uses seed + t")->required();
    app->add_option("--out-dir", out_dir, "output directory")->required();
    if (with_method) {
      app->add_option("--method", method, "none, optimized, regularization, maximum, minimum, random, batch");
      app->add_option("--metric", metrics, "target metric; give two for multi-metric runs");
      app->add_flag("--no-deflect", no_deflect, "plain weighted sum for two-metric runs");
    }
    app->add_option("--fraction", fractions, "antidote fraction(s)");
    app->add_option("--fillers", fillers, "filler count(s)");
    trials_opt = app->add_option("--trials", trials, "number of seeds");
    steps_opt = app->add_option("--steps", steps, "PGD steps per antidote user");
    lr_opt = app->add_option("--lr", lr, "PGD step size");
  }

  ExperimentSpec spec() const {
    ExperimentSpec s = config.empty() ? cli::spec_from_json(Json::object()) : cli::spec_from_json(cli::load_config(config));
    s.seed = seed;
    if (!method.empty()) s.method = parse_method(method);
    if (!metrics.empty()) s.targets = parse_metrics(metrics);
    if (!fractions.empty()) s.fractions = fractions;
    if (!fillers.empty()) s.filler_counts = fillers;
    if (trials_opt->count() > 0) s.trials = trials;
    if (steps_opt->count() > 0) s.antidote.pgd_steps = steps;
    if (lr_opt->count() > 0) s.antidote.pgd_lr = lr;
    if (no_deflect) s.antidote.deflect = false;
    return s;
  }
};

void print_summary(const ExperimentReport& report) {
  for (const auto& a : report.aggregates) {
    std::printf("%s fraction=%g n=%lld trials=%d", std::string(to_string(a.method)).c_str(), a.fraction,
                static_cast<long long>(a.n_filler), a.trials);
    for (MetricKind k : report.eval_metrics) {
      std::printf(" %s=%.4f->%.4f", std::string(to_string(k)).c_str(), a.before_mean[metric_slot(k)],
                  a.after_mean[metric_slot(k)]);
    }
    std::printf(" rmse=%.4f->%.4f\n", a.rmse_before_mean, a.rmse_after_mean);
  }
}

void emit_report(const fs::path& dir, const std::string& stem, const ExperimentReport& report) {
  ensure_dir(dir);
  write_report_csv(dir / (stem + ".csv"), report);
  write_aggregate_csv(dir / (stem + "_aggregates.csv"), report);
  write_report_json(dir / (stem + ".json"), report);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Fairness-aware antidote data for matrix-factorization recommenders"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic block-model dataset");
  std::string synth_out;
  std::string synth_config;
  std::uint64_t synth_seed = 0;
  SyntheticConfig synth_cfg;
  bool female_advantaged = false;
  synth->add_option("--out-dir", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed")->required();
  synth->add_option("--config", synth_config, "JSON config with a 'synthetic' section");
  auto* upg = synth->add_option("--users-per-group", synth_cfg.users_per_group);
  auto* ipg = synth->add_option("--items-per-group", synth_cfg.items_per_group);
  auto* a1 = synth->add_option("--alpha1", synth_cfg.alpha1);
  auto* a2 = synth->add_option("--alpha2", synth_cfg.alpha2);
  auto* b1 = synth->add_option("--beta1", synth_cfg.beta1);
  auto* b2 = synth->add_option("--beta2", synth_cfg.beta2);
  synth->add_flag("--female-advantaged", female_advantaged, "label females advantaged instead of males");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit the factorization model");
  DataOptions train_data;
  train_data.attach(train_cmd, true);
  std::string train_out;
  std::string train_config;
  std::uint64_t train_seed = 0;
  TrainConfig train_cfg;
  train_cmd->add_option("--out", train_out, "model checkpoint path")->required();
  train_cmd->add_option("--seed", train_seed, "initialization seed")->required();
  train_cmd->add_option("--config", train_config, "JSON config with a 'train' section");
  auto* d_opt = train_cmd->add_option("--dim", train_cfg.d, "latent dimension");
  auto* l_opt = train_cmd->add_option("--lambda", train_cfg.lambda, "ridge weight");
  auto* s_opt = train_cmd->add_option("--max-sweeps", train_cfg.max_sweeps, "ALS sweep cap");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score a model on every unfairness metric");
  DataOptions eval_data;
  eval_data.attach(eval_cmd, true);
  std::string eval_model;
  std::string eval_out;
  std::vector<std::string> eval_metrics;
  bool all_items = false;
  eval_cmd->add_option("--model", eval_model, "model checkpoint")->required();
  eval_cmd->add_option("--metric", eval_metrics, "metric(s) to report; default all");
  eval_cmd->add_option("--out", eval_out, "write the JSON report here as well");
  eval_cmd->add_flag("--all-items", all_items, "average per-item metrics over every item");

  // antidote
  auto* anti_cmd = app.add_subcommand("antidote", "generate antidote users");
  DataOptions anti_data;
  anti_data.attach(anti_cmd, false);
  std::string anti_out;
  std::string anti_config;
  std::string anti_model;
  std::string anti_method = "optimized";
  std::uint64_t anti_seed = 0;
  std::vector<std::string> anti_metrics;
  double anti_fraction = 0.0;
  Index anti_fillers = 0;
  int anti_steps = 0;
  double anti_lr = 0.0;
  bool anti_no_deflect = false;
  anti_cmd->add_option("--out", anti_out, "antidote CSV; a .json sidecar is written next to it")->required();
  anti_cmd->add_option("--seed", anti_seed, "seed")->required();
  anti_cmd->add_option("--config", anti_config, "JSON config with 'train' and 'antidote' sections");
  anti_cmd->add_option("--model", anti_model, "model trained on the dataset; trained here when absent");
  anti_cmd->add_option("--method", anti_method, "optimized, maximum, minimum, random or batch")->capture_default_str();
  anti_cmd->add_option("--metric", anti_metrics, "target metric(s)");
  auto* af_opt = anti_cmd->add_option("--fraction", anti_fraction, "antidote users as a fraction of users");
  auto* an_opt = anti_cmd->add_option("--fillers", anti_fillers, "filler budget per antidote user");
  auto* as_opt = anti_cmd->add_option("--steps", anti_steps, "PGD steps per user");
  auto* al_opt = anti_cmd->add_option("--lr", anti_lr, "PGD step size");
  anti_cmd->add_flag("--no-deflect", anti_no_deflect, "plain weighted sum for two metrics");

  // run / transfer / sweep
  auto* run_cmd = app.add_subcommand("run", "full experiment: baseline, method, retrain, score");
  ExperimentOptions run_opts;
  run_opts.attach(run_cmd, true);
  auto* transfer_cmd = app.add_subcommand("transfer", "4x4 transferability matrix");
  ExperimentOptions transfer_opts;
  transfer_opts.attach(transfer_cmd, false);
  auto* sweep_cmd = app.add_subcommand("sweep", "filler-count sweep at a fixed fraction");
  ExperimentOptions sweep_opts;
  sweep_opts.attach(sweep_cmd, true);

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "export user latent vectors");
  DataOptions embed_data;
  embed_data.attach(embed_cmd, true);
  std::string embed_model;
  std::string embed_out;
  embed_cmd->add_option("--model", embed_model, "model checkpoint")->required();
  embed_cmd->add_option("--out", embed_out, "embedding CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (synth->parsed()) {
    SyntheticConfig cfg;
    if (!synth_config.empty()) {
      Json doc = cli::load_config(synth_config);
      if (doc.contains("synthetic")) cli::apply(doc["synthetic"], cfg);
    }
    if (upg->count()) cfg.users_per_group = synth_cfg.users_per_group;
    if (ipg->count()) cfg.items_per_group = synth_cfg.items_per_group;
    if (a1->count()) cfg.alpha1 = synth_cfg.alpha1;
    if (a2->count()) cfg.alpha2 = synth_cfg.alpha2;
    if (b1->count()) cfg.beta1 = synth_cfg.beta1;
    if (b2->count()) cfg.beta2 = synth_cfg.beta2;
    if (female_advantaged) cfg.male_advantaged = false;
    cfg.seed = synth_seed;
    RatingDataset ds = generate_synthetic(cfg);
    fs::path dir(synth_out);
    ensure_dir(dir);
    write_ratings(dir / "ratings.csv", ds);
    write_groups(dir / "groups.csv", ds);
    write_item_groups(dir / "item_groups.csv", ds);
    std::printf("users=%lld items=%lld ratings=%zu\n", static_cast<long long>(ds.num_users()),
                static_cast<long long>(ds.num_items()), ds.entries().size());
    return 0;
  }

  if (train_cmd->parsed()) {
    TrainConfig cfg;
    if (!train_config.empty()) {
      Json doc = cli::load_config(train_config);
      if (doc.contains("train")) cli::apply(doc["train"], cfg);
    }
    if (d_opt->count()) cfg.d = train_cfg.d;
    if (l_opt->count()) cfg.lambda = train_cfg.lambda;
    if (s_opt->count()) cfg.max_sweeps = train_cfg.max_sweeps;
    cfg.seed = train_seed;
    RatingDataset ds = train_data.load();
    TrainTrace trace;
    FactorModel model = train(ds, cfg, nullptr, &trace);
    save_model(train_out, model);
    std::vector<Rating> original = ds.original_entries();
    Json j{{"sweeps", trace.sweeps}, {"objective", trace.objective.back()}, {"rmse", rmse(model, original)}};
    std::printf("%s\n", j.dump().c_str());
    return 0;
  }

  if (eval_cmd->parsed()) {
    RatingDataset ds = eval_data.load();
    FactorModel model = load_model(eval_model);
    if (model.num_users() != ds.num_users() || model.Q.rows() != ds.num_items()) {
      throw ValidationError("model shape does not match the dataset");
    }
    const ItemNormalization norm = all_items ? ItemNormalization::AllItems : ItemNormalization::ValidItems;
    std::vector<MetricKind> kinds =
        eval_metrics.empty() ? std::vector<MetricKind>(kAllMetrics.begin(), kAllMetrics.end()) : parse_metrics(eval_metrics);
    GroupItemStats stats = group_item_stats(model, ds);
    nlohmann::ordered_json out;
    out["metrics"] = nlohmann::ordered_json::array();
    for (MetricKind k : kinds) out["metrics"].push_back(nlohmann::ordered_json::parse(to_json(evaluate(k, stats, norm))));
    std::vector<Rating> original = ds.original_entries();
    out["rmse"] = rmse(model, original);
    std::printf("%s\n", out.dump(2).c_str());
    if (!eval_out.empty()) {
      std::ofstream f(eval_out, std::ios::binary);
      if (!f) throw IoError("cannot write " + eval_out);
      f << out.dump(2) << '\n';
      if (!f) throw IoError("write failed: " + eval_out);
    }
    return 0;
  }

  if (anti_cmd->parsed()) {
    TrainConfig tc;
    AntidoteConfig ac;
    if (!anti_config.empty()) {
      Json doc = cli::load_config(anti_config);
      if (doc.contains("train")) cli::apply(doc["train"], tc);
      if (doc.contains("antidote")) cli::apply(doc["antidote"], ac);
    }
    tc.seed = anti_seed;
    ac.seed = anti_seed;
    if (!anti_metrics.empty()) ac.metrics = parse_metrics(anti_metrics);
    if (af_opt->count()) ac.alpha_frac = anti_fraction;
    if (an_opt->count()) ac.n_filler = anti_fillers;
    if (as_opt->count()) ac.pgd_steps = anti_steps;
    if (al_opt->count()) ac.pgd_lr = anti_lr;
    if (anti_no_deflect) ac.deflect = false;
    const Method method = parse_method(anti_method);

    RatingDataset ds = anti_data.load();
    std::vector<AntidoteUser> users;
    Json sidecar;
    sidecar["method"] = to_string(method);
    sidecar["train"] = cli::to_json(tc);
    sidecar["antidote"] = cli::to_json(ac);
    auto base = [&]() { return anti_model.empty() ? train(ds, tc) : load_model(anti_model); };
    switch (method) {
      case Method::Optimized: {
        FactorModel model = base();
        GenerateTrace trace;
        users = generate(ds, ac, tc, &model, &trace);
        sidecar["objective_traces"] = Json::array();
        for (const auto& t : trace.users) sidecar["objective_traces"].push_back(t.objective);
        break;
      }
      case Method::BatchOptimized: {
        FactorModel model = base();
        PgdTrace trace;
        users = batch_optimized_antidote(ds, model, ac, &trace);
        sidecar["objective_traces"] = Json::array({trace.objective});
        break;
      }
      case Method::Maximum: users = naive_antidote(BaselineKind::Maximum, ds, ac); break;
      case Method::Minimum: users = naive_antidote(BaselineKind::Minimum, ds, ac); break;
      case Method::Random: users = naive_antidote(BaselineKind::Random, ds, ac); break;
      default: throw ValidationError("antidote generation takes optimized, maximum, minimum, random or batch");
    }
    write_antidote_csv(anti_out, ds, users);
    fs::path side(anti_out);
    side.replace_extension(".json");
    sidecar["antidote_users"] = users.size();
    write_json(side, sidecar);
    std::printf("antidote_users=%zu\n", users.size());
    return 0;
  }

  if (run_cmd->parsed()) {
    ExperimentSpec spec = run_opts.spec();
    ExperimentReport report = run(spec);
    emit_report(run_opts.out_dir, "report", report);
    print_summary(report);
    return 0;
  }

  if (transfer_cmd->parsed()) {
    ExperimentSpec spec = transfer_opts.spec();
    TransferReport report = transferability(spec);
    fs::path dir(transfer_opts.out_dir);
    ensure_dir(dir);
    write_transfer_csv(dir / "transfer.csv", report);
    ExperimentReport merged;
    merged.eval_metrics.assign(kAllMetrics.begin(), kAllMetrics.end());
    for (const auto& r : report.runs) merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
    merged.aggregates = aggregate_rows(merged.rows);
    write_report_csv(dir / "transfer_rows.csv", merged);
    write_report_json(dir / "transfer.json", merged);
    for (std::size_t s = 0; s < kAllMetrics.size(); ++s) {
      std::printf("%-15s", std::string(to_string(kAllMetrics[s])).c_str());
      for (double v : report.scores[s]) std::printf(" %.4f", v);
      std::printf("\n");
    }
    return 0;
  }

  if (sweep_cmd->parsed()) {
    ExperimentSpec spec = sweep_opts.spec();
    if (spec.filler_counts.empty()) spec.filler_counts = {50, 100, 200, 400};
    ExperimentReport report = filler_sweep(spec);
    emit_report(sweep_opts.out_dir, "sweep", report);
    print_summary(report);
    return 0;
  }

  if (embed_cmd->parsed()) {
    RatingDataset ds = embed_data.load();
    FactorModel model = load_model(embed_model);
    export_embeddings(model, ds, embed_out);
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
