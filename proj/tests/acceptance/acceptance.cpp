// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fairmf/antidote.hpp"
#include "fairmf/harness.hpp"
#include "fairmf/influence.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace fairmf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << name << ": " << o.detail << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << std::fixed << v;
  return s.str();
}

std::string pct(double v) { return fmt(100.0 * v, 1) + "%"; }

// tolerances span many decades
std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

// Desk-scale defaults: 800 users, 600 items, d = 8, n = 200.
ExperimentSpec desk_spec(int seeds) {
  ExperimentSpec spec;
  spec.synthetic = SyntheticConfig{};
  spec.trials = seeds;
  spec.seed = 0;
  return spec;
}

// Mean over successful rows of one fraction.
struct Means {
  std::array<double, 4> before{};
  std::array<double, 4> after{};
  double rmse_before = 0.0;
  double rmse_after = 0.0;
  std::array<double, 4> reduction{};  // mean of per-seed relative reductions
  int rows = 0;
  int failed = 0;
};

Means means_at(const ExperimentReport& r, double fraction) {
  Means m;
  for (const auto& row : r.rows) {
    if (row.fraction != fraction) continue;
    if (!row.ok) {
      ++m.failed;
      continue;
    }
    ++m.rows;
    for (std::size_t k = 0; k < 4; ++k) {
      m.before[k] += row.before[k];
      m.after[k] += row.after[k];
      m.reduction[k] += row.before[k] > 0.0 ? (row.before[k] - row.after[k]) / row.before[k] : 0.0;
    }
    m.rmse_before += row.rmse_before;
    m.rmse_after += row.rmse_after;
  }
  if (m.rows > 0) {
    for (std::size_t k = 0; k < 4; ++k) {
      m.before[k] /= m.rows;
      m.after[k] /= m.rows;
      m.reduction[k] /= m.rows;
    }
    m.rmse_before /= m.rows;
    m.rmse_after /= m.rows;
  }
  return m;
}

double relative(double before, double after) { return before > 0.0 ? (before - after) / before : 0.0; }

// ---------------------------------------------------------------- properties

Outcome metric_oracle() {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  int checked = 0;
  while (checked < 100) {
    auto ds = oracle::random_dataset(rng, 30, 20, 0.35, checked % 2 ? RatingScale::binary() : RatingScale::range(1, 5));
    FactorModel m;
    m.P = oracle::gaussian(rng, 30, 3, 1.0);
    m.Q = oracle::gaussian(rng, 20, 3, 1.0);
    auto stats = group_item_stats(m, ds);
    if (stats.valid_items() == 0) continue;
    auto entries = oracle::entries_of(m, ds);
    for (MetricKind k : kAllMetrics) {
      worst = std::max(worst, std::abs(unfairness(k, stats) - oracle::metric(k, entries, 20)));
    }
    ++checked;
  }
  return {worst <= 1e-12, "100 instances, max |diff| " + sci(worst)};
}

Outcome gradient_oracle() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> rating(1.0, 5.0);
  double worst = 0.0;
  int accepted = 0;
  int redrawn = 0;
  for (MetricKind kind : kAllMetrics) {
    int got = 0;
    while (got < 50 && redrawn < 100000) {
      auto ds = oracle::random_dataset(rng, 20, 15, 0.4, RatingScale::range(1, 5));
      FactorModel m;
      m.P = oracle::gaussian(rng, 20, 3, 1.0);
      m.Q = oracle::gaussian(rng, 15, 3, 1.0);
      m.lambda = 0.1;
      std::vector<RelaxedAntidote> relaxed(1);
      relaxed[0].k = oracle::gaussian(rng, 3, 1, 1.0).col(0);
      relaxed[0].x.resize(15);
      for (Index i = 0; i < 15; ++i) relaxed[0].x[i] = rating(rng);
      std::vector<Index> items(15);
      std::iota(items.begin(), items.end(), Index{0});
      std::shuffle(items.begin(), items.end(), rng);
      items.resize(8);
      std::sort(items.begin(), items.end());
      relaxed[0].items = items;
      InfluenceContext ctx(ds, m);
      ctx.refresh(relaxed);
      auto at = ctx.relaxed_model();
      auto stats = group_item_stats(at, ds);
      if (stats.valid_items() == 0 ||
          oracle::kink_margin(kind, oracle::entries_of(at, ds), 15) <= 1e-3) {
        ++redrawn;
        continue;
      }
      Vector fd = oracle::fd_gradient(kind, ds, m, relaxed, 0, 1e-5);
      if (fd.lpNorm<Eigen::Infinity>() < 1e-6) {
        ++redrawn;
        continue;
      }
      Vector g = ctx.unfairness_gradient(kind, stats, 0);
      worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>() / fd.lpNorm<Eigen::Infinity>());
      ++got;
      ++accepted;
    }
  }
  return {accepted == 200 && worst <= 1e-5,
          std::to_string(accepted) + " instances across 4 metrics, max relative error " + sci(worst)};
}

Outcome deflection_algebra() {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst_dot = 0.0;
  double worst_sum = 0.0;
  int conflicts = 0;
  for (int t = 0; t < 10000; ++t) {
    const int n = 2 + t % 30;
    Vector g1(n), g2(n);
    for (int i = 0; i < n; ++i) g1[i] = normal(rng);
    for (int i = 0; i < n; ++i) g2[i] = normal(rng);
    if (t % 2) g2 -= 1.5 * g1;
    const double a = 0.5 + (t % 7) * 0.25;
    const double b = 2.0 - (t % 5) * 0.3;
    if (g1.dot(g2) < 0.0) {
      ++conflicts;
      Vector h1 = deflected_gradient(g1, g2, 1.0, 0.0);
      Vector h2 = deflected_gradient(g1, g2, 0.0, 1.0);
      worst_dot = std::max({worst_dot, std::abs(h1.dot(g2)), std::abs(h2.dot(g1))});
    } else {
      worst_sum = std::max(worst_sum, (deflected_gradient(g1, g2, a, b) - (a * g1 + b * g2)).lpNorm<Eigen::Infinity>());
    }
  }
  return {worst_dot <= 1e-10 && worst_sum == 0.0,
          "10000 pairs (" + std::to_string(conflicts) + " conflicting), max |<g_hat, g>| " +
              sci(worst_dot) + ", non-conflict deviation " + sci(worst_sum)};
}

Outcome als_properties() {
  std::mt19937_64 rng(14);
  double worst_rise = -1e300;
  double worst_res = 0.0;
  for (int t = 0; t < 20; ++t) {
    auto ds = oracle::random_dataset(rng, 15 + t, 10 + t / 2, 0.4, t % 2 ? RatingScale::binary() : RatingScale::range(1, 5));
    TrainConfig cfg;
    cfg.d = 1 + t % 5;
    cfg.tol = 1e-16;
    cfg.max_sweeps = 20000;
    cfg.seed = static_cast<std::uint64_t>(t);
    TrainTrace trace;
    auto model = train(ds, cfg, nullptr, &trace);
    for (std::size_t s = 1; s < trace.objective.size(); ++s) {
      worst_rise = std::max(worst_rise, trace.objective[s] - trace.objective[s - 1]);
    }
    auto res = stationarity_residual(ds, model);
    worst_res = std::max({worst_res, res.max_user, res.max_item});
  }
  return {worst_rise <= 1e-10 && worst_res <= 1e-4,
          "20 instances, max per-sweep rise " + sci(worst_rise) + ", max residual " +
              sci(worst_res)};
}

Outcome pgd_invariants() {
  std::mt19937_64 rng(15);
  long violations = 0;
  long checks = 0;
  for (int t = 0; t < 20; ++t) {
    const auto scale = t % 2 ? RatingScale::binary() : RatingScale::range(1, 5);
    auto ds = oracle::random_dataset(rng, 40, 15, 0.4, scale);
    TrainConfig tc;
    tc.d = 3;
    auto model = train(ds, tc);
    AntidoteConfig cfg;
    cfg.n_filler = 1 + t % 10;
    cfg.pgd_steps = 1;
    cfg.pgd_lr = (t % 3 == 0 ? 10.0 : 0.05) * scale.width();
    cfg.scaling = t % 4 < 2 ? StepScaling::MaxNorm : StepScaling::Raw;
    cfg.metrics = {kAllMetrics[static_cast<std::size_t>(t % 4)]};
    std::vector<Index> all(15);
    std::iota(all.begin(), all.end(), Index{0});
    std::vector<RelaxedAntidote> relaxed{new_relaxed_user(ds, cfg, 3, 0, all)};
    for (int step = 0; step < 20; ++step) {
      run_pgd(ds, model, relaxed, cfg);
      for (Index i : relaxed[0].items) {
        ++checks;
        if (relaxed[0].x[i] < scale.r_min || relaxed[0].x[i] > scale.r_max) ++violations;
      }
    }
    auto user = round_and_select(relaxed[0].x, cfg.n_filler, scale);
    ++checks;
    if (static_cast<Index>(user.fillers.size()) > cfg.n_filler) ++violations;
    for (int r : user.ratings) {
      ++checks;
      if (!scale.contains(r)) ++violations;
    }
  }
  return {violations == 0, std::to_string(checks) + " checks, " + std::to_string(violations) + " violations"};
}

// ----------------------------------------------------------------- CLI determinism

int sh(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome cli_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  TempDir dir;
  dir.write("cfg.json", R"({
  "synthetic": {"users_per_group": 60, "items_per_group": 40},
  "train": {"d": 4},
  "antidote": {"n_filler": 20, "pgd_steps": 10},
  "experiment": {"fractions": [0.02, 0.04], "trials": 2}
})");
  const std::string cfg = (dir.path() / "cfg.json").string();
  std::vector<std::string> compared;
  for (int pass = 0; pass < 2; ++pass) {
    const std::string out = (dir.path() / ("p" + std::to_string(pass))).string();
    const std::vector<std::string> cmds{
        cli + " synth --seed 3 --config " + cfg + " --out-dir " + out + "/data",
        cli + " train --seed 3 --config " + cfg + " --ratings " + out + "/data/ratings.csv --groups " + out +
            "/data/groups.csv --out " + out + "/model.bin",
        cli + " antidote --seed 3 --config " + cfg + " --ratings " + out + "/data/ratings.csv --groups " + out +
            "/data/groups.csv --fraction 0.05 --out " + out + "/antidote.csv",
        cli + " run --seed 3 --config " + cfg + " --out-dir " + out + "/run",
        cli + " run --seed 3 --config " + cfg + " --method random --out-dir " + out + "/random",
        cli + " sweep --seed 3 --config " + cfg + " --fillers 10 --fillers 20 --out-dir " + out + "/sweep",
        cli + " transfer --seed 3 --config " + cfg + " --out-dir " + out + "/transfer",
    };
    for (const auto& c : cmds) {
      if (sh(c) != 0) return {false, "command failed: " + c};
    }
  }
  std::vector<std::string> files{"data/ratings.csv", "data/groups.csv", "model.bin", "antidote.csv",
                                 "run/report.csv", "run/report_aggregates.csv", "random/report.csv",
                                 "sweep/sweep.csv", "transfer/transfer.csv"};
  for (const auto& f : files) {
    const auto a = dir.path() / "p0" / f;
    const auto b = dir.path() / "p1" / f;
    if (!std::filesystem::exists(a)) return {false, "missing output " + f};
    if (slurp(a) != slurp(b)) return {false, f + " differs between runs"};
  }
  return {true, std::to_string(files.size()) + " outputs of 7 commands byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance gate"};
  std::string cli;
  int seeds = 5;
  app.add_option("--cli", cli, "path to the fairmf executable");
  app.add_option("--seeds", seeds, "number of dataset seeds")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const auto names = std::array<const char*, 4>{"value", "absolute", "overestimation", "non-parity"};
  const std::array<double, 4> table_baseline{0.280, 0.107, 0.144, 0.041};
  const ExperimentSpec base = desk_spec(seeds);

  // 1. baseline
  {
    ExperimentSpec spec = base;
    spec.method = Method::None;
    spec.fractions = {0.02};
    Means m = means_at(run(spec), 0.02);
    bool ok = m.rows == seeds;
    std::string detail;
    for (std::size_t k = 0; k < 4; ++k) {
      ok = ok && std::abs(m.before[k] - table_baseline[k]) <= 0.05;
      detail += std::string(k ? ", " : "") + names[k] + " " + fmt(m.before[k]) + " (ref " + fmt(table_baseline[k], 3) + ")";
    }
    detail += ", rmse " + fmt(m.rmse_before);
    report(1, "baseline scores within 0.05 of reference", {ok, detail});
  }

  // value runs over every fraction serve criteria 2 (value), 3 and 4
  ExperimentSpec value_spec = base;
  value_spec.targets = {MetricKind::Value};
  const ExperimentReport value_run = run(value_spec);

  // 2. per-metric reduction at 2%
  {
    std::array<Means, 4> at2{};
    at2[0] = means_at(value_run, 0.02);
    for (std::size_t k = 1; k < 4; ++k) {
      ExperimentSpec spec = base;
      spec.targets = {kAllMetrics[k]};
      spec.fractions = {0.02};
      at2[k] = means_at(run(spec), 0.02);
    }
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < 4; ++k) {
      const double red = relative(at2[k].before[k], at2[k].after[k]);
      ok = ok && at2[k].rows == seeds && red >= 0.20;
      detail += std::string(k ? ", " : "") + names[k] + " " + fmt(at2[k].before[k]) + "->" + fmt(at2[k].after[k]) +
                " (" + pct(red) + ")";
    }
    report(2, "targeted metric reduced by at least 20% at 2%", {ok, detail});
  }

  // 3. monotone in the fraction
  {
    bool ok = true;
    double prev = 1e300;
    std::string detail;
    for (double f : value_spec.fractions) {
      Means m = means_at(value_run, f);
      ok = ok && m.rows == seeds && m.after[0] <= prev;
      prev = m.after[0];
      detail += (detail.empty() ? "" : " -> ") + fmt(m.after[0]) + " @" + fmt(100.0 * f, 1) + "%";
    }
    report(3, "value reduction weakly improves with the fraction", {ok, "baseline " + fmt(means_at(value_run, 0.02).before[0]) + ": " + detail});
  }

  // 4. RMSE at 2%
  {
    Means m = means_at(value_run, 0.02);
    const double change = m.rmse_after - m.rmse_before;
    report(4, "RMSE change at 2% within 0.01",
           {m.rows == seeds && std::abs(change) <= 0.01,
            fmt(m.rmse_before) + " -> " + fmt(m.rmse_after) + " (" + (change >= 0 ? "+" : "") + fmt(change) + ")"});
  }

  // 5. naive baselines
  {
    bool ok = true;
    std::string detail;
    for (Method method : {Method::Maximum, Method::Minimum, Method::Random}) {
      ExperimentSpec spec = base;
      spec.method = method;
      spec.fractions = {0.02};
      Means m = means_at(run(spec), 0.02);
      ok = ok && m.rows == seeds && m.reduction[0] < 0.10;
      detail += (detail.empty() ? "" : ", ") + std::string(to_string(method)) + " " + pct(m.reduction[0]);
    }
    report(5, "naive baselines reduce value by less than 10%", {ok, detail});
  }

  // 6. deflected value + overestimation
  {
    ExperimentSpec spec = base;
    spec.fractions = {0.02};
    Means m = means_at(multi_metric(spec, MetricKind::Value, MetricKind::Overestimation, true), 0.02);
    const std::size_t v = metric_slot(MetricKind::Value);
    const std::size_t o = metric_slot(MetricKind::Overestimation);
    const bool ok = m.rows == seeds && m.after[v] <= 1.05 * m.before[v] && m.after[o] <= 1.05 * m.before[o];
    const bool both = m.after[v] < m.before[v] && m.after[o] < m.before[o];
    report(6, "deflected two-metric run worsens neither target by more than 5%",
           {ok, "value " + fmt(m.before[v]) + "->" + fmt(m.after[v]) + ", overestimation " + fmt(m.before[o]) + "->" +
                    fmt(m.after[o]) + (both ? ", both improved" : ", not both improved")});
  }

  report(7, "metrics match brute force", metric_oracle());
  report(8, "analytic gradients match finite differences", gradient_oracle());
  report(9, "deflection algebra", deflection_algebra());
  report(10, "ALS monotone and stationary", als_properties());
  report(11, "PGD box, rounding and budget invariants", pgd_invariants());
  report(12, "CLI outputs byte-identical across runs", cli_determinism(cli));

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
