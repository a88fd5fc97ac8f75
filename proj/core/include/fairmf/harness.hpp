#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairmf/antidote.hpp"
#include "fairmf/baselines.hpp"
#include "fairmf/data.hpp"
#include "fairmf/factorization.hpp"
#include "fairmf/metrics.hpp"

namespace fairmf {

// Optimized is the sequential influence-guided generator; the rest are the
// comparison methods.
enum class Method { None, Optimized, Regularization, Maximum, Minimum, Random, BatchOptimized };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

struct FileSource {
  std::filesystem::path ratings;
  std::filesystem::path groups;
  std::filesystem::path item_groups;  // optional
  RatingScale scale;
};

struct ExperimentSpec {
  // Exactly one source. A synthetic source is regenerated per trial with the
  // trial seed; a file source is loaded once and only training varies.
  std::optional<SyntheticConfig> synthetic;
  std::optional<FileSource> files;

  Method method = Method::Optimized;
  std::vector<MetricKind> targets{MetricKind::Value};
  std::vector<MetricKind> eval_metrics{kAllMetrics.begin(), kAllMetrics.end()};
  std::vector<double> fractions{0.005, 0.01, 0.02, 0.03};
  std::vector<Index> filler_counts;  // empty: antidote.n_filler only
  int trials = 5;
  std::uint64_t seed = 0;

  TrainConfig train;
  AntidoteConfig antidote;
  RegularizationConfig regularization;

  void validate() const;
};

// Seed used by trial t for data generation, training and antidote draws.
std::uint64_t trial_seed(std::uint64_t base, int trial);

struct ExperimentRow {
  Method method = Method::None;
  std::vector<MetricKind> targets;
  double fraction = 0.0;
  Index n_filler = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  Index antidote_users = 0;
  std::array<double, 4> before{};  // indexed like kAllMetrics
  std::array<double, 4> after{};
  double rmse_before = 0.0;
  double rmse_after = 0.0;
  double runtime_seconds = 0.0;
  bool ok = true;
  std::string error;
};

struct Aggregate {
  Method method = Method::None;
  double fraction = 0.0;
  Index n_filler = 0;
  int trials = 0;  // successful rows only
  std::array<double, 4> before_mean{};
  std::array<double, 4> after_mean{};
  std::array<double, 4> after_std{};  // sample standard deviation, 0 for one trial
  double rmse_before_mean = 0.0;
  double rmse_after_mean = 0.0;
  double rmse_after_std = 0.0;
};

struct ExperimentReport {
  std::vector<MetricKind> eval_metrics;
  std::vector<ExperimentRow> rows;
  std::vector<Aggregate> aggregates;  // one per (fraction, n_filler) in run order
};

std::size_t metric_slot(MetricKind kind);

// Recomputes aggregates from rows, grouping by (method, fraction, n_filler)
// in first-appearance order.
std::vector<Aggregate> aggregate_rows(const std::vector<ExperimentRow>& rows);

// Per trial: build the dataset, train, score "before", apply the method,
// retrain warm-started from the baseline model, score "after". A failing cell
// is recorded with ok = false and the run continues.
ExperimentReport run(const ExperimentSpec& spec);

struct TransferReport {
  std::array<std::array<double, 4>, 4> scores{};  // [source][evaluated], means over trials
  std::array<double, 4> baseline{};               // "before" means
  std::vector<ExperimentReport> runs;             // one per source metric
};

// Optimized method at the first configured fraction, once per source metric.
TransferReport transferability(const ExperimentSpec& spec);

// Optimized method on two distinct targets, with or without deflection.
ExperimentReport multi_metric(const ExperimentSpec& spec, MetricKind first, MetricKind second, bool deflect);

// Optimized method at the first configured fraction across filler counts.
ExperimentReport filler_sweep(const ExperimentSpec& spec);

// CSV is deterministic: runtime is left out. JSON carries everything.
void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report);
void write_aggregate_csv(const std::filesystem::path& path, const ExperimentReport& report);
void write_report_json(const std::filesystem::path& path, const ExperimentReport& report);
void write_transfer_csv(const std::filesystem::path& path, const TransferReport& report);

// Latent vectors of every user with an antidote flag, for external plotting.
// Columns: user_id,antidote,v0..v{d-1}; values round-trip exactly.
void export_embeddings(const FactorModel& model, const RatingDataset& ds, const std::filesystem::path& path);

struct Embeddings {
  std::vector<std::string> user_ids;
  std::vector<bool> antidote;
  Matrix vectors;
};
Embeddings read_embeddings(const std::filesystem::path& path);

// Antidote users as `antidote_user,item_id,rating` rows.
void write_antidote_csv(const std::filesystem::path& path, const RatingDataset& ds,
                        const std::vector<AntidoteUser>& users);

// Inverse of write_antidote_csv. Users are numbered in order of first
// appearance; item ids are resolved against `ds`.
std::vector<AntidoteUser> read_antidote_csv(const std::filesystem::path& path, const RatingDataset& ds);

}  // namespace fairmf
