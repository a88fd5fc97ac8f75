#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "fairmf/data.hpp"
#include "fairmf/factorization.hpp"

namespace fairmf {

enum class MetricKind { Value, Absolute, Overestimation, NonParity };

inline constexpr std::array<MetricKind, 4> kAllMetrics{MetricKind::Value, MetricKind::Absolute,
                                                       MetricKind::Overestimation, MetricKind::NonParity};

std::string_view to_string(MetricKind kind);
MetricKind parse_metric(std::string_view name);

// How the per-item metrics are averaged. ValidItems skips items lacking a
// rater from either group and divides by the number of remaining items;
// AllItems counts skipped items as zero and divides by |I|.
enum class ItemNormalization { ValidItems, AllItems };

// Per-item group means over observed entries of original users.
struct GroupItemStats {
  std::vector<double> mean_pred_d;
  std::vector<double> mean_pred_a;
  std::vector<double> mean_true_d;
  std::vector<double> mean_true_a;
  std::vector<Index> count_d;  // |D_i|
  std::vector<Index> count_a;  // |A_i|
  double mean_pred_over_d = 0.0;
  double mean_pred_over_a = 0.0;
  Index c5 = 0;  // ratings by disadvantaged users
  Index c6 = 0;  // ratings by advantaged users

  Index num_items() const { return static_cast<Index>(count_d.size()); }
  bool defined_d(Index i) const { return count_d[static_cast<std::size_t>(i)] > 0; }
  bool defined_a(Index i) const { return count_a[static_cast<std::size_t>(i)] > 0; }
  bool valid(Index i) const { return defined_d(i) && defined_a(i); }
  Index valid_items() const;

  // Signed prediction error of each group's mean on item i.
  double error_d(Index i) const { return mean_pred_d[static_cast<std::size_t>(i)] - mean_true_d[static_cast<std::size_t>(i)]; }
  double error_a(Index i) const { return mean_pred_a[static_cast<std::size_t>(i)] - mean_true_a[static_cast<std::size_t>(i)]; }
};

// Throws ValidationError when either group has no users.
GroupItemStats group_item_stats(const FactorModel& model, const RatingDataset& ds);

double unfairness(MetricKind kind, const GroupItemStats& stats,
                  ItemNormalization norm = ItemNormalization::ValidItems);
double unfairness(MetricKind kind, const FactorModel& model, const RatingDataset& ds,
                  ItemNormalization norm = ItemNormalization::ValidItems);

struct MetricReport {
  MetricKind metric = MetricKind::Value;
  double score = 0.0;
  Index valid_items = 0;
  Index skipped_items = 0;
};

MetricReport evaluate(MetricKind kind, const GroupItemStats& stats,
                      ItemNormalization norm = ItemNormalization::ValidItems);

// {"metric", "score", "valid_items", "skipped_items"}
std::string to_json(const MetricReport& report);

// Subgradient of a metric with respect to the predictions of original users.
// For observed (u, i): dM/d rhat_ui = coef_d[i] / |D_i| when u is disadvantaged
// and coef_a[i] / |A_i| when advantaged. sign(0) = 0 and the max(0, .) branch
// has derivative 0 at exactly 0.
struct PredictionSensitivity {
  std::vector<double> coef_d;
  std::vector<double> coef_a;
};

PredictionSensitivity prediction_sensitivity(MetricKind kind, const GroupItemStats& stats,
                                             ItemNormalization norm = ItemNormalization::ValidItems);

}  // namespace fairmf
