#include "fairmf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "fairmf/error.hpp"

namespace fairmf {

namespace {

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

double item_denominator(const GroupItemStats& stats, ItemNormalization norm) {
  Index n = norm == ItemNormalization::ValidItems ? stats.valid_items() : stats.num_items();
  if (n == 0) throw ValidationError("no item is rated by both groups; per-item metrics are undefined");
  return static_cast<double>(n);
}

double item_term(MetricKind kind, double ed, double ea) {
  switch (kind) {
    case MetricKind::Value:
      return std::abs(ed - ea);
    case MetricKind::Absolute:
      return std::abs(std::abs(ed) - std::abs(ea));
    case MetricKind::Overestimation:
      return std::abs(std::max(0.0, ed) - std::max(0.0, ea));
    case MetricKind::NonParity:
      break;
  }
  throw ValidationError("non-parity has no per-item term");
}

}  // namespace

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Value: return "value";
    case MetricKind::Absolute: return "absolute";
    case MetricKind::Overestimation: return "overestimation";
    case MetricKind::NonParity: return "nonparity";
  }
  return "unknown";
}

MetricKind parse_metric(std::string_view name) {
  for (MetricKind k : kAllMetrics) {
    if (to_string(k) == name) return k;
  }
  if (name == "non-parity" || name == "parity") return MetricKind::NonParity;
  if (name == "over") return MetricKind::Overestimation;
  throw ValidationError("unknown metric '" + std::string(name) +
                        "' (expected value, absolute, overestimation or nonparity)");
}

Index GroupItemStats::valid_items() const {
  Index n = 0;
  for (Index i = 0; i < num_items(); ++i) n += valid(i) ? 1 : 0;
  return n;
}

GroupItemStats group_item_stats(const FactorModel& model, const RatingDataset& ds) {
  if (ds.group_size(UserGroup::Disadvantaged) == 0 || ds.group_size(UserGroup::Advantaged) == 0) {
    throw ValidationError("unfairness metrics need at least one user in each group");
  }
  const auto n = static_cast<std::size_t>(ds.num_items());
  GroupItemStats s;
  s.mean_pred_d.assign(n, 0.0);
  s.mean_pred_a.assign(n, 0.0);
  s.mean_true_d.assign(n, 0.0);
  s.mean_true_a.assign(n, 0.0);
  s.count_d.assign(n, 0);
  s.count_a.assign(n, 0);
  double total_d = 0.0;
  double total_a = 0.0;

  for (Index i = 0; i < ds.num_items(); ++i) {
    auto q = model.Q.row(i);
    auto k = static_cast<std::size_t>(i);
    for (const auto& nb : ds.item_ratings(i)) {
      UserGroup g = ds.group(nb.index);
      if (g == UserGroup::None) continue;
      double pred = model.user_vector(nb.index).dot(q);
      if (g == UserGroup::Disadvantaged) {
        s.mean_pred_d[k] += pred;
        s.mean_true_d[k] += nb.rating;
        ++s.count_d[k];
      } else {
        s.mean_pred_a[k] += pred;
        s.mean_true_a[k] += nb.rating;
        ++s.count_a[k];
      }
    }
    total_d += s.mean_pred_d[k];
    total_a += s.mean_pred_a[k];
    s.c5 += s.count_d[k];
    s.c6 += s.count_a[k];
    if (s.count_d[k] > 0) {
      s.mean_pred_d[k] /= static_cast<double>(s.count_d[k]);
      s.mean_true_d[k] /= static_cast<double>(s.count_d[k]);
    }
    if (s.count_a[k] > 0) {
      s.mean_pred_a[k] /= static_cast<double>(s.count_a[k]);
      s.mean_true_a[k] /= static_cast<double>(s.count_a[k]);
    }
  }
  s.mean_pred_over_d = s.c5 > 0 ? total_d / static_cast<double>(s.c5) : 0.0;
  s.mean_pred_over_a = s.c6 > 0 ? total_a / static_cast<double>(s.c6) : 0.0;
  return s;
}

double unfairness(MetricKind kind, const GroupItemStats& stats, ItemNormalization norm) {
  if (kind == MetricKind::NonParity) {
    if (stats.c5 == 0 || stats.c6 == 0) throw ValidationError("non-parity needs ratings from both groups");
    return std::abs(stats.mean_pred_over_d - stats.mean_pred_over_a);
  }
  const double denom = item_denominator(stats, norm);
  double sum = 0.0;
  for (Index i = 0; i < stats.num_items(); ++i) {
    if (stats.valid(i)) sum += item_term(kind, stats.error_d(i), stats.error_a(i));
  }
  return sum / denom;
}

double unfairness(MetricKind kind, const FactorModel& model, const RatingDataset& ds, ItemNormalization norm) {
  return unfairness(kind, group_item_stats(model, ds), norm);
}

MetricReport evaluate(MetricKind kind, const GroupItemStats& stats, ItemNormalization norm) {
  MetricReport r;
  r.metric = kind;
  r.score = unfairness(kind, stats, norm);
  r.valid_items = kind == MetricKind::NonParity ? stats.num_items() : stats.valid_items();
  r.skipped_items = stats.num_items() - r.valid_items;
  return r;
}

std::string to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["metric"] = to_string(report.metric);
  j["score"] = report.score;
  j["valid_items"] = report.valid_items;
  j["skipped_items"] = report.skipped_items;
  return j.dump();
}

PredictionSensitivity prediction_sensitivity(MetricKind kind, const GroupItemStats& stats, ItemNormalization norm) {
  const auto n = static_cast<std::size_t>(stats.num_items());
  PredictionSensitivity s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};

  if (kind == MetricKind::NonParity) {
    if (stats.c5 == 0 || stats.c6 == 0) throw ValidationError("non-parity needs ratings from both groups");
    // d|E_D - E_A| / d rhat_ui = sgn / C5 for u in D, -sgn / C6 for u in A.
    const double sgn = sign(stats.mean_pred_over_d - stats.mean_pred_over_a);
    for (std::size_t i = 0; i < n; ++i) {
      s.coef_d[i] = sgn * static_cast<double>(stats.count_d[i]) / static_cast<double>(stats.c5);
      s.coef_a[i] = -sgn * static_cast<double>(stats.count_a[i]) / static_cast<double>(stats.c6);
    }
    return s;
  }

  const double inv = 1.0 / item_denominator(stats, norm);
  for (Index i = 0; i < stats.num_items(); ++i) {
    if (!stats.valid(i)) continue;
    const double ed = stats.error_d(i);
    const double ea = stats.error_a(i);
    auto k = static_cast<std::size_t>(i);
    switch (kind) {
      case MetricKind::Value: {
        const double outer = sign(ed - ea);
        s.coef_d[k] = outer * inv;
        s.coef_a[k] = -outer * inv;
        break;
      }
      case MetricKind::Absolute: {
        const double outer = sign(std::abs(ed) - std::abs(ea));
        s.coef_d[k] = outer * sign(ed) * inv;
        s.coef_a[k] = -outer * sign(ea) * inv;
        break;
      }
      case MetricKind::Overestimation: {
        const double c3 = std::max(0.0, ed);
        const double c4 = std::max(0.0, ea);
        const double outer = sign(c3 - c4);
        s.coef_d[k] = ed > 0.0 ? outer * inv : 0.0;
        s.coef_a[k] = ea > 0.0 ? -outer * inv : 0.0;
        break;
      }
      case MetricKind::NonParity:
        break;
    }
  }
  return s;
}

}  // namespace fairmf
