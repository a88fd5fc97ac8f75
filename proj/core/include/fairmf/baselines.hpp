#pragma once

#include <string_view>
#include <vector>

#include "fairmf/antidote.hpp"
#include "fairmf/data.hpp"
#include "fairmf/factorization.hpp"
#include "fairmf/metrics.hpp"

namespace fairmf {

enum class BaselineKind { None, Regularization, Maximum, Minimum, Random, BatchOptimized };

std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline(std::string_view name);

// n distinct items drawn uniformly without replacement, ascending.
std::vector<Index> random_fillers(Index num_items, Index n, std::uint64_t seed, Index z);

// Maximum, Minimum or Random antidote users: floor(alpha |U|) users, each on
// n random fillers rated r_max, r_min, or uniformly over the allowed values.
std::vector<AntidoteUser> naive_antidote(BaselineKind kind, const RatingDataset& ds, const AntidoteConfig& cfg);

struct RegularizationConfig {
  double reg_weight = 1.0;
  double step = 1e-3;
  int epochs = 200;

  void validate() const;
};

// regularized_objective() after each epoch, starting with the initial model.
struct DescentTrace {
  std::vector<double> objective;
};

// Squared loss plus ridge terms plus reg_weight times the metric.
double regularized_objective(const RatingDataset& ds, const FactorModel& model, MetricKind kind, double reg_weight,
                             ItemNormalization norm = ItemNormalization::ValidItems);

// Full-batch subgradient descent on P and Q jointly from `start`. The dataset
// must not contain antidote rows.
FactorModel regularized_train(const RatingDataset& ds, const FactorModel& start, MetricKind kind,
                              const RegularizationConfig& cfg, DescentTrace* trace = nullptr,
                              ItemNormalization norm = ItemNormalization::ValidItems);

// All antidote users at once on random fillers, their ratings optimized
// jointly by PGD against `model` and rounded onto the allowed values.
std::vector<AntidoteUser> batch_optimized_antidote(const RatingDataset& ds, const FactorModel& model,
                                                   const AntidoteConfig& cfg, PgdTrace* trace = nullptr);

}  // namespace fairmf
