#include "fairmf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fairmf/error.hpp"

namespace fairmf {

namespace {

constexpr std::uint64_t kFillerStream = 0xF1;
constexpr std::uint64_t kRatingStream = 0xF2;

double sensitivity_of(const PredictionSensitivity& sens, const GroupItemStats& stats, UserGroup g, Index i) {
  auto k = static_cast<std::size_t>(i);
  switch (g) {
    case UserGroup::Disadvantaged: return sens.coef_d[k] / static_cast<double>(stats.count_d[k]);
    case UserGroup::Advantaged: return sens.coef_a[k] / static_cast<double>(stats.count_a[k]);
    case UserGroup::None: break;
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::None: return "none";
    case BaselineKind::Regularization: return "regularization";
    case BaselineKind::Maximum: return "maximum";
    case BaselineKind::Minimum: return "minimum";
    case BaselineKind::Random: return "random";
    case BaselineKind::BatchOptimized: return "batch";
  }
  return "unknown";
}

BaselineKind parse_baseline(std::string_view name) {
  for (BaselineKind k : {BaselineKind::None, BaselineKind::Regularization, BaselineKind::Maximum,
                         BaselineKind::Minimum, BaselineKind::Random, BaselineKind::BatchOptimized}) {
    if (to_string(k) == name) return k;
  }
  if (name == "max") return BaselineKind::Maximum;
  if (name == "min") return BaselineKind::Minimum;
  if (name == "batch-optimized") return BaselineKind::BatchOptimized;
  throw ValidationError("unknown baseline '" + std::string(name) + "'");
}

std::vector<Index> random_fillers(Index num_items, Index n, std::uint64_t seed, Index z) {
  if (n < 0 || n > num_items) {
    throw ValidationError("cannot pick " + std::to_string(n) + " fillers from " + std::to_string(num_items) + " items");
  }
  std::vector<Index> items(static_cast<std::size_t>(num_items));
  std::iota(items.begin(), items.end(), Index{0});
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(z), kFillerStream));
  // Partial Fisher-Yates.
  for (Index j = 0; j < n; ++j) {
    std::uniform_int_distribution<Index> pick(j, num_items - 1);
    std::swap(items[static_cast<std::size_t>(j)], items[static_cast<std::size_t>(pick(rng))]);
  }
  items.resize(static_cast<std::size_t>(n));
  std::sort(items.begin(), items.end());
  return items;
}

std::vector<AntidoteUser> naive_antidote(BaselineKind kind, const RatingDataset& ds, const AntidoteConfig& cfg) {
  if (kind != BaselineKind::Maximum && kind != BaselineKind::Minimum && kind != BaselineKind::Random) {
    throw ValidationError("naive antidote takes maximum, minimum or random");
  }
  cfg.validate(ds.num_items());
  const RatingScale& scale = ds.scale();
  const Index count = antidote_count(cfg.alpha_frac, ds.num_original_users());
  std::vector<AntidoteUser> users;
  users.reserve(static_cast<std::size_t>(count));
  for (Index z = 0; z < count; ++z) {
    AntidoteUser user;
    user.z = z;
    user.fillers = random_fillers(ds.num_items(), cfg.n_filler, cfg.seed, z);
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(z), kRatingStream));
    std::uniform_int_distribution<std::size_t> pick(0, scale.allowed.size() - 1);
    user.ratings.reserve(user.fillers.size());
    for (std::size_t j = 0; j < user.fillers.size(); ++j) {
      switch (kind) {
        case BaselineKind::Maximum: user.ratings.push_back(scale.r_max); break;
        case BaselineKind::Minimum: user.ratings.push_back(scale.r_min); break;
        default: user.ratings.push_back(scale.allowed[pick(rng)]); break;
      }
    }
    users.push_back(std::move(user));
  }
  return users;
}

void RegularizationConfig::validate() const {
  if (!(reg_weight >= 0.0) || !std::isfinite(reg_weight)) throw ValidationError("reg_weight must be >= 0");
  if (!(step > 0.0) || !std::isfinite(step)) throw ValidationError("descent step must be > 0");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
}

double regularized_objective(const RatingDataset& ds, const FactorModel& model, MetricKind kind, double reg_weight,
                             ItemNormalization norm) {
  double value = objective(ds, model);
  if (reg_weight != 0.0) value += reg_weight * unfairness(kind, group_item_stats(model, ds), norm);
  return value;
}

FactorModel regularized_train(const RatingDataset& ds, const FactorModel& start, MetricKind kind,
                              const RegularizationConfig& cfg, DescentTrace* trace, ItemNormalization norm) {
  cfg.validate();
  if (ds.num_antidote_users() != 0) throw ValidationError("regularized training takes a dataset without antidote rows");
  if (start.P.rows() != ds.num_users() || start.Q.rows() != ds.num_items()) {
    throw ValidationError("start model does not match the dataset");
  }
  FactorModel model = start;
  model.K.resize(0, model.dim());
  const double lambda = model.lambda;
  if (trace != nullptr) trace->objective.assign(1, regularized_objective(ds, model, kind, cfg.reg_weight, norm));

  Matrix grad_p(model.P.rows(), model.dim());
  Matrix grad_q(model.Q.rows(), model.dim());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    grad_p = 2.0 * lambda * model.P;
    grad_q = 2.0 * lambda * model.Q;
    GroupItemStats stats;
    PredictionSensitivity sens;
    if (cfg.reg_weight != 0.0) {
      stats = group_item_stats(model, ds);
      sens = prediction_sensitivity(kind, stats, norm);
    }
    for (Index i = 0; i < ds.num_items(); ++i) {
      auto q = model.Q.row(i);
      for (const auto& nb : ds.item_ratings(i)) {
        auto p = model.P.row(nb.index);
        // d/d rhat of (r - rhat)^2 + w M
        double dr = -2.0 * (nb.rating - p.dot(q));
        if (cfg.reg_weight != 0.0) dr += cfg.reg_weight * sensitivity_of(sens, stats, ds.group(nb.index), i);
        grad_p.row(nb.index) += dr * q;
        grad_q.row(i) += dr * p;
      }
    }
    model.P -= cfg.step * grad_p;
    model.Q -= cfg.step * grad_q;
    if (!model.P.allFinite() || !model.Q.allFinite()) {
      throw NumericalError("regularized descent diverged at epoch " + std::to_string(epoch));
    }
    if (trace != nullptr) trace->objective.push_back(regularized_objective(ds, model, kind, cfg.reg_weight, norm));
  }
  return model;
}

std::vector<AntidoteUser> batch_optimized_antidote(const RatingDataset& ds, const FactorModel& model,
                                                   const AntidoteConfig& cfg, PgdTrace* trace) {
  cfg.validate(ds.num_items());
  const Index count = antidote_count(cfg.alpha_frac, ds.num_original_users());
  if (trace != nullptr) trace->objective.clear();
  if (count == 0) return {};

  std::vector<RelaxedAntidote> relaxed;
  relaxed.reserve(static_cast<std::size_t>(count));
  for (Index z = 0; z < count; ++z) {
    relaxed.push_back(new_relaxed_user(ds, cfg, model.dim(), z, random_fillers(ds.num_items(), cfg.n_filler, cfg.seed, z)));
  }
  run_pgd(ds, model, relaxed, cfg, trace);

  const RatingScale& scale = ds.scale();
  std::vector<AntidoteUser> users;
  users.reserve(relaxed.size());
  for (Index z = 0; z < count; ++z) {
    const auto& r = relaxed[static_cast<std::size_t>(z)];
    AntidoteUser user;
    user.z = z;
    user.relaxed.assign(r.x.data(), r.x.data() + r.x.size());
    user.fillers = r.items;
    for (Index i : r.items) user.ratings.push_back(scale.nearest(r.x[i]));
    users.push_back(std::move(user));
  }
  return users;
}

}  // namespace fairmf
