#include "fairmf/antidote.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fairmf/error.hpp"
#include "fairmf/influence.hpp"

namespace fairmf {

namespace {

double combined_objective(const AntidoteConfig& cfg, const GroupItemStats& stats) {
  if (cfg.metrics.size() == 1) return unfairness(cfg.metrics[0], stats, cfg.norm);
  return cfg.weight_a * unfairness(cfg.metrics[0], stats, cfg.norm) +
         cfg.weight_b * unfairness(cfg.metrics[1], stats, cfg.norm);
}

Vector combined_gradient(const AntidoteConfig& cfg, const InfluenceContext& ctx, const GroupItemStats& stats,
                         Index z) {
  Vector g1 = ctx.unfairness_gradient(cfg.metrics[0], stats, z, cfg.norm);
  if (cfg.metrics.size() == 1) return g1;
  Vector g2 = ctx.unfairness_gradient(cfg.metrics[1], stats, z, cfg.norm);
  if (cfg.deflect) return deflected_gradient(g1, g2, cfg.weight_a, cfg.weight_b);
  return cfg.weight_a * g1 + cfg.weight_b * g2;
}

}  // namespace

void AntidoteConfig::validate(Index num_items) const {
  if (!(alpha_frac >= 0.0 && alpha_frac < 1.0)) throw ValidationError("antidote fraction must lie in [0, 1)");
  if (n_filler < 1 || n_filler > num_items) {
    throw ValidationError("filler budget must lie in [1, " + std::to_string(num_items) + "]");
  }
  if (pgd_steps < 0) throw ValidationError("pgd_steps must be >= 0");
  if (pgd_lr && !(*pgd_lr > 0.0)) throw ValidationError("pgd_lr must be > 0");
  if (!(weight_a > 0.0 && weight_b > 0.0)) throw ValidationError("metric weights must be > 0");
  if (metrics.empty() || metrics.size() > 2) throw ValidationError("antidote optimization takes one or two metrics");
  if (metrics.size() == 2 && metrics[0] == metrics[1]) throw ValidationError("the two target metrics must differ");
}

double AntidoteConfig::learning_rate(const RatingScale& scale) const {
  return pgd_lr.value_or(0.01 * scale.width());
}

double AntidoteConfig::initial_rating(const RatingScale& scale) const {
  double v = init_rating.value_or(scale.midpoint());
  return std::clamp(v, static_cast<double>(scale.r_min), static_cast<double>(scale.r_max));
}

Index antidote_count(double alpha_frac, Index num_original_users) {
  return static_cast<Index>(std::floor(alpha_frac * static_cast<double>(num_original_users)));
}

Vector deflected_gradient(const Vector& g1, const Vector& g2, double a, double b) {
  if (g1.size() != g2.size()) throw ValidationError("gradient lengths differ");
  const double dot = g1.dot(g2);
  const double n1 = g1.squaredNorm();
  const double n2 = g2.squaredNorm();
  if (dot >= 0.0 || n1 == 0.0 || n2 == 0.0) return a * g1 + b * g2;
  Vector h1 = g1 - (dot / n2) * g2;
  Vector h2 = g2 - (dot / n1) * g1;
  return a * h1 + b * h2;
}

RelaxedAntidote new_relaxed_user(const RatingDataset& ds, const AntidoteConfig& cfg, int d, Index z,
                                 std::vector<Index> items, double init_std) {
  const RatingScale& scale = ds.scale();
  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(z), 0xA7));
  RelaxedAntidote user;
  user.x = Vector::Constant(ds.num_items(), cfg.initial_rating(scale));
  if (cfg.init_mode == InitMode::Uniform) {
    std::uniform_real_distribution<double> dist(scale.r_min, scale.r_max);
    for (Index i : items) user.x[i] = dist(rng);
  }
  // At the midpoint of a symmetric scale the ridge fit of k is exactly zero,
  // which zeroes every influence term; start from a small random vector instead.
  std::normal_distribution<double> normal(0.0, init_std);
  user.k.resize(d);
  for (int c = 0; c < d; ++c) user.k[c] = normal(rng);
  user.items = std::move(items);
  return user;
}

bool projected_step(Vector& x, std::span<const Index> items, const Vector& grad, double lr, double lo,
                    double hi) {
  for (Index i : items) {
    double next = x[i] - lr * grad[i];
    if (!std::isfinite(next)) return false;
    x[i] = std::clamp(next, lo, hi);
  }
  return true;
}

void run_pgd(const RatingDataset& ds, const FactorModel& model, std::vector<RelaxedAntidote>& relaxed,
             const AntidoteConfig& cfg, PgdTrace* trace) {
  cfg.validate(ds.num_items());
  const RatingScale& scale = ds.scale();
  const double lo = scale.r_min;
  const double hi = scale.r_max;
  const double lr = cfg.learning_rate(scale);
  const int d = model.dim();
  for (auto& user : relaxed) {
    if (user.k.size() != d) throw ValidationError("relaxed user latent vector has the wrong dimension");
  }

  InfluenceContext ctx(ds, model);
  if (trace != nullptr) trace->objective.clear();

  std::vector<Vector> grads(relaxed.size());
  for (int step = 0; step < cfg.pgd_steps; ++step) {
    ctx.refresh(relaxed);
    const GroupItemStats stats = group_item_stats(ctx.relaxed_model(), ds);
    if (trace != nullptr) trace->objective.push_back(combined_objective(cfg, stats));

    for (std::size_t z = 0; z < relaxed.size(); ++z) {
      grads[z] = combined_gradient(cfg, ctx, stats, static_cast<Index>(z));
    }
    const Matrix& q = ctx.item_vectors();
    double step_lr = lr;
    if (cfg.scaling == StepScaling::MaxNorm) {
      double peak = 0.0;
      for (std::size_t z = 0; z < relaxed.size(); ++z) {
        for (Index i : relaxed[z].items) peak = std::max(peak, std::abs(grads[z][i]));
      }
      if (peak > 0.0) step_lr = lr / peak;
    }
    for (std::size_t z = 0; z < relaxed.size(); ++z) {
      auto& user = relaxed[z];
      if (!projected_step(user.x, user.items, grads[z], step_lr, lo, hi)) {
        throw NumericalError("non-finite relaxed rating at PGD step " + std::to_string(step));
      }
      user.k = solve_user_vector(q, user.x, user.items, model.lambda);
      if (!user.k.allFinite()) throw NumericalError("non-finite antidote vector at PGD step " + std::to_string(step));
    }
  }
  if (trace != nullptr) {
    ctx.refresh(relaxed);
    trace->objective.push_back(combined_objective(cfg, group_item_stats(ctx.relaxed_model(), ds)));
  }
}

RelaxedAntidote optimize_user(const RatingDataset& ds, const FactorModel& model, const AntidoteConfig& cfg, Index z,
                              PgdTrace* trace) {
  std::vector<Index> all(static_cast<std::size_t>(ds.num_items()));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<RelaxedAntidote> relaxed{new_relaxed_user(ds, cfg, model.dim(), z, std::move(all))};
  run_pgd(ds, model, relaxed, cfg, trace);
  return std::move(relaxed.front());
}

AntidoteUser round_and_select(const Vector& x, Index n, const RatingScale& scale, FillerRanking ranking) {
  const Index m = x.size();
  const double mid = scale.midpoint();
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  auto key = [&](Index i) { return ranking == FillerRanking::Absolute ? std::abs(x[i]) : std::abs(x[i] - mid); };
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return key(a) > key(b); });
  order.resize(static_cast<std::size_t>(std::min(n, m)));
  std::sort(order.begin(), order.end());

  AntidoteUser user;
  user.relaxed.assign(x.data(), x.data() + m);
  user.fillers = order;
  user.ratings.reserve(order.size());
  for (Index i : order) user.ratings.push_back(scale.nearest(x[i]));
  return user;
}

std::vector<AntidoteUser> generate(const RatingDataset& ds, const AntidoteConfig& cfg, const TrainConfig& train_cfg,
                                   const FactorModel* initial, GenerateTrace* trace) {
  cfg.validate(ds.num_items());
  const Index count = antidote_count(cfg.alpha_frac, ds.num_original_users());
  if (trace != nullptr) trace->users.clear();

  FactorModel model = initial != nullptr ? *initial : train(ds, train_cfg);
  RatingDataset working = ds;
  std::vector<AntidoteUser> users;
  for (Index z = 0; z < count; ++z) {
    if (z > 0) {
      FactorModel warm = extend_for_antidote(model, working);
      model = train(working, train_cfg, &warm);
    }
    PgdTrace pgd;
    RelaxedAntidote relaxed = optimize_user(working, model, cfg, z, trace != nullptr ? &pgd : nullptr);
    AntidoteUser user = round_and_select(relaxed.x, cfg.n_filler, ds.scale(), cfg.ranking);
    user.z = z;
    working = inject_antidote(working, std::span<const AntidoteUser>(&user, 1));
    users.push_back(std::move(user));
    if (trace != nullptr) trace->users.push_back(std::move(pgd));
  }
  if (trace != nullptr) {
    FactorModel warm = extend_for_antidote(model, working);
    trace->final_model = train(working, train_cfg, &warm);
  }
  return users;
}

}  // namespace fairmf
