#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fairmf/data.hpp"
#include "fairmf/factorization.hpp"
#include "fairmf/metrics.hpp"

namespace fairmf {

enum class InitMode { Midpoint, Uniform };
enum class FillerRanking { Absolute, FromMidpoint };
// Raw: x -= lr * g. MaxNorm: x -= lr * g / max|g|, so lr bounds the per-step move.
enum class StepScaling { Raw, MaxNorm };

struct AntidoteConfig {
  double alpha_frac = 0.02;
  Index n_filler = 200;
  int pgd_steps = 50;
  std::optional<double> pgd_lr;         // default 0.01 * (r_max - r_min)
  std::optional<double> init_rating;    // default scale midpoint
  InitMode init_mode = InitMode::Midpoint;
  FillerRanking ranking = FillerRanking::Absolute;
  StepScaling scaling = StepScaling::MaxNorm;
  std::vector<MetricKind> metrics{MetricKind::Value};
  double weight_a = 1.0;
  double weight_b = 1.0;
  bool deflect = true;  // two-metric runs only
  ItemNormalization norm = ItemNormalization::ValidItems;
  std::uint64_t seed = 0;

  void validate(Index num_items) const;
  double learning_rate(const RatingScale& scale) const;
  double initial_rating(const RatingScale& scale) const;
};

// floor(alpha * |U|) antidote users for |U| original users.
Index antidote_count(double alpha_frac, Index num_original_users);

// Per-step objective of one PGD run. objective[s] is the target (weighted sum
// for two metrics) evaluated with the frozen-user item vectors at the start of
// step s; the last entry is the value after the final step.
struct PgdTrace {
  std::vector<double> objective;
};

// x[i] -= lr * grad[i] on `items`, clipped onto [lo, hi]. Returns false on a
// non-finite step, leaving the remaining coordinates untouched.
bool projected_step(Vector& x, std::span<const Index> items, const Vector& grad, double lr, double lo, double hi);

// Projected gradient descent over the relaxed ratings of every user in
// `relaxed`, jointly. Each step recomputes item vectors with all user vectors
// frozen, takes a step on x restricted to each user's items, clips onto
// [r_min, r_max], then refits each k_z against the current item vectors.
void run_pgd(const RatingDataset& ds, const FactorModel& model, std::vector<RelaxedAntidote>& relaxed,
             const AntidoteConfig& cfg, PgdTrace* trace = nullptr);

// A fresh antidote user over all items, with x at the configured start and a
// seeded small Gaussian latent vector.
RelaxedAntidote new_relaxed_user(const RatingDataset& ds, const AntidoteConfig& cfg, int d, Index z,
                                 std::vector<Index> items, double init_std = 0.1);

// Optimizes one new antidote user against a model trained on `ds`.
RelaxedAntidote optimize_user(const RatingDataset& ds, const FactorModel& model, const AntidoteConfig& cfg,
                              Index z, PgdTrace* trace = nullptr);

// Keeps the n largest |x_i| (ties by ascending index) and rounds each onto the
// allowed ratings, exact midpoints going toward r_max.
AntidoteUser round_and_select(const Vector& x, Index n, const RatingScale& scale,
                              FillerRanking ranking = FillerRanking::Absolute);

struct GenerateTrace {
  std::vector<PgdTrace> users;
  FactorModel final_model;  // trained on ds plus every committed user
};

// Sequential injection: retrain, optimize one user, round, commit, repeat.
// `initial` may carry a model already trained on ds to skip the first fit.
std::vector<AntidoteUser> generate(const RatingDataset& ds, const AntidoteConfig& cfg, const TrainConfig& train_cfg,
                                   const FactorModel* initial = nullptr, GenerateTrace* trace = nullptr);

// Combined descent direction for two metrics. Conflicting gradients (negative
// inner product) are each projected onto the other's normal plane first.
Vector deflected_gradient(const Vector& g1, const Vector& g2, double a, double b);

}  // namespace fairmf
