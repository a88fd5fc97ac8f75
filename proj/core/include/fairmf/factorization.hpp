#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fairmf/data.hpp"

namespace fairmf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct TrainConfig {
  int d = 8;
  double lambda = 0.1;
  int max_sweeps = 100;
  double tol = 1e-6;  // relative objective decrease
  double init_std = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Latent factors. P holds original users, K holds antidote users (dataset
// rows past num_original_users), Q holds items. Rows are d-dimensional.
struct FactorModel {
  Matrix P;
  Matrix Q;
  Matrix K;
  double lambda = 0.1;

  int dim() const { return static_cast<int>(Q.cols()); }
  Index num_users() const { return P.rows() + K.rows(); }

  // Latent vector of dataset user u, original or antidote.
  Eigen::Ref<const Eigen::RowVectorXd> user_vector(Index u) const {
    return u < P.rows() ? P.row(u) : K.row(u - P.rows());
  }

  friend bool operator==(const FactorModel& a, const FactorModel& b);
};

// An antidote user whose ratings are still continuous. It rates `items` with
// values x[i] and has latent vector k; the rest of x is ignored.
struct RelaxedAntidote {
  Vector k;
  Vector x;                  // length |I|
  std::vector<Index> items;  // ascending
};

struct TrainTrace {
  std::vector<double> objective;  // [initial, after sweep 1, ...]
  int sweeps = 0;
};

// Alternating ridge solves on the regularized squared loss; antidote rows of
// `ds` are fitted through K. Warm start must match ds in shape.
FactorModel train(const RatingDataset& ds, const TrainConfig& cfg, const FactorModel* warm_start = nullptr,
                  TrainTrace* trace = nullptr);

// Extends `model` with K rows for antidote users of `ds` that it does not
// cover yet, each fitted by a ridge solve against the current Q.
FactorModel extend_for_antidote(const FactorModel& model, const RatingDataset& ds);

// Squared loss over Omega plus lambda times the squared Frobenius norms, with
// optional relaxed antidote terms.
double objective(const RatingDataset& ds, const FactorModel& model,
                 std::span<const RelaxedAntidote> relaxed = {});

// q_i that minimizes the objective with every user vector held fixed.
Vector solve_item_vector(const RatingDataset& ds, const FactorModel& model, Index item,
                         std::span<const RelaxedAntidote> relaxed = {});

// Ridge solve for one user vector against fixed item vectors.
Vector solve_user_vector(const Matrix& Q, const Vector& x, std::span<const Index> items, double lambda);

double predict(const FactorModel& model, Index u, Index i);

double rmse(const FactorModel& model, std::span<const Rating> entries);

// Per-row stationarity residual norms, users first then items.
struct StationarityResidual {
  double max_user = 0.0;
  double max_antidote = 0.0;
  double max_item = 0.0;
};
StationarityResidual stationarity_residual(const RatingDataset& ds, const FactorModel& model);

// Binary checkpoint: magic, version, d, lambda, then P, Q, K as shape headers
// followed by row-major little-endian doubles.
void save_model(const std::filesystem::path& path, const FactorModel& model);
FactorModel load_model(const std::filesystem::path& path);

}  // namespace fairmf
