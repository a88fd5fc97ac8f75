#pragma once

#include <span>
#include <vector>

#include <Eigen/Cholesky>

#include "fairmf/data.hpp"
#include "fairmf/factorization.hpp"
#include "fairmf/metrics.hpp"

namespace fairmf {

// Nonzero coordinate of d rhat_ui / d x_z. All other coordinates are zero.
struct SparseCoordinate {
  Index item = 0;
  double value = 0.0;
};

// Jacobian of item vectors with respect to relaxed antidote ratings, taken
// from the item-side stationarity condition with every user vector frozen:
//
//   dq_i / dx_zi = (sum_{u in U_i} p_u p_u^T + sum_z k_z k_z^T + lambda I)^{-1} k_z
//
// and dq_i / dx_zj = 0 for j != i, dp_u / dx_z = 0.
//
// Built against one (dataset, model) pair; construct a new context after a
// retrain. refresh() must be called whenever any k_z or x_z changes.
class InfluenceContext {
 public:
  InfluenceContext(const RatingDataset& ds, const FactorModel& model);

  void refresh(std::span<const RelaxedAntidote> relaxed);

  Index num_relaxed() const { return static_cast<Index>(dq_.size()); }

  Vector dq_dx(Index item, Index z) const;
  SparseCoordinate drhat_dx(Index u, Index item, Index z) const;

  // Item vectors at the current relaxed ratings, P and K held fixed.
  Matrix item_vectors() const { return item_vectors_; }

  // The model with Q replaced by item_vectors().
  FactorModel relaxed_model() const;

  // Gradient of a metric with respect to x_z (length |I|, zero off z's items).
  Vector unfairness_gradient(MetricKind kind, const GroupItemStats& stats, Index z,
                             ItemNormalization norm = ItemNormalization::ValidItems) const;

 private:
  const RatingDataset* ds_;
  FactorModel model_;
  std::vector<Eigen::MatrixXd> base_gram_;  // sum p p^T + lambda I per item
  Matrix base_rhs_;                         // sum r p per item
  Matrix sum_p_d_;                          // sum of p_u over D_i per item
  Matrix sum_p_a_;                          // sum of p_u over A_i per item
  std::vector<Matrix> dq_;                  // per relaxed user: |I| x d, zero rows off its items
  Matrix item_vectors_;
};

}  // namespace fairmf
