#include "fairmf/influence.hpp"

#include "fairmf/error.hpp"

namespace fairmf {

InfluenceContext::InfluenceContext(const RatingDataset& ds, const FactorModel& model)
    : ds_(&ds), model_(model) {
  const int d = model.dim();
  const Index n = ds.num_items();
  base_gram_.assign(static_cast<std::size_t>(n), Eigen::MatrixXd());
  base_rhs_ = Matrix::Zero(n, d);
  sum_p_d_ = Matrix::Zero(n, d);
  sum_p_a_ = Matrix::Zero(n, d);
  for (Index i = 0; i < n; ++i) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    gram.diagonal().setConstant(model.lambda);
    for (const auto& nb : ds.item_ratings(i)) {
      auto p = model.user_vector(nb.index);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(p.transpose());
      base_rhs_.row(i) += nb.rating * p;
      switch (ds.group(nb.index)) {
        case UserGroup::Disadvantaged: sum_p_d_.row(i) += p; break;
        case UserGroup::Advantaged: sum_p_a_.row(i) += p; break;
        case UserGroup::None: break;
      }
    }
    base_gram_[static_cast<std::size_t>(i)] = std::move(gram);
  }
  refresh({});
}

void InfluenceContext::refresh(std::span<const RelaxedAntidote> relaxed) {
  const int d = model_.dim();
  const Index n = ds_->num_items();
  std::vector<std::vector<char>> rates(relaxed.size(), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (std::size_t z = 0; z < relaxed.size(); ++z) {
    if (relaxed[z].k.size() != d || relaxed[z].x.size() != n) {
      throw ValidationError("relaxed antidote user has the wrong shape");
    }
    for (Index i : relaxed[z].items) {
      if (i < 0 || i >= n) throw ValidationError("relaxed antidote item out of range");
      rates[z][static_cast<std::size_t>(i)] = 1;
    }
  }

  dq_.assign(relaxed.size(), Matrix::Zero(n, d));
  item_vectors_.resize(n, d);
  Eigen::MatrixXd gram(d, d);
  Vector rhs(d);
  for (Index i = 0; i < n; ++i) {
    gram = base_gram_[static_cast<std::size_t>(i)];
    rhs = base_rhs_.row(i).transpose();
    for (std::size_t z = 0; z < relaxed.size(); ++z) {
      if (!rates[z][static_cast<std::size_t>(i)]) continue;
      gram.selfadjointView<Eigen::Lower>().rankUpdate(relaxed[z].k);
      rhs += relaxed[z].x[i] * relaxed[z].k;
    }
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
    item_vectors_.row(i) = llt.solve(rhs).transpose();
    for (std::size_t z = 0; z < relaxed.size(); ++z) {
      if (rates[z][static_cast<std::size_t>(i)]) dq_[z].row(i) = llt.solve(relaxed[z].k).transpose();
    }
  }
}

Vector InfluenceContext::dq_dx(Index item, Index z) const {
  return dq_.at(static_cast<std::size_t>(z)).row(item).transpose();
}

SparseCoordinate InfluenceContext::drhat_dx(Index u, Index item, Index z) const {
  return {item, model_.user_vector(u).dot(dq_.at(static_cast<std::size_t>(z)).row(item))};
}

FactorModel InfluenceContext::relaxed_model() const {
  FactorModel m = model_;
  m.Q = item_vectors_;
  return m;
}

Vector InfluenceContext::unfairness_gradient(MetricKind kind, const GroupItemStats& stats, Index z,
                                             ItemNormalization norm) const {
  const auto& dq = dq_.at(static_cast<std::size_t>(z));
  const PredictionSensitivity sens = prediction_sensitivity(kind, stats, norm);
  const Index n = ds_->num_items();
  Vector g = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    auto k = static_cast<std::size_t>(i);
    // Sum over raters of dM/d rhat_ui * p_u, i.e. the per-group mean of p_u
    // weighted by the group's coefficient.
    double acc = 0.0;
    if (stats.count_d[k] > 0 && sens.coef_d[k] != 0.0) {
      acc += sens.coef_d[k] / static_cast<double>(stats.count_d[k]) * sum_p_d_.row(i).dot(dq.row(i));
    }
    if (stats.count_a[k] > 0 && sens.coef_a[k] != 0.0) {
      acc += sens.coef_a[k] / static_cast<double>(stats.count_a[k]) * sum_p_a_.row(i).dot(dq.row(i));
    }
    g[i] = acc;
  }
  return g;
}

}  // namespace fairmf
