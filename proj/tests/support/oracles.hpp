#pragma once

// Reference implementations used only by tests. They share no code with the
// library beyond the data containers: metrics are recomputed by scanning every
// entry per item, and item vectors by an explicit normal-equation solve.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fairmf/data.hpp"
#include "fairmf/factorization.hpp"
#include "fairmf/metrics.hpp"

namespace oracle {

using fairmf::Index;
using fairmf::MetricKind;
using fairmf::UserGroup;

struct Entry {
  Index user;
  Index item;
  double rating;
  double pred;
  UserGroup group;
};

inline double dot_rows(const fairmf::Matrix& a, Index ra, const fairmf::Matrix& b, Index rb) {
  double s = 0.0;
  for (Index c = 0; c < a.cols(); ++c) s += a(ra, c) * b(rb, c);
  return s;
}

inline std::vector<Entry> entries_of(const fairmf::FactorModel& model, const fairmf::RatingDataset& ds) {
  fairmf::Matrix users(model.num_users(), model.dim());
  for (Index u = 0; u < model.num_users(); ++u) users.row(u) = model.user_vector(u);
  std::vector<Entry> out;
  for (const auto& r : ds.entries()) {
    out.push_back({r.user, r.item, static_cast<double>(r.value), dot_rows(users, r.user, model.Q, r.item),
                   ds.group(r.user)});
  }
  return out;
}

struct ItemErrors {
  bool valid = false;
  double ed = 0.0;
  double ea = 0.0;
};

inline std::vector<ItemErrors> item_errors(const std::vector<Entry>& entries, Index num_items) {
  std::vector<ItemErrors> out(static_cast<std::size_t>(num_items));
  for (Index i = 0; i < num_items; ++i) {
    double pd = 0, td = 0, pa = 0, ta = 0;
    int nd = 0, na = 0;
    for (const auto& e : entries) {
      if (e.item != i) continue;
      if (e.group == UserGroup::Disadvantaged) {
        pd += e.pred;
        td += e.rating;
        ++nd;
      } else if (e.group == UserGroup::Advantaged) {
        pa += e.pred;
        ta += e.rating;
        ++na;
      }
    }
    auto& o = out[static_cast<std::size_t>(i)];
    o.valid = nd > 0 && na > 0;
    if (o.valid) {
      o.ed = pd / nd - td / nd;
      o.ea = pa / na - ta / na;
    }
  }
  return out;
}

inline double metric(MetricKind kind, const std::vector<Entry>& entries, Index num_items, bool all_items = false) {
  if (kind == MetricKind::NonParity) {
    double sd = 0, sa = 0;
    int nd = 0, na = 0;
    for (const auto& e : entries) {
      if (e.group == UserGroup::Disadvantaged) {
        sd += e.pred;
        ++nd;
      } else if (e.group == UserGroup::Advantaged) {
        sa += e.pred;
        ++na;
      }
    }
    return std::abs(sd / nd - sa / na);
  }
  double sum = 0.0;
  int valid = 0;
  for (const auto& it : item_errors(entries, num_items)) {
    if (!it.valid) continue;
    ++valid;
    switch (kind) {
      case MetricKind::Value: sum += std::abs(it.ed - it.ea); break;
      case MetricKind::Absolute: sum += std::abs(std::abs(it.ed) - std::abs(it.ea)); break;
      case MetricKind::Overestimation: sum += std::abs(std::max(0.0, it.ed) - std::max(0.0, it.ea)); break;
      default: break;
    }
  }
  return sum / (all_items ? static_cast<double>(num_items) : static_cast<double>(valid));
}

inline double metric(MetricKind kind, const fairmf::FactorModel& model, const fairmf::RatingDataset& ds,
                     bool all_items = false) {
  return metric(kind, entries_of(model, ds), ds.num_items(), all_items);
}

// Smallest magnitude among the arguments of sign() and max(0, .) that the
// metric's subgradient depends on.
inline double kink_margin(MetricKind kind, const std::vector<Entry>& entries, Index num_items) {
  double margin = 1e300;
  if (kind == MetricKind::NonParity) {
    double sd = 0, sa = 0;
    int nd = 0, na = 0;
    for (const auto& e : entries) {
      if (e.group == UserGroup::Disadvantaged) { sd += e.pred; ++nd; }
      if (e.group == UserGroup::Advantaged) { sa += e.pred; ++na; }
    }
    return std::abs(sd / nd - sa / na);
  }
  for (const auto& it : item_errors(entries, num_items)) {
    if (!it.valid) continue;
    switch (kind) {
      case MetricKind::Value: margin = std::min(margin, std::abs(it.ed - it.ea)); break;
      case MetricKind::Absolute:
        margin = std::min({margin, std::abs(it.ed), std::abs(it.ea), std::abs(std::abs(it.ed) - std::abs(it.ea))});
        break;
      case MetricKind::Overestimation:
        margin = std::min({margin, std::abs(it.ed), std::abs(it.ea)});
        if (it.ed > 0 || it.ea > 0) margin = std::min(margin, std::abs(std::max(0.0, it.ed) - std::max(0.0, it.ea)));
        break;
      default: break;
    }
  }
  return margin;
}

// q_i from the item normal equations with every user vector fixed, built and
// solved directly.
inline Eigen::VectorXd item_vector(const fairmf::RatingDataset& ds, const fairmf::FactorModel& model, Index item,
                                   const std::vector<fairmf::RelaxedAntidote>& relaxed) {
  const int d = model.dim();
  Eigen::MatrixXd m = model.lambda * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (const auto& r : ds.entries()) {
    if (r.item != item) continue;
    Eigen::VectorXd p = model.user_vector(r.user).transpose();
    m += p * p.transpose();
    b += r.value * p;
  }
  for (const auto& z : relaxed) {
    if (!std::binary_search(z.items.begin(), z.items.end(), item)) continue;
    m += z.k * z.k.transpose();
    b += z.x[item] * z.k;
  }
  return m.fullPivLu().solve(b);
}

inline fairmf::FactorModel relaxed_model(const fairmf::RatingDataset& ds, const fairmf::FactorModel& model,
                                         const std::vector<fairmf::RelaxedAntidote>& relaxed) {
  fairmf::FactorModel out = model;
  for (Index i = 0; i < ds.num_items(); ++i) out.Q.row(i) = item_vector(ds, model, i, relaxed).transpose();
  return out;
}

// Central differences of the metric in x_z with P and every k frozen.
inline Eigen::VectorXd fd_gradient(MetricKind kind, const fairmf::RatingDataset& ds, const fairmf::FactorModel& model,
                                   std::vector<fairmf::RelaxedAntidote> relaxed, std::size_t z, double h) {
  const fairmf::FactorModel base = relaxed_model(ds, model, relaxed);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(ds.num_items());
  for (Index i : relaxed[z].items) {
    const double x0 = relaxed[z].x[i];
    fairmf::FactorModel plus = base;
    fairmf::FactorModel minus = base;
    relaxed[z].x[i] = x0 + h;
    plus.Q.row(i) = item_vector(ds, model, i, relaxed).transpose();
    relaxed[z].x[i] = x0 - h;
    minus.Q.row(i) = item_vector(ds, model, i, relaxed).transpose();
    relaxed[z].x[i] = x0;
    g[i] = (metric(kind, plus, ds) - metric(kind, minus, ds)) / (2.0 * h);
  }
  return g;
}

// Random dataset with both groups present, ratings on `scale`.
inline fairmf::RatingDataset random_dataset(std::mt19937_64& rng, Index users, Index items, double density,
                                            const fairmf::RatingScale& scale) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, scale.allowed.size() - 1);
  std::vector<fairmf::Rating> entries;
  for (Index u = 0; u < users; ++u) {
    for (Index i = 0; i < items; ++i) {
      if (unit(rng) < density) entries.push_back({u, i, scale.allowed[pick(rng)]});
    }
  }
  std::vector<UserGroup> groups(static_cast<std::size_t>(users));
  for (Index u = 0; u < users; ++u) {
    groups[static_cast<std::size_t>(u)] = unit(rng) < 0.5 ? UserGroup::Disadvantaged : UserGroup::Advantaged;
  }
  groups[0] = UserGroup::Disadvantaged;
  groups[1] = UserGroup::Advantaged;
  return fairmf::RatingDataset(users, items, std::move(entries), std::move(groups), scale);
}

inline fairmf::Matrix gaussian(std::mt19937_64& rng, Index rows, Index cols, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  fairmf::Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = n(rng);
  return m;
}

}  // namespace oracle
