#include "fairmf/factorization.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <Eigen/Cholesky>

#include "fairmf/error.hpp"

namespace fairmf {

namespace {

// Accumulates lambda*I + sum v v^T and sum r v for one ridge row solve.
class RidgeAccumulator {
 public:
  RidgeAccumulator(int d, double lambda) : gram_(d, d), rhs_(d), lambda_(lambda) { reset(); }

  void reset() {
    gram_.setZero();
    gram_.diagonal().setConstant(lambda_);
    rhs_.setZero();
  }

  template <typename Row>
  void add(const Row& v, double r) {
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(v.transpose());
    rhs_.noalias() += r * v.transpose();
  }

  Vector solve() const { return gram_.selfadjointView<Eigen::Lower>().llt().solve(rhs_); }

 private:
  Eigen::MatrixXd gram_;
  Vector rhs_;
  double lambda_;
};

Matrix gaussian(Index rows, int cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

void check_shapes(const RatingDataset& ds, const FactorModel& model) {
  if (model.P.rows() != ds.num_original_users() || model.K.rows() != ds.num_antidote_users() ||
      model.Q.rows() != ds.num_items()) {
    throw ValidationError("model shape does not match dataset (" + std::to_string(model.P.rows()) + "+" +
                          std::to_string(model.K.rows()) + " users, " + std::to_string(model.Q.rows()) +
                          " items vs " + std::to_string(ds.num_original_users()) + "+" +
                          std::to_string(ds.num_antidote_users()) + ", " + std::to_string(ds.num_items()) + ")");
  }
  if (model.P.cols() != model.Q.cols() || (model.K.rows() > 0 && model.K.cols() != model.Q.cols())) {
    throw ValidationError("model latent dimensions disagree");
  }
}

void sweep_users(const RatingDataset& ds, FactorModel& model, RidgeAccumulator& acc) {
  for (Index u = 0; u < ds.num_users(); ++u) {
    acc.reset();
    for (const auto& nb : ds.user_ratings(u)) acc.add(model.Q.row(nb.index), nb.rating);
    Vector p = acc.solve();
    if (u < model.P.rows()) {
      model.P.row(u) = p.transpose();
    } else {
      model.K.row(u - model.P.rows()) = p.transpose();
    }
  }
}

void sweep_items(const RatingDataset& ds, FactorModel& model, RidgeAccumulator& acc) {
  for (Index i = 0; i < ds.num_items(); ++i) {
    acc.reset();
    for (const auto& nb : ds.item_ratings(i)) acc.add(model.user_vector(nb.index), nb.rating);
    model.Q.row(i) = acc.solve().transpose();
  }
}

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated model checkpoint");
  return value;
}

constexpr std::array<char, 8> kMagic{'F', 'A', 'I', 'R', 'M', 'F', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void TrainConfig::validate() const {
  if (d < 1) throw ValidationError("latent dimension d must be >= 1");
  if (!(lambda > 0.0)) throw ValidationError("lambda must be > 0");
  if (!(tol > 0.0)) throw ValidationError("tol must be > 0");
  if (max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
  if (!(init_std >= 0.0)) throw ValidationError("init_std must be >= 0");
}

bool operator==(const FactorModel& a, const FactorModel& b) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
  };
  return a.lambda == b.lambda && same(a.P, b.P) && same(a.Q, b.Q) && same(a.K, b.K);
}

double objective(const RatingDataset& ds, const FactorModel& model, std::span<const RelaxedAntidote> relaxed) {
  double loss = 0.0;
  for (const auto& e : ds.entries()) {
    double err = e.value - model.user_vector(e.user).dot(model.Q.row(e.item));
    loss += err * err;
  }
  double reg = model.P.squaredNorm() + model.Q.squaredNorm() + model.K.squaredNorm();
  for (const auto& z : relaxed) {
    for (Index i : z.items) {
      double err = z.x[i] - model.Q.row(i).dot(z.k);
      loss += err * err;
    }
    reg += z.k.squaredNorm();
  }
  return loss + model.lambda * reg;
}

FactorModel train(const RatingDataset& ds, const TrainConfig& cfg, const FactorModel* warm_start,
                  TrainTrace* trace) {
  cfg.validate();
  FactorModel model;
  if (warm_start != nullptr) {
    check_shapes(ds, *warm_start);
    if (warm_start->dim() != cfg.d) throw ValidationError("warm start dimension differs from config");
    model = *warm_start;
    model.lambda = cfg.lambda;
  } else {
    std::mt19937_64 rng(cfg.seed);
    model.P = gaussian(ds.num_original_users(), cfg.d, cfg.init_std, rng);
    model.Q = gaussian(ds.num_items(), cfg.d, cfg.init_std, rng);
    model.K = gaussian(ds.num_antidote_users(), cfg.d, cfg.init_std, rng);
    model.lambda = cfg.lambda;
  }

  RidgeAccumulator acc(cfg.d, cfg.lambda);
  double prev = objective(ds, model);
  if (!std::isfinite(prev)) throw NumericalError("non-finite objective at initialization");
  if (trace != nullptr) {
    trace->objective.assign(1, prev);
    trace->sweeps = 0;
  }

  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    sweep_users(ds, model, acc);
    sweep_items(ds, model, acc);
    double cur = objective(ds, model);
    if (!std::isfinite(cur)) throw NumericalError("non-finite objective after sweep " + std::to_string(sweep));
    if (trace != nullptr) {
      trace->objective.push_back(cur);
      trace->sweeps = sweep;
    }
    bool converged = prev <= 0.0 || (prev - cur) / prev < cfg.tol;
    prev = cur;
    if (converged) break;
  }
  return model;
}

FactorModel extend_for_antidote(const FactorModel& model, const RatingDataset& ds) {
  if (model.P.rows() != ds.num_original_users() || model.Q.rows() != ds.num_items() ||
      model.K.rows() > ds.num_antidote_users()) {
    throw ValidationError("model cannot be extended to this dataset");
  }
  FactorModel out = model;
  const Index have = model.K.rows();
  out.K.conservativeResize(ds.num_antidote_users(), model.dim());
  RidgeAccumulator acc(model.dim(), model.lambda);
  for (Index a = have; a < ds.num_antidote_users(); ++a) {
    acc.reset();
    for (const auto& nb : ds.user_ratings(ds.num_original_users() + a)) acc.add(model.Q.row(nb.index), nb.rating);
    out.K.row(a) = acc.solve().transpose();
  }
  return out;
}

Vector solve_item_vector(const RatingDataset& ds, const FactorModel& model, Index item,
                         std::span<const RelaxedAntidote> relaxed) {
  RidgeAccumulator acc(model.dim(), model.lambda);
  for (const auto& nb : ds.item_ratings(item)) acc.add(model.user_vector(nb.index), nb.rating);
  for (const auto& z : relaxed) {
    if (std::binary_search(z.items.begin(), z.items.end(), item)) acc.add(z.k.transpose(), z.x[item]);
  }
  return acc.solve();
}

Vector solve_user_vector(const Matrix& Q, const Vector& x, std::span<const Index> items, double lambda) {
  RidgeAccumulator acc(static_cast<int>(Q.cols()), lambda);
  for (Index i : items) acc.add(Q.row(i), x[i]);
  return acc.solve();
}

double predict(const FactorModel& model, Index u, Index i) {
  return model.user_vector(u).dot(model.Q.row(i));
}

double rmse(const FactorModel& model, std::span<const Rating> entries) {
  if (entries.empty()) throw ValidationError("RMSE over an empty entry set");
  double sum = 0.0;
  for (const auto& e : entries) {
    double err = e.value - predict(model, e.user, e.item);
    sum += err * err;
  }
  return std::sqrt(sum / static_cast<double>(entries.size()));
}

StationarityResidual stationarity_residual(const RatingDataset& ds, const FactorModel& model) {
  StationarityResidual res;
  for (Index u = 0; u < ds.num_users(); ++u) {
    Vector r = model.lambda * model.user_vector(u).transpose();
    for (const auto& nb : ds.user_ratings(u)) {
      double err = nb.rating - model.user_vector(u).dot(model.Q.row(nb.index));
      r -= err * model.Q.row(nb.index).transpose();
    }
    double& slot = ds.is_antidote(u) ? res.max_antidote : res.max_user;
    slot = std::max(slot, r.norm());
  }
  for (Index i = 0; i < ds.num_items(); ++i) {
    Vector r = model.lambda * model.Q.row(i).transpose();
    for (const auto& nb : ds.item_ratings(i)) {
      double err = nb.rating - model.user_vector(nb.index).dot(model.Q.row(i));
      r -= err * model.user_vector(nb.index).transpose();
    }
    res.max_item = std::max(res.max_item, r.norm());
  }
  return res;
}

void save_model(const std::filesystem::path& path, const FactorModel& model) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::int32_t>(model.dim()));
  write_pod(out, model.lambda);
  for (const Matrix* m : {&model.P, &model.Q, &model.K}) {
    write_pod(out, static_cast<std::int64_t>(m->rows()));
    write_pod(out, static_cast<std::int64_t>(m->cols()));
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m->size())));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

FactorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ParseError("not a model checkpoint: " + path.string());
  if (read_pod<std::uint32_t>(in) != kVersion) throw ParseError("unsupported checkpoint version");
  auto d = read_pod<std::int32_t>(in);
  FactorModel model;
  model.lambda = read_pod<double>(in);
  for (Matrix* m : {&model.P, &model.Q, &model.K}) {
    auto rows = read_pod<std::int64_t>(in);
    auto cols = read_pod<std::int64_t>(in);
    if (rows < 0 || (cols != d && !(rows == 0 && cols == 0))) throw ParseError("corrupt checkpoint shape header");
    m->resize(rows, cols);
    in.read(reinterpret_cast<char*>(m->data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m->size())));
    if (!in) throw IoError("truncated model checkpoint");
  }
  return model;
}

}  // namespace fairmf
