#include "fairmf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fairmf/error.hpp"

namespace fairmf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Shortest text that parses back to the same double.
std::string exact(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string join_targets(const std::vector<MetricKind>& targets) {
  std::string out;
  for (MetricKind k : targets) {
    if (!out.empty()) out += '+';
    out += to_string(k);
  }
  return out;
}

struct Scores {
  std::array<double, 4> metrics{};
  double rmse = 0.0;
};

Scores score(const FactorModel& model, const RatingDataset& ds, const std::vector<MetricKind>& eval,
             ItemNormalization norm) {
  Scores s;
  s.metrics.fill(std::numeric_limits<double>::quiet_NaN());
  const GroupItemStats stats = group_item_stats(model, ds);
  for (MetricKind k : eval) s.metrics[metric_slot(k)] = unfairness(k, stats, norm);
  const std::vector<Rating> original = ds.original_entries();
  s.rmse = rmse(model, original);
  return s;
}

RatingDataset build_dataset(const ExperimentSpec& spec, std::uint64_t seed) {
  if (spec.synthetic) {
    SyntheticConfig cfg = *spec.synthetic;
    cfg.seed = seed;
    return generate_synthetic(cfg);
  }
  const FileSource& f = *spec.files;
  RatingDataset ds = load_groups(f.groups, load_ratings(f.ratings, f.scale));
  if (!f.item_groups.empty()) ds = load_item_groups(f.item_groups, ds);
  return ds;
}

FactorModel retrain_with(const RatingDataset& augmented, const FactorModel& base, const TrainConfig& cfg) {
  FactorModel warm = extend_for_antidote(base, augmented);
  return train(augmented, cfg, &warm);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::None: return "none";
    case Method::Optimized: return "optimized";
    case Method::Regularization: return "regularization";
    case Method::Maximum: return "maximum";
    case Method::Minimum: return "minimum";
    case Method::Random: return "random";
    case Method::BatchOptimized: return "batch";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::None, Method::Optimized, Method::Regularization, Method::Maximum, Method::Minimum,
                   Method::Random, Method::BatchOptimized}) {
    if (to_string(m) == name) return m;
  }
  if (name == "max") return Method::Maximum;
  if (name == "min") return Method::Minimum;
  if (name == "batch-optimized") return Method::BatchOptimized;
  throw ValidationError("unknown method '" + std::string(name) +
                        "' (expected none, optimized, regularization, maximum, minimum, random or batch)");
}

std::size_t metric_slot(MetricKind kind) {
  for (std::size_t s = 0; s < kAllMetrics.size(); ++s) {
    if (kAllMetrics[s] == kind) return s;
  }
  throw ValidationError("unknown metric");
}

void ExperimentSpec::validate() const {
  if (synthetic.has_value() == files.has_value()) {
    throw ValidationError("an experiment needs exactly one dataset source");
  }
  if (synthetic) synthetic->validate();
  if (targets.empty() || targets.size() > 2) throw ValidationError("an experiment takes one or two target metrics");
  if (targets.size() == 2 && targets[0] == targets[1]) throw ValidationError("the two target metrics must differ");
  if (eval_metrics.empty()) throw ValidationError("evaluation metric list is empty");
  if (fractions.empty()) throw ValidationError("fraction list is empty");
  for (double f : fractions) {
    if (!(f >= 0.0 && f < 1.0)) throw ValidationError("antidote fractions must lie in [0, 1)");
  }
  for (Index n : filler_counts) {
    if (n < 1) throw ValidationError("filler counts must be >= 1");
  }
  if (trials < 1) throw ValidationError("trials must be >= 1");
  train.validate();
  regularization.validate();
}

std::uint64_t trial_seed(std::uint64_t base, int trial) {
  return base + static_cast<std::uint64_t>(trial);
}

std::vector<Aggregate> aggregate_rows(const std::vector<ExperimentRow>& rows) {
  std::vector<Aggregate> out;
  std::vector<std::vector<const ExperimentRow*>> members;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) {
      return a.method == row.method && a.fraction == row.fraction && a.n_filler == row.n_filler;
    });
    std::size_t slot = static_cast<std::size_t>(it - out.begin());
    if (it == out.end()) {
      Aggregate a;
      a.method = row.method;
      a.fraction = row.fraction;
      a.n_filler = row.n_filler;
      out.push_back(a);
      members.emplace_back();
    }
    if (row.ok) members[slot].push_back(&row);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    Aggregate& a = out[g];
    const auto& rs = members[g];
    a.trials = static_cast<int>(rs.size());
    if (rs.empty()) {
      a.before_mean.fill(std::numeric_limits<double>::quiet_NaN());
      a.after_mean.fill(std::numeric_limits<double>::quiet_NaN());
      a.after_std.fill(std::numeric_limits<double>::quiet_NaN());
      a.rmse_before_mean = a.rmse_after_mean = a.rmse_after_std = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double n = static_cast<double>(rs.size());
    auto mean_std = [&](auto get, double& mean, double* sd) {
      double sum = 0.0;
      for (const auto* r : rs) sum += get(*r);
      mean = sum / n;
      if (sd == nullptr) return;
      double ss = 0.0;
      for (const auto* r : rs) ss += (get(*r) - mean) * (get(*r) - mean);
      *sd = rs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    };
    for (std::size_t m = 0; m < 4; ++m) {
      mean_std([m](const ExperimentRow& r) { return r.before[m]; }, a.before_mean[m], nullptr);
      mean_std([m](const ExperimentRow& r) { return r.after[m]; }, a.after_mean[m], &a.after_std[m]);
    }
    mean_std([](const ExperimentRow& r) { return r.rmse_before; }, a.rmse_before_mean, nullptr);
    mean_std([](const ExperimentRow& r) { return r.rmse_after; }, a.rmse_after_mean, &a.rmse_after_std);
  }
  return out;
}

ExperimentReport run(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentReport report;
  report.eval_metrics = spec.eval_metrics;
  const std::vector<Index> fillers =
      spec.filler_counts.empty() ? std::vector<Index>{spec.antidote.n_filler} : spec.filler_counts;
  const ItemNormalization norm = spec.antidote.norm;

  for (int t = 0; t < spec.trials; ++t) {
    const std::uint64_t seed = trial_seed(spec.seed, t);
    auto blank_row = [&](double fraction, Index n) {
      ExperimentRow row;
      row.method = spec.method;
      row.targets = spec.targets;
      row.fraction = fraction;
      row.n_filler = n;
      row.trial = t;
      row.seed = seed;
      return row;
    };

    const auto trial_start = Clock::now();
    RatingDataset ds;
    FactorModel base;
    Scores before;
    TrainConfig tc = spec.train;
    tc.seed = seed;
    try {
      ds = build_dataset(spec, seed);
      base = train(ds, tc);
      before = score(base, ds, spec.eval_metrics, norm);
    } catch (const Error& e) {
      for (Index n : fillers) {
        for (double f : spec.fractions) {
          ExperimentRow row = blank_row(f, n);
          row.ok = false;
          row.error = e.what();
          report.rows.push_back(std::move(row));
        }
      }
      continue;
    }
    const double baseline_seconds = seconds_since(trial_start);

    for (Index n : fillers) {
      AntidoteConfig cfg = spec.antidote;
      cfg.n_filler = n;
      cfg.seed = seed;
      cfg.metrics = spec.targets;

      // The sequential generator is prefix-stable in the fraction, so one run
      // at the largest fraction serves every smaller one.
      std::vector<AntidoteUser> sequential;
      double sequential_seconds = 0.0;
      std::string sequential_error;
      if (spec.method == Method::Optimized) {
        const auto start = Clock::now();
        try {
          cfg.alpha_frac = *std::max_element(spec.fractions.begin(), spec.fractions.end());
          sequential = generate(ds, cfg, tc, &base);
        } catch (const Error& e) {
          sequential_error = e.what();
        }
        sequential_seconds = seconds_since(start);
      }

      for (double f : spec.fractions) {
        ExperimentRow row = blank_row(f, n);
        row.before = before.metrics;
        row.rmse_before = before.rmse;
        const auto start = Clock::now();
        try {
          cfg.alpha_frac = f;
          std::vector<AntidoteUser> users;
          std::optional<FactorModel> regularized;
          switch (spec.method) {
            case Method::None:
              break;
            case Method::Optimized: {
              if (!sequential_error.empty()) throw Error(sequential_error);
              const Index count = antidote_count(f, ds.num_original_users());
              users.assign(sequential.begin(), sequential.begin() + count);
              break;
            }
            case Method::Regularization:
              regularized = regularized_train(ds, base, spec.targets.front(), spec.regularization, nullptr, norm);
              break;
            case Method::Maximum:
              users = naive_antidote(BaselineKind::Maximum, ds, cfg);
              break;
            case Method::Minimum:
              users = naive_antidote(BaselineKind::Minimum, ds, cfg);
              break;
            case Method::Random:
              users = naive_antidote(BaselineKind::Random, ds, cfg);
              break;
            case Method::BatchOptimized:
              users = batch_optimized_antidote(ds, base, cfg);
              break;
          }
          row.antidote_users = static_cast<Index>(users.size());
          if (spec.method == Method::None) {
            row.after = before.metrics;
            row.rmse_after = before.rmse;
          } else if (regularized) {
            Scores after = score(*regularized, ds, spec.eval_metrics, norm);
            row.after = after.metrics;
            row.rmse_after = after.rmse;
          } else {
            RatingDataset augmented = inject_antidote(ds, users);
            Scores after = score(retrain_with(augmented, base, tc), augmented, spec.eval_metrics, norm);
            row.after = after.metrics;
            row.rmse_after = after.rmse;
          }
        } catch (const Error& e) {
          row.ok = false;
          row.error = e.what();
        }
        row.runtime_seconds = baseline_seconds + sequential_seconds + seconds_since(start);
        report.rows.push_back(std::move(row));
      }
    }
  }
  report.aggregates = aggregate_rows(report.rows);
  return report;
}

TransferReport transferability(const ExperimentSpec& spec) {
  spec.validate();
  TransferReport out;
  for (std::size_t s = 0; s < kAllMetrics.size(); ++s) {
    ExperimentSpec sub = spec;
    sub.method = Method::Optimized;
    sub.targets = {kAllMetrics[s]};
    sub.eval_metrics.assign(kAllMetrics.begin(), kAllMetrics.end());
    sub.fractions = {spec.fractions.front()};
    sub.filler_counts.clear();
    ExperimentReport r = run(sub);
    const Aggregate& a = r.aggregates.front();
    out.scores[s] = a.after_mean;
    if (s == 0) out.baseline = a.before_mean;
    out.runs.push_back(std::move(r));
  }
  return out;
}

ExperimentReport multi_metric(const ExperimentSpec& spec, MetricKind first, MetricKind second, bool deflect) {
  if (first == second) throw ValidationError("multi-metric optimization needs two distinct metrics");
  ExperimentSpec sub = spec;
  sub.method = Method::Optimized;
  sub.targets = {first, second};
  sub.antidote.deflect = deflect;
  return run(sub);
}

ExperimentReport filler_sweep(const ExperimentSpec& spec) {
  ExperimentSpec sub = spec;
  sub.method = Method::Optimized;
  sub.fractions = {spec.fractions.front()};
  return run(sub);
}

void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  std::ofstream out = open_out(path);
  out << "method,targets,fraction,n_filler,trial,seed,antidote_users,ok";
  for (MetricKind k : report.eval_metrics) out << ",before_" << to_string(k);
  for (MetricKind k : report.eval_metrics) out << ",after_" << to_string(k);
  out << ",rmse_before,rmse_after,error\n";
  for (const auto& r : report.rows) {
    out << to_string(r.method) << ',' << join_targets(r.targets) << ',' << exact(r.fraction) << ',' << r.n_filler
        << ',' << r.trial << ',' << r.seed << ',' << r.antidote_users << ',' << (r.ok ? 1 : 0);
    for (MetricKind k : report.eval_metrics) out << ',' << (r.ok ? exact(r.before[metric_slot(k)]) : "");
    for (MetricKind k : report.eval_metrics) out << ',' << (r.ok ? exact(r.after[metric_slot(k)]) : "");
    out << ',' << (r.ok ? exact(r.rmse_before) : "") << ',' << (r.ok ? exact(r.rmse_after) : "") << ',';
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << err << '\n';
  }
  finish(out, path);
}

void write_aggregate_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  std::ofstream out = open_out(path);
  out << "method,fraction,n_filler,trials";
  for (MetricKind k : report.eval_metrics) out << ",before_" << to_string(k);
  for (MetricKind k : report.eval_metrics) out << ",after_" << to_string(k) << ",after_" << to_string(k) << "_std";
  out << ",rmse_before,rmse_after,rmse_after_std\n";
  for (const auto& a : report.aggregates) {
    out << to_string(a.method) << ',' << exact(a.fraction) << ',' << a.n_filler << ',' << a.trials;
    for (MetricKind k : report.eval_metrics) out << ',' << exact(a.before_mean[metric_slot(k)]);
    for (MetricKind k : report.eval_metrics) {
      out << ',' << exact(a.after_mean[metric_slot(k)]) << ',' << exact(a.after_std[metric_slot(k)]);
    }
    out << ',' << exact(a.rmse_before_mean) << ',' << exact(a.rmse_after_mean) << ',' << exact(a.rmse_after_std)
        << '\n';
  }
  finish(out, path);
}

void write_report_json(const std::filesystem::path& path, const ExperimentReport& report) {
  using nlohmann::ordered_json;
  auto metric_map = [&](const std::array<double, 4>& values) {
    ordered_json j = ordered_json::object();
    for (MetricKind k : report.eval_metrics) j[std::string(to_string(k))] = values[metric_slot(k)];
    return j;
  };
  ordered_json doc;
  doc["eval_metrics"] = ordered_json::array();
  for (MetricKind k : report.eval_metrics) doc["eval_metrics"].push_back(to_string(k));
  doc["rows"] = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json j;
    j["method"] = to_string(r.method);
    j["targets"] = join_targets(r.targets);
    j["fraction"] = r.fraction;
    j["n_filler"] = r.n_filler;
    j["trial"] = r.trial;
    j["seed"] = r.seed;
    j["antidote_users"] = r.antidote_users;
    j["ok"] = r.ok;
    if (r.ok) {
      j["before"] = metric_map(r.before);
      j["after"] = metric_map(r.after);
      j["rmse_before"] = r.rmse_before;
      j["rmse_after"] = r.rmse_after;
    } else {
      j["error"] = r.error;
    }
    j["runtime_seconds"] = r.runtime_seconds;
    doc["rows"].push_back(std::move(j));
  }
  doc["aggregates"] = ordered_json::array();
  for (const auto& a : report.aggregates) {
    ordered_json j;
    j["method"] = to_string(a.method);
    j["fraction"] = a.fraction;
    j["n_filler"] = a.n_filler;
    j["trials"] = a.trials;
    j["before_mean"] = metric_map(a.before_mean);
    j["after_mean"] = metric_map(a.after_mean);
    j["after_std"] = metric_map(a.after_std);
    j["rmse_before_mean"] = a.rmse_before_mean;
    j["rmse_after_mean"] = a.rmse_after_mean;
    j["rmse_after_std"] = a.rmse_after_std;
    doc["aggregates"].push_back(std::move(j));
  }
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

void write_transfer_csv(const std::filesystem::path& path, const TransferReport& report) {
  std::ofstream out = open_out(path);
  out << "source";
  for (MetricKind k : kAllMetrics) out << ',' << to_string(k);
  out << "\nnone";
  for (double v : report.baseline) out << ',' << exact(v);
  out << '\n';
  for (std::size_t s = 0; s < kAllMetrics.size(); ++s) {
    out << to_string(kAllMetrics[s]);
    for (double v : report.scores[s]) out << ',' << exact(v);
    out << '\n';
  }
  finish(out, path);
}

void export_embeddings(const FactorModel& model, const RatingDataset& ds, const std::filesystem::path& path) {
  if (model.num_users() != ds.num_users()) throw ValidationError("model and dataset disagree on the user count");
  std::ofstream out = open_out(path);
  out << "user_id,antidote";
  for (int c = 0; c < model.dim(); ++c) out << ",v" << c;
  out << '\n';
  for (Index u = 0; u < ds.num_users(); ++u) {
    out << ds.user_ids()[static_cast<std::size_t>(u)] << ',' << (ds.is_antidote(u) ? 1 : 0);
    auto v = model.user_vector(u);
    for (int c = 0; c < model.dim(); ++c) out << ',' << exact(v[c]);
    out << '\n';
  }
  finish(out, path);
}

Embeddings read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty embedding file", 1);
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "user_id" || header[1] != "antidote") {
    throw ParseError("expected header user_id,antidote,v0,...", 1);
  }
  const std::size_t d = header.size() - 2;
  Embeddings e;
  std::vector<double> values;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) throw ParseError("expected " + std::to_string(header.size()) + " fields", line_no);
    e.user_ids.push_back(fields[0]);
    if (fields[1] != "0" && fields[1] != "1") throw ParseError("antidote flag must be 0 or 1", line_no);
    e.antidote.push_back(fields[1] == "1");
    for (std::size_t c = 0; c < d; ++c) {
      char* end = nullptr;
      const double v = std::strtod(fields[c + 2].c_str(), &end);
      if (end == fields[c + 2].c_str() || *end != '\0') throw ParseError("bad number '" + fields[c + 2] + "'", line_no);
      values.push_back(v);
    }
  }
  if (in.bad()) throw IoError("read failed: " + path.string());
  e.vectors = Eigen::Map<Matrix>(values.data(), static_cast<Index>(e.user_ids.size()), static_cast<Index>(d));
  return e;
}

void write_antidote_csv(const std::filesystem::path& path, const RatingDataset& ds,
                        const std::vector<AntidoteUser>& users) {
  std::ofstream out = open_out(path);
  out << "antidote_user,item_id,rating\n";
  for (const auto& user : users) {
    for (std::size_t j = 0; j < user.fillers.size(); ++j) {
      out << "antidote" << user.z << ',' << ds.item_ids()[static_cast<std::size_t>(user.fillers[j])] << ','
          << user.ratings[j] << '\n';
    }
  }
  finish(out, path);
}

std::vector<AntidoteUser> read_antidote_csv(const std::filesystem::path& path, const RatingDataset& ds) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::unordered_map<std::string, Index> item_index;
  for (Index i = 0; i < ds.num_items(); ++i) item_index.emplace(ds.item_ids()[static_cast<std::size_t>(i)], i);

  std::vector<std::string> names;
  std::vector<AntidoteUser> users;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != 3) throw ParseError("expected antidote_user,item_id,rating", line_no);
    if (line_no == 1 && fields[0] == "antidote_user") continue;
    auto item = item_index.find(fields[1]);
    if (item == item_index.end()) throw ValidationError("line " + std::to_string(line_no) + ": unknown item '" + fields[1] + "'");
    int rating = 0;
    try {
      std::size_t used = 0;
      rating = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw ParseError("bad rating '" + fields[2] + "'", line_no);
    }
    auto it = std::find(names.begin(), names.end(), fields[0]);
    if (it == names.end()) {
      names.push_back(fields[0]);
      users.emplace_back();
      users.back().z = static_cast<Index>(users.size()) - 1;
      it = names.end() - 1;
    }
    AntidoteUser& user = users[static_cast<std::size_t>(it - names.begin())];
    user.fillers.push_back(item->second);
    user.ratings.push_back(rating);
  }
  if (in.bad()) throw IoError("read failed: " + path.string());
  for (auto& user : users) {
    std::vector<std::size_t> order(user.fillers.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return user.fillers[a] < user.fillers[b]; });
    AntidoteUser sorted;
    sorted.z = user.z;
    for (std::size_t k : order) {
      if (!sorted.fillers.empty() && sorted.fillers.back() == user.fillers[k]) {
        throw ValidationError("antidote user " + names[static_cast<std::size_t>(user.z)] + " rates an item twice");
      }
      sorted.fillers.push_back(user.fillers[k]);
      sorted.ratings.push_back(user.ratings[k]);
    }
    user = std::move(sorted);
  }
  return users;
}

}  // namespace fairmf
