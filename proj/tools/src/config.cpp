#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>

#include "fairmf/error.hpp"

namespace fairmf::cli {

namespace {

void check_keys(const Json& j, std::string_view section, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ValidationError("config section '" + std::string(section) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ValidationError("unknown key '" + key + "' in config section '" + std::string(section) + "'");
    }
  }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::vector<MetricKind> read_metrics(const Json& j, const char* key) {
  std::vector<std::string> names;
  read(j, key, names);
  std::vector<MetricKind> out;
  for (const auto& n : names) out.push_back(parse_metric(n));
  return out;
}

InitMode parse_init_mode(const std::string& s) {
  if (s == "midpoint") return InitMode::Midpoint;
  if (s == "uniform") return InitMode::Uniform;
  throw ValidationError("init_mode must be midpoint or uniform");
}

FillerRanking parse_ranking(const std::string& s) {
  if (s == "absolute") return FillerRanking::Absolute;
  if (s == "from_midpoint") return FillerRanking::FromMidpoint;
  throw ValidationError("ranking must be absolute or from_midpoint");
}

StepScaling parse_scaling(const std::string& s) {
  if (s == "raw") return StepScaling::Raw;
  if (s == "max_norm") return StepScaling::MaxNorm;
  throw ValidationError("scaling must be raw or max_norm");
}

ItemNormalization parse_norm(const std::string& s) {
  if (s == "valid_items") return ItemNormalization::ValidItems;
  if (s == "all_items") return ItemNormalization::AllItems;
  throw ValidationError("normalization must be valid_items or all_items");
}

}  // namespace

Json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
}

RatingScale parse_scale(const std::string& text) {
  if (text == "binary") return RatingScale::binary();
  auto dash = text.find('-', 1);
  if (dash == std::string::npos) throw ValidationError("scale must be 'binary' or 'LO-HI'");
  try {
    std::size_t a = 0;
    std::size_t b = 0;
    int lo = std::stoi(text.substr(0, dash), &a);
    int hi = std::stoi(text.substr(dash + 1), &b);
    if (a != dash || b != text.size() - dash - 1) throw std::invalid_argument("trailing");
    return RatingScale::range(lo, hi);
  } catch (const std::logic_error&) {
    throw ValidationError("scale must be 'binary' or 'LO-HI'");
  }
}

void apply(const Json& j, TrainConfig& out) {
  check_keys(j, "train", {"d", "lambda", "max_sweeps", "tol", "init_std", "seed"});
  read(j, "d", out.d);
  read(j, "lambda", out.lambda);
  read(j, "max_sweeps", out.max_sweeps);
  read(j, "tol", out.tol);
  read(j, "init_std", out.init_std);
  read(j, "seed", out.seed);
}

void apply(const Json& j, AntidoteConfig& out) {
  check_keys(j, "antidote",
             {"alpha_frac", "n_filler", "pgd_steps", "pgd_lr", "init_rating", "init_mode", "ranking", "scaling",
              "metrics", "weight_a", "weight_b", "deflect", "normalization", "seed"});
  read(j, "alpha_frac", out.alpha_frac);
  read(j, "n_filler", out.n_filler);
  read(j, "pgd_steps", out.pgd_steps);
  if (j.contains("pgd_lr")) {
    double lr = 0.0;
    read(j, "pgd_lr", lr);
    out.pgd_lr = lr;
  }
  if (j.contains("init_rating")) {
    double v = 0.0;
    read(j, "init_rating", v);
    out.init_rating = v;
  }
  std::string s;
  if (j.contains("init_mode")) { read(j, "init_mode", s); out.init_mode = parse_init_mode(s); }
  if (j.contains("ranking")) { read(j, "ranking", s); out.ranking = parse_ranking(s); }
  if (j.contains("scaling")) { read(j, "scaling", s); out.scaling = parse_scaling(s); }
  if (j.contains("normalization")) { read(j, "normalization", s); out.norm = parse_norm(s); }
  if (j.contains("metrics")) out.metrics = read_metrics(j, "metrics");
  read(j, "weight_a", out.weight_a);
  read(j, "weight_b", out.weight_b);
  read(j, "deflect", out.deflect);
  read(j, "seed", out.seed);
}

void apply(const Json& j, SyntheticConfig& out) {
  check_keys(j, "synthetic",
             {"users_per_group", "items_per_group", "alpha1", "alpha2", "beta1", "beta2", "male_advantaged", "seed"});
  read(j, "users_per_group", out.users_per_group);
  read(j, "items_per_group", out.items_per_group);
  read(j, "alpha1", out.alpha1);
  read(j, "alpha2", out.alpha2);
  read(j, "beta1", out.beta1);
  read(j, "beta2", out.beta2);
  read(j, "male_advantaged", out.male_advantaged);
  read(j, "seed", out.seed);
}

void apply(const Json& j, RegularizationConfig& out) {
  check_keys(j, "regularization", {"reg_weight", "step", "epochs"});
  read(j, "reg_weight", out.reg_weight);
  read(j, "step", out.step);
  read(j, "epochs", out.epochs);
}

ExperimentSpec spec_from_json(const Json& doc) {
  check_keys(doc, "top level", {"synthetic", "files", "train", "antidote", "regularization", "experiment"});
  ExperimentSpec spec;
  if (doc.contains("files")) {
    const Json& f = doc["files"];
    check_keys(f, "files", {"ratings", "groups", "item_groups", "scale"});
    FileSource src;
    std::string s;
    read(f, "ratings", s);
    src.ratings = s;
    s.clear();
    read(f, "groups", s);
    src.groups = s;
    s.clear();
    read(f, "item_groups", s);
    src.item_groups = s;
    s = "binary";
    read(f, "scale", s);
    src.scale = parse_scale(s);
    if (src.ratings.empty() || src.groups.empty()) throw ValidationError("files section needs ratings and groups");
    spec.files = src;
  }
  if (doc.contains("synthetic") || !spec.files) {
    SyntheticConfig sc;
    if (doc.contains("synthetic")) apply(doc["synthetic"], sc);
    spec.synthetic = sc;
  }
  if (doc.contains("train")) apply(doc["train"], spec.train);
  if (doc.contains("antidote")) apply(doc["antidote"], spec.antidote);
  if (doc.contains("regularization")) apply(doc["regularization"], spec.regularization);
  if (doc.contains("experiment")) {
    const Json& e = doc["experiment"];
    check_keys(e, "experiment",
               {"method", "targets", "eval_metrics", "fractions", "filler_counts", "trials", "seed"});
    if (e.contains("method")) {
      std::string m;
      read(e, "method", m);
      spec.method = parse_method(m);
    }
    if (e.contains("targets")) spec.targets = read_metrics(e, "targets");
    if (e.contains("eval_metrics")) spec.eval_metrics = read_metrics(e, "eval_metrics");
    read(e, "fractions", spec.fractions);
    read(e, "filler_counts", spec.filler_counts);
    read(e, "trials", spec.trials);
    read(e, "seed", spec.seed);
  }
  return spec;
}

Json to_json(const TrainConfig& cfg) {
  return Json{{"d", cfg.d},          {"lambda", cfg.lambda},     {"max_sweeps", cfg.max_sweeps},
              {"tol", cfg.tol},      {"init_std", cfg.init_std}, {"seed", cfg.seed}};
}

Json to_json(const AntidoteConfig& cfg) {
  Json j;
  j["alpha_frac"] = cfg.alpha_frac;
  j["n_filler"] = cfg.n_filler;
  j["pgd_steps"] = cfg.pgd_steps;
  if (cfg.pgd_lr) j["pgd_lr"] = *cfg.pgd_lr;
  if (cfg.init_rating) j["init_rating"] = *cfg.init_rating;
  j["init_mode"] = cfg.init_mode == InitMode::Midpoint ? "midpoint" : "uniform";
  j["ranking"] = cfg.ranking == FillerRanking::Absolute ? "absolute" : "from_midpoint";
  j["scaling"] = cfg.scaling == StepScaling::MaxNorm ? "max_norm" : "raw";
  j["normalization"] = cfg.norm == ItemNormalization::ValidItems ? "valid_items" : "all_items";
  j["metrics"] = Json::array();
  for (MetricKind k : cfg.metrics) j["metrics"].push_back(to_string(k));
  j["weight_a"] = cfg.weight_a;
  j["weight_b"] = cfg.weight_b;
  j["deflect"] = cfg.deflect;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace fairmf::cli
