#include "fairmf/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "fairmf/error.hpp"

namespace fairmf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

int parse_int(std::string_view s, long line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("expected integer rating, got '" + std::string(s) + "'", line);
  }
  return v;
}

// Reads a CSV with the given header. Returns data rows with their line numbers.
struct CsvRow {
  long line;
  std::vector<std::string> fields;
};

std::vector<CsvRow> read_csv(const std::filesystem::path& path, std::vector<std::string_view> header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<CsvRow> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty()) continue;
    auto fields = split_csv(view);
    if (lineno == 1 && !fields.empty() && fields.front() == header.front()) {
      if (fields.size() != header.size() || !std::equal(header.begin(), header.end(), fields.begin())) {
        throw ParseError("unexpected header '" + std::string(view) + "'", lineno);
      }
      continue;
    }
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    }
    CsvRow row{lineno, {}};
    for (auto f : fields) {
      if (f.empty()) throw ParseError("empty field", lineno);
      row.fields.emplace_back(f);
    }
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("read failed: " + path.string());
  return rows;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::vector<std::string> numbered_ids(char prefix, Index n) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) ids.push_back(prefix + std::to_string(k));
  return ids;
}

}  // namespace

// ---------------------------------------------------------------------------
// RatingScale

RatingScale RatingScale::range(int lo, int hi) {
  RatingScale s;
  s.r_min = lo;
  s.r_max = hi;
  s.allowed.clear();
  for (int v = lo; v <= hi; ++v) s.allowed.push_back(v);
  s.validate();
  return s;
}

RatingScale RatingScale::binary() {
  RatingScale s;
  s.r_min = -1;
  s.r_max = 1;
  s.allowed = {-1, 1};
  return s;
}

void RatingScale::validate() const {
  if (r_min >= r_max) throw ValidationError("rating scale needs r_min < r_max");
  if (allowed.empty()) throw ValidationError("rating scale has no allowed values");
  if (!std::is_sorted(allowed.begin(), allowed.end()) ||
      std::adjacent_find(allowed.begin(), allowed.end()) != allowed.end()) {
    throw ValidationError("allowed ratings must be strictly increasing");
  }
  if (allowed.front() < r_min || allowed.back() > r_max) {
    throw ValidationError("allowed ratings must lie in [r_min, r_max]");
  }
}

bool RatingScale::contains(int rating) const {
  return std::binary_search(allowed.begin(), allowed.end(), rating);
}

int RatingScale::nearest(double x) const {
  int best = allowed.front();
  double best_dist = std::abs(x - best);
  for (int v : allowed) {
    double dist = std::abs(x - v);
    // allowed is ascending, so `<=` moves exact ties toward r_max.
    if (dist <= best_dist) {
      best = v;
      best_dist = dist;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// RatingDataset

RatingDataset::RatingDataset(Index num_users, Index num_items, std::vector<Rating> entries,
                             std::vector<UserGroup> groups, RatingScale scale,
                             Index num_original_users)
    : num_users_(num_users),
      num_items_(num_items),
      num_original_(num_original_users < 0 ? num_users : num_original_users),
      entries_(std::move(entries)),
      groups_(std::move(groups)),
      scale_(std::move(scale)) {
  scale_.validate();
  if (num_users_ < 0 || num_items_ < 0) throw ValidationError("negative dataset dimensions");
  if (num_original_ > num_users_) throw ValidationError("more original users than users");
  if (static_cast<Index>(groups_.size()) != num_users_) {
    throw ValidationError("group labels must cover every user");
  }
  for (Index u = num_original_; u < num_users_; ++u) {
    if (groups_[static_cast<std::size_t>(u)] != UserGroup::None) {
      throw ValidationError("antidote users cannot carry a group label");
    }
  }
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.user < 0 || e.user >= num_users_ || e.item < 0 || e.item >= num_items_) {
      throw ValidationError("rating index out of range: (" + std::to_string(e.user) + ", " +
                            std::to_string(e.item) + ")");
    }
    if (!scale_.contains(e.value)) {
      throw ValidationError("rating " + std::to_string(e.value) + " outside the rating scale");
    }
    auto key = static_cast<std::uint64_t>(e.user) * static_cast<std::uint64_t>(num_items_) +
               static_cast<std::uint64_t>(e.item);
    if (!seen.insert(key).second) {
      throw ValidationError("duplicate rating for (" + std::to_string(e.user) + ", " +
                            std::to_string(e.item) + ")");
    }
  }
  user_ids_ = numbered_ids('u', num_users_);
  item_ids_ = numbered_ids('i', num_items_);
  build_index();
}

void RatingDataset::build_index() {
  auto build = [this](bool by_user, std::vector<std::size_t>& offsets, std::vector<Neighbor>& adj) {
    Index n = by_user ? num_users_ : num_items_;
    offsets.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& e : entries_) ++offsets[static_cast<std::size_t>(by_user ? e.user : e.item) + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    adj.resize(entries_.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& e : entries_) {
      auto row = static_cast<std::size_t>(by_user ? e.user : e.item);
      adj[cursor[row]++] = Neighbor{by_user ? e.item : e.user, static_cast<double>(e.value)};
    }
    // Rows sorted by the neighbor index, so iteration order does not depend on entry order.
    for (std::size_t r = 0; r + 1 < offsets.size(); ++r) {
      std::sort(adj.begin() + static_cast<std::ptrdiff_t>(offsets[r]),
                adj.begin() + static_cast<std::ptrdiff_t>(offsets[r + 1]),
                [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
    }
  };
  build(true, user_offsets_, user_adj_);
  build(false, item_offsets_, item_adj_);
}

Index RatingDataset::group_size(UserGroup g) const {
  return static_cast<Index>(std::count(groups_.begin(), groups_.begin() + num_original_, g));
}

std::span<const Neighbor> RatingDataset::user_ratings(Index u) const {
  auto r = static_cast<std::size_t>(u);
  return {user_adj_.data() + user_offsets_[r], user_offsets_[r + 1] - user_offsets_[r]};
}

std::span<const Neighbor> RatingDataset::item_ratings(Index i) const {
  auto r = static_cast<std::size_t>(i);
  return {item_adj_.data() + item_offsets_[r], item_offsets_[r + 1] - item_offsets_[r]};
}

std::vector<Rating> RatingDataset::original_entries() const {
  std::vector<Rating> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (!is_antidote(e.user)) out.push_back(e);
  }
  return out;
}

void RatingDataset::set_user_ids(std::vector<std::string> ids) {
  if (static_cast<Index>(ids.size()) != num_users_) throw ValidationError("user id table size mismatch");
  user_ids_ = std::move(ids);
}

void RatingDataset::set_item_ids(std::vector<std::string> ids) {
  if (static_cast<Index>(ids.size()) != num_items_) throw ValidationError("item id table size mismatch");
  item_ids_ = std::move(ids);
}

void RatingDataset::set_item_groups(std::vector<std::string> labels) {
  if (!labels.empty() && static_cast<Index>(labels.size()) != num_items_) {
    throw ValidationError("item group table size mismatch");
  }
  item_groups_ = std::move(labels);
}

RatingDataset RatingDataset::with_groups(std::vector<UserGroup> groups) const {
  RatingDataset out(num_users_, num_items_, entries_, std::move(groups), scale_, num_original_);
  out.user_ids_ = user_ids_;
  out.item_ids_ = item_ids_;
  out.item_groups_ = item_groups_;
  return out;
}

RatingDataset RatingDataset::without_antidote() const {
  std::vector<UserGroup> groups(groups_.begin(), groups_.begin() + num_original_);
  RatingDataset out(num_original_, num_items_, original_entries(), std::move(groups), scale_);
  out.user_ids_.assign(user_ids_.begin(), user_ids_.begin() + num_original_);
  out.item_ids_ = item_ids_;
  out.item_groups_ = item_groups_;
  return out;
}

bool operator==(const RatingDataset& a, const RatingDataset& b) {
  return a.num_users_ == b.num_users_ && a.num_items_ == b.num_items_ &&
         a.num_original_ == b.num_original_ && a.entries_ == b.entries_ && a.groups_ == b.groups_ &&
         a.scale_ == b.scale_ && a.user_ids_ == b.user_ids_ && a.item_ids_ == b.item_ids_ &&
         a.item_groups_ == b.item_groups_;
}

// ---------------------------------------------------------------------------
// Synthetic block model

void SyntheticConfig::validate() const {
  if (users_per_group < 1 || items_per_group < 1) throw ValidationError("group sizes must be >= 1");
  for (double p : {alpha1, alpha2, beta1, beta2}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("block probabilities must lie in [0, 1]");
  }
}

double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t stream) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(stream));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(base ^ splitmix64(a + 1)) ^ (b * 0xd1b54a32d192ed03ULL));
}

RatingDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const Index num_users = 2 * cfg.users_per_group;
  const Index num_items = 2 * cfg.items_per_group;
  constexpr std::uint64_t kObserveStream = 1;
  constexpr std::uint64_t kLikeStream = 2;

  std::vector<Rating> entries;
  for (Index u = 0; u < num_users; ++u) {
    const bool male = u < cfg.users_per_group;
    for (Index i = 0; i < num_items; ++i) {
      const bool stem = i < cfg.items_per_group;
      // Diagonal blocks (male-STEM, female-NonSTEM) use alpha1/beta1.
      const bool diagonal = male == stem;
      const double like_p = diagonal ? cfg.alpha1 : cfg.alpha2;
      const double observe_p = diagonal ? cfg.beta1 : cfg.beta2;
      auto uu = static_cast<std::uint64_t>(u);
      auto ii = static_cast<std::uint64_t>(i);
      if (counter_uniform(cfg.seed, uu, ii, kObserveStream) >= observe_p) continue;
      const int rating = counter_uniform(cfg.seed, uu, ii, kLikeStream) < like_p ? 1 : -1;
      entries.push_back(Rating{u, i, rating});
    }
  }

  const UserGroup male_group = cfg.male_advantaged ? UserGroup::Advantaged : UserGroup::Disadvantaged;
  const UserGroup female_group = cfg.male_advantaged ? UserGroup::Disadvantaged : UserGroup::Advantaged;
  std::vector<UserGroup> groups(static_cast<std::size_t>(num_users));
  std::vector<std::string> user_ids;
  user_ids.reserve(groups.size());
  for (Index u = 0; u < num_users; ++u) {
    const bool male = u < cfg.users_per_group;
    groups[static_cast<std::size_t>(u)] = male ? male_group : female_group;
    user_ids.push_back((male ? "m" : "f") + std::to_string(male ? u : u - cfg.users_per_group));
  }
  std::vector<std::string> item_groups;
  for (Index i = 0; i < num_items; ++i) item_groups.emplace_back(i < cfg.items_per_group ? "STEM" : "NonSTEM");

  RatingDataset ds(num_users, num_items, std::move(entries), std::move(groups), RatingScale::binary());
  ds.set_user_ids(std::move(user_ids));
  ds.set_item_groups(std::move(item_groups));
  return ds;
}

// ---------------------------------------------------------------------------
// Antidote injection

RatingDataset inject_antidote(const RatingDataset& ds, std::span<const AntidoteUser> users) {
  if (users.empty()) return ds;
  std::vector<Rating> entries = ds.entries();
  std::vector<UserGroup> groups = ds.groups();
  std::vector<std::string> user_ids = ds.user_ids();
  Index next = ds.num_users();
  for (const auto& user : users) {
    if (user.fillers.size() != user.ratings.size()) {
      throw ValidationError("antidote user has mismatched fillers and ratings");
    }
    for (std::size_t k = 0; k < user.fillers.size(); ++k) {
      Index item = user.fillers[k];
      if (item < 0 || item >= ds.num_items()) {
        throw ValidationError("antidote filler item " + std::to_string(item) + " out of range");
      }
      if (!ds.scale().contains(user.ratings[k])) {
        throw ValidationError("antidote rating " + std::to_string(user.ratings[k]) +
                              " outside the rating scale");
      }
      entries.push_back(Rating{next, item, user.ratings[k]});
    }
    groups.push_back(UserGroup::None);
    user_ids.push_back("antidote" + std::to_string(next - ds.num_original_users()));
    ++next;
  }
  RatingDataset out(next, ds.num_items(), std::move(entries), std::move(groups), ds.scale(),
                    ds.num_original_users());
  out.set_user_ids(std::move(user_ids));
  out.set_item_ids(ds.item_ids());
  out.set_item_groups(ds.item_groups());
  return out;
}

// ---------------------------------------------------------------------------
// CSV I/O

RatingDataset load_ratings(const std::filesystem::path& path, const RatingScale& scale) {
  scale.validate();
  auto rows = read_csv(path, {"user_id", "item_id", "rating"});
  std::unordered_map<std::string, Index> user_index;
  std::unordered_map<std::string, Index> item_index;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<Rating> entries;
  std::unordered_set<std::uint64_t> seen;
  entries.reserve(rows.size());

  auto intern = [](auto& index, auto& ids, const std::string& key) {
    auto [it, inserted] = index.try_emplace(key, static_cast<Index>(ids.size()));
    if (inserted) ids.push_back(key);
    return it->second;
  };

  for (const auto& row : rows) {
    Index u = intern(user_index, user_ids, row.fields[0]);
    Index i = intern(item_index, item_ids, row.fields[1]);
    int value = parse_int(row.fields[2], row.line);
    if (!scale.contains(value)) {
      throw ValidationError("line " + std::to_string(row.line) + ": rating " + std::to_string(value) +
                            " outside the rating scale");
    }
    // 2^32 items is far beyond anything loaded here.
    auto key = (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(i);
    if (!seen.insert(key).second) {
      throw ValidationError("line " + std::to_string(row.line) + ": duplicate rating for user '" +
                            row.fields[0] + "' item '" + row.fields[1] + "'");
    }
    entries.push_back(Rating{u, i, value});
  }

  auto num_users = static_cast<Index>(user_ids.size());
  RatingDataset ds(num_users, static_cast<Index>(item_ids.size()), std::move(entries),
                   std::vector<UserGroup>(user_ids.size(), UserGroup::None), scale);
  ds.set_user_ids(std::move(user_ids));
  ds.set_item_ids(std::move(item_ids));
  return ds;
}

RatingDataset load_groups(const std::filesystem::path& path, const RatingDataset& ds) {
  auto rows = read_csv(path, {"user_id", "group"});
  std::unordered_map<std::string, Index> index;
  for (Index u = 0; u < ds.num_original_users(); ++u) index.emplace(ds.user_ids()[static_cast<std::size_t>(u)], u);

  std::vector<UserGroup> groups = ds.groups();
  std::vector<bool> assigned(static_cast<std::size_t>(ds.num_original_users()), false);
  for (const auto& row : rows) {
    const auto& label = row.fields[1];
    UserGroup g;
    if (label == "A") {
      g = UserGroup::Advantaged;
    } else if (label == "D") {
      g = UserGroup::Disadvantaged;
    } else {
      throw ParseError("unknown group label '" + label + "' (expected A or D)", row.line);
    }
    auto it = index.find(row.fields[0]);
    // Users without ratings are absent from ds and carry no information.
    if (it == index.end()) continue;
    auto u = static_cast<std::size_t>(it->second);
    if (assigned[u]) {
      throw ValidationError("line " + std::to_string(row.line) + ": user '" + row.fields[0] +
                            "' listed twice");
    }
    assigned[u] = true;
    groups[u] = g;
  }

  std::string missing;
  for (std::size_t u = 0; u < assigned.size(); ++u) {
    if (!assigned[u]) missing += (missing.empty() ? "" : ", ") + ds.user_ids()[u];
  }
  if (!missing.empty()) throw ValidationError("users without a group label: " + missing);
  return ds.with_groups(std::move(groups));
}

RatingDataset load_item_groups(const std::filesystem::path& path, const RatingDataset& ds) {
  auto rows = read_csv(path, {"item_id", "group"});
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.item_ids().size(); ++i) index.emplace(ds.item_ids()[i], i);
  std::vector<std::string> labels(static_cast<std::size_t>(ds.num_items()));
  for (const auto& row : rows) {
    auto it = index.find(row.fields[0]);
    if (it == index.end()) continue;
    labels[it->second] = row.fields[1];
  }
  RatingDataset out = ds;
  out.set_item_groups(std::move(labels));
  return out;
}

void write_ratings(const std::filesystem::path& path, const RatingDataset& ds) {
  auto out = open_out(path);
  out << "user_id,item_id,rating\n";
  for (const auto& e : ds.entries()) {
    out << ds.user_ids()[static_cast<std::size_t>(e.user)] << ','
        << ds.item_ids()[static_cast<std::size_t>(e.item)] << ',' << e.value << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_groups(const std::filesystem::path& path, const RatingDataset& ds) {
  auto out = open_out(path);
  out << "user_id,group\n";
  for (Index u = 0; u < ds.num_original_users(); ++u) {
    UserGroup g = ds.group(u);
    if (g == UserGroup::None) throw ValidationError("user " + ds.user_ids()[static_cast<std::size_t>(u)] + " has no group");
    out << ds.user_ids()[static_cast<std::size_t>(u)] << ',' << (g == UserGroup::Advantaged ? 'A' : 'D') << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_item_groups(const std::filesystem::path& path, const RatingDataset& ds) {
  auto out = open_out(path);
  out << "item_id,group\n";
  for (std::size_t i = 0; i < ds.item_groups().size(); ++i) {
    out << ds.item_ids()[i] << ',' << ds.item_groups()[i] << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace fairmf
