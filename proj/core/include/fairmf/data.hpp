#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fairmf {

using Index = std::ptrdiff_t;

// Integer rating scale. `allowed` is the set ratings are drawn from and
// rounded onto; it need not be contiguous (the synthetic scale is {-1, 1}).
struct RatingScale {
  int r_min = 1;
  int r_max = 5;
  std::vector<int> allowed{1, 2, 3, 4, 5};

  static RatingScale range(int lo, int hi);
  static RatingScale binary();

  void validate() const;
  bool contains(int rating) const;
  double midpoint() const { return 0.5 * (r_min + r_max); }
  double width() const { return static_cast<double>(r_max - r_min); }

  // Nearest allowed value; exact ties go to the larger value.
  int nearest(double x) const;

  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

enum class UserGroup : std::uint8_t { Disadvantaged, Advantaged, None };

struct Rating {
  Index user = 0;
  Index item = 0;
  int value = 0;

  friend bool operator==(const Rating&, const Rating&) = default;
};

// One row of a CSR adjacency: the other endpoint of an observed rating.
struct Neighbor {
  Index index;
  double rating;
};

// An injected antidote user after rounding: integer ratings on its filler items.
struct AntidoteUser {
  Index z = 0;                 // position among antidote users
  std::vector<double> relaxed; // continuous ratings over all items before selection
  std::vector<Index> fillers;  // ascending item indices
  std::vector<int> ratings;    // parallel to fillers
};

// Sparse user-item ratings with group labels.
//
// Users [0, num_original_users()) are original users; any users past that are
// injected antidote users and always carry UserGroup::None. Index structures
// for both directions are built once at construction; the object is immutable.
class RatingDataset {
 public:
  RatingDataset() = default;

  // Validates indices, scale membership and (user, item) uniqueness.
  RatingDataset(Index num_users, Index num_items, std::vector<Rating> entries,
                std::vector<UserGroup> groups, RatingScale scale,
                Index num_original_users = -1);

  Index num_users() const { return num_users_; }
  Index num_items() const { return num_items_; }
  Index num_original_users() const { return num_original_; }
  Index num_antidote_users() const { return num_users_ - num_original_; }
  bool is_antidote(Index u) const { return u >= num_original_; }

  const std::vector<Rating>& entries() const { return entries_; }
  const RatingScale& scale() const { return scale_; }
  UserGroup group(Index u) const { return groups_[static_cast<std::size_t>(u)]; }
  const std::vector<UserGroup>& groups() const { return groups_; }
  Index group_size(UserGroup g) const;

  std::span<const Neighbor> user_ratings(Index u) const;
  std::span<const Neighbor> item_ratings(Index i) const;

  // Entries whose user is an original user, in storage order.
  std::vector<Rating> original_entries() const;

  // Side tables with the external ids; generated ids when absent.
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<std::string>& item_groups() const { return item_groups_; }

  void set_user_ids(std::vector<std::string> ids);
  void set_item_ids(std::vector<std::string> ids);
  void set_item_groups(std::vector<std::string> labels);

  RatingDataset with_groups(std::vector<UserGroup> groups) const;

  // Drops every antidote row.
  RatingDataset without_antidote() const;

  friend bool operator==(const RatingDataset& a, const RatingDataset& b);

 private:
  void build_index();

  Index num_users_ = 0;
  Index num_items_ = 0;
  Index num_original_ = 0;
  std::vector<Rating> entries_;
  std::vector<UserGroup> groups_;
  RatingScale scale_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::vector<std::string> item_groups_;

  std::vector<std::size_t> user_offsets_;
  std::vector<Neighbor> user_adj_;
  std::vector<std::size_t> item_offsets_;
  std::vector<Neighbor> item_adj_;
};

// Two-gender / two-course-type block model. Users [0, users_per_group) are
// male, the rest female; items [0, items_per_group) are STEM.
struct SyntheticConfig {
  Index users_per_group = 400;
  Index items_per_group = 300;
  double alpha1 = 0.4;  // P(like) male-STEM and female-NonSTEM
  double alpha2 = 0.4;  // P(like) male-NonSTEM and female-STEM
  double beta1 = 0.2;   // P(observed) male-STEM and female-NonSTEM
  double beta2 = 0.1;   // P(observed) male-NonSTEM and female-STEM
  bool male_advantaged = true;
  std::uint64_t seed = 0;

  void validate() const;
};

RatingDataset generate_synthetic(const SyntheticConfig& cfg);

// Appends antidote rows; the original entries are untouched.
RatingDataset inject_antidote(const RatingDataset& ds, std::span<const AntidoteUser> users);

// CSV ingestion. Users and items are re-indexed densely in first-appearance
// order; groups start as None until load_groups attaches them.
RatingDataset load_ratings(const std::filesystem::path& path, const RatingScale& scale);
// Group rows for user ids absent from ds are skipped; every user of ds needs one.
RatingDataset load_groups(const std::filesystem::path& path, const RatingDataset& ds);
RatingDataset load_item_groups(const std::filesystem::path& path, const RatingDataset& ds);

void write_ratings(const std::filesystem::path& path, const RatingDataset& ds);
void write_groups(const std::filesystem::path& path, const RatingDataset& ds);
void write_item_groups(const std::filesystem::path& path, const RatingDataset& ds);

// Counter-based uniform draw in [0, 1): a pure function of its arguments.
double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t stream);

// Mixes a base seed with stream identifiers into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace fairmf
