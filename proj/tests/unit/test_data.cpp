#include <gtest/gtest.h>

#include <cmath>

#include "fairmf/data.hpp"
#include "fairmf/error.hpp"
#include "temp_dir.hpp"

using namespace fairmf;

TEST(RatingScale, NearestRoundsHalfwayUp) {
  RatingScale s = RatingScale::range(1, 5);
  EXPECT_EQ(s.nearest(3.0), 3);
  EXPECT_EQ(s.nearest(3.5), 4);
  EXPECT_EQ(s.nearest(3.49), 3);
  EXPECT_EQ(s.nearest(-10.0), 1);
  EXPECT_EQ(RatingScale::binary().nearest(0.0), 1);
  EXPECT_EQ(RatingScale::binary().nearest(-0.01), -1);
}

TEST(RatingScale, RejectsInvertedRange) {
  EXPECT_THROW(RatingScale::range(5, 1), ValidationError);
  RatingScale s = RatingScale::range(1, 5);
  s.allowed = {1, 7};
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(RatingDataset, RejectsDuplicatesAndOutOfScale) {
  auto scale = RatingScale::range(1, 5);
  std::vector<UserGroup> g{UserGroup::Disadvantaged, UserGroup::Advantaged};
  EXPECT_THROW(RatingDataset(2, 1, {{0, 0, 1}, {0, 0, 2}}, g, scale), ValidationError);
  EXPECT_THROW(RatingDataset(2, 1, {{0, 0, 7}}, g, scale), ValidationError);
  EXPECT_THROW(RatingDataset(2, 1, {{0, 3, 1}}, g, scale), ValidationError);
}

TEST(RatingDataset, IndexesAreConsistentWithEntries) {
  RatingDataset ds(3, 2, {{0, 1, 4}, {2, 0, 1}, {1, 1, 2}},
                   {UserGroup::Disadvantaged, UserGroup::Advantaged, UserGroup::Advantaged}, RatingScale::range(1, 5));
  ASSERT_EQ(ds.item_ratings(1).size(), 2u);
  EXPECT_EQ(ds.item_ratings(1)[0].index, 0);
  EXPECT_EQ(ds.item_ratings(1)[1].index, 1);
  EXPECT_EQ(ds.user_ratings(2).size(), 1u);
  EXPECT_DOUBLE_EQ(ds.user_ratings(2)[0].rating, 1.0);
  EXPECT_EQ(ds.group_size(UserGroup::Advantaged), 2);
  EXPECT_EQ(ds.group_size(UserGroup::Disadvantaged), 1);
}

TEST(LoadRatings, EmptyFileGivesEmptyDataset) {
  TempDir dir;
  auto ds = load_ratings(dir.write("r.csv", ""), RatingScale::range(1, 5));
  EXPECT_EQ(ds.num_users(), 0);
  EXPECT_EQ(ds.num_items(), 0);
  EXPECT_TRUE(ds.entries().empty());
}

TEST(LoadRatings, ReindexesInFirstAppearanceOrder) {
  TempDir dir;
  auto ds = load_ratings(dir.write("r.csv", "user_id,item_id,rating\na,x,1\nb,x,5\n"), RatingScale::range(1, 5));
  EXPECT_EQ(ds.num_users(), 2);
  EXPECT_EQ(ds.num_items(), 1);
  EXPECT_EQ(ds.entries().size(), 2u);
  EXPECT_EQ(ds.user_ids()[1], "b");
}

TEST(LoadRatings, HeaderIsOptional) {
  TempDir dir;
  auto ds = load_ratings(dir.write("r.csv", "a,x,1\nb,y,2\n"), RatingScale::range(1, 5));
  EXPECT_EQ(ds.entries().size(), 2u);
}

TEST(LoadRatings, OutOfScaleRatingIsValidationError) {
  TempDir dir;
  auto p = dir.write("r.csv", "a,x,7\n");
  EXPECT_THROW(load_ratings(p, RatingScale::range(1, 5)), ValidationError);
}

TEST(LoadRatings, MalformedRowReportsLine) {
  TempDir dir;
  auto p = dir.write("r.csv", "user_id,item_id,rating\na,x,1\nb,y\n");
  try {
    load_ratings(p, RatingScale::range(1, 5));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(LoadRatings, DuplicatePairIsRejected) {
  TempDir dir;
  auto p = dir.write("r.csv", "a,x,1\na,x,2\n");
  EXPECT_THROW(load_ratings(p, RatingScale::range(1, 5)), ValidationError);
}

TEST(LoadRatings, MissingFileIsIoError) {
  EXPECT_THROW(load_ratings("/nonexistent/ratings.csv", RatingScale::binary()), IoError);
}

TEST(LoadGroups, CountsLabels) {
  TempDir dir;
  auto ds = load_ratings(dir.write("r.csv", "a,x,1\nb,x,5\n"), RatingScale::range(1, 5));
  auto g = load_groups(dir.write("g.csv", "user_id,group\na,D\nb,A\n"), ds);
  EXPECT_EQ(g.group_size(UserGroup::Disadvantaged), 1);
  EXPECT_EQ(g.group_size(UserGroup::Advantaged), 1);
}

TEST(LoadGroups, AllDisadvantagedIsAllowed) {
  TempDir dir;
  auto ds = load_ratings(dir.write("r.csv", "a,x,1\nb,x,5\n"), RatingScale::range(1, 5));
  auto g = load_groups(dir.write("g.csv", "a,D\nb,D\n"), ds);
  EXPECT_EQ(g.group_size(UserGroup::Advantaged), 0);
}

TEST(LoadGroups, MissingUserIsNamed) {
  TempDir dir;
  auto ds = load_ratings(dir.write("r.csv", "a,x,1\nb,x,5\n"), RatingScale::range(1, 5));
  try {
    load_groups(dir.write("g.csv", "a,D\n"), ds);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find('b'), std::string::npos);
  }
}

TEST(LoadGroups, UnknownLabelIsParseError) {
  TempDir dir;
  auto ds = load_ratings(dir.write("r.csv", "a,x,1\n"), RatingScale::range(1, 5));
  EXPECT_THROW(load_groups(dir.write("g.csv", "a,X\n"), ds), ParseError);
}

TEST(Synthetic, NothingObservedWithZeroBeta) {
  SyntheticConfig cfg;
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.0;
  EXPECT_TRUE(generate_synthetic(cfg).entries().empty());
}

TEST(Synthetic, DegenerateProbabilitiesGiveCertainLike) {
  SyntheticConfig cfg;
  cfg.users_per_group = 1;
  cfg.items_per_group = 1;
  cfg.alpha1 = 1.0;
  cfg.beta1 = 1.0;
  cfg.beta2 = 0.0;
  auto ds = generate_synthetic(cfg);
  // male 0 x STEM 0 and female 1 x NonSTEM 1
  ASSERT_EQ(ds.entries().size(), 2u);
  EXPECT_EQ(ds.entries()[0], (Rating{0, 0, 1}));
}

TEST(Synthetic, ReproducibleForASeed) {
  SyntheticConfig cfg;
  cfg.users_per_group = 40;
  cfg.items_per_group = 30;
  cfg.seed = 17;
  EXPECT_EQ(generate_synthetic(cfg), generate_synthetic(cfg));
  SyntheticConfig other = cfg;
  other.seed = 18;
  EXPECT_FALSE(generate_synthetic(cfg) == generate_synthetic(other));
}

TEST(Synthetic, MaleAdvantagedByDefault) {
  SyntheticConfig cfg;
  cfg.users_per_group = 3;
  cfg.items_per_group = 2;
  auto ds = generate_synthetic(cfg);
  EXPECT_EQ(ds.group(0), UserGroup::Advantaged);
  EXPECT_EQ(ds.group(3), UserGroup::Disadvantaged);
  EXPECT_EQ(ds.item_groups()[0], "STEM");
  EXPECT_EQ(ds.item_groups()[2], "NonSTEM");
  cfg.male_advantaged = false;
  EXPECT_EQ(generate_synthetic(cfg).group(0), UserGroup::Disadvantaged);
}

TEST(Synthetic, MeanEntryCountWithinThreeSigma) {
  const int seeds = 30;
  double total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    SyntheticConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    total += static_cast<double>(generate_synthetic(cfg).entries().size());
  }
  // 480000 cells, half observed with p=0.2 and half with p=0.1
  const double var = 240000 * 0.2 * 0.8 + 240000 * 0.1 * 0.9;
  const double sd_of_mean = std::sqrt(var / seeds);
  EXPECT_NEAR(total / seeds, 72000.0, 3.0 * sd_of_mean);
}

TEST(Synthetic, MaleStemLikeRateConvergesToAlpha1) {
  SyntheticConfig cfg;
  cfg.alpha1 = 0.7;
  cfg.alpha2 = 0.2;
  cfg.beta1 = 1.0;
  cfg.seed = 5;
  auto ds = generate_synthetic(cfg);
  long likes = 0, n = 0;
  for (const auto& r : ds.entries()) {
    if (r.user < cfg.users_per_group && r.item < cfg.items_per_group) {
      ++n;
      likes += r.value == 1;
    }
  }
  const double rate = static_cast<double>(likes) / static_cast<double>(n);
  EXPECT_NEAR(rate, 0.7, 3.0 * std::sqrt(0.7 * 0.3 / static_cast<double>(n)));
}

TEST(InjectAntidote, EmptyListIsIdentity) {
  SyntheticConfig cfg;
  cfg.users_per_group = 5;
  cfg.items_per_group = 5;
  auto ds = generate_synthetic(cfg);
  EXPECT_EQ(inject_antidote(ds, {}), ds);
}

TEST(InjectAntidote, AppendsUngroupedRows) {
  SyntheticConfig cfg;
  cfg.users_per_group = 5;
  cfg.items_per_group = 5;
  auto ds = generate_synthetic(cfg);
  AntidoteUser u;
  u.fillers = {0, 3, 7};
  u.ratings = {1, -1, 1};
  auto out = inject_antidote(ds, std::span<const AntidoteUser>(&u, 1));
  EXPECT_EQ(out.num_users(), ds.num_users() + 1);
  EXPECT_EQ(out.entries().size(), ds.entries().size() + 3);
  EXPECT_EQ(out.group(ds.num_users()), UserGroup::None);
  EXPECT_TRUE(out.is_antidote(ds.num_users()));
  EXPECT_EQ(out.num_original_users(), ds.num_users());
  EXPECT_EQ(out.without_antidote(), ds);
}

TEST(InjectAntidote, RejectsOutOfScaleAndOutOfRange) {
  SyntheticConfig cfg;
  cfg.users_per_group = 2;
  cfg.items_per_group = 2;
  auto ds = generate_synthetic(cfg);
  AntidoteUser bad_rating{0, {}, {0}, {3}};
  EXPECT_THROW(inject_antidote(ds, std::span<const AntidoteUser>(&bad_rating, 1)), ValidationError);
  AntidoteUser bad_item{0, {}, {9}, {1}};
  EXPECT_THROW(inject_antidote(ds, std::span<const AntidoteUser>(&bad_item, 1)), ValidationError);
}

TEST(CsvRoundTrip, SyntheticSurvivesWriteAndLoad) {
  TempDir dir;
  SyntheticConfig cfg;
  cfg.users_per_group = 20;
  cfg.items_per_group = 15;
  cfg.seed = 3;
  auto ds = generate_synthetic(cfg);
  write_ratings(dir.path() / "r.csv", ds);
  write_groups(dir.path() / "g.csv", ds);
  write_item_groups(dir.path() / "i.csv", ds);
  auto back = load_item_groups(dir.path() / "i.csv",
                               load_groups(dir.path() / "g.csv", load_ratings(dir.path() / "r.csv", ds.scale())));
  ASSERT_EQ(back.entries().size(), ds.entries().size());
  for (std::size_t k = 0; k < ds.entries().size(); ++k) {
    const auto& a = ds.entries()[k];
    const auto& b = back.entries()[k];
    EXPECT_EQ(ds.user_ids()[static_cast<std::size_t>(a.user)], back.user_ids()[static_cast<std::size_t>(b.user)]);
    EXPECT_EQ(ds.item_ids()[static_cast<std::size_t>(a.item)], back.item_ids()[static_cast<std::size_t>(b.item)]);
    EXPECT_EQ(a.value, b.value);
  }
  EXPECT_EQ(back.group_size(UserGroup::Advantaged), ds.group_size(UserGroup::Advantaged));
}

TEST(LoadGroups, RowsForUnratedUsersAreSkipped) {
  TempDir dir;
  auto ds = load_ratings(dir.write("r.csv", "a,x,1\nb,x,5\n"), RatingScale::range(1, 5));
  auto g = load_groups(dir.write("g.csv", "a,D\nb,A\nc,A\n"), ds);
  EXPECT_EQ(g.num_users(), 2);
  EXPECT_EQ(g.group_size(UserGroup::Advantaged), 1);
  EXPECT_THROW(load_groups(dir.write("g2.csv", "a,D\nb,A\na,A\n"), ds), ValidationError);
}
