#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "dice/dataset.hpp"
#include "dice/rng.hpp"

using namespace dice;

TEST_CASE("parse_ratings reads movielens-style lines") {
  std::istringstream in("1::50::5::978300760\n2::51::4.5::978300761\n");
  const auto ratings = parse_ratings(in, ParseFormat{});
  REQUIRE(ratings.size() == 2);
  CHECK(ratings[0].user_tag == "1");
  CHECK(ratings[0].item_tag == "50");
  CHECK(ratings[0].rating == 5.0);
  CHECK(*ratings[0].timestamp == 978300760);
  CHECK(ratings[1].rating == 4.5);
}

TEST_CASE("parse_ratings on empty input yields an empty list") {
  std::istringstream in("");
  CHECK(parse_ratings(in, ParseFormat{}).empty());
}

TEST_CASE("parse_ratings rejects a non-numeric rating with the line number") {
  std::istringstream in("1::50::abc::0\n");
  try {
    parse_ratings(in, ParseFormat{});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
  }
}

TEST_CASE("parse_ratings reports the right line for a later error") {
  std::istringstream in("1::50::5::0\n1::51::5::0\n1::52::oops::0\n");
  try {
    parse_ratings(in, ParseFormat{});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }
}

TEST_CASE("parse_ratings handles csv column orders and missing timestamp") {
  ParseFormat f;
  f.delimiter = ",";
  f.columns = {Column::user, Column::item, Column::rating};
  std::istringstream in("a,b,5\nc,d,0.5\n");
  const auto ratings = parse_ratings(in, f);
  REQUIRE(ratings.size() == 2);
  CHECK(!ratings[0].timestamp.has_value());
  CHECK(ratings[1].rating == 0.5);
}

TEST_CASE("parse_ratings rejects wrong field counts and out-of-range ratings") {
  ParseFormat f;
  std::istringstream short_line("1::50::5\n");
  CHECK_THROWS_AS(parse_ratings(short_line, f), ParseError);
  std::istringstream bad_range("1::50::9::0\n");
  CHECK_THROWS_AS(parse_ratings(bad_range, f), ParseError);
}

TEST_CASE("binarize keeps ratings at or above the threshold, in order") {
  std::vector<RawRating> ratings = {
      {"u", "a", 5.0, {}}, {"u", "b", 4.0, {}}, {"v", "c", 5.0, {}}};
  const auto kept = binarize(ratings, 5.0);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == std::pair<std::string, std::string>("u", "a"));
  CHECK(kept[1] == std::pair<std::string, std::string>("v", "c"));

  CHECK(binarize({}, 1.0).empty());

  const auto boundary = binarize({{"u", "a", 3.0, {}}}, 3.0);
  CHECK(boundary.size() == 1);  // threshold is inclusive
}

TEST_CASE("build_table assigns first-appearance indices and counts popularity") {
  const auto t = build_table({{"u1", "a"}, {"u1", "b"}, {"u2", "a"}});
  CHECK(t.n_users == 2);
  CHECK(t.n_items == 2);
  REQUIRE(t.popularity.size() == 2);
  CHECK(t.popularity[0] == 2);  // item "a"
  CHECK(t.popularity[1] == 1);  // item "b"
  CHECK(t.records.size() == 3);
  CHECK(t.user_index.at("u1") == 0);
  CHECK(t.item_index.at("b") == 1);
}

TEST_CASE("build_table drops duplicate pairs, keeping the first") {
  const auto t = build_table({{"u1", "a"}, {"u1", "a"}});
  CHECK(t.records.size() == 1);
  CHECK(t.popularity == std::vector<std::int64_t>{1});
}

TEST_CASE("build_table of nothing is empty") {
  const auto t = build_table({});
  CHECK(t.n_users == 0);
  CHECK(t.n_items == 0);
  CHECK(t.records.empty());
}

TEST_CASE("interaction_entropy matches hand values") {
  CHECK(interaction_entropy(std::vector<std::int64_t>{1, 1, 1, 1}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(interaction_entropy(std::vector<std::int64_t>{5, 0, 0}) == 0.0);
  // -(0.75 ln 0.75 + 0.25 ln 0.25)
  CHECK(interaction_entropy(std::vector<std::int64_t>{3, 1}) ==
        doctest::Approx(0.5623351446188083).epsilon(1e-12));
  CHECK_THROWS_AS(interaction_entropy(std::vector<std::int64_t>{0, 0}),
                  std::domain_error);
}

TEST_CASE("interaction_entropy is permutation-invariant and maximal at uniform") {
  Rng rng(11);
  std::vector<std::int64_t> counts;
  for (int i = 0; i < 12; ++i) counts.push_back(1 + static_cast<std::int64_t>(rng.uniform_below(40)));
  const double before = interaction_entropy(counts);
  std::vector<std::int64_t> shuffled = counts;
  rng.shuffle(shuffled);
  CHECK(interaction_entropy(shuffled) == doctest::Approx(before).epsilon(1e-12));

  std::vector<std::int64_t> uniform(counts.size(), 7);
  CHECK(interaction_entropy(uniform) ==
        doctest::Approx(std::log(static_cast<double>(counts.size()))).epsilon(1e-12));
  CHECK(before <= interaction_entropy(uniform) + 1e-12);
}

TEST_CASE("popularity always sums to the record count") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<std::string, std::string>> pairs;
    const int n = 1 + static_cast<int>(rng.uniform_below(200));
    for (int i = 0; i < n; ++i) {
      pairs.emplace_back("u" + std::to_string(rng.uniform_below(17)),
                         "i" + std::to_string(rng.uniform_below(23)));
    }
    const auto t = build_table(pairs);
    std::int64_t total = 0;
    for (const auto c : t.popularity) total += c;
    CHECK(total == static_cast<std::int64_t>(t.records.size()));
  }
}

TEST_CASE("rebuilding from emitted records reproduces the table") {
  const auto t = build_table({{"u1", "a"}, {"u2", "b"}, {"u1", "c"}, {"u3", "a"}});
  std::vector<std::pair<std::string, std::string>> emitted;
  for (const Interaction& r : t.records) {
    emitted.emplace_back(t.user_tags[r.user], t.item_tags[r.item]);
  }
  const auto rebuilt = build_table(emitted);
  CHECK(rebuilt.n_users == t.n_users);
  CHECK(rebuilt.n_items == t.n_items);
  CHECK(rebuilt.records == t.records);
  CHECK(rebuilt.popularity == t.popularity);
  CHECK(rebuilt.user_tags == t.user_tags);
}

TEST_CASE("table cache round-trips through the binary format") {
  const auto t = build_table({{"u1", "a"}, {"u2", "b"}, {"u1", "b"}});
  const std::string path =
      (std::filesystem::temp_directory_path() / "dice_table_test.bin").string();
  save_table(t, path);
  const auto loaded = load_table(path);
  CHECK(loaded.n_users == t.n_users);
  CHECK(loaded.n_items == t.n_items);
  CHECK(loaded.records == t.records);
  CHECK(loaded.popularity == t.popularity);
  CHECK(loaded.user_tags == t.user_tags);
  CHECK(loaded.item_tags == t.item_tags);
  CHECK(loaded.user_index == t.user_index);
  std::filesystem::remove(path);
}
