#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dice {

// One line of a raw rating file, before binarization.
struct RawRating {
  std::string user_tag;
  std::string item_tag;
  double rating = 0.0;
  std::optional<std::int64_t> timestamp;
};

struct ParseError : std::runtime_error {
  ParseError(std::size_t line_number, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
  std::size_t line;
};

enum class Column { user, item, rating, timestamp };

struct ParseFormat {
  std::string delimiter = "::";
  std::vector<Column> columns = {Column::user, Column::item, Column::rating,
                                 Column::timestamp};
  double min_rating = 0.5;
  double max_rating = 5.0;
};

// A (user, item) implicit-feedback record with dense indices.
struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Indexed implicit feedback: dense ids, deduplicated records, per-item
// interaction counts. Immutable once built; safe to share across threads.
struct InteractionTable {
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  std::vector<Interaction> records;
  std::vector<std::int64_t> popularity;  // per item, == #records on that item
  std::vector<std::string> user_tags;    // dense index -> external tag
  std::vector<std::string> item_tags;
  std::unordered_map<std::string, std::uint32_t> user_index;
  std::unordered_map<std::string, std::uint32_t> item_index;
};

// Parses delimited rating lines ("1::50::5::978300760" or CSV). Whitespace-only
// lines are skipped; any other malformed line raises ParseError with its
// 1-based line number. An empty stream yields an empty list.
std::vector<RawRating> parse_ratings(std::istream& source, const ParseFormat& format);
std::vector<RawRating> parse_ratings_file(const std::string& path, const ParseFormat& format);

// Keeps exactly the ratings with rating >= threshold, in input order.
std::vector<std::pair<std::string, std::string>> binarize(
    const std::vector<RawRating>& ratings, double threshold = 5.0);

// Assigns dense indices in first-appearance order and drops duplicate
// (user, item) pairs, keeping the first occurrence.
InteractionTable build_table(
    const std::vector<std::pair<std::string, std::string>>& pairs);

// Shannon entropy (nats) of the normalized count vector; zero counts
// contribute nothing. Throws std::domain_error if every count is zero.
double interaction_entropy(std::span<const std::int64_t> popularity);

// Per-item counts for an arbitrary record subset of a table with n_items items.
std::vector<std::int64_t> count_popularity(std::span<const Interaction> records,
                                           std::uint32_t n_items);

// Binary cache (versioned header, little-endian counts); format documented
// in the README. Popularity is recomputed on load.
void save_table(const InteractionTable& table, const std::string& path);
InteractionTable load_table(const std::string& path);

}  // namespace dice
