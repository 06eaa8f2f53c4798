#include "dice/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

namespace dice {

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> split(const std::string& line, const std::string& delim) {
  std::vector<std::string> out;
  if (delim.empty()) {
    out.push_back(line);
    return out;
  }
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + delim.size();
  }
}

double parse_double(const std::string& field, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line_no, "bad numeric field '" + field + "'");
  }
  return value;
}

std::int64_t parse_int(const std::string& field, std::size_t line_no) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line_no, "bad integer field '" + field + "'");
  }
  return value;
}

}  // namespace

std::vector<RawRating> parse_ratings(std::istream& source, const ParseFormat& format) {
  std::vector<RawRating> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;

    const std::vector<std::string> fields = split(line, format.delimiter);
    if (fields.size() != format.columns.size()) {
      throw ParseError(line_no, "expected " + std::to_string(format.columns.size()) +
                                    " fields, got " + std::to_string(fields.size()));
    }
    RawRating r;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      switch (format.columns[c]) {
        case Column::user:
          r.user_tag = fields[c];
          break;
        case Column::item:
          r.item_tag = fields[c];
          break;
        case Column::rating:
          r.rating = parse_double(fields[c], line_no);
          break;
        case Column::timestamp:
          r.timestamp = parse_int(fields[c], line_no);
          break;
      }
    }
    if (r.user_tag.empty()) throw ParseError(line_no, "empty user tag");
    if (r.item_tag.empty()) throw ParseError(line_no, "empty item tag");
    if (r.rating < format.min_rating || r.rating > format.max_rating) {
      throw ParseError(line_no, "rating " + std::to_string(r.rating) +
                                    " outside [" + std::to_string(format.min_rating) +
                                    ", " + std::to_string(format.max_rating) + "]");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RawRating> parse_ratings_file(const std::string& path, const ParseFormat& format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ratings file: " + path);
  return parse_ratings(in, format);
}

std::vector<std::pair<std::string, std::string>> binarize(
    const std::vector<RawRating>& ratings, double threshold) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(ratings.size());
  for (const RawRating& r : ratings) {
    if (r.rating >= threshold) out.emplace_back(r.user_tag, r.item_tag);
  }
  return out;
}

InteractionTable build_table(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  InteractionTable t;
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(pairs.size());
  for (const auto& [user_tag, item_tag] : pairs) {
    auto [uit, u_new] = t.user_index.try_emplace(
        user_tag, static_cast<std::uint32_t>(t.user_tags.size()));
    if (u_new) t.user_tags.push_back(user_tag);
    auto [iit, i_new] = t.item_index.try_emplace(
        item_tag, static_cast<std::uint32_t>(t.item_tags.size()));
    if (i_new) t.item_tags.push_back(item_tag);

    const std::uint32_t u = uit->second;
    const std::uint32_t i = iit->second;
    const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | i;
    if (seen.insert(key).second) t.records.push_back({u, i});
  }
  t.n_users = static_cast<std::uint32_t>(t.user_tags.size());
  t.n_items = static_cast<std::uint32_t>(t.item_tags.size());
  t.popularity = count_popularity(t.records, t.n_items);
  return t;
}

double interaction_entropy(std::span<const std::int64_t> popularity) {
  double total = 0.0;
  for (const std::int64_t c : popularity) total += static_cast<double>(c);
  if (total <= 0.0) throw std::domain_error("entropy of an all-zero count vector");
  double h = 0.0;
  for (const std::int64_t c : popularity) {
    if (c <= 0) continue;
    const double q = static_cast<double>(c) / total;
    h -= q * std::log(q);
  }
  return h;
}

std::vector<std::int64_t> count_popularity(std::span<const Interaction> records,
                                           std::uint32_t n_items) {
  std::vector<std::int64_t> counts(n_items, 0);
  for (const Interaction& r : records) counts.at(r.item) += 1;
  return counts;
}

namespace {

constexpr char kTableMagic[8] = {'D', 'I', 'C', 'E', 'T', 'B', 'L', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("truncated table cache");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("truncated table cache");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("truncated table cache");
  return s;
}

}  // namespace

void save_table(const InteractionTable& table, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write table cache: " + path);
  os.write(kTableMagic, sizeof(kTableMagic));
  put_u32(os, 1);  // version
  put_u64(os, table.n_users);
  put_u64(os, table.n_items);
  put_u64(os, table.records.size());
  for (const Interaction& r : table.records) {
    put_u32(os, r.user);
    put_u32(os, r.item);
  }
  for (const std::string& tag : table.user_tags) put_string(os, tag);
  for (const std::string& tag : table.item_tags) put_string(os, tag);
  if (!os) throw std::runtime_error("write failed: " + path);
}

InteractionTable load_table(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open table cache: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kTableMagic, 8) != 0) {
    throw std::runtime_error("not a table cache file: " + path);
  }
  const std::uint32_t version = get_u32(is);
  if (version != 1) {
    throw std::runtime_error("unsupported table cache version " +
                             std::to_string(version) + " in " + path);
  }
  InteractionTable t;
  t.n_users = static_cast<std::uint32_t>(get_u64(is));
  t.n_items = static_cast<std::uint32_t>(get_u64(is));
  const std::uint64_t n_records = get_u64(is);
  t.records.resize(n_records);
  for (Interaction& r : t.records) {
    r.user = get_u32(is);
    r.item = get_u32(is);
    if (r.user >= t.n_users || r.item >= t.n_items) {
      throw std::runtime_error("table cache has out-of-range indices: " + path);
    }
  }
  t.user_tags.reserve(t.n_users);
  for (std::uint32_t u = 0; u < t.n_users; ++u) {
    t.user_tags.push_back(get_string(is));
    t.user_index.emplace(t.user_tags.back(), u);
  }
  t.item_tags.reserve(t.n_items);
  for (std::uint32_t i = 0; i < t.n_items; ++i) {
    t.item_tags.push_back(get_string(is));
    t.item_index.emplace(t.item_tags.back(), i);
  }
  t.popularity = count_popularity(t.records, t.n_items);
  return t;
}

}  // namespace dice
