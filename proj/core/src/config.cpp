#include "dice/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dice {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      {"dataset.delimiter", "::"},
      {"dataset.columns", "user,item,rating,timestamp"},
      {"dataset.rating_threshold", "5.0"},
      {"dataset.min_rating", "0.5"},
      {"dataset.max_rating", "5.0"},
      {"splitter.intervened_fraction", "0.4"},
      {"splitter.probability_cap", "0.9"},
      {"splitter.alloc_train_intervened", "0.10"},
      {"splitter.alloc_validation", "0.10"},
      {"splitter.alloc_test", "0.20"},
      {"splitter.seed", "42"},
      {"sampler.strategy", "pnsm"},
      {"sampler.m_up", "auto"},
      {"sampler.m_down", "auto"},
      {"sampler.negatives_per_positive", "4"},
      {"model.dim", "64"},
      {"trainer.alpha0", "0.1"},
      {"trainer.beta", "0.01"},
      {"trainer.decay", "0.9"},
      {"trainer.learning_rate", "0.001"},
      {"trainer.batch_size", "1024"},
      {"trainer.epochs", "30"},
      {"trainer.patience", "10"},
      {"trainer.seed", "42"},
      {"trainer.discrepancy", "dcor"},
      {"trainer.curriculum", "on"},
      {"trainer.weight_decay", "0.0"},
      {"trainer.conformity_task", "on"},
      {"trainer.literal_o2_conformity", "off"},
      {"trainer.discrepancy_distance_cap", "0"},
      {"trainer.intervened_train_fraction", "all"},
      {"evaluator.ks", "20,50"},
      {"evaluator.iou_ks", "10,20,30,40,50,60,70,80,90,100"},
      {"evaluator.exclude_validation", "off"},
      {"baselines.ips_cap_quantile", "0.95"},
      {"baselines.ips_smoothing_exponent", "0.5"},
      {"baselines.cause_gamma", "0.01"},
      {"baselines.cause_penalty", "l2"},
  };
  return defaults;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': bad boolean '" + v + "'");
}

}  // namespace

KeyValueConfig KeyValueConfig::with_defaults() {
  KeyValueConfig cfg;
  cfg.values_ = default_values();
  return cfg;
}

void KeyValueConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key =
        (section.empty() ? "" : section + ".") + trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!values_.count(key) && !key.starts_with("dataset.ratings")) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" +
                        key + "'");
    }
    values_[key] = value;
  }
}

void KeyValueConfig::set_override(const std::string& dotted_key,
                                  const std::string& value) {
  if (!values_.count(dotted_key) && dotted_key != "dataset.ratings") {
    throw ConfigError("unknown config key '" + dotted_key + "'");
  }
  values_[dotted_key] = value;
}

const std::string& KeyValueConfig::get(const std::string& dotted_key) const {
  const auto it = values_.find(dotted_key);
  if (it == values_.end()) {
    throw ConfigError("missing config key '" + dotted_key + "'");
  }
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  }
}

std::int64_t KeyValueConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  }
  return out;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) throw ConfigError("config key '" + key + "': must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key) const {
  return parse_bool(get(key), key);
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad list entry '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

ParseFormat KeyValueConfig::parse_format() const {
  ParseFormat f;
  f.delimiter = get("dataset.delimiter");
  f.min_rating = get_double("dataset.min_rating");
  f.max_rating = get_double("dataset.max_rating");
  f.columns.clear();
  std::stringstream ss(get("dataset.columns"));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok == "user") {
      f.columns.push_back(Column::user);
    } else if (tok == "item") {
      f.columns.push_back(Column::item);
    } else if (tok == "rating") {
      f.columns.push_back(Column::rating);
    } else if (tok == "timestamp") {
      f.columns.push_back(Column::timestamp);
    } else {
      throw ConfigError("dataset.columns: unknown column '" + tok + "'");
    }
  }
  if (f.columns.empty()) throw ConfigError("dataset.columns is empty");
  return f;
}

double KeyValueConfig::rating_threshold() const {
  return get_double("dataset.rating_threshold");
}

SplitConfig KeyValueConfig::split_config() const {
  SplitConfig c;
  c.intervened_fraction = get_double("splitter.intervened_fraction");
  c.probability_cap = get_double("splitter.probability_cap");
  c.alloc_train_intervened = get_double("splitter.alloc_train_intervened");
  c.alloc_validation = get_double("splitter.alloc_validation");
  c.alloc_test = get_double("splitter.alloc_test");
  c.seed = get_uint("splitter.seed");
  return c;
}

TrainConfig KeyValueConfig::train_config() const {
  TrainConfig c;
  c.dim = static_cast<std::uint32_t>(get_uint("model.dim"));
  c.alpha0 = get_double("trainer.alpha0");
  c.beta = get_double("trainer.beta");
  c.decay = get_double("trainer.decay");
  c.m_up0 = get("sampler.m_up") == "auto" ? -1.0 : get_double("sampler.m_up");
  c.m_down0 = get("sampler.m_down") == "auto" ? -1.0 : get_double("sampler.m_down");
  c.negatives_per_positive =
      static_cast<std::uint32_t>(get_uint("sampler.negatives_per_positive"));
  c.learning_rate = get_double("trainer.learning_rate");
  c.batch_size = static_cast<std::uint32_t>(get_uint("trainer.batch_size"));
  c.epochs = static_cast<std::uint32_t>(get_uint("trainer.epochs"));
  c.patience = static_cast<std::uint32_t>(get_uint("trainer.patience"));
  c.seed = get_uint("trainer.seed");
  c.discrepancy = parse_discrepancy_kind(get("trainer.discrepancy"));
  c.curriculum = get_bool("trainer.curriculum");
  const std::string& strategy = get("sampler.strategy");
  if (strategy == "pnsm") {
    c.strategy = SamplingStrategy::pnsm;
  } else if (strategy == "random") {
    c.strategy = SamplingStrategy::random;
  } else {
    throw ConfigError("sampler.strategy must be 'pnsm' or 'random', got '" +
                      strategy + "'");
  }
  c.weight_decay = get_double("trainer.weight_decay");
  c.conformity_task = get_bool("trainer.conformity_task");
  c.literal_o2_negation = get_bool("trainer.literal_o2_conformity");
  c.discrepancy_distance_cap = get_double("trainer.discrepancy_distance_cap");
  const std::string& itf = get("trainer.intervened_train_fraction");
  c.intervened_train_fraction = itf == "all" ? -1.0 : get_double("trainer.intervened_train_fraction");
  c.validate();
  return c;
}

BaselineConfig KeyValueConfig::baseline_config() const {
  BaselineConfig c;
  c.ips.cap_quantile = get_double("baselines.ips_cap_quantile");
  c.ips.smoothing_exponent = get_double("baselines.ips_smoothing_exponent");
  c.cause.gamma = get_double("baselines.cause_gamma");
  const std::string& penalty = get("baselines.cause_penalty");
  if (penalty == "l1") {
    c.cause.l1_penalty = true;
  } else if (penalty == "l2") {
    c.cause.l1_penalty = false;
  } else {
    throw ConfigError("baselines.cause_penalty must be 'l1' or 'l2'");
  }
  return c;
}

std::vector<int> KeyValueConfig::eval_ks() const { return get_int_list("evaluator.ks"); }
std::vector<int> KeyValueConfig::iou_ks() const { return get_int_list("evaluator.iou_ks"); }
bool KeyValueConfig::exclude_validation() const {
  return get_bool("evaluator.exclude_validation");
}

std::string file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    const std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[32];
  std::snprintf(out, sizeof(out), "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return out;
}

std::string iso8601_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["tool_version"] = manifest.tool_version;
  j["timestamp_utc"] = manifest.timestamp_utc;
  j["inputs"] = manifest.inputs;
  j["outputs"] = manifest.outputs;
  j["resolved_config"] = manifest.resolved_config;
  j["notes"] = manifest.notes;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest: " + path);
  os << j.dump(2) << '\n';
}

}  // namespace dice
