#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dice/baselines.hpp"
#include "dice/dataset.hpp"
#include "dice/splitter.hpp"
#include "dice/trainer.hpp"

namespace dice {

// Layered key-value configuration: defaults < file < flag overrides.
// Keys are "section.key"; the file format is INI-like sections of key = value
// lines with '#' comments.
class KeyValueConfig {
 public:
  static KeyValueConfig with_defaults();

  void load_file(const std::string& path);         // rejects unknown keys
  void set_override(const std::string& dotted_key, const std::string& value);

  const std::string& get(const std::string& dotted_key) const;
  double get_double(const std::string& dotted_key) const;
  std::int64_t get_int(const std::string& dotted_key) const;
  std::uint64_t get_uint(const std::string& dotted_key) const;
  bool get_bool(const std::string& dotted_key) const;
  std::vector<int> get_int_list(const std::string& dotted_key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  ParseFormat parse_format() const;
  double rating_threshold() const;
  SplitConfig split_config() const;
  TrainConfig train_config() const;
  BaselineConfig baseline_config() const;
  std::vector<int> eval_ks() const;
  std::vector<int> iou_ks() const;
  bool exclude_validation() const;

 private:
  std::map<std::string, std::string> values_;
};

// FNV-1a 64-bit digest of a file's bytes, hex-encoded.
std::string file_digest(const std::string& path);

std::string iso8601_utc_now();

// Reproducibility sidecar written by every command.
struct RunManifest {
  std::string command;
  std::string tool_version;
  std::string timestamp_utc;
  std::map<std::string, std::string> inputs;   // name -> path or digest
  std::map<std::string, std::string> outputs;  // name -> path
  std::map<std::string, std::string> resolved_config;
  std::map<std::string, std::string> notes;    // resolved margins, conventions
};

void write_manifest(const RunManifest& manifest, const std::string& path);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace dice
