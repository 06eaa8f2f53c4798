#pragma once

#include <string>
#include <vector>

#include "dice/config.hpp"

namespace dice::cli {

struct CommonOptions {
  std::string config_path;             // optional
  std::vector<std::string> overrides;  // "section.key=value", highest precedence
};

// defaults < config file < --set overrides.
KeyValueConfig resolve_config(const CommonOptions& opts);

// Relative paths land under $DICE_OUTPUT_ROOT when it is set.
std::string resolve_output_dir(const std::string& dir);

// Each command throws on error (the CLI maps that to a nonzero exit) and
// writes a run manifest next to its outputs.
void run_prepare(const CommonOptions& opts, const std::string& ratings_path,
                 const std::string& out_dir);
void run_train(const CommonOptions& opts, const std::string& model,
               const std::string& bundle_dir, const std::string& out_dir);
void run_evaluate(const CommonOptions& opts, const std::string& model,
                  const std::string& checkpoint_path, const std::string& bundle_dir,
                  const std::string& out_dir, const std::vector<std::string>& variants,
                  bool per_user = false);
void run_compare(const std::vector<std::string>& report_paths,
                 const std::string& reference_model, const std::string& out_dir);
void run_export_embeddings(const std::string& checkpoint_path,
                           const std::string& bundle_dir, const std::string& out_dir);

}  // namespace dice::cli
