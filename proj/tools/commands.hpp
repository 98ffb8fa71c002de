#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsc/box_catalog.hpp"
#include "lsc/fusion.hpp"
#include "lsc/refnet/network.hpp"

namespace lsc::cli {

struct TrainOptions {
  std::int64_t steps = 2000;
  std::int64_t eval_every = 100;  // steps between validation rounds
  int patience = 5;               // rounds without MAE improvement before stopping
  std::string loss = "wta";       // "wta" or "combined"
  friend bool operator==(const TrainOptions&, const TrainOptions&) = default;
};

/// Everything a run needs. Relative paths resolve against the working directory.
struct RunConfig {
  int n_scales = 4;
  int n_boxes = 3;
  std::vector<int> gamma{4, 2, 1, 1};
  nn::NetConfig net;
  NmsConfig nms;
  TrainOptions train;
  std::string annotations;  // JSON-lines point annotations
  std::string images;       // directory of <image_id>.ppm / .pgm
  std::string output = "run";
  std::uint64_t seed = 1;

  BoxCatalog catalog() const;
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig read_run_config(const std::filesystem::path& path);

/// Image ids per role. No id may appear in two roles.
struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};
Split read_split(const std::filesystem::path& path);
Split parse_split(const nlohmann::json& j);

/// Per-invocation overrides shared by the subcommands.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> split;
  std::optional<double> nms_threshold;
  std::optional<std::int64_t> steps;
  std::optional<std::string> checkpoint;
  bool resume = false;
  bool overlays = false;
};

/// Applies overrides; --seed reseeds the network too.
RunConfig apply(RunConfig c, const Overrides& o);

// Each command throws lsc::Error on failure and returns the files it wrote.
std::vector<std::filesystem::path> cmd_gen_gt(const RunConfig& c, const Overrides& o);
std::vector<std::filesystem::path> cmd_train(const RunConfig& c, const Overrides& o);
std::vector<std::filesystem::path> cmd_fuse(const RunConfig& c, const Overrides& o);
std::vector<std::filesystem::path> cmd_eval(const RunConfig& c, const Overrides& o);

/// Box side table as text, or as JSON {"n_scales", "n_boxes", "gamma", "beta": [[...], ...]}.
std::string catalog_table(const BoxCatalog& catalog, bool as_json);

struct SynthOptions {
  int count = 10;
  int width = 224;
  int height = 224;
  std::uint64_t seed = 1;
  int validation = 0;  // trailing images reserved for validation
  int test = 0;        // then for test
};
/// Writes annotations.jsonl, images/, split.json and config.json under `out`.
std::vector<std::filesystem::path> cmd_synth(const std::filesystem::path& out, const SynthOptions& o);

}  // namespace lsc::cli
