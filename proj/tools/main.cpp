#include <CLI11.hpp>

#include <iostream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "lsc/types.hpp"

namespace {

// One machine-readable line on stderr per failure.
int fail(const std::string& command, const std::string& message) {
  std::cerr << nlohmann::json{{"error", message}, {"command", command}}.dump() << '\n';
  return 1;
}

std::vector<int> parse_gamma(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw lsc::Error("--gamma expects comma-separated integers");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense crowd head detection: pseudo ground truth, training, fusion and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  std::string split;
  double nms_threshold = 0.0;
  std::int64_t steps = 0;
  std::string checkpoint;
  bool resume = false;
  bool overlays = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the run seed");
    sub->add_option("--out", out, "Override the output directory");
    sub->add_option("--split", split, "Split file with train / validation / test ids")->check(CLI::ExistingFile);
  };

  auto* gen = app.add_subcommand("gen-gt", "Write pseudo ground truth and class weights");
  add_common(gen);

  auto* train = app.add_subcommand("train", "Train the detector");
  add_common(train);
  train->add_option("--steps", steps, "Step budget");
  train->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");
  train->add_option("--checkpoint", checkpoint, "Checkpoint to resume from");

  auto* fuse = app.add_subcommand("fuse", "Fuse predictions into detections");
  add_common(fuse);
  fuse->add_option("--nms-threshold", nms_threshold, "Suppression threshold");
  fuse->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/checkpoint.json)");

  auto* eval = app.add_subcommand("eval", "Pick the threshold on validation, report test metrics");
  add_common(eval);
  eval->add_option("--nms-threshold", nms_threshold, "Skip the search and use this threshold");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/checkpoint.json)");
  eval->add_flag("--overlays", overlays, "Write box overlay images");

  auto* cat = app.add_subcommand("catalog", "Print the box side table");
  int n_scales = 4;
  int n_boxes = 3;
  std::string gamma = "4,2,1,1";
  bool as_json = false;
  cat->add_option("--config", config_path, "Take the catalog from a run configuration")->check(CLI::ExistingFile);
  cat->add_option("--n-scales", n_scales, "Number of scales");
  cat->add_option("--n-boxes", n_boxes, "Boxes per scale");
  cat->add_option("--gamma", gamma, "Side increments per scale, finest last");
  cat->add_flag("--json", as_json, "JSON output");

  auto* syn = app.add_subcommand("synth", "Write a synthetic crowd dataset");
  lsc::cli::SynthOptions so;
  syn->add_option("--out", out, "Output directory")->required();
  syn->add_option("--count", so.count, "Training images");
  syn->add_option("--validation", so.validation, "Validation images");
  syn->add_option("--test", so.test, "Test images");
  syn->add_option("--width", so.width, "Image width");
  syn->add_option("--height", so.height, "Image height");
  syn->add_option("--seed", so.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(app.get_subcommands().empty() ? "lsc" : app.get_subcommands().front()->get_name(), e.what());
  }

  CLI::App* used = app.get_subcommands().front();
  const std::string name = used->get_name();
  try {
    if (used == cat) {
      const auto c = config_path.empty()
                         ? lsc::BoxCatalog::build(n_scales, n_boxes, parse_gamma(gamma))
                         : lsc::cli::read_run_config(config_path).catalog();
      std::cout << lsc::cli::catalog_table(c, as_json);
      return 0;
    }
    if (used == syn) {
      for (const auto& p : lsc::cli::cmd_synth(out, so)) std::cout << p.string() << '\n';
      return 0;
    }
    lsc::cli::Overrides o;
    if (used->count("--seed")) o.seed = seed;
    if (used->count("--out")) o.out = out;
    if (used->count("--split")) o.split = split;
    if (used->get_option_no_throw("--nms-threshold") && used->count("--nms-threshold")) o.nms_threshold = nms_threshold;
    if (used->get_option_no_throw("--steps") && used->count("--steps")) o.steps = steps;
    if (used->get_option_no_throw("--checkpoint") && used->count("--checkpoint")) o.checkpoint = checkpoint;
    o.resume = resume || o.checkpoint.has_value();
    if (used != train) o.resume = false;
    o.overlays = overlays;
    const auto c = lsc::cli::apply(lsc::cli::read_run_config(config_path), o);

    std::vector<std::filesystem::path> written;
    if (used == gen) written = lsc::cli::cmd_gen_gt(c, o);
    if (used == train) written = lsc::cli::cmd_train(c, o);
    if (used == fuse) written = lsc::cli::cmd_fuse(c, o);
    if (used == eval) written = lsc::cli::cmd_eval(c, o);
    for (const auto& p : written) std::cout << p.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    return fail(name, e.what());
  }
}
