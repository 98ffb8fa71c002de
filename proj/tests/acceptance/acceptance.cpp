// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "generators.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "overfit_gate.hpp"
#include "lsc/fusion.hpp"
#include "lsc/gwta_loss.hpp"
#include "lsc/metrics.hpp"
#include "lsc/pseudo_gt.hpp"
#include "lsc/serialization.hpp"
#include "lsc/synthetic.hpp"

namespace fs = std::filesystem;
using namespace lsc;

namespace {

// Pinned tolerances.
constexpr double kGwtaAbsTol = 1e-12;
constexpr double kGwtaBruteRelTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradBudgetSeconds = 120.0;
constexpr int kGradSamples = 120;
constexpr double kMleOracleAbsTol = 1e-9;

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// Box side formula evaluated directly, finest scale first.
std::vector<std::vector<int>> catalog_recurrence(int ns, int nb, const std::vector<int>& gamma) {
  std::vector<std::vector<int>> t(ns, std::vector<int>(nb));
  for (int s = ns - 1; s >= 0; --s) {
    for (int b = 1; b <= nb; ++b) t[s][b - 1] = s == ns - 1 ? 1 + (b - 1) * gamma[s] : t[s + 1][nb - 1] + b * gamma[s];
  }
  return t;
}

Outcome criterion_catalog(const std::string& cli, const std::string& oracle) {
  Outcome o;
  const auto c = BoxCatalog::build(4, 3, {4, 2, 1, 1});
  const int golden[4][3] = {{16, 20, 24}, {8, 10, 12}, {4, 5, 6}, {1, 2, 3}};
  for (int s = 0; s < 4; ++s) {
    for (int b = 1; b <= 3; ++b) {
      if (c.beta(s, b) != golden[s][b - 1]) o.fail("golden mismatch at scale " + std::to_string(s));
    }
  }
  SplitMix64 rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    const int ns = 1 + static_cast<int>(rng.below(4));
    const int nb = 1 + static_cast<int>(rng.below(6));
    std::vector<int> gamma(ns);
    for (auto& g : gamma) g = 1 + static_cast<int>(rng.below(8));
    const auto cat = BoxCatalog::build(ns, nb, gamma);
    const auto ref = catalog_recurrence(ns, nb, gamma);
    for (int s = 0; s < ns; ++s) {
      for (int b = 1; b <= nb; ++b) {
        if (cat.beta(s, b) != ref[s][b - 1]) o.fail("recurrence mismatch");
      }
    }
  }
  // Independent script, run against the command-line tool.
  if (cli.empty() || oracle.empty()) {
    o.fail("oracle script not configured");
    return o;
  }
  const std::string cmd = "python3 '" + oracle + "' '" + cli + "' 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) {
    o.fail("could not start the oracle script");
    return o;
  }
  std::string out;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), p)) out += buf.data();
  const int status = pclose(p);
  if (status != 0) o.fail("oracle script reported: " + out);
  if (o.pass) o.detail = "golden, 500 recurrence cases, script oracle";
  return o;
}

Outcome criterion_nearest_neighbor() {
  Outcome o;
  SplitMix64 rng(202);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.below(11));
    const auto pts = testgen::random_points(rng, n, 50.0 + rng.uniform(0, 200), 50.0 + rng.uniform(0, 200));
    const auto got = nearest_neighbor_sizes(pts).sizes;
    const auto ref = oracle::brute_force_nn(pts);
    if (got != ref) o.fail("set " + std::to_string(trial) + " differs from the exhaustive oracle");
  }
  const std::vector<Point> one{{3.0, 4.0}};
  const auto single = nearest_neighbor_sizes(one).sizes;
  if (single.size() != 1 || single[0] != kInfiniteSize) o.fail("single point is not the infinite sentinel");
  const auto c = BoxCatalog::build(4, 3, {4, 2, 1, 1});
  if (!(assign_box(kInfiniteSize, c) == BoxAssignment{0, 3})) o.fail("infinite size does not map to (0, n_B)");
  if (o.pass) o.detail = "1000 sets exact, sentinel -> (0, 3)";
  return o;
}

Outcome criterion_class_weights() {
  Outcome o;
  SplitMix64 rng(303);
  for (int trial = 0; trial < 100; ++trial) {
    const int ns = 1 + static_cast<int>(rng.below(4));
    const int nb = 1 + static_cast<int>(rng.below(4));
    const auto t = testgen::random_counts(rng, ns, nb);
    const std::int64_t k = 2 + static_cast<std::int64_t>(rng.below(1000));
    ClassCountTable scaled(ns, nb);
    for (int s = 0; s < ns; ++s) {
      for (int b = 0; b <= nb; ++b) scaled.at(s, b) = k * t.at(s, b);
    }
    for (const auto& f : {class_weights, gwta_class_weights}) {
      if (!(f(t) == f(scaled))) o.fail("table " + std::to_string(trial) + " changes under scaling by " + std::to_string(k));
    }
  }
  // cap: background ratio 50 is clipped to 10, ratio 3 is not
  ClassCountTable cap(1, 2);
  cap.at(0, 0) = 5000;
  cap.at(0, 1) = 100;
  cap.at(0, 2) = 1700;
  const auto wc = class_weights(cap);
  if (wc.at(0, 1) != 10.0) o.fail("cap inactive at ratio 50");
  if (wc.at(0, 2) != 5000.0 / 1700.0) o.fail("cap applied below the limit");
  // hand example
  ClassCountTable t(2, 2);
  t.at(0, 0) = 10000;
  t.at(0, 1) = 100;
  t.at(0, 2) = 100;
  t.at(1, 0) = 40000;
  t.at(1, 1) = 300;
  t.at(1, 2) = 100;
  const auto w = class_weights(t);
  const double expect[2][3] = {{1.0, 10.0, 10.0}, {0.5, 5.0, 5.0}};
  for (int s = 0; s < 2; ++s) {
    for (int b = 0; b <= 2; ++b) {
      if (w.at(s, b) != expect[s][b]) o.fail("hand example differs at scale " + std::to_string(s));
    }
  }
  if (o.pass) o.detail = "100 tables exact, cap, hand example";
  return o;
}

Outcome criterion_gwta() {
  Outcome o;
  SplitMix64 rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto frame = ImageFrame::padded_to(16 * (1 + static_cast<int>(rng.below(6))),
                                             16 * (1 + static_cast<int>(rng.below(6))));
    const int nb = 1 + static_cast<int>(rng.below(3));
    LabelGridSet one = testgen::random_labels(rng, frame, 1, nb, 0.3);
    const auto scores = testgen::random_scores(rng, one, nb);
    const auto w = testgen::random_weights(rng, 1, nb);
    const auto cells = gwta_cell_losses(scores, one, w);
    const double total = branch_loss(scores[0], one.scales[0], w.scale(0)) * static_cast<double>(one.scales[0].size());
    // one cell covers the whole coarsest map
    worst = std::max(worst, std::abs(cells.scales[0].at(0, 0) - total) / static_cast<double>(one.scales[0].size()));
    const double lw = gwta_loss(scores, one, w).l_wta;
    worst = std::max(worst, std::abs(lw - branch_loss(scores[0], one.scales[0], w.scale(0))));
  }
  if (worst > kGwtaAbsTol) o.fail("single-cell gap " + fmt(worst));
  for (int trial = 0; trial < 100; ++trial) {
    const int ns = 1 + static_cast<int>(rng.below(4));
    const int nb = 1 + static_cast<int>(rng.below(3));
    const auto frame = ImageFrame::padded_to(16 * (1 + static_cast<int>(rng.below(5))) - static_cast<int>(rng.below(8)),
                                             16 * (1 + static_cast<int>(rng.below(5))));
    const auto labels = testgen::random_labels(rng, frame, ns, nb, 0.2);
    const auto scores = testgen::random_scores(rng, labels, nb);
    const auto w = testgen::random_weights(rng, ns, nb);
    std::vector<CellCorner> winners;
    const double expect = oracle::brute_force_wta(scores, labels, w, &winners);
    const auto r = gwta_loss(scores, labels, w);
    if (std::abs(r.l_wta - expect) > kGwtaBruteRelTol * std::max(1.0, std::abs(expect)) || r.winners != winners) {
      o.fail("instance " + std::to_string(trial) + " differs from enumeration");
    }
  }
  if (o.pass) o.detail = "single-cell gap " + fmt(worst) + ", 100 enumerations";
  return o;
}

Outcome criterion_gradients() {
  Outcome o;
  const auto t0 = Clock::now();
  std::ostringstream d;
  double worst = 0.0;
  const auto record = [&](const char* name, const gradcheck::Stats& s) {
    if (s.checked < 100) o.fail(std::string(name) + " checked only " + std::to_string(s.checked));
    if (!(s.max_rel_error < kGradRelTol)) o.fail(std::string(name) + " rel error " + fmt(s.max_rel_error));
    worst = std::max(worst, s.max_rel_error);
    d << name << ' ' << fmt(s.max_rel_error) << "; ";
  };
  using nn::OpKind;
  record("conv", gradcheck::check_layer_kind(OpKind::Conv, kGradSamples, 11));
  record("conv_transpose", gradcheck::check_layer_kind(OpKind::ConvTranspose, kGradSamples, 12));
  record("max_pool", gradcheck::check_layer_kind(OpKind::MaxPool, kGradSamples, 13));
  record("concat", gradcheck::check_layer_kind(OpKind::Concat, kGradSamples, 14));
  record("relu", gradcheck::check_layer_kind(OpKind::Relu, kGradSamples, 15));
  record("softmax_loss", gradcheck::check_softmax_loss(kGradSamples, 16));
  const auto net = gradcheck::check_network(kGradSamples, 17);
  record("network_conv", net.conv);
  record("network_conv_transpose", net.conv_transpose);
  const double elapsed = seconds_since(t0);
  if (elapsed > kGradBudgetSeconds) o.fail("took " + fmt(elapsed) + " s");
  o.detail = (o.pass ? "" : o.detail + " | ") + d.str() + fmt(elapsed) + " s";
  return o;
}

Outcome criterion_round_trip() {
  Outcome o;
  const auto c = BoxCatalog::build(4, 3, {4, 2, 1, 1});
  int scenes = 0;
  int skipped = 0;
  for (std::uint64_t seed = 1; scenes < 200; ++seed) {
    auto a = synth::make_sparse_points(seed, 96 + static_cast<int>(seed % 5) * 24, 80 + static_cast<int>(seed % 3) * 32,
                                       2 + static_cast<int>(seed % 25), 5.0, "s");
    // restrict to scenes without cell collisions or box overlap above the threshold
    if (!synth::fusion_round_trips(a, c, NmsConfig{})) {
      ++skipped;
      continue;
    }
    ++scenes;
    const auto gt = generate_pseudo_gt(a, c);
    const auto r = fuse_and_count(one_hot_scores(gt, 3), c, gt.frame, {});
    if (r.count != static_cast<int>(a.points.size())) {
      o.fail("scene seed " + std::to_string(seed) + ": " + std::to_string(r.count) + " of " +
             std::to_string(a.points.size()));
    }
  }
  if (o.pass) o.detail = "200 scenes exact (" + std::to_string(skipped) + " colliding scenes skipped)";
  return o;
}

Outcome criterion_overfit() {
  Outcome o;
  const auto r = gate::run_overfit_gate();
  std::ostringstream d;
  d << "params " << r.parameters << ", steps " << r.steps << ", MAE " << fmt(r.mae) << ", MLE " << fmt(r.mle)
    << " px, " << fmt(r.seconds) << " s";
  if (r.parameters > gate::kMaxParameters) o.fail("too many parameters");
  if (!(r.mae <= gate::kMaxMae)) o.fail("MAE above " + fmt(gate::kMaxMae));
  if (!(r.mle <= gate::kMaxMle)) o.fail("MLE above " + fmt(gate::kMaxMle));
  if (!(r.seconds < gate::kMaxSeconds)) o.fail("over the time budget");
  o.detail = (o.pass ? "" : o.detail + " | ") + d.str();
  return o;
}

EvalRecord record(std::vector<Point> pred, std::vector<Point> gt, int w, int h) {
  EvalRecord r;
  r.width = w;
  r.height = h;
  r.predicted_points = std::move(pred);
  r.gt_points = std::move(gt);
  return r;
}

Outcome criterion_metrics() {
  Outcome o;
  SplitMix64 rng(808);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EvalRecord> recs;
    const int n = 1 + static_cast<int>(rng.below(8));
    for (int i = 0; i < n; ++i) {
      const int w = 16 + static_cast<int>(rng.below(300));
      const int h = 16 + static_cast<int>(rng.below(300));
      recs.push_back(record(testgen::random_points(rng, static_cast<int>(rng.below(40)), w, h),
                            testgen::random_points(rng, static_cast<int>(rng.below(40)), w, h), w, h));
    }
    if (game(recs, 0) != mae(recs)) o.fail("GAME(0) != MAE on set " + std::to_string(trial));
    for (int l = 0; l < 5; ++l) {
      if (game(recs, l + 1) < game(recs, l)) o.fail("GAME not monotone on set " + std::to_string(trial));
    }
    if (mse(recs) < mae(recs)) o.fail("MSE < MAE on set " + std::to_string(trial));
  }
  for (int trial = 0; trial < 500; ++trial) {
    const auto pred = testgen::random_points(rng, static_cast<int>(rng.below(7)), 48, 48);
    const auto gt = testgen::random_points(rng, static_cast<int>(rng.below(7)), 48, 48);
    const double got = localization_cost(pred, gt);
    const double ref = oracle::brute_force_localization(pred, gt, kLocalizationPenalty);
    if (std::abs(got - ref) > kMleOracleAbsTol) o.fail("MLE matching differs from brute force");
  }
  if (o.pass) o.detail = "100 record sets, 500 matchings";
  return o;
}

Outcome criterion_nms() {
  Outcome o;
  SplitMix64 rng(909);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Detection> d;
    const int n = static_cast<int>(rng.below(50));
    for (int i = 0; i < n; ++i) {
      d.push_back({static_cast<double>(rng.below(80)), static_cast<double>(rng.below(80)),
                   static_cast<int>(1 + rng.below(24)), static_cast<int>(rng.below(4)),
                   static_cast<int>(1 + rng.below(3)), static_cast<double>(1 + rng.below(10)) / 10.0});
    }
    const NmsConfig cfg{rng.uniform(0.05, 0.95)};
    const auto kept = nms(d, cfg);
    if (nms(kept, cfg) != kept) o.fail("not idempotent on set " + std::to_string(trial));
    for (const auto& k : kept) {
      if (std::find(d.begin(), d.end(), k) == d.end()) o.fail("output not a subset on set " + std::to_string(trial));
    }
    std::vector<Detection> shuffled;
    for (auto i : permutation(d.size(), rng)) shuffled.push_back(d[i]);
    if (nms(shuffled, cfg) != kept) o.fail("order dependent on set " + std::to_string(trial));
  }
  // side 26, centres 14 apart: intersection 12 * 26 = 312, union 1040, IoU exactly 0.3
  const std::vector<Detection> edge{{13, 13, 26, 0, 1, 0.9}, {27, 13, 26, 0, 1, 0.8}};
  if (iou(edge[0].bounds(), edge[1].bounds()) != 0.3) o.fail("boundary pair is not at IoU 0.3");
  if (nms(edge, NmsConfig{0.3}).size() != 2) o.fail("IoU equal to the threshold was suppressed");
  if (o.pass) o.detail = "1000 sets, boundary kept";
  return o;
}

std::vector<std::pair<std::string, std::string>> read_tree(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), root).string(), io::read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome criterion_determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("lsc_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  cli::SynthOptions so;
  so.count = 6;
  so.validation = 2;
  so.test = 2;
  so.width = 128;
  so.height = 128;
  so.seed = 5;
  cli::cmd_synth(root / "data", so);
  auto cfg = cli::read_run_config(root / "data" / "config.json");
  cfg.net.base_channels = 1;
  cfg.train.steps = 12;
  cfg.train.eval_every = 4;
  const std::string split = (root / "data" / "split.json").string();
  for (const char* run : {"a", "b"}) {
    cli::Overrides ov;
    ov.split = split;
    ov.out = (root / run).string();
    const auto c = cli::apply(cfg, ov);
    cli::cmd_gen_gt(c, ov);
    cli::cmd_train(c, ov);
    cli::cmd_fuse(c, ov);
    cli::cmd_eval(c, ov);
  }
  const auto a = read_tree(root / "a");
  const auto b = read_tree(root / "b");
  int gt_files = 0;
  for (const auto& [name, body] : a) gt_files += name.rfind("gt/", 0) == 0;
  if (a.size() != b.size()) o.fail("runs wrote different file sets");
  for (std::size_t i = 0; o.pass && i < a.size(); ++i) {
    if (a[i] != b[i]) o.fail("'" + a[i].first + "' differs between runs");
  }
  for (const char* must : {"checkpoint.json", "eval/report.json", "weights.json", "trace.csv"}) {
    if (std::none_of(a.begin(), a.end(), [&](const auto& f) { return f.first == must; })) {
      o.fail(std::string("missing ") + must);
    }
  }
  fs::remove_all(root);
  if (o.pass) o.detail = std::to_string(a.size()) + " files identical (" + std::to_string(gt_files) + " GT files)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli = LSC_CLI_PATH;
  std::string oracle = LSC_CATALOG_ORACLE;
  std::vector<int> only;
  app.add_option("--cli", cli, "Path of the lsc tool");
  app.add_option("--oracle", oracle, "Path of the catalog oracle script");
  app.add_option("--only", only, "Run only these criteria (1-based)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"box catalog golden and oracle", [&] { return criterion_catalog(cli, oracle); }},
      {"nearest-neighbour sizes vs exhaustive oracle", criterion_nearest_neighbor},
      {"class weight properties", criterion_class_weights},
      {"winner-cell loss identities", criterion_gwta},
      {"gradients vs central differences", criterion_gradients},
      {"round-trip counting on sparse scenes", criterion_round_trip},
      {"toy overfit gate", criterion_overfit},
      {"metric identities", criterion_metrics},
      {"NMS properties", criterion_nms},
      {"CLI determinism", criterion_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("threw: ") + e.what();
    }
    failed += !r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << " -- " << r.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
