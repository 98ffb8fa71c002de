#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lsc/image_io.hpp"
#include "lsc/metrics.hpp"
#include "lsc/pseudo_gt.hpp"
#include "lsc/refnet/trainer.hpp"
#include "lsc/serialization.hpp"
#include "lsc/synthetic.hpp"

namespace lsc::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys{"catalog", "net", "nms", "train", "annotations", "images", "output", "seed"};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw Error("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("config field '") + key + "' has the wrong type");
  }
}

fs::path gt_dir(const RunConfig& c) { return fs::path(c.output) / "gt"; }
fs::path weights_path(const RunConfig& c) { return fs::path(c.output) / "weights.json"; }
fs::path checkpoint_path(const RunConfig& c) { return fs::path(c.output) / "checkpoint.json"; }
fs::path trace_path(const RunConfig& c) { return fs::path(c.output) / "trace.csv"; }

std::map<std::string, PointAnnotationSet> annotations_by_id(const RunConfig& c) {
  if (c.annotations.empty()) throw Error("config has no annotations path");
  std::map<std::string, PointAnnotationSet> out;
  for (auto& a : io::read_annotations(c.annotations)) {
    const std::string id = a.image_id;
    if (!out.emplace(id, std::move(a)).second) throw Error("duplicate image id '" + id + "' in annotations");
  }
  return out;
}

std::vector<std::string> all_ids(const std::map<std::string, PointAnnotationSet>& by_id) {
  std::vector<std::string> ids;
  for (const auto& [id, a] : by_id) ids.push_back(id);
  return ids;
}

const PointAnnotationSet& lookup(const std::map<std::string, PointAnnotationSet>& by_id, const std::string& id) {
  const auto it = by_id.find(id);
  if (it == by_id.end()) throw Error("split names unknown image '" + id + "'");
  return it->second;
}

nn::Tensor load_image(const RunConfig& c, const PointAnnotationSet& a) {
  if (c.images.empty()) throw Error("config has no images directory");
  auto img = io::read_pnm(io::find_image(c.images, a.image_id));
  if (img.width() != a.width || img.height() != a.height) {
    throw Error("image '" + a.image_id + "' is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                " but annotated as " + std::to_string(a.width) + "x" + std::to_string(a.height));
  }
  if (img.channels() != c.net.in_channels) throw Error("image channel count does not match the network");
  return img;
}

io::LabelFile load_gt(const RunConfig& c, const std::string& id) {
  const fs::path p = gt_dir(c) / (id + ".json");
  if (!fs::exists(p)) throw Error("missing ground truth '" + p.string() + "'; run gen-gt first");
  auto f = io::label_grids_from_json(json::parse(io::read_file(p)));
  if (!(f.catalog == c.catalog())) throw Error("ground truth '" + p.string() + "' was built with another catalog");
  return f;
}

nn::LossWeights load_weights(const RunConfig& c) {
  const fs::path p = weights_path(c);
  if (!fs::exists(p)) throw Error("missing weights file '" + p.string() + "'; run gen-gt first");
  const json j = json::parse(io::read_file(p));
  if (!j.contains("alpha") || !j.contains("alpha_bar")) {
    throw Error("weights file '" + p.string() + "' has no class weights: " + j.value("weights_error", std::string()));
  }
  return {io::class_weights_from_json(j.at("alpha")), io::class_weights_from_json(j.at("alpha_bar"))};
}

nn::RefNet load_network(const RunConfig& c, const fs::path& path, io::Checkpoint* out = nullptr) {
  if (!fs::exists(path)) throw Error("missing checkpoint '" + path.string() + "'");
  auto ck = io::checkpoint_from_json(json::parse(io::read_file(path)));
  auto net = nn::RefNet::build(ck.config);
  io::load_parameters(ck, net);
  if (net.config().n_scales != c.n_scales || net.config().n_boxes != c.n_boxes) {
    throw Error("checkpoint topology does not match the catalog");
  }
  if (out) *out = std::move(ck);
  return net;
}

std::vector<std::string> ids_or_all(const std::vector<std::string>& ids,
                                    const std::map<std::string, PointAnnotationSet>& by_id) {
  return ids.empty() ? all_ids(by_id) : ids;
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// Pre-NMS detections of one image.
std::vector<Detection> detect(const nn::RefNet& net, const RunConfig& c, const PointAnnotationSet& a,
                              const BoxCatalog& catalog) {
  const auto img = load_image(c, a);
  const auto pass = net.forward_image(img);
  return decode(pass.scores, catalog, pass.frame);
}

double validation_mae(const nn::RefNet& net, const std::vector<nn::TrainSample>& samples,
                      const std::vector<const PointAnnotationSet*>& annotations, const BoxCatalog& catalog,
                      const NmsConfig& nms_cfg) {
  std::vector<EvalRecord> recs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto pass = net.forward(samples[i].image, samples[i].labels.frame);
    const auto fused = fuse_and_count(pass.scores, catalog, pass.frame, nms_cfg);
    recs.push_back(make_record(fused.detections, *annotations[i]));
  }
  return mae(recs);
}

}  // namespace

BoxCatalog RunConfig::catalog() const { return BoxCatalog::build(n_scales, n_boxes, gamma); }

void RunConfig::validate() const {
  catalog();
  net.validate();
  nms.validate();
  if (net.n_scales != n_scales || net.n_boxes != n_boxes) throw Error("net and catalog disagree on n_scales/n_boxes");
  if (net.seed != seed) throw Error("net seed must equal the run seed");
  if (train.steps < 0) throw Error("train.steps must be >= 0");
  if (train.eval_every < 1) throw Error("train.eval_every must be >= 1");
  if (train.patience < 1) throw Error("train.patience must be >= 1");
  if (train.loss != "wta" && train.loss != "combined") throw Error("train.loss must be 'wta' or 'combined'");
  if (output.empty()) throw Error("config output directory is empty");
}

json to_json(const RunConfig& c) {
  json net = io::to_json(c.net);
  net.erase("seed");
  net.erase("n_scales");
  net.erase("n_boxes");
  return {{"catalog", {{"n_scales", c.n_scales}, {"n_boxes", c.n_boxes}, {"gamma", c.gamma}}},
          {"net", net},
          {"nms", io::to_json(c.nms)},
          {"train",
           {{"steps", c.train.steps},
            {"eval_every", c.train.eval_every},
            {"patience", c.train.patience},
            {"loss", c.train.loss}}},
          {"annotations", c.annotations},
          {"images", c.images},
          {"output", c.output},
          {"seed", c.seed}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  reject_unknown(j, kConfigKeys, "config");
  RunConfig c;
  const json cat = j.value("catalog", json::object());
  reject_unknown(cat, {"n_scales", "n_boxes", "gamma"}, "catalog");
  c.n_scales = get_or(cat, "n_scales", c.n_scales);
  c.n_boxes = get_or(cat, "n_boxes", c.n_boxes);
  c.gamma = get_or(cat, "gamma", c.gamma);
  c.seed = get_or(j, "seed", c.seed);

  json net = j.value("net", json::object());
  reject_unknown(net,
                 {"in_channels", "base_channels", "convs_per_block", "init_gain", "learning_rate", "momentum",
                  "batch_size"},
                 "net");
  net["seed"] = c.seed;
  net["n_scales"] = c.n_scales;
  net["n_boxes"] = c.n_boxes;
  c.net = io::net_config_from_json(net);

  const json nms = j.value("nms", json::object());
  reject_unknown(nms, {"threshold", "measure"}, "nms");
  c.nms = io::nms_config_from_json(nms);

  const json tr = j.value("train", json::object());
  reject_unknown(tr, {"steps", "eval_every", "patience", "loss"}, "train");
  c.train.steps = get_or(tr, "steps", c.train.steps);
  c.train.eval_every = get_or(tr, "eval_every", c.train.eval_every);
  c.train.patience = get_or(tr, "patience", c.train.patience);
  c.train.loss = get_or(tr, "loss", c.train.loss);

  c.annotations = get_or(j, "annotations", c.annotations);
  c.images = get_or(j, "images", c.images);
  c.output = get_or(j, "output", c.output);
  c.validate();
  return c;
}

RunConfig read_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

Split parse_split(const json& j) {
  if (!j.is_object()) throw Error("split must be a JSON object");
  reject_unknown(j, {"train", "validation", "test"}, "split");
  Split s;
  s.train = get_or(j, "train", s.train);
  s.validation = get_or(j, "validation", s.validation);
  s.test = get_or(j, "test", s.test);
  std::map<std::string, std::string> role;
  for (const auto& [name, ids] :
       {std::pair<std::string, const std::vector<std::string>*>{"train", &s.train}, {"validation", &s.validation},
        {"test", &s.test}}) {
    for (const auto& id : *ids) {
      auto [it, inserted] = role.emplace(id, name);
      if (!inserted) throw Error("split overlap: image '" + id + "' is in both " + it->second + " and " + name);
    }
  }
  return s;
}

Split read_split(const fs::path& path) { return parse_split(json::parse(io::read_file(path))); }

RunConfig apply(RunConfig c, const Overrides& o) {
  if (o.seed) {
    c.seed = *o.seed;
    c.net.seed = *o.seed;
  }
  if (o.out) c.output = *o.out;
  if (o.nms_threshold) c.nms.threshold = *o.nms_threshold;
  if (o.steps) c.train.steps = *o.steps;
  c.validate();
  return c;
}

std::vector<fs::path> cmd_gen_gt(const RunConfig& c, const Overrides& o) {
  const auto catalog = c.catalog();
  const auto by_id = annotations_by_id(c);
  const std::vector<std::string> train_ids = o.split ? ids_or_all(read_split(*o.split).train, by_id) : all_ids(by_id);
  const std::set<std::string> train_set(train_ids.begin(), train_ids.end());
  fs::create_directories(gt_dir(c));
  std::vector<fs::path> written;
  std::vector<LabelGridSet> train_grids;
  for (const auto& [id, a] : by_id) {
    auto grids = generate_pseudo_gt(a, catalog);
    const fs::path p = gt_dir(c) / (id + ".json");
    io::write_file_atomic(p, io::dump(io::label_grids_to_json(id, grids, catalog)));
    written.push_back(p);
    if (train_set.count(id)) train_grids.push_back(std::move(grids));
  }
  for (const auto& id : train_ids) lookup(by_id, id);
  const auto counts = count_classes(train_grids, catalog);
  json w = {{"catalog", io::to_json(catalog)}, {"counts", io::to_json(counts)}, {"train_images", train_ids}};
  try {
    w["alpha"] = io::to_json(class_weights(counts));
    w["alpha_bar"] = io::to_json(gwta_class_weights(counts));
  } catch (const Error& e) {
    // Kept as a report; training refuses to start without weights.
    w["weights_error"] = e.what();
  }
  io::write_file_atomic(weights_path(c), io::dump(w));
  written.push_back(weights_path(c));
  return written;
}

std::vector<fs::path> cmd_train(const RunConfig& c, const Overrides& o) {
  const auto catalog = c.catalog();
  const auto weights = load_weights(c);
  const auto by_id = annotations_by_id(c);
  Split split;
  if (o.split) split = read_split(*o.split);
  const auto train_ids = ids_or_all(split.train, by_id);
  // Without a declared validation split the training images are monitored.
  const auto val_ids = split.validation.empty() ? train_ids : split.validation;

  const auto make = [&](const std::vector<std::string>& ids, std::vector<const PointAnnotationSet*>& anns) {
    std::vector<nn::TrainSample> out;
    for (const auto& id : ids) {
      const auto& a = lookup(by_id, id);
      auto gt = load_gt(c, id);
      out.push_back(nn::make_sample(load_image(c, a), std::move(gt.grids)));
      anns.push_back(&a);
    }
    return out;
  };
  std::vector<const PointAnnotationSet*> train_anns;
  std::vector<const PointAnnotationSet*> val_anns;
  const auto train_data = make(train_ids, train_anns);
  const auto val_data = make(val_ids, val_anns);

  io::Checkpoint state;
  std::vector<std::string> trace_rows;
  nn::RefNet net = nn::RefNet::build(c.net);
  if (o.resume) {
    const fs::path from = o.checkpoint ? fs::path(*o.checkpoint) : checkpoint_path(c);
    net = load_network(c, from, &state);
    if (!(state.config == c.net)) throw Error("checkpoint was trained with another net config");
    if (fs::exists(trace_path(c))) {
      std::istringstream in(io::read_file(trace_path(c)));
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (std::stoll(line.substr(0, line.find(','))) <= state.step) trace_rows.push_back(line);
      }
    }
  } else {
    state.config = c.net;
  }

  nn::Trainer trainer(net, train_data, weights,
                      c.train.loss == "wta" ? nn::LossMode::WinnerTakeAll : nn::LossMode::Combined);
  trainer.set_steps_done(state.step);
  if (!state.velocity.empty()) trainer.optimizer().velocity() = state.velocity;

  // Intermediate evaluations use the fixed default threshold.
  const NmsConfig monitor_nms{0.3, c.nms.measure};
  double best = state.best_validation_mae;
  int stale = state.evaluations_without_improvement;
  fs::create_directories(c.output);

  const auto save = [&]() {
    auto ck = io::make_checkpoint(net, trainer.steps_done(), trainer.optimizer().velocity());
    ck.best_validation_mae = best;
    ck.evaluations_without_improvement = stale;
    io::write_file_atomic(checkpoint_path(c), io::dump(io::to_json(ck)));
    std::string csv = "step,l_wta,l_comb,validation_mae\n";
    for (const auto& r : trace_rows) csv += r + "\n";
    io::write_file_atomic(trace_path(c), csv);
  };

  while (trainer.steps_done() < c.train.steps && stale < c.train.patience) {
    const auto row = trainer.step();
    std::string line = std::to_string(row.step) + "," + format_double(row.l_wta) + "," + format_double(row.l_comb) + ",";
    if (row.step % c.train.eval_every == 0) {
      const double v = validation_mae(net, val_data, val_anns, catalog, monitor_nms);
      line += format_double(v);
      if (best < 0.0 || v < best) {
        best = v;
        stale = 0;
      } else {
        ++stale;
      }
    }
    trace_rows.push_back(line);
    if (row.step % c.train.eval_every == 0) save();
  }
  save();
  return {checkpoint_path(c), trace_path(c)};
}

std::vector<fs::path> cmd_fuse(const RunConfig& c, const Overrides& o) {
  const auto catalog = c.catalog();
  const auto net = load_network(c, o.checkpoint ? fs::path(*o.checkpoint) : checkpoint_path(c));
  const auto by_id = annotations_by_id(c);
  std::vector<std::string> ids = all_ids(by_id);
  if (o.split) ids = ids_or_all(read_split(*o.split).test, by_id);
  const fs::path dir = fs::path(c.output) / "detections";
  fs::create_directories(dir);
  std::vector<fs::path> written;
  for (const auto& id : ids) {
    const auto d = detect(net, c, lookup(by_id, id), catalog);
    const auto kept = nms(d, c.nms);
    const fs::path p = dir / (id + ".json");
    io::write_file_atomic(p, io::dump(io::detection_dump(id, kept)));
    written.push_back(p);
  }
  return written;
}

std::vector<fs::path> cmd_eval(const RunConfig& c, const Overrides& o) {
  if (!o.split) throw Error("eval needs --split with validation and test ids");
  const auto split = read_split(*o.split);
  if (split.validation.empty() || split.test.empty()) throw Error("split needs non-empty validation and test lists");
  const auto catalog = c.catalog();
  const auto net = load_network(c, o.checkpoint ? fs::path(*o.checkpoint) : checkpoint_path(c));
  const auto by_id = annotations_by_id(c);

  std::vector<std::vector<Detection>> val_dets;
  std::vector<int> val_counts;
  for (const auto& id : split.validation) {
    const auto& a = lookup(by_id, id);
    val_dets.push_back(detect(net, c, a, catalog));
    val_counts.push_back(static_cast<int>(a.points.size()));
  }
  const auto search = threshold_search(val_dets, val_counts, {}, c.nms.measure);
  NmsConfig chosen{search.threshold, c.nms.measure};
  if (o.nms_threshold) chosen.threshold = *o.nms_threshold;

  const fs::path dir = fs::path(c.output) / "eval";
  fs::create_directories(dir / "detections");
  if (o.overlays) fs::create_directories(dir / "overlays");
  std::vector<fs::path> written;
  std::vector<EvalRecord> recs;
  json per_image = json::array();
  for (const auto& id : split.test) {
    const auto& a = lookup(by_id, id);
    const auto img = load_image(c, a);
    const auto pass = net.forward_image(img);
    const auto kept = nms(decode(pass.scores, catalog, pass.frame), chosen);
    auto r = make_record(kept, a);
    // Boxes of the pseudo ground truth stand in for box annotations.
    const auto gt = generate_pseudo_gt(a, catalog);
    for (const auto& d : decode(one_hot_scores(gt, catalog.n_boxes()), catalog, gt.frame)) r.gt_boxes.push_back(d.bounds());
    per_image.push_back({{"image_id", id}, {"gt_count", r.gt_count()}, {"predicted_count", r.predicted_count()}});
    recs.push_back(std::move(r));

    const fs::path p = dir / "detections" / (id + ".json");
    io::write_file_atomic(p, io::dump(io::detection_dump(id, kept)));
    written.push_back(p);
    if (o.overlays) {
      auto canvas = img;
      io::draw_boxes(canvas, kept);
      const fs::path q = dir / "overlays" / (id + ".ppm");
      io::write_file_atomic(q, io::encode_pnm(canvas));
      written.push_back(q);
    }
  }

  bool any_boxes = false;
  for (const auto& r : recs) any_boxes = any_boxes || !r.gt_boxes.empty();
  json game_l = json::array();
  for (int l = 0; l <= 3; ++l) game_l.push_back(game(recs, l));
  json report = {{"format", "lsc-report-1"},
                 {"nms", io::to_json(chosen)},
                 {"threshold_search", {{"candidates", search.candidates}, {"validation_mae", search.maes}}},
                 {"test_images", static_cast<int>(recs.size())},
                 {"mae", mae(recs)},
                 {"mse", mse(recs)},
                 {"game", game_l},
                 {"mle", mle(recs)},
                 {"map_pseudo_boxes", any_boxes ? json(detection_map(recs)) : json(nullptr)},
                 {"images", per_image}};
  io::write_file_atomic(dir / "report.json", io::dump(report));
  written.push_back(dir / "report.json");
  return written;
}

std::string catalog_table(const BoxCatalog& catalog, bool as_json) {
  if (as_json) {
    json beta = json::array();
    for (int s = 0; s < catalog.n_scales(); ++s) {
      json row = json::array();
      for (int b = 1; b <= catalog.n_boxes(); ++b) row.push_back(catalog.beta(s, b));
      beta.push_back(row);
    }
    json gamma(std::vector<int>(catalog.gamma().begin(), catalog.gamma().end()));
    return io::dump({{"n_scales", catalog.n_scales()}, {"n_boxes", catalog.n_boxes()}, {"gamma", gamma},
                     {"beta", beta}}) +
           "\n";
  }
  std::ostringstream out;
  for (int s = 0; s < catalog.n_scales(); ++s) {
    out << "scale " << s << " stride " << catalog.stride(s) << ":";
    for (int b = 1; b <= catalog.n_boxes(); ++b) out << ' ' << catalog.beta(s, b);
    out << '\n';
  }
  return out.str();
}

std::vector<fs::path> cmd_synth(const fs::path& out, const SynthOptions& o) {
  if (o.count < 1) throw Error("synth needs --count >= 1");
  if (o.validation < 0 || o.test < 0) throw Error("split sizes must be non-negative");
  const auto catalog = BoxCatalog::build(4, 3, {4, 2, 1, 1});
  synth::SceneOptions so;
  so.width = o.width;
  so.height = o.height;
  auto scenes = synth::make_dataset(o.count, o.seed, so, catalog);
  Split split;
  for (const auto& s : scenes) split.train.push_back(s.annotations.image_id);
  const auto extra = [&](int n, const std::string& prefix, std::uint64_t offset, std::vector<std::string>& ids) {
    for (int i = 0; i < n; ++i) {
      const std::string id = prefix + std::to_string(i);
      scenes.push_back(synth::make_scene(o.seed + offset + static_cast<std::uint64_t>(i), so, catalog, id));
      ids.push_back(id);
    }
  };
  extra(o.validation, "val_", 100000, split.validation);
  extra(o.test, "test_", 200000, split.test);

  fs::create_directories(out / "images");
  std::vector<fs::path> written;
  std::string lines;
  for (const auto& s : scenes) {
    lines += io::dump(io::to_json(s.annotations)) + "\n";
    const fs::path p = out / "images" / (s.annotations.image_id + ".ppm");
    io::write_file_atomic(p, io::encode_pnm(s.image));
    written.push_back(p);
  }
  io::write_file_atomic(out / "annotations.jsonl", lines);
  io::write_file_atomic(out / "split.json",
                        io::dump({{"train", split.train}, {"validation", split.validation}, {"test", split.test}}));
  RunConfig cfg;
  cfg.annotations = (out / "annotations.jsonl").string();
  cfg.images = (out / "images").string();
  cfg.output = (out / "run").string();
  io::write_file_atomic(out / "config.json", to_json(cfg).dump(2) + "\n");
  for (const char* f : {"annotations.jsonl", "split.json", "config.json"}) written.push_back(out / f);
  return written;
}

}  // namespace lsc::cli
