#include "lsc/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace lsc::io {
namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dump(const json& j) { return j.dump(); }

namespace {

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

json to_json(const PointAnnotationSet& a) {
  json pts = json::array();
  for (const auto& p : a.points) pts.push_back({p.x, p.y});
  return {{"image_id", a.image_id}, {"width", a.width}, {"height", a.height}, {"points", pts}};
}

PointAnnotationSet annotation_from_json(const json& j) {
  PointAnnotationSet a;
  a.image_id = field<std::string>(j, "image_id");
  a.width = field<int>(j, "width");
  a.height = field<int>(j, "height");
  const auto& pts = j.at("points");
  if (!pts.is_array()) throw Error("field 'points' must be an array");
  for (const auto& p : pts) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw Error("each point must be a [x, y] number pair");
    }
    a.points.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  a.validate();
  return a;
}

std::vector<PointAnnotationSet> parse_annotations(const std::string& text, const std::string& source) {
  std::vector<PointAnnotationSet> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(annotation_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(source + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const std::exception& e) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PointAnnotationSet> read_annotations(const fs::path& path) {
  return parse_annotations(read_file(path), path.string());
}

json to_json(const BoxCatalog& c) {
  json beta = json::array();
  for (int s = 0; s < c.n_scales(); ++s) {
    json row = json::array();
    for (int b = 1; b <= c.n_boxes(); ++b) row.push_back(c.beta(s, b));
    beta.push_back(row);
  }
  std::vector<int> gamma(c.gamma().begin(), c.gamma().end());
  json strides = json::array();
  for (int s = 0; s < c.n_scales(); ++s) strides.push_back(c.stride(s));
  return {{"n_scales", c.n_scales()}, {"n_boxes", c.n_boxes()}, {"gamma", gamma}, {"beta", beta},
          {"strides", strides}};
}

BoxCatalog catalog_from_json(const json& j) {
  auto c = BoxCatalog::build(field<int>(j, "n_scales"), field<int>(j, "n_boxes"),
                             field<std::vector<int>>(j, "gamma"));
  if (j.contains("beta") && j.at("beta") != to_json(c).at("beta")) {
    throw Error("stored box sides disagree with the catalog parameters");
  }
  return c;
}

json to_json(const ImageFrame& f) {
  return {{"width", f.width}, {"height", f.height}, {"padded_width", f.padded_width},
          {"padded_height", f.padded_height}, {"offset_x", f.offset_x}, {"offset_y", f.offset_y}};
}

ImageFrame frame_from_json(const json& j) {
  ImageFrame f;
  f.width = field<int>(j, "width");
  f.height = field<int>(j, "height");
  f.padded_width = field<int>(j, "padded_width");
  f.padded_height = field<int>(j, "padded_height");
  f.offset_x = field<int>(j, "offset_x");
  f.offset_y = field<int>(j, "offset_y");
  return f;
}

json label_grids_to_json(const std::string& image_id, const LabelGridSet& grids, const BoxCatalog& catalog) {
  json scales = json::array();
  for (int s = 0; s < grids.n_scales(); ++s) {
    const auto& g = grids.scales[s];
    json runs = json::array();
    const auto& cells = g.cells();
    for (std::size_t i = 0; i < cells.size();) {
      std::size_t k = i;
      while (k < cells.size() && cells[k] == cells[i]) ++k;
      runs.push_back({cells[i], k - i});
      i = k;
    }
    scales.push_back({{"scale", s}, {"stride", catalog.stride(s)}, {"width", g.width()}, {"height", g.height()},
                      {"runs", runs}});
  }
  return {{"image_id", image_id}, {"frame", to_json(grids.frame)}, {"catalog", to_json(catalog)},
          {"scales", scales}};
}

LabelFile label_grids_from_json(const json& j) {
  LabelFile f{field<std::string>(j, "image_id"), catalog_from_json(j.at("catalog")), {}};
  f.grids.frame = frame_from_json(j.at("frame"));
  const auto& scales = j.at("scales");
  if (!scales.is_array() || static_cast<int>(scales.size()) != f.catalog.n_scales()) {
    throw Error("label file scale count does not match its catalog");
  }
  for (const auto& sj : scales) {
    LabelGrid g(field<int>(sj, "width"), field<int>(sj, "height"), 0);
    std::size_t pos = 0;
    for (const auto& run : sj.at("runs")) {
      const int value = run.at(0).get<int>();
      const auto len = run.at(1).get<std::size_t>();
      if (value < 0 || value > f.catalog.n_boxes()) throw Error("label value outside the catalog");
      if (pos + len > g.size()) throw Error("label runs overflow the grid");
      std::fill_n(g.cells().begin() + static_cast<std::ptrdiff_t>(pos), len, value);
      pos += len;
    }
    if (pos != g.size()) throw Error("label runs do not cover the grid");
    f.grids.scales.push_back(std::move(g));
  }
  for (int s = 0; s < f.catalog.n_scales(); ++s) {
    const auto shape = grid_shape(f.grids.frame.padded_width, f.grids.frame.padded_height, s);
    if (f.grids.scales[s].width() != shape.width || f.grids.scales[s].height() != shape.height) {
      throw Error("label grid shape does not match its frame");
    }
  }
  return f;
}

json to_json(const ClassCountTable& c) {
  json counts = json::array();
  json sums = json::array();
  for (int s = 0; s < c.n_scales(); ++s) {
    json row = json::array();
    for (int b = 0; b <= c.n_boxes(); ++b) row.push_back(c.at(s, b));
    counts.push_back(row);
    sums.push_back(c.box_sum(s));
  }
  return {{"n_scales", c.n_scales()}, {"n_boxes", c.n_boxes()}, {"counts", counts}, {"c_sum", sums},
          {"c_min", c.min_box_sum()}};
}

ClassCountTable class_counts_from_json(const json& j) {
  ClassCountTable c(field<int>(j, "n_scales"), field<int>(j, "n_boxes"));
  const auto& counts = j.at("counts");
  for (int s = 0; s < c.n_scales(); ++s) {
    for (int b = 0; b <= c.n_boxes(); ++b) c.at(s, b) = counts.at(s).at(b).get<std::int64_t>();
  }
  return c;
}

json to_json(const ClassWeightTable& w) {
  json rows = json::array();
  for (int s = 0; s < w.n_scales(); ++s) {
    const auto v = w.scale(s);
    rows.push_back(std::vector<double>(v.begin(), v.end()));
  }
  return {{"n_scales", w.n_scales()}, {"n_boxes", w.n_boxes()}, {"alpha", rows}};
}

ClassWeightTable class_weights_from_json(const json& j) {
  ClassWeightTable w(field<int>(j, "n_scales"), field<int>(j, "n_boxes"));
  const auto& rows = j.at("alpha");
  for (int s = 0; s < w.n_scales(); ++s) {
    for (int b = 0; b <= w.n_boxes(); ++b) {
      const double v = rows.at(s).at(b).get<double>();
      if (!std::isfinite(v) || v < 0.0) throw Error("class weights must be finite and non-negative");
      w.at(s, b) = v;
    }
  }
  return w;
}

json to_json(const Detection& d) {
  return {{"x", d.center_x}, {"y", d.center_y}, {"side", d.side}, {"scale", d.scale}, {"box", d.box},
          {"conf", d.confidence}};
}

Detection detection_from_json(const json& j) {
  Detection d;
  d.center_x = field<double>(j, "x");
  d.center_y = field<double>(j, "y");
  d.side = field<int>(j, "side");
  d.scale = field<int>(j, "scale");
  d.box = field<int>(j, "box");
  d.confidence = field<double>(j, "conf");
  return d;
}

json detection_dump(const std::string& image_id, const std::vector<Detection>& detections) {
  json dets = json::array();
  for (const auto& d : detections) dets.push_back(to_json(d));
  return {{"image_id", image_id}, {"detections", dets}, {"count", detections.size()}};
}

json to_json(const LossReport& r) {
  json winners = json::array();
  for (const auto& c : r.winners) winners.push_back({c.x, c.y});
  return {{"l_comb", r.l_comb}, {"l_wta", r.l_wta}, {"winners", winners}};
}

json to_json(const NmsConfig& c) {
  return {{"threshold", c.threshold}, {"measure", overlap_measure_name(c.measure)}};
}

NmsConfig nms_config_from_json(const json& j) {
  NmsConfig c;
  c.threshold = j.value("threshold", c.threshold);
  c.measure = parse_overlap_measure(j.value("measure", std::string("iou")));
  c.validate();
  return c;
}

json to_json(const nn::NetConfig& c) {
  return {{"in_channels", c.in_channels}, {"base_channels", c.base_channels},
          {"convs_per_block", c.convs_per_block}, {"n_scales", c.n_scales}, {"n_boxes", c.n_boxes},
          {"seed", c.seed}, {"init_gain", c.init_gain}, {"learning_rate", c.learning_rate}, {"momentum", c.momentum},
          {"batch_size", c.batch_size}};
}

nn::NetConfig net_config_from_json(const json& j) {
  nn::NetConfig c;
  c.in_channels = j.value("in_channels", c.in_channels);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.convs_per_block = j.value("convs_per_block", c.convs_per_block);
  c.n_scales = j.value("n_scales", c.n_scales);
  c.n_boxes = j.value("n_boxes", c.n_boxes);
  c.seed = j.value("seed", c.seed);
  c.init_gain = j.value("init_gain", c.init_gain);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.validate();
  return c;
}

json to_json(const Checkpoint& c) {
  json params = json::object();
  for (std::size_t i = 0; i < c.parameters.size(); ++i) {
    json entry = {{"shape", c.parameters[i].shape}, {"value", c.parameters[i].value}};
    if (!c.velocity.empty()) entry["velocity"] = c.velocity[i];
    params[c.parameters[i].name] = entry;
  }
  json order = json::array();
  for (const auto& p : c.parameters) order.push_back(p.name);
  return {{"format", "lsc-checkpoint-1"}, {"config", to_json(c.config)}, {"seed", c.config.seed},
          {"step", c.step}, {"parameter_order", order}, {"parameters", params},
          {"best_validation_mae", c.best_validation_mae},
          {"evaluations_without_improvement", c.evaluations_without_improvement}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string()) != "lsc-checkpoint-1") throw Error("not an lsc checkpoint");
  Checkpoint c;
  c.config = net_config_from_json(j.at("config"));
  c.step = field<std::int64_t>(j, "step");
  c.best_validation_mae = j.value("best_validation_mae", -1.0);
  c.evaluations_without_improvement = j.value("evaluations_without_improvement", 0);
  bool has_velocity = true;
  for (const auto& name : j.at("parameter_order")) {
    const auto& entry = j.at("parameters").at(name.get<std::string>());
    c.parameters.push_back({name.get<std::string>(), entry.at("shape").get<std::vector<int>>(),
                            entry.at("value").get<std::vector<double>>()});
    if (entry.contains("velocity")) {
      c.velocity.push_back(entry.at("velocity").get<std::vector<double>>());
    } else {
      has_velocity = false;
    }
  }
  if (!has_velocity) c.velocity.clear();
  return c;
}

void load_parameters(const Checkpoint& c, nn::RefNet& net) {
  auto& params = net.graph().parameters();
  if (params.size() != c.parameters.size()) throw Error("checkpoint parameter count does not match the network");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != c.parameters[i].name || params[i].shape != c.parameters[i].shape ||
        params[i].value.size() != c.parameters[i].value.size()) {
      throw Error("checkpoint parameter '" + c.parameters[i].name + "' does not match the network");
    }
    params[i].value = c.parameters[i].value;
  }
}

Checkpoint make_checkpoint(const nn::RefNet& net, std::int64_t step,
                           const std::vector<std::vector<double>>& velocity) {
  Checkpoint c;
  c.config = net.config();
  c.step = step;
  c.parameters = net.graph().parameters();
  c.velocity = velocity;
  return c;
}

}  // namespace lsc::io
