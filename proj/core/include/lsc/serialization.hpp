#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsc/box_catalog.hpp"
#include "lsc/fusion.hpp"
#include "lsc/grids.hpp"
#include "lsc/gwta_loss.hpp"
#include "lsc/pseudo_gt.hpp"
#include "lsc/refnet/network.hpp"

namespace lsc::io {

using nlohmann::json;

/// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Compact, key-sorted dump used for every artifact so reruns are byte-identical.
std::string dump(const json& j);

// Annotations: one {"image_id", "width", "height", "points": [[x, y], ...]} per line.
json to_json(const PointAnnotationSet& a);
PointAnnotationSet annotation_from_json(const json& j);
/// Parses a JSON-lines file; the first bad line aborts with "path:line: reason".
std::vector<PointAnnotationSet> read_annotations(const std::filesystem::path& path);
std::vector<PointAnnotationSet> parse_annotations(const std::string& text, const std::string& source = "<input>");

json to_json(const BoxCatalog& c);
BoxCatalog catalog_from_json(const json& j);

json to_json(const ImageFrame& f);
ImageFrame frame_from_json(const json& j);

/// Self-describing ground-truth file: image id, frame, catalog and one
/// run-length encoded grid ([value, run] pairs, row-major) per scale.
json label_grids_to_json(const std::string& image_id, const LabelGridSet& grids, const BoxCatalog& catalog);
struct LabelFile {
  std::string image_id;
  BoxCatalog catalog;
  LabelGridSet grids;
};
LabelFile label_grids_from_json(const json& j);

json to_json(const ClassCountTable& c);
ClassCountTable class_counts_from_json(const json& j);
json to_json(const ClassWeightTable& w);
ClassWeightTable class_weights_from_json(const json& j);

json to_json(const Detection& d);
Detection detection_from_json(const json& j);
/// {"image_id", "detections": [{"x","y","side","scale","box","conf"}], "count"}
json detection_dump(const std::string& image_id, const std::vector<Detection>& detections);

json to_json(const LossReport& r);

json to_json(const NmsConfig& c);
NmsConfig nms_config_from_json(const json& j);

json to_json(const nn::NetConfig& c);
nn::NetConfig net_config_from_json(const json& j);

/// Network weights plus optimizer state, keyed by layer path.
struct Checkpoint {
  nn::NetConfig config;
  std::int64_t step = 0;
  std::vector<nn::Parameter> parameters;
  std::vector<std::vector<double>> velocity;  // empty before the first step
  double best_validation_mae = -1.0;
  int evaluations_without_improvement = 0;
};

json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const json& j);
/// Loads parameters into a freshly built network, checking every name and shape.
void load_parameters(const Checkpoint& c, nn::RefNet& net);
Checkpoint make_checkpoint(const nn::RefNet& net, std::int64_t step,
                           const std::vector<std::vector<double>>& velocity);

}  // namespace lsc::io
