/**
 * Copyright 2026 The Plasmodium Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "plasmodium/export.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "plasmodium/checksum.hpp"
#include "plasmodium/error.hpp"
#include "plasmodium/nn/trainer.hpp"

namespace plasmodium {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using nn::Activation;
using nn::LayerKind;
using nn::LayerSpec;
using nn::Padding;

constexpr std::string_view kGenerator = "plasmodium 0.1.0";

std::string_view padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }

Padding parse_padding(const std::string& text) {
  if (text == "same") return Padding::Same;
  if (text == "valid") return Padding::Valid;
  throw ExportError("unsupported padding '" + text + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "linear";
}

Activation parse_activation(const std::string& text) {
  if (text == "linear") return Activation::Linear;
  if (text == "relu") return Activation::Relu;
  if (text == "softmax") return Activation::Softmax;
  throw ExportError("unsupported activation '" + text + "'");
}

ordered_json initializer(nn::Initializer init) {
  if (init == nn::Initializer::HeUniform) {
    return {{"class_name", "VarianceScaling"},
            {"config", {{"scale", 2.0}, {"mode", "fan_in"}, {"distribution", "uniform"}, {"seed", nullptr}}}};
  }
  return {{"class_name", "GlorotUniform"}, {"config", {{"seed", nullptr}}}};
}

nn::Initializer parse_initializer(const json& j) {
  if (j.is_object() && j.value("class_name", "") == "VarianceScaling" &&
      j.at("config").value("scale", 1.0) == 2.0) {
    return nn::Initializer::HeUniform;
  }
  if (j.is_object() && j.value("class_name", "") == "HeUniform") return nn::Initializer::HeUniform;
  return nn::Initializer::GlorotUniform;
}

ordered_json zeros() { return {{"class_name", "Zeros"}, {"config", ordered_json::object()}}; }
ordered_json ones() { return {{"class_name", "Ones"}, {"config", ordered_json::object()}}; }

ordered_json pair(std::array<int, 2> v) { return {v[0], v[1]}; }

std::array<int, 2> read_pair(const json& j) {
  if (j.is_number_integer()) return {j.get<int>(), j.get<int>()};
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

void add_kernel_fields(ordered_json& c, const LayerSpec& s) {
  c["kernel_size"] = pair(s.kernel);
  c["strides"] = pair(s.strides);
  c["padding"] = padding_name(s.padding);
  c["data_format"] = "channels_last";
  c["dilation_rate"] = {1, 1};
}

ordered_json layer_config(const LayerSpec& s) {
  ordered_json c;
  c["name"] = s.name;
  c["trainable"] = s.trainable;
  c["dtype"] = "float32";
  switch (s.kind) {
    case LayerKind::Input:
      c.erase("trainable");
      c["batch_input_shape"] = ordered_json::array({nullptr});
      for (int d : s.input_shape) c["batch_input_shape"].push_back(d);
      c["sparse"] = false;
      break;
    case LayerKind::Conv2D:
      c["filters"] = s.units;
      add_kernel_fields(c, s);
      c["activation"] = activation_name(s.activation);
      c["use_bias"] = s.use_bias;
      c["kernel_initializer"] = initializer(s.init);
      c["bias_initializer"] = zeros();
      c["kernel_regularizer"] = nullptr;
      c["bias_regularizer"] = nullptr;
      c["activity_regularizer"] = nullptr;
      c["kernel_constraint"] = nullptr;
      c["bias_constraint"] = nullptr;
      break;
    case LayerKind::SeparableConv2D:
      c["filters"] = s.units;
      add_kernel_fields(c, s);
      c["depth_multiplier"] = 1;
      c["activation"] = activation_name(s.activation);
      c["use_bias"] = s.use_bias;
      c["depthwise_initializer"] = initializer(s.init);
      c["pointwise_initializer"] = initializer(s.init);
      c["bias_initializer"] = zeros();
      c["depthwise_regularizer"] = nullptr;
      c["pointwise_regularizer"] = nullptr;
      c["bias_regularizer"] = nullptr;
      c["activity_regularizer"] = nullptr;
      c["depthwise_constraint"] = nullptr;
      c["pointwise_constraint"] = nullptr;
      c["bias_constraint"] = nullptr;
      break;
    case LayerKind::BatchNorm:
      c["axis"] = -1;
      c["momentum"] = s.bn_momentum;
      c["epsilon"] = s.bn_epsilon;
      c["center"] = s.bn_center;
      c["scale"] = s.bn_scale;
      c["beta_initializer"] = zeros();
      c["gamma_initializer"] = ones();
      c["moving_mean_initializer"] = zeros();
      c["moving_variance_initializer"] = ones();
      c["beta_regularizer"] = nullptr;
      c["gamma_regularizer"] = nullptr;
      c["beta_constraint"] = nullptr;
      c["gamma_constraint"] = nullptr;
      break;
    case LayerKind::Activation:
      c["activation"] = activation_name(s.activation);
      break;
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D:
      c["pool_size"] = pair(s.pool);
      c["padding"] = padding_name(s.padding);
      c["strides"] = pair(s.strides);
      c["data_format"] = "channels_last";
      break;
    case LayerKind::GlobalAvgPool2D:
    case LayerKind::Flatten:
      c["data_format"] = "channels_last";
      break;
    case LayerKind::ZeroPad2D:
      c["padding"] = {{s.zero_pad[0], s.zero_pad[1]}, {s.zero_pad[2], s.zero_pad[3]}};
      c["data_format"] = "channels_last";
      break;
    case LayerKind::Dense:
      c["units"] = s.units;
      c["activation"] = activation_name(s.activation);
      c["use_bias"] = s.use_bias;
      c["kernel_initializer"] = initializer(s.init);
      c["bias_initializer"] = zeros();
      c["kernel_regularizer"] = nullptr;
      c["bias_regularizer"] = nullptr;
      c["activity_regularizer"] = nullptr;
      c["kernel_constraint"] = nullptr;
      c["bias_constraint"] = nullptr;
      break;
    case LayerKind::Dropout:
      c["rate"] = s.rate;
      c["noise_shape"] = nullptr;
      c["seed"] = nullptr;
      break;
    case LayerKind::Concatenate:
      c["axis"] = -1;
      break;
    case LayerKind::Add:
      break;
  }
  return c;
}

LayerKind parse_kind(const std::string& class_name, const std::string& layer) {
  static const std::map<std::string, LayerKind, std::less<>> kinds{
      {"InputLayer", LayerKind::Input},
      {"Conv2D", LayerKind::Conv2D},
      {"SeparableConv2D", LayerKind::SeparableConv2D},
      {"BatchNormalization", LayerKind::BatchNorm},
      {"Activation", LayerKind::Activation},
      {"MaxPooling2D", LayerKind::MaxPool2D},
      {"AveragePooling2D", LayerKind::AvgPool2D},
      {"GlobalAveragePooling2D", LayerKind::GlobalAvgPool2D},
      {"ZeroPadding2D", LayerKind::ZeroPad2D},
      {"Flatten", LayerKind::Flatten},
      {"Dense", LayerKind::Dense},
      {"Dropout", LayerKind::Dropout},
      {"Concatenate", LayerKind::Concatenate},
      {"Add", LayerKind::Add},
  };
  const auto it = kinds.find(class_name);
  if (it == kinds.end()) throw ExportError(fmt::format("layer '{}' has unsupported class '{}'", layer, class_name));
  return it->second;
}

LayerSpec parse_layer(const json& entry, const std::unordered_map<std::string, int>& index) {
  const auto& c = entry.at("config");
  LayerSpec s;
  s.name = entry.contains("name") ? entry.at("name").get<std::string>() : c.at("name").get<std::string>();
  s.kind = parse_kind(entry.at("class_name").get<std::string>(), s.name);
  s.trainable = c.value("trainable", true);
  const auto& nodes = entry.value("inbound_nodes", json::array());
  if (!nodes.empty()) {
    for (const auto& ref : nodes.at(0)) {
      const auto src = ref.at(0).get<std::string>();
      const auto it = index.find(src);
      if (it == index.end()) throw ExportError(fmt::format("layer '{}' consumes unknown layer '{}'", s.name, src));
      s.inputs.push_back(it->second);
    }
  }
  switch (s.kind) {
    case LayerKind::Input: {
      const auto& shape = c.contains("batch_input_shape") ? c.at("batch_input_shape") : c.at("batch_shape");
      for (std::size_t i = 1; i < shape.size(); ++i) s.input_shape.push_back(shape.at(i).get<int>());
      break;
    }
    case LayerKind::Conv2D:
    case LayerKind::SeparableConv2D:
      s.units = c.at("filters").get<int>();
      s.kernel = read_pair(c.at("kernel_size"));
      s.strides = read_pair(c.value("strides", json{1, 1}));
      s.padding = parse_padding(c.value("padding", "valid"));
      s.activation = parse_activation(c.value("activation", "linear"));
      s.use_bias = c.value("use_bias", true);
      s.init = parse_initializer(c.value(s.kind == LayerKind::Conv2D ? "kernel_initializer" : "pointwise_initializer",
                                         json()));
      if (s.kind == LayerKind::SeparableConv2D && c.value("depth_multiplier", 1) != 1) {
        throw ExportError(fmt::format("layer '{}' uses an unsupported depth multiplier", s.name));
      }
      break;
    case LayerKind::BatchNorm:
      s.bn_momentum = c.value("momentum", 0.99f);
      s.bn_epsilon = c.value("epsilon", 1e-3f);
      s.bn_center = c.value("center", true);
      s.bn_scale = c.value("scale", true);
      break;
    case LayerKind::Activation:
      s.activation = parse_activation(c.at("activation").get<std::string>());
      break;
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D:
      s.pool = read_pair(c.at("pool_size"));
      s.strides = c.contains("strides") && !c.at("strides").is_null() ? read_pair(c.at("strides")) : s.pool;
      s.padding = parse_padding(c.value("padding", "valid"));
      break;
    case LayerKind::ZeroPad2D: {
      const auto& p = c.at("padding");
      s.zero_pad = {p.at(0).at(0).get<int>(), p.at(0).at(1).get<int>(), p.at(1).at(0).get<int>(),
                    p.at(1).at(1).get<int>()};
      break;
    }
    case LayerKind::Dense:
      s.units = c.at("units").get<int>();
      s.activation = parse_activation(c.value("activation", "linear"));
      s.use_bias = c.value("use_bias", true);
      s.init = parse_initializer(c.value("kernel_initializer", json()));
      break;
    case LayerKind::Dropout:
      s.rate = c.at("rate").get<float>();
      break;
    case LayerKind::GlobalAvgPool2D:
    case LayerKind::Flatten:
    case LayerKind::Concatenate:
    case LayerKind::Add:
      break;
  }
  return s;
}

void check_serializable(const LayerSpec& s) {
  if (s.name.empty()) throw ExportError("cannot serialize a layer without a name");
  if (s.name.find('/') != std::string::npos) {
    throw ExportError(fmt::format("cannot serialize layer '{}': '/' is reserved for weight names", s.name));
  }
}

ordered_json metadata_json(const ExportBundle& bundle) {
  ordered_json meta;
  meta["model_name"] = bundle.metadata.model_name;
  meta["manifest_hash"] = bundle.metadata.manifest_hash;
  meta["labels"] = bundle.labels;
  meta["preprocess"] = to_json(bundle.preprocess);
  meta["metrics"] = bundle.metadata.metrics ? to_json(*bundle.metadata.metrics) : ordered_json(nullptr);
  if (bundle.fidelity) {
    meta["fidelity"] = {{"probe_size", bundle.fidelity->probe_size},
                        {"max_abs_diff", bundle.fidelity->max_abs_diff},
                        {"tolerance", bundle.fidelity->tolerance}};
  } else {
    meta["fidelity"] = nullptr;
  }
  return meta;
}

std::string shard_name(std::size_t k, std::size_t count) { return fmt::format("group1-shard{}of{}.bin", k + 1, count); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ExportError("cannot write " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExportError("cannot read " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  auto parsed = json::parse(text.str(), nullptr, false);
  if (parsed.is_discarded()) throw ExportError(path.string() + " is not valid JSON");
  return parsed;
}

}  // namespace

ordered_json model_topology(const nn::LayerGraph& graph) {
  nn::validate(graph);
  ordered_json layers = ordered_json::array();
  for (const auto& s : graph.layers) {
    check_serializable(s);
    ordered_json entry;
    entry["class_name"] = std::string(nn::to_string(s.kind));
    entry["config"] = layer_config(s);
    entry["name"] = s.name;
    ordered_json node = ordered_json::array();
    for (int in : s.inputs) node.push_back({graph.layers[in].name, 0, 0, ordered_json::object()});
    entry["inbound_nodes"] = s.inputs.empty() ? ordered_json::array() : ordered_json::array({node});
    layers.push_back(std::move(entry));
  }
  ordered_json config;
  config["name"] = graph.name;
  config["layers"] = std::move(layers);
  config["input_layers"] = {{graph.layers.front().name, 0, 0}};
  config["output_layers"] = {{graph.layers.back().name, 0, 0}};
  return {{"class_name", "Functional"}, {"config", std::move(config)}};
}

nn::LayerGraph graph_from_topology(const json& topology) {
  const auto& config = topology.at("config");
  nn::LayerGraph graph;
  graph.name = config.value("name", "model");
  std::unordered_map<std::string, int> index;
  for (const auto& entry : config.at("layers")) {
    auto spec = parse_layer(entry, index);
    const std::string name = spec.name;
    index[name] = graph.add(std::move(spec));
  }
  const auto out = config.at("output_layers").at(0).at(0).get<std::string>();
  if (graph.layers.empty() || graph.layers.back().name != out) {
    throw ExportError("output layer '" + out + "' is not the last layer of the topology");
  }
  nn::validate(graph);
  return graph;
}

ExportBundle write_bundle(const nn::Network& network, const PreprocessProfile& profile,
                          const BundleMetadata& metadata, const std::filesystem::path& out_dir) {
  ExportBundle bundle;
  bundle.directory = out_dir;
  bundle.preprocess = profile;
  bundle.preprocess.augment.reset();
  bundle.metadata = metadata;

  const auto topology = model_topology(network.graph());
  std::vector<char> bytes;
  ordered_json weights = ordered_json::array();
  for (std::size_t layer = 0; layer < network.graph().size(); ++layer) {
    for (const auto& p : network.layer_parameters(static_cast<int>(layer))) {
      weights.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"dtype", "float32"}});
      const auto* raw = reinterpret_cast<const char*>(p.value.data());
      bytes.insert(bytes.end(), raw, raw + p.value.size() * sizeof(float));
    }
  }

  std::filesystem::create_directories(out_dir);
  for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("group1-shard") && name.ends_with(".bin")) std::filesystem::remove(entry.path());
  }
  const std::size_t count = std::max<std::size_t>(1, (bytes.size() + kShardBytes - 1) / kShardBytes);
  for (std::size_t k = 0; k < count; ++k) {
    bundle.shards.push_back(shard_name(k, count));
    const std::size_t begin = k * kShardBytes, end = std::min(bytes.size(), begin + kShardBytes);
    std::ofstream out(out_dir / bundle.shards.back(), std::ios::binary);
    out.write(bytes.data() + begin, static_cast<std::streamsize>(end - begin));
    if (!out) throw ExportError("cannot write " + (out_dir / bundle.shards.back()).string());
  }

  ordered_json model;
  model["format"] = "layers-model";
  model["generatedBy"] = kGenerator;
  model["convertedBy"] = nullptr;
  model["modelTopology"] = {{"keras_version", "2.15.0"}, {"backend", "tensorflow"}, {"model_config", topology}};
  model["weightsManifest"] = {{{"paths", bundle.shards}, {"weights", std::move(weights)}}};
  model["userDefinedMetadata"] = metadata_json(bundle);
  write_text(out_dir / kModelFile, model.dump(1) + "\n");
  return bundle;
}

LoadedBundle load_bundle(const std::filesystem::path& dir) {
  const auto model = read_json_file(dir / kModelFile);
  if (model.value("format", "") != "layers-model") throw ExportError(dir.string() + " is not a layers-model bundle");
  const auto& topology = model.at("modelTopology");
  auto graph = graph_from_topology(topology.contains("model_config") ? topology.at("model_config") : topology);
  nn::Network network(std::move(graph));

  ExportBundle bundle;
  bundle.directory = dir;
  std::vector<bool> assigned;
  auto params = network.parameters();
  std::unordered_map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < params.size(); ++i) by_name[params[i]->name] = i;
  assigned.assign(params.size(), false);

  for (const auto& group : model.at("weightsManifest")) {
    std::vector<char> bytes;
    for (const auto& path : group.at("paths")) {
      const auto file = dir / path.get<std::string>();
      std::ifstream in(file, std::ios::binary);
      if (!in) throw ExportError("missing weight shard " + file.string());
      bytes.insert(bytes.end(), std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
      bundle.shards.push_back(path.get<std::string>());
    }
    std::size_t offset = 0;
    for (const auto& w : group.at("weights")) {
      const auto name = w.at("name").get<std::string>();
      if (w.value("dtype", "float32") != "float32") throw ExportError("weight '" + name + "' is not float32");
      const auto shape = w.at("shape").get<nn::Shape>();
      const std::size_t n = nn::element_count(shape) * sizeof(float);
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw ExportError("bundle weight '" + name + "' does not belong to the model");
      auto* p = params[it->second];
      if (p->value.shape() != shape) {
        throw ExportError(fmt::format("weight '{}' has shape {} in the bundle, {} in the model", name,
                                      nn::to_string(shape), nn::to_string(p->value.shape())));
      }
      if (offset + n > bytes.size()) throw ExportError("weight shards are shorter than the manifest");
      std::memcpy(p->value.data(), bytes.data() + offset, n);
      offset += n;
      assigned[it->second] = true;
    }
    if (offset != bytes.size()) throw ExportError("weight shards are longer than the manifest");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!assigned[i]) throw ExportError("bundle has no values for weight '" + params[i]->name + "'");
  }

  const auto& meta = model.value("userDefinedMetadata", json::object());
  if (meta.contains("preprocess")) bundle.preprocess = profile_from_json(meta.at("preprocess"));
  if (meta.contains("labels")) {
    const auto labels = meta.at("labels").get<std::vector<std::string>>();
    if (labels.size() != 2) throw ExportError("bundle must name exactly two labels");
    bundle.labels = {labels[0], labels[1]};
  }
  bundle.metadata.model_name = meta.value("model_name", "");
  bundle.metadata.manifest_hash = meta.value("manifest_hash", "");
  if (meta.contains("metrics") && !meta.at("metrics").is_null()) {
    bundle.metadata.metrics = report_from_json(meta.at("metrics"));
  }
  if (meta.contains("fidelity") && !meta.at("fidelity").is_null()) {
    const auto& f = meta.at("fidelity");
    bundle.fidelity = FidelityCheck{f.at("probe_size").get<std::size_t>(), f.at("max_abs_diff").get<double>(),
                                    f.value("tolerance", kFidelityTolerance)};
  }
  return {std::move(network), std::move(bundle)};
}

nn::Tensor probe_batch(std::span<const LabeledImage> corpus, std::span<const std::size_t> members,
                       const PreprocessProfile& profile) {
  const std::size_t n = std::min(kProbeSize, members.size());
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  return nn::make_batch({corpus, members}, positions, profile);
}

double max_probability_difference(nn::Network& native, nn::Network& reloaded, const nn::Tensor& probe) {
  const auto a = native.predict(probe);
  const auto b = reloaded.predict(probe);
  if (a.shape() != b.shape()) throw ExportError("reloaded model produces a different output shape");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - b[i]);
    if (!(d <= worst)) worst = std::isnan(d) ? std::numeric_limits<double>::infinity() : d;
  }
  return worst;
}

ExportBundle export_model(nn::Network& network, const PreprocessProfile& profile, const BundleMetadata& metadata,
                          const nn::Tensor& probe, const std::filesystem::path& out_dir) {
  if (probe.rank() != 4 || probe.dim(0) == 0) throw ExportError("the fidelity probe needs at least one image");
  write_bundle(network, profile, metadata, out_dir);
  auto loaded = load_bundle(out_dir);
  FidelityCheck check{static_cast<std::size_t>(probe.dim(0)), max_probability_difference(network, loaded.network, probe)};

  auto bundle = std::move(loaded.bundle);
  bundle.fidelity = check;
  std::ifstream in(out_dir / kModelFile, std::ios::binary);
  std::stringstream raw;
  raw << in.rdbuf();
  auto doc = ordered_json::parse(raw.str());
  doc["userDefinedMetadata"] = metadata_json(bundle);
  write_text(out_dir / kModelFile, doc.dump(1) + "\n");

  if (!check.passed()) {
    throw ExportError(fmt::format("bundle fidelity check failed: max |dp| = {:.3g} on {} probe images (limit {:g})",
                                  check.max_abs_diff, check.probe_size, check.tolerance));
  }
  return bundle;
}

CatalogEntry catalog_entry(const ExportBundle& bundle, std::string id, std::string display_name,
                           std::string bundle_url) {
  CatalogEntry entry;
  entry.id = std::move(id);
  entry.display_name = std::move(display_name);
  entry.bundle_url = std::move(bundle_url);
  entry.preprocess = bundle.preprocess;
  if (const auto& m = bundle.metadata.metrics) {
    entry.accuracy = m->accuracy;
    entry.precision = m->weighted_avg.precision;
    entry.recall = m->weighted_avg.recall;
    entry.f1 = m->weighted_avg.f1;
  }
  return entry;
}

ordered_json to_json(const CatalogEntry& entry) {
  const auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json j;
  j["id"] = entry.id;
  j["display_name"] = entry.display_name;
  j["bundle_url"] = entry.bundle_url;
  j["reported_metrics"] = {{"accuracy", opt(entry.accuracy)},
                           {"precision", opt(entry.precision)},
                           {"recall", opt(entry.recall)},
                           {"f1", opt(entry.f1)}};
  j["preprocess"] = to_json(entry.preprocess);
  return j;
}

CatalogEntry catalog_entry_from_json(const json& j) {
  const auto opt = [](const json& v) { return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()); };
  CatalogEntry entry;
  entry.id = j.at("id").get<std::string>();
  entry.display_name = j.value("display_name", entry.id);
  entry.bundle_url = j.at("bundle_url").get<std::string>();
  if (j.contains("reported_metrics")) {
    const auto& m = j.at("reported_metrics");
    entry.accuracy = opt(m.value("accuracy", json()));
    entry.precision = opt(m.value("precision", json()));
    entry.recall = opt(m.value("recall", json()));
    entry.f1 = opt(m.value("f1", json()));
  }
  entry.preprocess = profile_from_json(j.at("preprocess"));
  return entry;
}

std::vector<CatalogEntry> read_catalog(const std::filesystem::path& catalog) {
  std::vector<CatalogEntry> entries;
  if (!std::filesystem::exists(catalog)) return entries;
  const auto doc = read_json_file(catalog);
  for (const auto& m : doc.at("models")) entries.push_back(catalog_entry_from_json(m));
  return entries;
}

void upsert_catalog(const std::filesystem::path& catalog, const CatalogEntry& entry) {
  auto entries = read_catalog(catalog);
  std::erase_if(entries, [&](const CatalogEntry& e) { return e.id == entry.id; });
  entries.push_back(entry);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  ordered_json doc;
  doc["models"] = ordered_json::array();
  for (const auto& e : entries) doc["models"].push_back(to_json(e));
  if (catalog.has_parent_path()) std::filesystem::create_directories(catalog.parent_path());
  write_text(catalog, doc.dump(2) + "\n");
}

}  // namespace plasmodium
