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

#include "plasmodium/keras_h5.hpp"

#include <hdf5.h>

#include <algorithm>
#include <cstring>
#include <optional>
#include <set>

#include "plasmodium/error.hpp"

namespace plasmodium {

namespace {

// Closes an HDF5 handle on scope exit.
class Handle {
 public:
  Handle(hid_t id, herr_t (*close)(hid_t)) : id_(id), close_(close) {}
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (id_ >= 0) close_(id_);
  }
  hid_t get() const noexcept { return id_; }
  bool valid() const noexcept { return id_ >= 0; }

 private:
  hid_t id_;
  herr_t (*close_)(hid_t);
};

class QuietErrors {
 public:
  QuietErrors() {
    H5Eget_auto2(H5E_DEFAULT, &func_, &data_);
    H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
  }
  ~QuietErrors() { H5Eset_auto2(H5E_DEFAULT, func_, data_); }

 private:
  H5E_auto2_t func_ = nullptr;
  void* data_ = nullptr;
};

std::vector<std::string> read_string_attribute(hid_t object, const char* name, const std::string& where) {
  if (H5Aexists(object, name) <= 0) throw DataError(where + ": missing attribute '" + name + "'");
  Handle attr(H5Aopen(object, name, H5P_DEFAULT), H5Aclose);
  Handle type(H5Aget_type(attr.get()), H5Tclose);
  Handle space(H5Aget_space(attr.get()), H5Sclose);
  const hssize_t count = H5Sget_simple_extent_npoints(space.get());
  std::vector<std::string> out;
  if (count <= 0) return out;
  if (H5Tget_class(type.get()) != H5T_STRING) throw DataError(where + ": attribute '" + name + "' is not a string");
  if (H5Tis_variable_str(type.get()) > 0) {
    Handle mem(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(mem.get(), H5T_VARIABLE);
    std::vector<char*> buf(count, nullptr);
    if (H5Aread(attr.get(), mem.get(), buf.data()) < 0) throw DataError(where + ": unreadable attribute");
    for (char* s : buf) out.emplace_back(s ? s : "");
    H5Dvlen_reclaim(mem.get(), space.get(), H5P_DEFAULT, buf.data());
    return out;
  }
  const std::size_t size = H5Tget_size(type.get());
  std::vector<char> buf(size * count);
  if (H5Aread(attr.get(), type.get(), buf.data()) < 0) throw DataError(where + ": unreadable attribute");
  for (hssize_t i = 0; i < count; ++i) {
    const char* s = buf.data() + i * size;
    out.emplace_back(s, strnlen(s, size));
  }
  return out;
}

void write_string_attribute(hid_t object, const char* name, const std::vector<std::string>& values) {
  std::size_t width = 1;
  for (const auto& v : values) width = std::max(width, v.size());
  std::vector<char> buf(width * values.size(), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) std::memcpy(buf.data() + i * width, values[i].data(), values[i].size());
  Handle type(H5Tcopy(H5T_C_S1), H5Tclose);
  H5Tset_size(type.get(), width);
  H5Tset_strpad(type.get(), H5T_STR_NULLPAD);
  const hsize_t dims[1] = {values.size()};
  Handle space(values.empty() ? H5Screate(H5S_NULL) : H5Screate_simple(1, dims, nullptr), H5Sclose);
  Handle attr(H5Acreate2(object, name, type.get(), space.get(), H5P_DEFAULT, H5P_DEFAULT), H5Aclose);
  if (!values.empty()) H5Awrite(attr.get(), type.get(), buf.data());
}

nn::Tensor read_dataset(hid_t group, const std::string& name, const std::string& where) {
  Handle ds(H5Dopen2(group, name.c_str(), H5P_DEFAULT), H5Dclose);
  if (!ds.valid()) throw DataError(where + ": missing dataset '" + name + "'");
  Handle space(H5Dget_space(ds.get()), H5Sclose);
  const int rank = H5Sget_simple_extent_ndims(space.get());
  std::vector<hsize_t> dims(std::max(rank, 0));
  H5Sget_simple_extent_dims(space.get(), dims.data(), nullptr);
  nn::Shape shape(dims.begin(), dims.end());
  nn::Tensor t(shape);
  if (t.size() > 0 && H5Dread(ds.get(), H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, t.data()) < 0) {
    throw DataError(where + ": unreadable dataset '" + name + "'");
  }
  return t;
}

}  // namespace

std::vector<H5LayerWeights> read_keras_h5(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw SnapshotUnavailable("weight snapshot not found: " + path.string(), path.string());
  }
  QuietErrors quiet;
  Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
  if (!file.valid()) throw DataError(path.string() + ": not an HDF5 file");
  hid_t root_id = file.get();
  std::optional<Handle> nested;
  if (H5Aexists(root_id, "layer_names") <= 0 && H5Lexists(root_id, "model_weights", H5P_DEFAULT) > 0) {
    nested.emplace(H5Gopen2(root_id, "model_weights", H5P_DEFAULT), H5Gclose);
    root_id = nested->get();
  }
  const std::string where = path.string();
  std::vector<H5LayerWeights> out;
  for (const auto& layer : read_string_attribute(root_id, "layer_names", where)) {
    Handle group(H5Gopen2(root_id, layer.c_str(), H5P_DEFAULT), H5Gclose);
    if (!group.valid()) throw DataError(where + ": missing layer group '" + layer + "'");
    const auto names = read_string_attribute(group.get(), "weight_names", where + ":" + layer);
    if (names.empty()) continue;
    H5LayerWeights lw{layer, {}};
    for (const auto& n : names) lw.weights.push_back(read_dataset(group.get(), n, where + ":" + layer));
    out.push_back(std::move(lw));
  }
  return out;
}

void write_keras_h5(const nn::Network& network, const std::filesystem::path& path, int end_layer) {
  const auto& layers = network.graph().layers;
  const int end = end_layer < 0 ? static_cast<int>(layers.size()) : std::min<int>(end_layer, layers.size());
  Handle file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose);
  if (!file.valid()) throw DataError("cannot create " + path.string());
  std::vector<std::string> layer_names;
  for (int i = 0; i < end; ++i) {
    const auto params = network.layer_parameters(i);
    layer_names.push_back(layers[i].name);
    Handle group(H5Gcreate2(file.get(), layers[i].name.c_str(), H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT), H5Gclose);
    std::vector<std::string> weight_names;
    if (!params.empty()) {
      Handle inner(H5Gcreate2(group.get(), layers[i].name.c_str(), H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT), H5Gclose);
      for (const auto& p : params) {
        const std::string leaf = p.weight + ":0";
        weight_names.push_back(layers[i].name + "/" + leaf);
        std::vector<hsize_t> dims(p.value.shape().begin(), p.value.shape().end());
        Handle space(H5Screate_simple(static_cast<int>(dims.size()), dims.data(), nullptr), H5Sclose);
        Handle ds(H5Dcreate2(inner.get(), leaf.c_str(), H5T_IEEE_F32LE, space.get(), H5P_DEFAULT, H5P_DEFAULT,
                             H5P_DEFAULT),
                  H5Dclose);
        H5Dwrite(ds.get(), H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, p.value.data());
      }
    }
    write_string_attribute(group.get(), "weight_names", weight_names);
  }
  write_string_attribute(file.get(), "layer_names", layer_names);
  write_string_attribute(file.get(), "backend", {"tensorflow"});
}

WeightLoadReport load_keras_weights(nn::Network& network, const std::filesystem::path& path, int end_layer) {
  const auto stored = read_keras_h5(path);
  const auto& layers = network.graph().layers;
  const int end = end_layer < 0 ? static_cast<int>(layers.size()) : std::min<int>(end_layer, layers.size());
  std::vector<int> targets;
  for (int i = 0; i < end; ++i) {
    if (!network.layer_parameters(i).empty()) targets.push_back(i);
  }
  if (stored.size() != targets.size()) {
    throw ShapeError(path.string() + " holds " + std::to_string(stored.size()) + " weighted layers, the model has " +
                     std::to_string(targets.size()));
  }
  std::set<std::string> file_names, model_names;
  for (const auto& s : stored) file_names.insert(s.layer);
  for (int i : targets) model_names.insert(layers[i].name);
  WeightLoadReport report;
  report.matched_by_name = file_names == model_names;

  std::vector<std::pair<int, const H5LayerWeights*>> plan;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const H5LayerWeights* src = &stored[k];
    if (report.matched_by_name) {
      src = &*std::find_if(stored.begin(), stored.end(), [&](const auto& s) { return s.layer == layers[targets[k]].name; });
    }
    const auto params = network.layer_parameters(targets[k]);
    if (src->weights.size() != params.size()) {
      throw ShapeError("layer '" + layers[targets[k]].name + "' expects " + std::to_string(params.size()) +
                       " weights, file layer '" + src->layer + "' has " + std::to_string(src->weights.size()));
    }
    for (std::size_t w = 0; w < params.size(); ++w) {
      if (src->weights[w].shape() != params[w].value.shape()) {
        throw ShapeError("weight " + params[w].name + " has shape " + nn::to_string(params[w].value.shape()) +
                         ", file layer '" + src->layer + "' has " + nn::to_string(src->weights[w].shape()));
      }
    }
    plan.emplace_back(targets[k], src);
  }
  for (const auto& [layer, src] : plan) {
    auto params = network.layer_parameters(layer);
    for (std::size_t w = 0; w < params.size(); ++w) params[w].value = src->weights[w];
  }
  report.layers_loaded = plan.size();
  return report;
}

}  // namespace plasmodium
