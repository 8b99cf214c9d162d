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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plasmodium/nn/network.hpp"

namespace plasmodium {

/// Weights of one layer as stored in a Keras HDF5 weight file (the layout
/// written by `save_weights` to `.h5`: root attribute `layer_names`, per
/// layer attribute `weight_names`).
struct H5LayerWeights {
  std::string layer;
  std::vector<nn::Tensor> weights;
};

/// Layers that carry weights, in file order. Throws SnapshotUnavailable when
/// the file is missing and DataError when it cannot be parsed.
std::vector<H5LayerWeights> read_keras_h5(const std::filesystem::path& path);

/// Writes the same layout for every weighted layer of `network` in
/// [0, end_layer).
void write_keras_h5(const nn::Network& network, const std::filesystem::path& path, int end_layer = -1);

struct WeightLoadReport {
  std::size_t layers_loaded = 0;
  bool matched_by_name = false;
};

/// Copies file weights into the weighted layers of `network` in
/// [0, end_layer). Layers are paired by name when the file and the network
/// name the same set of layers, otherwise by order; every tensor shape must
/// match. Throws ShapeError on any mismatch.
WeightLoadReport load_keras_weights(nn::Network& network, const std::filesystem::path& path, int end_layer = -1);

}  // namespace plasmodium
