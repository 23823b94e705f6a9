/* Copyright 2026 The normkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "normkit/tensor.hpp"

namespace normkit {

class DatasetError : public Error {
 public:
  using Error::Error;
};
class MissingFileError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class BadMagicError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class TruncatedError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

enum class DatasetKind { kBlobs, kMnistSubset, kTinyChars };

std::string_view name(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text);

struct DatasetRequest {
  DatasetKind kind = DatasetKind::kBlobs;
  // blobs: `classes` isotropic Gaussians whose centers sit evenly on a
  // circle of radius `separation` in the first two of `dims` coordinates.
  Index count = 600;
  Index classes = 3;
  Index dims = 2;
  double spread = 0.5;
  double separation = 3.0;
  double test_fraction = 0.2;
  // mnist-subset: IDX files under `path`.
  Index train_limit = 1000;
  Index test_limit = 500;
  // tiny-chars: text file `path`, cut into windows of seq_len + 1 bytes.
  std::string path;
  Index seq_len = 32;
  double valid_fraction = 0.1;
};

/// What a loaded dataset holds. Train and test index sets are disjoint.
struct DatasetHandle {
  DatasetKind kind = DatasetKind::kBlobs;
  Index example_count = 0;
  Shape feature_shape;
  std::vector<Index> train_indices;
  std::vector<Index> test_indices;
};

struct Dataset {
  DatasetHandle handle;
  // blobs / mnist-subset: inputs are N x D or N x 1 x 28 x 28.
  std::optional<Tensor> inputs;
  std::vector<int> labels;
  Index classes = 0;
  // tiny-chars: example i covers tokens [i * seq_len, i * seq_len + seq_len].
  std::vector<int> tokens;
  std::vector<unsigned char> vocabulary;
  Index seq_len = 0;
};

/// `seed` only matters for generated data.
Dataset load_dataset(const DatasetRequest& request, std::uint64_t seed);

struct IdxImages {
  Index count = 0;
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
};

/// Big-endian IDX readers (magic 2051 images, 2049 labels). Throw
/// MissingFileError, BadMagicError or TruncatedError.
IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);

/// Selected rows of an N x ... tensor, in the given order.
Tensor gather_rows(const Tensor& t, const std::vector<Index>& rows);

}  // namespace normkit
