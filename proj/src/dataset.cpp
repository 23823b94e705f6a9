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

#include "normkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

namespace normkit {
namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& path) {
  if (bytes.size() < offset + 4) throw TruncatedError(path + ": truncated IDX header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(std::uint32_t magic, std::uint32_t expected, const std::string& path) {
  if (magic != expected) {
    throw BadMagicError(path + ": IDX magic " + std::to_string(magic) + ", expected " +
                        std::to_string(expected));
  }
}

Dataset make_blobs(const DatasetRequest& r, std::uint64_t seed) {
  if (r.count < r.classes || r.classes < 2 || r.dims < 2 || r.spread < 0 ||
      !(r.test_fraction > 0 && r.test_fraction < 1)) {
    throw ContractError("blobs: need count >= classes >= 2, dims >= 2, spread >= 0, "
                        "0 < test_fraction < 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::ArrayXd values(r.count * r.dims);
  Dataset d;
  d.classes = r.classes;
  for (Index i = 0; i < r.count; ++i) {
    const int label = static_cast<int>(i % r.classes);
    const double angle = 2.0 * std::numbers::pi * label / static_cast<double>(r.classes);
    for (Index k = 0; k < r.dims; ++k) {
      double center = 0.0;
      if (k == 0) center = r.separation * std::cos(angle);
      if (k == 1) center = r.separation * std::sin(angle);
      values[i * r.dims + k] = center + r.spread * noise(rng);
    }
    d.labels.push_back(label);
  }
  d.inputs = Tensor({r.count, r.dims}, std::move(values));

  std::vector<Index> order(static_cast<std::size_t>(r.count));
  for (Index i = 0; i < r.count; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto test = std::max<Index>(1, static_cast<Index>(std::llround(r.test_fraction * r.count)));
  d.handle = {DatasetKind::kBlobs, r.count, {r.dims},
              {order.begin() + test, order.end()}, {order.begin(), order.begin() + test}};
  std::sort(d.handle.train_indices.begin(), d.handle.train_indices.end());
  std::sort(d.handle.test_indices.begin(), d.handle.test_indices.end());
  return d;
}

Dataset make_mnist(const DatasetRequest& r) {
  namespace fs = std::filesystem;
  const fs::path dir(r.path);
  const auto load = [&](const char* images, const char* labels, Index limit,
                        std::vector<Eigen::ArrayXd>& rows, std::vector<int>& out_labels) {
    const IdxImages img = read_idx_images((dir / images).string());
    const auto lab = read_idx_labels((dir / labels).string());
    if (static_cast<Index>(lab.size()) != img.count) {
      throw DatasetError(std::string(images) + " and " + labels + " disagree on example count");
    }
    if (img.rows != 28 || img.cols != 28) throw DatasetError("expected 28 x 28 MNIST images");
    const Index take = std::min(limit, img.count);
    for (Index i = 0; i < take; ++i) {
      Eigen::ArrayXd px(784);
      for (Index p = 0; p < 784; ++p) px[p] = img.pixels[static_cast<std::size_t>(i * 784 + p)] / 255.0;
      rows.push_back(std::move(px));
      out_labels.push_back(lab[static_cast<std::size_t>(i)]);
    }
  };
  std::vector<Eigen::ArrayXd> rows;
  Dataset d;
  load("train-images-idx3-ubyte", "train-labels-idx1-ubyte", r.train_limit, rows, d.labels);
  const Index train = static_cast<Index>(rows.size());
  load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", r.test_limit, rows, d.labels);
  const Index total = static_cast<Index>(rows.size());
  if (train == 0 || total == train) throw DatasetError("mnist-subset: empty split");

  Eigen::ArrayXd values(total * 784);
  for (Index i = 0; i < total; ++i) values.segment(i * 784, 784) = rows[static_cast<std::size_t>(i)];
  d.inputs = Tensor({total, 1, 28, 28}, std::move(values));
  d.classes = 10;
  d.handle = {DatasetKind::kMnistSubset, total, {1, 28, 28}, {}, {}};
  for (Index i = 0; i < total; ++i) (i < train ? d.handle.train_indices : d.handle.test_indices).push_back(i);
  return d;
}

Dataset make_chars(const DatasetRequest& r) {
  if (r.seq_len < 1 || !(r.valid_fraction > 0 && r.valid_fraction < 1)) {
    throw ContractError("tiny-chars: need seq_len >= 1 and 0 < valid_fraction < 1");
  }
  const std::vector<std::uint8_t> bytes = read_file(r.path);
  Dataset d;
  d.seq_len = r.seq_len;
  bool seen[256] = {};
  for (std::uint8_t b : bytes) seen[b] = true;
  int id_of[256];
  for (int b = 0; b < 256; ++b) {
    if (seen[b]) {
      id_of[b] = static_cast<int>(d.vocabulary.size());
      d.vocabulary.push_back(static_cast<unsigned char>(b));
    }
  }
  for (std::uint8_t b : bytes) d.tokens.push_back(id_of[b]);
  d.classes = static_cast<Index>(d.vocabulary.size());

  // Windows of seq_len + 1 tokens (inputs plus shifted targets), sharing one
  // boundary token. The last valid_fraction of windows forms the split.
  const Index windows = (static_cast<Index>(d.tokens.size()) - 1) / r.seq_len;
  const auto valid = static_cast<Index>(std::llround(r.valid_fraction * windows));
  if (windows < 2 || valid < 1 || valid >= windows) {
    throw DatasetError("tiny-chars: " + r.path + " too short for seq_len " +
                       std::to_string(r.seq_len));
  }
  d.handle = {DatasetKind::kTinyChars, windows, {r.seq_len}, {}, {}};
  for (Index i = 0; i < windows; ++i) {
    (i < windows - valid ? d.handle.train_indices : d.handle.test_indices).push_back(i);
  }
  return d;
}

}  // namespace

std::string_view name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kBlobs: return "blobs";
    case DatasetKind::kMnistSubset: return "mnist-subset";
    case DatasetKind::kTinyChars: return "tiny-chars";
  }
  return "?";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  for (DatasetKind k : {DatasetKind::kBlobs, DatasetKind::kMnistSubset, DatasetKind::kTinyChars}) {
    if (text == name(k)) return k;
  }
  throw ContractError("unknown dataset kind \"" + std::string(text) + "\"");
}

IdxImages read_idx_images(const std::string& path) {
  const auto bytes = read_file(path);
  check_magic(read_be32(bytes, 0, path), 2051, path);
  IdxImages images;
  images.count = read_be32(bytes, 4, path);
  images.rows = read_be32(bytes, 8, path);
  images.cols = read_be32(bytes, 12, path);
  const auto payload = static_cast<std::size_t>(images.count * images.rows * images.cols);
  if (bytes.size() < 16 + payload) {
    throw TruncatedError(path + ": header promises " + std::to_string(images.count) +
                         " images, payload holds " + std::to_string(bytes.size() - 16) + " bytes");
  }
  images.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  const auto bytes = read_file(path);
  check_magic(read_be32(bytes, 0, path), 2049, path);
  const std::size_t count = read_be32(bytes, 4, path);
  if (bytes.size() < 8 + count) {
    throw TruncatedError(path + ": header promises " + std::to_string(count) + " labels");
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

Dataset load_dataset(const DatasetRequest& request, std::uint64_t seed) {
  switch (request.kind) {
    case DatasetKind::kBlobs: return make_blobs(request, seed);
    case DatasetKind::kMnistSubset: return make_mnist(request);
    case DatasetKind::kTinyChars: return make_chars(request);
  }
  throw ContractError("unknown dataset kind");
}

Tensor gather_rows(const Tensor& t, const std::vector<Index>& rows) {
  const Index n = t.shape()[0];
  const Index stride = t.size() / n;
  Eigen::ArrayXd values(static_cast<Index>(rows.size()) * stride);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= n) throw ShapeError("gather_rows: row out of range");
    values.segment(static_cast<Index>(r) * stride, stride) = t.values().segment(rows[r] * stride, stride);
  }
  Shape shape = t.shape();
  shape[0] = static_cast<Index>(rows.size());
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace normkit
