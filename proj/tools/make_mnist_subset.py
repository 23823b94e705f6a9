#!/usr/bin/env python3
# Copyright 2026 The normkit Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes a shuffled MNIST subset as IDX files.

The source is the 5000-digit MNIST sample bundled in the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz, BSD-3). Usage:

    pip download --no-deps mlxtend
    python3 tools/make_mnist_subset.py mlxtend-*.whl data/mnist-subset
"""
import gzip
import io
import struct
import sys
import zipfile

import numpy as np

TRAIN_COUNT = 1000
TEST_COUNT = 500
SEED = 20160101


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main(wheel, out_dir):
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",")
    images, labels = table[:, :-1], table[:, -1].astype(int)
    rng = np.random.default_rng(SEED)
    order = rng.permutation(len(labels))
    images, labels = images[order], labels[order]
    n = TRAIN_COUNT + TEST_COUNT
    write_images(f"{out_dir}/train-images-idx3-ubyte", images[:TRAIN_COUNT])
    write_labels(f"{out_dir}/train-labels-idx1-ubyte", labels[:TRAIN_COUNT])
    write_images(f"{out_dir}/t10k-images-idx3-ubyte", images[TRAIN_COUNT:n])
    write_labels(f"{out_dir}/t10k-labels-idx1-ubyte", labels[TRAIN_COUNT:n])
    print("train classes", np.bincount(labels[:TRAIN_COUNT]))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
