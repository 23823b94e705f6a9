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

#include <string>
#include <string_view>
#include <vector>

#include "normkit/training.hpp"

namespace normkit {

class CsvError : public Error {
 public:
  using Error::Error;
};

class MissingColumnError : public CsvError {
 public:
  using CsvError::CsvError;
};

/// step,epoch,split,loss,l1_penalty,accuracy,mean_abs_v,wall_ms
const std::vector<std::string>& metrics_columns();

/// Shortest text that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

/// RFC 4180: CRLF line ends, fields quoted only when they need it.
std::string csv_row(const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string write_metrics_csv(const std::vector<MetricsRecord>& records);
/// Needs every metrics column; extra columns are ignored.
std::vector<MetricsRecord> read_metrics_csv(std::string_view text);

/// SVG 1.1 learning curves: one loss polyline per split, in order of first
/// appearance. `note` goes into <desc> verbatim.
std::string render_curves(const std::vector<MetricsRecord>& records, const std::string& note);

/// Writes via a temporary sibling and a rename.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace normkit
