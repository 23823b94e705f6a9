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

#include "normkit/metrics_io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <system_error>
#include <thread>

namespace normkit {
namespace {

std::string escape_xml(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fixed(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

std::string tick_label(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", value);
  return buf;
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> columns{"step",     "epoch",    "split",      "loss",
                                                "l1_penalty", "accuracy", "mean_abs_v", "wall_ms"};
  return columns;
}

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return {buf, result.ptr};
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw CsvError("not a number: \"" + std::string(text) + "\"");
  }
  return value;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) line += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      line += f;
      continue;
    }
    line += '"';
    for (char ch : f) {
      if (ch == '"') line += '"';
      line += ch;
    }
    line += '"';
  }
  return line + "\r\n";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool pending = false;  // a row has started
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch != '"') {
        field += ch;
      } else if (i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else {
        quoted = false;
      }
      continue;
    }
    switch (ch) {
      case '"':
        quoted = true;
        pending = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        pending = true;
        break;
      case '\r':
        break;
      case '\n':
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        pending = false;
        break;
      default:
        field += ch;
        pending = true;
    }
  }
  if (quoted) throw CsvError("unterminated quoted field");
  if (pending) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string write_metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out = csv_row(metrics_columns());
  for (const MetricsRecord& r : records) {
    out += csv_row({std::to_string(r.step), std::to_string(r.epoch), r.split,
                    format_double(r.loss), format_double(r.l1_penalty), format_double(r.accuracy),
                    format_double(r.mean_abs_v), format_double(r.wall_ms)});
  }
  return out;
}

std::vector<MetricsRecord> read_metrics_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw MissingColumnError("metrics CSV has no header");
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < rows[0].size(); ++i) at.emplace(rows[0][i], i);
  std::vector<std::size_t> index;
  for (const std::string& column : metrics_columns()) {
    auto it = at.find(column);
    if (it == at.end()) throw MissingColumnError("metrics CSV lacks column \"" + column + "\"");
    index.push_back(it->second);
  }
  std::vector<MetricsRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != rows[0].size()) {
      throw CsvError("metrics CSV row " + std::to_string(r + 1) + " has " +
                     std::to_string(row.size()) + " fields, header has " +
                     std::to_string(rows[0].size()));
    }
    const auto cell = [&](std::size_t column) -> const std::string& { return row[index[column]]; };
    MetricsRecord m;
    m.step = static_cast<Index>(parse_double(cell(0)));
    m.epoch = static_cast<int>(parse_double(cell(1)));
    m.split = cell(2);
    m.loss = parse_double(cell(3));
    m.l1_penalty = parse_double(cell(4));
    m.accuracy = parse_double(cell(5));
    m.mean_abs_v = parse_double(cell(6));
    m.wall_ms = parse_double(cell(7));
    records.push_back(std::move(m));
  }
  return records;
}

std::string render_curves(const std::vector<MetricsRecord>& records, const std::string& note) {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 70, kRight = 20, kTop = 30, kBottom = 50;
  const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::vector<std::string> splits;
  for (const auto& r : records) {
    if (std::find(splits.begin(), splits.end(), r.split) == splits.end()) splits.push_back(r.split);
  }
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (!records.empty()) {
    const auto [smin, smax] = std::minmax_element(
        records.begin(), records.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
    const auto [lmin, lmax] = std::minmax_element(
        records.begin(), records.end(), [](const auto& a, const auto& b) { return a.loss < b.loss; });
    x_lo = static_cast<double>(smin->step);
    x_hi = static_cast<double>(smax->step);
    y_lo = std::min(0.0, lmin->loss);
    y_hi = lmax->loss;
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  const auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<title>loss by step</title>\n"
      << "<desc>" << escape_xml(note) << "</desc>\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n"
      << "<path d=\"M" << fixed(kLeft) << ' ' << fixed(kTop) << " V" << fixed(kTop + plot_h)
      << " H" << fixed(kLeft + plot_w) << "\" stroke=\"black\" fill=\"none\"/>\n"
      << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"" << fixed(kHeight - 10)
      << "\" text-anchor=\"middle\" font-size=\"13\">step</text>\n"
      << "<text x=\"16\" y=\"" << fixed(kTop + plot_h / 2) << "\" text-anchor=\"middle\" "
      << "font-size=\"13\" transform=\"rotate(-90 16 " << fixed(kTop + plot_h / 2)
      << ")\">loss</text>\n";
  for (double x : {x_lo, x_hi}) {
    svg << "<text x=\"" << fixed(px(x)) << "\" y=\"" << fixed(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << tick_label(x) << "</text>\n";
  }
  for (double y : {y_lo, y_hi}) {
    svg << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(py(y) + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">" << tick_label(y) << "</text>\n";
  }
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    svg << "<polyline data-split=\"" << escape_xml(splits[s]) << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& r : records) {
      if (r.split != splits[s]) continue;
      svg << (first ? "" : " ") << fixed(px(static_cast<double>(r.step))) << ','
          << fixed(py(r.loss));
      first = false;
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << fixed(kLeft + plot_w - 4) << "\" y=\"" << fixed(kTop + 14 + 16.0 * s)
        << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
        << escape_xml(splits[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path temp =
      target.string() + ".tmp" +
      std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "." +
      std::to_string(counter++);
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + temp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + temp.string());
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp);
    throw Error("cannot rename " + temp.string() + " to " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace normkit
