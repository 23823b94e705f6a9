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

#include "normkit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <limits>
#include <nlohmann/json.hpp>

#include "normkit/version.hpp"

namespace normkit {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::size_t line_of(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// JSON values carry no positions; the first occurrence of the quoted key is
// a close enough pointer for error messages.
std::size_t key_line(std::string_view text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string_view::npos ? 0 : line_of(text, pos);
}

class Block {
 public:
  Block(const json& object, std::string path, std::string_view text,
        std::initializer_list<const char*> allowed)
      : object_(object), path_(std::move(path)), text_(text) {
    if (!object_.is_object()) throw ConfigError(path_ + ": expected an object", key_line(text_, leaf(path_)));
    for (const auto& [key, value] : object_.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        std::string known;
        for (const char* a : allowed) known += std::string(known.empty() ? "" : ", ") + a;
        throw ConfigError("unknown key \"" + qualified(key) + "\" (known: " + known + ")",
                          key_line(text_, key));
      }
    }
  }

  bool has(const char* key) const { return object_.contains(key) && !object_.at(key).is_null(); }
  const json& at(const char* key) const { return object_.at(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError(qualified(key) + ": " + message, key_line(text_, key));
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_number()) fail(key, "expected a number");
    const double value = at(key).get<double>();
    if (!std::isfinite(value)) fail(key, "must be finite");
    return value;
  }

  Index integer(const char* key, Index fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_number_integer()) fail(key, "expected an integer");
    return at(key).get<Index>();
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_number_unsigned()) fail(key, "expected a non-negative integer");
    return at(key).get<std::uint64_t>();
  }

  bool flag(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_boolean()) fail(key, "expected true or false");
    return at(key).get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_string()) fail(key, "expected a string");
    return at(key).get<std::string>();
  }

  // Runs a parse_* helper, reporting its complaint against `key`.
  template <typename Fn>
  auto parsed(const char* key, const std::string& fallback, Fn parse) const {
    const std::string value = text(key, fallback);
    try {
      return parse(value);
    } catch (const ContractError& e) {
      fail(key, e.what());
    }
  }

  std::string qualified(const std::string& key) const { return path_ + "." + key; }
  std::string_view source() const { return text_; }

 private:
  static std::string leaf(const std::string& path) { return path.substr(path.rfind('.') + 1); }

  const json& object_;
  std::string path_;
  std::string_view text_;
};

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? p.lexically_normal().string() : (fs::path(base_dir) / p).lexically_normal().string();
}

std::string eval_split(const Dataset& data) {
  return data.handle.kind == DatasetKind::kTinyChars ? "valid" : "test";
}

void fill_model(ExperimentConfig& config, const Dataset& data) {
  ModelConfig& m = config.model;
  m.classes = data.classes;
  config.train.dataset = data.handle.kind;
  const Shape& f = data.handle.feature_shape;
  switch (m.kind) {
    case ModelKind::kMlp:
      m.input_width = numel(f);
      break;
    case ModelKind::kConvNet:
      if (f.size() != 3) throw ContractError("convnet needs image data, got features " + to_string(f));
      m.in_channels = f[0];
      m.height = f[1];
      m.width = f[2];
      break;
    case ModelKind::kCharLstm:
      m.input_width = static_cast<Index>(data.vocabulary.size());
      break;
  }
  validate_model_config(m);
  check_compatible(m, data);
}

ordered_json record_json(const MetricsRecord& r) {
  ordered_json j;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  j["loss"] = r.loss;
  j["l1_penalty"] = r.l1_penalty;
  j["accuracy"] = r.accuracy;
  j["mean_abs_v"] = r.mean_abs_v;
  j["wall_ms"] = r.wall_ms;
  return j;
}

ordered_json config_object(const ExperimentConfig& c) {
  ordered_json model;
  model["kind"] = name(c.model.kind);
  model["hidden"] = c.model.hidden;
  model["kernel"] = c.model.kernel;
  model["lstm_hidden"] = c.model.lstm_hidden;
  model["activation"] = name(c.model.activation);

  ordered_json norm;
  norm["preset"] = c.model.norm ? std::string(name(c.model.norm->preset)) : "none";
  norm["sigma"] = c.train.sigma;
  norm["lambda_l1"] = c.train.lambda_l1;
  norm["l1_target"] = name(c.train.l1_target);
  if (c.model.norm) {
    const DnWindow& w = c.model.norm->dn_window;
    ordered_json window;
    window["channels"] = w.channels ? json(*w.channels) : json(nullptr);
    window["height"] = w.height;
    window["width"] = w.width;
    norm["dn_window"] = window;
    norm["affine"] = c.model.norm->affine;
    norm["allow_zero_sigma"] = c.model.norm->allow_zero_sigma;
  }

  ordered_json train;
  train["optimizer"] = name(c.train.optimizer);
  train["learning_rate"] = c.train.learning_rate;
  train["momentum"] = c.train.momentum;
  train["beta1"] = c.train.beta1;
  train["beta2"] = c.train.beta2;
  train["epsilon"] = c.train.epsilon;
  train["batch_size"] = c.train.batch_size;
  train["epochs"] = c.train.epochs;
  train["seed"] = c.train.seed;
  train["record_wall_time"] = c.train.record_wall_time;

  const DatasetRequest& d = c.dataset;
  ordered_json dataset;
  dataset["kind"] = name(d.kind);
  switch (d.kind) {
    case DatasetKind::kBlobs:
      dataset["count"] = d.count;
      dataset["classes"] = d.classes;
      dataset["dims"] = d.dims;
      dataset["spread"] = d.spread;
      dataset["separation"] = d.separation;
      dataset["test_fraction"] = d.test_fraction;
      break;
    case DatasetKind::kMnistSubset:
      dataset["path"] = d.path;
      dataset["train_limit"] = d.train_limit;
      dataset["test_limit"] = d.test_limit;
      break;
    case DatasetKind::kTinyChars:
      dataset["path"] = d.path;
      dataset["seq_len"] = d.seq_len;
      dataset["valid_fraction"] = d.valid_fraction;
      break;
  }

  ordered_json root;
  root["model"] = model;
  root["norm"] = norm;
  root["train"] = train;
  root["dataset"] = dataset;
  root["output_dir"] = c.output_dir;
  return root;
}

ordered_json conventions_object(const ExperimentConfig& c) {
  ordered_json j;
  j["sigma_placement"] = "inside the root: y = v / sqrt(sigma^2 + mean_B(v^2))";
  j["l1_target"] = name(c.train.l1_target);
  j["l1_reduction"] = "mean: lambda * sum|a| / element count over all normalized layers";
  j["window_edges"] = "clipped at tensor borders; means divide by the in-bounds count";
  j["statistics"] = "batch statistics in training and evaluation; evaluation uses chunks of batch_size";
  j["applies_to"] = {"metrics.csv", "summary.json", "curves.svg"};
  return j;
}

std::string sweep_label(SweepAxis axis, double value) {
  return std::string(name(axis)) + "=" + format_double(value);
}

}  // namespace

const char* version() { return kVersion; }

ExperimentConfig parse_config(std::string_view text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text.begin(), text.end(), nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), line_of(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  const Block top(root, "config", text, {"model", "norm", "train", "dataset", "output_dir"});
  ExperimentConfig config;
  static const json kEmpty = json::object();
  const auto sub = [&](const char* key) -> const json& { return top.has(key) ? top.at(key) : kEmpty; };

  const Block model(sub("model"), "model", text,
                    {"kind", "hidden", "kernel", "lstm_hidden", "activation"});
  ModelConfig& m = config.model;
  m.kind = model.parsed("kind", "mlp", parse_model_kind);
  m.activation = model.parsed("activation", "relu", parse_activation);
  m.kernel = model.integer("kernel", m.kernel);
  m.lstm_hidden = model.integer("lstm_hidden", m.lstm_hidden);
  if (model.has("hidden")) {
    const json& hidden = model.at("hidden");
    if (!hidden.is_array() || hidden.empty()) model.fail("hidden", "expected a non-empty array of widths");
    m.hidden.clear();
    for (const json& w : hidden) {
      if (!w.is_number_integer() || w.get<Index>() < 1) model.fail("hidden", "widths must be integers >= 1");
      m.hidden.push_back(w.get<Index>());
    }
  }
  if (m.kernel < 1 || m.kernel % 2 == 0) model.fail("kernel", "must be odd and >= 1");
  if (m.lstm_hidden < 1) model.fail("lstm_hidden", "must be >= 1");

  const Block norm(sub("norm"), "norm", text,
                   {"preset", "sigma", "lambda_l1", "l1_target", "dn_window", "affine",
                    "allow_zero_sigma"});
  TrainConfig& t = config.train;
  t.sigma = norm.number("sigma", 1.0);
  t.lambda_l1 = norm.number("lambda_l1", 0.0);
  t.l1_target = norm.parsed("l1_target", "v", parse_l1_target);
  if (t.sigma < 0) norm.fail("sigma", "must be >= 0");
  if (t.lambda_l1 < 0) norm.fail("lambda_l1", "must be >= 0");
  const std::string preset = norm.text("preset", "BN");
  if (preset != "none") {
    NormSettings s;
    try {
      s.preset = parse_preset(preset);
    } catch (const ContractError& e) {
      norm.fail("preset", e.what());
    }
    s.sigma = t.sigma;
    s.lambda_l1 = t.lambda_l1;
    s.affine = norm.flag("affine", true);
    s.allow_zero_sigma = norm.flag("allow_zero_sigma", false);
    if (t.sigma == 0 && !s.allow_zero_sigma) {
      norm.fail("sigma", "0 requires allow_zero_sigma: true");
    }
    if (norm.has("dn_window")) {
      const Block window(norm.at("dn_window"), "norm.dn_window", text, {"channels", "height", "width"});
      if (window.has("channels")) s.dn_window.channels = window.integer("channels", 1);
      s.dn_window.height = window.integer("height", s.dn_window.height);
      s.dn_window.width = window.integer("width", s.dn_window.width);
      for (const char* key : {"channels", "height", "width"}) {
        const Index extent = std::string(key) == "channels"
                                 ? s.dn_window.channels.value_or(1)
                                 : (std::string(key) == "height" ? s.dn_window.height : s.dn_window.width);
        if (extent < 1 || extent % 2 == 0) window.fail(key, "must be odd and >= 1");
      }
    }
    m.norm = s;
  } else {
    for (const char* key : {"dn_window", "affine", "allow_zero_sigma"}) {
      if (norm.has(key)) norm.fail(key, "has no effect with preset \"none\"");
    }
  }

  const Block train(sub("train"), "train", text,
                    {"optimizer", "learning_rate", "momentum", "beta1", "beta2", "epsilon",
                     "batch_size", "epochs", "seed", "record_wall_time"});
  t.optimizer = train.parsed("optimizer", "sgd", parse_optimizer);
  t.learning_rate = train.number("learning_rate", t.learning_rate);
  t.momentum = train.number("momentum", t.momentum);
  t.beta1 = train.number("beta1", t.beta1);
  t.beta2 = train.number("beta2", t.beta2);
  t.epsilon = train.number("epsilon", t.epsilon);
  t.batch_size = train.integer("batch_size", t.batch_size);
  t.epochs = static_cast<int>(train.integer("epochs", t.epochs));
  t.seed = train.unsigned_integer("seed", t.seed);
  t.record_wall_time = train.flag("record_wall_time", false);
  try {
    validate_train_config(t);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }

  const Block data(sub("dataset"), "dataset", text,
                   {"kind", "count", "classes", "dims", "spread", "separation", "test_fraction",
                    "path", "train_limit", "test_limit", "seq_len", "valid_fraction"});
  DatasetRequest& d = config.dataset;
  d.kind = data.parsed("kind", "blobs", parse_dataset_kind);
  d.count = data.integer("count", d.count);
  d.classes = data.integer("classes", d.classes);
  d.dims = data.integer("dims", d.dims);
  d.spread = data.number("spread", d.spread);
  d.separation = data.number("separation", d.separation);
  d.test_fraction = data.number("test_fraction", d.test_fraction);
  d.train_limit = data.integer("train_limit", d.train_limit);
  d.test_limit = data.integer("test_limit", d.test_limit);
  d.seq_len = data.integer("seq_len", d.seq_len);
  d.valid_fraction = data.number("valid_fraction", d.valid_fraction);
  const std::string fallback =
      d.kind == DatasetKind::kMnistSubset ? std::string(kDefaultDataDir) + "/mnist-subset"
      : d.kind == DatasetKind::kTinyChars ? std::string(kDefaultDataDir) + "/tiny-chars.txt"
                                          : std::string();
  d.path = data.has("path") ? resolve(base_dir, data.text("path", "")) : fallback;
  if (d.classes < 2) data.fail("classes", "must be >= 2");
  if (d.count < d.classes) data.fail("count", "must be >= classes");
  if (d.dims < 2) data.fail("dims", "must be >= 2");
  if (d.spread < 0) data.fail("spread", "must be >= 0");
  if (!(d.test_fraction > 0 && d.test_fraction < 1)) data.fail("test_fraction", "must lie in (0, 1)");
  if (!(d.valid_fraction > 0 && d.valid_fraction < 1)) data.fail("valid_fraction", "must lie in (0, 1)");
  if (d.train_limit < 1) data.fail("train_limit", "must be >= 1");
  if (d.test_limit < 1) data.fail("test_limit", "must be >= 1");
  if (d.seq_len < 1) data.fail("seq_len", "must be >= 1");
  if ((m.kind == ModelKind::kCharLstm) != (d.kind == DatasetKind::kTinyChars)) {
    model.fail("kind", "charlstm pairs with tiny-chars and only with it");
  }

  config.output_dir = resolve(base_dir, top.text("output_dir", config.output_dir));
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const fs::path parent = fs::path(path).parent_path();
  return parse_config(text, parent.empty() ? "." : parent.string());
}

std::string config_json(const ExperimentConfig& config) { return config_object(config).dump(2); }

std::string conventions_json(const ExperimentConfig& config) {
  return conventions_object(config).dump(2);
}

std::string conventions_line(const ExperimentConfig& config) {
  std::string line = "conventions:";
  const ordered_json block = conventions_object(config);
  for (const auto& [key, value] : block.items()) {
    if (key == "applies_to") continue;
    line += " " + key + "=" + (value.is_string() ? value.get<std::string>() : value.dump()) + ";";
  }
  return line + " full block in summary.json";
}

void apply_seed_override(ExperimentConfig& config, const char* env_value) {
  if (env_value == nullptr || *env_value == '\0') return;
  const std::string text(env_value);
  std::size_t used = 0;
  unsigned long long seed = 0;
  try {
    seed = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text[0] == '-') {
    throw ConfigError("NORMKIT_SEED: \"" + text + "\" is not a non-negative integer");
  }
  config.train.seed = seed;
}

std::shared_ptr<const Dataset> prepare(ExperimentConfig& config) {
  auto data = std::make_shared<const Dataset>(load_dataset(config.dataset, config.train.seed));
  fill_model(config, *data);
  return data;
}

RunOutcome run_experiment(ExperimentConfig config, std::shared_ptr<const Dataset> data,
                          bool write_outputs) {
  RunOutcome out;
  ordered_json abort;
  try {
    if (data) {
      fill_model(config, *data);
    } else {
      data = prepare(config);
    }
  } catch (const Error& e) {
    out.exit_code = dynamic_cast<const NumericalError*>(&e) ? kExitNumerical : kExitConfig;
    out.message = e.what();
    return out;
  }

  const std::string split = eval_split(*data);
  const TrainConfig& train = config.train;
  try {
    const ParamSet initial = init_params(effective_model(config.model, train), train.seed);
    ParamSet params = initial;
    Optimizer optimizer(train);
    Index next_step = 1;
    for (int epoch = 1; epoch <= train.epochs; ++epoch) {
      EpochResult r = train_epoch(config.model, params, *data, train, optimizer, epoch, next_step);
      next_step += static_cast<Index>(r.records.size());
      params = std::move(r.params);
      out.records.insert(out.records.end(), r.records.begin(), r.records.end());
      out.records.push_back(evaluate(config.model, params, *data, data->handle.test_indices, train,
                                     split, next_step - 1, epoch));
      out.final_eval = out.records.back();
    }
    out.final_train = evaluate(config.model, params, *data, data->handle.train_indices, train,
                               "train", next_step - 1, train.epochs);
  } catch (const TrainingAborted& e) {
    out.exit_code = kExitNumerical;
    out.message = e.what();
    abort["step"] = e.record().step;
    abort["epoch"] = e.record().epoch;
    abort["split"] = e.record().split;
    abort["layer"] = e.layer();
    abort["message"] = e.what();
  } catch (const NumericalError& e) {
    out.exit_code = kExitNumerical;
    out.message = e.what();
    abort["layer"] = e.where();
    abort["message"] = e.what();
  } catch (const Error& e) {
    out.exit_code = kExitConfig;
    out.message = e.what();
  }

  ordered_json summary;
  summary["version"] = kVersion;
  summary["status"] = out.exit_code == kExitOk ? "ok" : (out.exit_code == kExitNumerical ? "aborted" : "failed");
  summary["exit_code"] = out.exit_code;
  if (!out.message.empty()) summary["message"] = out.message;
  summary["conventions"] = conventions_object(config);
  summary["config"] = config_object(config);
  ordered_json derived;
  derived["input_width"] = config.model.input_width;
  derived["input_shape"] = data->handle.feature_shape;
  derived["classes"] = config.model.classes;
  derived["train_examples"] = data->handle.train_indices.size();
  derived["eval_examples"] = data->handle.test_indices.size();
  summary["derived"] = derived;
  summary["rows"] = out.records.size();
  ordered_json final_metrics = ordered_json::object();
  if (out.final_eval) final_metrics[split] = record_json(*out.final_eval);
  if (out.final_train) final_metrics["train"] = record_json(*out.final_train);
  summary["final"] = final_metrics;
  if (!abort.empty()) summary["abort"] = abort;
  out.summary = summary.dump(2) + "\n";

  if (write_outputs) {
    try {
      const fs::path dir(config.output_dir);
      write_file_atomic((dir / "metrics.csv").string(), write_metrics_csv(out.records));
      write_file_atomic((dir / "summary.json").string(), out.summary);
      write_file_atomic((dir / "curves.svg").string(),
                        render_curves(out.records, conventions_line(config)));
    } catch (const std::exception& e) {
      if (out.exit_code == kExitOk) out.exit_code = kExitFailure;
      out.message += std::string(out.message.empty() ? "" : "; ") + "writing outputs: " + e.what();
    }
  }
  return out;
}

std::string_view name(SweepAxis axis) { return axis == SweepAxis::kSigma ? "sigma" : "lambda_l1"; }

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "sigma") return SweepAxis::kSigma;
  if (text == "lambda_l1") return SweepAxis::kLambdaL1;
  throw ContractError("unknown sweep axis \"" + std::string(text) + "\" (expected sigma or lambda_l1)");
}

SweepOutcome run_sweep(const ExperimentConfig& config, SweepAxis axis,
                       const std::vector<double>& values, bool write_outputs) {
  if (values.empty()) throw ContractError("sweep needs at least one value");
  SweepOutcome sweep;
  ExperimentConfig base = config;
  std::shared_ptr<const Dataset> data;
  std::string shared_failure;
  try {
    data = prepare(base);
  } catch (const Error& e) {
    shared_failure = e.what();
  }

  std::vector<std::future<RunOutcome>> pending;
  for (double value : values) {
    ExperimentConfig child = base;
    (axis == SweepAxis::kSigma ? child.train.sigma : child.train.lambda_l1) = value;
    if (child.model.norm) {
      child.model.norm->sigma = child.train.sigma;
      child.model.norm->lambda_l1 = child.train.lambda_l1;
    }
    child.output_dir = (fs::path(config.output_dir) / sweep_label(axis, value)).string();
    const bool invalid = !std::isfinite(value) || value < 0 ||
                         (axis == SweepAxis::kSigma && value == 0 && child.model.norm &&
                          !child.model.norm->allow_zero_sigma);
    if (!shared_failure.empty() || invalid) {
      std::promise<RunOutcome> failed;
      RunOutcome r;
      r.exit_code = kExitConfig;
      r.message = invalid ? std::string(name(axis)) + " value " + format_double(value) + " is not allowed"
                          : shared_failure;
      failed.set_value(std::move(r));
      pending.push_back(failed.get_future());
      continue;
    }
    pending.push_back(std::async(std::launch::async, [child, data, write_outputs] {
      return run_experiment(child, data, write_outputs);
    }));
  }

  std::string csv = csv_row({"axis", "value", "exit_code", "status", "final_split", "final_loss",
                             "final_accuracy", "final_mean_abs_v", "final_l1_penalty",
                             "train_accuracy", "message"});
  bool any_ok = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepRow row{values[i], pending[i].get()};
    const RunOutcome& r = row.outcome;
    any_ok = any_ok || r.exit_code == kExitOk;
    const auto field = [](const std::optional<MetricsRecord>& m, double MetricsRecord::*member) {
      return m ? format_double((*m).*member) : std::string();
    };
    csv += csv_row({std::string(name(axis)), format_double(row.value), std::to_string(r.exit_code),
                    r.exit_code == kExitOk ? "ok" : (r.exit_code == kExitNumerical ? "aborted" : "failed"),
                    r.final_eval ? r.final_eval->split : std::string(),
                    field(r.final_eval, &MetricsRecord::loss),
                    field(r.final_eval, &MetricsRecord::accuracy),
                    field(r.final_eval, &MetricsRecord::mean_abs_v),
                    field(r.final_eval, &MetricsRecord::l1_penalty),
                    field(r.final_train, &MetricsRecord::accuracy), r.message});
    sweep.rows.push_back(std::move(row));
  }
  sweep.csv = csv;
  sweep.exit_code = any_ok ? kExitOk : kExitFailure;
  if (write_outputs) {
    try {
      write_file_atomic((fs::path(config.output_dir) / "sweep.csv").string(), csv);
    } catch (const std::exception&) {
      sweep.exit_code = kExitFailure;
    }
  }
  return sweep;
}

}  // namespace normkit
