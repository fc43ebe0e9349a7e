// Copyright 2026 The promptcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "promptcomp/adaptive_predictor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "promptcomp/hashing.h"
#include "promptcomp/similarity.h"
#include "promptcomp/status_macros.h"

namespace promptcomp {

namespace {

constexpr char kModelMagic[4] = {'P', 'C', 'L', 'M'};
constexpr uint32_t kModelVersion = 1;

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Clamps to keep sigmoid outputs strictly inside (0, 1) in double precision.
double ClampedSigmoid(double z) {
  return Sigmoid(std::clamp(z, -36.0, 36.0));
}

}  // namespace

FeatureVector Featurize(std::string_view text, uint32_t dim) {
  std::map<uint32_t, double> counts;
  auto add = [&](std::string_view kind, std::string_view token) {
    const uint64_t h = Fnv1a64(token, Fnv1a64(kind));
    counts[static_cast<uint32_t>(h % dim)] += 1.0;
  };
  for (const std::string& word : WordTokens(text)) {
    add("w:", word);
    const std::string padded = "<" + word + ">";
    for (size_t n = 3; n <= 5; ++n) {
      for (size_t start = 0; start + n <= padded.size(); ++start) {
        add("c:", std::string_view(padded).substr(start, n));
      }
    }
  }
  FeatureVector out;
  double norm = 0;
  for (const auto& [index, count] : counts) norm += count * count;
  norm = std::sqrt(norm);
  out.entries.reserve(counts.size());
  for (const auto& [index, count] : counts) {
    out.entries.emplace_back(index, count / norm);
  }
  return out;
}

double Dot(const FeatureVector& a, const FeatureVector& b) {
  double dot = 0;
  size_t i = 0, j = 0;
  while (i < a.entries.size() && j < b.entries.size()) {
    if (a.entries[i].first < b.entries[j].first) {
      ++i;
    } else if (a.entries[i].first > b.entries[j].first) {
      ++j;
    } else {
      dot += a.entries[i++].second * b.entries[j++].second;
    }
  }
  return dot;
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"learning_rate", learning_rate}, {"epochs", epochs},
          {"batch_size", batch_size},       {"seed", seed},
          {"l2", l2},                       {"dim", dim}};
}

absl::StatusOr<TrainConfig> TrainConfig::FromJson(const nlohmann::json& json) {
  TrainConfig config;
  try {
    config.learning_rate = json.value("learning_rate", config.learning_rate);
    config.epochs = json.value("epochs", config.epochs);
    config.batch_size = json.value("batch_size", config.batch_size);
    config.seed = json.value("seed", config.seed);
    config.l2 = json.value("l2", config.l2);
    config.dim = json.value("dim", config.dim);
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(e.what());
  }
  if (!(config.learning_rate > 0) || config.epochs < 0 ||
      config.batch_size < 1 || config.l2 < 0 || config.dim == 0) {
    return absl::InvalidArgumentError(
        "train config needs learning_rate > 0, epochs >= 0, batch_size >= 1, "
        "l2 >= 0, dim > 0");
  }
  return config;
}

HashedLinearModel::HashedLinearModel(uint32_t dim, int num_outputs,
                                     std::string fingerprint)
    : dim_(dim),
      num_outputs_(num_outputs),
      fingerprint_(std::move(fingerprint)),
      bias_(num_outputs, 0.0) {
  config.dim = dim;
}

const double* HashedLinearModel::Row(uint32_t feature) const {
  auto it = row_offset_.find(feature);
  return it == row_offset_.end() ? nullptr : rows_.data() + it->second;
}

double* HashedLinearModel::Row(uint32_t feature) {
  auto [it, inserted] = row_offset_.try_emplace(feature, rows_.size());
  if (inserted) rows_.resize(rows_.size() + num_outputs_, 0.0);
  return rows_.data() + it->second;
}

double HashedLinearModel::Weight(uint32_t feature, int output) const {
  const double* row = Row(feature);
  return row == nullptr ? 0.0 : row[output];
}

double& HashedLinearModel::MutableWeight(uint32_t feature, int output) {
  return Row(feature)[output];
}

std::vector<uint32_t> HashedLinearModel::StoredFeatures() const {
  std::vector<uint32_t> out;
  out.reserve(row_offset_.size());
  for (const auto& [feature, offset] : row_offset_) out.push_back(feature);
  std::sort(out.begin(), out.end());
  return out;
}

double HashedLinearModel::SquaredWeightNorm() const {
  double total = 0;
  for (const double w : rows_) total += w * w;
  return total;
}

std::vector<double> HashedLinearModel::Logits(const FeatureVector& x) const {
  std::vector<double> z = bias_;
  for (const auto& [feature, value] : x.entries) {
    const double* row = Row(feature);
    if (row == nullptr) continue;
    for (int c = 0; c < num_outputs_; ++c) z[c] += row[c] * value;
  }
  return z;
}

std::vector<double> HashedLinearModel::Scores(std::string_view text) const {
  std::vector<double> z = Logits(Featurize(text, dim_));
  for (double& v : z) v = ClampedSigmoid(v);
  return z;
}

bool operator==(const HashedLinearModel& a, const HashedLinearModel& b) {
  if (a.dim_ != b.dim_ || a.num_outputs_ != b.num_outputs_ ||
      a.fingerprint_ != b.fingerprint_ || a.bias_ != b.bias_ ||
      a.loss_trace != b.loss_trace ||
      a.config.ToJson() != b.config.ToJson()) {
    return false;
  }
  const std::vector<uint32_t> features = a.StoredFeatures();
  if (features != b.StoredFeatures()) return false;
  for (const uint32_t f : features) {
    if (std::memcmp(a.Row(f), b.Row(f), sizeof(double) * a.num_outputs_) != 0) {
      return false;
    }
  }
  return true;
}

namespace {

template <typename T>
void WritePod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void WriteString(std::ofstream& out, const std::string& s) {
  WritePod(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void WriteDoubles(std::ofstream& out, const double* data, size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
}

template <typename T>
bool ReadPod(std::ifstream& in, T& value) {
  return static_cast<bool>(
      in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

bool ReadString(std::ifstream& in, std::string& s) {
  uint32_t size = 0;
  if (!ReadPod(in, size) || size > (1u << 26)) return false;
  s.resize(size);
  return static_cast<bool>(in.read(s.data(), size));
}

bool ReadDoubles(std::ifstream& in, double* data, size_t count) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(data),
                                   static_cast<std::streamsize>(
                                       count * sizeof(double))));
}

}  // namespace

absl::Status HashedLinearModel::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path));
  out.write(kModelMagic, sizeof(kModelMagic));
  WritePod(out, kModelVersion);
  WritePod(out, dim_);
  WritePod(out, static_cast<uint32_t>(num_outputs_));
  WriteString(out, fingerprint_);
  WriteString(out, config.ToJson().dump());
  WritePod(out, static_cast<uint32_t>(loss_trace.size()));
  WriteDoubles(out, loss_trace.data(), loss_trace.size());
  WriteDoubles(out, bias_.data(), bias_.size());
  const std::vector<uint32_t> features = StoredFeatures();
  WritePod(out, static_cast<uint64_t>(features.size()));
  for (const uint32_t f : features) {
    WritePod(out, f);
    WriteDoubles(out, Row(f), num_outputs_);
  }
  return out.good() ? absl::OkStatus()
                    : absl::InternalError(absl::StrCat("write failed: ", path));
}

absl::StatusOr<HashedLinearModel> HashedLinearModel::Load(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  const auto corrupt = [&](std::string_view what) {
    return absl::DataLossError(absl::StrCat(path, ": ", std::string(what)));
  };
  char magic[4];
  uint32_t version = 0, dim = 0, outputs = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0) {
    return corrupt("not a model file");
  }
  if (!ReadPod(in, version) || version != kModelVersion) {
    return corrupt("unsupported model version");
  }
  std::string fingerprint, config_json;
  if (!ReadPod(in, dim) || !ReadPod(in, outputs) ||
      !ReadString(in, fingerprint) || !ReadString(in, config_json)) {
    return corrupt("truncated header");
  }
  HashedLinearModel model(dim, static_cast<int>(outputs), fingerprint);
  nlohmann::json config = nlohmann::json::parse(config_json, nullptr, false);
  if (config.is_discarded()) return corrupt("bad config");
  ASSIGN_OR_RETURN(model.config, TrainConfig::FromJson(config));
  uint32_t trace_size = 0;
  if (!ReadPod(in, trace_size) || trace_size > (1u << 24)) {
    return corrupt("bad loss trace");
  }
  model.loss_trace.resize(trace_size);
  if (!ReadDoubles(in, model.loss_trace.data(), trace_size) ||
      !ReadDoubles(in, model.bias_.data(), outputs)) {
    return corrupt("truncated body");
  }
  uint64_t rows = 0;
  if (!ReadPod(in, rows)) return corrupt("truncated body");
  for (uint64_t r = 0; r < rows; ++r) {
    uint32_t feature = 0;
    if (!ReadPod(in, feature) || feature >= dim) return corrupt("bad row");
    if (!ReadDoubles(in, model.Row(feature), outputs)) {
      return corrupt("truncated row");
    }
  }
  return model;
}

double SampleLoss(const HashedLinearModel& model, const TrainingSample& sample,
                  double l2) {
  const std::vector<double> z = model.Logits(sample.features);
  double loss = 0;
  for (size_t c = 0; c < z.size(); ++c) {
    loss += Softplus(z[c]) - sample.targets[c] * z[c];
  }
  return loss + 0.5 * l2 * model.SquaredWeightNorm();
}

Gradient DataGradient(const HashedLinearModel& model,
                      const TrainingSample& sample) {
  const std::vector<double> z = model.Logits(sample.features);
  Gradient g;
  g.bias.resize(z.size());
  for (size_t c = 0; c < z.size(); ++c) {
    g.bias[c] = Sigmoid(z[c]) - sample.targets[c];
  }
  g.feature_rows.reserve(sample.features.entries.size());
  for (const auto& [feature, value] : sample.features.entries) {
    std::vector<double> row(z.size());
    for (size_t c = 0; c < z.size(); ++c) row[c] = g.bias[c] * value;
    g.feature_rows.push_back(std::move(row));
  }
  return g;
}

double MeanLoss(const HashedLinearModel& model,
                const std::vector<TrainingSample>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0;
  for (const TrainingSample& s : samples) total += SampleLoss(model, s, 0.0);
  return total / samples.size();
}

absl::StatusOr<std::vector<TrainingSample>> MakeSamples(
    const LabelMatrix& matrix, const std::vector<Instance>& instances,
    uint32_t dim) {
  if (static_cast<size_t>(matrix.rows()) != instances.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("matrix has ", matrix.rows(), " rows but ",
                     instances.size(), " instances were given"));
  }
  std::vector<TrainingSample> samples;
  samples.reserve(instances.size());
  for (int r = 0; r < matrix.rows(); ++r) {
    if (matrix.instance_ids[r] != instances[r].id) {
      return absl::InvalidArgumentError(
          absl::StrCat("row ", r, " is instance \"", matrix.instance_ids[r],
                       "\" but instance \"", instances[r].id, "\" was given"));
    }
    TrainingSample sample;
    sample.features = Featurize(instances[r].text, dim);
    sample.targets.resize(matrix.num_compositions);
    for (int c = 0; c < matrix.num_compositions; ++c) {
      sample.targets[c] = matrix.Correct(r, c) ? 1.0 : 0.0;
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

absl::StatusOr<HashedLinearModel> Train(const LabelMatrix& matrix,
                                        const std::vector<Instance>& instances,
                                        const CompositionSpace& space,
                                        const TrainConfig& config) {
  if (matrix.num_compositions != static_cast<int>(space.Count())) {
    return absl::InvalidArgumentError(
        absl::StrCat("matrix has ", matrix.num_compositions,
                     " columns, space has ", space.Count(), " compositions"));
  }
  ASSIGN_OR_RETURN(const std::vector<TrainingSample> samples,
                   MakeSamples(matrix, instances, config.dim));
  HashedLinearModel model(config.dim, matrix.num_compositions,
                          space.Fingerprint());
  model.config = config;
  model.loss_trace.push_back(MeanLoss(model, samples));

  const int outputs = matrix.num_compositions;
  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  absl::flat_hash_map<uint32_t, size_t> slot_of;
  std::vector<uint32_t> touched;
  std::vector<double> row_grad;
  std::vector<double> bias_grad(outputs);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      slot_of.clear();
      touched.clear();
      row_grad.clear();
      std::fill(bias_grad.begin(), bias_grad.end(), 0.0);
      for (size_t k = start; k < end; ++k) {
        const TrainingSample& sample = samples[order[k]];
        const Gradient g = DataGradient(model, sample);
        for (int c = 0; c < outputs; ++c) bias_grad[c] += g.bias[c];
        for (size_t e = 0; e < sample.features.entries.size(); ++e) {
          const uint32_t feature = sample.features.entries[e].first;
          auto [it, inserted] = slot_of.try_emplace(feature, touched.size());
          if (inserted) {
            touched.push_back(feature);
            row_grad.resize(row_grad.size() + outputs, 0.0);
          }
          double* dst = row_grad.data() + it->second * outputs;
          for (int c = 0; c < outputs; ++c) dst[c] += g.feature_rows[e][c];
        }
      }
      const double scale = config.learning_rate / static_cast<double>(end - start);
      for (size_t t = 0; t < touched.size(); ++t) {
        const double* grad = row_grad.data() + t * outputs;
        for (int c = 0; c < outputs; ++c) {
          double& w = model.MutableWeight(touched[t], c);
          // L2 decay is applied lazily, to rows touched by the batch.
          w -= scale * grad[c] + config.learning_rate * config.l2 * w;
        }
      }
      std::vector<double>& bias = model.mutable_bias();
      for (int c = 0; c < outputs; ++c) bias[c] -= scale * bias_grad[c];
    }
    model.loss_trace.push_back(MeanLoss(model, samples));
  }
  return model;
}

CompositionId ArgmaxLowestId(const std::vector<double>& scores) {
  size_t best = 0;
  for (size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return CompositionId{best};
}

absl::StatusOr<std::vector<double>> PredictScores(
    const CompositionPredictor& model, const CompositionSpace& space,
    std::string_view text) {
  if (model.space_fingerprint() != space.Fingerprint()) {
    return absl::FailedPreconditionError(
        "model was trained for a different composition space");
  }
  if (model.num_outputs() != static_cast<int>(space.Count())) {
    return absl::FailedPreconditionError("model output size differs from |C|");
  }
  return model.Scores(text);
}

absl::StatusOr<CompositionId> SelectComposition(
    const CompositionPredictor& model, const CompositionSpace& space,
    std::string_view text) {
  ASSIGN_OR_RETURN(const std::vector<double> scores,
                   PredictScores(model, space, text));
  return ArgmaxLowestId(scores);
}

double GradientCheck(const HashedLinearModel& model,
                     const TrainingSample& sample,
                     const GradientCheckOptions& options,
                     const GradientFn& gradient) {
  const Gradient analytic = gradient(model, sample);
  const int outputs = model.num_outputs();
  const size_t features = sample.features.entries.size();
  // Probe space: every (feature, output) weight of the sample plus biases.
  const uint64_t candidates = (features + 1) * static_cast<uint64_t>(outputs);
  std::mt19937_64 rng(options.seed);
  HashedLinearModel probe = model;
  double max_error = 0;
  for (int p = 0; p < options.probes; ++p) {
    const uint64_t pick = rng() % candidates;
    const size_t slot = pick / outputs;
    const int c = static_cast<int>(pick % outputs);
    double* param;
    double analytic_value;
    if (slot == features) {
      param = &probe.mutable_bias()[c];
      analytic_value = analytic.bias[c];
    } else {
      const uint32_t feature = sample.features.entries[slot].first;
      param = &probe.MutableWeight(feature, c);
      analytic_value =
          analytic.feature_rows[slot][c] + options.l2 * model.Weight(feature, c);
    }
    const double original = *param;
    *param = original + options.step;
    const double plus = SampleLoss(probe, sample, options.l2);
    *param = original - options.step;
    const double minus = SampleLoss(probe, sample, options.l2);
    *param = original;
    const double numeric = (plus - minus) / (2 * options.step);
    const double error =
        std::abs(analytic_value - numeric) / std::max(std::abs(numeric), 1e-7);
    max_error = std::max(max_error, error);
  }
  return max_error;
}

}  // namespace promptcomp
