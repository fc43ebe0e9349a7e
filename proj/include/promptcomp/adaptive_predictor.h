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

#ifndef PROMPTCOMP_ADAPTIVE_PREDICTOR_H_
#define PROMPTCOMP_ADAPTIVE_PREDICTOR_H_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/statusor.h"
#include "json.hpp"
#include "promptcomp/composition_space.h"
#include "promptcomp/corpus_store.h"

namespace promptcomp {

inline constexpr uint32_t kDefaultFeatureDim = 1u << 18;

// Sparse, sorted by index, L2-normalized (empty for empty text).
struct FeatureVector {
  std::vector<std::pair<uint32_t, double>> entries;
};

// Hashed word unigrams plus character 3-5 grams of each word (with boundary
// markers), counted, then L2-normalized.
FeatureVector Featurize(std::string_view text, uint32_t dim = kDefaultFeatureDim);

double Dot(const FeatureVector& a, const FeatureVector& b);

struct TrainConfig {
  double learning_rate = 0.5;
  int epochs = 20;
  int batch_size = 16;
  uint64_t seed = 1;
  double l2 = 1e-6;
  uint32_t dim = kDefaultFeatureDim;

  nlohmann::json ToJson() const;
  static absl::StatusOr<TrainConfig> FromJson(const nlohmann::json& json);
};

// Scores every composition of a space for a text.
class CompositionPredictor {
 public:
  virtual ~CompositionPredictor() = default;
  virtual int num_outputs() const = 0;
  virtual const std::string& space_fingerprint() const = 0;
  // Independent per-composition likelihoods in (0, 1).
  virtual std::vector<double> Scores(std::string_view text) const = 0;
};

// Linear multi-label model over hashed features: sigmoid(W x + b). Weight
// rows are stored only for features seen during training; the rest are 0.
class HashedLinearModel : public CompositionPredictor {
 public:
  HashedLinearModel(uint32_t dim, int num_outputs, std::string fingerprint);

  int num_outputs() const override { return num_outputs_; }
  uint32_t dim() const { return dim_; }
  const std::string& space_fingerprint() const override { return fingerprint_; }
  std::vector<double> Scores(std::string_view text) const override;

  std::vector<double> Logits(const FeatureVector& x) const;

  double Weight(uint32_t feature, int output) const;
  // Mutable access to a weight, materializing its row.
  double& MutableWeight(uint32_t feature, int output);
  const std::vector<double>& bias() const { return bias_; }
  std::vector<double>& mutable_bias() { return bias_; }
  // Feature indices with a stored row, ascending.
  std::vector<uint32_t> StoredFeatures() const;
  double SquaredWeightNorm() const;

  TrainConfig config;
  // Mean training loss before the first epoch and after each epoch.
  std::vector<double> loss_trace;

  absl::Status Save(const std::string& path) const;
  static absl::StatusOr<HashedLinearModel> Load(const std::string& path);

  friend bool operator==(const HashedLinearModel& a, const HashedLinearModel& b);

 private:
  double* Row(uint32_t feature);
  const double* Row(uint32_t feature) const;

  uint32_t dim_;
  int num_outputs_;
  std::string fingerprint_;
  std::vector<double> bias_;
  absl::flat_hash_map<uint32_t, size_t> row_offset_;
  std::vector<double> rows_;
};

struct TrainingSample {
  FeatureVector features;
  std::vector<double> targets;  // one per composition, in {0, 1}
};

// Summed over outputs: softplus(z) - t z, plus l2/2 * ||W||^2 (bias excluded).
double SampleLoss(const HashedLinearModel& model, const TrainingSample& sample,
                  double l2);

struct Gradient {
  // Rows for the sample's features, aligned with sample.features.entries.
  std::vector<std::vector<double>> feature_rows;
  std::vector<double> bias;
};

// Analytic gradient of SampleLoss without the L2 term:
// (sigmoid(z) - t) x for weights, sigmoid(z) - t for the bias.
Gradient DataGradient(const HashedLinearModel& model,
                      const TrainingSample& sample);

// Mean loss over samples (data term only).
double MeanLoss(const HashedLinearModel& model,
                const std::vector<TrainingSample>& samples);

// Multi-hot correctness rows of `matrix` paired with the features of the
// corresponding instances. Rows must match `instances` id for id.
absl::StatusOr<std::vector<TrainingSample>> MakeSamples(
    const LabelMatrix& matrix, const std::vector<Instance>& instances,
    uint32_t dim);

// Seeded minibatch gradient descent on the summed BCE. Initial weights are
// zero; the seed drives the shuffling.
absl::StatusOr<HashedLinearModel> Train(const LabelMatrix& matrix,
                                        const std::vector<Instance>& instances,
                                        const CompositionSpace& space,
                                        const TrainConfig& config);

absl::StatusOr<std::vector<double>> PredictScores(
    const CompositionPredictor& model, const CompositionSpace& space,
    std::string_view text);

// argmax of the scores, lowest id on ties.
absl::StatusOr<CompositionId> SelectComposition(
    const CompositionPredictor& model, const CompositionSpace& space,
    std::string_view text);

CompositionId ArgmaxLowestId(const std::vector<double>& scores);

using GradientFn = std::function<Gradient(const HashedLinearModel&,
                                          const TrainingSample&)>;

struct GradientCheckOptions {
  int probes = 128;
  double step = 1e-5;
  double l2 = 0.0;
  uint64_t seed = 7;
};

// Compares `gradient` (the analytic one by default) with central finite
// differences of SampleLoss at randomly probed weights of the sample's
// features and biases. Returns max |analytic - numeric| / max(|numeric|, 1e-7).
double GradientCheck(const HashedLinearModel& model,
                     const TrainingSample& sample,
                     const GradientCheckOptions& options = {},
                     const GradientFn& gradient = DataGradient);

}  // namespace promptcomp

#endif  // PROMPTCOMP_ADAPTIVE_PREDICTOR_H_
