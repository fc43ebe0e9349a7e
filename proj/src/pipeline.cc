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

#include "promptcomp/pipeline.h"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_replace.h"
#include "promptcomp/csv.h"
#include "promptcomp/hashing.h"
#include "promptcomp/metrics.h"
#include "promptcomp/status_macros.h"

namespace promptcomp {
namespace {

namespace fs = std::filesystem;

absl::Status EnsureParent(const std::string& path) {
  std::error_code ec;
  fs::create_directories(fs::path(path).parent_path(), ec);
  if (ec) {
    return absl::InternalError(
        absl::StrCat("cannot create directory for ", path, ": ", ec.message()));
  }
  return absl::OkStatus();
}

std::vector<int> TrainLabels(const std::vector<Instance>& corpus) {
  std::vector<int> labels;
  for (const Instance& instance : corpus) {
    if (instance.split == Split::kTrain) labels.push_back(instance.label);
  }
  return labels;
}

}  // namespace

std::string FixingTag(const CompositionSpace& space, const std::vector<int>& fixing) {
  return absl::StrReplaceAll(DescribeFixing(space, fixing), {{"=", "-"}, {",", "_"}});
}

std::string UtcNow() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

Pipeline::Pipeline(RunConfig config, std::unique_ptr<CompletionBackend> backend,
                   SleepFn sleep)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      gateway_(config_.gateway, backend_.get(), std::move(sleep)) {}

absl::StatusOr<std::unique_ptr<Pipeline>> Pipeline::Create(
    RunConfig config, std::unique_ptr<CompletionBackend> backend, SleepFn sleep) {
  if (!config.space) return absl::InvalidArgumentError("config has no space");
  if (backend == nullptr) {
    ASSIGN_OR_RETURN(backend, MakeBackend(config.gateway));
  }
  std::vector<Instance> corpus;
  for (const std::string& path : config.corpus_paths) {
    ASSIGN_OR_RETURN(std::vector<Instance> part, LoadCorpus(path));
    corpus.insert(corpus.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
  }
  ASSIGN_OR_RETURN(TemplateSet templates,
                   LoadTemplateManifest(config.templates_manifest));
  std::unique_ptr<Pipeline> pipeline(
      new Pipeline(std::move(config), std::move(backend), std::move(sleep)));
  pipeline->corpus_ = std::move(corpus);
  pipeline->templates_ = std::move(templates);
  const std::string cache_path = pipeline->Path("cache.jsonl");
  RETURN_IF_ERROR(EnsureParent(cache_path));
  ASSIGN_OR_RETURN(PredictionCache cache, PredictionCache::Open(cache_path));
  pipeline->cache_ = std::make_unique<PredictionCache>(std::move(cache));
  return pipeline;
}

std::string Pipeline::Path(const std::string& relative) const {
  return (fs::path(config_.output_dir) / relative).string();
}

absl::Status Pipeline::WriteText(const std::string& relative,
                                 const std::string& text,
                                 StepOutput& output) const {
  const std::string path = Path(relative);
  RETURN_IF_ERROR(EnsureParent(path));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path));
  output.artifacts.push_back(relative);
  return absl::OkStatus();
}

absl::StatusOr<CollectSummary> Pipeline::Collect(const std::vector<Split>& splits) {
  CollectSummary summary;
  summary.output.artifacts.push_back("cache.jsonl");
  const std::vector<Instance> train = FilterSplit(corpus_, Split::kTrain);
  for (const Split split : splits) {
    CollectJob job;
    job.space = &space();
    job.instances = FilterSplit(corpus_, split);
    job.demo_pool = train;
    job.templates = templates_;
    job.demonstrations = config_.demonstrations;
    job.seed = config_.collection_seed;
    ASSIGN_OR_RETURN(CollectResult result, promptcomp::Collect(job, gateway_, *cache_));
    summary.records += static_cast<int64_t>(result.records.size());
    summary.upstream_calls += result.upstream_calls;
    summary.cache_hits += result.cache_hits;
    summary.null_count += result.null_count;
    const std::string name(SplitName(split));
    summary.output.summary["splits"][name] = {
        {"records", result.records.size()},
        {"upstream_calls", result.upstream_calls},
        {"cache_hits", result.cache_hits},
        {"null", result.null_count},
        {"errors", result.errors}};

    ASSIGN_OR_RETURN(
        const LabelMatrix matrix,
        BuildLabelMatrix(result.records, corpus_, split, config_.gateway.model_id,
                         config_.collection_seed, static_cast<int>(space().Count())));
    const std::string prefix = absl::StrCat("matrices/", name);
    RETURN_IF_ERROR(EnsureParent(Path(prefix)));
    RETURN_IF_ERROR(WriteLabelMatrixCsv(matrix, Path(prefix)));
    summary.output.artifacts.push_back(prefix + ".pred.csv");
    summary.output.artifacts.push_back(prefix + ".correct.csv");
  }
  summary.output.summary["records"] = summary.records;
  summary.output.summary["upstream_calls"] = summary.upstream_calls;
  summary.output.summary["cache_hits"] = summary.cache_hits;
  summary.output.summary["null"] = summary.null_count;
  return summary;
}

absl::StatusOr<LabelMatrix> Pipeline::Matrix(Split split) const {
  return BuildLabelMatrix(cache_->Records(), corpus_, split,
                          config_.gateway.model_id, config_.collection_seed,
                          static_cast<int>(space().Count()));
}

std::vector<std::vector<int>> Pipeline::Fixings(
    const std::optional<std::vector<int>>& fixing) const {
  if (fixing) return {*fixing};
  return AllVariantFixings(space());
}

absl::StatusOr<StepOutput> Pipeline::Game(
    const std::optional<std::vector<int>>& fixing) {
  StepOutput output;
  ASSIGN_OR_RETURN(const Split split, ParseSplit(config_.game_split));
  ASSIGN_OR_RETURN(const LabelMatrix matrix, Matrix(split));
  ASSIGN_OR_RETURN(const Metric metric, MetricByName(config_.metric));
  for (const std::vector<int>& f : Fixings(fixing)) {
    ASSIGN_OR_RETURN(const CompositionGame game,
                     BuildGame(matrix, space(), f, metric, config_.metric));
    const std::string relative =
        absl::StrCat("games/", FixingTag(space(), f), ".csv");
    RETURN_IF_ERROR(EnsureParent(Path(relative)));
    RETURN_IF_ERROR(WriteGameCsv(game, Path(relative)));
    output.artifacts.push_back(relative);
    output.summary[DescribeFixing(space(), f)] = {{"empty", game.EmptyValue()},
                                                  {"full", game.FullValue()}};
  }
  return output;
}

absl::StatusOr<StepOutput> Pipeline::Shapley(
    const std::optional<std::vector<int>>& fixing) {
  StepOutput output;
  ASSIGN_OR_RETURN(const Split split, ParseSplit(config_.game_split));
  ASSIGN_OR_RETURN(const LabelMatrix matrix, Matrix(split));
  ASSIGN_OR_RETURN(const Metric metric, MetricByName(config_.metric));
  for (const std::vector<int>& f : Fixings(fixing)) {
    ASSIGN_OR_RETURN(const CompositionGame game,
                     BuildGame(matrix, space(), f, metric, config_.metric));
    ASSIGN_OR_RETURN(const ShapleyReport report, TwoSii(game));
    const std::string stem = absl::StrCat("shapley/", FixingTag(space(), f));
    nlohmann::json json = ReportToJson(report);
    json["fixing"] = DescribeFixing(space(), f);
    const nlohmann::json force = ForcePlotData(report);
    const nlohmann::json network = NetworkPlotData(report);
    RETURN_IF_ERROR(WriteText(stem + ".json", json.dump(2) + "\n", output));
    RETURN_IF_ERROR(WriteText(stem + ".force.json", force.dump(2) + "\n", output));
    RETURN_IF_ERROR(
        WriteText(stem + ".network.json", network.dump(2) + "\n", output));
    RETURN_IF_ERROR(WriteText(stem + ".force.svg", ForcePlotSvg(force), output));
    RETURN_IF_ERROR(
        WriteText(stem + ".network.svg", NetworkPlotSvg(network), output));
    output.summary[DescribeFixing(space(), f)] = json["sv"];
  }
  return output;
}

absl::StatusOr<StepOutput> Pipeline::Select(
    const std::optional<std::vector<int>>& fixing) {
  StepOutput output;
  ASSIGN_OR_RETURN(const Split split, ParseSplit(config_.game_split));
  ASSIGN_OR_RETURN(const LabelMatrix matrix, Matrix(split));
  ASSIGN_OR_RETURN(const Metric metric, MetricByName(config_.metric));
  for (const std::vector<int>& f : Fixings(fixing)) {
    ASSIGN_OR_RETURN(const CompositionGame game,
                     BuildGame(matrix, space(), f, metric, config_.metric));
    ASSIGN_OR_RETURN(const ShapleyReport report, TwoSii(game));
    nlohmann::json json = {{"fixing", DescribeFixing(space(), f)}};
    for (const auto& [mode, name] :
         {std::pair{ReconstructionMode::kSv, "sv"},
          std::pair{ReconstructionMode::kSi, "si"}}) {
      const Selection selection = ReconstructAndSelect(report, mode);
      ASSIGN_OR_RETURN(const Composition composition,
                       space().FromCoalition(selection.best, f));
      ASSIGN_OR_RETURN(const CompositionId id, space().Encode(composition));
      json[name] = {{"coalition", selection.best.bits()},
                    {"composition_id", id.value},
                    {"composition", space().Describe(composition)},
                    {"predicted", selection.predicted[selection.best.bits()]},
                    {"actual", game.Value(selection.best)}};
    }
    const std::string relative =
        absl::StrCat("selections/", FixingTag(space(), f), ".json");
    RETURN_IF_ERROR(WriteText(relative, json.dump(2) + "\n", output));
    output.summary[DescribeFixing(space(), f)] = {
        {"sv", json["sv"]["composition"]}, {"si", json["si"]["composition"]}};
  }
  return output;
}

absl::StatusOr<StepOutput> Pipeline::Train(const std::vector<uint64_t>& seeds) {
  StepOutput output;
  ASSIGN_OR_RETURN(const LabelMatrix matrix, Matrix(Split::kTrain));
  const std::vector<Instance> instances = FilterSplit(corpus_, Split::kTrain);
  for (const uint64_t seed : seeds.empty() ? config_.seeds : seeds) {
    TrainConfig train = config_.train;
    train.seed = seed;
    ASSIGN_OR_RETURN(const HashedLinearModel model,
                     promptcomp::Train(matrix, instances, space(), train));
    const std::string relative = absl::StrCat("models/seed-", seed, ".pclm");
    RETURN_IF_ERROR(EnsureParent(Path(relative)));
    RETURN_IF_ERROR(model.Save(Path(relative)));
    output.artifacts.push_back(relative);
    output.summary[absl::StrCat(seed)] = {
        {"initial_loss", model.loss_trace.front()},
        {"final_loss", model.loss_trace.back()}};
  }
  return output;
}

absl::StatusOr<HashedLinearModel> Pipeline::ModelForSeed(uint64_t seed) {
  const std::string path = Path(absl::StrCat("models/seed-", seed, ".pclm"));
  if (!fs::exists(path)) {
    RETURN_IF_ERROR(Train({seed}).status());
  }
  return HashedLinearModel::Load(path);
}

absl::StatusOr<StepOutput> Pipeline::Predict(uint64_t seed, Split split) {
  StepOutput output;
  ASSIGN_OR_RETURN(const HashedLinearModel model, ModelForSeed(seed));
  ASSIGN_OR_RETURN(const std::vector<Composition> compositions, space().Enumerate());
  std::string csv = "instance_id,composition_id,composition,score\n";
  int64_t count = 0;
  for (const Instance& instance : FilterSplit(corpus_, split)) {
    ASSIGN_OR_RETURN(const std::vector<double> scores,
                     PredictScores(model, space(), instance.text));
    const CompositionId id = ArgmaxLowestId(scores);
    absl::StrAppendFormat(&csv, "%s,%d,%s,%.17g\n", csv::Escape(instance.id),
                          id.value, space().Describe(compositions[id.value]),
                          scores[id.value]);
    ++count;
  }
  const std::string relative =
      absl::StrCat("predictions/seed-", seed, ".", std::string(SplitName(split)), ".csv");
  RETURN_IF_ERROR(WriteText(relative, csv, output));
  output.summary = {{"seed", seed}, {"instances", count}};
  return output;
}

absl::StatusOr<ShapleySelectionRow> Pipeline::BestShapleyRow(
    ReconstructionMode mode, const LabelMatrix& game_matrix,
    const std::vector<double>& eval_f1) {
  ASSIGN_OR_RETURN(const Metric metric, MetricByName(config_.metric));
  std::optional<ShapleySelectionRow> best;
  double best_predicted = 0;
  for (const std::vector<int>& f : AllVariantFixings(space())) {
    ASSIGN_OR_RETURN(const CompositionGame game,
                     BuildGame(game_matrix, space(), f, metric, config_.metric));
    ASSIGN_OR_RETURN(const ShapleyReport report, TwoSii(game));
    const Selection selection = ReconstructAndSelect(report, mode);
    const double predicted = selection.predicted[selection.best.bits()];
    if (best && !(predicted > best_predicted)) continue;
    ASSIGN_OR_RETURN(const Composition composition,
                     space().FromCoalition(selection.best, f));
    ASSIGN_OR_RETURN(const CompositionId id, space().Encode(composition));
    best = ShapleySelectionRow{
        mode == ReconstructionMode::kSv ? "Best by Shapley values"
                                        : "Best by Shapley interaction",
        DescribeFixing(space(), f), id, space().Describe(composition),
        eval_f1[id.value]};
    best_predicted = predicted;
  }
  return *best;
}

absl::StatusOr<EvalReport> Pipeline::BuildReport() {
  ASSIGN_OR_RETURN(const Split eval_split, ParseSplit(config_.eval_split));
  ASSIGN_OR_RETURN(const LabelMatrix eval, Matrix(eval_split));
  ASSIGN_OR_RETURN(const LabelMatrix validation, Matrix(Split::kValidation));
  const std::vector<Instance> eval_instances = FilterSplit(corpus_, eval_split);

  std::vector<SeedOutcome> outcomes;
  for (const uint64_t seed : config_.seeds) {
    ASSIGN_OR_RETURN(const HashedLinearModel model, ModelForSeed(seed));
    SeedOutcome outcome;
    outcome.seed = seed;
    for (const Instance& instance : eval_instances) {
      ASSIGN_OR_RETURN(const CompositionId id,
                       SelectComposition(model, space(), instance.text));
      outcome.selections.push_back(id);
    }
    ASSIGN_OR_RETURN(const std::vector<int> predicted,
                     SelectedPredictions(eval, outcome.selections));
    ASSIGN_OR_RETURN(outcome.macro_f1, MacroF1(eval.truth, predicted));
    ASSIGN_OR_RETURN(outcome.correct_ratio, CorrectRatio(outcome.selections, eval));
    outcomes.push_back(std::move(outcome));
  }

  BaselineOptions options;
  options.random_seeds = config_.random_seeds;
  options.random_uses_prior = config_.random_uses_prior;
  options.ensemble_tie_label = config_.ensemble_tie_label;
  options.welch = config_.welch;
  ASSIGN_OR_RETURN(EvalReport report,
                   promptcomp::Evaluate(space(), eval, &validation,
                                        TrainLabels(corpus_), outcomes, options));
  report.split = config_.eval_split;

  ASSIGN_OR_RETURN(const Split game_split, ParseSplit(config_.game_split));
  ASSIGN_OR_RETURN(const LabelMatrix game_matrix, Matrix(game_split));
  for (const ReconstructionMode mode :
       {ReconstructionMode::kSv, ReconstructionMode::kSi}) {
    ASSIGN_OR_RETURN(ShapleySelectionRow row,
                     BestShapleyRow(mode, game_matrix, report.composition_f1));
    report.shapley_rows.push_back(std::move(row));
  }
  return report;
}

absl::StatusOr<StepOutput> Pipeline::Evaluate() {
  StepOutput output;
  ASSIGN_OR_RETURN(const EvalReport report, BuildReport());
  const nlohmann::json json = EvalReportToJson(report);
  RETURN_IF_ERROR(WriteText("evaluation.json", json.dump(2) + "\n", output));
  output.summary = {{"adaptive_mean", report.adaptive_mean},
                    {"best_on_test", report.baselines.best_on_test},
                    {"oracle", report.baselines.oracle}};
  return output;
}

absl::StatusOr<StepOutput> Pipeline::Report() {
  StepOutput output;
  ASSIGN_OR_RETURN(const EvalReport report, BuildReport());
  nlohmann::json json = EvalReportToJson(report);
  json["space"] = space().ToJson();
  json["model_id"] = config_.gateway.model_id;
  json["seeds"] = config_.seeds;
  RETURN_IF_ERROR(WriteText("report.json", json.dump(2) + "\n", output));
  RETURN_IF_ERROR(
      WriteText("report.md", EvalReportMarkdown(report, space()), output));
  output.summary = {{"adaptive_mean", report.adaptive_mean},
                    {"adaptive_stdev", report.adaptive_stdev},
                    {"best_on_test", report.baselines.best_on_test},
                    {"oracle", report.baselines.oracle}};
  return output;
}

absl::Status Pipeline::WriteManifest(const std::string& command,
                                     const StepOutput& output,
                                     const std::string& started_at) const {
  nlohmann::json corpus = nlohmann::json::array();
  for (const std::string& path : config_.corpus_paths) {
    ASSIGN_OR_RETURN(const std::string hash, Sha256OfFile(path));
    corpus.push_back({{"path", path}, {"sha256", hash}});
  }
  nlohmann::json artifacts = nlohmann::json::array();
  for (const std::string& relative : output.artifacts) {
    ASSIGN_OR_RETURN(const std::string hash, Sha256OfFile(Path(relative)));
    artifacts.push_back({{"path", relative}, {"sha256", hash}});
  }
  const nlohmann::json manifest = {
      {"command", command},
      {"config_hash", Sha256Hex(config_.normalized.dump())},
      {"corpus", corpus},
      {"space_fingerprint", space().Fingerprint()},
      {"model_id", config_.gateway.model_id},
      {"collection_seed", config_.collection_seed},
      {"seeds", config_.seeds},
      {"started_at", started_at},
      {"finished_at", UtcNow()},
      {"artifacts", artifacts},
      {"summary", output.summary},
  };
  const std::string path = Path(absl::StrCat("manifests/", command, ".json"));
  RETURN_IF_ERROR(EnsureParent(path));
  std::ofstream out(path, std::ios::trunc);
  out << manifest.dump(2) << "\n";
  out.close();
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path));
  return absl::OkStatus();
}

}  // namespace promptcomp
