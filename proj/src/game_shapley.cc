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

#include "promptcomp/game_shapley.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "promptcomp/csv.h"
#include "promptcomp/status_macros.h"

namespace promptcomp {

namespace {

absl::Status CheckGame(const CompositionGame& game) {
  if (game.n < 0 || game.n > kMaxPlayers) {
    return absl::InvalidArgumentError(absl::StrCat(
        "player count ", game.n, " outside [0, ", kMaxPlayers, "]"));
  }
  if (game.values.size() != (size_t{1} << game.n)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "game with ", game.n, " players needs ", size_t{1} << game.n,
        " values, has ", game.values.size()));
  }
  return absl::OkStatus();
}

// 1 / (m * C(m - 1, s)) for s = 0..m-1, i.e. s!(m-1-s)!/m!.
std::vector<double> SubsetWeights(int m) {
  std::vector<double> weights(std::max(m, 1), 0.0);
  if (m <= 0) return weights;
  double binom = 1.0;  // C(m - 1, s)
  for (int s = 0; s < m; ++s) {
    weights[s] = 1.0 / (m * binom);
    binom = binom * (m - 1 - s) / (s + 1);
  }
  return weights;
}

std::string Sign(double value) { return value < 0 ? "-" : "+"; }

}  // namespace

absl::StatusOr<CompositionGame> GameFromValues(std::vector<double> values) {
  if (values.empty() || !std::has_single_bit(values.size())) {
    return absl::InvalidArgumentError(
        "game value count must be a power of two");
  }
  CompositionGame game;
  game.n = std::countr_zero(values.size());
  game.values = std::move(values);
  game.variant_fixing.assign(game.n, -1);
  for (int i = 0; i < game.n; ++i) {
    game.player_names.push_back(absl::StrCat("player", i));
  }
  RETURN_IF_ERROR(CheckGame(game));
  return game;
}

absl::StatusOr<std::vector<int>> ParseVariantFixing(
    const CompositionSpace& space,
    const std::vector<std::string>& assignments) {
  std::vector<int> fixing(space.size(), -1);
  for (const std::string& assignment : assignments) {
    std::vector<std::string> parts = absl::StrSplit(assignment, '=');
    if (parts.size() != 2) {
      return absl::InvalidArgumentError(absl::StrCat(
          "variant fixing \"", assignment, "\" is not technique=variant"));
    }
    const std::optional<int> index = space.IndexOf(parts[0]);
    if (!index) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown technique \"", parts[0], "\""));
    }
    const Technique& t = space.technique(*index);
    auto it = std::find(t.variants.begin(), t.variants.end(), parts[1]);
    if (it == t.variants.end()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "technique \"", t.name, "\" has no variant \"", parts[1], "\""));
    }
    if (fixing[*index] != -1) {
      return absl::InvalidArgumentError(
          absl::StrCat("technique \"", t.name, "\" fixed twice"));
    }
    fixing[*index] = static_cast<int>(it - t.variants.begin());
  }
  for (const Technique& t : space.techniques()) {
    if (t.kind == TechniqueKind::kVariantGroup && fixing[t.id] == -1) {
      return absl::InvalidArgumentError(
          absl::StrCat("no variant fixed for technique \"", t.name, "\""));
    }
  }
  return fixing;
}

std::vector<std::vector<int>> AllVariantFixings(const CompositionSpace& space) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(space.size(), -1);
  std::vector<int> groups;
  for (const Technique& t : space.techniques()) {
    if (t.kind == TechniqueKind::kVariantGroup) {
      groups.push_back(t.id);
      current[t.id] = 0;
    }
  }
  while (true) {
    out.push_back(current);
    size_t g = 0;
    for (; g < groups.size(); ++g) {
      const int id = groups[g];
      if (++current[id] < static_cast<int>(space.technique(id).variants.size())) {
        break;
      }
      current[id] = 0;
    }
    if (g == groups.size()) break;
  }
  return out;
}

std::string DescribeFixing(const CompositionSpace& space,
                           const std::vector<int>& fixing) {
  std::vector<std::string> parts;
  for (const Technique& t : space.techniques()) {
    if (t.kind == TechniqueKind::kVariantGroup && fixing[t.id] >= 0) {
      parts.push_back(absl::StrCat(t.name, "=", t.variants[fixing[t.id]]));
    }
  }
  return parts.empty() ? "none" : absl::StrJoin(parts, ",");
}

absl::StatusOr<CompositionGame> BuildGame(const LabelMatrix& matrix,
                                          const CompositionSpace& space,
                                          const std::vector<int>& variant_fixing,
                                          const Metric& metric,
                                          const std::string& metric_name) {
  if (matrix.num_compositions != static_cast<int>(space.Count())) {
    return absl::InvalidArgumentError(
        absl::StrCat("matrix has ", matrix.num_compositions,
                     " columns, space has ", space.Count(), " compositions"));
  }
  CompositionGame game;
  game.n = space.size();
  game.variant_fixing = variant_fixing;
  game.variant_fixing.resize(space.size(), -1);
  game.metric_name = metric_name;
  for (const Technique& t : space.techniques()) {
    game.player_names.push_back(t.name);
    if (t.kind == TechniqueKind::kSingleton) game.variant_fixing[t.id] = -1;
  }
  const uint32_t num_coalitions = 1u << game.n;
  game.values.resize(num_coalitions);
  for (uint32_t bits = 0; bits < num_coalitions; ++bits) {
    ASSIGN_OR_RETURN(Composition composition,
                     space.FromCoalition(Coalition(bits), game.variant_fixing));
    ASSIGN_OR_RETURN(CompositionId id, space.Encode(composition));
    const std::vector<int> predicted = matrix.Column(static_cast<int>(id.value));
    ASSIGN_OR_RETURN(game.values[bits], metric(matrix.truth, predicted));
  }
  return game;
}

absl::StatusOr<std::vector<double>> ExactShapley(const CompositionGame& game) {
  RETURN_IF_ERROR(CheckGame(game));
  const int n = game.n;
  std::vector<double> phi(n, 0.0);
  if (n == 0) return phi;
  const std::vector<double> weight = SubsetWeights(n);
  const uint32_t num_coalitions = 1u << n;
  for (uint32_t s = 0; s < num_coalitions; ++s) {
    const double w = weight.size() > static_cast<size_t>(std::popcount(s))
                         ? weight[std::popcount(s)]
                         : 0.0;
    for (int i = 0; i < n; ++i) {
      if ((s >> i) & 1u) continue;
      phi[i] += w * (game.values[s | (1u << i)] - game.values[s]);
    }
  }
  return phi;
}

absl::StatusOr<std::vector<PairValue>> PairwiseSii(const CompositionGame& game) {
  RETURN_IF_ERROR(CheckGame(game));
  const int n = game.n;
  if (n < 2) {
    return absl::InvalidArgumentError(
        "pairwise interactions need at least two players");
  }
  // s!(n-s-2)!/(n-1)! for s = 0..n-2.
  const std::vector<double> weight = SubsetWeights(n - 1);
  std::vector<PairValue> out;
  const uint32_t num_coalitions = 1u << n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const uint32_t bi = 1u << i, bj = 1u << j;
      double total = 0.0;
      for (uint32_t s = 0; s < num_coalitions; ++s) {
        if (s & (bi | bj)) continue;
        const double derivative = game.values[s | bi | bj] -
                                  game.values[s | bi] - game.values[s | bj] +
                                  game.values[s];
        total += weight[std::popcount(s)] * derivative;
      }
      out.push_back({i, j, total});
    }
  }
  return out;
}

double ShapleyReport::PairValueOf(int i, int j) const {
  if (i > j) std::swap(i, j);
  for (const PairValue& p : sii_pairs) {
    if (p.i == i && p.j == j) return p.value;
  }
  return 0.0;
}

absl::StatusOr<ShapleyReport> TwoSii(const CompositionGame& game) {
  ShapleyReport report;
  ASSIGN_OR_RETURN(report.sv, ExactShapley(game));
  ASSIGN_OR_RETURN(report.sii_pairs, PairwiseSii(game));
  report.player_names = game.player_names;
  report.baseline = game.EmptyValue();
  report.full_value = game.FullValue();
  report.two_sii_order1 = report.sv;
  for (const PairValue& p : report.sii_pairs) {
    report.two_sii_order1[p.i] -= 0.5 * p.value;
    report.two_sii_order1[p.j] -= 0.5 * p.value;
  }
  return report;
}

Selection ReconstructAndSelect(const ShapleyReport& report,
                               ReconstructionMode mode) {
  const int n = static_cast<int>(report.sv.size());
  const uint32_t num_coalitions = 1u << n;
  Selection selection;
  selection.predicted.resize(num_coalitions);
  const std::vector<double>& singles =
      mode == ReconstructionMode::kSv ? report.sv : report.two_sii_order1;
  for (uint32_t s = 0; s < num_coalitions; ++s) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if ((s >> i) & 1u) sum += singles[i];
    }
    if (mode == ReconstructionMode::kSi) {
      for (const PairValue& p : report.sii_pairs) {
        if (((s >> p.i) & 1u) && ((s >> p.j) & 1u)) sum += p.value;
      }
    }
    selection.predicted[s] = report.baseline + sum;
  }

  std::vector<uint32_t> order(num_coalitions);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [](uint32_t a, uint32_t b) {
    return std::popcount(a) < std::popcount(b);
  });
  uint32_t best = order.front();
  for (const uint32_t s : order) {
    const double incumbent = selection.predicted[best];
    const double tolerance = 1e-12 * std::max(1.0, std::abs(incumbent));
    if (selection.predicted[s] > incumbent + tolerance) best = s;
  }
  selection.best = Coalition(best);
  return selection;
}

nlohmann::json ReportToJson(const ShapleyReport& report) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const PairValue& p : report.sii_pairs) {
    pairs.push_back({{"i", p.i},
                     {"j", p.j},
                     {"players", {report.player_names[p.i],
                                  report.player_names[p.j]}},
                     {"value", p.value}});
  }
  return {{"players", report.player_names},
          {"baseline", report.baseline},
          {"full_value", report.full_value},
          {"sv", report.sv},
          {"two_sii_order1", report.two_sii_order1},
          {"sii_pairs", pairs}};
}

nlohmann::json ForcePlotData(const ShapleyReport& report) {
  std::vector<int> order(report.sv.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(report.sv[a]) > std::abs(report.sv[b]);
  });
  nlohmann::json attributions = nlohmann::json::array();
  for (const int i : order) {
    attributions.push_back({{"player", i},
                            {"name", report.player_names[i]},
                            {"value", report.sv[i]},
                            {"sign", Sign(report.sv[i])}});
  }
  return {{"kind", "force"},
          {"baseline", report.baseline},
          {"full_value", report.full_value},
          {"attributions", attributions}};
}

nlohmann::json NetworkPlotData(const ShapleyReport& report) {
  const int n = static_cast<int>(report.two_sii_order1.size());
  nlohmann::json nodes = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / n - std::numbers::pi / 2;
    const double value = report.two_sii_order1[i];
    nodes.push_back({{"player", i},
                     {"name", report.player_names[i]},
                     {"value", value},
                     {"magnitude", std::abs(value)},
                     {"sign", Sign(value)},
                     {"x", std::cos(angle)},
                     {"y", std::sin(angle)}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const PairValue& p : report.sii_pairs) {
    edges.push_back({{"source", p.i},
                     {"target", p.j},
                     {"value", p.value},
                     {"magnitude", std::abs(p.value)},
                     {"sign", Sign(p.value)}});
  }
  return {{"kind", "network"},
          {"baseline", report.baseline},
          {"nodes", nodes},
          {"edges", edges}};
}

namespace {

constexpr const char* kPositiveColor = "#d62728";
constexpr const char* kNegativeColor = "#1f77b4";

const char* ColorOf(const nlohmann::json& item) {
  return item["sign"] == "-" ? kNegativeColor : kPositiveColor;
}

}  // namespace

std::string ForcePlotSvg(const nlohmann::json& force) {
  const double baseline = force["baseline"].get<double>();
  const double full = force["full_value"].get<double>();
  // Positive pushes stack up from the baseline, negatives then pull down.
  double lo = std::min(baseline, full), hi = std::max(baseline, full);
  double cursor = baseline;
  for (const auto& a : force["attributions"]) {
    if (a["value"].get<double>() >= 0) cursor += a["value"].get<double>();
  }
  hi = std::max(hi, cursor);
  for (const auto& a : force["attributions"]) {
    if (a["value"].get<double>() < 0) cursor += a["value"].get<double>();
  }
  lo = std::min(lo, cursor);
  if (hi - lo < 1e-12) hi = lo + 1.0;

  constexpr double kWidth = 720, kLeft = 40, kRight = 680, kBarY = 60,
                   kBarH = 24;
  auto x_of = [&](double v) {
    return kLeft + (v - lo) / (hi - lo) * (kRight - kLeft);
  };
  std::string svg = absl::StrFormat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"160\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n",
      static_cast<int>(kWidth));
  cursor = baseline;
  for (const bool positive : {true, false}) {
    for (const auto& a : force["attributions"]) {
      const double v = a["value"].get<double>();
      if ((v >= 0) != positive || v == 0) continue;
      const double x0 = x_of(cursor), x1 = x_of(cursor + v);
      absl::StrAppendFormat(
          &svg,
          "  <rect x=\"%.2f\" y=\"%.0f\" width=\"%.2f\" height=\"%.0f\" "
          "fill=\"%s\" stroke=\"white\"/>\n"
          "  <text x=\"%.2f\" y=\"%.0f\" text-anchor=\"middle\">%s "
          "%+.3f</text>\n",
          std::min(x0, x1), kBarY, std::abs(x1 - x0), kBarH, ColorOf(a),
          (x0 + x1) / 2, positive ? kBarY - 8 : kBarY + kBarH + 16,
          a["name"].get<std::string>(), v);
      cursor += v;
    }
  }
  absl::StrAppendFormat(
      &svg,
      "  <line x1=\"%.2f\" y1=\"30\" x2=\"%.2f\" y2=\"120\" stroke=\"black\" "
      "stroke-dasharray=\"4\"/>\n"
      "  <text x=\"%.2f\" y=\"140\" text-anchor=\"middle\">v(empty) = "
      "%.3f</text>\n"
      "  <line x1=\"%.2f\" y1=\"30\" x2=\"%.2f\" y2=\"120\" stroke=\"black\"/>\n"
      "  <text x=\"%.2f\" y=\"20\" text-anchor=\"middle\">v(all) = "
      "%.3f</text>\n</svg>\n",
      x_of(baseline), x_of(baseline), x_of(baseline), baseline, x_of(full),
      x_of(full), x_of(full), full);
  return svg;
}

std::string NetworkPlotSvg(const nlohmann::json& network) {
  constexpr double kSize = 480, kCenter = 240, kRadius = 160;
  double max_node = 1e-12, max_edge = 1e-12;
  for (const auto& node : network["nodes"]) {
    max_node = std::max(max_node, node["magnitude"].get<double>());
  }
  for (const auto& edge : network["edges"]) {
    max_edge = std::max(max_edge, edge["magnitude"].get<double>());
  }
  std::string svg = absl::StrFormat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      static_cast<int>(kSize), static_cast<int>(kSize));
  const auto& nodes = network["nodes"];
  auto px = [&](int i) { return kCenter + kRadius * nodes[i]["x"].get<double>(); };
  auto py = [&](int i) { return kCenter + kRadius * nodes[i]["y"].get<double>(); };
  for (const auto& edge : network["edges"]) {
    const int s = edge["source"].get<int>(), t = edge["target"].get<int>();
    const double width = 1.0 + 11.0 * edge["magnitude"].get<double>() / max_edge;
    absl::StrAppendFormat(
        &svg,
        "  <line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
        "stroke=\"%s\" stroke-width=\"%.2f\" stroke-opacity=\"0.7\"/>\n",
        px(s), py(s), px(t), py(t), ColorOf(edge), width);
  }
  for (size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    const double r = 6.0 + 24.0 * node["magnitude"].get<double>() / max_node;
    absl::StrAppendFormat(
        &svg,
        "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\"/>\n"
        "  <text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\">%s</text>\n",
        px(i), py(i), r, ColorOf(node), px(i), py(i) - r - 6,
        node["name"].get<std::string>());
  }
  svg += "</svg>\n";
  return svg;
}

absl::Status WriteGameCsv(const CompositionGame& game, const std::string& path) {
  RETURN_IF_ERROR(CheckGame(game));
  std::ofstream out(path);
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path));
  out << "coalition,value\n";
  for (size_t s = 0; s < game.values.size(); ++s) {
    out << s << "," << absl::StrFormat("%.17g", game.values[s]) << "\n";
  }
  return out.good() ? absl::OkStatus()
                    : absl::InternalError(absl::StrCat("write failed: ", path));
}

absl::StatusOr<CompositionGame> ReadGameCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::string line;
  std::getline(in, line);
  if (csv::SplitLine(line) != std::vector<std::string>{"coalition", "value"}) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": bad header"));
  }
  std::vector<std::pair<uint64_t, double>> rows;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::vector<std::string> fields = csv::SplitLine(line);
    try {
      if (fields.size() != 2) throw std::invalid_argument("field count");
      rows.emplace_back(std::stoull(fields[0]), std::stod(fields[1]));
    } catch (const std::exception&) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_number, ": malformed row"));
    }
  }
  std::vector<double> values(rows.size(), 0.0);
  std::vector<bool> seen(rows.size(), false);
  for (const auto& [coalition, value] : rows) {
    if (coalition >= rows.size() || seen[coalition]) {
      return absl::InvalidArgumentError(absl::StrCat(
          path, ": coalition ", coalition, " out of range or repeated"));
    }
    seen[coalition] = true;
    values[coalition] = value;
  }
  return GameFromValues(std::move(values));
}

}  // namespace promptcomp
