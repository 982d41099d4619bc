#include "metaqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "metaqa/error.hpp"
#include "metaqa/text.hpp"

namespace metaqa {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string cell(double value) { return fmt::format("{:.6f}", value); }

std::string optional_cell(double value, bool undefined) {
  return undefined ? std::string("NA") : cell(value);
}

}  // namespace

ScoredItem scored_item(const DetectionTrace& trace) {
  return {trace.question_id, trace.score, trace.degraded};
}

ScoredItem scored_item(const ConsistencyTrace& trace) {
  return {trace.question_id, trace.score, trace.degraded};
}

bool is_hallucination_label(const LabelSet& labels, const std::string& id) {
  const auto it = labels.find(id);
  if (it == labels.end()) throw Error(ErrorCode::MissingLabel, "no label for '" + id + "'");
  if (it->second.value == LabelValue::NeedsReview) {
    throw Error(ErrorCode::UnresolvedLabel, "'" + id + "' still needs review");
  }
  return it->second.value == LabelValue::Hallucination;
}

ConfusionCounts confusion(const std::vector<ScoredItem>& items, const LabelSet& labels,
                          const Threshold& threshold, const EvalOptions& options) {
  ConfusionCounts c;
  for (const auto& item : items) {
    const bool positive = is_hallucination_label(labels, item.question_id);
    if (!item.score || (options.exclude_degraded && item.degraded)) continue;
    const bool flagged = classify(*item.score, threshold);
    if (positive && flagged) ++c.tp;
    if (!positive && flagged) ++c.fp;
    if (!positive && !flagged) ++c.tn;
    if (positive && !flagged) ++c.fn;
  }
  return c;
}

double f1_from(double precision, double recall) noexcept {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics metrics(const ConfusionCounts& counts, const Threshold& threshold) {
  Metrics m;
  m.counts = counts;
  m.threshold = threshold;
  m.precision_undefined = counts.tp + counts.fp == 0;
  m.recall_undefined = counts.tp + counts.fn == 0;
  m.precision = ratio(counts.tp, counts.tp + counts.fp);
  m.recall = ratio(counts.tp, counts.tp + counts.fn);
  m.f1 = f1_from(m.precision, m.recall);
  return m;
}

std::vector<Threshold> default_grid() {
  std::vector<Threshold> grid;
  for (std::int64_t units = 2000; units <= 7000; units += 500) {
    grid.push_back(Threshold::from_units(units));
  }
  return grid;
}

void validate_grid(const std::vector<Threshold>& grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidGrid, "threshold grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) {
      throw Error(ErrorCode::InvalidGrid, "threshold grid must be strictly increasing");
    }
  }
}

std::vector<Threshold> parse_grid(std::string_view text) {
  std::vector<Threshold> grid;
  const auto spec = trim(text);
  if (std::count(spec.begin(), spec.end(), ':') == 2) {
    const auto a = spec.find(':');
    const auto b = spec.find(':', a + 1);
    const auto start = Threshold::parse(trim(spec.substr(0, a))).units();
    const auto stop = Threshold::parse(trim(spec.substr(a + 1, b - a - 1))).units();
    const auto step = Threshold::parse(trim(spec.substr(b + 1))).units();
    if (step <= 0) throw Error(ErrorCode::InvalidGrid, "grid step must be positive");
    for (auto u = start; u <= stop; u += step) grid.push_back(Threshold::from_units(u));
  } else {
    std::stringstream in(spec);
    std::string token;
    while (std::getline(in, token, ',')) grid.push_back(Threshold::parse(trim(token)));
  }
  validate_grid(grid);
  return grid;
}

std::vector<Metrics> threshold_sweep(const std::vector<ScoredItem>& items, const LabelSet& labels,
                                     const std::vector<Threshold>& grid,
                                     const EvalOptions& options) {
  validate_grid(grid);
  std::vector<Metrics> out;
  out.reserve(grid.size());
  for (const auto& t : grid) out.push_back(metrics(confusion(items, labels, t, options), t));
  return out;
}

std::vector<MetricsDelta> sweep_deltas(const std::vector<Metrics>& first,
                                       const std::vector<Metrics>& second) {
  if (first.size() != second.size()) {
    throw Error(ErrorCode::InvalidGrid, "sweeps cover different grids");
  }
  std::vector<MetricsDelta> out;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i].threshold != second[i].threshold) {
      throw Error(ErrorCode::InvalidGrid, "sweeps cover different grids");
    }
    out.push_back({first[i].threshold, first[i].precision - second[i].precision,
                   first[i].recall - second[i].recall, first[i].f1 - second[i].f1});
  }
  return out;
}

std::vector<CategoryStats> category_breakdown(const std::vector<ScoredItem>& items,
                                              const LabelSet& labels,
                                              const std::vector<QaRecord>& records,
                                              const Threshold& threshold,
                                              const EvalOptions& options) {
  std::map<std::string, std::string, std::less<>> category_of;
  for (const auto& r : records) {
    if (r.category) category_of[r.id] = *r.category;
  }
  std::map<std::string, std::vector<ScoredItem>> groups;
  for (const auto& item : items) {
    const auto it = category_of.find(item.question_id);
    if (it != category_of.end()) groups[it->second].push_back(item);
  }

  std::vector<CategoryStats> out;
  for (const auto& [category, group] : groups) {
    CategoryStats s;
    s.category = category;
    for (const auto& item : group) {
      if (options.exclude_degraded && item.degraded) continue;
      if (!item.score) continue;
      ++s.questions;
      if (is_hallucination_label(labels, item.question_id)) ++s.hallucinated;
    }
    s.metrics = metrics(confusion(group, labels, threshold, options), threshold);
    s.hallucination_rate = ratio(s.hallucinated, s.questions);
    s.detected_fraction_undefined = s.metrics.recall_undefined;
    s.detected_fraction = s.metrics.recall;
    s.detected_fraction_of_all = ratio(s.metrics.counts.tp, s.questions);
    out.push_back(std::move(s));
  }
  return out;
}

MeanDeviation mean_deviation(const std::vector<double>& values) {
  if (values.empty()) return {};
  // Offsets from the first value, so identical runs give exactly zero.
  const double shift = values.front();
  const auto n = static_cast<double>(values.size());
  double offset = 0.0;
  for (double v : values) offset += v - shift;
  offset /= n;
  double squares = 0.0;
  for (double v : values) squares += (v - shift - offset) * (v - shift - offset);
  return {shift + offset, std::sqrt(squares / n)};
}

std::vector<StabilityPoint> stability_report(const std::vector<std::vector<ScoredItem>>& runs,
                                             const LabelSet& labels,
                                             const std::vector<Threshold>& grid,
                                             const EvalOptions& options) {
  if (runs.size() < 2) throw Error(ErrorCode::MismatchedRuns, "stability needs at least two runs");
  auto ids_of = [](const std::vector<ScoredItem>& run) {
    std::multiset<std::string> ids;
    for (const auto& item : run) ids.insert(item.question_id);
    return ids;
  };
  const auto reference = ids_of(runs.front());
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (ids_of(runs[r]) != reference) {
      throw Error(ErrorCode::MismatchedRuns,
                  "run " + std::to_string(r + 1) + " covers a different question set");
    }
  }

  std::vector<std::vector<Metrics>> sweeps;
  for (const auto& run : runs) sweeps.push_back(threshold_sweep(run, labels, grid, options));

  std::vector<StabilityPoint> out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> p;
    std::vector<double> r;
    std::vector<double> f;
    for (const auto& sweep : sweeps) {
      p.push_back(sweep[g].precision);
      r.push_back(sweep[g].recall);
      f.push_back(sweep[g].f1);
    }
    out.push_back({grid[g], mean_deviation(p), mean_deviation(r), mean_deviation(f)});
  }
  return out;
}

Score truncated_score(const DetectionTrace& trace, int k) {
  if (k < 1) throw Error(ErrorCode::InsufficientMutations, "mutation count must be positive");
  const auto syn_keep = static_cast<std::size_t>((k + 1) / 2);
  const auto ant_keep = static_cast<std::size_t>(k / 2);
  auto syn = trace.syn_verdicts();
  auto ant = trace.ant_verdicts();
  if (syn.size() < syn_keep || ant.size() < ant_keep) {
    throw Error(ErrorCode::InsufficientMutations,
                fmt::format("{} has {}+{} verdicts; k={} needs {}+{}", trace.question_id,
                            syn.size(), ant.size(), k, syn_keep, ant_keep));
  }
  syn.resize(syn_keep);
  ant.resize(ant_keep);
  return hallucination_score(syn, ant);
}

std::vector<SensitivityPoint> mutation_count_sensitivity(
    const std::vector<DetectionTrace>& traces, const LabelSet& labels,
    const std::vector<Threshold>& thresholds, const std::vector<int>& k_grid,
    const EvalOptions& options) {
  validate_grid(thresholds);
  std::vector<SensitivityPoint> out;
  for (int k : k_grid) {
    std::vector<ScoredItem> items;
    items.reserve(traces.size());
    for (const auto& t : traces) {
      items.push_back({t.question_id, truncated_score(t, k), t.degraded});
    }
    for (const auto& threshold : thresholds) {
      out.push_back({k, metrics(confusion(items, labels, threshold, options), threshold)});
    }
  }
  return out;
}

double hallucination_rate(const LabelSet& labels) {
  std::int64_t positives = 0;
  for (const auto& [id, label] : labels) {
    if (is_hallucination_label(labels, id)) ++positives;
  }
  return ratio(positives, static_cast<std::int64_t>(labels.size()));
}

Heatmap hallucination_rate_heatmap(const std::vector<HeatmapInput>& cells) {
  Heatmap h;
  for (const auto& c : cells) {
    if (std::find(h.models.begin(), h.models.end(), c.model) == h.models.end()) {
      h.models.push_back(c.model);
    }
    if (std::find(h.datasets.begin(), h.datasets.end(), c.dataset) == h.datasets.end()) {
      h.datasets.push_back(c.dataset);
    }
  }
  h.rates.assign(h.models.size(), std::vector<std::optional<double>>(h.datasets.size()));
  for (const auto& c : cells) {
    const auto m = std::find(h.models.begin(), h.models.end(), c.model) - h.models.begin();
    const auto d = std::find(h.datasets.begin(), h.datasets.end(), c.dataset) - h.datasets.begin();
    h.rates[static_cast<std::size_t>(m)][static_cast<std::size_t>(d)] =
        hallucination_rate(c.labels);
  }
  return h;
}

std::vector<ReferenceTriple> parse_reference_triples(std::string_view csv) {
  std::vector<ReferenceTriple> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).starts_with("#")) continue;
    if (header) {
      header = false;
      if (trim(line) != "method,dataset,precision,recall,f1") {
        throw Error(ErrorCode::ParseError, "reference file header must be "
                                           "method,dataset,precision,recall,f1");
      }
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 5) {
      throw Error(ErrorCode::ParseError, "reference line " + std::to_string(line_no) +
                                             ": expected 5 fields");
    }
    try {
      rows.push_back({fields[0], fields[1], std::stod(fields[2]), std::stod(fields[3]),
                      std::stod(fields[4])});
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError,
                  "reference line " + std::to_string(line_no) + ": bad number");
    }
  }
  return rows;
}

std::vector<F1Check> check_f1_consistency(const std::vector<ReferenceTriple>& rows,
                                          double tolerance) {
  std::vector<F1Check> out;
  for (const auto& row : rows) {
    const double f1 = f1_from(row.precision, row.recall);
    const double diff = std::abs(f1 - row.f1);
    out.push_back({row, f1, diff, diff <= tolerance});
  }
  return out;
}

std::string sweep_csv(const std::vector<Metrics>& sweep) {
  std::string out = "threshold,precision,recall,f1,tp,fp,tn,fn\n";
  for (const auto& m : sweep) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", m.threshold.to_string(),
                       optional_cell(m.precision, m.precision_undefined),
                       optional_cell(m.recall, m.recall_undefined), cell(m.f1), m.counts.tp,
                       m.counts.fp, m.counts.tn, m.counts.fn);
  }
  return out;
}

std::string category_csv(const std::vector<CategoryStats>& stats) {
  std::string out =
      "category,questions,hallucinated,hallucination_rate,detected_fraction,"
      "detected_fraction_of_all,precision,recall,f1\n";
  for (const auto& s : stats) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", s.category, s.questions, s.hallucinated,
                       cell(s.hallucination_rate),
                       optional_cell(s.detected_fraction, s.detected_fraction_undefined),
                       cell(s.detected_fraction_of_all),
                       optional_cell(s.metrics.precision, s.metrics.precision_undefined),
                       optional_cell(s.metrics.recall, s.metrics.recall_undefined),
                       cell(s.metrics.f1));
  }
  return out;
}

std::string stability_csv(const std::vector<StabilityPoint>& points) {
  std::string out =
      "threshold,precision_mean,precision_dev,recall_mean,recall_dev,f1_mean,f1_dev\n";
  for (const auto& p : points) {
    out += fmt::format("{},{},{},{},{},{},{}\n", p.threshold.to_string(), cell(p.precision.mean),
                       cell(p.precision.deviation), cell(p.recall.mean),
                       cell(p.recall.deviation), cell(p.f1.mean), cell(p.f1.deviation));
  }
  return out;
}

std::string sensitivity_csv(const std::vector<SensitivityPoint>& points) {
  std::string out = "mutations,threshold,precision,recall,f1\n";
  for (const auto& p : points) {
    out += fmt::format("{},{},{},{},{}\n", p.mutations, p.metrics.threshold.to_string(),
                       optional_cell(p.metrics.precision, p.metrics.precision_undefined),
                       optional_cell(p.metrics.recall, p.metrics.recall_undefined),
                       cell(p.metrics.f1));
  }
  return out;
}

std::string heatmap_csv(const Heatmap& heatmap) {
  std::string out = "model";
  for (const auto& d : heatmap.datasets) out += "," + d;
  out += "\n";
  for (std::size_t m = 0; m < heatmap.models.size(); ++m) {
    out += heatmap.models[m];
    for (const auto& rate : heatmap.rates[m]) out += "," + (rate ? cell(*rate) : "NA");
    out += "\n";
  }
  return out;
}

}  // namespace metaqa
