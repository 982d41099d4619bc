#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metaqa/baseline.hpp"
#include "metaqa/dataset.hpp"
#include "metaqa/labeler.hpp"
#include "metaqa/scorer.hpp"

namespace metaqa {

/// The part of a trace that evaluation needs. Positive class = hallucination.
struct ScoredItem {
  std::string question_id;
  std::optional<Score> score;  ///< empty: unscorable, left out of evaluation
  bool degraded = false;
};

ScoredItem scored_item(const DetectionTrace& trace);
ScoredItem scored_item(const ConsistencyTrace& trace);

struct EvalOptions {
  bool exclude_degraded = false;
};

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  [[nodiscard]] std::int64_t total() const noexcept { return tp + fp + tn + fn; }
  [[nodiscard]] std::int64_t predicted_positive() const noexcept { return tp + fp; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
  Threshold threshold;
  bool precision_undefined = false;  ///< tp + fp == 0, precision reported as 0
  bool recall_undefined = false;     ///< tp + fn == 0, recall reported as 0
};

/// Binary ground truth for every id, or throws MissingLabel / UnresolvedLabel.
bool is_hallucination_label(const LabelSet& labels, const std::string& id);

ConfusionCounts confusion(const std::vector<ScoredItem>& items, const LabelSet& labels,
                          const Threshold& threshold, const EvalOptions& options = {});

Metrics metrics(const ConfusionCounts& counts, const Threshold& threshold = {});
/// F1 as the harmonic mean of precision and recall; 0 when both are 0.
double f1_from(double precision, double recall) noexcept;

/// 0.20, 0.25, ..., 0.70.
std::vector<Threshold> default_grid();
/// Parses "a:b:step" or a comma list; must be strictly increasing in [0, 1].
std::vector<Threshold> parse_grid(std::string_view text);
void validate_grid(const std::vector<Threshold>& grid);

std::vector<Metrics> threshold_sweep(const std::vector<ScoredItem>& items, const LabelSet& labels,
                                     const std::vector<Threshold>& grid,
                                     const EvalOptions& options = {});

struct MetricsDelta {
  Threshold threshold;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Element-wise first minus second over matching grids.
std::vector<MetricsDelta> sweep_deltas(const std::vector<Metrics>& first,
                                       const std::vector<Metrics>& second);

struct CategoryStats {
  std::string category;
  std::int64_t questions = 0;
  std::int64_t hallucinated = 0;
  double hallucination_rate = 0.0;
  /// tp / (tp + fn): share of hallucinations caught.
  double detected_fraction = 0.0;
  bool detected_fraction_undefined = false;
  /// tp / questions: share of all questions flagged correctly.
  double detected_fraction_of_all = 0.0;
  Metrics metrics;
};

/// Per-category results; records without a category are skipped.
std::vector<CategoryStats> category_breakdown(const std::vector<ScoredItem>& items,
                                              const LabelSet& labels,
                                              const std::vector<QaRecord>& records,
                                              const Threshold& threshold,
                                              const EvalOptions& options = {});

struct MeanDeviation {
  double mean = 0.0;
  double deviation = 0.0;  ///< population standard deviation
};

MeanDeviation mean_deviation(const std::vector<double>& values);

struct StabilityPoint {
  Threshold threshold;
  MeanDeviation precision;
  MeanDeviation recall;
  MeanDeviation f1;
};

/// Needs at least two runs over one question set (MismatchedRuns otherwise).
std::vector<StabilityPoint> stability_report(const std::vector<std::vector<ScoredItem>>& runs,
                                             const LabelSet& labels,
                                             const std::vector<Threshold>& grid,
                                             const EvalOptions& options = {});

/// Score from the first ceil(k/2) synonym and floor(k/2) antonym verdicts,
/// in generation order. Throws InsufficientMutations if the trace is short.
Score truncated_score(const DetectionTrace& trace, int k);

struct SensitivityPoint {
  int mutations = 0;
  Metrics metrics;
};

std::vector<SensitivityPoint> mutation_count_sensitivity(
    const std::vector<DetectionTrace>& traces, const LabelSet& labels,
    const std::vector<Threshold>& thresholds, const std::vector<int>& k_grid,
    const EvalOptions& options = {});

struct HeatmapInput {
  std::string model;
  std::string dataset;
  LabelSet labels;
};

struct Heatmap {
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  std::vector<std::vector<std::optional<double>>> rates;  ///< [model][dataset]
};

/// Labeled-hallucination share per (model, dataset); labels must be final.
Heatmap hallucination_rate_heatmap(const std::vector<HeatmapInput>& cells);

double hallucination_rate(const LabelSet& labels);

struct ReferenceTriple {
  std::string method;
  std::string dataset;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// CSV with header method,dataset,precision,recall,f1.
std::vector<ReferenceTriple> parse_reference_triples(std::string_view csv);

struct F1Check {
  ReferenceTriple row;
  double recomputed_f1 = 0.0;
  double difference = 0.0;
  bool consistent = false;
};

std::vector<F1Check> check_f1_consistency(const std::vector<ReferenceTriple>& rows,
                                          double tolerance = 0.001);

// Delimiter-separated exports for external plotting.
std::string sweep_csv(const std::vector<Metrics>& sweep);
std::string category_csv(const std::vector<CategoryStats>& stats);
std::string stability_csv(const std::vector<StabilityPoint>& points);
std::string sensitivity_csv(const std::vector<SensitivityPoint>& points);
std::string heatmap_csv(const Heatmap& heatmap);

}  // namespace metaqa
