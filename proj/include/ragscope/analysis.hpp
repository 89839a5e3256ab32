#pragma once

// View-oriented queries over an AugmentedExperiment. Every query is read-only;
// the only mutable state is the per-session AnnotationStore.

#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ragscope/augment.hpp"

namespace ragscope {

// ---- performance overview ----

enum class MetricType { human, algorithmic, all };
std::optional<MetricType> parse_metric_type(const std::string &text);
const char *to_string(MetricType type);
// llm-judge metrics are grouped with algorithmic ones.
bool matches(MetricType type, const MetricMeta &metric);

struct RadarSeries {
  std::string model_id;
  // Mean per selected metric scaled to [0, 1] by the scale range, inverted
  // for lower-is-better metrics. nullopt when the model has no score.
  std::vector<std::optional<double>> values;
};

struct OverviewView {
  MetricType type = MetricType::all;
  std::vector<std::string> metric_ids;
  std::vector<ModelMetricAggregate> rows;
  std::vector<RadarSeries> radar;
};

OverviewView overview(const AugmentedExperiment &aug, MetricType type);

// ---- predictions table ----

struct PredictionSort {
  enum class Key { task_id, response_length } key = Key::task_id;
  std::string model_id;  // response_length only
  bool descending = false;
};

struct PredictionRow {
  std::string task_id;
  std::vector<Turn> input;
  std::vector<std::pair<std::string, std::string>> responses;  // model_id, response
};

struct PredictionsPage {
  std::size_t page = 1;
  std::size_t page_size = 0;
  std::size_t total = 0;
  std::vector<PredictionRow> rows;
};

PredictionsPage list_predictions(const AugmentedExperiment &aug, std::size_t page,
                                 std::size_t page_size, const PredictionSort &sort = {});

// ---- instance filtering ----

struct ScoreRange {
  std::string metric_id;
  std::optional<std::string> model_id;  // defaults to the instance's model
  double min = 0.0;
  double max = 0.0;
};

struct AgreementPredicate {
  std::string metric_id;
  std::set<stats::AgreementLevel> levels;
};

struct FilterSpec {
  std::map<std::string, std::string> metadata;
  std::vector<ScoreRange> scores;
  std::vector<AgreementPredicate> agreement;
  std::optional<std::set<std::string>> models;
};

// Throws std::invalid_argument on malformed JSON.
FilterSpec parse_filter(const Json &json);

// A conjunction of predicates over an instance, i.e. a (task, model) pair.
class InstanceFilter {
 public:
  InstanceFilter() = default;

  // Rejects metadata keys, metrics and models the experiment does not know.
  static InstanceFilter build(const AugmentedExperiment &aug, FilterSpec spec);

  [[nodiscard]] bool matches(const AugmentedExperiment &aug, const Task &task,
                             const std::string &model_id) const;
  [[nodiscard]] const FilterSpec &spec() const { return spec_; }

 private:
  explicit InstanceFilter(FilterSpec spec) : spec_(std::move(spec)) {}
  FilterSpec spec_;
};

// ---- model behavior ----

enum class BehaviorSort { task_id, score, agreement };
std::optional<BehaviorSort> parse_behavior_sort(const std::string &text);

struct BehaviorRow {
  std::string task_id;
  double value = 0.0;
  std::size_t n_annotators = 0;
  std::optional<stats::AgreementLevel> agreement;
  std::optional<std::string> majority_value;
};

struct ModelBehaviorView {
  std::string model_id;
  std::string metric_id;
  stats::Histogram histogram;
  std::vector<BehaviorRow> rows;
};

inline constexpr std::size_t kDefaultHistogramBins = 10;

ModelBehaviorView model_behavior(const AugmentedExperiment &aug, const std::string &model_id,
                                 const std::string &metric_id, const InstanceFilter &filter = {},
                                 BehaviorSort sort = BehaviorSort::task_id,
                                 bool descending = false);

// Category a cell falls into on a categorical histogram: its majority value,
// or else the declared value whose mapping is nearest the cell mean (lower on
// ties).
std::string histogram_category(const MetricMeta &metric, const CellAggregate &cell);

// ---- instance detail ----

struct InstanceDetail {
  ResolvedTask resolved;
  std::vector<CellAggregate> cells;  // models in file order, metrics in declaration order
};

InstanceDetail instance_detail(const AugmentedExperiment &aug, const std::string &task_id);

// ---- model comparator ----

struct CompareConfig {
  stats::RandomizationConfig test;
  std::size_t k = 10;  // size of the similar / dissimilar lists
};

struct ScatterPoint {
  std::string task_id;
  double x = 0.0;  // model A
  double y = 0.0;  // model B
};

struct ComparisonView {
  std::string model_a;
  std::string model_b;
  std::string metric_id;
  std::vector<ScatterPoint> points;  // task order
  stats::ComparisonResult result;
  std::vector<ScatterPoint> similar;     // smallest |x - y| first
  std::vector<ScatterPoint> dissimilar;  // largest |x - y| first
};

CompareConfig default_compare_config(const AugmentedExperiment &aug);

ComparisonView compare_models(const AugmentedExperiment &aug, const std::string &model_a,
                              const std::string &model_b, const std::string &metric_id,
                              const CompareConfig &config);

// ---- metric behavior ----

const CorrelationMatrix &metric_behavior(const AugmentedExperiment &aug);

// ---- annotator behavior ----

struct AnnotatorReport {
  bool empty = true;  // no human metric with two or more annotators
  std::vector<std::pair<std::string, AgreementCounts>> per_model;
  std::optional<stats::KappaMatrix> global_kappa;
  std::map<std::string, stats::KappaMatrix> per_metric_kappa;
  std::vector<AnnotatorProfile> profiles;
};

AnnotatorReport annotator_report(const AugmentedExperiment &aug);

// ---- dataset ----

const DatasetCharacteristics &dataset_view(const AugmentedExperiment &aug);

// ---- flags and comments ----

enum class AnnotationKind { flag, comment };
std::optional<AnnotationKind> parse_annotation_kind(const std::string &text);

struct InstanceAnnotation {
  std::string task_id;
  AnnotationKind kind = AnnotationKind::flag;
  std::optional<std::string> text;
  std::optional<std::string> author;
  std::string created_at;  // filled with the current UTC time when empty
};

// Session-local, in-memory only. Mutations are serialized; reads take a
// snapshot.
class AnnotationStore {
 public:
  void annotate(const AugmentedExperiment &aug, InstanceAnnotation annotation);
  [[nodiscard]] std::vector<InstanceAnnotation> snapshot() const;
  [[nodiscard]] Json export_json(const AugmentedExperiment &aug) const;

 private:
  mutable std::mutex mutex_;
  std::vector<InstanceAnnotation> annotations_;
};

std::string utc_now_iso8601();

// ---- payloads ----

Json to_json(const OverviewView &view);
Json to_json(const PredictionsPage &page);
Json to_json(const ModelBehaviorView &view);
Json to_json(const InstanceDetail &detail);
Json to_json(const ComparisonView &view);
Json to_json(const AnnotatorReport &report);

}  // namespace ragscope
