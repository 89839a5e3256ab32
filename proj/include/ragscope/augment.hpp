#pragma once

// Derives every statistic the analysis views need from a validated
// experiment. The result is computed once and is immutable afterwards.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ragscope/experiment.hpp"
#include "ragscope/io.hpp"
#include "ragscope/stats.hpp"
#include "ragscope/validate.hpp"

namespace ragscope {

struct AugmentConfig {
  std::uint64_t seed = 42;
  std::size_t iterations = 10'000;  // Monte Carlo default for comparisons
  std::size_t exhaustive_threshold = 20;
};

// Indexed by stats::AgreementLevel.
using AgreementCounts = std::array<std::size_t, 3>;

struct CellAggregate {
  std::string task_id;
  std::string model_id;
  std::string metric_id;
  double value = 0.0;  // mean of numeric-mapped ratings
  std::size_t n_annotators = 0;
  std::optional<stats::AgreementLevel> agreement;  // human metrics, >= 2 annotators
  std::optional<std::string> majority_value;       // categorical metrics with a strict majority
  std::vector<std::string> labels;                 // per annotator, annotator-id order
  std::vector<std::string> annotators;
};

struct ModelMetricAggregate {
  std::string model_id;
  std::string metric_id;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_instances = 0;
  std::size_t rank = 0;
  std::optional<AgreementCounts> agreement_distribution;  // human metrics
};

struct AnnotatorProfile {
  std::string annotator_id;
  std::size_t n_ratings = 0;
  std::size_t n_majority_cells = 0;
  std::optional<double> contribution;
  std::optional<double> mean_duration_seconds;
  std::optional<double> median_duration_seconds;
  std::optional<double> mean_kappa;  // mean pairwise kappa against the other annotators
};

struct Correlation {
  std::optional<double> rho;  // nullopt when undefined
  std::size_t n = 0;
};

struct CorrelationMatrix {
  std::vector<std::string> metric_ids;  // declaration order
  std::vector<std::vector<Correlation>> entries;
};

struct QuestionLengthSummary {
  std::size_t min = 0;
  std::size_t max = 0;
  double mean = 0.0;
  stats::Histogram histogram;
};

struct DatasetCharacteristics {
  std::size_t n_tasks = 0;
  // metadata key -> value -> count; tasks lacking the key count as "(missing)"
  std::map<std::string, std::map<std::string, std::size_t>> distributions;
  std::optional<QuestionLengthSummary> question_length;
};

inline constexpr const char *kMissingValue = "(missing)";

DatasetCharacteristics compute_dataset_characteristics(const ExperimentFile &file);

// Whitespace-token count.
std::size_t token_count(const std::string &text);

struct AugmentedExperiment {
  ExperimentFile experiment;
  AugmentConfig config;
  std::vector<CellAggregate> cells;
  std::vector<ModelMetricAggregate> model_metrics;  // metric-major, models in file order
  std::map<std::string, stats::KappaMatrix> metric_kappa;
  std::map<std::string, std::map<std::string, stats::KappaMatrix>> model_metric_kappa;
  std::optional<stats::KappaMatrix> global_kappa;  // all human metrics pooled
  std::vector<AnnotatorProfile> annotator_profiles;
  CorrelationMatrix metric_correlations;
  DatasetCharacteristics dataset;
  std::vector<Issue> warnings;

  [[nodiscard]] const CellAggregate *cell(const std::string &task_id, const std::string &model_id,
                                          const std::string &metric_id) const;
  [[nodiscard]] const ModelMetricAggregate *model_metric(const std::string &model_id,
                                                         const std::string &metric_id) const;

 private:
  friend AugmentedExperiment augment(ExperimentFile file, const AugmentConfig &config);
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> cell_index_;
};

class InvalidExperiment : public std::runtime_error {
 public:
  explicit InvalidExperiment(ValidationReport report);
  [[nodiscard]] const ValidationReport &report() const { return report_; }

 private:
  ValidationReport report_;
};

// Throws InvalidExperiment when validate() reports errors.
AugmentedExperiment augment(ExperimentFile file, const AugmentConfig &config = {});

// The experiment document plus a top-level "derived" section.
Json to_json(const AugmentedExperiment &augmented);
Json derived_to_json(const AugmentedExperiment &augmented);

Json to_json(const stats::KappaResult &result);
Json to_json(const stats::KappaMatrix &matrix);
Json to_json(const stats::Histogram &histogram);
Json to_json(const stats::ComparisonResult &result);
Json to_json(const CorrelationMatrix &matrix);
Json to_json(const DatasetCharacteristics &characteristics);
Json to_json(const ModelMetricAggregate &aggregate);
Json to_json(const AnnotatorProfile &profile);
Json to_json(const CellAggregate &cell);
Json agreement_counts_json(const AgreementCounts &counts);

}  // namespace ragscope
