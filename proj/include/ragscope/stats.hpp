#pragma once

// Statistical kernel: aggregation, agreement, rank correlation and paired
// randomization tests. Everything here is a pure function of its arguments.
// Invalid arguments raise std::invalid_argument.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragscope/experiment.hpp"

namespace ragscope::stats {

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1), 0 when n == 1
  std::size_t n = 0;
};

Summary aggregate_numeric(std::span<const double> values);

// Strict majority: the label occurring more than n/2 times.
std::optional<std::string> majority_label(std::span<const std::string> labels);

enum class AgreementLevel { unanimous, majority, split };

inline constexpr AgreementLevel kAgreementLevels[] = {
    AgreementLevel::unanimous, AgreementLevel::majority, AgreementLevel::split};

AgreementLevel agreement_level(std::span<const std::string> labels);
const char *to_string(AgreementLevel level);
std::optional<AgreementLevel> parse_agreement_level(const std::string &text);

inline constexpr double kKappaEpsilon = 1e-12;

struct KappaResult {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  std::size_t n_items = 0;
};

// Cohen's kappa for two raters over the same items. When the chance
// agreement is 1 (both raters constant on the same label) kappa is 1.
KappaResult cohens_kappa(std::span<const std::string> ratings_a,
                         std::span<const std::string> ratings_b,
                         std::span<const std::string> categories);

// annotator_id -> cell_id -> label
using LabelTable = std::map<std::string, std::map<std::string, std::string>>;

struct KappaMatrix {
  std::vector<std::string> annotators;  // sorted
  // entries[i][j] is empty when annotators i and j share no cell.
  std::vector<std::vector<std::optional<KappaResult>>> entries;

  // Mean off-diagonal kappa of row i over present entries.
  [[nodiscard]] std::optional<double> mean_kappa(std::size_t i) const;
};

KappaMatrix pairwise_kappa_matrix(const LabelTable &cells,
                                  std::span<const std::string> categories);

// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// Spearman's rho with average-rank ties. nullopt when either side has
// constant ranks.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

enum class TestMethod { exhaustive, monte_carlo };
const char *to_string(TestMethod method);

// Monte Carlo sign flips draw single bits from std::mt19937_64, whose output
// sequence is fixed by the C++ standard. Bump the version if the draw order
// ever changes.
inline constexpr const char *kRandomizationGenerator = "mt19937_64-bitstream/v1";

struct RandomizationConfig {
  std::size_t iterations = 10'000;
  std::uint64_t seed = 0;
  std::size_t exhaustive_threshold = 20;
};

struct ComparisonResult {
  double observed_diff = 0.0;  // mean(a) - mean(b) over the pairs
  double p_value = 1.0;
  TestMethod method = TestMethod::exhaustive;
  std::size_t iterations = 0;  // 2^n for exhaustive
  std::uint64_t seed = 0;
  std::size_t n_pairs = 0;
};

// Two-sided paired sign-flip test on d_i = a_i - b_i with statistic mean(d).
ComparisonResult fisher_randomization_test(std::span<const double> scores_a,
                                           std::span<const double> scores_b,
                                           const RandomizationConfig &config = {});

struct Bin {
  double lower = 0.0;
  double upper = 0.0;
  std::optional<std::string> label;  // categorical bins only
  std::size_t count = 0;
};

struct Histogram {
  std::vector<Bin> bins;
  std::size_t total = 0;
};

// Equal-width bins over [lower, upper]; the last bin includes upper.
Histogram histogram(std::span<const double> values, std::size_t n_bins, double lower,
                    double upper);

// One bin per declared categorical value, in declared order.
Histogram histogram(std::span<const std::string> labels, const ScaleSpec &scale);

}  // namespace ragscope::stats
