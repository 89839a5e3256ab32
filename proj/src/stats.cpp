#include "ragscope/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace ragscope::stats {

Summary aggregate_numeric(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate_numeric: empty input");
  const auto n = values.size();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  if (n == 1) return {mean, 0.0, 1};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1)), n};
}

namespace {

// Most frequent label and its count; ties broken by the smaller label so the
// result does not depend on input order.
std::pair<std::string, std::size_t> mode(std::span<const std::string> labels) {
  std::map<std::string, std::size_t> counts;
  for (const auto &label : labels) ++counts[label];
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return {best->first, best->second};
}

}  // namespace

std::optional<std::string> majority_label(std::span<const std::string> labels) {
  if (labels.empty()) throw std::invalid_argument("majority_label: empty input");
  auto [label, count] = mode(labels);
  if (2 * count > labels.size()) return label;
  return std::nullopt;
}

AgreementLevel agreement_level(std::span<const std::string> labels) {
  if (labels.empty()) throw std::invalid_argument("agreement_level: empty input");
  auto [label, count] = mode(labels);
  if (count == labels.size()) return AgreementLevel::unanimous;
  if (2 * count > labels.size()) return AgreementLevel::majority;
  return AgreementLevel::split;
}

const char *to_string(AgreementLevel level) {
  switch (level) {
    case AgreementLevel::unanimous: return "unanimous";
    case AgreementLevel::majority: return "majority";
    case AgreementLevel::split: return "split";
  }
  return "split";
}

std::optional<AgreementLevel> parse_agreement_level(const std::string &text) {
  for (auto level : kAgreementLevels) {
    if (text == to_string(level)) return level;
  }
  return std::nullopt;
}

KappaResult cohens_kappa(std::span<const std::string> ratings_a,
                         std::span<const std::string> ratings_b,
                         std::span<const std::string> categories) {
  if (ratings_a.size() != ratings_b.size()) {
    throw std::invalid_argument("cohens_kappa: length mismatch");
  }
  if (ratings_a.empty()) throw std::invalid_argument("cohens_kappa: no items");

  std::unordered_map<std::string, std::size_t> category_index;
  for (std::size_t c = 0; c < categories.size(); ++c) category_index.emplace(categories[c], c);
  std::vector<std::size_t> marginal_a(categories.size(), 0);
  std::vector<std::size_t> marginal_b(categories.size(), 0);

  std::size_t agree = 0;
  for (std::size_t i = 0; i < ratings_a.size(); ++i) {
    auto ia = category_index.find(ratings_a[i]);
    auto ib = category_index.find(ratings_b[i]);
    if (ia == category_index.end() || ib == category_index.end()) {
      throw std::invalid_argument("cohens_kappa: rating outside the category set");
    }
    ++marginal_a[ia->second];
    ++marginal_b[ib->second];
    if (ia->second == ib->second) ++agree;
  }

  const auto n = static_cast<double>(ratings_a.size());
  KappaResult result;
  result.n_items = ratings_a.size();
  result.observed_agreement = static_cast<double>(agree) / n;
  double pe = 0.0;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    pe += (static_cast<double>(marginal_a[c]) / n) * (static_cast<double>(marginal_b[c]) / n);
  }
  result.expected_agreement = pe;
  if (1.0 - pe < kKappaEpsilon) {
    result.kappa = 1.0;
  } else {
    result.kappa = std::clamp((result.observed_agreement - pe) / (1.0 - pe), -1.0, 1.0);
  }
  return result;
}

std::optional<double> KappaMatrix::mean_kappa(std::size_t i) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < entries[i].size(); ++j) {
    if (j == i || !entries[i][j]) continue;
    sum += entries[i][j]->kappa;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

KappaMatrix pairwise_kappa_matrix(const LabelTable &cells,
                                  std::span<const std::string> categories) {
  if (cells.size() < 2) {
    throw std::invalid_argument("pairwise_kappa_matrix: need at least two annotators");
  }
  KappaMatrix matrix;
  std::vector<const std::map<std::string, std::string> *> rows;
  for (const auto &[annotator, labels] : cells) {
    matrix.annotators.push_back(annotator);
    rows.push_back(&labels);
  }
  const std::size_t k = rows.size();
  matrix.entries.assign(k, std::vector<std::optional<KappaResult>>(k));

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      std::vector<std::string> a;
      std::vector<std::string> b;
      for (const auto &[cell, label] : *rows[i]) {
        auto other = rows[j]->find(cell);
        if (other == rows[j]->end()) continue;
        a.push_back(label);
        b.push_back(other->second);
      }
      if (a.empty()) continue;
      // On the diagonal p_o == 1, so kappa is exactly 1.
      matrix.entries[i][j] = cohens_kappa(a, b, categories);
      matrix.entries[j][i] = matrix.entries[i][j];
    }
  }
  return matrix;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share rank mean of (i+1)..(j+1)
    const double rank = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto n = static_cast<double>(x.size());
  // Both rank vectors have mean (n + 1) / 2 regardless of ties.
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

const char *to_string(TestMethod method) {
  return method == TestMethod::exhaustive ? "exhaustive" : "monte_carlo";
}

namespace {

class BitStream {
 public:
  explicit BitStream(std::uint64_t seed) : engine_(seed) {}

  bool next() {
    if (remaining_ == 0) {
      word_ = engine_();
      remaining_ = 64;
    }
    const bool bit = (word_ & 1U) != 0;
    word_ >>= 1U;
    --remaining_;
    return bit;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t word_ = 0;
  unsigned remaining_ = 0;
};

constexpr std::size_t kMaxExhaustivePairs = 30;

}  // namespace

ComparisonResult fisher_randomization_test(std::span<const double> scores_a,
                                           std::span<const double> scores_b,
                                           const RandomizationConfig &config) {
  if (scores_a.size() != scores_b.size()) {
    throw std::invalid_argument("fisher_randomization_test: length mismatch");
  }
  if (scores_a.size() < 2) {
    throw std::invalid_argument("fisher_randomization_test: need at least two pairs");
  }
  if (config.exhaustive_threshold > kMaxExhaustivePairs) {
    throw std::invalid_argument("fisher_randomization_test: exhaustive_threshold above 30");
  }

  const std::size_t n = scores_a.size();
  std::vector<double> diffs(n);
  double observed_sum = 0.0;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diffs[i] = scores_a[i] - scores_b[i];
    observed_sum += diffs[i];
    abs_sum += std::abs(diffs[i]);
  }
  // Sums equal to the observed one up to rounding count as "at least as extreme".
  const double threshold = std::abs(observed_sum) - 1e-9 * abs_sum;

  ComparisonResult result;
  result.observed_diff = observed_sum / static_cast<double>(n);
  result.seed = config.seed;
  result.n_pairs = n;

  if (n <= config.exhaustive_threshold) {
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t extreme = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum += ((mask >> i) & 1U) != 0 ? -diffs[i] : diffs[i];
      }
      if (std::abs(sum) >= threshold) ++extreme;
    }
    result.method = TestMethod::exhaustive;
    result.iterations = total;
    result.p_value = static_cast<double>(extreme) / static_cast<double>(total);
    return result;
  }

  if (config.iterations == 0) {
    throw std::invalid_argument("fisher_randomization_test: iterations must be positive");
  }
  BitStream bits(config.seed);
  std::size_t extreme = 0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += bits.next() ? -diffs[i] : diffs[i];
    if (std::abs(sum) >= threshold) ++extreme;
  }
  result.method = TestMethod::monte_carlo;
  result.iterations = config.iterations;
  result.p_value =
      static_cast<double>(1 + extreme) / static_cast<double>(config.iterations + 1);
  return result;
}

Histogram histogram(std::span<const double> values, std::size_t n_bins, double lower,
                    double upper) {
  if (n_bins < 1) throw std::invalid_argument("histogram: n_bins must be at least 1");
  if (!(lower < upper)) throw std::invalid_argument("histogram: empty range");
  Histogram h;
  const double width = (upper - lower) / static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double lo = lower + width * static_cast<double>(b);
    const double hi = b + 1 == n_bins ? upper : lower + width * static_cast<double>(b + 1);
    h.bins.push_back({lo, hi, std::nullopt, 0});
  }
  for (double v : values) {
    if (!(v >= lower && v <= upper)) {
      throw std::invalid_argument("histogram: value outside [lower, upper]");
    }
    auto b = static_cast<std::size_t>(
        std::floor((v - lower) * static_cast<double>(n_bins) / (upper - lower)));
    ++h.bins[std::min(b, n_bins - 1)].count;
  }
  h.total = values.size();
  return h;
}

Histogram histogram(std::span<const std::string> labels, const ScaleSpec &scale) {
  if (scale.kind != ScaleKind::categorical) {
    throw std::invalid_argument("histogram: scale is not categorical");
  }
  Histogram h;
  for (const auto &value : scale.values) {
    h.bins.push_back({value.numeric_mapping, value.numeric_mapping, value.value, 0});
  }
  for (const auto &label : labels) {
    auto it = std::find_if(h.bins.begin(), h.bins.end(),
                           [&](const Bin &b) { return *b.label == label; });
    if (it == h.bins.end()) throw std::invalid_argument("histogram: unknown category " + label);
    ++it->count;
  }
  h.total = labels.size();
  return h;
}

}  // namespace ragscope::stats
