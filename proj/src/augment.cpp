#include "ragscope/augment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace ragscope {

InvalidExperiment::InvalidExperiment(ValidationReport report)
    : std::runtime_error("experiment has " + std::to_string(report.errors.size()) +
                         " validation error(s)"),
      report_(std::move(report)) {}

std::size_t token_count(const std::string &text) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string token; in >> token;) ++n;
  return n;
}

DatasetCharacteristics compute_dataset_characteristics(const ExperimentFile &file) {
  DatasetCharacteristics out;
  out.n_tasks = file.tasks.size();

  std::set<std::string> keys;
  for (const auto &task : file.tasks) {
    for (const auto &[key, value] : task.metadata) keys.insert(key);
  }
  for (const auto &key : keys) {
    auto &dist = out.distributions[key];
    for (const auto &task : file.tasks) {
      auto it = task.metadata.find(key);
      ++dist[it == task.metadata.end() ? kMissingValue : it->second];
    }
  }

  if (file.tasks.empty()) return out;
  std::vector<double> lengths;
  for (const auto &task : file.tasks) {
    lengths.push_back(static_cast<double>(token_count(task.question())));
  }
  QuestionLengthSummary summary;
  const auto [lo, hi] = std::minmax_element(lengths.begin(), lengths.end());
  summary.min = static_cast<std::size_t>(*lo);
  summary.max = static_cast<std::size_t>(*hi);
  summary.mean = stats::aggregate_numeric(lengths).mean;
  const double upper = *hi > *lo ? *hi : *lo + 1.0;
  summary.histogram = stats::histogram(lengths, 10, *lo, upper);
  out.question_length = std::move(summary);
  return out;
}

namespace {

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Categories for kappa: declared values for categorical scales, observed
// labels for numeric ones.
std::vector<std::string> categories_for(const MetricMeta &metric,
                                        const std::vector<CellAggregate> &cells) {
  std::vector<std::string> categories;
  if (metric.scale.kind == ScaleKind::categorical) {
    for (const auto &v : metric.scale.values) categories.push_back(v.value);
    return categories;
  }
  std::set<std::string> seen;
  for (const auto &cell : cells) {
    if (cell.metric_id != metric.metric_id) continue;
    seen.insert(cell.labels.begin(), cell.labels.end());
  }
  return {seen.begin(), seen.end()};
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return (values[mid - 1] + values[mid]) / 2.0;
}

void rank_models(std::vector<ModelMetricAggregate *> &rows, bool higher_is_better) {
  std::stable_sort(rows.begin(), rows.end(), [&](const auto *a, const auto *b) {
    return higher_is_better ? a->mean > b->mean : a->mean < b->mean;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && nearly_equal(rows[i]->mean, rows[i - 1]->mean)) {
      rows[i]->rank = rows[i - 1]->rank;
    } else {
      rows[i]->rank = i + 1;
    }
  }
}

}  // namespace

const CellAggregate *AugmentedExperiment::cell(const std::string &task_id,
                                               const std::string &model_id,
                                               const std::string &metric_id) const {
  auto it = cell_index_.find({task_id, model_id, metric_id});
  return it == cell_index_.end() ? nullptr : &cells[it->second];
}

const ModelMetricAggregate *AugmentedExperiment::model_metric(const std::string &model_id,
                                                              const std::string &metric_id) const {
  auto it = std::find_if(model_metrics.begin(), model_metrics.end(), [&](const auto &row) {
    return row.model_id == model_id && row.metric_id == metric_id;
  });
  return it == model_metrics.end() ? nullptr : &*it;
}

AugmentedExperiment augment(ExperimentFile file, const AugmentConfig &config) {
  ValidationReport report = validate(file);
  if (!report.valid()) throw InvalidExperiment(std::move(report));

  AugmentedExperiment aug;
  aug.config = config;
  aug.warnings = std::move(report.warnings);

  // Cells, in evaluation order then metric declaration order.
  for (const auto &eval : file.evaluations) {
    for (const auto &metric : file.metrics) {
      auto it = eval.annotations.find(metric.metric_id);
      if (it == eval.annotations.end() || it->second.empty()) continue;
      CellAggregate cell;
      cell.task_id = eval.task_id;
      cell.model_id = eval.model_id;
      cell.metric_id = metric.metric_id;
      std::vector<double> mapped;
      for (const auto &[annotator, rating] : it->second) {
        mapped.push_back(*numeric_value(metric, rating.value));
        cell.annotators.push_back(annotator);
        cell.labels.push_back(rating_label(rating.value));
      }
      cell.n_annotators = mapped.size();
      cell.value = stats::aggregate_numeric(mapped).mean;
      if (metric.is_human() && cell.n_annotators >= 2) {
        cell.agreement = stats::agreement_level(cell.labels);
      }
      if (metric.scale.kind == ScaleKind::categorical) {
        cell.majority_value = stats::majority_label(cell.labels);
      }
      aug.cell_index_[{cell.task_id, cell.model_id, cell.metric_id}] = aug.cells.size();
      aug.cells.push_back(std::move(cell));
    }
  }

  // Model x metric aggregates and rankings.
  for (const auto &metric : file.metrics) {
    const std::size_t first = aug.model_metrics.size();
    for (const auto &model : file.models) {
      std::vector<double> values;
      AgreementCounts counts{};
      for (const auto &cell : aug.cells) {
        if (cell.model_id != model.model_id || cell.metric_id != metric.metric_id) continue;
        values.push_back(cell.value);
        if (cell.agreement) ++counts[static_cast<std::size_t>(*cell.agreement)];
      }
      if (values.empty()) continue;
      const auto summary = stats::aggregate_numeric(values);
      ModelMetricAggregate row;
      row.model_id = model.model_id;
      row.metric_id = metric.metric_id;
      row.mean = summary.mean;
      row.std = summary.std;
      row.n_instances = summary.n;
      if (metric.is_human()) row.agreement_distribution = counts;
      aug.model_metrics.push_back(std::move(row));
    }
    std::vector<ModelMetricAggregate *> rows;
    for (std::size_t i = first; i < aug.model_metrics.size(); ++i) {
      rows.push_back(&aug.model_metrics[i]);
    }
    rank_models(rows, metric.higher_is_better);
  }

  // Kappa matrices: per human metric, per model x human metric, and pooled.
  stats::LabelTable pooled;
  std::set<std::string> pooled_categories;
  for (const auto &metric : file.metrics) {
    if (!metric.is_human()) continue;
    const auto categories = categories_for(metric, aug.cells);
    stats::LabelTable table;
    std::map<std::string, stats::LabelTable> per_model;
    for (const auto &cell : aug.cells) {
      if (cell.metric_id != metric.metric_id) continue;
      const std::string cell_id = cell.task_id + '\x1f' + cell.model_id;
      for (std::size_t a = 0; a < cell.annotators.size(); ++a) {
        table[cell.annotators[a]][cell_id] = cell.labels[a];
        per_model[cell.model_id][cell.annotators[a]][cell_id] = cell.labels[a];
        pooled[cell.annotators[a]][cell_id + '\x1f' + metric.metric_id] =
            metric.metric_id + ':' + cell.labels[a];
      }
    }
    for (const auto &c : categories) pooled_categories.insert(metric.metric_id + ':' + c);
    if (table.size() >= 2) {
      aug.metric_kappa.emplace(metric.metric_id, stats::pairwise_kappa_matrix(table, categories));
    }
    for (const auto &[model_id, model_table] : per_model) {
      if (model_table.size() < 2) continue;
      aug.model_metric_kappa[model_id].emplace(
          metric.metric_id, stats::pairwise_kappa_matrix(model_table, categories));
    }
  }
  if (pooled.size() >= 2) {
    const std::vector<std::string> categories(pooled_categories.begin(), pooled_categories.end());
    aug.global_kappa = stats::pairwise_kappa_matrix(pooled, categories);
  }

  // Annotator profiles over human metrics.
  std::map<std::string, AnnotatorProfile> profiles;
  std::map<std::string, std::size_t> agreed;
  std::map<std::string, std::vector<double>> durations;
  for (const auto &eval : file.evaluations) {
    for (const auto &metric : file.metrics) {
      if (!metric.is_human()) continue;
      auto it = eval.annotations.find(metric.metric_id);
      if (it == eval.annotations.end()) continue;
      for (const auto &[annotator, rating] : it->second) {
        auto &profile = profiles[annotator];
        profile.annotator_id = annotator;
        ++profile.n_ratings;
        if (rating.duration_seconds) durations[annotator].push_back(*rating.duration_seconds);
      }
    }
  }
  for (const auto &cell : aug.cells) {
    const MetricMeta *metric = file.find_metric(cell.metric_id);
    if (!metric->is_human() || cell.n_annotators < 2) continue;
    const auto majority = stats::majority_label(cell.labels);
    if (!majority) continue;
    for (std::size_t a = 0; a < cell.annotators.size(); ++a) {
      ++profiles[cell.annotators[a]].n_majority_cells;
      if (cell.labels[a] == *majority) ++agreed[cell.annotators[a]];
    }
  }
  for (auto &[annotator, profile] : profiles) {
    if (profile.n_majority_cells > 0) {
      profile.contribution = static_cast<double>(agreed[annotator]) /
                             static_cast<double>(profile.n_majority_cells);
    }
    const auto &d = durations[annotator];
    if (!d.empty()) {
      profile.mean_duration_seconds = stats::aggregate_numeric(d).mean;
      profile.median_duration_seconds = median(d);
    }
    if (aug.global_kappa) {
      const auto &names = aug.global_kappa->annotators;
      auto pos = std::find(names.begin(), names.end(), annotator);
      if (pos != names.end()) {
        profile.mean_kappa =
            aug.global_kappa->mean_kappa(static_cast<std::size_t>(pos - names.begin()));
      }
    }
    aug.annotator_profiles.push_back(profile);
  }

  // Metric correlations over per-instance values paired at (task, model).
  auto &corr = aug.metric_correlations;
  for (const auto &metric : file.metrics) corr.metric_ids.push_back(metric.metric_id);
  const std::size_t m = corr.metric_ids.size();
  corr.entries.assign(m, std::vector<Correlation>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      std::vector<double> x;
      std::vector<double> y;
      for (const auto &eval : file.evaluations) {
        const CellAggregate *a = aug.cell(eval.task_id, eval.model_id, corr.metric_ids[i]);
        const CellAggregate *b = aug.cell(eval.task_id, eval.model_id, corr.metric_ids[j]);
        if (a == nullptr || b == nullptr) continue;
        x.push_back(a->value);
        y.push_back(b->value);
      }
      Correlation c;
      c.n = x.size();
      if (c.n >= 2) c.rho = stats::spearman(x, y);
      corr.entries[i][j] = c;
      corr.entries[j][i] = c;
    }
  }

  aug.dataset = compute_dataset_characteristics(file);
  aug.experiment = std::move(file);
  return aug;
}

namespace {

template <typename T>
Json optional_json(const std::optional<T> &value) {
  if (!value) return nullptr;
  return *value;
}

}  // namespace

Json to_json(const stats::KappaResult &result) {
  return {{"kappa", result.kappa},
          {"observed_agreement", result.observed_agreement},
          {"expected_agreement", result.expected_agreement},
          {"n_items", result.n_items}};
}

Json to_json(const stats::KappaMatrix &matrix) {
  Json rows = Json::array();
  for (const auto &row : matrix.entries) {
    Json r = Json::array();
    for (const auto &entry : row) r.push_back(entry ? to_json(*entry) : Json(nullptr));
    rows.push_back(std::move(r));
  }
  return {{"annotators", matrix.annotators}, {"entries", std::move(rows)}};
}

Json to_json(const stats::Histogram &histogram) {
  Json bins = Json::array();
  for (const auto &bin : histogram.bins) {
    Json b = Json::object();
    if (bin.label) {
      b["label"] = *bin.label;
      b["numeric_mapping"] = bin.lower;
    } else {
      b["lower"] = bin.lower;
      b["upper"] = bin.upper;
    }
    b["count"] = bin.count;
    bins.push_back(std::move(b));
  }
  return {{"bins", std::move(bins)}, {"total", histogram.total}};
}

Json to_json(const stats::ComparisonResult &result) {
  Json j = {{"observed_diff", result.observed_diff},
            {"p_value", result.p_value},
            {"method", stats::to_string(result.method)},
            {"iterations", result.iterations},
            {"seed", result.seed},
            {"n_pairs", result.n_pairs}};
  if (result.method == stats::TestMethod::monte_carlo) {
    j["generator"] = stats::kRandomizationGenerator;
  }
  return j;
}

Json to_json(const CorrelationMatrix &matrix) {
  Json rows = Json::array();
  for (const auto &row : matrix.entries) {
    Json r = Json::array();
    for (const auto &c : row) r.push_back({{"rho", optional_json(c.rho)}, {"n", c.n}});
    rows.push_back(std::move(r));
  }
  return {{"metrics", matrix.metric_ids}, {"entries", std::move(rows)}};
}

Json to_json(const DatasetCharacteristics &characteristics) {
  Json dists = Json::object();
  for (const auto &[key, counts] : characteristics.distributions) {
    Json d = Json::object();
    for (const auto &[value, n] : counts) d[value] = n;
    dists[key] = std::move(d);
  }
  Json j = {{"n_tasks", characteristics.n_tasks}, {"distributions", std::move(dists)}};
  if (const auto &ql = characteristics.question_length) {
    j["question_length"] = {{"min", ql->min},
                            {"mean", ql->mean},
                            {"max", ql->max},
                            {"histogram", to_json(ql->histogram)}};
  } else {
    j["question_length"] = nullptr;
  }
  return j;
}

Json agreement_counts_json(const AgreementCounts &counts) {
  Json j = Json::object();
  for (auto level : stats::kAgreementLevels) {
    j[stats::to_string(level)] = counts[static_cast<std::size_t>(level)];
  }
  return j;
}

Json to_json(const ModelMetricAggregate &aggregate) {
  Json j = {{"model_id", aggregate.model_id},
            {"metric_id", aggregate.metric_id},
            {"mean", aggregate.mean},
            {"std", aggregate.std},
            {"n_instances", aggregate.n_instances},
            {"rank", aggregate.rank}};
  j["agreement_distribution"] = aggregate.agreement_distribution
                                    ? agreement_counts_json(*aggregate.agreement_distribution)
                                    : Json(nullptr);
  return j;
}

Json to_json(const AnnotatorProfile &profile) {
  return {{"annotator_id", profile.annotator_id},
          {"n_ratings", profile.n_ratings},
          {"n_majority_cells", profile.n_majority_cells},
          {"contribution", optional_json(profile.contribution)},
          {"mean_duration_seconds", optional_json(profile.mean_duration_seconds)},
          {"median_duration_seconds", optional_json(profile.median_duration_seconds)},
          {"mean_kappa", optional_json(profile.mean_kappa)}};
}

Json to_json(const CellAggregate &cell) {
  Json ratings = Json::object();
  for (std::size_t a = 0; a < cell.annotators.size(); ++a) {
    ratings[cell.annotators[a]] = cell.labels[a];
  }
  return {{"task_id", cell.task_id},
          {"model_id", cell.model_id},
          {"metric_id", cell.metric_id},
          {"value", cell.value},
          {"n_annotators", cell.n_annotators},
          {"agreement", cell.agreement ? Json(stats::to_string(*cell.agreement)) : Json(nullptr)},
          {"majority_value", optional_json(cell.majority_value)},
          {"ratings", std::move(ratings)}};
}

Json derived_to_json(const AugmentedExperiment &aug) {
  Json cells = Json::array();
  for (const auto &cell : aug.cells) cells.push_back(to_json(cell));

  Json aggregates = Json::array();
  for (const auto &row : aug.model_metrics) aggregates.push_back(to_json(row));

  Json per_metric = Json::object();
  for (const auto &[metric_id, matrix] : aug.metric_kappa) per_metric[metric_id] = to_json(matrix);
  Json per_model = Json::object();
  for (const auto &[model_id, by_metric] : aug.model_metric_kappa) {
    Json m = Json::object();
    for (const auto &[metric_id, matrix] : by_metric) m[metric_id] = to_json(matrix);
    per_model[model_id] = std::move(m);
  }

  Json profiles = Json::array();
  for (const auto &profile : aug.annotator_profiles) profiles.push_back(to_json(profile));

  Json warnings = Json::array();
  for (const auto &w : aug.warnings) {
    warnings.push_back({{"code", to_string(w.code)}, {"path", w.path}, {"message", w.message}});
  }

  return {{"config",
           {{"seed", aug.config.seed},
            {"iterations", aug.config.iterations},
            {"exhaustive_threshold", aug.config.exhaustive_threshold}}},
          {"warnings", std::move(warnings)},
          {"cell_aggregates", std::move(cells)},
          {"model_metric_aggregates", std::move(aggregates)},
          {"kappa_matrices",
           {{"global", aug.global_kappa ? to_json(*aug.global_kappa) : Json(nullptr)},
            {"per_metric", std::move(per_metric)},
            {"per_model_metric", std::move(per_model)}}},
          {"annotator_profiles", std::move(profiles)},
          {"metric_correlations", to_json(aug.metric_correlations)},
          {"dataset_characteristics", to_json(aug.dataset)}};
}

Json to_json(const AugmentedExperiment &aug) {
  Json root = to_json(aug.experiment);
  root["derived"] = derived_to_json(aug);
  return root;
}

}  // namespace ragscope
