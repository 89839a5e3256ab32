#include "ragscope/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <stdexcept>

#include "ragscope/errors.hpp"

namespace ragscope {

namespace {

const MetricMeta &require_metric(const AugmentedExperiment &aug, const std::string &metric_id) {
  const MetricMeta *metric = aug.experiment.find_metric(metric_id);
  if (metric == nullptr) throw NotFound("unknown metric: " + metric_id);
  return *metric;
}

void require_model(const AugmentedExperiment &aug, const std::string &model_id) {
  if (aug.experiment.find_model(model_id) == nullptr) {
    throw NotFound("unknown model: " + model_id);
  }
}

template <typename T>
Json optional_json(const std::optional<T> &value) {
  if (!value) return nullptr;
  return *value;
}

Json agreement_json(const std::optional<stats::AgreementLevel> &level) {
  return level ? Json(stats::to_string(*level)) : Json(nullptr);
}

}  // namespace

// ---- overview ----

std::optional<MetricType> parse_metric_type(const std::string &text) {
  if (text == "human") return MetricType::human;
  if (text == "algorithmic") return MetricType::algorithmic;
  if (text == "all") return MetricType::all;
  return std::nullopt;
}

const char *to_string(MetricType type) {
  switch (type) {
    case MetricType::human: return "human";
    case MetricType::algorithmic: return "algorithmic";
    case MetricType::all: return "all";
  }
  return "all";
}

bool matches(MetricType type, const MetricMeta &metric) {
  switch (type) {
    case MetricType::human: return metric.is_human();
    case MetricType::algorithmic: return !metric.is_human();
    case MetricType::all: return true;
  }
  return true;
}

OverviewView overview(const AugmentedExperiment &aug, MetricType type) {
  OverviewView view;
  view.type = type;
  std::vector<const MetricMeta *> selected;
  for (const auto &metric : aug.experiment.metrics) {
    if (!matches(type, metric)) continue;
    selected.push_back(&metric);
    view.metric_ids.push_back(metric.metric_id);
  }
  for (const auto &row : aug.model_metrics) {
    if (std::find(view.metric_ids.begin(), view.metric_ids.end(), row.metric_id) !=
        view.metric_ids.end()) {
      view.rows.push_back(row);
    }
  }
  for (const auto &model : aug.experiment.models) {
    RadarSeries series{model.model_id, {}};
    for (const MetricMeta *metric : selected) {
      const ModelMetricAggregate *row = aug.model_metric(model.model_id, metric->metric_id);
      const double lo = metric->scale.lower();
      const double hi = metric->scale.upper();
      if (row == nullptr || !(hi > lo)) {
        series.values.emplace_back();
        continue;
      }
      double scaled = std::clamp((row->mean - lo) / (hi - lo), 0.0, 1.0);
      if (!metric->higher_is_better) scaled = 1.0 - scaled;
      series.values.emplace_back(scaled);
    }
    view.radar.push_back(std::move(series));
  }
  return view;
}

// ---- predictions ----

PredictionsPage list_predictions(const AugmentedExperiment &aug, std::size_t page,
                                 std::size_t page_size, const PredictionSort &sort) {
  if (page < 1) throw std::invalid_argument("page must be at least 1");
  if (page_size < 1) throw std::invalid_argument("page_size must be at least 1");
  const auto &file = aug.experiment;

  std::vector<const Task *> order;
  for (const auto &task : file.tasks) order.push_back(&task);

  if (sort.key == PredictionSort::Key::response_length) {
    require_model(aug, sort.model_id);
    auto length = [&](const Task *task) -> long {
      const Evaluation *eval = file.find_evaluation(task->task_id, sort.model_id);
      return eval == nullptr ? -1 : static_cast<long>(eval->model_response.size());
    };
    std::sort(order.begin(), order.end(), [&](const Task *a, const Task *b) {
      const long la = length(a);
      const long lb = length(b);
      if (la != lb) return sort.descending ? la > lb : la < lb;
      return a->task_id < b->task_id;
    });
  } else {
    std::sort(order.begin(), order.end(), [&](const Task *a, const Task *b) {
      return sort.descending ? a->task_id > b->task_id : a->task_id < b->task_id;
    });
  }

  PredictionsPage out;
  out.page = page;
  out.page_size = page_size;
  out.total = order.size();
  if (page - 1 >= (order.size() + page_size - 1) / page_size) return out;
  const std::size_t begin = (page - 1) * page_size;
  const std::size_t end = std::min(order.size(), begin + page_size);
  for (std::size_t i = begin; i < end; ++i) {
    const Task &task = *order[i];
    PredictionRow row{task.task_id, task.input, {}};
    for (const auto &model : file.models) {
      if (const Evaluation *eval = file.find_evaluation(task.task_id, model.model_id)) {
        row.responses.emplace_back(model.model_id, eval->model_response);
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---- filtering ----

FilterSpec parse_filter(const Json &json) {
  if (json.is_null()) return {};
  if (!json.is_object()) throw std::invalid_argument("filter must be an object");
  FilterSpec spec;
  for (const auto &[key, value] : json.items()) {
    if (key == "metadata") {
      if (!value.is_object()) throw std::invalid_argument("filter.metadata must be an object");
      for (const auto &[mk, mv] : value.items()) {
        if (!mv.is_string()) throw std::invalid_argument("filter.metadata values must be strings");
        spec.metadata[mk] = mv.get<std::string>();
      }
    } else if (key == "scores") {
      if (!value.is_array()) throw std::invalid_argument("filter.scores must be an array");
      for (const auto &s : value) {
        if (!s.is_object() || !s.contains("metric") || !s["metric"].is_string() ||
            !s.contains("min") || !s["min"].is_number() || !s.contains("max") ||
            !s["max"].is_number()) {
          throw std::invalid_argument("filter.scores entries need metric, min and max");
        }
        ScoreRange range{s["metric"].get<std::string>(), std::nullopt, s["min"].get<double>(),
                         s["max"].get<double>()};
        if (s.contains("model")) {
          if (!s["model"].is_string()) throw std::invalid_argument("filter.scores model");
          range.model_id = s["model"].get<std::string>();
        }
        spec.scores.push_back(std::move(range));
      }
    } else if (key == "agreement") {
      if (!value.is_array()) throw std::invalid_argument("filter.agreement must be an array");
      for (const auto &a : value) {
        if (!a.is_object() || !a.contains("metric") || !a["metric"].is_string() ||
            !a.contains("levels") || !a["levels"].is_array()) {
          throw std::invalid_argument("filter.agreement entries need metric and levels");
        }
        AgreementPredicate predicate{a["metric"].get<std::string>(), {}};
        for (const auto &level : a["levels"]) {
          auto parsed = level.is_string() ? stats::parse_agreement_level(level.get<std::string>())
                                          : std::nullopt;
          if (!parsed) throw std::invalid_argument("unknown agreement level");
          predicate.levels.insert(*parsed);
        }
        spec.agreement.push_back(std::move(predicate));
      }
    } else if (key == "models") {
      if (!value.is_array()) throw std::invalid_argument("filter.models must be an array");
      std::set<std::string> models;
      for (const auto &m : value) {
        if (!m.is_string()) throw std::invalid_argument("filter.models entries must be strings");
        models.insert(m.get<std::string>());
      }
      spec.models = std::move(models);
    } else {
      throw std::invalid_argument("unknown filter field: " + key);
    }
  }
  return spec;
}

InstanceFilter InstanceFilter::build(const AugmentedExperiment &aug, FilterSpec spec) {
  const auto &dists = aug.dataset.distributions;
  for (const auto &[key, value] : spec.metadata) {
    if (!dists.count(key)) throw std::invalid_argument("unknown metadata key: " + key);
  }
  for (const auto &range : spec.scores) {
    if (aug.experiment.find_metric(range.metric_id) == nullptr) {
      throw std::invalid_argument("unknown metric in filter: " + range.metric_id);
    }
    if (range.model_id && aug.experiment.find_model(*range.model_id) == nullptr) {
      throw std::invalid_argument("unknown model in filter: " + *range.model_id);
    }
  }
  for (const auto &predicate : spec.agreement) {
    if (aug.experiment.find_metric(predicate.metric_id) == nullptr) {
      throw std::invalid_argument("unknown metric in filter: " + predicate.metric_id);
    }
  }
  if (spec.models) {
    for (const auto &model_id : *spec.models) {
      if (aug.experiment.find_model(model_id) == nullptr) {
        throw std::invalid_argument("unknown model in filter: " + model_id);
      }
    }
  }
  return InstanceFilter(std::move(spec));
}

bool InstanceFilter::matches(const AugmentedExperiment &aug, const Task &task,
                             const std::string &model_id) const {
  for (const auto &[key, value] : spec_.metadata) {
    auto it = task.metadata.find(key);
    const std::string &actual = it == task.metadata.end() ? kMissingValue : it->second;
    if (actual != value) return false;
  }
  if (spec_.models && !spec_.models->count(model_id)) return false;
  for (const auto &range : spec_.scores) {
    const CellAggregate *cell =
        aug.cell(task.task_id, range.model_id.value_or(model_id), range.metric_id);
    if (cell == nullptr || cell->value < range.min || cell->value > range.max) return false;
  }
  for (const auto &predicate : spec_.agreement) {
    const CellAggregate *cell = aug.cell(task.task_id, model_id, predicate.metric_id);
    if (cell == nullptr || !cell->agreement || !predicate.levels.count(*cell->agreement)) {
      return false;
    }
  }
  return true;
}

// ---- model behavior ----

std::optional<BehaviorSort> parse_behavior_sort(const std::string &text) {
  if (text == "task_id") return BehaviorSort::task_id;
  if (text == "score") return BehaviorSort::score;
  if (text == "agreement") return BehaviorSort::agreement;
  return std::nullopt;
}

std::string histogram_category(const MetricMeta &metric, const CellAggregate &cell) {
  if (cell.majority_value) return *cell.majority_value;
  const auto &values = metric.scale.values;
  const CategoricalValue *best = &values.front();
  for (const auto &v : values) {
    if (std::abs(v.numeric_mapping - cell.value) < std::abs(best->numeric_mapping - cell.value)) {
      best = &v;
    }
  }
  return best->value;
}

ModelBehaviorView model_behavior(const AugmentedExperiment &aug, const std::string &model_id,
                                 const std::string &metric_id, const InstanceFilter &filter,
                                 BehaviorSort sort, bool descending) {
  require_model(aug, model_id);
  const MetricMeta &metric = require_metric(aug, metric_id);

  ModelBehaviorView view;
  view.model_id = model_id;
  view.metric_id = metric_id;
  std::vector<double> values;
  std::vector<std::string> categories;
  for (const auto &task : aug.experiment.tasks) {
    const CellAggregate *cell = aug.cell(task.task_id, model_id, metric_id);
    if (cell == nullptr || !filter.matches(aug, task, model_id)) continue;
    values.push_back(cell->value);
    if (metric.scale.kind == ScaleKind::categorical) {
      categories.push_back(histogram_category(metric, *cell));
    }
    view.rows.push_back(
        {task.task_id, cell->value, cell->n_annotators, cell->agreement, cell->majority_value});
  }

  if (metric.scale.kind == ScaleKind::categorical) {
    view.histogram = stats::histogram(categories, metric.scale);
  } else {
    view.histogram =
        stats::histogram(values, kDefaultHistogramBins, metric.scale.min, metric.scale.max);
  }

  auto agreement_rank = [](const BehaviorRow &row) {
    return row.agreement ? static_cast<int>(*row.agreement) : 3;
  };
  std::stable_sort(view.rows.begin(), view.rows.end(),
                   [&](const BehaviorRow &a, const BehaviorRow &b) {
                     switch (sort) {
                       case BehaviorSort::score:
                         if (a.value != b.value) {
                           return descending ? a.value > b.value : a.value < b.value;
                         }
                         break;
                       case BehaviorSort::agreement: {
                         const int ra = agreement_rank(a);
                         const int rb = agreement_rank(b);
                         if (ra != rb) return descending ? ra > rb : ra < rb;
                         break;
                       }
                       case BehaviorSort::task_id:
                         return descending ? a.task_id > b.task_id : a.task_id < b.task_id;
                     }
                     return a.task_id < b.task_id;
                   });
  return view;
}

// ---- instance detail ----

InstanceDetail instance_detail(const AugmentedExperiment &aug, const std::string &task_id) {
  InstanceDetail detail{resolve_task(aug.experiment, task_id), {}};
  for (const auto &model : aug.experiment.models) {
    for (const auto &metric : aug.experiment.metrics) {
      if (const CellAggregate *cell = aug.cell(task_id, model.model_id, metric.metric_id)) {
        detail.cells.push_back(*cell);
      }
    }
  }
  return detail;
}

// ---- comparator ----

CompareConfig default_compare_config(const AugmentedExperiment &aug) {
  CompareConfig config;
  config.test.iterations = aug.config.iterations;
  config.test.seed = aug.config.seed;
  config.test.exhaustive_threshold = aug.config.exhaustive_threshold;
  return config;
}

ComparisonView compare_models(const AugmentedExperiment &aug, const std::string &model_a,
                              const std::string &model_b, const std::string &metric_id,
                              const CompareConfig &config) {
  require_model(aug, model_a);
  require_model(aug, model_b);
  require_metric(aug, metric_id);

  ComparisonView view;
  view.model_a = model_a;
  view.model_b = model_b;
  view.metric_id = metric_id;
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto &task : aug.experiment.tasks) {
    const CellAggregate *a = aug.cell(task.task_id, model_a, metric_id);
    const CellAggregate *b = aug.cell(task.task_id, model_b, metric_id);
    if (a == nullptr || b == nullptr) continue;
    view.points.push_back({task.task_id, a->value, b->value});
    xs.push_back(a->value);
    ys.push_back(b->value);
  }
  if (view.points.size() < 2) {
    throw Unprocessable("models share " + std::to_string(view.points.size()) +
                        " scored instance(s) on " + metric_id + "; at least 2 are needed");
  }
  view.result = stats::fisher_randomization_test(xs, ys, config.test);

  std::vector<ScatterPoint> by_gap = view.points;
  std::stable_sort(by_gap.begin(), by_gap.end(), [](const ScatterPoint &p, const ScatterPoint &q) {
    const double gp = std::abs(p.x - p.y);
    const double gq = std::abs(q.x - q.y);
    if (gp != gq) return gp < gq;
    return p.task_id < q.task_id;
  });
  const std::size_t k = std::min(config.k, by_gap.size());
  view.similar.assign(by_gap.begin(), by_gap.begin() + static_cast<long>(k));
  std::stable_sort(by_gap.begin(), by_gap.end(), [](const ScatterPoint &p, const ScatterPoint &q) {
    const double gp = std::abs(p.x - p.y);
    const double gq = std::abs(q.x - q.y);
    if (gp != gq) return gp > gq;
    return p.task_id < q.task_id;
  });
  view.dissimilar.assign(by_gap.begin(), by_gap.begin() + static_cast<long>(k));
  return view;
}

// ---- metrics, annotators, dataset ----

const CorrelationMatrix &metric_behavior(const AugmentedExperiment &aug) {
  if (aug.experiment.metrics.size() < 2) {
    throw Unprocessable("metric behavior needs at least two metrics");
  }
  return aug.metric_correlations;
}

AnnotatorReport annotator_report(const AugmentedExperiment &aug) {
  AnnotatorReport report;
  report.empty = aug.metric_kappa.empty();
  if (report.empty) return report;
  for (const auto &model : aug.experiment.models) {
    AgreementCounts counts{};
    for (const auto &row : aug.model_metrics) {
      if (row.model_id != model.model_id || !row.agreement_distribution) continue;
      for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += (*row.agreement_distribution)[i];
    }
    report.per_model.emplace_back(model.model_id, counts);
  }
  report.global_kappa = aug.global_kappa;
  report.per_metric_kappa = aug.metric_kappa;
  report.profiles = aug.annotator_profiles;
  return report;
}

const DatasetCharacteristics &dataset_view(const AugmentedExperiment &aug) { return aug.dataset; }

// ---- annotations ----

std::optional<AnnotationKind> parse_annotation_kind(const std::string &text) {
  if (text == "flag") return AnnotationKind::flag;
  if (text == "comment") return AnnotationKind::comment;
  return std::nullopt;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void AnnotationStore::annotate(const AugmentedExperiment &aug, InstanceAnnotation annotation) {
  if (aug.experiment.find_task(annotation.task_id) == nullptr) {
    throw NotFound("unknown task: " + annotation.task_id);
  }
  if (annotation.kind == AnnotationKind::comment &&
      (!annotation.text || annotation.text->empty())) {
    throw std::invalid_argument("a comment needs non-empty text");
  }
  if (annotation.created_at.empty()) annotation.created_at = utc_now_iso8601();
  std::lock_guard lock(mutex_);
  annotations_.push_back(std::move(annotation));
}

std::vector<InstanceAnnotation> AnnotationStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return annotations_;
}

Json AnnotationStore::export_json(const AugmentedExperiment &aug) const {
  const auto annotations = snapshot();
  Json by_task = Json::object();
  for (const auto &task : aug.experiment.tasks) {
    Json entries = Json::array();
    for (const auto &a : annotations) {
      if (a.task_id != task.task_id) continue;
      Json entry = {{"kind", a.kind == AnnotationKind::flag ? "flag" : "comment"}};
      if (a.text) entry["text"] = *a.text;
      if (a.author) entry["author"] = *a.author;
      entry["created_at"] = a.created_at;
      entries.push_back(std::move(entry));
    }
    if (!entries.empty()) by_task[task.task_id] = std::move(entries);
  }
  return {{"experiment", aug.experiment.name},
          {"count", annotations.size()},
          {"annotations", std::move(by_task)}};
}

// ---- payloads ----

Json to_json(const OverviewView &view) {
  Json rows = Json::array();
  for (const auto &row : view.rows) rows.push_back(to_json(row));
  Json radar = Json::array();
  for (const auto &series : view.radar) {
    Json values = Json::array();
    for (const auto &v : series.values) values.push_back(optional_json(v));
    radar.push_back({{"model_id", series.model_id}, {"values", std::move(values)}});
  }
  return {{"type", to_string(view.type)},
          {"metrics", view.metric_ids},
          {"rows", std::move(rows)},
          {"radar", std::move(radar)}};
}

Json to_json(const PredictionsPage &page) {
  Json rows = Json::array();
  for (const auto &row : page.rows) {
    Json input = Json::array();
    for (const auto &turn : row.input) {
      input.push_back({{"speaker", to_string(turn.speaker)}, {"text", turn.text}});
    }
    Json responses = Json::object();
    for (const auto &[model_id, response] : row.responses) responses[model_id] = response;
    rows.push_back(
        {{"task_id", row.task_id}, {"input", std::move(input)}, {"responses", std::move(responses)}});
  }
  return {{"page", page.page},
          {"page_size", page.page_size},
          {"total", page.total},
          {"rows", std::move(rows)}};
}

Json to_json(const ModelBehaviorView &view) {
  Json rows = Json::array();
  for (const auto &row : view.rows) {
    rows.push_back({{"task_id", row.task_id},
                    {"value", row.value},
                    {"n_annotators", row.n_annotators},
                    {"agreement", agreement_json(row.agreement)},
                    {"majority_value", optional_json(row.majority_value)}});
  }
  return {{"model_id", view.model_id},
          {"metric_id", view.metric_id},
          {"histogram", to_json(view.histogram)},
          {"rows", std::move(rows)}};
}

Json to_json(const InstanceDetail &detail) {
  const auto &resolved = detail.resolved;
  Json documents = Json::array();
  for (const auto &doc : resolved.documents) documents.push_back(to_json(doc));
  Json models = Json::array();
  for (const auto &eval : resolved.evaluations) {
    Json scores = Json::array();
    for (const auto &cell : detail.cells) {
      if (cell.model_id != eval.model_id) continue;
      scores.push_back({{"metric_id", cell.metric_id},
                        {"value", cell.value},
                        {"n_annotators", cell.n_annotators},
                        {"agreement", agreement_json(cell.agreement)},
                        {"majority_value", optional_json(cell.majority_value)}});
    }
    models.push_back({{"model_id", eval.model_id},
                      {"model_response", eval.model_response},
                      {"annotations", to_json(eval)["annotations"]},
                      {"scores", std::move(scores)}});
  }
  return {{"task", to_json(resolved.task)},
          {"documents", std::move(documents)},
          {"models", std::move(models)}};
}

namespace {

Json points_json(const std::vector<ScatterPoint> &points) {
  Json list = Json::array();
  for (const auto &p : points) list.push_back({{"task_id", p.task_id}, {"a", p.x}, {"b", p.y}});
  return list;
}

}  // namespace

Json to_json(const ComparisonView &view) {
  return {{"model_a", view.model_a},
          {"model_b", view.model_b},
          {"metric_id", view.metric_id},
          {"result", to_json(view.result)},
          {"points", points_json(view.points)},
          {"similar", points_json(view.similar)},
          {"dissimilar", points_json(view.dissimilar)}};
}

Json to_json(const AnnotatorReport &report) {
  if (report.empty) return {{"empty", true}};
  Json per_model = Json::array();
  for (const auto &[model_id, counts] : report.per_model) {
    per_model.push_back({{"model_id", model_id}, {"agreement", agreement_counts_json(counts)}});
  }
  Json per_metric = Json::object();
  for (const auto &[metric_id, matrix] : report.per_metric_kappa) {
    per_metric[metric_id] = to_json(matrix);
  }
  Json profiles = Json::array();
  for (const auto &p : report.profiles) profiles.push_back(to_json(p));
  return {{"empty", false},
          {"per_model", std::move(per_model)},
          {"kappa",
           {{"global", report.global_kappa ? to_json(*report.global_kappa) : Json(nullptr)},
            {"per_metric", std::move(per_metric)}}},
          {"profiles", std::move(profiles)}};
}

}  // namespace ragscope
