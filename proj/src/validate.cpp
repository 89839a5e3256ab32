#include "ragscope/validate.hpp"

#include <cmath>
#include <map>
#include <set>

namespace ragscope {

const char *to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DUPLICATE_ID: return "DUPLICATE_ID";
    case ErrorCode::DANGLING_DOCUMENT_REF: return "DANGLING_DOCUMENT_REF";
    case ErrorCode::DANGLING_TASK_REF: return "DANGLING_TASK_REF";
    case ErrorCode::DANGLING_MODEL_REF: return "DANGLING_MODEL_REF";
    case ErrorCode::UNKNOWN_METRIC: return "UNKNOWN_METRIC";
    case ErrorCode::SCALE_VIOLATION: return "SCALE_VIOLATION";
    case ErrorCode::MISSING_EVALUATION: return "MISSING_EVALUATION";
    case ErrorCode::MISSING_SCORE: return "MISSING_SCORE";
    case ErrorCode::UNEVEN_ANNOTATORS: return "UNEVEN_ANNOTATORS";
    case ErrorCode::EMPTY_SECTION: return "EMPTY_SECTION";
  }
  return "UNKNOWN";
}

bool is_warning(ErrorCode code) {
  return code == ErrorCode::MISSING_SCORE || code == ErrorCode::UNEVEN_ANNOTATORS;
}

namespace {

class Collector {
 public:
  ValidationReport report;

  void add(ErrorCode code, std::string path, std::string message) {
    auto &list = is_warning(code) ? report.warnings : report.errors;
    list.push_back({code, std::move(path), std::move(message)});
  }
};

std::string at(const char *section, std::size_t i) {
  return std::string(section) + "[" + std::to_string(i) + "]";
}

template <typename T, typename Key>
void check_unique(Collector &out, const std::vector<T> &items, const char *section, Key key) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string &id = items[i].*key;
    if (!seen.insert(id).second) {
      out.add(ErrorCode::DUPLICATE_ID, at(section, i), "duplicate id \"" + id + "\"");
    }
  }
}

void check_scale(Collector &out, const MetricMeta &metric, std::size_t i) {
  const std::string path = at("metrics", i) + ".scale";
  const ScaleSpec &scale = metric.scale;
  if (scale.kind == ScaleKind::numeric) {
    if (!std::isfinite(scale.min) || !std::isfinite(scale.max) || !(scale.min < scale.max)) {
      out.add(ErrorCode::SCALE_VIOLATION, path, "numeric scale requires min < max");
    }
    return;
  }
  if (scale.values.empty()) {
    out.add(ErrorCode::SCALE_VIOLATION, path + ".values", "categorical scale has no values");
    return;
  }
  std::set<std::string> seen;
  for (std::size_t v = 0; v < scale.values.size(); ++v) {
    const auto &value = scale.values[v];
    const std::string vpath = path + ".values[" + std::to_string(v) + "]";
    if (!seen.insert(value.value).second) {
      out.add(ErrorCode::SCALE_VIOLATION, vpath, "duplicate scale value \"" + value.value + "\"");
    }
    if (v > 0 && !(value.numeric_mapping > scale.values[v - 1].numeric_mapping)) {
      out.add(ErrorCode::SCALE_VIOLATION, vpath + ".numeric_mapping",
              "numeric_mapping must increase strictly along the declared order");
    }
  }
}

}  // namespace

ValidationReport validate(const ExperimentFile &file) {
  Collector out;

  const std::pair<const char *, bool> sections[] = {
      {"models", file.models.empty()},
      {"metrics", file.metrics.empty()},
      {"tasks", file.tasks.empty()},
      {"evaluations", file.evaluations.empty()},
  };
  for (const auto &[name, empty] : sections) {
    if (empty) out.add(ErrorCode::EMPTY_SECTION, name, std::string("section is empty"));
  }

  check_unique(out, file.models, "models", &ModelMeta::model_id);
  check_unique(out, file.metrics, "metrics", &MetricMeta::metric_id);
  check_unique(out, file.documents, "documents", &Document::document_id);
  check_unique(out, file.tasks, "tasks", &Task::task_id);

  for (std::size_t i = 0; i < file.metrics.size(); ++i) check_scale(out, file.metrics[i], i);

  for (std::size_t i = 0; i < file.tasks.size(); ++i) {
    const Task &task = file.tasks[i];
    for (std::size_t c = 0; c < task.contexts.size(); ++c) {
      if (file.find_document(task.contexts[c]) == nullptr) {
        out.add(ErrorCode::DANGLING_DOCUMENT_REF,
                at("tasks", i) + ".contexts[" + std::to_string(c) + "]",
                "unknown document \"" + task.contexts[c] + "\"");
      }
    }
  }

  std::set<std::pair<std::string, std::string>> evaluated;
  // metrics that carry at least one rating somewhere
  std::set<std::string> scored_metrics;
  for (std::size_t i = 0; i < file.evaluations.size(); ++i) {
    const Evaluation &eval = file.evaluations[i];
    const std::string path = at("evaluations", i);
    if (file.find_task(eval.task_id) == nullptr) {
      out.add(ErrorCode::DANGLING_TASK_REF, path + ".task_id",
              "unknown task \"" + eval.task_id + "\"");
    }
    if (file.find_model(eval.model_id) == nullptr) {
      out.add(ErrorCode::DANGLING_MODEL_REF, path + ".model_id",
              "unknown model \"" + eval.model_id + "\"");
    }
    if (!evaluated.emplace(eval.task_id, eval.model_id).second) {
      out.add(ErrorCode::DUPLICATE_ID, path,
              "second evaluation for task \"" + eval.task_id + "\" and model \"" +
                  eval.model_id + "\"");
    }
    for (const auto &[metric_id, per_annotator] : eval.annotations) {
      const std::string mpath = path + ".annotations." + metric_id;
      const MetricMeta *metric = file.find_metric(metric_id);
      if (metric == nullptr) {
        out.add(ErrorCode::UNKNOWN_METRIC, mpath, "undeclared metric \"" + metric_id + "\"");
        continue;
      }
      if (!per_annotator.empty()) scored_metrics.insert(metric_id);
      for (const auto &[annotator_id, rating] : per_annotator) {
        if (!numeric_value(*metric, rating.value)) {
          out.add(ErrorCode::SCALE_VIOLATION, mpath + "." + annotator_id + ".value",
                  "value " + rating_label(rating.value) + " is outside the scale of \"" +
                      metric_id + "\"");
        }
      }
    }
  }

  // An empty evaluations section is reported once as EMPTY_SECTION rather than
  // once per task x model pair.
  if (!file.evaluations.empty()) {
    for (const auto &task : file.tasks) {
      for (const auto &model : file.models) {
        if (!evaluated.count({task.task_id, model.model_id})) {
          out.add(ErrorCode::MISSING_EVALUATION, "evaluations",
                  "no evaluation for task \"" + task.task_id + "\" and model \"" +
                      model.model_id + "\"");
        }
      }
    }
  }

  for (std::size_t i = 0; i < file.evaluations.size(); ++i) {
    const Evaluation &eval = file.evaluations[i];
    for (const auto &metric_id : scored_metrics) {
      auto it = eval.annotations.find(metric_id);
      if (it == eval.annotations.end() || it->second.empty()) {
        out.add(ErrorCode::MISSING_SCORE, at("evaluations", i) + ".annotations." + metric_id,
                "no score for metric \"" + metric_id + "\"");
      }
    }
  }

  for (const auto &metric : file.metrics) {
    if (!metric.is_human()) continue;
    std::map<std::size_t, std::size_t> frequency;
    for (const auto &eval : file.evaluations) {
      auto it = eval.annotations.find(metric.metric_id);
      if (it != eval.annotations.end() && !it->second.empty()) ++frequency[it->second.size()];
    }
    if (frequency.size() < 2) continue;
    std::size_t modal = 0;
    std::size_t best = 0;
    for (const auto &[count, times] : frequency) {
      if (times >= best) {
        best = times;
        modal = count;
      }
    }
    for (std::size_t i = 0; i < file.evaluations.size(); ++i) {
      auto it = file.evaluations[i].annotations.find(metric.metric_id);
      if (it == file.evaluations[i].annotations.end() || it->second.empty()) continue;
      if (it->second.size() != modal) {
        out.add(ErrorCode::UNEVEN_ANNOTATORS,
                at("evaluations", i) + ".annotations." + metric.metric_id,
                std::to_string(it->second.size()) + " annotators where most instances have " +
                    std::to_string(modal));
      }
    }
  }

  return std::move(out.report);
}

namespace {

Json issues_to_json(const std::vector<Issue> &issues) {
  Json list = Json::array();
  for (const auto &issue : issues) {
    list.push_back(
        {{"code", to_string(issue.code)}, {"path", issue.path}, {"message", issue.message}});
  }
  return list;
}

}  // namespace

Json to_json(const ValidationReport &report) {
  return {{"valid", report.valid()},
          {"errors", issues_to_json(report.errors)},
          {"warnings", issues_to_json(report.warnings)}};
}

Json to_json(const std::vector<ParseError> &errors) {
  Json list = Json::array();
  for (const auto &e : errors) list.push_back({{"path", e.path}, {"message", e.message}});
  return list;
}

}  // namespace ragscope
