#include "ragscope/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ragscope/errors.hpp"

namespace ragscope {

double ScaleSpec::lower() const {
  if (kind == ScaleKind::numeric) return min;
  if (values.empty()) return 0.0;
  return std::min_element(values.begin(), values.end(),
                          [](const auto &a, const auto &b) {
                            return a.numeric_mapping < b.numeric_mapping;
                          })
      ->numeric_mapping;
}

double ScaleSpec::upper() const {
  if (kind == ScaleKind::numeric) return max;
  if (values.empty()) return 0.0;
  return std::max_element(values.begin(), values.end(),
                          [](const auto &a, const auto &b) {
                            return a.numeric_mapping < b.numeric_mapping;
                          })
      ->numeric_mapping;
}

const CategoricalValue *ScaleSpec::find(const std::string &value) const {
  auto it = std::find_if(values.begin(), values.end(),
                         [&](const CategoricalValue &v) { return v.value == value; });
  return it == values.end() ? nullptr : &*it;
}

const std::string &Task::question() const {
  for (auto it = input.rbegin(); it != input.rend(); ++it) {
    if (it->speaker == Speaker::user) return it->text;
  }
  static const std::string empty;
  return empty;
}

namespace {

template <typename T, typename Key>
const T *find_by(const std::vector<T> &items, const std::string &id, Key key) {
  auto it = std::find_if(items.begin(), items.end(),
                         [&](const T &item) { return item.*key == id; });
  return it == items.end() ? nullptr : &*it;
}

}  // namespace

const ModelMeta *ExperimentFile::find_model(const std::string &id) const {
  return find_by(models, id, &ModelMeta::model_id);
}

const MetricMeta *ExperimentFile::find_metric(const std::string &id) const {
  return find_by(metrics, id, &MetricMeta::metric_id);
}

const Document *ExperimentFile::find_document(const std::string &id) const {
  return find_by(documents, id, &Document::document_id);
}

const Task *ExperimentFile::find_task(const std::string &id) const {
  return find_by(tasks, id, &Task::task_id);
}

const Evaluation *ExperimentFile::find_evaluation(const std::string &task_id,
                                                  const std::string &model_id) const {
  auto it = std::find_if(evaluations.begin(), evaluations.end(), [&](const Evaluation &e) {
    return e.task_id == task_id && e.model_id == model_id;
  });
  return it == evaluations.end() ? nullptr : &*it;
}

ResolvedTask resolve_task(const ExperimentFile &file, const std::string &task_id) {
  const Task *task = file.find_task(task_id);
  if (task == nullptr) throw NotFound("unknown task: " + task_id);

  ResolvedTask resolved{*task, {}, {}};
  for (const auto &doc_id : task->contexts) {
    if (const Document *doc = file.find_document(doc_id)) resolved.documents.push_back(*doc);
  }
  for (const auto &model : file.models) {
    if (const Evaluation *eval = file.find_evaluation(task_id, model.model_id)) {
      resolved.evaluations.push_back(*eval);
    }
  }
  return resolved;
}

std::string rating_label(const RatingValue &value) {
  if (const auto *text = std::get_if<std::string>(&value)) return *text;
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), std::get<double>(value));
  return std::string(buf, end);
}

std::optional<double> numeric_value(const MetricMeta &metric, const RatingValue &value) {
  const ScaleSpec &scale = metric.scale;
  if (scale.kind == ScaleKind::categorical) {
    const auto *text = std::get_if<std::string>(&value);
    if (text == nullptr) return std::nullopt;
    const CategoricalValue *cat = scale.find(*text);
    if (cat == nullptr) return std::nullopt;
    return cat->numeric_mapping;
  }
  const auto *number = std::get_if<double>(&value);
  if (number == nullptr || !std::isfinite(*number)) return std::nullopt;
  if (*number < scale.min || *number > scale.max) return std::nullopt;
  return *number;
}

const char *to_string(AuthorType type) {
  switch (type) {
    case AuthorType::algorithmic: return "algorithmic";
    case AuthorType::human: return "human";
    case AuthorType::llm_judge: return "llm-judge";
  }
  return "algorithmic";
}

const char *to_string(ScaleKind kind) {
  return kind == ScaleKind::categorical ? "categorical" : "numeric";
}

const char *to_string(Speaker speaker) { return speaker == Speaker::user ? "user" : "agent"; }

std::optional<AuthorType> parse_author_type(const std::string &text) {
  if (text == "algorithmic") return AuthorType::algorithmic;
  if (text == "human") return AuthorType::human;
  if (text == "llm-judge") return AuthorType::llm_judge;
  return std::nullopt;
}

std::optional<Speaker> parse_speaker(const std::string &text) {
  if (text == "user") return Speaker::user;
  if (text == "agent") return Speaker::agent;
  return std::nullopt;
}

}  // namespace ragscope
