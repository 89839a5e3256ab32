#pragma once

// Experiment-results data model.
//
// An experiment file has six top-level sections: experiment details, models,
// metrics, documents, tasks and evaluations. All types here are plain values;
// they are built once by the parser and never mutated afterwards.

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ragscope {

enum class AuthorType { algorithmic, human, llm_judge };

enum class ScaleKind { categorical, numeric };

enum class Speaker { user, agent };

struct CategoricalValue {
  std::string value;
  double numeric_mapping = 0.0;
  std::optional<std::string> display;

  bool operator==(const CategoricalValue &) const = default;
};

struct ScaleSpec {
  ScaleKind kind = ScaleKind::numeric;
  std::vector<CategoricalValue> values;  // categorical only, declared order
  double min = 0.0;                      // numeric only
  double max = 1.0;                      // numeric only

  // Range of numeric-mapped values. For categorical scales this is the span
  // of the declared mappings.
  [[nodiscard]] double lower() const;
  [[nodiscard]] double upper() const;
  [[nodiscard]] const CategoricalValue *find(const std::string &value) const;

  bool operator==(const ScaleSpec &) const = default;
};

struct ModelMeta {
  std::string model_id;
  std::string name;
  std::optional<std::string> description;

  bool operator==(const ModelMeta &) const = default;
};

struct MetricMeta {
  std::string metric_id;
  std::string name;
  AuthorType author_type = AuthorType::algorithmic;
  ScaleSpec scale;
  bool higher_is_better = true;

  [[nodiscard]] bool is_human() const { return author_type == AuthorType::human; }
  bool operator==(const MetricMeta &) const = default;
};

struct Document {
  std::string document_id;
  std::string text;
  std::optional<std::string> title;
  std::optional<std::string> url;

  bool operator==(const Document &) const = default;
};

struct Turn {
  Speaker speaker = Speaker::user;
  std::string text;

  bool operator==(const Turn &) const = default;
};

struct Task {
  std::string task_id;
  std::vector<Turn> input;
  std::vector<std::string> contexts;
  std::optional<std::vector<std::string>> targets;
  std::map<std::string, std::string> metadata;

  // Text of the final user turn, which is the question being answered.
  [[nodiscard]] const std::string &question() const;
  bool operator==(const Task &) const = default;
};

using RatingValue = std::variant<std::string, double>;

struct Rating {
  RatingValue value;
  std::optional<double> duration_seconds;
  std::optional<std::string> timestamp;

  bool operator==(const Rating &) const = default;
};

// metric_id -> annotator_id -> rating
using AnnotationMap = std::map<std::string, std::map<std::string, Rating>>;

struct Evaluation {
  std::string task_id;
  std::string model_id;
  std::string model_response;
  AnnotationMap annotations;

  bool operator==(const Evaluation &) const = default;
};

struct ExperimentFile {
  std::string name;
  std::optional<std::string> description;
  std::optional<std::string> timestamp;
  std::vector<ModelMeta> models;
  std::vector<MetricMeta> metrics;
  std::vector<Document> documents;
  std::vector<Task> tasks;
  std::vector<Evaluation> evaluations;

  [[nodiscard]] const ModelMeta *find_model(const std::string &id) const;
  [[nodiscard]] const MetricMeta *find_metric(const std::string &id) const;
  [[nodiscard]] const Document *find_document(const std::string &id) const;
  [[nodiscard]] const Task *find_task(const std::string &id) const;
  [[nodiscard]] const Evaluation *find_evaluation(const std::string &task_id,
                                                  const std::string &model_id) const;

  bool operator==(const ExperimentFile &) const = default;
};

// Everything needed to display a single instance.
struct ResolvedTask {
  Task task;
  std::vector<Document> documents;     // in contexts order
  std::vector<Evaluation> evaluations;  // in models order
};

ResolvedTask resolve_task(const ExperimentFile &file, const std::string &task_id);

// Label used for agreement and kappa: the categorical value itself, or the
// shortest round-trip text of a numeric value.
std::string rating_label(const RatingValue &value);

// Maps a rating onto the reals using the metric's scale. Returns nullopt when
// the value does not belong to the scale.
std::optional<double> numeric_value(const MetricMeta &metric, const RatingValue &value);

const char *to_string(AuthorType type);
const char *to_string(ScaleKind kind);
const char *to_string(Speaker speaker);
std::optional<AuthorType> parse_author_type(const std::string &text);
std::optional<Speaker> parse_speaker(const std::string &text);

}  // namespace ragscope
