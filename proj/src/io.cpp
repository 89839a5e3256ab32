#include "ragscope/io.hpp"

#include <cmath>
#include <regex>

namespace ragscope {

namespace {

bool is_iso8601(const std::string &text) {
  static const std::regex pattern(
      R"(^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}(:?\d{2})?)?)?$)");
  return std::regex_match(text, pattern);
}

std::string join(const std::string &parent, const std::string &child) {
  if (parent == "$") return child;
  return parent + "." + child;
}

std::string index(const std::string &parent, std::size_t i) {
  return (parent == "$" ? std::string() : parent) + "[" + std::to_string(i) + "]";
}

// Walks a JSON tree collecting every shape error instead of stopping at the
// first one.
class Reader {
 public:
  std::vector<ParseError> errors;

  void fail(const std::string &path, std::string message) {
    errors.push_back({path, std::move(message)});
  }

  const Json *field(const Json &obj, const std::string &path, const char *key, bool required) {
    auto it = obj.find(key);
    if (it == obj.end() || (!required && it->is_null())) {
      if (required) fail(join(path, key), "missing required field");
      return nullptr;
    }
    return &*it;
  }

  std::optional<std::string> string(const Json &obj, const std::string &path, const char *key,
                                    bool required, bool non_empty = false) {
    const Json *value = field(obj, path, key, required);
    if (value == nullptr) return std::nullopt;
    if (!value->is_string()) {
      fail(join(path, key), "expected string");
      return std::nullopt;
    }
    auto text = value->get<std::string>();
    if (non_empty && text.empty()) {
      fail(join(path, key), "must not be empty");
      return std::nullopt;
    }
    return text;
  }

  std::optional<std::string> timestamp(const Json &obj, const std::string &path, const char *key) {
    auto text = string(obj, path, key, false);
    if (text && !is_iso8601(*text)) {
      fail(join(path, key), "expected ISO-8601 timestamp");
      return std::nullopt;
    }
    return text;
  }

  std::optional<double> number(const Json &obj, const std::string &path, const char *key,
                               bool required) {
    const Json *value = field(obj, path, key, required);
    if (value == nullptr) return std::nullopt;
    if (!value->is_number()) {
      fail(join(path, key), "expected number");
      return std::nullopt;
    }
    return value->get<double>();
  }

  const Json *array(const Json &obj, const std::string &path, const char *key, bool required) {
    const Json *value = field(obj, path, key, required);
    if (value == nullptr) return nullptr;
    if (!value->is_array()) {
      fail(join(path, key), "expected array");
      return nullptr;
    }
    return value;
  }

  const Json *object(const Json &obj, const std::string &path, const char *key, bool required) {
    const Json *value = field(obj, path, key, required);
    if (value == nullptr) return nullptr;
    if (!value->is_object()) {
      fail(join(path, key), "expected object");
      return nullptr;
    }
    return value;
  }

  bool expect_object(const Json &value, const std::string &path) {
    if (value.is_object()) return true;
    fail(path, "expected object");
    return false;
  }

  std::optional<ModelMeta> model(const Json &j, const std::string &path) {
    if (!expect_object(j, path)) return std::nullopt;
    ModelMeta m;
    auto id = string(j, path, "model_id", true, true);
    auto name = string(j, path, "name", true);
    m.description = string(j, path, "description", false);
    if (!id || !name) return std::nullopt;
    m.model_id = *id;
    m.name = *name;
    return m;
  }

  std::optional<ScaleSpec> scale(const Json &j, const std::string &path) {
    if (!expect_object(j, path)) return std::nullopt;
    ScaleSpec s;
    auto kind = string(j, path, "kind", true);
    if (!kind) return std::nullopt;
    if (*kind == "numeric") {
      s.kind = ScaleKind::numeric;
      auto lo = number(j, path, "min", true);
      auto hi = number(j, path, "max", true);
      if (!lo || !hi) return std::nullopt;
      s.min = *lo;
      s.max = *hi;
      return s;
    }
    if (*kind != "categorical") {
      fail(join(path, "kind"), "expected \"categorical\" or \"numeric\"");
      return std::nullopt;
    }
    s.kind = ScaleKind::categorical;
    const Json *values = array(j, path, "values", true);
    if (values == nullptr) return std::nullopt;
    const std::string values_path = join(path, "values");
    bool ok = true;
    for (std::size_t i = 0; i < values->size(); ++i) {
      const Json &v = (*values)[i];
      const std::string vpath = index(values_path, i);
      if (!expect_object(v, vpath)) {
        ok = false;
        continue;
      }
      CategoricalValue cv;
      auto value = string(v, vpath, "value", true, true);
      auto mapping = number(v, vpath, "numeric_mapping", false);
      cv.display = string(v, vpath, "display", false);
      if (!value) {
        ok = false;
        continue;
      }
      cv.value = *value;
      // Omitted mappings default to the declared position.
      cv.numeric_mapping = mapping.value_or(static_cast<double>(i));
      s.values.push_back(std::move(cv));
    }
    if (!ok) return std::nullopt;
    return s;
  }

  std::optional<MetricMeta> metric(const Json &j, const std::string &path) {
    if (!expect_object(j, path)) return std::nullopt;
    MetricMeta m;
    auto id = string(j, path, "metric_id", true, true);
    auto name = string(j, path, "name", true);
    auto author = string(j, path, "author_type", true);
    std::optional<ScaleSpec> sc;
    if (const Json *s = object(j, path, "scale", true)) sc = scale(*s, join(path, "scale"));
    bool ok = id && name && author && sc;
    if (author) {
      if (auto type = parse_author_type(*author)) {
        m.author_type = *type;
      } else {
        fail(join(path, "author_type"), "expected \"algorithmic\", \"human\" or \"llm-judge\"");
        ok = false;
      }
    }
    if (const Json *hib = field(j, path, "higher_is_better", false)) {
      if (hib->is_boolean()) {
        m.higher_is_better = hib->get<bool>();
      } else {
        fail(join(path, "higher_is_better"), "expected boolean");
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
    m.metric_id = *id;
    m.name = *name;
    m.scale = std::move(*sc);
    return m;
  }

  std::optional<Document> document(const Json &j, const std::string &path) {
    if (!expect_object(j, path)) return std::nullopt;
    Document d;
    auto id = string(j, path, "document_id", true, true);
    auto text = string(j, path, "text", true, true);
    d.title = string(j, path, "title", false);
    d.url = string(j, path, "url", false);
    if (!id || !text) return std::nullopt;
    d.document_id = *id;
    d.text = *text;
    return d;
  }

  std::optional<std::vector<std::string>> string_list(const Json &j, const std::string &path,
                                                      const char *key, bool required) {
    const Json *arr = array(j, path, key, required);
    if (arr == nullptr) return std::nullopt;
    std::vector<std::string> out;
    bool ok = true;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      if (!(*arr)[i].is_string()) {
        fail(index(join(path, key), i), "expected string");
        ok = false;
        continue;
      }
      out.push_back((*arr)[i].get<std::string>());
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<Task> task(const Json &j, const std::string &path) {
    if (!expect_object(j, path)) return std::nullopt;
    Task t;
    bool ok = true;
    auto id = string(j, path, "task_id", true, true);
    ok = ok && id.has_value();

    const std::string input_path = join(path, "input");
    if (const Json *input = array(j, path, "input", true)) {
      for (std::size_t i = 0; i < input->size(); ++i) {
        const Json &turn_json = (*input)[i];
        const std::string tpath = index(input_path, i);
        if (!expect_object(turn_json, tpath)) {
          ok = false;
          continue;
        }
        auto speaker = string(turn_json, tpath, "speaker", true);
        auto text = string(turn_json, tpath, "text", true);
        if (!speaker || !text) {
          ok = false;
          continue;
        }
        auto parsed = parse_speaker(*speaker);
        if (!parsed) {
          fail(join(tpath, "speaker"), "expected \"user\" or \"agent\"");
          ok = false;
          continue;
        }
        t.input.push_back({*parsed, *text});
      }
      if (ok && t.input.empty()) {
        fail(input_path, "must contain at least one turn");
        ok = false;
      } else if (ok && t.input.back().speaker != Speaker::user) {
        fail(index(input_path, t.input.size() - 1), "final turn must be spoken by the user");
        ok = false;
      }
    } else {
      ok = false;
    }

    if (field(j, path, "contexts", false) != nullptr) {
      auto contexts = string_list(j, path, "contexts", false);
      if (contexts) {
        t.contexts = std::move(*contexts);
      } else {
        ok = false;
      }
    }
    if (field(j, path, "targets", false) != nullptr) {
      auto targets = string_list(j, path, "targets", false);
      if (!targets) {
        ok = false;
      } else if (!targets->empty()) {
        t.targets = std::move(*targets);
      }
    }
    if (const Json *meta = object(j, path, "metadata", false)) {
      for (const auto &[key, value] : meta->items()) {
        if (!value.is_string()) {
          fail(join(join(path, "metadata"), key), "expected string");
          ok = false;
          continue;
        }
        t.metadata[key] = value.get<std::string>();
      }
    } else if (field(j, path, "metadata", false) != nullptr) {
      ok = false;
    }

    if (!ok) return std::nullopt;
    t.task_id = *id;
    return t;
  }

  std::optional<Rating> rating(const Json &j, const std::string &path) {
    if (!expect_object(j, path)) return std::nullopt;
    Rating r;
    bool ok = true;
    if (const Json *value = field(j, path, "value", true)) {
      if (value->is_string()) {
        r.value = value->get<std::string>();
      } else if (value->is_number()) {
        r.value = value->get<double>();
      } else {
        fail(join(path, "value"), "expected string or number");
        ok = false;
      }
    } else {
      ok = false;
    }
    if (field(j, path, "duration_seconds", false) != nullptr) {
      auto duration = number(j, path, "duration_seconds", false);
      if (duration && (*duration < 0.0 || !std::isfinite(*duration))) {
        fail(join(path, "duration_seconds"), "must be a non-negative number");
        ok = false;
      } else if (!duration) {
        ok = false;
      }
      r.duration_seconds = duration;
    }
    if (field(j, path, "timestamp", false) != nullptr) {
      r.timestamp = timestamp(j, path, "timestamp");
      ok = ok && r.timestamp.has_value();
    }
    if (!ok) return std::nullopt;
    return r;
  }

  std::optional<Evaluation> evaluation(const Json &j, const std::string &path) {
    if (!expect_object(j, path)) return std::nullopt;
    Evaluation e;
    auto task_id = string(j, path, "task_id", true, true);
    auto model_id = string(j, path, "model_id", true, true);
    auto response = string(j, path, "model_response", true);
    bool ok = task_id && model_id && response;
    const std::string ann_path = join(path, "annotations");
    if (const Json *annotations = object(j, path, "annotations", true)) {
      for (const auto &[metric_id, per_annotator] : annotations->items()) {
        const std::string mpath = join(ann_path, metric_id);
        if (!per_annotator.is_object()) {
          fail(mpath, "expected object");
          ok = false;
          continue;
        }
        auto &slot = e.annotations[metric_id];
        for (const auto &[annotator_id, rating_json] : per_annotator.items()) {
          if (auto r = rating(rating_json, join(mpath, annotator_id))) {
            slot.emplace(annotator_id, std::move(*r));
          } else {
            ok = false;
          }
        }
      }
    } else {
      ok = false;
    }
    if (!ok) return std::nullopt;
    e.task_id = *task_id;
    e.model_id = *model_id;
    e.model_response = *response;
    return e;
  }

  template <typename T, typename Fn>
  bool section(const Json &root, const char *key, std::vector<T> &out, Fn parse_item) {
    const Json *arr = array(root, "$", key, true);
    if (arr == nullptr) return false;
    bool ok = true;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      if (auto item = (this->*parse_item)((*arr)[i], index(key, i))) {
        out.push_back(std::move(*item));
      } else {
        ok = false;
      }
    }
    return ok;
  }
};

}  // namespace

ParseResult parse_experiment(const Json &root) {
  Reader reader;
  if (!root.is_object()) {
    reader.fail("$", "expected an object with sections experiment, models, metrics, "
                     "documents, tasks, evaluations");
    return {std::nullopt, std::move(reader.errors)};
  }
  ExperimentFile file;
  bool ok = true;
  if (const Json *exp = reader.object(root, "$", "experiment", true)) {
    auto name = reader.string(*exp, "experiment", "name", true);
    file.description = reader.string(*exp, "experiment", "description", false);
    file.timestamp = reader.timestamp(*exp, "experiment", "timestamp");
    if (name) file.name = *name;
  }
  ok &= reader.section(root, "models", file.models, &Reader::model);
  ok &= reader.section(root, "metrics", file.metrics, &Reader::metric);
  ok &= reader.section(root, "documents", file.documents, &Reader::document);
  ok &= reader.section(root, "tasks", file.tasks, &Reader::task);
  ok &= reader.section(root, "evaluations", file.evaluations, &Reader::evaluation);
  if (!ok || !reader.errors.empty()) return {std::nullopt, std::move(reader.errors)};
  return {std::move(file), {}};
}

ParseResult parse_experiment(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error &e) {
    return {std::nullopt, {{"$", e.what()}}};
  }
  return parse_experiment(root);
}

namespace {

Json rating_to_json(const Rating &r) {
  Json j = Json::object();
  std::visit([&](const auto &v) { j["value"] = v; }, r.value);
  if (r.duration_seconds) j["duration_seconds"] = *r.duration_seconds;
  if (r.timestamp) j["timestamp"] = *r.timestamp;
  return j;
}

}  // namespace

Json to_json(const Document &d) {
  Json j = {{"document_id", d.document_id}, {"text", d.text}};
  if (d.title) j["title"] = *d.title;
  if (d.url) j["url"] = *d.url;
  return j;
}

Json to_json(const Task &t) {
  Json input = Json::array();
  for (const auto &turn : t.input) {
    input.push_back({{"speaker", to_string(turn.speaker)}, {"text", turn.text}});
  }
  Json j = {{"task_id", t.task_id}, {"input", std::move(input)}, {"contexts", t.contexts}};
  if (t.targets) j["targets"] = *t.targets;
  Json meta = Json::object();
  for (const auto &[k, v] : t.metadata) meta[k] = v;
  j["metadata"] = std::move(meta);
  return j;
}

Json to_json(const Evaluation &e) {
  Json annotations = Json::object();
  for (const auto &[metric_id, per_annotator] : e.annotations) {
    Json slot = Json::object();
    for (const auto &[annotator_id, rating] : per_annotator) {
      slot[annotator_id] = rating_to_json(rating);
    }
    annotations[metric_id] = std::move(slot);
  }
  return {{"task_id", e.task_id},
          {"model_id", e.model_id},
          {"model_response", e.model_response},
          {"annotations", std::move(annotations)}};
}

Json to_json(const ExperimentFile &file) {
  Json root = Json::object();
  Json exp = Json::object();
  exp["name"] = file.name;
  if (file.description) exp["description"] = *file.description;
  if (file.timestamp) exp["timestamp"] = *file.timestamp;
  root["experiment"] = std::move(exp);

  Json models = Json::array();
  for (const auto &m : file.models) {
    Json j = {{"model_id", m.model_id}, {"name", m.name}};
    if (m.description) j["description"] = *m.description;
    models.push_back(std::move(j));
  }
  root["models"] = std::move(models);

  Json metrics = Json::array();
  for (const auto &m : file.metrics) {
    Json scale = {{"kind", to_string(m.scale.kind)}};
    if (m.scale.kind == ScaleKind::numeric) {
      scale["min"] = m.scale.min;
      scale["max"] = m.scale.max;
    } else {
      Json values = Json::array();
      for (const auto &v : m.scale.values) {
        Json jv = {{"value", v.value}, {"numeric_mapping", v.numeric_mapping}};
        if (v.display) jv["display"] = *v.display;
        values.push_back(std::move(jv));
      }
      scale["values"] = std::move(values);
    }
    metrics.push_back({{"metric_id", m.metric_id},
                       {"name", m.name},
                       {"author_type", to_string(m.author_type)},
                       {"scale", std::move(scale)},
                       {"higher_is_better", m.higher_is_better}});
  }
  root["metrics"] = std::move(metrics);

  Json documents = Json::array();
  for (const auto &d : file.documents) documents.push_back(to_json(d));
  root["documents"] = std::move(documents);

  Json tasks = Json::array();
  for (const auto &t : file.tasks) tasks.push_back(to_json(t));
  root["tasks"] = std::move(tasks);

  Json evaluations = Json::array();
  for (const auto &e : file.evaluations) evaluations.push_back(to_json(e));
  root["evaluations"] = std::move(evaluations);
  return root;
}

std::string serialize_experiment(const ExperimentFile &file, int indent) {
  return to_json(file).dump(indent);
}

}  // namespace ragscope
