#pragma once

// Reading and writing the experiment-results interchange document (JSON).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ragscope/experiment.hpp"

namespace ragscope {

using Json = nlohmann::ordered_json;

struct ParseError {
  std::string path;  // "$" for the document root, otherwise e.g. "tasks[3].input"
  std::string message;
};

struct ParseResult {
  std::optional<ExperimentFile> file;
  std::vector<ParseError> errors;

  [[nodiscard]] bool ok() const { return file.has_value(); }
};

// Shape-only parse: syntax, required fields, primitive types and per-record
// constraints (non-empty ids, terminal user turn, ...). Cross-references and
// scale conformance are left to validate().
ParseResult parse_experiment(std::string_view text);
inline ParseResult parse_experiment(const std::string &text) {
  return parse_experiment(std::string_view(text));
}
inline ParseResult parse_experiment(const char *text) { return parse_experiment(std::string_view(text)); }
ParseResult parse_experiment(const Json &document);

Json to_json(const ExperimentFile &file);
Json to_json(const Document &document);
Json to_json(const Task &task);
Json to_json(const Evaluation &evaluation);
std::string serialize_experiment(const ExperimentFile &file, int indent = 2);

}  // namespace ragscope
