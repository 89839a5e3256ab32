#pragma once

#include <string>
#include <vector>

#include "ragscope/experiment.hpp"
#include "ragscope/io.hpp"

namespace ragscope {

// The complete taxonomy. MISSING_SCORE and UNEVEN_ANNOTATORS are reported as
// warnings, everything else as errors.
enum class ErrorCode {
  DUPLICATE_ID,
  DANGLING_DOCUMENT_REF,
  DANGLING_TASK_REF,
  DANGLING_MODEL_REF,
  UNKNOWN_METRIC,
  SCALE_VIOLATION,
  MISSING_EVALUATION,
  MISSING_SCORE,
  UNEVEN_ANNOTATORS,
  EMPTY_SECTION,
};

inline constexpr ErrorCode kAllErrorCodes[] = {
    ErrorCode::DUPLICATE_ID,       ErrorCode::DANGLING_DOCUMENT_REF,
    ErrorCode::DANGLING_TASK_REF,  ErrorCode::DANGLING_MODEL_REF,
    ErrorCode::UNKNOWN_METRIC,     ErrorCode::SCALE_VIOLATION,
    ErrorCode::MISSING_EVALUATION, ErrorCode::MISSING_SCORE,
    ErrorCode::UNEVEN_ANNOTATORS,  ErrorCode::EMPTY_SECTION,
};

const char *to_string(ErrorCode code);
bool is_warning(ErrorCode code);

struct Issue {
  ErrorCode code;
  std::string path;
  std::string message;

  bool operator==(const Issue &) const = default;
};

struct ValidationReport {
  std::vector<Issue> errors;
  std::vector<Issue> warnings;

  [[nodiscard]] bool valid() const { return errors.empty(); }
  bool operator==(const ValidationReport &) const = default;
};

// Pure and deterministic: issues are reported in file order.
ValidationReport validate(const ExperimentFile &file);

Json to_json(const ValidationReport &report);
Json to_json(const std::vector<ParseError> &errors);

}  // namespace ragscope
