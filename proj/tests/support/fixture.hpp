#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ragscope/io.hpp"

#ifndef RAGSCOPE_FIXTURE_DIR
#error "RAGSCOPE_FIXTURE_DIR must be defined"
#endif

namespace ragscope::fixtures {

inline std::string fixture_path(const std::string &name) {
  return std::string(RAGSCOPE_FIXTURE_DIR) + "/" + name;
}

inline std::string read_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline Json fixture_json(const std::string &name = "experiment.json") {
  return Json::parse(read_text(fixture_path(name)));
}

inline ExperimentFile fixture(const std::string &name = "experiment.json") {
  ParseResult parsed = parse_experiment(read_text(fixture_path(name)));
  if (!parsed.ok()) throw std::runtime_error("fixture " + name + " does not parse");
  return std::move(*parsed.file);
}

}  // namespace ragscope::fixtures
