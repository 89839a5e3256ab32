#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "ragscope/augment.hpp"
#include "ragscope/service.hpp"

namespace ragscope::cli {

// Stable across versions.
enum ExitStatus : int {
  kSuccess = 0,
  kValidationFailed = 1,
  kUsageOrIoError = 2,
};

enum class Format { text, structured };

struct Streams {
  std::ostream &out;
  std::ostream &err;
};

int cmd_validate(const std::filesystem::path &path, const std::optional<std::filesystem::path> &out,
                 Format format, Streams io);

int cmd_augment(const std::filesystem::path &path, const std::optional<std::filesystem::path> &out,
                std::uint64_t seed, Streams io);

int cmd_report(const std::filesystem::path &path, const std::filesystem::path &out_dir,
               std::uint64_t seed, Format format, Streams io);

// Blocks until SIGINT/SIGTERM. Returns kUsageOrIoError when the port cannot
// be bound.
int cmd_serve(const ServiceConfig &config, Streams io);

// The structured report: every aggregate view, as served over HTTP, for one
// experiment and seed.
Json build_report(const AugmentedExperiment &aug);
std::string render_text_report(const AugmentedExperiment &aug);

int run(int argc, char **argv);

}  // namespace ragscope::cli
