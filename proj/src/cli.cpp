#include "ragscope/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <pthread.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ragscope/analysis.hpp"
#include "ragscope/errors.hpp"
#include "ragscope/io.hpp"
#include "ragscope/validate.hpp"

namespace ragscope::cli {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return std::move(buf).str();
}

bool write_file(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << content;
  out.close();
  return !out.fail();
}

struct Loaded {
  std::optional<ExperimentFile> file;
  std::vector<ParseError> parse_errors;
  int status = kSuccess;
};

Loaded load(const fs::path &path, Streams io) {
  Loaded loaded;
  auto text = read_file(path);
  if (!text) {
    io.err << "error: cannot read " << path.string() << '\n';
    loaded.status = kUsageOrIoError;
    return loaded;
  }
  ParseResult parsed = parse_experiment(*text);
  if (!parsed.ok()) {
    loaded.parse_errors = std::move(parsed.errors);
    loaded.status = kValidationFailed;
    return loaded;
  }
  loaded.file = std::move(parsed.file);
  return loaded;
}

void print_parse_errors(const std::vector<ParseError> &errors, std::ostream &os) {
  os << "parse failed with " << errors.size() << " error(s)\n";
  for (const auto &e : errors) os << "  error  " << e.path << ": " << e.message << '\n';
}

void print_report(const ValidationReport &report, std::ostream &os) {
  os << (report.valid() ? "valid" : "invalid") << ": " << report.errors.size() << " error(s), "
     << report.warnings.size() << " warning(s)\n";
  for (const auto &e : report.errors) {
    os << "  error    " << to_string(e.code) << "  " << e.path << ": " << e.message << '\n';
  }
  for (const auto &w : report.warnings) {
    os << "  warning  " << to_string(w.code) << "  " << w.path << ": " << w.message << '\n';
  }
}

std::string number(const std::optional<double> &value, int precision = 3) {
  if (!value) return "-";
  return fmt::format("{:.{}f}", *value, precision);
}

}  // namespace

int cmd_validate(const fs::path &path, const std::optional<fs::path> &out, Format format,
                 Streams io) {
  Loaded loaded = load(path, io);
  if (loaded.status == kUsageOrIoError) return loaded.status;

  Json machine;
  int status = kSuccess;
  if (!loaded.file) {
    machine = {{"valid", false},
               {"parse_errors", to_json(loaded.parse_errors)},
               {"errors", Json::array()},
               {"warnings", Json::array()}};
    if (format == Format::text) print_parse_errors(loaded.parse_errors, io.out);
    status = kValidationFailed;
  } else {
    const ValidationReport report = validate(*loaded.file);
    machine = to_json(report);
    if (format == Format::text) print_report(report, io.out);
    status = report.valid() ? kSuccess : kValidationFailed;
  }
  if (format == Format::structured) io.out << machine.dump(2) << '\n';
  if (out && !write_file(*out, machine.dump(2) + "\n")) {
    io.err << "error: cannot write " << out->string() << '\n';
    return kUsageOrIoError;
  }
  return status;
}

int cmd_augment(const fs::path &path, const std::optional<fs::path> &out, std::uint64_t seed,
                Streams io) {
  Loaded loaded = load(path, io);
  if (loaded.status == kUsageOrIoError) return loaded.status;
  if (!loaded.file) {
    print_parse_errors(loaded.parse_errors, io.err);
    return kValidationFailed;
  }
  AugmentConfig config;
  config.seed = seed;
  std::string document;
  try {
    document = to_json(augment(std::move(*loaded.file), config)).dump(2) + "\n";
  } catch (const InvalidExperiment &e) {
    print_report(e.report(), io.err);
    return kValidationFailed;
  }
  if (!out) {
    io.out << document;
    return kSuccess;
  }
  if (!write_file(*out, document)) {
    io.err << "error: cannot write " << out->string() << '\n';
    return kUsageOrIoError;
  }
  return kSuccess;
}

Json build_report(const AugmentedExperiment &aug) {
  Json report = Json::object();
  report["experiment"] = aug.experiment.name;
  report["seed"] = aug.config.seed;
  Json overviews = Json::object();
  for (auto type : {MetricType::human, MetricType::algorithmic, MetricType::all}) {
    overviews[to_string(type)] = to_json(overview(aug, type));
  }
  report["overview"] = std::move(overviews);
  try {
    report["metrics"] = to_json(metric_behavior(aug));
  } catch (const Unprocessable &e) {
    report["metrics"] = {{"error", e.what()}};
  }
  report["annotators"] = to_json(annotator_report(aug));
  report["dataset"] = to_json(dataset_view(aug));

  Json comparisons = Json::array();
  const auto &models = aug.experiment.models;
  const CompareConfig config = default_compare_config(aug);
  for (const auto &metric : aug.experiment.metrics) {
    for (std::size_t i = 0; i < models.size(); ++i) {
      for (std::size_t j = i + 1; j < models.size(); ++j) {
        try {
          comparisons.push_back(to_json(compare_models(aug, models[i].model_id,
                                                       models[j].model_id, metric.metric_id,
                                                       config)));
        } catch (const Unprocessable &e) {
          comparisons.push_back({{"model_a", models[i].model_id},
                                 {"model_b", models[j].model_id},
                                 {"metric_id", metric.metric_id},
                                 {"error", e.what()}});
        }
      }
    }
  }
  report["comparisons"] = std::move(comparisons);
  return report;
}

std::string render_text_report(const AugmentedExperiment &aug) {
  std::string out;
  auto line = [&](const std::string &text) { out += text + "\n"; };
  line("Experiment: " + aug.experiment.name);
  line("");

  for (auto type : {MetricType::human, MetricType::algorithmic}) {
    const OverviewView view = overview(aug, type);
    line(fmt::format("== Performance overview ({} metrics) ==", to_string(type)));
    if (view.rows.empty()) {
      line("(none)");
      line("");
      continue;
    }
    line(fmt::format("{:<20} {:<20} {:>8} {:>8} {:>5} {:>5}  {}", "metric", "model", "mean",
                     "std", "n", "rank", "agreement u/m/s"));
    for (const auto &row : view.rows) {
      std::string agreement = "-";
      if (row.agreement_distribution) {
        const auto &c = *row.agreement_distribution;
        agreement = fmt::format("{}/{}/{}", c[0], c[1], c[2]);
      }
      line(fmt::format("{:<20} {:<20} {:>8.3f} {:>8.3f} {:>5} {:>5}  {}", row.metric_id,
                       row.model_id, row.mean, row.std, row.n_instances, row.rank, agreement));
    }
    line("");
  }

  line("== Metric correlations (Spearman rho) ==");
  const auto &corr = aug.metric_correlations;
  std::string header = fmt::format("{:<20}", "");
  for (const auto &id : corr.metric_ids) header += fmt::format(" {:>12.12}", id);
  line(header);
  for (std::size_t i = 0; i < corr.metric_ids.size(); ++i) {
    std::string row = fmt::format("{:<20.20}", corr.metric_ids[i]);
    for (const auto &entry : corr.entries[i]) row += fmt::format(" {:>12}", number(entry.rho));
    line(row);
  }
  line("");

  line("== Annotator behavior ==");
  const AnnotatorReport report = annotator_report(aug);
  if (report.empty) {
    line("(empty: no human metric with two or more annotators)");
  } else {
    line(fmt::format("{:<16} {:>8} {:>13} {:>11} {:>10} {:>12}", "annotator", "ratings",
                     "contribution", "mean kappa", "mean time", "median time"));
    for (const auto &p : report.profiles) {
      line(fmt::format("{:<16} {:>8} {:>13} {:>11} {:>10} {:>12}", p.annotator_id, p.n_ratings,
                       number(p.contribution), number(p.mean_kappa),
                       number(p.mean_duration_seconds, 1), number(p.median_duration_seconds, 1)));
    }
  }
  return out;
}

int cmd_report(const fs::path &path, const fs::path &out_dir, std::uint64_t seed, Format format,
               Streams io) {
  Loaded loaded = load(path, io);
  if (loaded.status == kUsageOrIoError) return loaded.status;
  if (!loaded.file) {
    print_parse_errors(loaded.parse_errors, io.err);
    return kValidationFailed;
  }
  AugmentConfig config;
  config.seed = seed;
  std::optional<AugmentedExperiment> aug;
  try {
    aug = augment(std::move(*loaded.file), config);
  } catch (const InvalidExperiment &e) {
    print_report(e.report(), io.err);
    return kValidationFailed;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const std::string structured = build_report(*aug).dump(2) + "\n";
  const std::string text = render_text_report(*aug);
  if (ec || !write_file(out_dir / "report.json", structured) ||
      !write_file(out_dir / "report.txt", text)) {
    io.err << "error: cannot write report to " << out_dir.string() << '\n';
    return kUsageOrIoError;
  }
  if (format == Format::text) {
    io.out << text;
  } else {
    io.out << structured;
  }
  return kSuccess;
}

int cmd_serve(const ServiceConfig &config, Streams io) {
  // Route SIGINT/SIGTERM to a dedicated thread; server threads inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(config);
  const int port = service.bind();
  if (port < 0) {
    io.err << "error: cannot listen on " << config.host << ':' << config.port << '\n';
    return kUsageOrIoError;
  }
  io.err << Json{{"event", "listening"}, {"host", config.host}, {"port", port}}.dump()
         << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  const bool ok = service.listen();
  if (!ok) {
    // listen() failed on its own; wake the waiter.
    kill(getpid(), SIGTERM);
  }
  waiter.join();
  io.err << Json{{"event", "stopped"}}.dump() << std::endl;
  return ok ? kSuccess : kUsageOrIoError;
}

int run(int argc, char **argv) {
  CLI::App app{"ragscope: analysis of RAG evaluation experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 42;
  std::optional<std::string> out;
  std::string format_name = "text";
  app.add_option("--seed", seed, "Seed for randomization tests")->capture_default_str();
  app.add_option("--out", out, "Output file (validate, augment) or directory (report)");
  app.add_option("--format", format_name, "Console output format")
      ->check(CLI::IsMember({"text", "structured"}))
      ->capture_default_str();

  std::string path;
  auto *validate_cmd = app.add_subcommand("validate", "Validate an experiment file");
  validate_cmd->add_option("path", path, "Experiment file")->required();
  auto *augment_cmd = app.add_subcommand("augment", "Write the experiment with derived statistics");
  augment_cmd->add_option("path", path, "Experiment file")->required();
  auto *report_cmd = app.add_subcommand("report", "Write static summary reports");
  report_cmd->add_option("path", path, "Experiment file")->required();

  ServiceConfig service;
  long ttl_seconds = service.session_ttl.count();
  bool quiet = false;
  auto *serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--host", service.host, "Listen address")
      ->envname("RAGSCOPE_HOST")
      ->capture_default_str();
  serve_cmd->add_option("--port", service.port, "Listen port (0 picks a free port)")
      ->envname("RAGSCOPE_PORT")
      ->capture_default_str();
  serve_cmd->add_option("--max-upload-bytes", service.max_upload_bytes, "Upload size limit")
      ->envname("RAGSCOPE_MAX_UPLOAD_BYTES")
      ->capture_default_str();
  serve_cmd->add_option("--session-ttl", ttl_seconds, "Session inactivity timeout in seconds")
      ->envname("RAGSCOPE_SESSION_TTL")
      ->capture_default_str();
  serve_cmd->add_option("--memory-budget", service.memory_budget_bytes,
                        "Total session memory budget in bytes")
      ->envname("RAGSCOPE_MEMORY_BUDGET")
      ->capture_default_str();
  serve_cmd->add_option("--iterations", service.mc_iterations,
                        "Default Monte Carlo iterations for comparisons")
      ->envname("RAGSCOPE_MC_ITERATIONS")
      ->capture_default_str();
  serve_cmd->add_flag("--cors", service.cors, "Allow cross-origin requests")
      ->envname("RAGSCOPE_CORS");
  serve_cmd->add_flag("--quiet", quiet, "Disable request logs")->envname("RAGSCOPE_QUIET");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsageOrIoError;
  }

  const Format format = format_name == "structured" ? Format::structured : Format::text;
  Streams io{std::cout, std::cerr};
  const std::optional<fs::path> out_path =
      out ? std::optional<fs::path>(*out) : std::optional<fs::path>();

  if (*validate_cmd) return cmd_validate(path, out_path, format, io);
  if (*augment_cmd) return cmd_augment(path, out_path, seed, io);
  if (*report_cmd) {
    if (!out_path) {
      std::cerr << "error: report requires --out <directory>\n";
      return kUsageOrIoError;
    }
    return cmd_report(path, *out_path, seed, format, io);
  }
  service.session_ttl = std::chrono::seconds(ttl_seconds);
  service.default_seed = seed;
  service.request_log = !quiet;
  return cmd_serve(service, io);
}

}  // namespace ragscope::cli
