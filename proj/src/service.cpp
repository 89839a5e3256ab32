#include "ragscope/service.hpp"

#include <charconv>
#include <iostream>
#include <random>

#include <httplib.h>

#include "ragscope/errors.hpp"
#include "ragscope/io.hpp"

namespace ragscope {

namespace {

template <typename T>
T parse_number(const std::string &text, const char *what) {
  T value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw std::invalid_argument(std::string("invalid ") + what + ": \"" + text + "\"");
  }
  return value;
}

}  // namespace

std::string new_session_id() {
  static std::mutex mutex;
  static std::random_device device;
  std::uint32_t words[4];
  {
    std::lock_guard lock(mutex);
    for (auto &w : words) w = device();
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (auto w : words) {
    for (int shift = 28; shift >= 0; shift -= 4) id.push_back(kHex[(w >> shift) & 0xFU]);
  }
  return id;
}

// ---- sessions ----

SessionStore::SessionStore(std::chrono::seconds ttl, std::size_t memory_budget_bytes, Clock clock)
    : ttl_(ttl), budget_(memory_budget_bytes), clock_(std::move(clock)) {}

std::string SessionStore::create(std::shared_ptr<const AugmentedExperiment> augmented,
                                 std::size_t bytes) {
  auto session = std::make_shared<Session>();
  session->augmented = std::move(augmented);
  session->bytes = bytes;
  const auto now = clock_();
  session->created_at = now;
  session->last_access = now;

  std::lock_guard lock(mutex_);
  evict_expired_locked(now);
  do {
    session->id = new_session_id();
  } while (sessions_.count(session->id));
  const std::string id = session->id;
  sessions_.emplace(id, session);
  total_bytes_ += bytes;

  while (total_bytes_ > budget_ && sessions_.size() > 1) {
    auto oldest = sessions_.end();
    for (auto it = sessions_.begin(); it != sessions_.end(); ++it) {
      if (it->first == id) continue;
      if (oldest == sessions_.end() || it->second->last_access < oldest->second->last_access) {
        oldest = it;
      }
    }
    total_bytes_ -= oldest->second->bytes;
    sessions_.erase(oldest);
  }
  return id;
}

std::shared_ptr<Session> SessionStore::find(const std::string &id) {
  const auto now = clock_();
  std::lock_guard lock(mutex_);
  evict_expired_locked(now);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  it->second->last_access = now;
  return it->second;
}

bool SessionStore::erase(const std::string &id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return false;
  total_bytes_ -= it->second->bytes;
  sessions_.erase(it);
  return true;
}

void SessionStore::evict_expired() {
  const auto now = clock_();
  std::lock_guard lock(mutex_);
  evict_expired_locked(now);
}

void SessionStore::evict_expired_locked(std::chrono::steady_clock::time_point now) {
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_access >= ttl_) {
      total_bytes_ -= it->second->bytes;
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t SessionStore::total_bytes() const {
  std::lock_guard lock(mutex_);
  return total_bytes_;
}

// ---- HTTP ----

namespace {

// Parsed experiment plus derived statistics take a few times the raw size.
constexpr std::size_t kFootprintFactor = 4;

void send_json(httplib::Response &res, int status, const Json &body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response &res, int status, const std::string &message) {
  send_json(res, status, {{"error", message}});
}

std::string param(const httplib::Request &req, const char *name, std::string fallback = {}) {
  return req.has_param(name) ? req.get_param_value(name) : fallback;
}

std::string required_param(const httplib::Request &req, const char *name) {
  if (!req.has_param(name)) {
    throw std::invalid_argument(std::string("missing query parameter \"") + name + "\"");
  }
  return req.get_param_value(name);
}

bool descending_order(const httplib::Request &req) {
  const std::string order = param(req, "order", "asc");
  if (order == "asc") return false;
  if (order == "desc") return true;
  throw std::invalid_argument("order must be asc or desc");
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  SessionStore store;
  httplib::Server server;
  std::mutex log_mutex;

  explicit Impl(ServiceConfig cfg)
      : config(std::move(cfg)),
        store(config.session_ttl, config.memory_budget_bytes) {
    server.set_payload_max_length(config.max_upload_bytes);
    // httplib's default also sets SO_REUSEPORT, which lets a second instance
    // share the port silently.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (config.request_log) {
      server.set_logger([this](const httplib::Request &req, const httplib::Response &res) {
        Json line = {{"ts", utc_now_iso8601()},
                     {"method", req.method},
                     {"path", req.path},
                     {"status", res.status},
                     {"bytes", res.body.size()}};
        std::lock_guard lock(log_mutex);
        std::cerr << line.dump() << '\n';
      });
    }
    server.set_exception_handler(
        [](const httplib::Request &, httplib::Response &res, std::exception_ptr ep) {
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception &e) {
            send_error(res, 500, e.what());
          } catch (...) {
            send_error(res, 500, "internal error");
          }
        });
    if (config.cors) {
      server.set_post_routing_handler([](const httplib::Request &, httplib::Response &res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
      });
      server.Options(R"(/api/.*)", [](const httplib::Request &, httplib::Response &res) {
        res.status = 204;
      });
    }
    routes();
  }

  // Runs a handler against a live session, mapping library exceptions onto
  // HTTP statuses.
  template <typename Fn>
  void with_session(const httplib::Request &req, httplib::Response &res, Fn fn) {
    auto session = store.find(req.matches[1]);
    if (!session) {
      send_error(res, 404, "unknown or expired session");
      return;
    }
    try {
      fn(*session);
    } catch (const NotFound &e) {
      send_error(res, 404, e.what());
    } catch (const Unprocessable &e) {
      send_error(res, 422, e.what());
    } catch (const std::invalid_argument &e) {
      send_error(res, 400, e.what());
    } catch (const Json::exception &e) {
      send_error(res, 400, e.what());
    }
  }

  void upload(const httplib::Request &req, httplib::Response &res) {
    ParseResult parsed = parse_experiment(req.body);
    if (!parsed.ok()) {
      send_json(res, 400, {{"parse_errors", to_json(parsed.errors)}});
      return;
    }
    AugmentConfig augment_config;
    augment_config.seed = config.default_seed;
    augment_config.iterations = config.mc_iterations;
    try {
      auto augmented = std::make_shared<const AugmentedExperiment>(
          augment(std::move(*parsed.file), augment_config));
      Json warnings = to_json(ValidationReport{{}, augmented->warnings})["warnings"];
      const std::string id = store.create(augmented, req.body.size() * kFootprintFactor);
      send_json(res, 201, {{"session_id", id}, {"warnings", std::move(warnings)}});
    } catch (const InvalidExperiment &e) {
      send_json(res, 422, to_json(e.report()));
    }
  }

  void routes() {
    const std::string base = R"(/api/experiments/([0-9a-f]+))";

    server.Post("/api/experiments",
                [this](const httplib::Request &req, httplib::Response &res) { upload(req, res); });

    server.Delete(base, [this](const httplib::Request &req, httplib::Response &res) {
      if (store.erase(req.matches[1])) {
        res.status = 204;
      } else {
        send_error(res, 404, "unknown or expired session");
      }
    });

    server.Get(base + "/overview", [this](const httplib::Request &req, httplib::Response &res) {
      with_session(req, res, [&](Session &s) {
        const auto type = parse_metric_type(param(req, "type", "all"));
        if (!type) throw std::invalid_argument("type must be human, algorithmic or all");
        send_json(res, 200, to_json(overview(*s.augmented, *type)));
      });
    });

    server.Get(base + "/predictions", [this](const httplib::Request &req, httplib::Response &res) {
      with_session(req, res, [&](Session &s) {
        const auto page = parse_number<std::size_t>(param(req, "page", "1"), "page");
        const auto page_size =
            parse_number<std::size_t>(param(req, "page_size", "20"), "page_size");
        PredictionSort sort;
        const std::string key = param(req, "sort", "task_id");
        if (key == "response_length") {
          sort.key = PredictionSort::Key::response_length;
          sort.model_id = required_param(req, "model");
        } else if (key != "task_id") {
          throw std::invalid_argument("sort must be task_id or response_length");
        }
        sort.descending = descending_order(req);
        send_json(res, 200, to_json(list_predictions(*s.augmented, page, page_size, sort)));
      });
    });

    server.Get(base + "/model-behavior",
               [this](const httplib::Request &req, httplib::Response &res) {
                 with_session(req, res, [&](Session &s) {
                   const auto &aug = *s.augmented;
                   InstanceFilter filter;
                   if (req.has_param("filter")) {
                     filter = InstanceFilter::build(
                         aug, parse_filter(Json::parse(req.get_param_value("filter"))));
                   }
                   const auto sort = parse_behavior_sort(param(req, "sort", "task_id"));
                   if (!sort) throw std::invalid_argument("sort must be task_id, score or agreement");
                   send_json(res, 200,
                             to_json(model_behavior(aug, required_param(req, "model"),
                                                    required_param(req, "metric"), filter, *sort,
                                                    descending_order(req))));
                 });
               });

    server.Get(base + "/instances/(.+)", [this](const httplib::Request &req,
                                                httplib::Response &res) {
      with_session(req, res, [&](Session &s) {
        send_json(res, 200, to_json(instance_detail(*s.augmented, req.matches[2])));
      });
    });

    server.Get(base + "/compare", [this](const httplib::Request &req, httplib::Response &res) {
      with_session(req, res, [&](Session &s) {
        const auto &aug = *s.augmented;
        CompareConfig cfg = default_compare_config(aug);
        if (req.has_param("seed")) {
          cfg.test.seed = parse_number<std::uint64_t>(req.get_param_value("seed"), "seed");
        }
        if (req.has_param("iterations")) {
          cfg.test.iterations =
              parse_number<std::size_t>(req.get_param_value("iterations"), "iterations");
        }
        if (req.has_param("exhaustive_threshold")) {
          cfg.test.exhaustive_threshold = parse_number<std::size_t>(
              req.get_param_value("exhaustive_threshold"), "exhaustive_threshold");
        }
        if (req.has_param("k")) cfg.k = parse_number<std::size_t>(req.get_param_value("k"), "k");
        send_json(res, 200,
                  to_json(compare_models(aug, required_param(req, "a"), required_param(req, "b"),
                                         required_param(req, "metric"), cfg)));
      });
    });

    server.Get(base + "/metrics", [this](const httplib::Request &req, httplib::Response &res) {
      with_session(req, res, [&](Session &s) {
        send_json(res, 200, to_json(metric_behavior(*s.augmented)));
      });
    });

    server.Get(base + "/annotators", [this](const httplib::Request &req, httplib::Response &res) {
      with_session(req, res, [&](Session &s) {
        send_json(res, 200, to_json(annotator_report(*s.augmented)));
      });
    });

    server.Get(base + "/dataset", [this](const httplib::Request &req, httplib::Response &res) {
      with_session(req, res, [&](Session &s) {
        send_json(res, 200, to_json(dataset_view(*s.augmented)));
      });
    });

    server.Post(base + "/annotations", [this](const httplib::Request &req,
                                              httplib::Response &res) {
      with_session(req, res, [&](Session &s) {
        const Json body = Json::parse(req.body);
        if (!body.is_object() || !body.contains("task_id") || !body["task_id"].is_string() ||
            !body.contains("kind") || !body["kind"].is_string()) {
          throw std::invalid_argument("annotation needs string fields task_id and kind");
        }
        InstanceAnnotation annotation;
        annotation.task_id = body["task_id"].get<std::string>();
        const auto kind = parse_annotation_kind(body["kind"].get<std::string>());
        if (!kind) throw std::invalid_argument("kind must be flag or comment");
        annotation.kind = *kind;
        auto optional_string = [&](const char *field) -> std::optional<std::string> {
          if (!body.contains(field) || body[field].is_null()) return std::nullopt;
          if (!body[field].is_string()) {
            throw std::invalid_argument(std::string(field) + " must be a string");
          }
          return body[field].get<std::string>();
        };
        annotation.text = optional_string("text");
        annotation.author = optional_string("author");
        s.annotations.annotate(*s.augmented, std::move(annotation));
        send_json(res, 201, {{"count", s.annotations.snapshot().size()}});
      });
    });

    server.Get(base + "/annotations/export",
               [this](const httplib::Request &req, httplib::Response &res) {
                 with_session(req, res, [&](Session &s) {
                   send_json(res, 200, s.annotations.export_json(*s.augmented));
                 });
               });
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() = default;

int Service::bind() {
  if (impl_->config.port == 0) return impl_->server.bind_to_any_port(impl_->config.host);
  return impl_->server.bind_to_port(impl_->config.host, impl_->config.port) ? impl_->config.port
                                                                            : -1;
}

bool Service::listen() { return impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

void Service::wait_until_ready() { impl_->server.wait_until_ready(); }

SessionStore &Service::sessions() { return impl_->store; }

}  // namespace ragscope
