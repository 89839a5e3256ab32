#pragma once

// Stateless HTTP facade. Uploaded experiments live only in memory, inside
// sessions that expire after a period of inactivity.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "ragscope/analysis.hpp"

namespace ragscope {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_upload_bytes = std::size_t{512} << 20U;
  std::chrono::seconds session_ttl{2 * 60 * 60};
  std::size_t memory_budget_bytes = std::size_t{4} << 30U;
  std::size_t mc_iterations = 10'000;
  std::uint64_t default_seed = 42;
  bool cors = false;
  bool request_log = true;
};

struct Session {
  std::string id;
  std::shared_ptr<const AugmentedExperiment> augmented;
  AnnotationStore annotations;
  std::size_t bytes = 0;  // estimated memory footprint
  std::chrono::steady_clock::time_point created_at;
  std::chrono::steady_clock::time_point last_access;
};

class SessionStore {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  SessionStore(std::chrono::seconds ttl, std::size_t memory_budget_bytes,
               Clock clock = std::chrono::steady_clock::now);

  // Returns the new session id. Evicts least recently used sessions while the
  // budget is exceeded (the new session itself is always kept).
  std::string create(std::shared_ptr<const AugmentedExperiment> augmented, std::size_t bytes);

  // nullptr when unknown or expired; otherwise touches last_access.
  std::shared_ptr<Session> find(const std::string &id);

  bool erase(const std::string &id);
  void evict_expired();
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t total_bytes() const;

 private:
  void evict_expired_locked(std::chrono::steady_clock::time_point now);

  std::chrono::seconds ttl_;
  std::size_t budget_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t total_bytes_ = 0;
};

// 128 random bits from std::random_device, hex encoded.
std::string new_session_id();

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service &) = delete;
  Service &operator=(const Service &) = delete;

  // Binds the listening socket. Returns the bound port, or -1 on failure.
  // Port 0 picks a free port.
  int bind();
  // Blocks serving requests until stop() is called.
  bool listen();
  void stop();
  void wait_until_ready();

  [[nodiscard]] SessionStore &sessions();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ragscope
