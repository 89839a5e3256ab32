#include <atomic>
#include <set>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "fixture.hpp"
#include "ragscope/service.hpp"

using namespace ragscope;

namespace {

class Running {
 public:
  explicit Running(ServiceConfig config = quiet()) : service_(std::move(config)) {
    port_ = service_.bind();
    if (port_ > 0) thread_ = std::thread([this] { service_.listen(); });
    service_.wait_until_ready();
  }
  ~Running() {
    service_.stop();
    if (thread_.joinable()) thread_.join();
  }

  static ServiceConfig quiet() {
    ServiceConfig config;
    config.port = 0;
    config.request_log = false;
    return config;
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30);
    return c;
  }
  int port() const { return port_; }
  Service &service() { return service_; }

 private:
  Service service_;
  int port_ = -1;
  std::thread thread_;
};

std::string fixture_body() { return fixtures::read_text(fixtures::fixture_path("experiment.json")); }

std::string upload(httplib::Client &c, const std::string &body = fixture_body()) {
  auto res = c.Post("/api/experiments", body, "application/json");
  if (!res || res->status != 201) return {};
  return Json::parse(res->body)["session_id"].get<std::string>();
}

Json get_json(httplib::Client &c, const std::string &path, int expected = 200) {
  auto res = c.Get(path);
  EXPECT_TRUE(res);
  if (!res) return nullptr;
  EXPECT_EQ(res->status, expected) << path << "\n" << res->body;
  return Json::parse(res->body);
}

}  // namespace

TEST(Service, UploadCreatesSession) {
  Running server;
  auto c = server.client();
  auto res = c.Post("/api/experiments", fixture_body(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  const Json body = Json::parse(res->body);
  EXPECT_EQ(body["session_id"].get<std::string>().size(), 32u);
  EXPECT_TRUE(body["warnings"].empty());
  EXPECT_EQ(server.service().sessions().size(), 1u);
}

TEST(Service, UploadRejectsInvalidExperiment) {
  Running server;
  auto c = server.client();
  Json doc = fixtures::fixture_json();
  doc["tasks"][0]["contexts"][0] = "doc-999";
  auto res = c.Post("/api/experiments", doc.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  const Json body = Json::parse(res->body);
  EXPECT_EQ(body["errors"][0]["code"], "DANGLING_DOCUMENT_REF");
  EXPECT_EQ(body["errors"][0]["path"], "tasks[0].contexts[0]");
  EXPECT_EQ(server.service().sessions().size(), 0u);
}

TEST(Service, UploadRejectsUnparseableBody) {
  Running server;
  auto c = server.client();
  auto res = c.Post("/api/experiments", "not-a-document", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(Json::parse(res->body)["parse_errors"][0]["path"], "$");
}

TEST(Service, UploadOverLimit) {
  ServiceConfig config = Running::quiet();
  config.max_upload_bytes = 1024;
  Running server(config);
  auto c = server.client();
  auto res = c.Post("/api/experiments", fixture_body(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
}

TEST(Service, Views) {
  Running server;
  auto c = server.client();
  const std::string base = "/api/experiments/" + upload(c);

  const Json human = get_json(c, base + "/overview?type=human");
  EXPECT_EQ(human["rows"].size(), 6u);
  get_json(c, base + "/overview?type=robots", 400);

  const Json page = get_json(c, base + "/predictions?page=3&page_size=7");
  EXPECT_EQ(page["rows"].size(), 6u);
  EXPECT_EQ(page["total"], 20);
  EXPECT_TRUE(get_json(c, base + "/predictions?page=99&page_size=7")["rows"].empty());
  get_json(c, base + "/predictions?page=0", 400);
  get_json(c, base + "/predictions?page=abc", 400);
  const Json longest = get_json(c, base + "/predictions?sort=response_length&model=model-a&order=desc");
  EXPECT_EQ(longest["rows"].size(), 20u);

  const Json detail = get_json(c, base + "/instances/t-01");
  EXPECT_EQ(detail["documents"].size(), 2u);
  EXPECT_EQ(detail["models"].size(), 3u);
  get_json(c, base + "/instances/t-404", 404);

  EXPECT_EQ(get_json(c, base + "/metrics")["metrics"].size(), 4u);
  EXPECT_FALSE(get_json(c, base + "/annotators")["empty"].get<bool>());
  EXPECT_EQ(get_json(c, base + "/dataset")["n_tasks"], 20);
}

TEST(Service, ModelBehaviorFilters) {
  Running server;
  auto c = server.client();
  const std::string base = "/api/experiments/" + upload(c) + "/model-behavior?model=model-a";

  EXPECT_EQ(get_json(c, base + "&metric=rouge_l")["histogram"]["total"], 20);
  const std::string filter =
      httplib::detail::encode_query_param(R"({"metadata":{"answerability":"unanswerable"}})");
  EXPECT_EQ(get_json(c, base + "&metric=rouge_l&filter=" + filter)["histogram"]["total"], 8);
  const std::string empty = httplib::detail::encode_query_param(
      R"({"scores":[{"metric":"rouge_l","min":0.9,"max":1.0}]})");
  const Json none = get_json(c, base + "&metric=rouge_l&filter=" + empty);
  EXPECT_EQ(none["histogram"]["total"], 0);
  EXPECT_TRUE(none["rows"].empty());

  get_json(c, base + "&metric=rouge_l&filter=" + httplib::detail::encode_query_param("{oops"), 400);
  get_json(c, base + "&metric=rouge_l&filter=" + httplib::detail::encode_query_param(R"({"x":1})"),
           400);
  get_json(c, base + "&metric=bleu", 404);
  get_json(c, base, 400);
}

TEST(Service, CompareIsReproducible) {
  Running server;
  auto c = server.client();
  const std::string base = "/api/experiments/" + upload(c);
  const std::string path =
      base + "/compare?a=model-a&b=model-b&metric=rouge_l&seed=7&exhaustive_threshold=5";
  auto first = c.Get(path);
  auto second = c.Get(path);
  ASSERT_TRUE(first && second);
  EXPECT_EQ(first->status, 200);
  EXPECT_EQ(first->body, second->body);
  EXPECT_EQ(Json::parse(first->body)["result"]["method"], "monte_carlo");
  get_json(c, base + "/compare?a=model-a&b=model-z&metric=rouge_l", 404);
  get_json(c, base + "/compare?a=model-a&metric=rouge_l", 400);
}

TEST(Service, CompareNeedsSharedInstances) {
  Running server;
  auto c = server.client();
  ExperimentFile f = fixtures::fixture();
  f.models.push_back({"model-d", "D", std::nullopt});
  f.tasks.push_back({"t-99", {{Speaker::user, "q"}}, {}, std::nullopt, {}});
  f.evaluations.clear();
  for (const auto &task : f.tasks) {
    for (const auto &model : f.models) {
      Evaluation e{task.task_id, model.model_id, "r", {}};
      const bool scored = model.model_id != "model-d" || task.task_id == "t-99";
      if (scored) e.annotations["rouge_l"]["rouge"] = Rating{0.5, std::nullopt, std::nullopt};
      f.evaluations.push_back(std::move(e));
    }
  }
  const std::string base = "/api/experiments/" + upload(c, serialize_experiment(f));
  get_json(c, base + "/compare?a=model-a&b=model-d&metric=rouge_l", 422);
}

TEST(Service, SameFileSameSeedSamePayloads) {
  Running server;
  auto c = server.client();
  const std::string one = "/api/experiments/" + upload(c);
  const std::string two = "/api/experiments/" + upload(c);
  ASSERT_NE(one, two);
  for (const char *view : {"/overview", "/metrics", "/annotators", "/dataset",
                           "/predictions?page=2&page_size=5", "/instances/t-07",
                           "/compare?a=model-b&b=model-c&metric=faithfulness"}) {
    auto a = c.Get(one + view);
    auto b = c.Get(two + view);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->body, b->body) << view;
  }
}

TEST(Service, AnnotationsStayInSession) {
  Running server;
  auto c = server.client();
  const std::string base = "/api/experiments/" + upload(c);
  auto res = c.Post(base + "/annotations", R"({"task_id":"t-03","kind":"flag"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  res = c.Post(base + "/annotations",
               R"({"task_id":"t-03","kind":"comment","text":"odd context","author":"rev"})",
               "application/json");
  EXPECT_EQ(Json::parse(res->body)["count"], 2);

  const Json exported = get_json(c, base + "/annotations/export");
  ASSERT_EQ(exported["annotations"]["t-03"].size(), 2u);
  EXPECT_EQ(exported["annotations"]["t-03"][0]["kind"], "flag");
  EXPECT_EQ(exported["annotations"]["t-03"][1]["text"], "odd context");

  auto bad = [&](const char *body, int status) {
    auto r = c.Post(base + "/annotations", body, "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, status) << body;
  };
  bad(R"({"task_id":"t-03","kind":"comment","text":""})", 400);
  bad(R"({"task_id":"t-404","kind":"flag"})", 404);
  bad(R"({"task_id":"t-03","kind":"shout"})", 400);
  bad("{", 400);

  const std::string other = "/api/experiments/" + upload(c);
  EXPECT_EQ(get_json(c, other + "/annotations/export")["count"], 0);
}

TEST(Service, DeleteEvictsImmediately) {
  Running server;
  auto c = server.client();
  const std::string base = "/api/experiments/" + upload(c);
  auto res = c.Delete(base);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  get_json(c, base + "/overview", 404);
  EXPECT_EQ(c.Delete(base)->status, 404);
  EXPECT_EQ(server.service().sessions().size(), 0u);
}

TEST(Service, UnknownSession) {
  Running server;
  auto c = server.client();
  get_json(c, "/api/experiments/0123456789abcdef0123456789abcdef/overview", 404);
}

TEST(Service, RestartForgetsSessions) {
  std::string base;
  int port = 0;
  {
    Running first;
    auto c = first.client();
    base = "/api/experiments/" + upload(c);
    port = first.port();
    get_json(c, base + "/overview");
  }
  ServiceConfig config = Running::quiet();
  config.port = port;
  Running second(config);
  auto c = second.client();
  get_json(c, base + "/overview", 404);
}

TEST(Service, CorsHeaders) {
  ServiceConfig config = Running::quiet();
  config.cors = true;
  Running server(config);
  auto c = server.client();
  const std::string base = "/api/experiments/" + upload(c);
  auto res = c.Get(base + "/dataset");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");

  Running plain;
  auto p = plain.client();
  auto other = p.Get("/api/experiments/" + upload(p) + "/dataset");
  EXPECT_FALSE(other->has_header("Access-Control-Allow-Origin"));
}

TEST(Service, ConcurrentReaders) {
  Running server;
  auto c = server.client();
  const std::string base = "/api/experiments/" + upload(c);
  const std::string expected = c.Get(base + "/annotators")->body;
  std::vector<std::thread> readers;
  std::atomic<int> mismatches{0};
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      auto local = server.client();
      for (int i = 0; i < 10; ++i) {
        auto res = local.Get(base + "/annotators");
        if (!res || res->body != expected) ++mismatches;
      }
    });
  }
  for (auto &t : readers) t.join();
  EXPECT_EQ(mismatches.load(), 0);
}

// ---- session store ----

namespace {

struct FakeClock {
  std::chrono::steady_clock::time_point now{};
  SessionStore::Clock fn() {
    return [this] { return now; };
  }
};

std::shared_ptr<const AugmentedExperiment> tiny() {
  static auto aug = std::make_shared<const AugmentedExperiment>(augment(fixtures::fixture()));
  return aug;
}

}  // namespace

TEST(SessionStore, ExpiresAfterInactivity) {
  FakeClock clock;
  SessionStore store(std::chrono::seconds(60), 1 << 20, clock.fn());
  const std::string id = store.create(tiny(), 10);
  clock.now += std::chrono::seconds(59);
  ASSERT_TRUE(store.find(id));
  clock.now += std::chrono::seconds(59);
  EXPECT_TRUE(store.find(id)) << "find touches last_access";
  clock.now += std::chrono::seconds(60);
  EXPECT_FALSE(store.find(id));
  EXPECT_EQ(store.size(), 0u);
  EXPECT_EQ(store.total_bytes(), 0u);
}

TEST(SessionStore, EvictsLeastRecentlyUsedOverBudget) {
  FakeClock clock;
  SessionStore store(std::chrono::hours(2), 100, clock.fn());
  const std::string a = store.create(tiny(), 40);
  clock.now += std::chrono::seconds(1);
  const std::string b = store.create(tiny(), 40);
  clock.now += std::chrono::seconds(1);
  ASSERT_TRUE(store.find(a));
  clock.now += std::chrono::seconds(1);
  const std::string c = store.create(tiny(), 40);
  EXPECT_TRUE(store.find(a));
  EXPECT_FALSE(store.find(b));
  EXPECT_TRUE(store.find(c));
  EXPECT_EQ(store.total_bytes(), 80u);
}

TEST(SessionStore, KeepsNewSessionEvenIfOversized) {
  FakeClock clock;
  SessionStore store(std::chrono::hours(2), 100, clock.fn());
  const std::string a = store.create(tiny(), 50);
  const std::string big = store.create(tiny(), 500);
  EXPECT_FALSE(store.find(a));
  EXPECT_TRUE(store.find(big));
  EXPECT_EQ(store.size(), 1u);
}

TEST(SessionStore, IdsAreUniqueHex) {
  std::set<std::string> ids;
  for (int i = 0; i < 1000; ++i) {
    const std::string id = new_session_id();
    ASSERT_EQ(id.size(), 32u);
    ASSERT_EQ(id.find_first_not_of("0123456789abcdef"), std::string::npos);
    ids.insert(id);
  }
  EXPECT_EQ(ids.size(), 1000u);
}
