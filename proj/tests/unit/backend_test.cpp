#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <random>
#include <thread>

#include "receipt_ner/backend.hpp"
#include "receipt_ner/http_backend.hpp"
#include "receipt_ner/scoring.hpp"
#include "synthetic.hpp"

using namespace receipt_ner;

namespace {

// Local completion server: replies {"text": reply(body)}, or 500 when
// reply returns nullopt. Request bodies are recorded.
class StubServer {
 public:
  using Reply = std::function<std::optional<std::string>(const nlohmann::json&)>;

  explicit StubServer(Reply reply) : reply_(std::move(reply)) {
    server_.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(body);
      }
      const auto text = reply_(body);
      if (!text) {
        res.status = 500;
        return;
      }
      res.set_content(nlohmann::json{{"text", *text}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/generate"; }

  std::vector<nlohmann::json> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }

 private:
  Reply reply_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<nlohmann::json> bodies_;
};

BackendConfig http_config(const std::string& endpoint, std::uint32_t retries = 0) {
  BackendConfig cfg;
  cfg.kind = BackendKind::http;
  cfg.endpoint = endpoint;
  cfg.timeout = std::chrono::milliseconds(5000);
  cfg.retries = retries;
  return cfg;
}

}  // namespace

TEST(Mock, LookupAndFallback) {
  MockBackend m;
  m.set("r1", Category::shopname, "Boulangerie BARUC PLUSです。");
  EXPECT_EQ(m.complete({"r1", Category::shopname, "p"}, {}), "Boulangerie BARUC PLUSです。");
  EXPECT_EQ(m.complete({"r2", Category::shopname, "p"}, {}), "Noneです。");
  EXPECT_THROW(m.complete({"r1", Category::shopname, ""}, {}), BackendError);
}

TEST(Mock, FromJson) {
  const auto m = MockBackend::from_json(nlohmann::json::parse(
      R"({"fallback":"?","responses":[{"receipt_id":"r1","category":"total","text":"¥270です。"}]})"));
  auto copy = m;
  EXPECT_EQ(copy.complete({"r1", Category::total, "p"}, {}), "¥270です。");
  EXPECT_EQ(copy.complete({"r1", Category::date, "p"}, {}), "?");
}

TEST(Params, DefaultsAndValidation) {
  const GenerationParams p;
  EXPECT_DOUBLE_EQ(p.temperature, 0.01);
  EXPECT_EQ(p.top_k, 5u);
  EXPECT_EQ(p.max_new_tokens, 30u);
  EXPECT_TRUE(p.do_sample);
  GenerationParams bad;
  bad.top_k = 0;
  EXPECT_THROW(bad.validate(), Error);
  BackendConfig cfg;
  cfg.kind = BackendKind::http;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Extraction, RowCountOrderAndPerfectMock) {
  std::mt19937_64 rng(30);
  auto corpus = synth::random_corpus(rng, 78, Split::test);
  std::shuffle(corpus.records.begin(), corpus.records.end(), rng);
  auto mock = MockBackend::perfect(corpus);
  for (std::size_t threads : {1u, 4u}) {
    ExtractionOptions opts;
    opts.max_concurrency = threads;
    const auto rows = run_extraction(corpus, mock, opts);
    ASSERT_EQ(rows.size(), 468u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto a = std::make_pair(rows[i - 1].receipt_id, index(rows[i - 1].category));
      const auto b = std::make_pair(rows[i].receipt_id, index(rows[i].category));
      EXPECT_LT(a, b);
    }
    for (const auto& row : rows) {
      const auto& rec = *std::find_if(corpus.records.begin(), corpus.records.end(),
                                      [&](const ReceiptRecord& r) { return r.id == row.receipt_id; });
      EXPECT_EQ(row.answer, first_truth(rec, row.category));
      EXPECT_TRUE(row.terminated);
      EXPECT_TRUE(row.error.empty());
    }
    EXPECT_DOUBLE_EQ(score_predictions(corpus, rows).f_final, 1.0);
  }
}

TEST(Extraction, AlwaysNoneMock) {
  std::mt19937_64 rng(31);
  const auto corpus = synth::random_corpus(rng, 10, Split::test);
  auto mock = MockBackend::always_none();
  const auto rows = run_extraction(corpus, mock);
  for (const auto& row : rows) EXPECT_TRUE(row.answer.is_none());
  const auto rep = score_predictions(corpus, rows);
  for (const auto& s : rep.per_category) {
    EXPECT_EQ(s.fp, 0u);
    if (s.fn > 0) {
      EXPECT_LT(s.recall, 1.0);
    }
  }
}

TEST(Extraction, FailuresBecomeEmptyAnswerRows) {
  class Flaky : public Backend {
   public:
    std::string complete(const CompletionRequest& r, const GenerationParams&) override {
      if (r.category == Category::date) throw BackendError(r, "boom");
      return "xです。";
    }
  } flaky;
  std::mt19937_64 rng(32);
  const auto corpus = synth::random_corpus(rng, 5, Split::test);
  const auto rows = run_extraction(corpus, flaky);
  ASSERT_EQ(rows.size(), 30u);
  for (const auto& row : rows) {
    if (row.category == Category::date) {
      EXPECT_EQ(row.answer, Answer(""));
      EXPECT_NE(row.error.find("boom"), std::string::npos);
      EXPECT_NE(row.error.find("日付"), std::string::npos);
    } else {
      EXPECT_EQ(row.answer, Answer("x"));
    }
  }
}

TEST(Extraction, ConcurrentCallsAreBounded) {
  class Counting : public Backend {
   public:
    std::atomic<int> active{0}, peak{0};
    std::string complete(const CompletionRequest&, const GenerationParams&) override {
      const int now = ++active;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
      --active;
      return "Noneです。";
    }
  } counting;
  std::mt19937_64 rng(33);
  const auto corpus = synth::random_corpus(rng, 10, Split::test);
  ExtractionOptions opts;
  opts.max_concurrency = 3;
  EXPECT_EQ(run_extraction(corpus, counting, opts).size(), 60u);
  EXPECT_LE(counting.peak.load(), 3);
}

TEST(Http, EndpointSplit) {
  const auto e = split_endpoint("http://127.0.0.1:8080/v1/generate");
  EXPECT_EQ(e.origin, "http://127.0.0.1:8080");
  EXPECT_EQ(e.path, "/v1/generate");
  EXPECT_EQ(split_endpoint("http://h").path, "/");
  EXPECT_THROW(split_endpoint("127.0.0.1/x"), Error);
}

TEST(Http, StubEchoCarriesGenerationParams) {
  StubServer stub([](const nlohmann::json&) { return std::optional<std::string>("¥270です。"); });
  HttpBackend backend(http_config(stub.endpoint()));
  const auto prompt = build_inference_prompt("合計 ¥270", Category::total).text;
  EXPECT_EQ(backend.complete({"r1", Category::total, prompt}, GenerationParams{}), "¥270です。");
  const auto bodies = stub.bodies();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(bodies[0]["prompt"], prompt);
  EXPECT_DOUBLE_EQ(bodies[0]["temperature"].get<double>(), 0.01);
  EXPECT_EQ(bodies[0]["top_k"], 5);
  EXPECT_EQ(bodies[0]["max_new_tokens"], 30);
  EXPECT_EQ(bodies[0]["do_sample"], true);
}

TEST(Http, RetriesThenSucceeds) {
  std::atomic<int> calls{0};
  StubServer stub([&](const nlohmann::json&) -> std::optional<std::string> {
    if (calls++ < 2) return std::nullopt;
    return "okです。";
  });
  HttpBackend backend(http_config(stub.endpoint(), 2));
  EXPECT_EQ(backend.complete({"r1", Category::date, "p"}, {}), "okです。");
  EXPECT_EQ(calls.load(), 3);
}

TEST(Http, ExhaustedRetriesNameThePair) {
  StubServer stub([](const nlohmann::json&) -> std::optional<std::string> { return std::nullopt; });
  HttpBackend backend(http_config(stub.endpoint(), 1));
  try {
    backend.complete({"r7", Category::address, "p"}, {});
    FAIL();
  } catch (const BackendError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("r7"), std::string::npos);
    EXPECT_NE(msg.find("住所"), std::string::npos);
    EXPECT_NE(msg.find("500"), std::string::npos);
    EXPECT_NE(msg.find("2 attempt"), std::string::npos);
  }
}

TEST(Http, UnreachableServerStillYieldsCompleteTable) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto cfg = http_config("http://127.0.0.1:" + std::to_string(port) + "/generate");
  cfg.timeout = std::chrono::milliseconds(300);
  HttpBackend backend(cfg);
  std::mt19937_64 rng(34);
  const auto corpus = synth::random_corpus(rng, 2, Split::test);
  const auto rows = run_extraction(corpus, backend);
  ASSERT_EQ(rows.size(), 12u);
  for (const auto& row : rows) {
    EXPECT_FALSE(row.error.empty());
    EXPECT_EQ(row.answer, Answer(""));
  }
}
