#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "receipt_ner/category.hpp"
#include "receipt_ner/corpus.hpp"
#include "receipt_ner/predictions.hpp"
#include "receipt_ner/prompting.hpp"

namespace receipt_ner {

struct GenerationParams {
  double temperature = 0.01;
  std::uint32_t top_k = 5;
  bool do_sample = true;
  std::uint32_t max_new_tokens = 30;

  void validate() const {
    if (temperature < 0.0) throw Error("temperature must be non-negative");
    if (top_k == 0) throw Error("top_k must be positive");
    if (max_new_tokens == 0) throw Error("max_new_tokens must be positive");
  }

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

enum class BackendKind { http, mock };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string endpoint;  // http only
  std::chrono::milliseconds timeout{30000};
  std::size_t max_concurrency = 4;
  std::uint32_t retries = 2;

  void validate() const {
    if ((kind == BackendKind::http) == endpoint.empty()) {
      throw Error(kind == BackendKind::http ? "http backend requires an endpoint"
                                            : "endpoint is only valid for the http backend");
    }
    if (max_concurrency == 0) throw Error("max_concurrency must be positive");
  }
};

// Prompt plus the (receipt, category) it was built for.
struct CompletionRequest {
  std::string receipt_id;
  Category category = Category::shopname;
  std::string prompt;
};

class BackendError : public Error {
 public:
  BackendError(const CompletionRequest& req, const std::string& what)
      : Error("(" + req.receipt_id + ", " + std::string(japanese_label(req.category)) + "): " + what) {}
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Continuation text only. Must be safe to call from several threads.
  virtual std::string complete(const CompletionRequest& request, const GenerationParams& params) = 0;
};

// Deterministic lookup keyed by (receipt id, category).
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::string fallback = "Noneです。") : fallback_(std::move(fallback)) {}

  void set(const std::string& receipt_id, Category cat, std::string text) {
    responses_[{receipt_id, cat}] = std::move(text);
  }

  std::string complete(const CompletionRequest& request, const GenerationParams&) override {
    if (request.prompt.empty()) throw BackendError(request, "empty prompt");
    auto it = responses_.find({request.receipt_id, request.category});
    return it == responses_.end() ? fallback_ : it->second;
  }

  // Answers every pair with its first ground-truth form.
  static MockBackend perfect(const Corpus& corpus, const PromptTemplate& tpl = {}) {
    MockBackend m(std::string(kNoneLiteral) + tpl.terminator);
    for (const auto& r : corpus.records) {
      for (Category c : kCategories) m.set(r.id, c, first_truth(r, c).to_prompt_string() + tpl.terminator);
    }
    return m;
  }

  static MockBackend always_none(const PromptTemplate& tpl = {}) {
    return MockBackend(std::string(kNoneLiteral) + tpl.terminator);
  }

  // {"fallback": "...", "responses": [{"receipt_id", "category", "text"}]}
  static MockBackend from_json(const nlohmann::json& j) {
    MockBackend m(j.value("fallback", std::string("Noneです。")));
    if (j.contains("responses")) {
      for (const auto& r : j.at("responses")) {
        m.set(r.at("receipt_id").get<std::string>(), category_or_throw(r.at("category").get<std::string>()),
              r.at("text").get<std::string>());
      }
    }
    return m;
  }

  static MockBackend load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open mock responses '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ": " + e.what());
    }
  }

 private:
  std::map<std::pair<std::string, Category>, std::string> responses_;
  std::string fallback_;
};

struct ExtractionOptions {
  GenerationParams params;
  PromptTemplate prompt_template;
  std::size_t max_concurrency = 1;
};

// One row per (record, category), sorted by receipt id then category.
// Backend failures become rows with an empty answer and the error text.
inline std::vector<PredictionRow> run_extraction(const Corpus& corpus, Backend& backend,
                                                 const ExtractionOptions& opts = {}) {
  opts.params.validate();
  std::vector<const ReceiptRecord*> records;
  for (const auto& r : corpus.records) records.push_back(&r);
  std::stable_sort(records.begin(), records.end(),
                   [](const ReceiptRecord* a, const ReceiptRecord* b) { return a->id < b->id; });

  const std::size_t total = records.size() * kNumCategories;
  std::vector<PredictionRow> rows(total);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const auto& record = *records[k / kNumCategories];
      const Category cat = kCategories[k % kNumCategories];
      PredictionRow& row = rows[k];
      row.receipt_id = record.id;
      row.category = cat;
      CompletionRequest req{record.id, cat, {}};
      try {
        req.prompt = build_inference_prompt(record.text, cat, opts.prompt_template).text;
        const auto completion = parse_completion(backend.complete(req, opts.params), opts.prompt_template);
        row.raw = completion.raw;
        row.answer = completion.answer;
        row.terminated = completion.terminated;
      } catch (const std::exception& e) {
        row.raw.clear();
        row.answer = Answer(std::string());
        row.terminated = false;
        row.error = e.what();
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.max_concurrency, total));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  return rows;
}

}  // namespace receipt_ner
