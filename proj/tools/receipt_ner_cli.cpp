// receipt-ner: estimate, corrupt, prompts, tag, extract, score, select, report.

#include <glob.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "receipt_ner/http_backend.hpp"
#include "receipt_ner/receipt_ner.hpp"

namespace rn = receipt_ner;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  std::string format;
};

int report_warnings(const rn::Warnings& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return static_cast<int>(warnings.size());
}

std::ofstream open_out(const std::string& path) {
  if (path.empty()) throw rn::Error("--out is required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rn::Error("cannot write '" + path + "'");
  return out;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& p : patterns) {
    glob_t g{};
    if (::glob(p.c_str(), 0, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
  }
  return out;
}

// Flag values that override the config file when given.
struct Overrides {
  std::optional<std::string> backend, endpoint, mock;
  std::optional<std::int64_t> timeout_ms;
  std::optional<std::uint32_t> retries;
  std::optional<std::size_t> concurrency;
  std::optional<double> temperature;
  std::optional<std::uint32_t> top_k;
  std::optional<bool> do_sample;
  std::optional<std::uint32_t> max_new_tokens;
  std::optional<double> beta;
  std::optional<std::string> weights;
  std::optional<bool> strip_currency;
  std::optional<std::size_t> max_len;
  std::optional<double> newline_rate;

  void add_backend(CLI::App* app) {
    app->add_option("--backend", backend, "http or mock")->check(CLI::IsMember({"http", "mock"}));
    app->add_option("--endpoint", endpoint, "completion endpoint URL (http backend)");
    app->add_option("--mock", mock, "perfect, none, or a mock responses JSON file");
    app->add_option("--timeout-ms", timeout_ms, "per-request timeout");
    app->add_option("--retries", retries, "retries per request");
    app->add_option("--concurrency", concurrency, "maximum in-flight requests");
    app->add_option("--temperature", temperature);
    app->add_option("--top-k", top_k);
    app->add_option("--do-sample", do_sample);
    app->add_option("--max-new-tokens", max_new_tokens);
  }
  void add_scoring(CLI::App* app) {
    app->add_option("--beta", beta);
    app->add_option("--weights", weights, "six comma-separated category weights");
    app->add_option("--strip-currency", strip_currency, "strip currency signs from non-numeric categories");
  }

  void apply(rn::Settings& s) const {
    auto set = [&s](const char* key, const std::string& v) { rn::apply_setting(s, key, v); };
    if (backend) set("backend.kind", *backend);
    if (endpoint) set("backend.endpoint", *endpoint);
    if (mock) set("backend.mock", *mock);
    if (timeout_ms) s.backend.timeout = std::chrono::milliseconds(*timeout_ms);
    if (retries) s.backend.retries = *retries;
    if (concurrency) s.backend.max_concurrency = *concurrency;
    if (temperature) s.generation.temperature = *temperature;
    if (top_k) s.generation.top_k = *top_k;
    if (do_sample) s.generation.do_sample = *do_sample;
    if (max_new_tokens) s.generation.max_new_tokens = *max_new_tokens;
    if (beta) s.scoring.beta = *beta;
    if (weights) set("scoring.weights", *weights);
    if (strip_currency) s.scoring.strip_currency = *strip_currency;
    if (max_len) s.chunking.max_len = *max_len;
    if (newline_rate) s.newline_insertion_rate = *newline_rate;
  }
};

rn::Settings resolve_settings(const Globals& g, const Overrides& o) {
  rn::Settings s = g.config.empty() ? rn::Settings{} : rn::load_settings(g.config);
  o.apply(s);
  s.prompt_template.validate();
  return s;
}

// ---- subcommands --------------------------------------------------------------

int cmd_estimate(const Globals& g, const std::string& truth_path, const std::string& ocr_path,
                 const std::string& counts_path) {
  const auto truth = rn::load_texts(truth_path);
  const auto ocr = rn::load_texts(ocr_path);
  std::map<std::string, const rn::TextRecord*> ocr_by_id;
  for (const auto& r : ocr) ocr_by_id[r.id] = &r;
  std::vector<rn::TextPair> pairs;
  std::vector<std::string> missing;
  for (const auto& t : truth) {
    auto it = ocr_by_id.find(t.id);
    if (it == ocr_by_id.end()) {
      missing.push_back(t.id);
      continue;
    }
    pairs.emplace_back(t.text, it->second->text);
    ocr_by_id.erase(it);
  }
  for (const auto& [id, r] : ocr_by_id) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = "id mismatch between truth and OCR files:";
    for (const auto& id : missing) msg += " " + id;
    throw rn::Error(msg);
  }
  const auto counts = rn::count_confusions(pairs);
  const auto matrix = counts.to_matrix();
  auto out = open_out(g.out);
  rn::write_matrix(out, matrix);
  if (!counts_path.empty()) {
    std::ofstream c(counts_path, std::ios::binary);
    if (!c) throw rn::Error("cannot write '" + counts_path + "'");
    rn::write_counts(c, counts);
  }
  std::cout << "pairs: " << matrix.pair_count() << '\n';
  return 0;
}

int cmd_corrupt(const Globals& g, const Overrides& o, const std::string& corpus_path, const std::string& matrix_path,
                const std::string& variant) {
  const auto settings = resolve_settings(g, o);
  rn::Warnings warnings;
  const auto corpus = rn::load_corpus(corpus_path, rn::Split::train, &warnings);
  const auto matrix = matrix_path.empty() ? rn::ConfusionMatrix{} : rn::load_matrix(matrix_path);
  rn::CorruptionSpec spec{rn::parse_variant(variant), g.seed, settings.newline_insertion_rate};
  const auto samples = rn::generate_training_variant(corpus, matrix, spec, &warnings);
  auto out = open_out(g.out);
  rn::write_variant(out, samples);
  report_warnings(warnings);
  std::cout << "samples: " << samples.size() << '\n';
  return 0;
}

int cmd_prompts(const Globals& g, const Overrides& o, const std::string& input, const std::string& kind_name,
                const std::string& from) {
  const auto settings = resolve_settings(g, o);
  const auto kind = rn::parse_prompt_kind(kind_name);
  const auto& tpl = settings.prompt_template;

  struct Source {
    std::string id;
    std::uint32_t repeat;
    std::string text;
    rn::PerCategory<rn::Answer> answers;
  };
  std::vector<Source> sources;
  rn::Warnings warnings;
  if (from == "variant") {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw rn::Error("cannot open '" + input + "'");
    for (auto& s : rn::read_variant(in, input)) sources.push_back({s.id, s.repeat, s.text, s.answers});
  } else {
    const auto corpus = rn::load_corpus(input, rn::Split::train, &warnings);
    for (const auto& r : corpus.records) {
      Source s{r.id, 0, r.text, {}};
      for (rn::Category c : rn::kCategories) s.answers[rn::index(c)] = rn::first_truth(r, c);
      sources.push_back(std::move(s));
    }
  }

  std::vector<rn::PromptSample> samples;
  std::size_t rejected = 0;
  for (const auto& src : sources) {
    for (rn::Category c : rn::kCategories) {
      try {
        auto s = kind == rn::PromptKind::training ? rn::build_training_prompt(src.text, c, src.answers[rn::index(c)], tpl)
                                                  : rn::build_inference_prompt(src.text, c, tpl);
        s.receipt_id = src.id;
        s.repeat = src.repeat;
        const auto diag = rn::check_template_integrity(s, tpl);
        if (!diag.ok()) {
          warnings.push_back(src.id + "/" + std::string(rn::japanese_label(c)) + ": instruction marker x" +
                             std::to_string(diag.instruction_count) + ", response marker x" +
                             std::to_string(diag.response_count));
        }
        samples.push_back(std::move(s));
      } catch (const rn::TemplateError& e) {
        ++rejected;
        warnings.push_back(src.id + "/" + std::string(rn::japanese_label(c)) + ": rejected: " + e.what());
      }
    }
  }
  auto out = open_out(g.out);
  rn::write_prompts(out, samples);
  report_warnings(warnings);
  if (!tpl.is_default()) std::cerr << "note: non-default prompt template in use\n";
  std::cout << "prompts: " << samples.size() << '\n';
  if (rejected > 0) {
    std::cerr << "error: " << rejected << " prompt(s) rejected\n";
    return 1;
  }
  return 0;
}

int cmd_tag(const Globals& g, const Overrides& o, const std::string& mode, const std::string& input) {
  const auto settings = resolve_settings(g, o);
  rn::Warnings warnings;
  auto out = open_out(g.out);
  if (mode == "encode" || mode == "rule") {
    const auto corpus = rn::load_corpus(input, rn::Split::train, &warnings);
    std::size_t lines = 0;
    for (const auto& r : corpus.records) {
      const auto seq = mode == "encode" ? rn::encode_tags(r, &warnings) : rn::rule_tag(r.text);
      for (const auto& span : rn::straddling_spans(seq, settings.chunking)) {
        warnings.push_back("record '" + r.id + "': " + std::string(rn::japanese_label(span.category)) + " '" +
                           span.surface + "' straddles a chunk boundary");
      }
      const auto chunks = rn::chunk(seq, settings.chunking);
      for (std::size_t k = 0; k < chunks.size(); ++k) {
        auto j = rn::to_json(chunks[k], r.id);
        if (chunks.size() > 1) j["chunk"] = k;
        out << j.dump() << '\n';
        ++lines;
      }
    }
    report_warnings(warnings);
    std::cout << "sequences: " << lines << '\n';
    return 0;
  }
  if (mode == "decode") {
    // Chunks of one id are concatenated in file order before decoding.
    std::ifstream in(input, std::ios::binary);
    if (!in) throw rn::Error("cannot open '" + input + "'");
    std::vector<std::string> order;
    std::map<std::string, std::vector<rn::TagSequence>> parts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (rn::unicode::trim_view(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const auto id = j.at("id").get<std::string>();
        if (!parts.count(id)) order.push_back(id);
        parts[id].push_back(rn::tag_sequence_from_json(j));
      } catch (const std::exception& e) {
        throw rn::ParseError(input, lineno, e.what());
      }
    }
    for (const auto& id : order) {
      const auto decoded = rn::decode_tags(rn::concat(parts[id]));
      nlohmann::ordered_json ents = nlohmann::ordered_json::object();
      for (rn::Category c : rn::kCategories) ents[std::string(rn::japanese_label(c))] = decoded[rn::index(c)];
      nlohmann::ordered_json j;
      j["id"] = id;
      j["entities"] = ents;
      out << j.dump() << '\n';
    }
    std::cout << "records: " << order.size() << '\n';
    return 0;
  }
  if (mode == "predict") {
    const auto corpus = rn::load_corpus(input, rn::Split::test, &warnings);
    const auto rows = rn::tag_predictions(corpus, [](std::string_view t) { return rn::rule_tag(t); });
    rn::write_predictions(out, rows);
    report_warnings(warnings);
    std::cout << "rows: " << rows.size() << '\n';
    return 0;
  }
  throw rn::Error("unknown tag mode '" + mode + "'");
}

std::unique_ptr<rn::Backend> make_backend(const rn::Settings& s, const rn::Corpus& corpus) {
  if (s.backend.kind == rn::BackendKind::http) return std::make_unique<rn::HttpBackend>(s.backend);
  if (s.mock == "perfect") return std::make_unique<rn::MockBackend>(rn::MockBackend::perfect(corpus, s.prompt_template));
  if (s.mock == "none") return std::make_unique<rn::MockBackend>(rn::MockBackend::always_none(s.prompt_template));
  return std::make_unique<rn::MockBackend>(rn::MockBackend::load(s.mock));
}

int cmd_extract(const Globals& g, const Overrides& o, const std::string& corpus_path, const std::string& split,
                const std::string& variant, std::optional<std::uint64_t> iterations) {
  if (g.out.empty()) throw rn::Error("--out is required");
  const auto settings = resolve_settings(g, o);
  settings.backend.validate();
  rn::Warnings warnings;
  const auto corpus = rn::load_corpus(corpus_path, rn::parse_split(split), &warnings);
  auto backend = make_backend(settings, corpus);
  rn::ExtractionOptions opts{settings.generation, settings.prompt_template, settings.backend.max_concurrency};
  const auto rows = rn::run_extraction(corpus, *backend, opts);
  rn::save_predictions(g.out, rows);

  auto manifest = rn::make_manifest(settings, rn::parse_variant(variant), g.seed, iterations);
  manifest.created_at = utc_now();
  std::ofstream m(g.out + ".manifest.json", std::ios::binary);
  m << manifest.to_json().dump(2) << '\n';

  report_warnings(warnings);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
  if (failed > 0) std::cerr << "warning: " << failed << " request(s) failed; recorded with empty answers\n";
  std::cout << "rows: " << rows.size() << "\nconfig_id: " << manifest.config_id << '\n';
  return 0;
}

int cmd_score(const Globals& g, const Overrides& o, const std::string& predictions_path,
              const std::string& corpus_path, const std::string& split, std::optional<std::string> config_id,
              std::optional<std::uint64_t> iterations) {
  const auto settings = resolve_settings(g, o);
  rn::Warnings warnings;
  const auto corpus = rn::load_corpus(corpus_path, rn::parse_split(split), &warnings);
  const auto rows = rn::load_predictions(predictions_path);
  auto report = rn::score_predictions(corpus, rows, settings.scoring);

  const auto manifest_path = predictions_path + ".manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path, std::ios::binary);
    const auto manifest = rn::RunManifest::from_json(nlohmann::json::parse(in));
    report.config_id = manifest.config_id;
    report.iterations = manifest.iterations;
    report.manifest_digest = manifest.digest();
  }
  if (config_id) report.config_id = *config_id;
  if (iterations) report.iterations = *iterations;
  if (report.config_id.empty()) report.config_id = std::filesystem::path(predictions_path).stem().string();

  if (g.out.empty()) throw rn::Error("--out is required");
  {
    auto csv = open_out(g.out + ".csv");
    rn::write_report_csv(csv, report);
    auto md = open_out(g.out + ".md");
    rn::write_report_markdown(md, report);
    auto js = open_out(g.out + ".json");
    js << rn::to_json(report).dump(2) << '\n';
  }
  report_warnings(warnings);
  if (g.format == "csv") rn::write_report_csv(std::cout, report);
  else if (g.format == "md") rn::write_report_markdown(std::cout, report);
  else if (g.format == "jsonl") std::cout << rn::to_json(report).dump() << '\n';
  std::cout << "F_final: " << rn::percent(report.f_final) << '\n';
  return 0;
}

int cmd_select(const std::vector<std::string>& patterns) {
  const auto paths = expand_globs(patterns);
  if (paths.empty()) throw rn::Error("no reports match the given pattern(s)");
  std::vector<rn::ScoreReport> reports;
  for (const auto& p : paths) reports.push_back(rn::load_report(p));
  const auto& best = rn::select_best_report(reports);
  std::cout << best.config_id << '\t' << rn::percent(best.f_final) << '\n';
  return 0;
}

int cmd_report(const Globals& g, const std::vector<std::string>& patterns) {
  const auto paths = expand_globs(patterns);
  if (paths.empty()) throw rn::Error("no reports match the given pattern(s)");
  std::vector<rn::ScoreReport> reports;
  for (const auto& p : paths) reports.push_back(rn::load_report(p));
  std::ostringstream ss;
  const std::string format = g.format.empty() ? "md" : g.format;
  if (format == "jsonl") {
    for (const auto& r : reports) ss << rn::to_json(r).dump() << '\n';
  } else if (reports.size() == 1) {
    if (format == "csv") rn::write_report_csv(ss, reports.front());
    else rn::write_report_markdown(ss, reports.front());
  } else {
    if (format == "csv") rn::write_summary_csv(ss, reports);
    else rn::write_summary_markdown(ss, reports);
  }
  if (g.out.empty()) {
    std::cout << ss.str();
  } else {
    auto out = open_out(g.out);
    out << ss.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receipt named-entity extraction toolkit: OCR noise, prompts, BIO tags, extraction and scoring"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "base seed; the only source of randomness");
  app.add_option("--config", g.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output path");
  app.add_option("--format", g.format, "csv, md or jsonl")->check(CLI::IsMember({"csv", "md", "jsonl"}));

  Overrides o;

  std::string truth_path, ocr_path, counts_path;
  auto* estimate = app.add_subcommand("estimate", "estimate a confusion matrix from parallel truth/OCR text");
  estimate->add_option("truth", truth_path, "JSONL with {id, text}")->required()->check(CLI::ExistingFile);
  estimate->add_option("ocr", ocr_path, "JSONL with {id, text}, same ids")->required()->check(CLI::ExistingFile);
  estimate->add_option("--counts", counts_path, "also write raw substitution counts");

  std::string corpus_path, matrix_path, variant = "truth";
  auto* corrupt = app.add_subcommand("corrupt", "generate a truth/ocr1/ocr10 training variant");
  corrupt->add_option("corpus", corpus_path, "train corpus JSONL")->required()->check(CLI::ExistingFile);
  corrupt->add_option("--matrix", matrix_path, "confusion matrix TSV")->check(CLI::ExistingFile);
  corrupt->add_option("--variant", variant)->check(CLI::IsMember({"truth", "ocr1", "ocr10"}));
  corrupt->add_option("--newline-rate", o.newline_rate, "extension: newline insertion probability (default 0)");

  std::string prompt_input, kind = "training", from = "corpus";
  auto* prompts = app.add_subcommand("prompts", "build training or inference prompts");
  prompts->add_option("input", prompt_input, "corpus JSONL or generated variant JSONL")->required()->check(CLI::ExistingFile);
  prompts->add_option("--kind", kind)->check(CLI::IsMember({"training", "inference"}));
  prompts->add_option("--from", from, "input type")->check(CLI::IsMember({"corpus", "variant"}));

  std::string tag_mode, tag_input;
  auto* tag = app.add_subcommand("tag", "BIO encode/decode, rule tagging, rule-tagger predictions");
  tag->add_option("mode", tag_mode)->required()->check(CLI::IsMember({"encode", "decode", "rule", "predict"}));
  tag->add_option("input", tag_input)->required()->check(CLI::ExistingFile);
  tag->add_option("--max-len", o.max_len, "chunk length (default 512)");

  std::string split = "test", extract_variant = "truth";
  std::optional<std::uint64_t> iterations;
  auto* extract = app.add_subcommand("extract", "query a backend for every (receipt, category) pair");
  extract->add_option("corpus", corpus_path)->required()->check(CLI::ExistingFile);
  extract->add_option("--split", split);
  extract->add_option("--variant", extract_variant, "fine-tuning dataset of the model, for the manifest");
  extract->add_option("--iterations", iterations, "checkpoint iterations, for the manifest");
  o.add_backend(extract);

  std::string predictions_path;
  std::optional<std::string> config_id;
  auto* score = app.add_subcommand("score", "score predictions against a corpus");
  score->add_option("predictions", predictions_path)->required()->check(CLI::ExistingFile);
  score->add_option("corpus", corpus_path)->required()->check(CLI::ExistingFile);
  score->add_option("--split", split);
  score->add_option("--config-id", config_id);
  score->add_option("--iterations", iterations);
  o.add_scoring(score);

  std::vector<std::string> patterns;
  auto* select = app.add_subcommand("select", "pick the best config from validation reports (JSON)");
  select->add_option("reports", patterns, "report JSON paths or glob patterns")->required();

  auto* report = app.add_subcommand("report", "render report JSON files as tables");
  report->add_option("reports", patterns)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*estimate) return cmd_estimate(g, truth_path, ocr_path, counts_path);
    if (*corrupt) return cmd_corrupt(g, o, corpus_path, matrix_path, variant);
    if (*prompts) return cmd_prompts(g, o, prompt_input, kind, from);
    if (*tag) return cmd_tag(g, o, tag_mode, tag_input);
    if (*extract) return cmd_extract(g, o, corpus_path, split, extract_variant, iterations);
    if (*score) return cmd_score(g, o, predictions_path, corpus_path, split, config_id, iterations);
    if (*select) return cmd_select(patterns);
    if (*report) return cmd_report(g, patterns);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
