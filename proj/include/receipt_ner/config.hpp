#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iosfwd>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "receipt_ner/backend.hpp"
#include "receipt_ner/bio_codec.hpp"
#include "receipt_ner/corpus.hpp"
#include "receipt_ner/ocr_noise.hpp"
#include "receipt_ner/prompting.hpp"
#include "receipt_ner/scoring.hpp"

namespace receipt_ner {

// Everything a config file can set.
//
// Format: one "key = value" per line, '#' starts a comment line. String
// values may be JSON-quoted to carry escapes such as "\n".
//
//   backend.kind            http | mock
//   backend.endpoint        http://host:port/path
//   backend.timeout_ms      integer
//   backend.max_concurrency integer
//   backend.retries         integer
//   backend.mock            perfect | none | path to a responses JSON file
//   generation.temperature, generation.top_k, generation.do_sample,
//   generation.max_new_tokens
//   scoring.beta, scoring.weights (six comma-separated reals),
//   scoring.strip_currency
//   template.instruction_marker, template.response_marker,
//   template.terminator, template.category_joiner, template.leading_space
//   chunking.max_len
//   noise.newline_insertion_rate
struct Settings {
  BackendConfig backend;
  std::string mock = "perfect";
  GenerationParams generation;
  ScoringConfig scoring;
  PromptTemplate prompt_template;
  ChunkingConfig chunking;
  double newline_insertion_rate = 0.0;
};

namespace detail {

inline std::string config_string(std::string_view raw) {
  const auto v = unicode::trim(raw);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return nlohmann::json::parse(v).get<std::string>();
  return v;
}

inline bool config_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("expected a boolean, got '" + v + "'");
}

template <typename T>
T config_number(const std::string& v) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t used = 0;
    try {
      out = static_cast<T>(std::stod(v, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw Error("expected a number, got '" + v + "'");
  } else {
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw Error("expected an integer, got '" + v + "'");
  }
  return out;
}

}  // namespace detail

inline void apply_setting(Settings& s, std::string_view key, std::string_view raw_value) {
  const std::string v = detail::config_string(raw_value);
  using detail::config_bool;
  using detail::config_number;
  if (key == "backend.kind") {
    if (v == "http") s.backend.kind = BackendKind::http;
    else if (v == "mock") s.backend.kind = BackendKind::mock;
    else throw Error("backend.kind must be http or mock");
  } else if (key == "backend.endpoint") {
    s.backend.endpoint = v;
  } else if (key == "backend.timeout_ms") {
    s.backend.timeout = std::chrono::milliseconds(config_number<std::int64_t>(v));
  } else if (key == "backend.max_concurrency") {
    s.backend.max_concurrency = config_number<std::size_t>(v);
  } else if (key == "backend.retries") {
    s.backend.retries = config_number<std::uint32_t>(v);
  } else if (key == "backend.mock") {
    s.mock = v;
  } else if (key == "generation.temperature") {
    s.generation.temperature = config_number<double>(v);
  } else if (key == "generation.top_k") {
    s.generation.top_k = config_number<std::uint32_t>(v);
  } else if (key == "generation.do_sample") {
    s.generation.do_sample = config_bool(v);
  } else if (key == "generation.max_new_tokens") {
    s.generation.max_new_tokens = config_number<std::uint32_t>(v);
  } else if (key == "scoring.beta") {
    s.scoring.beta = config_number<double>(v);
  } else if (key == "scoring.weights") {
    std::istringstream ss(v);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
      if (i == kNumCategories) throw Error("scoring.weights takes exactly six values");
      s.scoring.weights[i++] = config_number<double>(unicode::trim(item));
    }
    if (i != kNumCategories) throw Error("scoring.weights takes exactly six values");
  } else if (key == "scoring.strip_currency") {
    s.scoring.strip_currency = config_bool(v);
  } else if (key == "template.instruction_marker") {
    s.prompt_template.instruction_marker = v;
  } else if (key == "template.response_marker") {
    s.prompt_template.response_marker = v;
  } else if (key == "template.terminator") {
    s.prompt_template.terminator = v;
  } else if (key == "template.category_joiner") {
    s.prompt_template.category_joiner = v;
  } else if (key == "template.leading_space") {
    s.prompt_template.leading_space = config_bool(v);
  } else if (key == "chunking.max_len") {
    s.chunking.max_len = config_number<std::size_t>(v);
  } else if (key == "noise.newline_insertion_rate") {
    s.newline_insertion_rate = config_number<double>(v);
  } else {
    throw Error("unknown config key '" + std::string(key) + "'");
  }
}

inline void read_settings(std::istream& in, Settings& s, const std::string& source = "<config>") {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = unicode::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
    try {
      apply_setting(s, unicode::trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
}

inline Settings load_settings(const std::string& path) {
  Settings s;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file '" + path + "'");
  read_settings(in, s, path);
  return s;
}

// ---- run manifest -------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

inline std::string backend_digest(const Settings& s) {
  nlohmann::ordered_json j;
  j["kind"] = s.backend.kind == BackendKind::http ? "http" : "mock";
  if (s.backend.kind == BackendKind::http) j["endpoint"] = s.backend.endpoint;
  else j["mock"] = s.mock;
  j["temperature"] = s.generation.temperature;
  j["top_k"] = s.generation.top_k;
  j["do_sample"] = s.generation.do_sample;
  j["max_new_tokens"] = s.generation.max_new_tokens;
  return hex64(fnv1a64(j.dump()));
}

inline std::string template_digest(const PromptTemplate& t) {
  nlohmann::ordered_json j;
  j["instruction_marker"] = t.instruction_marker;
  j["response_marker"] = t.response_marker;
  j["terminator"] = t.terminator;
  j["category_joiner"] = t.category_joiner;
  j["leading_space"] = t.leading_space;
  return hex64(fnv1a64(j.dump()));
}

struct RunManifest {
  std::string config_id;
  Variant variant = Variant::truth;
  std::uint64_t base_seed = 0;
  std::string backend_digest;
  std::string template_digest;
  bool default_template = true;
  std::optional<std::uint64_t> iterations;
  std::string created_at;

  static std::string make_config_id(Variant v, std::uint64_t seed, const std::string& backend,
                                    const std::string& tpl) {
    return hex64(fnv1a64(std::string(to_string(v)) + '\x1f' + std::to_string(seed) + '\x1f' + backend + '\x1f' + tpl));
  }

  // Everything but the timestamp.
  nlohmann::ordered_json stable_json() const {
    nlohmann::ordered_json j;
    j["config_id"] = config_id;
    j["variant"] = std::string(to_string(variant));
    j["base_seed"] = base_seed;
    j["backend_digest"] = backend_digest;
    j["template_digest"] = template_digest;
    j["default_template"] = default_template;
    j["iterations"] = iterations ? nlohmann::ordered_json(*iterations) : nlohmann::ordered_json(nullptr);
    return j;
  }

  std::string digest() const { return hex64(fnv1a64(stable_json().dump())); }

  nlohmann::ordered_json to_json() const {
    auto j = stable_json();
    j["created_at"] = created_at;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.config_id = j.at("config_id").get<std::string>();
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.backend_digest = j.at("backend_digest").get<std::string>();
    m.template_digest = j.at("template_digest").get<std::string>();
    m.default_template = j.value("default_template", true);
    if (j.contains("iterations") && !j.at("iterations").is_null()) m.iterations = j.at("iterations").get<std::uint64_t>();
    m.created_at = j.value("created_at", std::string());
    return m;
  }
};

inline RunManifest make_manifest(const Settings& s, Variant variant, std::uint64_t seed,
                                 std::optional<std::uint64_t> iterations) {
  RunManifest m;
  m.variant = variant;
  m.base_seed = seed;
  m.backend_digest = backend_digest(s);
  m.template_digest = template_digest(s.prompt_template);
  m.default_template = s.prompt_template.is_default();
  m.iterations = iterations;
  m.config_id = RunManifest::make_config_id(variant, seed, m.backend_digest, m.template_digest);
  return m;
}

}  // namespace receipt_ner
