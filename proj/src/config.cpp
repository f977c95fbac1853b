#include "hintsteer/config.hpp"

#include <cstdlib>
#include <set>

#include "hintsteer/digest.hpp"
#include "text_util.hpp"

namespace hintsteer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void Read(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key) || doc_[key].is_null()) return;
    try {
      out = doc_[key].get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + Where(key) + "' has the wrong type");
    }
  }

  const json* Raw(const char* key) {
    seen_.insert(key);
    if (!doc_.contains(key) || doc_[key].is_null()) return nullptr;
    return &doc_[key];
  }

  std::string Where(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  void RejectUnknown() const {
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key '" + (name_.empty() ? key : name_ + "." + key) + "'");
      }
    }
  }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

json InterpolateTree(const json& node) {
  if (node.is_string()) return InterpolateEnv(node.get<std::string>());
  if (node.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : node.items()) out[k] = InterpolateTree(v);
    return out;
  }
  if (node.is_array()) {
    json out = json::array();
    for (const auto& v : node) out.push_back(InterpolateTree(v));
    return out;
  }
  return node;
}

void ReadPath(Section& s, const char* key, fs::path& out, const fs::path& base) {
  std::string text;
  s.Read(key, text);
  if (text.empty()) return;
  fs::path p(text);
  out = (p.is_relative() && !base.empty()) ? base / p : p;
}

std::string PcaScopeName(PcaScope s) { return s == PcaScope::kFold ? "fold" : "global"; }

Syntax ConfigSyntax(const std::string& text, const std::string& where) {
  if (text == "A" || text == "a") return Syntax::kA;
  if (text == "B" || text == "b") return Syntax::kB;
  if (text == "C" || text == "c") return Syntax::kC;
  throw ConfigError(where + " must be A, B or C, got '" + text + "'");
}

}  // namespace

std::string InterpolateEnv(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.substr(i).starts_with("$${")) {
      out += "${";
      i += 2;
      continue;
    }
    if (text.substr(i).starts_with("${")) {
      const auto close = text.find('}', i + 2);
      if (close == std::string_view::npos) {
        throw ConfigError("unterminated ${ in config value '" + std::string(text) + "'");
      }
      const std::string name(text.substr(i + 2, close - i - 2));
      const char* value = std::getenv(name.c_str());
      if (value == nullptr) throw ConfigError("environment variable " + name + " is not set");
      out += value;
      i = close;
      continue;
    }
    out.push_back(text[i]);
  }
  return out;
}

RunConfig ConfigFromJson(const json& raw, const fs::path& base_dir) {
  const json doc = InterpolateTree(raw);
  RunConfig cfg;
  Section top(doc, "");

  if (const json* p = top.Raw("paths")) {
    Section s(*p, "paths");
    ReadPath(s, "queries", cfg.paths.queries, base_dir);
    ReadPath(s, "latencies", cfg.paths.latencies, base_dir);
    ReadPath(s, "catalog", cfg.paths.catalog, base_dir);
    ReadPath(s, "cache", cfg.paths.cache, base_dir);
    ReadPath(s, "models", cfg.paths.models, base_dir);
    ReadPath(s, "out", cfg.paths.out, base_dir);
    s.RejectUnknown();
  }

  if (const json* p = top.Raw("provider")) {
    Section s(*p, "provider");
    auto& pc = cfg.provider;
    s.Read("kind", pc.kind);
    s.Read("dim", pc.hash_dim);
    s.Read("seed", pc.hash_seed);
    s.Read("endpoint", pc.endpoint);
    s.Read("model_id", pc.model_id);
    s.Read("api_key", pc.api_key);
    s.Read("parallelism", pc.parallelism);
    s.Read("batch_size", pc.batch_size);
    s.Read("timeout_s", pc.timeout_s);
    s.Read("max_attempts", pc.max_attempts);
    s.RejectUnknown();
  }

  if (const json* p = top.Raw("pipeline")) {
    Section s(*p, "pipeline");
    auto& pl = cfg.pipeline;
    s.Read("n_components", pl.n_components);
    s.Read("n_folds", pl.n_folds);
    s.Read("seed", pl.seed);
    s.Read("timeout_penalty", pl.timeout_penalty);
    if (const json* a = s.Raw("alternative_hint_id")) {
      if (!a->is_number_integer()) throw ConfigError("pipeline.alternative_hint_id must be an integer");
      pl.alternative_hint_id = a->get<int>();
    }
    std::string scope = PcaScopeName(pl.pca_scope);
    s.Read("pca_scope", scope);
    if (scope == "fold") {
      pl.pca_scope = PcaScope::kFold;
    } else if (scope == "global") {
      pl.pca_scope = PcaScope::kGlobal;
    } else {
      throw ConfigError("pipeline.pca_scope must be 'fold' or 'global', got '" + scope + "'");
    }
    if (const json* svm_doc = s.Raw("svm")) {
      Section sv(*svm_doc, "pipeline.svm");
      auto& svm = pl.svm;
      sv.Read("c", svm.c);
      sv.Read("tolerance", svm.tolerance);
      sv.Read("max_passes", svm.max_passes);
      if (const json* g = sv.Raw("gamma")) {
        if (g->is_string() && *g == "auto") {
          svm.gamma.reset();
        } else if (g->is_number()) {
          svm.gamma = g->get<double>();
        } else {
          throw ConfigError("pipeline.svm.gamma must be a number or \"auto\"");
        }
      }
      if (const json* w = sv.Raw("class_weights")) {
        if (w->is_string() && *w == "auto") {
          svm.class_weights.reset();
        } else if (w->is_string() && *w == "none") {
          svm.class_weights = ClassWeights{};
        } else if (w->is_object()) {
          Section ws(*w, "pipeline.svm.class_weights");
          ClassWeights cw;
          ws.Read("DEFAULT", cw.default_weight);
          ws.Read("ALTERNATIVE", cw.alternative_weight);
          ws.RejectUnknown();
          svm.class_weights = cw;
        } else {
          throw ConfigError(
              "pipeline.svm.class_weights must be \"auto\", \"none\" or {\"DEFAULT\": w, \"ALTERNATIVE\": w}");
        }
      }
      sv.RejectUnknown();
    }
    s.RejectUnknown();
  }
  cfg.pipeline.svm.seed = cfg.pipeline.seed;

  if (const json* p = top.Raw("syntax")) {
    Section s(*p, "syntax");
    std::string train(ToString(cfg.syntax.train)), test(ToString(cfg.syntax.test));
    s.Read("train", train);
    s.Read("test", test);
    cfg.syntax.train = ConfigSyntax(train, "syntax.train");
    cfg.syntax.test = ConfigSyntax(test, "syntax.test");
    if (const json* v = s.Raw("variants")) {
      if (!v->is_array()) throw ConfigError("syntax.variants must be an array");
      cfg.syntax.variants.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) throw ConfigError("syntax.variants entries must be strings");
        cfg.syntax.variants.push_back(ConfigSyntax(e.get<std::string>(), "syntax.variants"));
      }
    }
    s.RejectUnknown();
  }

  if (const json* p = top.Raw("db")) {
    Section s(*p, "db");
    s.Read("connection", cfg.db.connection);
    s.Read("statement_timeout_ms", cfg.db.statement_timeout_ms);
    s.Read("warm_runs", cfg.db.warm_runs);
    s.Read("runs", cfg.db.runs);
    s.RejectUnknown();
  }

  top.RejectUnknown();
  return cfg;
}

RunConfig LoadConfig(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file does not exist: " + path.string());
  json doc;
  try {
    doc = json::parse(detail::ReadFile(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return ConfigFromJson(doc, fs::absolute(path).parent_path());
}

json ConfigToJson(const RunConfig& c) {
  json svm = {
      {"c", c.pipeline.svm.c},
      {"tolerance", c.pipeline.svm.tolerance},
      {"max_passes", c.pipeline.svm.max_passes},
      {"gamma", c.pipeline.svm.gamma ? json(*c.pipeline.svm.gamma) : json("auto")},
  };
  if (c.pipeline.svm.class_weights) {
    svm["class_weights"] = {{"DEFAULT", c.pipeline.svm.class_weights->default_weight},
                            {"ALTERNATIVE", c.pipeline.svm.class_weights->alternative_weight}};
  } else {
    svm["class_weights"] = "auto";
  }
  json variants = json::array();
  for (Syntax s : c.syntax.variants) variants.push_back(ToString(s));
  return {
      {"paths",
       {{"queries", c.paths.queries.string()},
        {"latencies", c.paths.latencies.string()},
        {"catalog", c.paths.catalog.string()},
        {"cache", c.paths.cache.string()},
        {"models", c.paths.models.string()},
        {"out", c.paths.out.string()}}},
      {"provider",
       {{"kind", c.provider.kind},
        {"dim", c.provider.hash_dim},
        {"seed", c.provider.hash_seed},
        {"endpoint", c.provider.endpoint},
        {"model_id", c.provider.model_id},
        {"api_key", c.provider.api_key},
        {"parallelism", c.provider.parallelism},
        {"batch_size", c.provider.batch_size},
        {"timeout_s", c.provider.timeout_s},
        {"max_attempts", c.provider.max_attempts}}},
      {"pipeline",
       {{"n_components", c.pipeline.n_components},
        {"n_folds", c.pipeline.n_folds},
        {"seed", c.pipeline.seed},
        {"pca_scope", PcaScopeName(c.pipeline.pca_scope)},
        {"timeout_penalty", c.pipeline.timeout_penalty},
        {"alternative_hint_id",
         c.pipeline.alternative_hint_id ? json(*c.pipeline.alternative_hint_id) : json(nullptr)},
        {"svm", svm}}},
      {"syntax",
       {{"train", ToString(c.syntax.train)}, {"test", ToString(c.syntax.test)}, {"variants", variants}}},
      {"db",
       {{"connection", c.db.connection},
        {"statement_timeout_ms", c.db.statement_timeout_ms},
        {"warm_runs", c.db.warm_runs},
        {"runs", c.db.runs}}},
  };
}

std::string ConfigHash(const RunConfig& config) {
  json doc = ConfigToJson(config);
  // Where files live does not change what gets computed; the manifest binds
  // input contents by digest instead.
  doc.erase("paths");
  doc["provider"]["api_key"] = "";
  doc["db"]["connection"] = "";
  return Sha256Hex(doc.dump());
}

}  // namespace hintsteer
