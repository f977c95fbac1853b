#include "hintsteer/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "hintsteer/classifier.hpp"
#include "hintsteer/digest.hpp"
#include "hintsteer/evaluation.hpp"
#include "hintsteer/features.hpp"
#include "hintsteer/pg_client.hpp"
#include "hintsteer/syntax.hpp"
#include "hintsteer/workload.hpp"
#include "text_util.hpp"

namespace hintsteer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<Syntax, 3> kAllSyntaxes = {Syntax::kA, Syntax::kB, Syntax::kC};

// Runs `fn`, prefixing any library error with the pipeline stage it came from.
template <typename Fn>
auto Stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), name + ": " + e.what());
  }
}

void RequireInput(const fs::path& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string(key) + " is not configured");
  if (!fs::exists(path)) throw ConfigError(std::string(key) + " does not exist: " + path.string());
}

std::string Dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string WriteJson(const fs::path& path, const json& doc) {
  const std::string text = Dump(doc);
  detail::WriteFile(path, text);
  return Sha256Hex(text);
}

json ReadJson(const fs::path& path, const char* what) {
  if (!fs::exists(path)) {
    throw DataError(std::string(what) + " not found at " + path.string());
  }
  try {
    return json::parse(detail::ReadFile(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": malformed JSON: " + e.what());
  }
}

std::string SyntaxKey(Syntax s) { return std::string(ToString(s)); }

// The persisted result of ingest, as read back by later commands.
struct StoredQuery {
  std::string id;
  Benchmark source = Benchmark::kOther;
  double default_ms = 0.0;
  double alternative_ms = 0.0;
  Label label = Label::kDefault;
  std::map<Syntax, std::string> sql;
};

struct WorkloadStore {
  HintId alternative_hint_id = kDefaultHintId;
  std::vector<StoredQuery> queries;

  LabelSet Labels() const {
    LabelSet set;
    set.alternative_hint_id = alternative_hint_id;
    for (const auto& q : queries) set.labels[q.id] = q.label;
    return set;
  }

  std::vector<EvalQuery> EvalQueries() const {
    std::vector<EvalQuery> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back({q.id, q.default_ms, q.alternative_ms, q.label});
    return out;
  }

  const std::string& Sql(const StoredQuery& q, Syntax s) const {
    auto it = q.sql.find(s);
    if (it == q.sql.end()) {
      throw ConfigError("syntax variant " + SyntaxKey(s) + " was not materialized for query '" + q.id +
                        "'; add it to syntax.variants and re-run ingest");
    }
    return it->second;
  }
};

WorkloadStore LoadStore(const RunConfig& config) {
  const json doc = ReadJson(config.paths.out / artifacts::kWorkload, "workload store (run `ingest` first)");
  WorkloadStore store;
  try {
    if (doc.at("format") != "hintsteer.workload") throw DataError("not a workload store");
    store.alternative_hint_id = doc.at("alternative_hint_id").get<int>();
    for (const auto& q : doc.at("queries")) {
      StoredQuery sq;
      sq.id = q.at("id").get<std::string>();
      sq.source = ParseBenchmark(q.at("source").get<std::string>());
      sq.default_ms = q.at("default_ms").get<double>();
      sq.alternative_ms = q.at("alternative_ms").get<double>();
      sq.label = ParseLabel(q.at("label").get<std::string>());
      for (const auto& [k, v] : q.at("sql").items()) sq.sql[ParseSyntax(k)] = v.get<std::string>();
      store.queries.push_back(std::move(sq));
    }
  } catch (const json::exception& e) {
    throw DataError("workload store is malformed: " + std::string(e.what()));
  }
  if (store.queries.empty()) throw DataError("workload store holds no queries");
  return store;
}

// Row i holds the cached embedding of queries[i] in syntax `s`.
Matrix EmbeddingMatrix(const WorkloadStore& store, const EmbeddingCache& cache,
                       const std::string& model_id, Syntax s) {
  Matrix m;
  for (std::size_t i = 0; i < store.queries.size(); ++i) {
    const auto& q = store.queries[i];
    const std::string digest = TextDigest(store.Sql(q, s));
    auto values = cache.Lookup(model_id, digest);
    if (!values) {
      throw DataError("missing embedding for digest " + digest + " (query '" + q.id + "', syntax " +
                      SyntaxKey(s) + ", model " + model_id + "); run `embed` first");
    }
    if (i == 0) m.resize(static_cast<Eigen::Index>(store.queries.size()),
                         static_cast<Eigen::Index>(values->size()));
    m.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Vector>(values->data(), static_cast<Eigen::Index>(values->size()));
  }
  return m;
}

CvConfig MakeCvConfig(const RunConfig& config) {
  CvConfig cv;
  cv.n_components = config.pipeline.n_components;
  cv.svm = config.pipeline.svm;
  cv.svm.seed = config.pipeline.seed;
  cv.n_folds = config.pipeline.n_folds;
  cv.seed = config.pipeline.seed;
  cv.pca_scope = config.pipeline.pca_scope;
  return cv;
}

json Provenance(const RunConfig& config) {
  return {{"config_hash", ConfigHash(config)},
          {"seed", config.pipeline.seed},
          {"model_id", ProviderModelId(config.provider)}};
}

std::string HintLabel(const HintSet& h) {
  std::string disabled;
  for (int f = 0; f < kPlannerFlagCount; ++f) {
    if (!h.enabled[static_cast<std::size_t>(f)]) {
      if (!disabled.empty()) disabled += ",";
      disabled += FlagVariableName(static_cast<PlannerFlag>(f));
    }
  }
  return "hint " + std::to_string(h.id) + (disabled.empty() ? " (default)" : " (off: " + disabled + ")");
}

std::string FormatPct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string ProviderModelId(const ProviderConfig& config) {
  if (config.kind == "hash") return HashProvider(config.hash_dim, config.hash_seed).ModelId();
  if (config.kind == "remote") {
    if (config.model_id.empty()) throw ConfigError("provider.model_id is required for a remote provider");
    return config.model_id;
  }
  throw ConfigError("provider.kind must be 'hash' or 'remote', got '" + config.kind + "'");
}

std::unique_ptr<EmbeddingProvider> MakeProvider(const ProviderConfig& config) {
  if (config.parallelism < 1) throw ConfigError("provider.parallelism must be at least 1");
  if (config.batch_size < 1) throw ConfigError("provider.batch_size must be at least 1");
  if (config.kind == "hash") {
    if (config.hash_dim < 1) throw ConfigError("provider.dim must be at least 1");
    return std::make_unique<HashProvider>(config.hash_dim, config.hash_seed);
  }
  if (config.kind == "remote") {
    if (config.endpoint.empty()) throw ConfigError("provider.endpoint is required for a remote provider");
    RemoteProviderConfig rc;
    rc.endpoint = config.endpoint;
    rc.model_id = ProviderModelId(config);
    rc.api_key = config.api_key;
    rc.timeout = std::chrono::seconds(config.timeout_s);
    rc.retry.max_attempts = config.max_attempts;
    return std::make_unique<RemoteProvider>(std::move(rc));
  }
  throw ConfigError("provider.kind must be 'hash' or 'remote', got '" + config.kind + "'");
}

std::vector<HintSet> ConfiguredCatalog(const RunConfig& config) {
  if (config.paths.catalog.empty()) return DefaultCatalog();
  RequireInput(config.paths.catalog, "paths.catalog");
  return LoadCatalog(config.paths.catalog);
}

json ErrorJson(const Error& error) {
  return {{"error",
           {{"kind", KindName(error.kind())},
            {"message", error.what()},
            {"exit_code", ExitCode(error.kind())}}}};
}

// ---------------------------------------------------------------------------
// ingest

void CmdIngest(const RunConfig& config, std::ostream& out) {
  RequireInput(config.paths.queries, "paths.queries");
  RequireInput(config.paths.latencies, "paths.latencies");
  const auto catalog = ConfiguredCatalog(config);

  const auto base = Stage("load queries", [&] { return LoadQueries(config.paths.queries, Syntax::kA); });
  if (base.empty()) throw DataError("no queries found under " + config.paths.queries.string());

  // Explicitly provided B/C texts win over generated ones.
  std::map<Syntax, std::map<std::string, std::string>> provided;
  for (Syntax s : {Syntax::kB, Syntax::kC}) {
    for (auto& r : Stage("load queries", [&] { return LoadQueries(config.paths.queries, s); })) {
      provided[s][r.id] = std::move(r.sql);
    }
  }

  const auto observations = Stage("read latencies", [&] { return ReadObservations(config.paths.latencies); });
  std::set<HintId> catalog_ids;
  for (const auto& h : catalog) catalog_ids.insert(h.id);
  for (const auto& o : observations) {
    if (!catalog_ids.count(o.hint_set_id)) {
      throw DataError("latency file references hint set " + std::to_string(o.hint_set_id) +
                      " which is not in the catalog");
    }
  }
  const LatencyMatrix matrix =
      Stage("aggregate runs", [&] { return AggregateRuns(observations, config.pipeline.timeout_penalty); });

  std::set<std::string> query_ids;
  for (const auto& q : base) query_ids.insert(q.id);
  for (const auto& id : matrix.QueryIds()) {
    if (!query_ids.count(id)) throw DataError("latency file mentions unknown query '" + id + "'");
  }
  for (const auto& id : query_ids) {
    if (matrix.Find(id, kDefaultHintId) == nullptr) {
      throw DataError("query '" + id + "' has no latency under the default hint set");
    }
  }

  HintId alternative = kDefaultHintId;
  if (config.pipeline.alternative_hint_id) {
    alternative = *config.pipeline.alternative_hint_id;
    if (!catalog_ids.count(alternative) || alternative == kDefaultHintId) {
      throw ConfigError("pipeline.alternative_hint_id " + std::to_string(alternative) +
                        " must be a non-default catalog entry");
    }
  } else {
    alternative = Stage("select alternative", [&] { return SelectAlternativeHint(matrix, kDefaultHintId); });
  }
  const LabelSet labels =
      Stage("label queries", [&] { return LabelQueries(matrix, kDefaultHintId, alternative); });
  const SkewReport skew = ComputeSkew(matrix);
  const auto improvements = HintImprovements(matrix, kDefaultHintId);
  const HintSet& alt_hint = FindHint(catalog, alternative);

  std::set<Syntax> variants(config.syntax.variants.begin(), config.syntax.variants.end());
  variants.insert(Syntax::kA);
  variants.insert(config.syntax.train);
  variants.insert(config.syntax.test);

  json queries = json::array();
  std::map<Benchmark, std::size_t> by_source;
  for (const auto& q : base) {
    json sql = json::object();
    json digests = json::object();
    for (Syntax s : variants) {
      std::string text;
      if (s == Syntax::kA) {
        text = q.sql;
      } else if (auto it = provided[s].find(q.id); it != provided[s].end()) {
        text = it->second;
      } else {
        text = Stage("materialize syntax " + SyntaxKey(s) + " for query '" + q.id + "'",
                     [&] { return ToSyntax(q.sql, s); });
      }
      digests[SyntaxKey(s)] = TextDigest(text);
      sql[SyntaxKey(s)] = std::move(text);
    }
    ++by_source[q.source];
    queries.push_back({
        {"id", q.id},
        {"source", ToString(q.source)},
        {"default_ms", matrix.Mean(q.id, kDefaultHintId)},
        {"alternative_ms", matrix.Mean(q.id, alternative)},
        {"default_timed_out", matrix.Find(q.id, kDefaultHintId)->timed_out},
        {"alternative_timed_out", matrix.Find(q.id, alternative)->timed_out},
        {"label", ToString(labels.labels.at(q.id))},
        {"sql", sql},
        {"digest", digests},
    });
  }

  const std::size_t n = labels.labels.size();
  const std::size_t n_alt = labels.CountOf(Label::kAlternative);
  const double prior = static_cast<double>(n_alt) / static_cast<double>(n);

  json skew_json = {
      {"most_frequent_hint_id", skew.most_frequent},
      {"least_frequent_hint_id", skew.least_frequent},
      {"max_min_ratio", std::isfinite(skew.max_min_ratio) ? json(skew.max_min_ratio) : json(nullptr)},
  };
  json counts = json::object();
  for (const auto& [h, c] : skew.optimal_counts) counts[std::to_string(h)] = c;
  skew_json["optimal_counts"] = counts;
  json improvement_json = json::object();
  for (const auto& [h, v] : improvements) improvement_json[std::to_string(h)] = v;

  const json prov = {{"config_hash", ConfigHash(config)}, {"seed", config.pipeline.seed}};
  json store = {
      {"format", "hintsteer.workload"},
      {"version", 1},
      {"provenance", prov},
      {"default_hint_id", kDefaultHintId},
      {"alternative_hint_id", alternative},
      {"alternative_hint_prefix", RenderHintPrefix(alt_hint)},
      {"queries", queries},
  };
  json report = {
      {"format", "hintsteer.ingest_report"},
      {"version", 1},
      {"provenance", prov},
      {"queries", n},
      {"observations", observations.size()},
      {"alternative_hint_id", alternative},
      {"alternative_label_prior", prior},
      {"alternative_count", n_alt},
      {"improvement_ms_by_hint", improvement_json},
      {"skew", skew_json},
  };

  fs::create_directories(config.paths.out);
  WriteJson(config.paths.out / artifacts::kWorkload, store);
  WriteJson(config.paths.out / artifacts::kIngestReport, report);
  detail::WriteFile(config.paths.out / artifacts::kLabels, FormatLabels(labels));
  for (const auto& q : queries) {
    for (const auto& [key, text] : q["sql"].items()) {
      if (key == "A") continue;
      std::string name = q["id"].get<std::string>() + "_" + char(std::tolower(key[0])) + ".sql";
      detail::WriteFile(config.paths.out / "variants" / name, text.get<std::string>());
    }
  }

  out << "queries: " << n;
  for (const auto& [src, count] : by_source) out << " " << ToString(src) << "=" << count;
  out << " (" << observations.size() << " observations)\n";
  out << "alternative: " << HintLabel(alt_hint) << ", total improvement "
      << std::fixed << std::setprecision(1) << improvements.at(alternative) << " ms\n";
  out << "alternative label prior = " << FormatPct(prior) << " (" << n_alt << "/" << n << ")\n";
  out << "skew: most frequent optimal " << "hint " << skew.most_frequent << " ("
      << skew.optimal_counts.at(skew.most_frequent) << " queries), least frequent hint "
      << skew.least_frequent << " (" << skew.optimal_counts.at(skew.least_frequent) << "), max/min ratio ";
  if (std::isfinite(skew.max_min_ratio)) {
    out << std::setprecision(2) << skew.max_min_ratio << "\n";
  } else {
    out << "n/a\n";
  }
  out.unsetf(std::ios::fixed);
}

// ---------------------------------------------------------------------------
// embed

void CmdEmbed(const RunConfig& config, std::ostream& out) {
  const WorkloadStore store = LoadStore(config);
  auto provider = MakeProvider(config.provider);
  EmbeddingCache cache(config.paths.CachePath());
  Embedder embedder(*provider, cache, config.provider.batch_size);

  std::set<Syntax> variants(config.syntax.variants.begin(), config.syntax.variants.end());
  variants.insert(config.syntax.train);
  variants.insert(config.syntax.test);
  std::size_t total = 0;
  for (Syntax s : variants) {
    std::vector<std::string> texts;
    for (const auto& q : store.queries) texts.push_back(store.Sql(q, s));
    Stage("embed syntax " + SyntaxKey(s),
          [&] { return embedder.EmbedBatch(texts, config.provider.parallelism); });
    total += texts.size();
  }
  out << json{{"model_id", embedder.ModelId()},
              {"texts", total},
              {"cache_hits", embedder.CacheHits()},
              {"cache_misses", embedder.CacheMisses()},
              {"cache_entries", cache.Size()},
              {"cache_path", cache.Path().string()}}
             .dump()
      << "\n";
}

// ---------------------------------------------------------------------------
// train

void CmdTrain(const RunConfig& config, std::ostream& out) {
  const WorkloadStore store = LoadStore(config);
  const std::string model_id = ProviderModelId(config.provider);
  RequireInput(config.paths.CachePath(), "embedding cache");
  const EmbeddingCache cache(config.paths.CachePath());
  const Syntax syntax = config.syntax.train;
  const Matrix x = Stage("load embeddings", [&] { return EmbeddingMatrix(store, cache, model_id, syntax); });

  std::vector<Label> labels;
  for (const auto& q : store.queries) labels.push_back(q.label);
  const FoldPlan plan = Stage("stratify", [&] {
    return StratifiedFolds(store.Labels(), config.pipeline.n_folds, config.pipeline.seed);
  });
  SvmConfig svm_config = config.pipeline.svm;
  svm_config.seed = config.pipeline.seed;
  const Eigen::Index k = config.pipeline.n_components;

  std::optional<PcaModel> global_pca;
  if (config.pipeline.pca_scope == PcaScope::kGlobal) {
    global_pca = Stage("pca (global)", [&] { return FitPca(x, k); });
  }

  // Fits one bundle on the given rows and writes it under `dir`.
  auto fit_and_write = [&](const std::vector<Eigen::Index>& rows, int fold, const fs::path& dir,
                           const std::string& stage) {
    Matrix xs(static_cast<Eigen::Index>(rows.size()), x.cols());
    std::vector<Label> ys;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      xs.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
      ys.push_back(labels[static_cast<std::size_t>(rows[i])]);
    }
    PcaModel pca = global_pca ? *global_pca : Stage(stage + ": pca", [&] { return FitPca(xs, k); });
    pca.source_model_id = model_id;
    json pca_doc = PcaToJson(pca);
    pca_doc["provenance"] = Provenance(config);
    const std::string pca_digest = WriteJson(dir / "pca.json", pca_doc);
    SvmModel svm = Stage(stage + ": svm", [&] { return FitSvm(Transform(pca, xs), ys, svm_config); });
    svm.fold = fold;
    svm.pca_digest = pca_digest;
    json svm_doc = SvmToJson(svm);
    svm_doc["provenance"] = Provenance(config);
    const std::string svm_digest = WriteJson(dir / "svm.json", svm_doc);
    return json{{"train_size", rows.size()},
                {"pca_digest", pca_digest},
                {"svm_digest", svm_digest},
                {"support_vectors", svm.support_vectors.rows()},
                {"retained_variance", pca.explained_variance_ratio.sum()}};
  };

  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < store.queries.size(); ++i) row_of[store.queries[i].id] = static_cast<Eigen::Index>(i);

  const fs::path models = config.paths.ModelsDir();
  json folds = json::array();
  for (int f = 0; f < plan.n_folds; ++f) {
    std::vector<Eigen::Index> rows;
    for (const auto& [id, fold] : plan.assignments) {
      if (fold != f) rows.push_back(row_of.at(id));
    }
    std::sort(rows.begin(), rows.end());
    std::ostringstream name;
    name << "fold_" << std::setw(2) << std::setfill('0') << f;
    json entry = fit_and_write(rows, f, models / name.str(), "fold " + std::to_string(f));
    entry["fold"] = f;
    entry["test_size"] = store.queries.size() - rows.size();
    entry["path"] = name.str();
    folds.push_back(entry);
  }
  std::vector<Eigen::Index> all(store.queries.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
  json final_entry = fit_and_write(all, -1, models / "final", "final");
  final_entry["path"] = "final";

  const std::string workload_digest =
      Sha256Hex(detail::ReadFile(config.paths.out / artifacts::kWorkload));
  json manifest = {
      {"format", "hintsteer.manifest"},
      {"version", 1},
      {"provenance", Provenance(config)},
      {"workload_digest", workload_digest},
      {"train_syntax", ToString(syntax)},
      {"alternative_hint_id", store.alternative_hint_id},
      {"n_components", k},
      {"n_folds", plan.n_folds},
      {"pca_scope", config.pipeline.pca_scope == PcaScope::kFold ? "fold" : "global"},
      {"folds", folds},
      {"final", final_entry},
  };
  const std::string manifest_digest = WriteJson(models / artifacts::kManifest, manifest);
  out << json{{"manifest", (models / artifacts::kManifest).string()},
              {"manifest_digest", manifest_digest},
              {"folds", plan.n_folds},
              {"model_id", model_id}}
             .dump()
      << "\n";
}

// ---------------------------------------------------------------------------
// evaluate / robustness

void CmdEvaluate(const RunConfig& config, std::ostream& out) {
  const WorkloadStore store = LoadStore(config);
  const std::string model_id = ProviderModelId(config.provider);
  RequireInput(config.paths.CachePath(), "embedding cache");
  const EmbeddingCache cache(config.paths.CachePath());
  const Matrix train_x = Stage("load embeddings", [&] {
    return EmbeddingMatrix(store, cache, model_id, config.syntax.train);
  });
  const Matrix test_x = config.syntax.test == config.syntax.train
                            ? train_x
                            : Stage("load embeddings", [&] {
                                return EmbeddingMatrix(store, cache, model_id, config.syntax.test);
                              });
  const auto queries = store.EvalQueries();
  const CvConfig cv = MakeCvConfig(config);
  const FoldPlan plan = Stage("stratify", [&] { return StratifiedFolds(store.Labels(), cv.n_folds, cv.seed); });
  EvalReport report = Stage("evaluate", [&] { return RunCrossValidation(queries, train_x, test_x, plan, cv); });
  report.train_syntax = config.syntax.train;
  report.test_syntax = config.syntax.test;

  const double prior = static_cast<double>(store.Labels().CountOf(Label::kAlternative)) /
                       static_cast<double>(queries.size());
  json doc = ReportToJson(report);
  doc["provenance"] = Provenance(config);
  doc["alternative_hint_id"] = store.alternative_hint_id;
  doc["majority_baseline_accuracy"] = std::max(prior, 1.0 - prior);

  std::ostringstream predictions;
  predictions << "query_id,label,predicted,fold\n";
  for (const auto& q : queries) {
    predictions << q.id << ',' << ToString(q.label) << ',' << ToString(report.decisions.at(q.id)) << ','
                << plan.assignments.at(q.id) << '\n';
  }

  const std::string summary = SummaryTable(report);
  fs::create_directories(config.paths.out);
  WriteJson(config.paths.out / artifacts::kReport, doc);
  detail::WriteFile(config.paths.out / artifacts::kEcdf, EcdfCsv(report));
  detail::WriteFile(config.paths.out / artifacts::kPredictions, predictions.str());
  detail::WriteFile(config.paths.out / artifacts::kSummary, summary);
  out << summary;
}

void CmdRobustness(const RunConfig& config, std::ostream& out) {
  const WorkloadStore store = LoadStore(config);
  const std::string model_id = ProviderModelId(config.provider);
  RequireInput(config.paths.CachePath(), "embedding cache");
  const EmbeddingCache cache(config.paths.CachePath());
  std::array<Matrix, 3> by_syntax;
  for (Syntax s : kAllSyntaxes) {
    by_syntax[static_cast<std::size_t>(s)] =
        Stage("load embeddings", [&] { return EmbeddingMatrix(store, cache, model_id, s); });
  }
  const auto queries = store.EvalQueries();
  const RobustnessGrid grid =
      Stage("robustness", [&] { return RunRobustnessGrid(queries, by_syntax, MakeCvConfig(config)); });
  json doc = GridToJson(grid);
  doc["provenance"] = Provenance(config);
  doc["alternative_hint_id"] = store.alternative_hint_id;
  const std::string summary = GridSummaryTable(grid);
  fs::create_directories(config.paths.out);
  WriteJson(config.paths.out / artifacts::kRobustness, doc);
  detail::WriteFile(config.paths.out / artifacts::kRobustnessSummary, summary);
  out << summary;
}

// ---------------------------------------------------------------------------
// steer / collect

void CmdSteer(const RunConfig& config, const SteerOptions& options, std::ostream& out) {
  if (options.sql.empty()) throw ConfigError("steer needs --sql or --sql-file");
  const fs::path final_dir = config.paths.ModelsDir() / "final";
  ModelBundle bundle;
  Stage("load model", [&] {
    bundle.pca = PcaFromJson(ReadJson(final_dir / "pca.json", "trained PCA (run `train` first)"));
    bundle.svm = SvmFromJson(ReadJson(final_dir / "svm.json", "trained SVM (run `train` first)"));
    return 0;
  });
  const json manifest = ReadJson(config.paths.ModelsDir() / artifacts::kManifest, "model manifest");
  const HintId alternative = manifest.at("alternative_hint_id").get<int>();
  const auto catalog = ConfiguredCatalog(config);

  auto provider = MakeProvider(config.provider);
  EmbeddingCache cache(config.paths.CachePath());
  Embedder embedder(*provider, cache, config.provider.batch_size);
  const Steerer steerer(bundle, FindHint(catalog, alternative), embedder, options.policy);
  const SteeringDecision decision = steerer.Steer(options.query_id, options.sql);
  json line = DecisionToJson(decision);
  if (options.execute) {
    const DbTarget target = config.db.Target();
    target.Validate();
    PgConnection conn(ParseConnectionString(target.connection));
    const auto result = ExecuteSteered(conn, decision.hint_prefix, options.sql, target);
    line["latency_ms"] = result.latency_ms;
    line["timed_out"] = result.timed_out;
    line["rows"] = result.rows;
  }
  out << line.dump() << "\n";
}

void CmdCollect(const RunConfig& config, const CollectOptions& options, std::ostream& out,
                std::ostream& progress) {
  RequireInput(config.paths.queries, "paths.queries");
  if (config.paths.latencies.empty()) throw ConfigError("paths.latencies is not configured");
  const DbTarget target = config.db.Target();
  target.Validate();
  if (config.db.runs < 1) throw ConfigError("db.runs must be at least 1");

  const auto catalog = ConfiguredCatalog(config);
  std::vector<HintSet> hints;
  if (options.hint_ids.empty()) {
    hints = catalog;
  } else {
    for (HintId id : options.hint_ids) hints.push_back(FindHint(catalog, id));
  }
  const auto queries = Stage("load queries", [&] { return LoadQueries(config.paths.queries, Syntax::kA); });
  if (queries.empty()) throw DataError("no queries found under " + config.paths.queries.string());

  PgConnection conn(ParseConnectionString(target.connection));
  const std::size_t cells = queries.size() * hints.size();
  std::size_t done = 0;
  const auto result = CollectLatencies(conn, queries, hints, target, config.db.runs,
                                       [&](const std::string& q, HintId h) {
                                         progress << "[" << ++done << "/" << cells << "] " << q
                                                  << " hint " << h << "\n";
                                       });
  if (!result.observations.empty()) AppendObservations(config.paths.latencies, result.observations);

  json failures = json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"query_id", f.query_id}, {"hint_set_id", f.hint_set_id}, {"message", f.message}});
  }
  out << json{{"observations", result.observations.size()},
              {"cells", cells},
              {"failed_cells", result.failures.size()},
              {"failures", failures},
              {"server_version", conn.ServerVersion()},
              {"path", config.paths.latencies.string()}}
             .dump()
      << "\n";
  if (result.observations.empty()) {
    throw DatabaseError("every cell failed; first error: " + result.failures.front().message);
  }
}

// ---------------------------------------------------------------------------
// report

void CmdReport(const RunConfig& config, std::ostream& out) {
  const fs::path dir = config.paths.out;
  bool any = false;
  if (fs::exists(dir / artifacts::kIngestReport)) {
    const json r = ReadJson(dir / artifacts::kIngestReport, "ingest report");
    out << "ingest: " << r.at("queries").get<std::size_t>() << " queries, alternative hint "
        << r.at("alternative_hint_id").get<int>() << ", alternative label prior = "
        << FormatPct(r.at("alternative_label_prior").get<double>()) << "\n";
    any = true;
  }
  if (fs::exists(dir / artifacts::kReport)) {
    const json r = ReadJson(dir / artifacts::kReport, "evaluation report");
    std::ostringstream s;
    s << std::fixed;
    s << "evaluation: folds=" << r.at("n_folds") << " seed=" << r.at("seed")
      << " components=" << r.at("n_components") << " train=" << r.at("train_syntax").get<std::string>()
      << " test=" << r.at("test_syntax").get<std::string>() << "\n";
    const auto& agg = r.at("aggregate");
    for (const auto& [name, ms] : agg.items()) {
      s << "  " << std::left << std::setw(28) << name << std::right << std::setprecision(4)
        << std::setw(16) << ms.at("mean").get<double>() << "  (std " << ms.at("std").get<double>()
        << ")\n";
    }
    const auto& c = r.at("pooled_confusion");
    s << "  confusion (positive=ALTERNATIVE): tp=" << c.at("tp") << " fp=" << c.at("fp")
      << " fn=" << c.at("fn") << " tn=" << c.at("tn") << "\n";
    detail::WriteFile(dir / artifacts::kSummary, s.str());
    out << s.str();
    any = true;
  }
  if (fs::exists(dir / artifacts::kRobustness)) {
    const json r = ReadJson(dir / artifacts::kRobustness, "robustness grid");
    std::ostringstream s;
    s << std::fixed << std::setprecision(1);
    s << "robustness: mean LEARNED total latency (ms) and change vs same-syntax training\n";
    for (const auto& cell : r.at("cells")) {
      s << "  train " << cell.at("train_syntax").get<std::string>() << " / test "
        << cell.at("test_syntax").get<std::string>() << ": " << std::setw(14)
        << cell.at("mean_total_ms").get<double>() << "  " << std::showpos
        << cell.at("vs_same_syntax_pct").get<double>() << std::noshowpos << "%\n";
    }
    detail::WriteFile(dir / artifacts::kRobustnessSummary, s.str());
    out << s.str();
    any = true;
  }
  if (!any) throw DataError("no reports found under " + dir.string() + "; run ingest/evaluate/robustness first");
}

}  // namespace hintsteer
