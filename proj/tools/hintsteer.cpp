#include <fstream>
#include <iostream>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hintsteer/commands.hpp"
#include "hintsteer/config.hpp"

namespace {

using namespace hintsteer;

// Flags given on the command line; unset ones leave the file value alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> out, queries, latencies, catalog, cache, models;
  std::optional<std::string> provider, endpoint, model_id, train_syntax, test_syntax, dsn;
  std::optional<std::size_t> dim;
  std::optional<int> parallelism, folds, warm_runs, runs, alternative_hint;
  std::optional<long> components;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> timeout_ms;
  std::optional<double> svm_c;
};

void AddGlobalOptions(CLI::App& app, Overrides& o) {
  app.add_option("-c,--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "Output directory for all artifacts");
  app.add_option("--queries", o.queries, "Query directory or JSONL manifest");
  app.add_option("--latencies", o.latencies, "Observation CSV");
  app.add_option("--catalog", o.catalog, "Hint catalog CSV (default: built-in)");
  app.add_option("--cache", o.cache, "Embedding cache file");
  app.add_option("--models", o.models, "Model directory");
  app.add_option("--provider", o.provider, "Embedding provider: hash or remote");
  app.add_option("--dim", o.dim, "Hash provider dimension");
  app.add_option("--endpoint", o.endpoint, "Remote embeddings endpoint URL");
  app.add_option("--model-id", o.model_id, "Remote embedding model id");
  app.add_option("--parallelism", o.parallelism, "Concurrent embedding requests");
  app.add_option("--components", o.components, "PCA components");
  app.add_option("--folds", o.folds, "Cross-validation folds");
  app.add_option("--seed", o.seed, "Seed for fold assignment");
  app.add_option("--svm-c", o.svm_c, "SVM penalty C");
  app.add_option("--alternative-hint", o.alternative_hint, "Pin the alternative hint set id");
  app.add_option("--train-syntax", o.train_syntax, "Syntax variant used for training (A/B/C)");
  app.add_option("--test-syntax", o.test_syntax, "Syntax variant used for testing (A/B/C)");
  app.add_option("--dsn", o.dsn, "Database connection string");
  app.add_option("--timeout-ms", o.timeout_ms, "Statement timeout in milliseconds");
  app.add_option("--warm-runs", o.warm_runs, "Discarded executions per cell");
  app.add_option("--runs", o.runs, "Measured executions per cell");
}

RunConfig Resolve(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : LoadConfig(o.config_path);
  auto path = [](const std::optional<std::string>& v, std::filesystem::path& dst) {
    if (v) dst = *v;
  };
  path(o.out, c.paths.out);
  path(o.queries, c.paths.queries);
  path(o.latencies, c.paths.latencies);
  path(o.catalog, c.paths.catalog);
  path(o.cache, c.paths.cache);
  path(o.models, c.paths.models);
  if (o.provider) c.provider.kind = *o.provider;
  if (o.dim) c.provider.hash_dim = *o.dim;
  if (o.endpoint) c.provider.endpoint = *o.endpoint;
  if (o.model_id) c.provider.model_id = *o.model_id;
  if (o.parallelism) c.provider.parallelism = *o.parallelism;
  if (o.components) c.pipeline.n_components = *o.components;
  if (o.folds) c.pipeline.n_folds = *o.folds;
  if (o.seed) c.pipeline.seed = *o.seed;
  c.pipeline.svm.seed = c.pipeline.seed;
  if (o.svm_c) c.pipeline.svm.c = *o.svm_c;
  if (o.alternative_hint) c.pipeline.alternative_hint_id = *o.alternative_hint;
  auto syntax = [](const std::string& s) {
    try {
      return ParseSyntax(s);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  };
  if (o.train_syntax) c.syntax.train = syntax(*o.train_syntax);
  if (o.test_syntax) c.syntax.test = syntax(*o.test_syntax);
  if (o.dsn) c.db.connection = *o.dsn;
  if (o.timeout_ms) c.db.statement_timeout_ms = *o.timeout_ms;
  if (o.warm_runs) c.db.warm_runs = *o.warm_runs;
  if (o.runs) c.db.runs = *o.runs;
  return c;
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int Fail(const Error& e) {
  std::cerr << ErrorJson(e).dump() << std::endl;
  return ExitCode(e.kind());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-query planner hint steering from SQL text embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  AddGlobalOptions(app, o);

  auto* ingest = app.add_subcommand("ingest", "Load queries and latencies, label, materialize syntax variants");
  auto* embed = app.add_subcommand("embed", "Embed all stored queries into the cache");
  auto* train = app.add_subcommand("train", "Fit per-fold and final PCA+SVM bundles");
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validated evaluation report");
  auto* robustness = app.add_subcommand("robustness", "Train/test syntax robustness grid");
  auto* steer = app.add_subcommand("steer", "Choose a hint for one query");
  auto* collect = app.add_subcommand("collect", "Measure query latencies on a live database");
  auto* report = app.add_subcommand("report", "Re-render existing reports");

  SteerOptions steer_opts;
  std::string sql_file;
  bool fail_open = true;
  steer->add_option("--sql", steer_opts.sql, "Query text");
  steer->add_option("--sql-file", sql_file, "File holding the query text")->check(CLI::ExistingFile);
  steer->add_option("--query-id", steer_opts.query_id, "Identifier echoed in the decision");
  steer->add_flag("--execute", steer_opts.execute, "Run the steered query on the configured database");
  steer->add_flag("!--fail-on-provider-error", fail_open,
                  "Exit with a provider error instead of falling back to the default plan");

  CollectOptions collect_opts;
  collect->add_option("--hints", collect_opts.hint_ids, "Hint set ids to measure (default: whole catalog)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail(ConfigError(e.what()));
  }

  try {
    const RunConfig config = Resolve(o);
    if (*ingest) CmdIngest(config, std::cout);
    if (*embed) CmdEmbed(config, std::cout);
    if (*train) CmdTrain(config, std::cout);
    if (*evaluate) CmdEvaluate(config, std::cout);
    if (*robustness) CmdRobustness(config, std::cout);
    if (*steer) {
      if (!sql_file.empty()) steer_opts.sql = ReadText(sql_file);
      steer_opts.policy = fail_open ? FallbackPolicy::kDefault : FallbackPolicy::kFail;
      CmdSteer(config, steer_opts, std::cout);
    }
    if (*collect) CmdCollect(config, collect_opts, std::cout, std::cerr);
    if (*report) CmdReport(config, std::cout);
  } catch (const Error& e) {
    return Fail(e);
  } catch (const std::filesystem::filesystem_error& e) {
    return Fail(DataError(e.what()));
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"kind", "internal"}, {"message", e.what()}, {"exit_code", 1}}}}.dump()
              << std::endl;
    return 1;
  }
  return 0;
}
