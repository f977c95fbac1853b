#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hintsteer/commands.hpp"
#include "hintsteer/digest.hpp"
#include "synthetic.hpp"

namespace hintsteer {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void Spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// A synthetic workload written to disk plus a config pointing at it.
struct Workspace {
  testing::TempDir dir;
  testing::SyntheticWorkload workload;
  RunConfig config;

  explicit Workspace(std::size_t n = 120, std::uint64_t seed = 3) {
    workload = testing::MakeSyntheticWorkload(n, seed, {0, 3, 17, 40}, 2);
    testing::WriteQueryDir(dir / "queries", workload.queries);
    Spit(dir / "latencies.csv", FormatObservations(workload.observations));
    config.paths.queries = dir / "queries";
    config.paths.latencies = dir / "latencies.csv";
    config.paths.out = dir / "out";
    config.provider.hash_dim = 256;
    config.pipeline.n_components = 10;
    config.pipeline.n_folds = 5;
    config.pipeline.seed = 11;
  }

  fs::path Out(const std::string& name) const { return config.paths.out / name; }
};

std::string RunCommand(void (*cmd)(const RunConfig&, std::ostream&), const RunConfig& cfg) {
  std::ostringstream out;
  cmd(cfg, out);
  return out.str();
}

TEST(Pipeline, EndToEndOnSyntheticWorkload) {
  Workspace ws;
  const std::string ingest = RunCommand(CmdIngest, ws.config);
  EXPECT_NE(ingest.find("alternative label prior = "), std::string::npos) << ingest;
  EXPECT_NE(ingest.find("skew:"), std::string::npos);
  const json store = json::parse(Slurp(ws.Out("workload.json")));
  EXPECT_EQ(store.at("alternative_hint_id").get<HintId>(), ws.workload.alternative);
  EXPECT_EQ(store.at("queries").size(), ws.workload.queries.size());
  EXPECT_TRUE(fs::exists(ws.Out("labels.csv")));
  EXPECT_TRUE(fs::exists(ws.Out("variants") / (ws.workload.queries[0].id + "_b.sql")));

  const json embedded = json::parse(RunCommand(CmdEmbed, ws.config));
  EXPECT_EQ(embedded.at("texts").get<std::size_t>(), 3 * ws.workload.queries.size());
  const json again = json::parse(RunCommand(CmdEmbed, ws.config));
  EXPECT_EQ(again.at("cache_misses").get<std::size_t>(), 0u);

  RunCommand(CmdTrain, ws.config);
  const json manifest = json::parse(Slurp(ws.config.paths.ModelsDir() / "manifest.json"));
  EXPECT_EQ(manifest.at("folds").size(), 5u);
  EXPECT_EQ(manifest.at("provenance").at("config_hash"), ConfigHash(ws.config));
  EXPECT_EQ(manifest.at("workload_digest"), Sha256Hex(Slurp(ws.Out("workload.json"))));
  for (const auto& f : manifest.at("folds")) {
    const fs::path pca = ws.config.paths.ModelsDir() / f.at("path").get<std::string>() / "pca.json";
    EXPECT_EQ(f.at("pca_digest"), Sha256Hex(Slurp(pca)));
  }
  const json final_svm = json::parse(Slurp(ws.config.paths.ModelsDir() / "final" / "svm.json"));
  EXPECT_EQ(final_svm.at("provenance").at("config_hash"), ConfigHash(ws.config));
  EXPECT_EQ(final_svm.at("provenance").at("seed"), 11);

  RunCommand(CmdEvaluate, ws.config);
  const json report = json::parse(Slurp(ws.Out("report.json")));
  EXPECT_EQ(report.at("folds").size(), 5u);
  EXPECT_GE(report.at("aggregate").at("accuracy").at("mean").get<double>(), 0.9);
  EXPECT_TRUE(report.contains("majority_baseline_accuracy"));
  EXPECT_EQ(Slurp(ws.Out("predictions.csv")).rfind("query_id,label,predicted,fold\n", 0), 0u);
  EXPECT_TRUE(fs::exists(ws.Out("ecdf.csv")));
  EXPECT_TRUE(fs::exists(ws.Out("summary.txt")));

  RunCommand(CmdRobustness, ws.config);
  EXPECT_EQ(json::parse(Slurp(ws.Out("robustness.json"))).at("cells").size(), 9u);

  SteerOptions opts;
  opts.sql = ws.workload.queries[0].sql;
  opts.query_id = ws.workload.queries[0].id;
  std::ostringstream steer_out;
  CmdSteer(ws.config, opts, steer_out);
  const json decision = json::parse(steer_out.str());
  EXPECT_EQ(decision.at("query_id"), opts.query_id);
  EXPECT_TRUE(decision.at("embed_cache_hit").get<bool>());
  EXPECT_FALSE(decision.at("degraded").get<bool>());

  const std::string summary = RunCommand(CmdReport, ws.config);
  EXPECT_NE(summary.find("ingest:"), std::string::npos) << summary;
}

TEST(Pipeline, IngestIsIdempotent) {
  Workspace ws(60);
  RunCommand(CmdIngest, ws.config);
  const std::string first = Slurp(ws.Out("workload.json"));
  const std::string labels = Slurp(ws.Out("labels.csv"));
  RunCommand(CmdIngest, ws.config);
  EXPECT_EQ(Slurp(ws.Out("workload.json")), first);
  EXPECT_EQ(Slurp(ws.Out("labels.csv")), labels);
}

TEST(Pipeline, PinnedAlternativeOverridesSelection) {
  Workspace ws(60);
  ws.config.pipeline.alternative_hint_id = 17;
  RunCommand(CmdIngest, ws.config);
  EXPECT_EQ(json::parse(Slurp(ws.Out("workload.json"))).at("alternative_hint_id"), 17);
  ws.config.pipeline.alternative_hint_id = 0;
  try {
    RunCommand(CmdIngest, ws.config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(Pipeline, TrainManifestsAreByteIdentical) {
  Workspace ws(80);
  RunCommand(CmdIngest, ws.config);
  RunCommand(CmdEmbed, ws.config);
  RunCommand(CmdTrain, ws.config);
  const std::string first = Slurp(ws.config.paths.ModelsDir() / "manifest.json");
  const std::string final_svm = Slurp(ws.config.paths.ModelsDir() / "final" / "svm.json");
  RunCommand(CmdTrain, ws.config);
  EXPECT_EQ(Slurp(ws.config.paths.ModelsDir() / "manifest.json"), first);
  EXPECT_EQ(Slurp(ws.config.paths.ModelsDir() / "final" / "svm.json"), final_svm);
}

TEST(Pipeline, EmptyLatencyFileIsActionable) {
  Workspace ws(30);
  Spit(ws.dir / "latencies.csv", "");
  try {
    RunCommand(CmdIngest, ws.config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("latencies"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, MissingDefaultCellIsRejected) {
  Workspace ws(30);
  std::vector<LatencyObservation> obs;
  for (const auto& o : ws.workload.observations) {
    if (!(o.query_id == ws.workload.queries[0].id && o.hint_set_id == kDefaultHintId)) obs.push_back(o);
  }
  Spit(ws.dir / "latencies.csv", FormatObservations(obs));
  try {
    RunCommand(CmdIngest, ws.config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(ws.workload.queries[0].id), std::string::npos) << e.what();
  }
}

TEST(Pipeline, MissingEmbeddingNamesTheQuery) {
  Workspace ws(40);
  RunCommand(CmdIngest, ws.config);
  ws.config.syntax.variants = {Syntax::kA};
  RunCommand(CmdEmbed, ws.config);
  ws.config.provider.hash_seed = 99;
  try {
    RunCommand(CmdTrain, ws.config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("q0000"), std::string::npos) << msg;
  }
}

TEST(Pipeline, CommandsBeforeIngestExplainTheOrder) {
  Workspace ws(20);
  try {
    RunCommand(CmdTrain, ws.config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ingest"), std::string::npos) << e.what();
  }
}

TEST(Errors, JsonShape) {
  const json j = ErrorJson(DatabaseError("connection refused"));
  EXPECT_EQ(j.at("error").at("kind"), "dbms");
  EXPECT_EQ(j.at("error").at("exit_code"), 5);
  EXPECT_EQ(j.at("error").at("message"), "connection refused");
}

// Runs the CLI binary and captures stdout, stderr and the exit status.
struct CliResult {
  int status = -1;
  std::string out;
  std::string err;
};

CliResult RunCli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "cli.out";
  const fs::path err = scratch / "cli.err";
  const std::string cmd = std::string("\"") + HINTSTEER_CLI_PATH + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = Slurp(out);
  r.err = Slurp(err);
  return r;
}

TEST(Cli, ExitCodesAndErrorJson) {
  Workspace ws(60);
  const std::string paths = "--queries \"" + ws.config.paths.queries.string() + "\" --latencies \"" +
                            ws.config.paths.latencies.string() + "\" --out \"" + ws.config.paths.out.string() +
                            "\" --dim 128 --components 6 --folds 5";

  auto r = RunCli("ingest " + paths, ws.dir.path());
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("alternative label prior"), std::string::npos);

  r = RunCli("train " + paths, ws.dir.path());
  EXPECT_EQ(r.status, 2) << r.err;
  EXPECT_EQ(json::parse(r.err).at("error").at("kind"), "config");

  r = RunCli("embed " + paths, ws.dir.path());
  EXPECT_EQ(r.status, 0) << r.err;
  r = RunCli("train " + paths, ws.dir.path());
  EXPECT_EQ(r.status, 0) << r.err;
  r = RunCli("steer " + paths + " --sql \"SELECT 1 FROM title t\"", ws.dir.path());
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(json::parse(r.out).contains("decision_value"));

  Spit(ws.dir / "bad.csv", "query_id,hint_set_id,run_index,latency_ms,timed_out\nq0000,0,0,abc,0\n");
  r = RunCli("ingest --queries \"" + ws.config.paths.queries.string() + "\" --latencies \"" +
                 (ws.dir / "bad.csv").string() + "\" --out \"" + (ws.dir / "o2").string() + "\"",
             ws.dir.path());
  EXPECT_EQ(r.status, 3) << r.err;
  EXPECT_EQ(json::parse(r.err).at("error").at("kind"), "data");

  Spit(ws.dir / "cfg.json", R"({"pipeline": {"bogus": 1}})");
  r = RunCli("-c \"" + (ws.dir / "cfg.json").string() + "\" ingest", ws.dir.path());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("bogus"), std::string::npos) << r.err;

  r = RunCli("collect " + paths + " --dsn \"host=127.0.0.1 port=1 connect_timeout=2\"", ws.dir.path());
  EXPECT_EQ(r.status, 5) << r.err;
  EXPECT_EQ(json::parse(r.err).at("error").at("kind"), "dbms");

  r = RunCli("steer " + paths +
                 " --provider remote --endpoint http://127.0.0.1:1/v1/embeddings --model-id m --fail-on-provider-error"
                 " --sql \"SELECT 1\"",
             ws.dir.path());
  EXPECT_NE(r.status, 0);
}

}  // namespace
}  // namespace hintsteer
