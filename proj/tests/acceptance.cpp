// Prints one PASS/FAIL/SKIP line per acceptance criterion and exits nonzero
// if any criterion fails.
#include <sys/wait.h>

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hintsteer/classifier.hpp"
#include "hintsteer/commands.hpp"
#include "hintsteer/digest.hpp"
#include "hintsteer/evaluation.hpp"
#include "hintsteer/features.hpp"
#include "hintsteer/hints.hpp"
#include "hintsteer/pg_client.hpp"
#include "hintsteer/runtime.hpp"
#include "hintsteer/syntax.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace {

using namespace hintsteer;
using hintsteer::testing::Rng;
using nlohmann::json;
namespace fs = std::filesystem;

enum class Outcome { kPass, kFail, kSkip };

struct Verdict {
  Outcome outcome = Outcome::kPass;
  std::string detail;
};

Verdict Pass(std::string detail) { return {Outcome::kPass, std::move(detail)}; }
Verdict Fail(std::string detail) { return {Outcome::kFail, std::move(detail)}; }
Verdict Skip(std::string detail) { return {Outcome::kSkip, std::move(detail)}; }

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

struct Workspace {
  testing::TempDir dir;
  testing::SyntheticWorkload workload;
  RunConfig config;

  Workspace(std::size_t n, std::uint64_t seed) {
    workload = testing::MakeSyntheticWorkload(n, seed, {0, 3, 17, 40}, 5);
    testing::WriteQueryDir(dir / "queries", workload.queries);
    std::ofstream(dir / "latencies.csv") << FormatObservations(workload.observations);
    config.paths.queries = dir / "queries";
    config.paths.latencies = dir / "latencies.csv";
    config.paths.out = dir / "out";
  }
};

void Quiet(void (*cmd)(const RunConfig&, std::ostream&), const RunConfig& cfg) {
  std::ostringstream sink;
  cmd(cfg, sink);
}

Verdict ReportSchema() {
  Workspace ws(120, 21);
  ws.config.pipeline.n_components = 10;
  Quiet(CmdIngest, ws.config);
  Quiet(CmdEmbed, ws.config);
  Quiet(CmdEvaluate, ws.config);
  Quiet(CmdRobustness, ws.config);
  const json report = json::parse(Slurp(ws.config.paths.out / artifacts::kReport));
  const json grid = json::parse(Slurp(ws.config.paths.out / artifacts::kRobustness));
  for (const auto& fold : report.at("folds")) {
    for (const char* key : {"total_latency_ms", "p90_ms", "accuracy", "precision", "recall", "auroc", "confusion",
                            "total_reduction_vs_default_pct", "p90_reduction_vs_default_pct",
                            "total_gap_vs_optimal_pct", "p90_gap_vs_optimal_pct"}) {
      if (!fold.contains(key)) return Fail(std::string("fold entry lacks ") + key);
    }
  }
  for (const char* s : {"OPTIMAL", "DEFAULT_ONLY", "ALTERNATIVE_ONLY", "LEARNED"}) {
    if (!report.at("ecdf").contains(s)) return Fail(std::string("ecdf lacks ") + s);
  }
  if (!report.contains("majority_baseline_accuracy")) return Fail("no naive baseline");
  if (grid.at("cells").size() != 9) return Fail("robustness grid is not 3x3");
  if (Slurp(ws.config.paths.out / artifacts::kEcdf).rfind("strategy,latency_ms,fraction\n", 0) != 0) {
    return Fail("ecdf.csv header");
  }
  return Pass("per-fold latency/P90/classification, ECDF x4, baseline, 3x3 grid present");
}

Verdict SyntheticEndToEnd() {
  const auto start = std::chrono::steady_clock::now();
  Workspace ws(400, 42);
  Quiet(CmdIngest, ws.config);
  Quiet(CmdEmbed, ws.config);
  Quiet(CmdEvaluate, ws.config);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const json report = json::parse(Slurp(ws.config.paths.out / artifacts::kReport));
  const double accuracy = report.at("aggregate").at("accuracy").at("mean").get<double>();
  const double learned = report.at("pooled_total_ms").at("LEARNED").get<double>();
  const double optimal = report.at("pooled_total_ms").at("OPTIMAL").get<double>();
  const double gap = learned / optimal - 1.0;
  const std::string detail = "accuracy " + Fmt("%.4f", accuracy) + ", LEARNED/OPTIMAL - 1 = " +
                             Fmt("%.4f", gap) + ", " + Fmt("%.1f", secs) + " s";
  if (accuracy >= 0.95 && gap <= 0.05 && secs < 60.0) return Pass(detail);
  return Fail(detail);
}

Verdict SvmOracle() {
  Rng rng(777);
  double worst_obj = 0.0, worst_dec = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.Int(2, 8);
    const int d = rng.Int(1, 4);
    Matrix x(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = rng.Real(-1.0, 1.0);
    std::vector<Label> y(static_cast<std::size_t>(n));
    for (auto& l : y) l = rng.Coin() ? Label::kAlternative : Label::kDefault;
    y[0] = Label::kDefault;
    y[1] = Label::kAlternative;
    SvmConfig cfg;
    cfg.c = rng.Pick(std::vector<double>{0.1, 1.0, 10.0});
    cfg.gamma = rng.Real(0.3, 3.0);
    cfg.class_weights = ClassWeights{rng.Real(0.5, 2.0), rng.Real(0.5, 2.0)};
    cfg.tolerance = 1e-10;
    Eigen::VectorXd ys(n), upper(n);
    for (int i = 0; i < n; ++i) {
      const auto l = y[static_cast<std::size_t>(i)];
      ys(i) = l == Label::kAlternative ? 1.0 : -1.0;
      upper(i) = cfg.c * cfg.class_weights->For(l);
    }
    const auto model = FitSvm(x, y, cfg);
    const auto oracle = testing::SolveDualByProjectedGradient(x, ys, upper, *cfg.gamma);
    worst_obj = std::max(worst_obj, std::abs(model.dual_objective - oracle.objective));
    for (int p = 0; p < 10; ++p) {
      Vector pt(d);
      for (int j = 0; j < d; ++j) pt(j) = rng.Real(-1.5, 1.5);
      worst_dec = std::max(worst_dec, std::abs(DecisionValue(model, pt) - oracle.Decision(x, ys, *cfg.gamma, pt)));
    }
  }
  const std::string detail = "max |dual gap| " + Fmt("%.2e", worst_obj) + ", max |decision gap| " + Fmt("%.2e", worst_dec);
  return worst_obj <= 1e-6 && worst_dec <= 1e-6 ? Pass(detail) : Fail(detail);
}

Verdict PcaOracle() {
  Rng rng(4242);
  double worst_comp = 0.0, worst_ratio = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x(20, 8);
    for (Eigen::Index i = 0; i < 20; ++i)
      for (Eigen::Index j = 0; j < 8; ++j) x(i, j) = rng.Normal() * static_cast<double>(j + 1);
    const Eigen::Index k = rng.Int(1, 8);
    const auto model = FitPca(x, k);
    const auto oracle = testing::PcaByCovariance(x, k);
    for (Eigen::Index r = 0; r < k; ++r) {
      const double same = (model.components.row(r) - oracle.components.row(r)).cwiseAbs().maxCoeff();
      const double flip = (model.components.row(r) + oracle.components.row(r)).cwiseAbs().maxCoeff();
      worst_comp = std::max(worst_comp, std::min(same, flip));
    }
    worst_ratio = std::max(worst_ratio, (model.explained_variance_ratio - oracle.ratios).cwiseAbs().maxCoeff());
  }
  const std::string detail = "max component gap " + Fmt("%.2e", worst_comp) + ", max ratio gap " + Fmt("%.2e", worst_ratio);
  return worst_comp <= 1e-8 && worst_ratio <= 1e-10 ? Pass(detail) : Fail(detail);
}

Verdict MetricExactness() {
  if (P90Latency(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}) != 9.0) return Fail("P90 of 1..10");
  std::vector<Label> truth(10000, Label::kDefault);
  std::fill(truth.begin() + 6929, truth.end(), Label::kAlternative);
  const auto majority = ComputeClassificationMetrics(truth, std::vector<Label>(truth.size(), Label::kDefault),
                                                     std::vector<double>(truth.size(), -1.0));
  if (majority.accuracy != 0.6929) return Fail("majority accuracy " + Fmt("%.17g", majority.accuracy));
  const std::vector<Label> two = {Label::kAlternative, Label::kDefault};
  if (Auroc(two, std::vector<double>{0.9, 0.1}) != 1.0 || Auroc(two, std::vector<double>{0.1, 0.9}) != 0.0) {
    return Fail("AUROC ordering");
  }
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<EvalQuery> qs;
    std::vector<Label> decisions;
    double cost = 0.0;
    for (int i = 0, n = rng.Int(1, 60); i < n; ++i) {
      EvalQuery q;
      q.id = std::to_string(i);
      q.default_ms = rng.Int(1, 100000);
      q.alternative_ms = rng.Int(1, 100000);
      q.label = q.alternative_ms < q.default_ms ? Label::kAlternative : Label::kDefault;
      decisions.push_back(rng.Coin() ? Label::kAlternative : Label::kDefault);
      if (decisions.back() != q.label) cost += std::abs(q.default_ms - q.alternative_ms);
      qs.push_back(q);
    }
    if (TotalLatency(Strategy::kLearned, qs, decisions) - TotalLatency(Strategy::kOptimal, qs) != cost) {
      return Fail("decomposition identity broken on trial " + std::to_string(trial));
    }
  }
  return Pass("P90 = 9, majority accuracy = 0.6929, AUROC 1/0, decomposition exact over 500 runs");
}

Verdict Stratification() {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    LabelSet labels;
    const int n = rng.Int(20, 400);
    for (int i = 0; i < n; ++i) labels.labels["q" + std::to_string(i)] = rng.Coin(0.3) ? Label::kAlternative : Label::kDefault;
    const auto nd = labels.CountOf(Label::kDefault);
    const auto na = labels.CountOf(Label::kAlternative);
    if (nd < 10 || na < 10) continue;
    const auto plan = StratifiedFolds(labels, 10, static_cast<std::uint64_t>(trial));
    for (int f = 0; f < 10; ++f) {
      double d = 0, a = 0;
      for (const auto& id : plan.TestIds(f)) (labels.labels.at(id) == Label::kDefault ? d : a) += 1;
      if (std::abs(d - nd / 10.0) > 1.0 || std::abs(a - na / 10.0) > 1.0) {
        return Fail("trial " + std::to_string(trial) + " fold " + std::to_string(f));
      }
    }
  }
  return Pass("200 label vectors, every fold within +-1 per class");
}

bool HasClauseKeyword(const TokenStream& tokens) {
  for (const auto& t : tokens) {
    if (t.kind != TokenKind::kWord) continue;
    std::string upper = t.text;
    for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (upper == "FROM" || upper == "WHERE" || upper == "GROUP" || upper == "ORDER" || upper == "HAVING" ||
        upper == "LIMIT") {
      return true;
    }
  }
  return false;
}

Verdict SyntaxPreservation() {
  const auto corpus = testing::SqlCorpus(200, 8);
  std::size_t distinct = 0;
  for (const auto& sql : corpus) {
    const auto a = Lex(sql);
    const auto b = ToSyntaxB(sql);
    const auto c = ToSyntaxC(sql);
    if (Lex(b) != a || Lex(c) != a) return Fail("token stream changed for: " + sql);
    if (ToSyntaxB(b) != b || ToSyntaxC(c) != c) return Fail("not idempotent for: " + sql);
    if (!HasClauseKeyword(a)) continue;
    const std::set<std::string> digests = {Sha256Hex(sql), Sha256Hex(b), Sha256Hex(c)};
    if (digests.size() != 3) return Fail("colliding variant digests for: " + sql);
    ++distinct;
  }
  return Pass(std::to_string(corpus.size()) + " queries lexically equal and idempotent; " +
              std::to_string(distinct) + " with clause keywords have distinct A/B/C digests");
}

Verdict Catalog() {
  const auto catalog = DefaultCatalog();
  std::size_t plannable = 0;
  for (const auto& h : catalog) plannable += !h.IsDefault() && h.IsPlannable();
  if (plannable != 48 || catalog.size() != 49) return Fail(std::to_string(plannable) + " plannable sets");
  if (ParseCatalog(FormatCatalog(catalog)) != catalog) return Fail("render/parse round trip");
  return Pass("48 non-default plannable sets, round trip exact");
}

int RunCli(const std::string& args) {
  const std::string cmd = std::string("\"") + HINTSTEER_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Verdict Determinism() {
  Workspace ws(150, 31);
  std::string manifests[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = ws.dir / ("run" + std::to_string(run));
    const std::string args = " --queries \"" + ws.config.paths.queries.string() + "\" --latencies \"" +
                             ws.config.paths.latencies.string() + "\" --out \"" + out.string() +
                             "\" --components 20 --seed 5";
    for (const char* cmd : {"ingest", "embed", "train"}) {
      if (const int rc = RunCli(cmd + args); rc != 0) {
        return Fail(std::string(cmd) + " exited with " + std::to_string(rc));
      }
    }
    manifests[run] = Slurp(out / "models" / artifacts::kManifest);
  }
  if (manifests[0].empty()) return Fail("no manifest written");
  if (manifests[0] != manifests[1]) return Fail("manifests differ");
  return Pass("manifest sha256 " + Sha256Hex(manifests[0]).substr(0, 16) + " on both runs");
}

Verdict LiveDbms() {
  const char* dsn = std::getenv("HINTSTEER_PG_DSN");
  if (dsn == nullptr || *dsn == '\0') return Skip("HINTSTEER_PG_DSN not set");
  PgConnection conn(ParseConnectionString(dsn));
  const DbTarget target{dsn, 10000, 0};
  HintSet off;
  for (const auto& h : DefaultCatalog()) {
    if (!h.IsDefault() && !h.IsEnabled(PlannerFlag::kHashJoin)) {
      off = h;
      break;
    }
  }
  struct Spy : DbSession {
    DbSession& inner;
    std::string observed;
    explicit Spy(DbSession& s) : inner(s) {}
    QueryResult Execute(std::string_view sql) override {
      auto r = inner.Execute(sql);
      if (sql.find("current_setting") != std::string_view::npos) observed = *r.rows.at(0).at(0);
      return r;
    }
  } spy(conn);
  ExecuteSteered(spy, RenderHintPrefix(off), "SELECT current_setting('enable_hashjoin')", target);
  const std::string after = *conn.Execute("SHOW enable_hashjoin").rows.at(0).at(0);
  if (spy.observed != "off" || after != "on") return Fail("flag during=" + spy.observed + " after=" + after);
  const std::vector<QueryRecord> queries = {{"q1", Benchmark::kOther, "SELECT pg_sleep(0.001)", Syntax::kA},
                                            {"q2", Benchmark::kOther, "SELECT 1", Syntax::kA}};
  const std::vector<HintSet> hints = {DefaultCatalog()[0], off};
  const auto res = CollectLatencies(conn, queries, hints, target, 5);
  if (res.observations.size() != 20 || !res.failures.empty()) {
    return Fail(std::to_string(res.observations.size()) + " observations");
  }
  for (const auto& o : res.observations) {
    if (!(o.latency_ms > 0.0) || o.timed_out) return Fail("malformed observation for " + o.query_id);
  }
  return Pass("server " + conn.ServerVersion() + ": flag off during query, restored after; 20 observations");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"report-schema", ReportSchema},
      {"synthetic-end-to-end", SyntheticEndToEnd},
      {"svm-oracle", SvmOracle},
      {"pca-oracle", PcaOracle},
      {"metric-exactness", MetricExactness},
      {"stratification", Stratification},
      {"syntax-preservation", SyntaxPreservation},
      {"hint-catalog", Catalog},
      {"determinism", Determinism},
      {"live-dbms", LiveDbms},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = Fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.outcome == Outcome::kPass ? "PASS" : v.outcome == Outcome::kSkip ? "SKIP" : "FAIL";
    failures += v.outcome == Outcome::kFail;
    std::cout << tag << "  " << name << "  " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
