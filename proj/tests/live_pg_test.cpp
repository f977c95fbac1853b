// Runs only when HINTSTEER_PG_DSN points at a reachable PostgreSQL server.
#include <gtest/gtest.h>

#include <cstdlib>

#include "hintsteer/pg_client.hpp"
#include "hintsteer/runtime.hpp"

namespace hintsteer {
namespace {

std::optional<std::string> Dsn() {
  const char* dsn = std::getenv("HINTSTEER_PG_DSN");
  if (dsn == nullptr || *dsn == '\0') return std::nullopt;
  return std::string(dsn);
}

#define REQUIRE_DSN()                                   \
  const auto dsn = Dsn();                               \
  if (!dsn) GTEST_SKIP() << "HINTSTEER_PG_DSN not set"; \
  PgConnection conn(ParseConnectionString(*dsn))

std::string Scalar(DbSession& s, const std::string& sql) { return *s.Execute(sql).rows.at(0).at(0); }

HintSet HashJoinOff() {
  for (const auto& h : DefaultCatalog()) {
    if (!h.IsEnabled(PlannerFlag::kHashJoin) && h.IsEnabled(PlannerFlag::kMergeJoin) &&
        h.IsEnabled(PlannerFlag::kNestedLoop) && h.IsEnabled(PlannerFlag::kIndexScan) &&
        h.IsEnabled(PlannerFlag::kSeqScan) && h.IsEnabled(PlannerFlag::kIndexOnlyScan)) {
      return h;
    }
  }
  throw std::logic_error("no hash-join-off hint set");
}

TEST(LivePg, ConnectsAndQueries) {
  REQUIRE_DSN();
  EXPECT_FALSE(conn.ServerVersion().empty());
  EXPECT_EQ(Scalar(conn, "SELECT 1 + 1"), "2");
  const auto r = conn.Execute("SELECT NULL::text AS a, 'x' AS b");
  EXPECT_EQ(r.columns, (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(r.rows[0][0].has_value());
}

TEST(LivePg, HintIsScopedToTheSteeredQuery) {
  REQUIRE_DSN();
  DbTarget target{*dsn, 10000, 0};
  // A query that observes its own planner setting.
  const auto res = ExecuteSteered(conn, RenderHintPrefix(HashJoinOff()),
                                  "SELECT current_setting('enable_hashjoin')", target);
  EXPECT_FALSE(res.timed_out);
  EXPECT_EQ(res.rows, 1u);

  struct Recording : DbSession {
    DbSession& inner;
    std::vector<std::string> seen;
    explicit Recording(DbSession& s) : inner(s) {}
    QueryResult Execute(std::string_view sql) override {
      auto r = inner.Execute(sql);
      if (sql.find("current_setting") != std::string_view::npos) seen.push_back(*r.rows.at(0).at(0));
      return r;
    }
  } rec(conn);
  ExecuteSteered(rec, RenderHintPrefix(HashJoinOff()), "SELECT current_setting('enable_hashjoin')", target);
  ASSERT_EQ(rec.seen.size(), 1u);
  EXPECT_EQ(rec.seen[0], "off");
  EXPECT_EQ(Scalar(conn, "SHOW enable_hashjoin"), "on");
  EXPECT_EQ(Scalar(conn, "SHOW statement_timeout"), "0");
}

TEST(LivePg, StatementTimeoutIsRecorded) {
  REQUIRE_DSN();
  const auto res = ExecuteSteered(conn, "", "SELECT pg_sleep(2)", DbTarget{*dsn, 100, 0});
  EXPECT_TRUE(res.timed_out);
  EXPECT_EQ(res.latency_ms, 100.0);
  EXPECT_EQ(Scalar(conn, "SELECT 1"), "1");
}

TEST(LivePg, ServerErrorsCarrySqlstate) {
  REQUIRE_DSN();
  try {
    conn.Execute("SELECT * FROM hintsteer_no_such_table");
    FAIL();
  } catch (const PgServerError& e) {
    EXPECT_EQ(e.sqlstate(), "42P01");
  }
  EXPECT_EQ(Scalar(conn, "SELECT 'still usable'"), "still usable");
}

TEST(LivePg, CollectsFullGrid) {
  REQUIRE_DSN();
  const std::vector<QueryRecord> queries = {
      {"q1", Benchmark::kOther, "SELECT pg_sleep(0.001)", Syntax::kA},
      {"q2", Benchmark::kOther, "SELECT count(*) FROM generate_series(1, 1000) a JOIN generate_series(1, 1000) b ON a = b",
       Syntax::kA}};
  const std::vector<HintSet> hints = {DefaultCatalog()[0], HashJoinOff()};
  const auto res = CollectLatencies(conn, queries, hints, DbTarget{*dsn, 10000, 1}, 5);
  EXPECT_TRUE(res.failures.empty());
  ASSERT_EQ(res.observations.size(), 20u);
  const auto matrix = AggregateRuns(res.observations);
  for (const auto& q : queries) {
    for (const auto& h : hints) {
      const auto* cell = matrix.Find(q.id, h.id);
      ASSERT_NE(cell, nullptr);
      EXPECT_EQ(cell->run_count, 5);
      EXPECT_GT(cell->mean_ms, 0.0);
    }
  }
}

}  // namespace
}  // namespace hintsteer
