#include "synthetic.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace hintsteer::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::random_device rd;
  const auto base = fs::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = base / ("hintsteer-test-" + std::to_string(rd()) + std::to_string(rd()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("could not create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

struct Table {
  std::string name;
  std::string alias;
  std::vector<std::string> columns;
};

const std::vector<Table>& FamilyTables(int family) {
  static const std::vector<Table> kMovies = {
      {"title", "t", {"title", "production_year", "kind_id"}},
      {"movie_companies", "mc", {"note", "company_type_id", "company_id"}},
      {"company_name", "cn", {"name", "country_code"}},
      {"company_type", "ct", {"kind"}},
      {"movie_info", "mi", {"info", "info_type_id"}},
      {"info_type", "it", {"info"}},
      {"movie_keyword", "mk", {"keyword_id"}},
      {"keyword", "k", {"keyword", "phonetic_code"}},
  };
  static const std::vector<Table> kPeople = {
      {"name", "n", {"name", "gender", "name_pcode_cf"}},
      {"cast_info", "ci", {"note", "role_id", "nr_order"}},
      {"char_name", "chn", {"name", "imdb_index"}},
      {"role_type", "rt", {"role"}},
      {"aka_name", "an", {"name", "surname_pcode"}},
      {"person_info", "pi", {"info", "note"}},
  };
  return family == 0 ? kMovies : kPeople;
}

const std::vector<std::string> kWords = {"Drama", "(voice)", "Tokyo", "Berlin", "sequel",
                                         "[us]",  "O''Hara", "Studio%", "%Films", "Comedy"};

std::string FamilyQuery(Rng& rng, int family) {
  const auto& tables = FamilyTables(family);
  std::vector<std::size_t> picked;
  const int count = rng.Int(3, static_cast<int>(tables.size()));
  for (std::size_t i = 0; i < tables.size() && static_cast<int>(picked.size()) < count; ++i) {
    if (rng.Coin(0.75) || tables.size() - i <= static_cast<std::size_t>(count) - picked.size()) {
      picked.push_back(i);
    }
  }
  std::ostringstream sql;
  sql << "SELECT ";
  const int outputs = rng.Int(1, 3);
  for (int o = 0; o < outputs; ++o) {
    const auto& t = tables[picked[static_cast<std::size_t>(rng.Int(0, static_cast<int>(picked.size()) - 1))]];
    if (o > 0) sql << ", ";
    sql << (rng.Coin() ? "MIN(" : "MAX(") << t.alias << "." << rng.Pick(t.columns) << ") AS out_" << o;
  }
  const bool multiline = rng.Coin(0.4);
  sql << (multiline ? "\nFROM " : " FROM ");
  for (std::size_t i = 0; i < picked.size(); ++i) {
    if (i > 0) sql << ", ";
    sql << tables[picked[i]].name << " AS " << tables[picked[i]].alias;
  }
  sql << (multiline ? "\nWHERE " : " WHERE ");
  bool first = true;
  auto conj = [&] {
    if (!first) sql << (multiline && rng.Coin() ? "\n  AND " : " AND ");
    first = false;
  };
  for (std::size_t i = 1; i < picked.size(); ++i) {
    conj();
    const auto& a = tables[picked[i - 1]];
    const auto& b = tables[picked[i]];
    sql << a.alias << ".id = " << b.alias << "." << a.name << "_id";
  }
  const int filters = rng.Int(1, 3);
  for (int f = 0; f < filters; ++f) {
    const auto& t = tables[picked[static_cast<std::size_t>(rng.Int(0, static_cast<int>(picked.size()) - 1))]];
    const auto& col = rng.Pick(t.columns);
    conj();
    switch (rng.Int(0, 4)) {
      case 0: sql << t.alias << "." << col << " LIKE '" << rng.Pick(kWords) << "'"; break;
      case 1: sql << t.alias << "." << col << " BETWEEN " << rng.Int(1950, 1990) << " AND " << rng.Int(1991, 2015); break;
      case 2: sql << t.alias << "." << col << " IN ('" << rng.Pick(kWords) << "', '" << rng.Pick(kWords) << "')"; break;
      case 3: sql << t.alias << "." << col << " > " << rng.Int(0, 5000); break;
      default: sql << t.alias << "." << col << " IS NOT NULL"; break;
    }
  }
  sql << ";";
  return sql.str();
}

}  // namespace

SyntheticWorkload MakeSyntheticWorkload(std::size_t n, std::uint64_t seed, std::vector<HintId> hints,
                                        int runs, double alt_share) {
  Rng rng(seed);
  SyntheticWorkload w;
  w.alternative = hints.at(1);
  const auto alt_count = static_cast<std::size_t>(static_cast<double>(n) * alt_share + 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    std::ostringstream id;
    id << "q" << std::setw(4) << std::setfill('0') << i;
    const int family = i < alt_count ? 0 : 1;
    QueryRecord q;
    q.id = id.str();
    q.sql = FamilyQuery(rng, family);
    q.source = i % 2 == 0 ? Benchmark::kJob : Benchmark::kCeb;
    w.family[q.id] = family;

    const int base = rng.Int(40, 2000);
    for (HintId h : hints) {
      int latency = 0;
      if (h == kDefaultHintId) {
        latency = base;
      } else if (h == w.alternative) {
        latency = family == 0 ? base - rng.Int(5, base / 2) : base + rng.Int(5, base);
      } else {
        latency = base + rng.Int(1, base);
      }
      for (int r = 0; r < runs; ++r) {
        w.observations.push_back({q.id, h, r, static_cast<double>(latency), false});
      }
    }
    w.queries.push_back(std::move(q));
  }
  return w;
}

std::vector<std::string> SqlCorpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  static const std::vector<std::string> kFixed = {
      "SELECT 1;",
      "select count(*) from title t where t.production_year between 2000 and 2010 and t.kind_id = 1",
      "-- leading comment\nSELECT MIN(t.title) FROM title t WHERE t.title LIKE 'FROM WHERE AND %';",
      "SELECT \"Order Details\".\"Unit Price\" FROM \"Order Details\" WHERE \"Order Details\".qty >= 1.5e3 "
      "ORDER BY 1 DESC LIMIT 10 OFFSET 2;",
      "WITH recent AS (SELECT id FROM title WHERE production_year > 2000 AND kind_id IN (1, 2))\n"
      "SELECT COUNT(*) FROM recent r WHERE EXISTS (SELECT 1 FROM movie_info mi WHERE mi.movie_id = r.id "
      "AND mi.info IS NOT NULL) GROUP BY r.id HAVING COUNT(*) > 1 ORDER BY 1;",
      "SELECT n.name /* inline, AND WHERE */ FROM name AS n\r\nWHERE n.gender = 'f' -- trailing\r\n"
      "  OR n.name_pcode_cf <> 'A5362';",
      "SELECT t.title::text, CAST(t.production_year AS integer) FROM title t WHERE t.title || 'x' != 'yx' "
      "AND t.id % 2 = 0 AND t.title ILIKE '%it''s%';",
      "SELECT\ta.x\tFROM\ta\tWHERE\ta.y = .5\tAND\ta.z = 'multi\nline'\tLIMIT 3",
      "SELECT mi.info FROM movie_info mi WHERE mi.note = E'tab\\there' AND mi.info_type_id = $1;",
      "SELECT k.keyword FROM keyword k WHERE k.keyword NOT IN (SELECT kw FROM banned WHERE lang = 'en' "
      "AND kw LIKE 'a%') /* trailing block */",
      "select min(chn.name) as character from char_name as chn, cast_info as ci where "
      "ci.person_role_id = chn.id and ci.note like '%(voice)%' and ci.nr_order between 1 and 5;",
      "SELECT a FROM b WHERE c = 1 -- final comment without newline",
  };
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < kFixed.size()) {
      out.push_back(kFixed[i]);
      continue;
    }
    std::string q = FamilyQuery(rng, rng.Int(0, 1));
    // Sprinkle comments and irregular whitespace over the generated text.
    if (rng.Coin(0.3)) q = "-- query " + std::to_string(i) + "\n" + q;
    if (rng.Coin(0.3)) {
      const auto pos = q.find(" WHERE ");
      if (pos != std::string::npos) q.insert(pos, " /* filter: AND OR */");
    }
    if (rng.Coin(0.2)) {
      for (std::size_t p = q.find(", "); p != std::string::npos; p = q.find(", ", p + 3)) {
        q.replace(p, 2, ",\n\t ");
      }
    }
    if (rng.Coin(0.2)) {
      const auto pos = q.find(" AND ");
      if (pos != std::string::npos) q.replace(pos, 5, "\n    and ");
    }
    if (rng.Coin(0.15)) q += " -- done";
    out.push_back(std::move(q));
  }
  return out;
}

void WriteQueryDir(const fs::path& dir, const std::vector<QueryRecord>& queries) {
  fs::create_directories(dir);
  for (const auto& q : queries) {
    std::ofstream(dir / (q.id + ".sql"), std::ios::binary) << q.sql;
  }
}

}  // namespace hintsteer::testing
