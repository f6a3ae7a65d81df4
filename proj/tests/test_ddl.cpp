#include <catch_amalgamated.hpp>

#include "lrsql/ddl.hpp"
#include "lrsql/errors.hpp"
#include "support/fixtures.hpp"

using namespace lrsql;

TEST_CASE("minimal CREATE TABLE") {
  const auto r = parse_ddl("CREATE TABLE a (id INT PRIMARY KEY);");
  REQUIRE(r.schema.tables.size() == 1);
  REQUIRE(r.schema.tables[0].columns.size() == 1);
  CHECK(r.schema.tables[0].columns[0].name == "id");
  CHECK(r.schema.tables[0].columns[0].type_name == "INT");
  CHECK(r.schema.tables[0].columns[0].is_primary_key);
  CHECK(r.warnings.empty());
}

TEST_CASE("table-level foreign key") {
  const auto r = parse_ddl(R"(
    CREATE TABLE a (id INT PRIMARY KEY);
    CREATE TABLE b (
      id INT,
      aid INT NOT NULL,
      PRIMARY KEY (id),
      FOREIGN KEY (aid) REFERENCES a(id) ON DELETE CASCADE
    );
  )");
  REQUIRE(r.schema.tables.size() == 2);
  REQUIRE(r.schema.tables[1].foreign_keys.size() == 1);
  CHECK(r.schema.tables[1].foreign_keys[0] == ForeignKey{"b", "aid", "a", "id"});
  CHECK(r.schema.tables[1].columns[0].is_primary_key);
}

TEST_CASE("inline REFERENCES without a column list targets the primary key") {
  const auto r = parse_ddl(R"(
    create table "Owner" ([key] integer primary key autoincrement, name varchar(40) default 'x');
    create table pet (id integer primary key, owner integer references Owner, weight decimal(5, 2));
  )");
  REQUIRE(r.schema.tables[1].foreign_keys.size() == 1);
  CHECK(r.schema.tables[1].foreign_keys[0] == ForeignKey{"pet", "owner", "Owner", "key"});
  CHECK(r.schema.tables[0].columns[1].type_name == "varchar(40)");
  CHECK(r.schema.tables[1].columns[2].type_name == "decimal(5,2)");
}

TEST_CASE("forward references resolve at the end") {
  const auto r = parse_ddl(R"(
    CREATE TABLE child (id INT PRIMARY KEY, pid INT, FOREIGN KEY (pid) REFERENCES parent (id));
    CREATE TABLE parent (id INT PRIMARY KEY);
  )");
  CHECK(r.schema.tables[0].foreign_keys.size() == 1);
}

TEST_CASE("unsupported statements are skipped with a warning") {
  const auto r = parse_ddl(R"(
    -- comment
    CREATE TABLE a (id INT PRIMARY KEY); /* block */
    CREATE INDEX ix ON a(id);
    INSERT INTO a VALUES (1);
    PRAGMA foreign_keys = ON;
  )");
  CHECK(r.schema.tables.size() == 1);
  CHECK(r.warnings.size() == 3);
}

TEST_CASE("empty column list is rejected") {
  CHECK_THROWS_AS(parse_ddl("CREATE TABLE a ();"), ParseError);
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_ddl("CREATE TABLE a (id INT);\nCREATE TABLE b (id INT,, x INT);");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() > 0);
  }
  CHECK_THROWS_AS(parse_ddl("CREATE TABLE a (id INT"), ParseError);
  CHECK_THROWS_AS(parse_ddl("CREATE TABLE a (s TEXT DEFAULT 'open"), ParseError);
}

TEST_CASE("dangling foreign key is a validation error") {
  CHECK_THROWS_AS(parse_ddl("CREATE TABLE a (id INT, g INT REFERENCES ghost(id));"), ValidationError);
  CHECK_THROWS_AS(parse_ddl("CREATE TABLE a (id INT); CREATE TABLE A (x INT);"), ValidationError);
}

TEST_CASE("DDL round-trip on random schemas") {
  SeededRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = lrsql::testing::random_schema(rng);
    const auto back = parse_ddl(schema_to_ddl(s), s.db_id);
    CHECK(back.warnings.empty());
    CHECK(back.schema == s);
  }
}
