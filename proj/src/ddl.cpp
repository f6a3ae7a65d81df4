#include "lrsql/ddl.hpp"

#include <cctype>
#include <optional>
#include <sstream>

#include "lrsql/errors.hpp"
#include "lrsql/text.hpp"

namespace lrsql {

namespace {

enum class TokKind { Word, QuotedIdent, String, Number, Punct, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space_and_comments();
      Token tok;
      tok.line = line_;
      tok.column = column_;
      if (pos_ >= src_.size()) {
        out.push_back(tok);
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80) {
        tok.kind = TokKind::Word;
        while (pos_ < src_.size() && is_word_char(src_[pos_])) tok.text += advance();
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        tok.kind = TokKind::Number;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
          tok.text += advance();
        }
      } else if (c == '"' || c == '`' || c == '[') {
        tok.kind = TokKind::QuotedIdent;
        tok.text = quoted(c == '[' ? ']' : c, tok);
      } else if (c == '\'') {
        tok.kind = TokKind::String;
        tok.text = quoted('\'', tok);
      } else {
        tok.kind = TokKind::Punct;
        tok.text = std::string(1, advance());
      }
      out.push_back(std::move(tok));
    }
  }

 private:
  static bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
           static_cast<unsigned char>(c) >= 0x80;
  }

  char advance() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    return c;
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        const int line = line_;
        const int column = column_;
        advance();
        advance();
        while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) advance();
        if (pos_ + 1 >= src_.size()) throw ParseError("unterminated block comment", line, column);
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  // A doubled closing quote inside the literal stands for one quote character.
  std::string quoted(char close, const Token& start) {
    advance();
    std::string out;
    while (true) {
      if (pos_ >= src_.size()) throw ParseError("unterminated quoted text", start.line, start.column);
      const char c = advance();
      if (c == close) {
        if (pos_ < src_.size() && src_[pos_] == close && close != ']') {
          out += advance();
          continue;
        }
        return out;
      }
      out += c;
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

struct PendingForeignKey {
  std::string from_table;
  std::vector<std::string> from_columns;
  std::string to_table;
  std::vector<std::string> to_columns;  // empty: the target's primary key
  int line = 0;
  int column = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  DdlParseResult run(std::string db_id) {
    DdlParseResult result;
    result.schema.db_id = std::move(db_id);
    while (peek().kind != TokKind::End) {
      if (is_punct(";")) {
        next();
        continue;
      }
      if (starts_create_table()) {
        parse_create_table(result);
      } else {
        skip_statement(result);
      }
    }
    resolve_foreign_keys(result.schema);
    validate_schema(result.schema);
    return result;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }

  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  bool is_word(std::string_view kw, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokKind::Word && text::iequals(t.text, kw);
  }

  bool is_punct(std::string_view p) const {
    return peek().kind == TokKind::Punct && peek().text == p;
  }

  bool accept_word(std::string_view kw) {
    if (!is_word(kw)) return false;
    next();
    return true;
  }

  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = peek();
    const std::string found = t.kind == TokKind::End ? "end of input" : "'" + t.text + "'";
    throw ParseError("expected " + expected + " but found " + found, t.line, t.column);
  }

  void expect_word(std::string_view kw) {
    if (!accept_word(kw)) fail(std::string(kw));
  }

  void expect_punct(std::string_view p) {
    if (!is_punct(p)) fail("'" + std::string(p) + "'");
    next();
  }

  std::string identifier(const char* what) {
    const Token& t = peek();
    if (t.kind != TokKind::Word && t.kind != TokKind::QuotedIdent && t.kind != TokKind::String) fail(what);
    return next().text;
  }

  // Qualified names keep only the last component.
  std::string qualified_identifier(const char* what) {
    std::string name = identifier(what);
    while (is_punct(".")) {
      next();
      name = identifier(what);
    }
    return name;
  }

  bool starts_create_table() const {
    if (!is_word("CREATE")) return false;
    std::size_t k = 1;
    if (is_word("TEMP", k) || is_word("TEMPORARY", k)) ++k;
    return is_word("TABLE", k);
  }

  void skip_balanced() {
    expect_punct("(");
    int depth = 1;
    while (depth > 0) {
      if (peek().kind == TokKind::End) fail("')'");
      if (is_punct("(")) ++depth;
      if (is_punct(")")) --depth;
      next();
    }
  }

  void skip_statement(DdlParseResult& result) {
    const Token& start = peek();
    std::string head;
    int depth = 0;
    int words = 0;
    while (peek().kind != TokKind::End) {
      if (depth == 0 && is_punct(";")) break;
      if (is_punct("(")) ++depth;
      if (is_punct(")")) --depth;
      if (words < 3) {
        if (!head.empty()) head += ' ';
        head += peek().text;
        ++words;
      }
      next();
    }
    result.warnings.push_back("line " + std::to_string(start.line) + ": skipped unsupported statement '" +
                              head + " ...'");
  }

  std::vector<std::string> column_list() {
    std::vector<std::string> cols;
    expect_punct("(");
    while (true) {
      cols.push_back(identifier("column name"));
      // Per-column modifiers in key lists.
      while (is_word("ASC") || is_word("DESC") || is_word("COLLATE")) {
        if (accept_word("COLLATE")) {
          identifier("collation name");
        } else {
          next();
        }
      }
      if (is_punct(",")) {
        next();
        continue;
      }
      expect_punct(")");
      return cols;
    }
  }

  void skip_conflict_clause() {
    if (is_word("ON") && is_word("CONFLICT", 1)) {
      next();
      next();
      identifier("conflict resolution");
    }
  }

  void skip_reference_tail() {
    while (true) {
      if (is_word("ON") && (is_word("DELETE", 1) || is_word("UPDATE", 1))) {
        next();
        next();
        if (accept_word("SET")) {
          identifier("NULL or DEFAULT");
        } else if (accept_word("NO")) {
          expect_word("ACTION");
        } else if (!accept_word("CASCADE") && !accept_word("RESTRICT")) {
          fail("referential action");
        }
      } else if (accept_word("MATCH")) {
        identifier("match type");
      } else if (is_word("NOT") && is_word("DEFERRABLE", 1)) {
        next();
        next();
        skip_initially();
      } else if (accept_word("DEFERRABLE")) {
        skip_initially();
      } else {
        return;
      }
    }
  }

  void skip_initially() {
    if (accept_word("INITIALLY")) {
      if (!accept_word("DEFERRED") && !accept_word("IMMEDIATE")) fail("DEFERRED or IMMEDIATE");
    }
  }

  PendingForeignKey references_clause(std::string from_table, std::vector<std::string> from_columns) {
    const Token& at = peek();
    PendingForeignKey fk;
    fk.line = at.line;
    fk.column = at.column;
    expect_word("REFERENCES");
    fk.from_table = std::move(from_table);
    fk.from_columns = std::move(from_columns);
    fk.to_table = qualified_identifier("referenced table name");
    if (is_punct("(")) fk.to_columns = column_list();
    skip_reference_tail();
    return fk;
  }

  static bool is_constraint_start(const Token& t) {
    if (t.kind != TokKind::Word) return false;
    static const char* const kStops[] = {"CONSTRAINT", "PRIMARY", "NOT",     "NULL",      "UNIQUE",
                                         "CHECK",      "DEFAULT", "COLLATE", "REFERENCES", "GENERATED",
                                         "AS",         "AUTOINCREMENT", "AUTO_INCREMENT"};
    for (const char* stop : kStops) {
      if (text::iequals(t.text, stop)) return true;
    }
    return false;
  }

  std::string column_type() {
    std::string type;
    while (peek().kind == TokKind::Word && !is_constraint_start(peek())) {
      if (!type.empty()) type += ' ';
      type += next().text;
    }
    if (!type.empty() && is_punct("(")) {
      next();
      type += '(';
      bool first = true;
      while (!is_punct(")")) {
        if (peek().kind == TokKind::End) fail("')'");
        const Token& t = next();
        if (t.text == ",") {
          type += ',';
          first = true;
          continue;
        }
        if (!first) type += ' ';
        type += t.text;
        first = false;
      }
      next();
      type += ')';
    }
    return type;
  }

  void column_definition(TableDef& table, std::vector<PendingForeignKey>& fks) {
    ColumnDef col;
    col.name = identifier("column name");
    col.type_name = column_type();
    while (!is_punct(",") && !is_punct(")")) {
      if (peek().kind == TokKind::End) fail("',' or ')'");
      if (accept_word("CONSTRAINT")) {
        identifier("constraint name");
      } else if (accept_word("PRIMARY")) {
        expect_word("KEY");
        col.is_primary_key = true;
        if (!accept_word("ASC")) accept_word("DESC");
        skip_conflict_clause();
        accept_word("AUTOINCREMENT");
      } else if (accept_word("NOT")) {
        expect_word("NULL");
        skip_conflict_clause();
      } else if (accept_word("NULL")) {
      } else if (accept_word("UNIQUE")) {
        skip_conflict_clause();
      } else if (accept_word("CHECK")) {
        skip_balanced();
      } else if (accept_word("DEFAULT")) {
        if (is_punct("(")) {
          skip_balanced();
        } else {
          if (is_punct("-") || is_punct("+")) next();
          if (peek().kind == TokKind::End || peek().kind == TokKind::Punct) fail("default value");
          next();
        }
      } else if (accept_word("COLLATE")) {
        identifier("collation name");
      } else if (is_word("REFERENCES")) {
        fks.push_back(references_clause(table.name, {col.name}));
      } else if (accept_word("GENERATED")) {
        expect_word("ALWAYS");
        expect_word("AS");
        skip_balanced();
        if (!accept_word("STORED")) accept_word("VIRTUAL");
      } else if (accept_word("AS")) {
        skip_balanced();
        if (!accept_word("STORED")) accept_word("VIRTUAL");
      } else if (accept_word("AUTOINCREMENT") || accept_word("AUTO_INCREMENT")) {
      } else {
        fail("column constraint");
      }
    }
    table.columns.push_back(std::move(col));
  }

  bool table_constraint(TableDef& table, std::vector<PendingForeignKey>& fks,
                        std::vector<std::pair<std::vector<std::string>, const Token*>>& pks) {
    const std::size_t save = pos_;
    if (accept_word("CONSTRAINT")) identifier("constraint name");
    if (is_word("PRIMARY") && is_word("KEY", 1)) {
      const Token* at = &peek();
      next();
      next();
      pks.emplace_back(column_list(), at);
      skip_conflict_clause();
      return true;
    }
    if (is_word("FOREIGN") && is_word("KEY", 1)) {
      next();
      next();
      auto cols = column_list();
      fks.push_back(references_clause(table.name, std::move(cols)));
      return true;
    }
    if (accept_word("UNIQUE")) {
      column_list();
      skip_conflict_clause();
      return true;
    }
    if (accept_word("CHECK")) {
      skip_balanced();
      return true;
    }
    if (pos_ != save) fail("table constraint");
    return false;
  }

  void parse_create_table(DdlParseResult& result) {
    const Token& start = peek();
    expect_word("CREATE");
    if (!accept_word("TEMP")) accept_word("TEMPORARY");
    expect_word("TABLE");
    if (is_word("IF")) {
      next();
      expect_word("NOT");
      expect_word("EXISTS");
    }
    TableDef table;
    table.name = qualified_identifier("table name");
    if (is_word("AS")) {
      // CREATE TABLE ... AS SELECT carries no declared columns.
      skip_statement(result);
      result.warnings.back() = "line " + std::to_string(start.line) +
                               ": skipped CREATE TABLE AS SELECT for '" + table.name + "'";
      return;
    }
    expect_punct("(");
    if (is_punct(")")) fail("column definition");

    std::vector<PendingForeignKey> fks;
    std::vector<std::pair<std::vector<std::string>, const Token*>> pks;
    while (true) {
      if (!table_constraint(table, fks, pks)) column_definition(table, fks);
      if (is_punct(",")) {
        next();
        continue;
      }
      expect_punct(")");
      break;
    }
    while (peek().kind == TokKind::Word) next();  // WITHOUT ROWID, STRICT, ENGINE words
    if (!is_punct(";") && peek().kind != TokKind::End) fail("';'");

    std::vector<std::string> issues;
    for (const auto& [cols, at] : pks) {
      for (const auto& c : cols) {
        bool found = false;
        for (auto& col : table.columns) {
          if (text::iequals(col.name, c)) {
            col.is_primary_key = true;
            found = true;
          }
        }
        if (!found) {
          issues.push_back("line " + std::to_string(at->line) + ": primary key names missing column '" + c +
                           "' in table '" + table.name + "'");
        }
      }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    result.schema.tables.push_back(std::move(table));
    pending_.insert(pending_.end(), fks.begin(), fks.end());
  }

  void resolve_foreign_keys(DatabaseSchema& schema) {
    std::vector<std::string> issues;
    for (auto& fk : pending_) {
      const std::string where = "line " + std::to_string(fk.line) + ": foreign key from '" + fk.from_table + "'";
      const TableDef* target = find_table(schema, fk.to_table);
      std::vector<std::string> to_cols = fk.to_columns;
      if (to_cols.empty()) {
        if (!target) {
          issues.push_back(where + " references missing table '" + fk.to_table + "'");
          continue;
        }
        for (const auto& col : target->columns) {
          if (col.is_primary_key) to_cols.push_back(col.name);
        }
      }
      if (to_cols.size() != fk.from_columns.size()) {
        issues.push_back(where + " pairs " + std::to_string(fk.from_columns.size()) + " column(s) with " +
                         std::to_string(to_cols.size()) + " referenced column(s)");
        continue;
      }
      // Owning table is found by name; duplicates are reported by validation.
      TableDef* owner = nullptr;
      for (auto& t : schema.tables) {
        if (text::iequals(t.name, fk.from_table)) {
          owner = &t;
          break;
        }
      }
      for (std::size_t i = 0; i < to_cols.size(); ++i) {
        owner->foreign_keys.push_back(
            ForeignKey{owner->name, fk.from_columns[i], target ? target->name : fk.to_table, to_cols[i]});
      }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<PendingForeignKey> pending_;
};

std::string quote_identifier(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

DdlParseResult parse_ddl(std::string_view text, std::string db_id) {
  return Parser(Lexer(text).run()).run(std::move(db_id));
}

std::string schema_to_ddl(const DatabaseSchema& schema) {
  std::ostringstream out;
  for (const auto& table : schema.tables) {
    out << "CREATE TABLE " << quote_identifier(table.name) << " (";
    std::vector<std::string> items;
    std::vector<std::string> pk_cols;
    for (const auto& col : table.columns) {
      std::string item = "\n  " + quote_identifier(col.name);
      if (!col.type_name.empty()) item += " " + col.type_name;
      items.push_back(std::move(item));
      if (col.is_primary_key) pk_cols.push_back(quote_identifier(col.name));
    }
    if (!pk_cols.empty()) items.push_back("\n  PRIMARY KEY (" + text::join(pk_cols, ", ") + ")");
    for (const auto& fk : table.foreign_keys) {
      items.push_back("\n  FOREIGN KEY (" + quote_identifier(fk.from_column) + ") REFERENCES " +
                      quote_identifier(fk.to_table) + " (" + quote_identifier(fk.to_column) + ")");
    }
    out << text::join(items, ",") << "\n);\n";
  }
  return out.str();
}

}  // namespace lrsql
