#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "ddopf/case_io.hpp"
#include "ddopf/errors.hpp"

namespace ddopf {
namespace {

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;
  int line = 1;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  void advance() {
    if (text[pos] == '\n') ++line;
    ++pos;
  }
  void skip_comment() {
    while (!done() && peek() != '\n') ++pos;
  }
};

std::string where(std::string_view source, int line) {
  return std::string(source) + ":" + std::to_string(line);
}

double parse_number(std::string_view tok, std::string_view source, int line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    if (tok == "Inf" || tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-Inf" || tok == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParseError(where(source, line) + ": invalid number '" + std::string(tok) + "'",
                     line);
  }
  return v;
}

// Reads the body of `[ ... ]` starting after the opening bracket.
Matrix read_matrix(Cursor& c, std::string_view name, std::string_view source) {
  std::vector<std::vector<double>> rows;
  std::vector<int> row_lines;
  std::vector<double> current;
  int current_line = c.line;
  auto end_row = [&] {
    if (!current.empty()) {
      rows.push_back(std::move(current));
      row_lines.push_back(current_line);
      current.clear();
    }
  };
  const int open_line = c.line;
  while (true) {
    if (c.done()) {
      throw ParseError(where(source, open_line) + ": unterminated matrix mpc." +
                           std::string(name), open_line);
    }
    const char ch = c.peek();
    if (ch == ']') {
      c.advance();
      break;
    }
    if (ch == '%') {
      c.skip_comment();
    } else if (ch == ';' || ch == '\n') {
      end_row();
      c.advance();
    } else if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      c.advance();
    } else if (ch == '.' && c.text.substr(c.pos, 3) == "...") {
      // line continuation
      c.skip_comment();
      c.advance();
    } else {
      const std::size_t start = c.pos;
      while (!c.done()) {
        const char t = c.peek();
        if (std::isspace(static_cast<unsigned char>(t)) || t == ';' || t == ',' ||
            t == ']' || t == '%') {
          break;
        }
        c.advance();
      }
      if (current.empty()) current_line = c.line;
      current.push_back(parse_number(c.text.substr(start, c.pos - start), source, c.line));
    }
  }
  end_row();
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t width = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw ParseError(where(source, row_lines[r]) + ": ragged row in mpc." +
                           std::string(name) + " (expected " + std::to_string(width) +
                           " entries, found " + std::to_string(rows[r].size()) + ")",
                       row_lines[r]);
    }
    for (std::size_t k = 0; k < width; ++k) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
    }
  }
  return m;
}

void skip_balanced(Cursor& c, char open, char close) {
  int depth = 1;
  while (!c.done() && depth > 0) {
    const char ch = c.peek();
    if (ch == '%') {
      c.skip_comment();
      continue;
    }
    if (ch == open) ++depth;
    if (ch == close) --depth;
    c.advance();
  }
}

// Skips an unrecognized right-hand side up to the terminating semicolon or
// newline, honoring brackets, braces and quoted strings.
void skip_value(Cursor& c) {
  while (!c.done()) {
    const char ch = c.peek();
    if (ch == '[') {
      c.advance();
      skip_balanced(c, '[', ']');
    } else if (ch == '{') {
      c.advance();
      skip_balanced(c, '{', '}');
    } else if (ch == '\'' || ch == '"') {
      c.advance();
      while (!c.done() && c.peek() != ch && c.peek() != '\n') c.advance();
      if (!c.done() && c.peek() == ch) c.advance();
    } else if (ch == ';' || ch == '\n') {
      return;
    } else if (ch == '%') {
      c.skip_comment();
    } else {
      c.advance();
    }
  }
}

}  // namespace

RawMatpowerCase parse_matpower(std::string_view text, std::string_view source) {
  Cursor c{text};
  std::map<std::string, Matrix> matrices;
  std::optional<double> base_mva;

  while (!c.done()) {
    const char ch = c.peek();
    if (ch == '%') {
      c.skip_comment();
      continue;
    }
    if (c.text.substr(c.pos, 4) == "mpc." &&
        (c.pos == 0 || !std::isalnum(static_cast<unsigned char>(c.text[c.pos - 1])))) {
      c.pos += 4;
      const std::size_t start = c.pos;
      while (!c.done() && (std::isalnum(static_cast<unsigned char>(c.peek())) || c.peek() == '_')) {
        c.advance();
      }
      const std::string name(c.text.substr(start, c.pos - start));
      while (!c.done() && (c.peek() == ' ' || c.peek() == '\t')) c.advance();
      if (c.done() || c.peek() != '=') {
        skip_value(c);
        continue;
      }
      c.advance();
      while (!c.done() && std::isspace(static_cast<unsigned char>(c.peek()))) c.advance();
      const int line = c.line;
      if (name == "baseMVA") {
        const std::size_t vstart = c.pos;
        while (!c.done() && c.peek() != ';' && c.peek() != '\n' && c.peek() != '%') c.advance();
        std::string_view tok = c.text.substr(vstart, c.pos - vstart);
        while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) {
          tok.remove_suffix(1);
        }
        base_mva = parse_number(tok, source, line);
      } else if (!c.done() && c.peek() == '[' &&
                 (name == "bus" || name == "branch" || name == "gen" || name == "gencost")) {
        c.advance();
        matrices[name] = read_matrix(c, name, source);
      } else {
        skip_value(c);
      }
      continue;
    }
    c.advance();
  }

  for (const char* required : {"bus", "branch", "gen"}) {
    if (!matrices.count(required)) {
      throw MissingField(std::string(source) + ": missing field mpc." + required);
    }
  }
  if (!base_mva) throw MissingField(std::string(source) + ": missing field mpc.baseMVA");

  RawMatpowerCase raw;
  raw.base_mva = *base_mva;
  raw.bus = std::move(matrices["bus"]);
  raw.branch = std::move(matrices["branch"]);
  raw.gen = std::move(matrices["gen"]);
  if (matrices.count("gencost")) raw.gencost = std::move(matrices["gencost"]);
  if (raw.gencost.rows() != 0 && raw.gencost.rows() != raw.gen.rows()) {
    throw ParseError(std::string(source) + ": gencost has " +
                         std::to_string(raw.gencost.rows()) + " rows but gen has " +
                         std::to_string(raw.gen.rows()),
                     0);
  }
  return raw;
}

RawMatpowerCase load_matpower(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_matpower(buf.str(), path.string());
}

GridCase to_grid_case(const RawMatpowerCase& raw, const StorageAugmentation& aug,
                      const ConversionOptions& options) {
  auto need_cols = [](const Matrix& m, int cols, const char* name) {
    if (m.rows() > 0 && m.cols() < cols) {
      throw MissingField(std::string("mpc.") + name + " needs at least " +
                         std::to_string(cols) + " columns");
    }
  };
  need_cols(raw.bus, 3, "bus");
  need_cols(raw.branch, 11, "branch");
  need_cols(raw.gen, 10, "gen");

  GridCase grid;
  grid.delta_hours = options.delta_hours;
  for (Eigen::Index i = 0; i < raw.bus.rows(); ++i) {
    grid.buses.push_back({static_cast<int>(raw.bus(i, 0)), raw.bus(i, 2)});
  }
  auto known_bus = [&](int id) {
    for (const auto& b : grid.buses) {
      if (b.id == id) return true;
    }
    return false;
  };

  for (Eigen::Index k = 0; k < raw.branch.rows(); ++k) {
    if (raw.branch(k, 10) == 0.0) continue;
    Branch br;
    br.from = static_cast<int>(raw.branch(k, 0));
    br.to = static_cast<int>(raw.branch(k, 1));
    br.x = raw.branch(k, 3);
    br.f_max = raw.branch(k, 5) == 0.0 ? options.default_flow_limit : raw.branch(k, 5);
    br.tap = raw.branch(k, 8) == 0.0 ? 1.0 : raw.branch(k, 8);
    if (!known_bus(br.from) || !known_bus(br.to)) {
      throw ReferenceError("branch row " + std::to_string(k + 1) + " references an unknown bus");
    }
    grid.branches.push_back(br);
  }

  for (Eigen::Index k = 0; k < raw.gen.rows(); ++k) {
    if (raw.gen(k, 7) == 0.0) continue;
    Generator g;
    g.bus = static_cast<int>(raw.gen(k, 0));
    if (!known_bus(g.bus)) {
      throw ReferenceError("generator row " + std::to_string(k + 1) + " sits on unknown bus " +
                           std::to_string(g.bus));
    }
    g.p_max = raw.gen(k, 8);
    g.p_min = raw.gen(k, 9);
    if (raw.gencost.rows() > 0) {
      const auto row = raw.gencost.row(k);
      if (row(0) != 2.0) {
        throw UnsupportedCost("gencost row " + std::to_string(k + 1) +
                              ": only polynomial cost model 2 is supported");
      }
      const int n = static_cast<int>(row(3));
      if (n > 3) {
        throw UnsupportedCost("gencost row " + std::to_string(k + 1) +
                              ": polynomial degree above 2 is not supported");
      }
      if (row.size() < 4 + n) {
        throw MissingField("gencost row " + std::to_string(k + 1) + " is too short");
      }
      // Coefficients are listed highest order first.
      if (n == 3) {
        g.cost_quadratic = row(4);
        g.cost_linear = row(5);
      } else if (n == 2) {
        g.cost_linear = row(4);
      }
    }
    grid.generators.push_back(g);
  }

  int column = 0;
  for (const auto& b : grid.buses) {
    if (b.demand_mw > 0.0) grid.demands.push_back({b.id, column++});
  }

  for (const auto& s : aug.storages) {
    if (!known_bus(s.bus)) {
      throw ReferenceError("storage augmentation references unknown bus " + std::to_string(s.bus));
    }
    grid.storages.push_back(s);
  }

  if (options.slack_bus) {
    grid.slack_bus = *options.slack_bus;
  } else if (!grid.generators.empty()) {
    grid.slack_bus = grid.generators.front().bus;
  } else {
    throw InvalidParameter("case has no in-service generator to act as slack");
  }
  grid.validate();
  return grid;
}

}  // namespace ddopf
