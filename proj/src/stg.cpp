#include "evolve/stg.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace evolve::stg {

namespace {

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

// Comments are blanked in place (newlines kept) so token lines stay accurate.
std::string strip_comments(const std::string& src) {
  std::string out = src;
  std::size_t i = 0;
  while (i < out.size()) {
    if (out[i] == '/' && i + 1 < out.size() && out[i + 1] == '/') {
      while (i < out.size() && out[i] != '\n') out[i++] = ' ';
    } else if (out[i] == '/' && i + 1 < out.size() && out[i + 1] == '*') {
      out[i++] = ' ';
      out[i++] = ' ';
      while (i < out.size() && !(out[i] == '*' && i + 1 < out.size() &&
                                 out[i + 1] == '/')) {
        if (out[i] != '\n') out[i] = ' ';
        ++i;
      }
      if (i + 1 < out.size()) {
        out[i++] = ' ';
        out[i++] = ' ';
      }
    } else {
      ++i;
    }
  }
  return out;
}

struct Tok {
  enum Kind { Ident, Number, Punct, End } kind = End;
  std::string text;
  int line = 0;
};

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

std::vector<Tok> lex(const std::string& text) {
  std::vector<Tok> toks;
  int line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      toks.push_back({Tok::Ident, text.substr(i, j - i), line});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) ||
              text[j] == '_' || text[j] == '\'')) {
        ++j;
      }
      toks.push_back({Tok::Number, text.substr(i, j - i), line});
      i = j;
      continue;
    }
    toks.push_back({Tok::Punct, std::string(1, c), line});
    ++i;
  }
  toks.push_back({Tok::End, "", line});
  return toks;
}

// ---------------------------------------------------------------------------
// Constant expressions in port ranges / parameter defaults
// ---------------------------------------------------------------------------

long parse_verilog_literal(const std::string& text, int line) {
  auto tick = text.find('\'');
  std::string digits = text;
  int base = 10;
  if (tick != std::string::npos) {
    if (tick + 1 >= text.size()) {
      throw StgError("bad literal '" + text + "'", line);
    }
    char b = static_cast<char>(
        std::tolower(static_cast<unsigned char>(text[tick + 1])));
    std::size_t start = tick + 2;
    if (b == 's' && start < text.size()) {  // signed marker: 8'sd5
      b = static_cast<char>(
          std::tolower(static_cast<unsigned char>(text[start])));
      ++start;
    }
    switch (b) {
      case 'b': base = 2; break;
      case 'o': base = 8; break;
      case 'd': base = 10; break;
      case 'h': base = 16; break;
      default:
        throw StgError("bad literal base in '" + text + "'", line);
    }
    digits = text.substr(start);
  }
  digits.erase(std::remove(digits.begin(), digits.end(), '_'), digits.end());
  if (digits.empty()) {
    throw StgError("bad literal '" + text + "'", line);
  }
  long value = 0;
  for (char c : digits) {
    int d;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      d = c - '0';
    } else {
      d = std::tolower(static_cast<unsigned char>(c)) - 'a' + 10;
    }
    if (d < 0 || d >= base) {
      throw StgError("bad digit in literal '" + text + "'", line);
    }
    value = value * base + d;
  }
  return value;
}

// Minimal +,-,*,/ expression evaluator over integers and known parameters.
class ExprEval {
 public:
  ExprEval(const std::vector<Tok>& toks, std::size_t begin, std::size_t end,
           const std::map<std::string, long>& params)
      : toks_(toks), pos_(begin), end_(end), params_(params) {}

  long eval() {
    long v = parse_sum();
    if (pos_ != end_) {
      throw StgError("cannot evaluate expression near '" + cur().text + "'",
                     cur().line);
    }
    return v;
  }

 private:
  const Tok& cur() const { return toks_[std::min(pos_, end_)]; }

  long parse_sum() {
    long v = parse_term();
    while (pos_ < end_ && (cur().text == "+" || cur().text == "-")) {
      bool add = cur().text == "+";
      ++pos_;
      long rhs = parse_term();
      v = add ? v + rhs : v - rhs;
    }
    return v;
  }

  long parse_term() {
    long v = parse_atom();
    while (pos_ < end_ && (cur().text == "*" || cur().text == "/")) {
      bool mul = cur().text == "*";
      ++pos_;
      long rhs = parse_atom();
      if (!mul && rhs == 0) {
        throw StgError("division by zero in constant expression", cur().line);
      }
      v = mul ? v * rhs : v / rhs;
    }
    return v;
  }

  long parse_atom() {
    if (pos_ >= end_) {
      throw StgError("truncated constant expression", cur().line);
    }
    const Tok& t = toks_[pos_];
    if (t.text == "-") {
      ++pos_;
      return -parse_atom();
    }
    if (t.text == "(") {
      ++pos_;
      long v = parse_sum();
      if (pos_ >= end_ || cur().text != ")") {
        throw StgError("unbalanced parentheses in expression", t.line);
      }
      ++pos_;
      return v;
    }
    if (t.kind == Tok::Number) {
      ++pos_;
      return parse_verilog_literal(t.text, t.line);
    }
    if (t.kind == Tok::Ident) {
      auto it = params_.find(t.text);
      if (it == params_.end()) {
        throw StgError("unknown parameter '" + t.text + "' in port range",
                       t.line);
      }
      ++pos_;
      return it->second;
    }
    throw StgError("cannot evaluate expression near '" + t.text + "'", t.line);
  }

  const std::vector<Tok>& toks_;
  std::size_t pos_;
  std::size_t end_;
  const std::map<std::string, long>& params_;
};

// ---------------------------------------------------------------------------
// Module header / port declarations
// ---------------------------------------------------------------------------

struct ModuleText {
  std::size_t param_begin = 0, param_end = 0;  // token range inside #( )
  std::size_t port_begin = 0, port_end = 0;    // token range inside ( )
  std::size_t body_begin = 0, body_end = 0;    // header ';' .. 'endmodule'
  bool has_param_list = false;
  bool has_port_list = false;
};

std::size_t skip_balanced_paren(const std::vector<Tok>& toks,
                                std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < toks.size(); ++i) {
    if (toks[i].text == "(") ++depth;
    if (toks[i].text == ")") {
      --depth;
      if (depth == 0) return i;
    }
  }
  throw StgError("unbalanced parentheses in module header", toks[open].line);
}

ModuleText find_module(const std::vector<Tok>& toks,
                       const std::string& top_module) {
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (toks[i].kind != Tok::Ident || toks[i].text != "module") continue;
    if (toks[i + 1].kind != Tok::Ident || toks[i + 1].text != top_module) {
      continue;
    }
    ModuleText m;
    std::size_t j = i + 2;
    if (toks[j].text == "#") {
      if (toks[j + 1].text != "(") {
        throw StgError("expected '(' after '#' in module header",
                       toks[j].line);
      }
      std::size_t close = skip_balanced_paren(toks, j + 1);
      m.has_param_list = true;
      m.param_begin = j + 2;
      m.param_end = close;
      j = close + 1;
    }
    if (toks[j].text == "(") {
      std::size_t close = skip_balanced_paren(toks, j);
      m.has_port_list = true;
      m.port_begin = j + 1;
      m.port_end = close;
      j = close + 1;
    }
    if (toks[j].text != ";") {
      throw StgError("expected ';' after module header of '" + top_module +
                         "'",
                     toks[j].line);
    }
    m.body_begin = j + 1;
    std::size_t k = m.body_begin;
    while (k < toks.size() && !(toks[k].kind == Tok::Ident &&
                                toks[k].text == "endmodule")) {
      ++k;
    }
    m.body_end = k;
    return m;
  }
  throw StgError("module '" + top_module + "' not found");
}

bool is_direction_kw(const std::string& s) {
  return s == "input" || s == "output" || s == "inout";
}

PortDirection direction_from_kw(const std::string& s) {
  if (s == "input") return PortDirection::In;
  if (s == "output") return PortDirection::Out;
  return PortDirection::InOut;
}

bool is_net_kw(const std::string& s) {
  return s == "wire" || s == "reg" || s == "logic" || s == "signed" ||
         s == "var" || s == "tri" || s == "integer";
}

// Collects `parameter NAME = expr` pairs from a token range. Unevaluable
// defaults are skipped; they only matter if a port range later needs them.
void collect_params(const std::vector<Tok>& toks, std::size_t begin,
                    std::size_t end, std::map<std::string, long>& params) {
  std::size_t i = begin;
  while (i < end) {
    if (toks[i].kind == Tok::Ident &&
        (toks[i].text == "parameter" || toks[i].text == "localparam")) {
      ++i;
      while (i < end && toks[i].text != ";") {
        // skip type/range decoration before the name
        while (i < end && (is_net_kw(toks[i].text) || toks[i].text == "[")) {
          if (toks[i].text == "[") {
            while (i < end && toks[i].text != "]") ++i;
          }
          ++i;
        }
        if (i >= end || toks[i].kind != Tok::Ident) break;
        std::string name = toks[i].text;
        ++i;
        if (i >= end || toks[i].text != "=") break;
        ++i;
        std::size_t expr_end = i;
        int depth = 0;
        while (expr_end < end) {
          const std::string& t = toks[expr_end].text;
          if (t == "(" || t == "[") ++depth;
          if (t == ")" || t == "]") --depth;
          if (depth == 0 && (t == "," || t == ";")) break;
          if (depth < 0) break;
          ++expr_end;
        }
        try {
          ExprEval ev(toks, i, expr_end, params);
          params[name] = ev.eval();
        } catch (const StgError&) {
          // non-constant default; ignore
        }
        i = expr_end;
        if (i < end && toks[i].text == ",") ++i;
      }
    } else {
      ++i;
    }
  }
}

struct RangeSpec {
  bool present = false;
  unsigned width = 1;
};

// Parses optional "[msb:lsb]" starting at i; advances i past it.
RangeSpec parse_range(const std::vector<Tok>& toks, std::size_t& i,
                      std::size_t end,
                      const std::map<std::string, long>& params) {
  RangeSpec r;
  if (i >= end || toks[i].text != "[") return r;
  std::size_t open = i;
  std::size_t colon = i;
  int depth = 0;
  std::size_t close = i;
  for (std::size_t j = i; j < end; ++j) {
    if (toks[j].text == "[") ++depth;
    if (toks[j].text == "]") {
      --depth;
      if (depth == 0) {
        close = j;
        break;
      }
    }
    if (depth == 1 && toks[j].text == ":") colon = j;
  }
  if (close == i || colon == i) {
    throw StgError("unparsable port range", toks[open].line);
  }
  long msb = ExprEval(toks, open + 1, colon, params).eval();
  long lsb = ExprEval(toks, colon + 1, close, params).eval();
  r.present = true;
  r.width = static_cast<unsigned>(std::labs(msb - lsb)) + 1u;
  i = close + 1;
  return r;
}

}  // namespace

std::vector<Port> parse_ports(const std::string& dut_source,
                              const std::string& top_module) {
  std::string stripped = strip_comments(dut_source);
  std::vector<Tok> toks = lex(stripped);
  ModuleText m = find_module(toks, top_module);

  std::map<std::string, long> params;
  if (m.has_param_list) {
    // entries may omit repeated 'parameter' keywords; normalize by scanning
    // the whole range with the keyword-driven collector plus a fallback for
    // "NAME = expr" continuations.
    collect_params(toks, m.param_begin, m.param_end, params);
    std::size_t i = m.param_begin;
    while (i < m.param_end) {
      if (toks[i].kind == Tok::Ident && i + 1 < m.param_end &&
          toks[i + 1].text == "=" && params.count(toks[i].text) == 0) {
        std::size_t expr_end = i + 2;
        int depth = 0;
        while (expr_end < m.param_end) {
          const std::string& t = toks[expr_end].text;
          if (t == "(" || t == "[") ++depth;
          if (t == ")" || t == "]") --depth;
          if (depth == 0 && t == ",") break;
          ++expr_end;
        }
        try {
          params[toks[i].text] = ExprEval(toks, i + 2, expr_end, params).eval();
        } catch (const StgError&) {
        }
        i = expr_end;
      }
      ++i;
    }
  }
  collect_params(toks, m.body_begin, m.body_end, params);

  std::vector<Port> ports;
  if (!m.has_port_list || m.port_begin == m.port_end) {
    return ports;
  }

  bool ansi = false;
  for (std::size_t i = m.port_begin; i < m.port_end; ++i) {
    if (toks[i].kind == Tok::Ident && is_direction_kw(toks[i].text)) {
      ansi = true;
      break;
    }
  }

  if (ansi) {
    PortDirection dir = PortDirection::In;
    RangeSpec range;
    bool have_dir = false;
    std::size_t i = m.port_begin;
    while (i < m.port_end) {
      const Tok& t = toks[i];
      if (t.text == ",") {
        ++i;
        continue;
      }
      if (t.kind == Tok::Ident && is_direction_kw(t.text)) {
        dir = direction_from_kw(t.text);
        have_dir = true;
        range = RangeSpec{};  // a new declaration resets the range
        ++i;
        while (i < m.port_end && toks[i].kind == Tok::Ident &&
               is_net_kw(toks[i].text)) {
          ++i;
        }
        range = parse_range(toks, i, m.port_end, params);
        continue;
      }
      if (t.kind == Tok::Ident) {
        if (!have_dir) {
          throw StgError("port '" + t.text + "' lacks a direction", t.line);
        }
        Port p;
        p.name = t.text;
        p.direction = dir;
        p.width = range.present ? range.width : 1;
        ports.push_back(p);
        ++i;
        // ignore an unpacked dimension after the name
        if (i < m.port_end && toks[i].text == "[") {
          int depth = 0;
          while (i < m.port_end) {
            if (toks[i].text == "[") ++depth;
            if (toks[i].text == "]") {
              --depth;
              ++i;
              if (depth == 0) break;
              continue;
            }
            ++i;
          }
        }
        continue;
      }
      throw StgError("unparsable port declaration near '" + t.text + "'",
                     t.line);
    }
    return ports;
  }

  // Non-ANSI: header carries names only; directions come from body decls.
  std::vector<std::pair<std::string, int>> names;  // name, line
  for (std::size_t i = m.port_begin; i < m.port_end; ++i) {
    const Tok& t = toks[i];
    if (t.text == ",") continue;
    if (t.kind != Tok::Ident) {
      throw StgError("unparsable port list entry near '" + t.text + "'",
                     t.line);
    }
    names.emplace_back(t.text, t.line);
  }

  std::map<std::string, Port> declared;
  std::size_t i = m.body_begin;
  while (i < m.body_end) {
    if (toks[i].kind == Tok::Ident && is_direction_kw(toks[i].text)) {
      PortDirection dir = direction_from_kw(toks[i].text);
      ++i;
      while (i < m.body_end && toks[i].kind == Tok::Ident &&
             is_net_kw(toks[i].text)) {
        ++i;
      }
      RangeSpec range = parse_range(toks, i, m.body_end, params);
      while (i < m.body_end && toks[i].text != ";") {
        if (toks[i].kind == Tok::Ident) {
          Port p;
          p.name = toks[i].text;
          p.direction = dir;
          p.width = range.present ? range.width : 1;
          declared[p.name] = p;
        }
        ++i;
      }
    }
    ++i;
  }

  for (const auto& [name, line] : names) {
    auto it = declared.find(name);
    if (it == declared.end()) {
      throw StgError("port '" + name + "' has no direction declaration", line);
    }
    ports.push_back(it->second);
  }
  return ports;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

namespace {

std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::vector<std::string> name_tokens(const std::string& name) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : to_lower(name)) {
    if (c == '_') {
      if (!cur.empty()) toks.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

const std::set<std::string> kClockWords = {"clk", "clock"};
const std::set<std::string> kResetWords = {"rst", "reset", "rstn", "resetn"};
const std::set<std::string> kControlWords = {
    "valid", "ready", "en",  "enable", "start", "done",  "sel",
    "mode",  "we",    "re",  "req",    "ack",   "flush", "stall"};

bool is_clock_name(const std::string& name) {
  for (const auto& t : name_tokens(name)) {
    if (kClockWords.count(t)) return true;
  }
  return false;
}

bool is_reset_name(const std::string& name) {
  auto toks = name_tokens(name);
  return !toks.empty() && kResetWords.count(toks.front()) > 0;
}

bool reset_active_low(const std::string& name) {
  std::string lower = to_lower(name);
  if (lower.size() >= 2 && lower.compare(lower.size() - 2, 2, "_n") == 0) {
    return true;
  }
  auto toks = name_tokens(name);
  return !toks.empty() && (toks.front() == "rstn" || toks.front() == "resetn");
}

bool has_control_word(const std::string& name) {
  for (const auto& t : name_tokens(name)) {
    if (kControlWords.count(t)) return true;
  }
  return false;
}

}  // namespace

std::vector<Port> classify_ports(std::vector<Port> ports) {
  for (auto& p : ports) {
    if (p.direction == PortDirection::InOut) {
      throw StgError("inout port '" + p.name +
                     "' is not supported; bidirectional stimulus is out of "
                     "scope");
    }
    if (p.direction == PortDirection::Out) {
      p.category = PortCategory::Observed;
      continue;
    }
    if (is_clock_name(p.name) || is_reset_name(p.name)) {
      p.category = PortCategory::ClockReset;
    } else if (has_control_word(p.name) || p.width == 1) {
      p.category = PortCategory::Control;
    } else {
      p.category = PortCategory::Datapath;
    }
  }
  return ports;
}

// ---------------------------------------------------------------------------
// Stimulus planning
// ---------------------------------------------------------------------------

namespace {

unsigned hex_digits(unsigned width) { return (width + 3) / 4; }

// Formats a little-endian word vector as a lowercase hex string padded to
// the port width.
std::string hex_of_words(const std::vector<std::uint64_t>& words,
                         unsigned width) {
  unsigned digits = hex_digits(width);
  std::string out(digits, '0');
  for (unsigned d = 0; d < digits; ++d) {
    unsigned word = d / 16;
    unsigned shift = (d % 16) * 4;
    unsigned nibble =
        word < words.size()
            ? static_cast<unsigned>((words[word] >> shift) & 0xF)
            : 0u;
    out[digits - 1 - d] = "0123456789abcdef"[nibble];
  }
  return out;
}

std::vector<std::uint64_t> mask_to_width(std::vector<std::uint64_t> words,
                                         unsigned width) {
  unsigned nwords = (width + 63) / 64;
  words.resize(nwords, 0);
  unsigned rem = width % 64;
  if (rem != 0) {
    words[nwords - 1] &= (std::uint64_t(1) << rem) - 1;
  }
  return words;
}

std::string pattern_value(std::uint64_t pattern, unsigned width) {
  unsigned nwords = (width + 63) / 64;
  std::vector<std::uint64_t> words(nwords, pattern);
  return hex_of_words(mask_to_width(std::move(words), width), width);
}

std::string random_value(std::mt19937_64& rng, unsigned width) {
  unsigned nwords = (width + 63) / 64;
  std::vector<std::uint64_t> words(nwords);
  for (auto& w : words) w = rng();
  return hex_of_words(mask_to_width(std::move(words), width), width);
}

std::vector<std::string> corner_values(unsigned width) {
  std::vector<std::string> corners = {
      pattern_value(0x0, width),
      pattern_value(~std::uint64_t(0), width),
      pattern_value(0xAAAAAAAAAAAAAAAAull, width),
      pattern_value(0x5555555555555555ull, width),
  };
  std::vector<std::string> out;
  for (auto& c : corners) {
    if (std::find(out.begin(), out.end(), c) == out.end()) {
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace

StimulusPlan plan_stimulus(const std::vector<Port>& ports,
                           const StimulusConfig& config) {
  StimulusPlan plan;
  plan.seed = config.seed;
  plan.random_vectors = config.random_vectors;
  plan.max_total_checks = config.max_total_checks;
  std::mt19937_64 rng(config.seed);
  // random draws happen in declared port order so the plan is a pure
  // function of (ports, config)
  for (const auto& p : ports) {
    if (p.category == PortCategory::Control) {
      ControlStimulus cs;
      cs.port = p.name;
      cs.width = p.width;
      if (p.width <= config.w_exhaustive_max) {
        cs.mode = StimulusMode::Exhaustive;
        std::uint64_t count = std::uint64_t(1) << p.width;
        for (std::uint64_t v = 0; v < count; ++v) {
          cs.values.push_back(hex_of_words({v}, p.width));
        }
      } else {
        cs.mode = StimulusMode::ConstrainedRandom;
        for (int i = 0; i < config.random_vectors; ++i) {
          cs.values.push_back(random_value(rng, p.width));
        }
      }
      plan.controls.push_back(std::move(cs));
    } else if (p.category == PortCategory::Datapath) {
      DatapathStimulus ds;
      ds.port = p.name;
      ds.width = p.width;
      ds.corner_values = corner_values(p.width);
      for (int i = 0; i < config.random_vectors; ++i) {
        ds.random_values.push_back(random_value(rng, p.width));
      }
      plan.datapaths.push_back(std::move(ds));
    }
  }
  return plan;
}

int StimulusPlan::outer_steps() const {
  std::size_t steps = 1;
  for (const auto& c : controls) {
    steps = std::max(steps, c.values.size());
  }
  return static_cast<int>(steps);
}

int StimulusPlan::inner_steps() const {
  if (datapaths.empty()) return 1;
  std::size_t full = 1;
  std::size_t min_inner = 1;
  for (const auto& d : datapaths) {
    full = std::max(full, d.corner_values.size() + d.random_values.size());
    min_inner = std::max(min_inner, d.corner_values.size());
  }
  // Trim random fill to respect the check cap, never the corner prefix.
  std::size_t budget =
      std::max<std::size_t>(1, static_cast<std::size_t>(max_total_checks) /
                                   static_cast<std::size_t>(outer_steps()));
  return static_cast<int>(std::max(std::min(full, budget), min_inner));
}

int StimulusPlan::total_checks() const { return outer_steps() * inner_steps(); }

// ---------------------------------------------------------------------------
// Testbench emission
// ---------------------------------------------------------------------------

namespace {

std::string port_diff_message(const std::vector<Port>& dut,
                              const std::vector<Port>& golden) {
  std::map<std::string, Port> dut_map, gold_map;
  for (const auto& p : dut) dut_map[p.name] = p;
  for (const auto& p : golden) gold_map[p.name] = p;
  std::ostringstream os;
  for (const auto& [name, p] : dut_map) {
    auto it = gold_map.find(name);
    if (it == gold_map.end()) {
      os << " missing-in-golden:" << name;
    } else if (it->second.width != p.width ||
               it->second.direction != p.direction) {
      os << " differs:" << name;
    }
  }
  for (const auto& [name, p] : gold_map) {
    if (dut_map.find(name) == dut_map.end()) {
      os << " extra-in-golden:" << name;
    }
  }
  return os.str();
}

std::string width_decl(unsigned width) {
  if (width == 1) return "";
  return "[" + std::to_string(width - 1) + ":0] ";
}

std::string vlit(unsigned width, const std::string& hex) {
  return std::to_string(width) + "'h" + hex;
}

struct PortRoles {
  std::vector<Port> clocks;
  std::vector<Port> resets;
  std::vector<Port> controls;
  std::vector<Port> datapaths;
  std::vector<Port> outputs;
};

PortRoles split_roles(const std::vector<Port>& ports) {
  PortRoles r;
  for (const auto& p : ports) {
    switch (p.category) {
      case PortCategory::ClockReset:
        if (is_clock_name(p.name)) {
          r.clocks.push_back(p);
        } else {
          r.resets.push_back(p);
        }
        break;
      case PortCategory::Control:
        r.controls.push_back(p);
        break;
      case PortCategory::Datapath:
        r.datapaths.push_back(p);
        break;
      case PortCategory::Observed:
        r.outputs.push_back(p);
        break;
      case PortCategory::Unclassified:
        throw StgError("port '" + p.name +
                       "' is unclassified; run classify_ports first");
    }
  }
  return r;
}

}  // namespace

TestbenchBundle emit_testbench(const std::vector<Port>& dut_ports,
                               const StimulusPlan& plan,
                               const std::string& top_module,
                               const std::vector<Port>& golden_ports,
                               double clock_period_ns) {
  std::string diff = port_diff_message(dut_ports, golden_ports);
  if (!diff.empty()) {
    throw StgError("golden reference port mismatch:" + diff);
  }
  PortRoles roles = split_roles(dut_ports);
  if (roles.outputs.empty()) {
    throw StgError("module '" + top_module + "' has no output ports");
  }

  const bool has_clock = !roles.clocks.empty();
  const int outer = plan.outer_steps();
  const int inner = plan.inner_steps();
  const int total = outer * inner;

  // value list per control port (indexed by outer step with a per-port
  // phase offset so equal-length lists still produce distinct joint
  // assignments), and per datapath port (indexed by inner step)
  auto control_value = [&](std::size_t ci, int step) -> std::string {
    const auto& c = plan.controls[ci];
    std::size_t n = c.values.size();
    return c.values[(static_cast<std::size_t>(step) + ci) % n];
  };
  auto datapath_value = [&](std::size_t di, int step) -> std::string {
    const auto& d = plan.datapaths[di];
    std::size_t idx = static_cast<std::size_t>(step);
    std::size_t n = d.corner_values.size() + d.random_values.size();
    idx %= n;
    if (idx < d.corner_values.size()) return d.corner_values[idx];
    return d.random_values[idx - d.corner_values.size()];
  };

  std::ostringstream os;
  os << "// " << kGeneratorVersion << " seed=" << plan.seed << "\n";
  os << "`timescale 1ns/1ps\n\n";
  os << "module stg_tb;\n\n";

  for (const auto& p : roles.clocks) {
    os << "  reg " << p.name << ";\n";
  }
  for (const auto& p : roles.resets) {
    os << "  reg " << p.name << ";\n";
  }
  for (const auto& p : roles.controls) {
    os << "  reg " << width_decl(p.width) << p.name << ";\n";
  }
  for (const auto& p : roles.datapaths) {
    os << "  reg " << width_decl(p.width) << p.name << ";\n";
  }
  for (const auto& p : roles.outputs) {
    os << "  wire " << width_decl(p.width) << p.name << "_dut;\n";
    os << "  wire " << width_decl(p.width) << p.name << "_ref;\n";
  }
  os << "\n";
  os << "  integer stg_pass;\n";
  os << "  integer stg_total;\n";
  os << "  integer stg_cycles;\n";
  os << "  reg stg_vec_ok;\n\n";

  auto emit_instance = [&](const std::string& mod, const std::string& inst,
                           const std::string& out_suffix) {
    os << "  " << mod << " " << inst << " (\n";
    bool first = true;
    for (const auto& p : dut_ports) {
      if (!first) os << ",\n";
      first = false;
      os << "    ." << p.name << "(";
      if (p.category == PortCategory::Observed) {
        os << p.name << out_suffix;
      } else {
        os << p.name;
      }
      os << ")";
    }
    os << "\n  );\n\n";
  };
  emit_instance(top_module, "dut", "_dut");
  emit_instance(top_module + "_ref", "gold", "_ref");

  if (has_clock) {
    std::string half = format_double(clock_period_ns / 2.0);
    for (const auto& p : roles.clocks) {
      os << "  initial " << p.name << " = 1'b0;\n";
      os << "  always #" << half << " " << p.name << " = ~" << p.name
         << ";\n";
    }
    os << "\n  always @(posedge " << roles.clocks.front().name
       << ") stg_cycles = stg_cycles + 1;\n\n";
  }

  os << "  task stg_check;\n";
  os << "    begin\n";
  os << "      #1;\n";
  os << "      stg_vec_ok = 1'b1;\n";
  for (const auto& p : roles.outputs) {
    os << "      if (" << p.name << "_dut !== " << p.name << "_ref) begin\n";
    os << "        stg_vec_ok = 1'b0;\n";
    os << "        $display(\"STG_FAIL t=%0t sig=" << p.name
       << " exp=%h got=%h\", $time, " << p.name << "_ref, " << p.name
       << "_dut);\n";
    os << "      end\n";
  }
  os << "      stg_total = stg_total + 1;\n";
  os << "      if (stg_vec_ok) stg_pass = stg_pass + 1;\n";
  os << "    end\n";
  os << "  endtask\n\n";

  os << "  initial begin\n";
  os << "    stg_pass = 0;\n";
  os << "    stg_total = 0;\n";
  os << "    stg_cycles = 0;\n";
  os << "    stg_vec_ok = 1'b0;\n";

  for (const auto& p : roles.resets) {
    os << "    " << p.name << " = 1'b" << (reset_active_low(p.name) ? 0 : 1)
       << ";\n";
  }

  auto emit_vector_values = [&](int vec) {
    int outer_step = vec / inner;
    int inner_step = vec % inner;
    for (std::size_t ci = 0; ci < plan.controls.size(); ++ci) {
      const auto& c = plan.controls[ci];
      os << "    " << c.port << " = "
         << vlit(c.width, control_value(ci, outer_step)) << ";\n";
    }
    for (std::size_t di = 0; di < plan.datapaths.size(); ++di) {
      const auto& d = plan.datapaths[di];
      os << "    " << d.port << " = "
         << vlit(d.width, datapath_value(di, inner_step)) << ";\n";
    }
  };

  // vector 0 inputs are held through reset so the first check doubles as
  // the post-reset comparison
  emit_vector_values(0);

  const std::string clk =
      has_clock ? roles.clocks.front().name : std::string();
  if (!roles.resets.empty()) {
    if (has_clock) {
      os << "    repeat (3) @(posedge " << clk << ");\n";
      os << "    #1;\n";
    } else {
      os << "    #15;\n";
    }
    for (const auto& p : roles.resets) {
      os << "    " << p.name << " = 1'b"
         << (reset_active_low(p.name) ? 1 : 0) << ";\n";
    }
  }

  for (int vec = 0; vec < total; ++vec) {
    os << "    // vector " << vec << " of " << total << "\n";
    if (vec > 0) {
      emit_vector_values(vec);
    }
    if (has_clock) {
      os << "    @(posedge " << clk << ");\n";
    } else {
      os << "    #4;\n";
    }
    os << "    stg_check;\n";
  }

  os << "    $display(\"STG_CYCLES n=%0d\", stg_cycles);\n";
  os << "    $display(\"STG_RESULT pass=%0d total=%0d\", stg_pass, "
        "stg_total);\n";
  os << "    $finish;\n";
  os << "  end\n\n";
  os << "endmodule\n";

  TestbenchBundle bundle;
  bundle.ports = dut_ports;
  bundle.plan = plan;
  bundle.source = os.str();
  bundle.total_vectors = total;
  return bundle;
}

// ---------------------------------------------------------------------------
// Log parsing
// ---------------------------------------------------------------------------

SimLogSummary parse_sim_log(const std::string& stdout_text) {
  SimLogSummary out;
  int result_lines = 0;
  std::istringstream is(stdout_text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    int pass = 0, total = 0;
    long cycles = 0;
    char where[128] = {0}, sig[128] = {0}, exp[256] = {0}, got[256] = {0};
    if (std::sscanf(line.c_str(), "STG_RESULT pass=%d total=%d", &pass,
                    &total) == 2) {
      ++result_lines;
      out.pass = pass;
      out.total = total;
    } else if (std::sscanf(line.c_str(), "STG_CYCLES n=%ld", &cycles) == 1) {
      out.cycles = cycles;
    } else if (std::sscanf(line.c_str(),
                           "STG_FAIL t=%127s sig=%127s exp=%255s got=%255s",
                           where, sig, exp, got) == 4) {
      FailingVector fv;
      fv.where = "t=" + std::string(where) + " sig=" + std::string(sig);
      fv.expected = exp;
      fv.observed = got;
      out.failures.push_back(std::move(fv));
    }
  }
  out.sim_ok = result_lines == 1 && out.total >= 1 && out.pass >= 0 &&
               out.pass <= out.total;
  if (!out.sim_ok) {
    out.pass = 0;
    out.total = 0;
  }
  return out;
}

}  // namespace evolve::stg
