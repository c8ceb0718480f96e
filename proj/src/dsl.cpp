#include "flowrank/dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace flowrank {

bool operator==(const PipelineExpr& a, const PipelineExpr& b) {
  if (a.v_.index() != b.v_.index()) return false;
  if (auto* la = std::get_if<ExprLeaf>(&a.v_)) {
    const auto& lb = std::get<ExprLeaf>(b.v_);
    return la->name == lb.name && la->kwargs == lb.kwargs;
  }
  if (auto* ta = std::get_if<ExprThen>(&a.v_)) return ta->children == std::get<ExprThen>(b.v_).children;
  if (auto* la = std::get_if<ExprLinear>(&a.v_)) {
    const auto& lb = std::get<ExprLinear>(b.v_);
    return la->weights == lb.weights && la->children == lb.children;
  }
  const auto& ra = std::get<ExprRrf>(a.v_);
  const auto& rb = std::get<ExprRrf>(b.v_);
  return ra.k == rb.k && ra.children == rb.children;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok { Ident, Int, Float, String, Then, Plus, Star, LParen, RParen, Comma, Equals, End };

struct Token {
  Tok kind;
  std::string text;
  AttrValue value;
  std::size_t offset, line, column;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::String: return "string";
    default: return "'" + t.text + "'";
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t{Tok::End, "", std::int64_t{0}, pos_, line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (c >= 'a' && c <= 'z') {
        lex_ident(t);
      } else if (c == '_') {
        lex_ident(t);
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.') {
        lex_number(t);
      } else if (c == '"') {
        lex_string(t);
      } else if (src_.substr(pos_, 2) == ">>") {
        t.kind = Tok::Then;
        t.text = ">>";
        advance(2);
      } else {
        static const std::string singles = "+*(),=";
        auto i = singles.find(c);
        if (i == std::string::npos) fail(t, "character '" + std::string(1, c) + "'");
        static const Tok kinds[] = {Tok::Plus, Tok::Star, Tok::LParen, Tok::RParen, Tok::Comma, Tok::Equals};
        t.kind = kinds[i];
        t.text = std::string(1, c);
        advance(1);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  [[noreturn]] void fail(const Token& at, const std::string& found) {
    throw ParseError(at.line, at.column, at.offset, {"a token"}, found);
  }

  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance(1);
  }

  void lex_ident(Token& t) {
    std::size_t start = pos_;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') advance(1);
      else break;
    }
    t.kind = Tok::Ident;
    t.text = std::string(src_.substr(start, pos_ - start));
  }

  void lex_number(Token& t) {
    std::size_t start = pos_;
    bool is_float = false;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        advance(1);
        ++n;
      }
      return n;
    };
    if (src_[pos_] == '-') advance(1);
    std::size_t n = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      is_float = true;
      advance(1);
      n += digits();
    }
    if (n == 0) fail(t, "'" + std::string(src_.substr(start, pos_ - start + 1)) + "'");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      is_float = true;
      advance(1);
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance(1);
      if (digits() == 0) fail(t, "malformed number '" + std::string(src_.substr(start, pos_ - start)) + "'");
    }
    t.text = std::string(src_.substr(start, pos_ - start));
    const char* b = t.text.data();
    const char* e = b + t.text.size();
    if (is_float) {
      double v = 0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e || !std::isfinite(v)) fail(t, "number '" + t.text + "'");
      t.kind = Tok::Float;
      t.value = v;
    } else {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e) fail(t, "number '" + t.text + "'");
      t.kind = Tok::Int;
      t.value = v;
    }
  }

  void lex_string(Token& t) {
    std::size_t start = pos_;
    advance(1);
    std::string value;
    while (true) {
      if (pos_ >= src_.size()) fail(t, "unterminated string");
      char c = src_[pos_];
      if (c == '"') {
        advance(1);
        break;
      }
      if (c == '\\') {
        advance(1);
        if (pos_ >= src_.size()) fail(t, "unterminated string");
        char e = src_[pos_];
        value.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
        advance(1);
        continue;
      }
      value.push_back(c);
      advance(1);
    }
    t.kind = Tok::String;
    t.text = std::string(src_.substr(start, pos_ - start));
    t.value = std::move(value);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  PipelineExpr parse_all() {
    auto e = pipeline();
    expect(Tok::End, {"'>>'", "'+'", "end of input"});
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at(Tok k) const { return peek().kind == k; }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const auto& t = peek();
    throw ParseError(t.line, t.column, t.offset, std::move(expected), describe(t));
  }

  Token expect(Tok k, std::vector<std::string> expected) {
    if (!at(k)) fail(std::move(expected));
    return toks_[pos_++];
  }

  PipelineExpr pipeline() { return seq(); }

  PipelineExpr seq() {
    std::vector<PipelineExpr> parts;
    parts.push_back(sum());
    while (at(Tok::Then)) {
      ++pos_;
      parts.push_back(sum());
    }
    if (parts.size() == 1) return std::move(parts.front());
    return ExprThen{std::move(parts)};
  }

  PipelineExpr sum() {
    std::vector<PipelineExpr> terms;
    std::vector<double> weights;
    bool weighted = false;
    auto one = [&] {
      if (at(Tok::Int) || at(Tok::Float)) {
        const auto& v = toks_[pos_++].value;
        weights.push_back(std::holds_alternative<double>(v) ? std::get<double>(v)
                                                             : static_cast<double>(std::get<std::int64_t>(v)));
        expect(Tok::Star, {"'*'"});
        weighted = true;
      } else {
        weights.push_back(1.0);
      }
      terms.push_back(atom());
    };
    one();
    while (at(Tok::Plus)) {
      ++pos_;
      one();
    }
    if (terms.size() == 1) {
      if (weighted) fail({"'+'"});
      return std::move(terms.front());
    }
    return ExprLinear{std::move(terms), std::move(weights)};
  }

  PipelineExpr atom() {
    if (at(Tok::LParen)) {
      ++pos_;
      auto e = pipeline();
      expect(Tok::RParen, {"')'", "'>>'", "'+'"});
      return e;
    }
    if (!at(Tok::Ident)) fail({"number", "identifier", "'('"});
    const Token name = toks_[pos_++];
    if (name.text == "rrf") return rrf();

    ExprLeaf leaf{name.text, {}, name.line, name.column};
    if (at(Tok::LParen)) {
      ++pos_;
      if (!at(Tok::RParen)) {
        while (true) {
          auto key = expect(Tok::Ident, {"identifier"});
          expect(Tok::Equals, {"'='"});
          if (!(at(Tok::Int) || at(Tok::Float) || at(Tok::String))) fail({"number", "string"});
          leaf.kwargs.emplace_back(key.text, toks_[pos_++].value);
          if (!at(Tok::Comma)) break;
          ++pos_;
        }
      }
      expect(Tok::RParen, {"')'", "','"});
    }
    return leaf;
  }

  PipelineExpr rrf() {
    expect(Tok::LParen, {"'('"});
    ExprRrf node;
    node.children.push_back(pipeline());
    while (at(Tok::Comma)) {
      ++pos_;
      if (at(Tok::Ident) && peek().text == "k" && peek(1).kind == Tok::Equals) {
        pos_ += 2;
        if (!(at(Tok::Int) || at(Tok::Float))) fail({"number"});
        const auto& v = toks_[pos_++].value;
        node.k = std::holds_alternative<double>(v) ? std::get<double>(v)
                                                    : static_cast<double>(std::get<std::int64_t>(v));
        break;
      }
      node.children.push_back(pipeline());
    }
    if (node.children.size() < 2) fail({"','"});
    expect(Tok::RParen, {"')'"});
    return node;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

PipelineExpr parse(std::string_view src) { return Parser(Lexer(src).run()).parse_all(); }

// ---------------------------------------------------------------------------
// Registry and elaboration

void Registry::add(std::string name, TransformerFactory factory) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
  if (it != entries_.end()) throw InvalidArgument("transformer '" + name + "' already registered");
  entries_.emplace_back(std::move(name), std::move(factory));
}

const TransformerFactory* Registry::find(std::string_view name) const {
  for (const auto& [n, f] : entries_)
    if (n == name) return &f;
  return nullptr;
}

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

TransformerPtr Registry::make(const std::string& name,
                              const std::vector<std::pair<std::string, AttrValue>>& kwargs) const {
  const auto* f = find(name);
  if (!f) throw UnknownTransformer("unknown transformer '" + name + "'");
  std::map<std::string, AttrValue> args;
  for (const auto& p : f->params) args[p.name] = p.default_value;
  std::set<std::string> seen;
  std::string given;
  for (const auto& [key, value] : kwargs) {
    auto spec = std::find_if(f->params.begin(), f->params.end(), [&](const ParamSpec& p) { return p.name == key; });
    if (spec == f->params.end()) throw BadArgument(name, key, "unknown parameter");
    if (!seen.insert(key).second) throw BadArgument(name, key, "given twice");
    AttrValue v = value;
    if (std::holds_alternative<double>(spec->default_value) && std::holds_alternative<std::int64_t>(v))
      v = static_cast<double>(std::get<std::int64_t>(v));
    if (v.index() != spec->default_value.index()) {
      static const char* type_names[] = {"an integer", "a number", "a string"};
      throw BadArgument(name, key, std::string("expected ") + type_names[spec->default_value.index()]);
    }
    args[key] = std::move(v);
    given += (given.empty() ? "" : ",") + key;
  }
  try {
    return f->build(args);
  } catch (const InvalidArgument& e) {
    throw BadArgument(name, given.empty() ? "(defaults)" : given, e.message());
  }
}

PipelineNode elaborate(const PipelineExpr& expr, const Registry& registry) {
  struct Visitor {
    const Registry& reg;
    std::vector<PipelineNode> kids(const std::vector<PipelineExpr>& xs) const {
      std::vector<PipelineNode> out;
      for (const auto& x : xs) out.push_back(elaborate(x, reg));
      return out;
    }
    PipelineNode operator()(const ExprLeaf& l) const {
      try {
        return reg.make(l.name, l.kwargs);
      } catch (const UnknownTransformer& e) {
        throw UnknownTransformer(e.message() + " at " + std::to_string(l.line) + ":" +
                                 std::to_string(l.column));
      }
    }
    PipelineNode operator()(const ExprThen& t) const { return then(kids(t.children)); }
    PipelineNode operator()(const ExprLinear& l) const { return linear(kids(l.children), l.weights); }
    PipelineNode operator()(const ExprRrf& r) const { return rr_fusion(kids(r.children), r.k); }
  };
  return std::visit(Visitor{registry}, expr.variant());
}

// ---------------------------------------------------------------------------
// Rendering

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string render_value(const AttrValue& v) {
  if (auto* d = std::get_if<double>(&v)) return format_number(*d);
  if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  std::string out = "\"";
  for (char c : std::get<std::string>(v)) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string render(const PipelineNode& node) {
  struct Visitor {
    static std::string grouped(const PipelineNode& n) {
      const bool compound = std::holds_alternative<ThenNode>(n.variant()) ||
                            std::holds_alternative<LinearNode>(n.variant());
      return compound ? "(" + render(n) + ")" : render(n);
    }
    std::string operator()(const LeafNode& l) const {
      std::string args;
      for (const auto& a : l.transformer->attributes()) {
        if (!a.is_parameter() || a.value == *a.default_value) continue;
        args += (args.empty() ? "" : ", ") + a.name + "=" + render_value(a.value);
      }
      return args.empty() ? l.transformer->name() : l.transformer->name() + "(" + args + ")";
    }
    std::string operator()(const ThenNode& t) const {
      std::string out;
      for (std::size_t i = 0; i < t.children.size(); ++i) {
        if (i) out += " >> ";
        out += std::holds_alternative<ThenNode>(t.children[i].variant()) ? grouped(t.children[i])
                                                                         : render(t.children[i]);
      }
      return out;
    }
    std::string operator()(const LinearNode& l) const {
      std::string out;
      for (std::size_t i = 0; i < l.children.size(); ++i) {
        if (i) out += " + ";
        out += format_number(l.weights[i]) + "*" + grouped(l.children[i]);
      }
      return out;
    }
    std::string operator()(const RrfNode& r) const {
      std::string out = "rrf(";
      for (const auto& c : r.children) out += render(c) + ", ";
      return out + "k=" + format_number(r.k) + ")";
    }
  };
  return std::visit(Visitor{}, node.variant());
}

}  // namespace flowrank
