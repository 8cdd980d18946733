#include "lnk/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lnk {

namespace {

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

}  // namespace

std::vector<Violation> validate(const ProtocolData& d) {
  std::vector<Violation> out;
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(d.nodes.size()); ++i) {
    const auto& [name, kind] = d.nodes[i];
    (void)kind;
    if (!valid_name(name)) out.push_back({"invalid name", name});
    if (index.count(name)) {
      out.push_back({"duplicate name", name});
    } else {
      index[name] = i;
    }
  }
  if (!valid_name(d.name)) out.push_back({"invalid name", "protocol '" + d.name + "'"});

  bool any_var = false;
  for (const auto& [name, kind] : d.nodes) {
    if (kind == NodeKind::kVariable) any_var = true;
  }
  if (!any_var) out.push_back({"empty Vars", "protocol has no variable nodes"});

  int n = static_cast<int>(d.nodes.size());
  std::vector<std::vector<int>> succs(n);
  for (const auto& [u, v] : d.edges) {
    auto iu = index.find(u);
    auto iv = index.find(v);
    if (iu == index.end()) {
      out.push_back({"dangling edge", u + " -> " + v + " (" + u + " undeclared)"});
      continue;
    }
    if (iv == index.end()) {
      out.push_back({"dangling edge", u + " -> " + v + " (" + v + " undeclared)"});
      continue;
    }
    if (d.nodes[iv->second].second == NodeKind::kVariable) {
      out.push_back({"variable with in-edge", u + " -> " + v});
    }
    succs[iu->second].push_back(iv->second);
  }

  // Cycle check: Kahn over the resolvable edges.
  std::vector<int> indeg(n, 0);
  for (int u = 0; u < n; ++u) {
    for (int v : succs[u]) indeg[v]++;
  }
  std::queue<int> q;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] == 0) q.push(i);
  }
  int seen = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    ++seen;
    for (int v : succs[u]) {
      if (--indeg[v] == 0) q.push(v);
    }
  }
  if (seen != n) {
    std::string cyc;
    for (int i = 0; i < n; ++i) {
      if (indeg[i] > 0) cyc += (cyc.empty() ? "" : ", ") + d.nodes[i].first;
    }
    out.push_back({"cycle", "nodes on a cycle: " + cyc});
  }
  return out;
}

Protocol Protocol::seal(ProtocolData d) {
  auto violations = validate(d);
  if (!violations.empty()) {
    std::string msg = "invalid protocol '" + d.name + "':";
    for (const auto& v : violations) msg += "\n  " + v.invariant + ": " + v.detail;
    throw ValidationError(msg);
  }
  Protocol p;
  p.proto_name_ = std::move(d.name);
  int n = static_cast<int>(d.nodes.size());
  p.names_.reserve(n);
  p.kinds_.reserve(n);
  for (int i = 0; i < n; ++i) {
    p.names_.push_back(d.nodes[i].first);
    p.kinds_.push_back(d.nodes[i].second);
    p.index_[d.nodes[i].first] = i;
    if (d.nodes[i].second == NodeKind::kVariable) {
      p.variables_.push_back(i);
    } else {
      p.services_.push_back(i);
    }
  }
  p.preds_.resize(n);
  p.succs_.resize(n);
  std::set<std::pair<int, int>> seen;  // edges form an ordered set: dedupe, first wins
  for (const auto& [us, vs] : d.edges) {
    int u = p.index_.at(us);
    int v = p.index_.at(vs);
    if (!seen.insert({u, v}).second) continue;
    p.edges_.push_back({u, v});
    p.preds_[v].push_back(u);
    p.succs_[u].push_back(v);
  }
  // Deterministic topological order: among ready nodes, smallest id first.
  std::vector<int> indeg(n);
  for (int v = 0; v < n; ++v) indeg[v] = static_cast<int>(p.preds_[v].size());
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    int u = ready.top();
    ready.pop();
    p.topo_.push_back(u);
    for (int v : p.succs_[u]) {
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  return p;
}

std::optional<int> Protocol::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Protocol::require(std::string_view name) const {
  auto id = find(name);
  if (!id) throw OpError("no node named '" + std::string(name) + "'");
  return *id;
}

int Protocol::pred_position(int v, int u) const {
  const auto& ps = preds_[v];
  for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
    if (ps[i] == u) return i;
  }
  return -1;
}

bool Protocol::has_edge(int u, int v) const {
  for (int s : succs_[u]) {
    if (s == v) return true;
  }
  return false;
}

ProtocolData Protocol::data() const {
  ProtocolData d;
  d.name = proto_name_;
  for (int i = 0; i < node_count(); ++i) d.nodes.push_back({names_[i], kinds_[i]});
  for (const auto& [u, v] : edges_) d.edges.push_back({names_[u], names_[v]});
  return d;
}

// --- structural queries ---------------------------------------------------

std::vector<int> vars_of(const Protocol& p, int n) {
  std::vector<char> seen(p.node_count(), 0);
  std::vector<int> stack{n};
  seen[n] = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int w : p.preds(u)) {
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
    }
  }
  std::vector<int> out;
  for (int v : p.variables()) {
    if (seen[v]) out.push_back(v);
  }
  return out;
}

bool reaches(const Protocol& p, int u, int v) {
  if (u == v) return true;
  std::vector<char> seen(p.node_count(), 0);
  std::vector<int> stack{u};
  seen[u] = 1;
  while (!stack.empty()) {
    int a = stack.back();
    stack.pop_back();
    for (int b : p.succs(a)) {
      if (b == v) return true;
      if (!seen[b]) {
        seen[b] = 1;
        stack.push_back(b);
      }
    }
  }
  return false;
}

std::vector<int> output_nodes(const Protocol& p) {
  std::vector<int> out;
  for (int i = 0; i < p.node_count(); ++i) {
    if (p.succs(i).empty()) out.push_back(i);
  }
  return out;
}

std::optional<int> root(const Protocol& p) {
  auto outs = output_nodes(p);
  if (outs.size() == 1) return outs[0];
  return std::nullopt;
}

int depth(const Protocol& p) {
  std::vector<int> d(p.node_count(), 0);
  int best = 0;
  for (auto it = p.topo_order().rbegin(); it != p.topo_order().rend(); ++it) {
    int u = *it;
    for (int v : p.succs(u)) d[u] = std::max(d[u], d[v] + 1);
    best = std::max(best, d[u]);
  }
  return best;
}

std::optional<FlatForm> as_flat(const Protocol& p) {
  auto r = root(p);
  if (!r) return std::nullopt;
  if (depth(p) != 2) return std::nullopt;
  for (int u : p.preds(*r)) {
    if (p.is_variable(u)) return std::nullopt;  // no variable feeds the root
  }
  FlatForm f;
  f.root = *r;
  for (int s : p.services()) {
    if (s == *r) continue;
    for (int u : p.preds(s)) {
      if (!p.is_variable(u)) return std::nullopt;  // not expressible as f(vars...)
    }
    f.services.push_back(s);
    f.args.push_back(p.preds(s));
  }
  for (int x : p.variables()) {
    if (p.succs(x).empty()) return std::nullopt;  // stray variable outside the form
  }
  return f;
}

std::optional<LayeredForm> as_layered(const Protocol& p) {
  int n = p.node_count();
  if (n == 0) return std::nullopt;
  // Offsets within undirected components: an edge u -> v forces
  // off(u) = off(v) + 1. Inconsistency means no layering exists.
  std::vector<int> comp(n, -1), off(n, 0);
  int ncomp = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] != -1) continue;
    comp[s] = ncomp;
    off[s] = 0;
    std::vector<int> stack{s};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      auto visit = [&](int w, int want) {
        if (comp[w] == -1) {
          comp[w] = ncomp;
          off[w] = want;
          stack.push_back(w);
          return true;
        }
        return off[w] == want;
      };
      for (int w : p.succs(u)) {
        if (!visit(w, off[u] - 1)) return std::nullopt;
      }
      for (int w : p.preds(u)) {
        if (!visit(w, off[u] + 1)) return std::nullopt;
      }
    }
    ++ncomp;
  }
  // Per component: relative depth 0 = topmost. Variables must sit at their
  // component's maximum depth, and all components' variables align at Ln.
  std::vector<int> cmin(ncomp, INT32_MAX), cmax(ncomp, INT32_MIN);
  for (int i = 0; i < n; ++i) {
    cmin[comp[i]] = std::min(cmin[comp[i]], off[i]);
    cmax[comp[i]] = std::max(cmax[comp[i]], off[i]);
  }
  auto rel = [&](int i) { return off[i] - cmin[comp[i]]; };  // 0 at top
  std::vector<int> cdepth(ncomp);
  std::vector<char> has_var(ncomp, 0);
  for (int c = 0; c < ncomp; ++c) cdepth[c] = cmax[c] - cmin[c];
  for (int x : p.variables()) {
    has_var[comp[x]] = 1;
    if (rel(x) != cdepth[comp[x]]) return std::nullopt;
  }
  int nlayers = 0;
  for (int c = 0; c < ncomp; ++c) nlayers = std::max(nlayers, cdepth[c]);
  LayeredForm lf;
  lf.layers.assign(nlayers + 1, {});
  for (int i = 0; i < n; ++i) {
    int c = comp[i];
    int shift = has_var[c] ? nlayers - cdepth[c] : 0;
    lf.layers[shift + rel(i)].push_back(i);
  }
  return lf;
}

Protocol layerize(const Protocol& p) {
  // Longest path to a sink per node; variables sink to the deepest level
  // already present, so nothing grows past the longest existing path.
  int n = p.node_count();
  std::vector<int> lvl(n, 0);
  for (auto it = p.topo_order().rbegin(); it != p.topo_order().rend(); ++it) {
    int u = *it;
    for (int v : p.succs(u)) lvl[u] = std::max(lvl[u], lvl[v] + 1);
  }
  int deepest = 0;
  for (int i = 0; i < n; ++i) deepest = std::max(deepest, lvl[i]);
  for (int x : p.variables()) lvl[x] = deepest;

  ProtocolData d;
  d.name = p.protocol_name();
  std::set<std::string> used;
  for (int i = 0; i < n; ++i) {
    d.nodes.push_back({p.name(i), p.kind(i)});
    used.insert(p.name(i));
  }
  auto fresh = [&](const std::string& base) {
    for (int k = 1;; ++k) {
      std::string cand = base + std::to_string(k);
      if (!used.count(cand)) {
        used.insert(cand);
        return cand;
      }
    }
  };
  for (const auto& [u, v] : p.edges()) {
    int gap = lvl[u] - lvl[v];
    std::string from = p.name(u);
    // A gap of g needs g-1 pass-through nodes.
    for (int k = 1; k < gap; ++k) {
      std::string w = fresh(p.name(u) + "__l");
      d.nodes.push_back({w, NodeKind::kService});
      d.edges.push_back({from, w});
      from = w;
    }
    d.edges.push_back({from, p.name(v)});
  }
  return Protocol::seal(std::move(d));
}

Protocol restrict_protocol(const Protocol& p, const std::vector<std::string>& keep) {
  if (keep.empty()) throw OpError("restrict: keep set is empty");
  std::set<int> keep_ids;
  for (const auto& name : keep) {
    int id = p.require(name);
    if (!p.is_variable(id)) throw OpError("restrict: '" + name + "' is not a variable");
    keep_ids.insert(id);
  }
  ProtocolData d;
  d.name = p.protocol_name();
  for (int i = 0; i < p.node_count(); ++i) {
    if (p.is_variable(i) && !keep_ids.count(i)) continue;
    d.nodes.push_back({p.name(i), p.kind(i)});
  }
  for (const auto& [u, v] : p.edges()) {
    if (p.is_variable(u) && !keep_ids.count(u)) continue;
    d.edges.push_back({p.name(u), p.name(v)});
  }
  return Protocol::seal(std::move(d));
}

// --- DSL ------------------------------------------------------------------

namespace {

struct Token {
  enum Kind { kIdent, kLBrace, kRBrace, kLParen, kRParen, kComma, kSemi, kEnd };
  Kind kind;
  std::string text;
  int line, col;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      advance();
    }
    int line = line_, col = col_;
    if (pos_ >= src_.size()) return {Token::kEnd, "", line, col};
    char c = src_[pos_];
    switch (c) {
      case '{': advance(); return {Token::kLBrace, "{", line, col};
      case '}': advance(); return {Token::kRBrace, "}", line, col};
      case '(': advance(); return {Token::kLParen, "(", line, col};
      case ')': advance(); return {Token::kRParen, ")", line, col};
      case ',': advance(); return {Token::kComma, ",", line, col};
      case ';': advance(); return {Token::kSemi, ";", line, col};
      default: break;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string text;
      while (pos_ < src_.size()) {
        char d = src_[pos_];
        if (!std::isalnum(static_cast<unsigned char>(d)) && d != '_') break;
        text += d;
        advance();
      }
      return {Token::kIdent, text, line, col};
    }
    throw ParseError(line, col, std::string("unexpected character '") + c + "'");
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { cur_ = lex_.next(); }

  ProtocolData parse() {
    expect_keyword("protocol");
    ProtocolData d;
    d.name = expect_ident("protocol name");
    expect(Token::kLBrace, "'{'");
    // Grammar: one or more var statements, then node statements.
    if (!(cur_.kind == Token::kIdent && cur_.text == "var")) {
      throw ParseError(cur_.line, cur_.col, "expected 'var' declaration");
    }
    while (cur_.kind == Token::kIdent && cur_.text == "var") {
      advance();
      do {
        d.nodes.push_back({expect_ident("variable name"), NodeKind::kVariable});
      } while (accept(Token::kComma));
      expect(Token::kSemi, "';'");
    }
    while (cur_.kind == Token::kIdent && cur_.text == "node") {
      advance();
      std::string name = expect_ident("node name");
      d.nodes.push_back({name, NodeKind::kService});
      expect(Token::kLParen, "'('");
      if (cur_.kind != Token::kRParen) {
        do {
          d.edges.push_back({expect_ident("argument name"), name});
        } while (accept(Token::kComma));
      }
      expect(Token::kRParen, "')'");
      expect(Token::kSemi, "';'");
    }
    expect(Token::kRBrace, "'}'");
    expect(Token::kEnd, "end of input");
    return d;
  }

 private:
  void advance() { cur_ = lex_.next(); }
  bool accept(Token::Kind k) {
    if (cur_.kind != k) return false;
    advance();
    return true;
  }
  void expect(Token::Kind k, const char* what) {
    if (cur_.kind != k) {
      throw ParseError(cur_.line, cur_.col,
                       std::string("expected ") + what + ", got '" + cur_.text + "'");
    }
    advance();
  }
  std::string expect_ident(const char* what) {
    if (cur_.kind != Token::kIdent) {
      throw ParseError(cur_.line, cur_.col,
                       std::string("expected ") + what + ", got '" + cur_.text + "'");
    }
    std::string t = cur_.text;
    advance();
    return t;
  }
  void expect_keyword(const char* kw) {
    if (cur_.kind != Token::kIdent || cur_.text != kw) {
      throw ParseError(cur_.line, cur_.col,
                       std::string("expected '") + kw + "', got '" + cur_.text + "'");
    }
    advance();
  }
  Lexer lex_;
  Token cur_;
};

}  // namespace

ProtocolData parse_protocol_data(std::string_view text) { return Parser(text).parse(); }

Protocol parse_protocol(std::string_view text) {
  return Protocol::seal(parse_protocol_data(text));
}

std::string serialize_protocol(const Protocol& p) {
  std::ostringstream out;
  out << "protocol " << p.protocol_name() << " {\n";
  out << "  var ";
  bool first = true;
  for (int x : p.variables()) {
    if (!first) out << ", ";
    out << p.name(x);
    first = false;
  }
  out << ";\n";
  for (int i = 0; i < p.node_count(); ++i) {
    if (p.is_variable(i)) continue;
    out << "  node " << p.name(i) << "(";
    for (size_t k = 0; k < p.preds(i).size(); ++k) {
      if (k) out << ", ";
      out << p.name(p.preds(i)[k]);
    }
    out << ");\n";
  }
  out << "}\n";
  return out.str();
}

std::string export_dot(const Protocol& p) {
  std::ostringstream out;
  out << "digraph " << p.protocol_name() << " {\n";
  for (int i = 0; i < p.node_count(); ++i) {
    out << "  \"" << p.name(i) << "\" [shape="
        << (p.is_variable(i) ? "box" : "ellipse") << "];\n";
  }
  for (const auto& [u, v] : p.edges()) {
    out << "  \"" << p.name(u) << "\" -> \"" << p.name(v) << "\";\n";
  }
  out << "}\n";
  return out.str();
}

std::string protocol_to_json(const Protocol& p) {
  nlohmann::ordered_json j;
  j["name"] = p.protocol_name();
  j["vars"] = nlohmann::ordered_json::array();
  for (int x : p.variables()) j["vars"].push_back(p.name(x));
  j["nodes"] = nlohmann::ordered_json::array();
  for (int s = 0; s < p.node_count(); ++s) {
    if (p.is_variable(s)) continue;
    nlohmann::ordered_json n;
    n["name"] = p.name(s);
    n["args"] = nlohmann::ordered_json::array();
    for (int u : p.preds(s)) n["args"].push_back(p.name(u));
    j["nodes"].push_back(std::move(n));
  }
  return j.dump(2);
}

Protocol protocol_from_json(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, 1, e.what());
  }
  ProtocolData d;
  try {
    d.name = j.at("name").get<std::string>();
    for (const auto& v : j.at("vars")) {
      d.nodes.push_back({v.get<std::string>(), NodeKind::kVariable});
    }
    for (const auto& n : j.at("nodes")) {
      std::string name = n.at("name").get<std::string>();
      d.nodes.push_back({name, NodeKind::kService});
      for (const auto& a : n.at("args")) {
        d.edges.push_back({a.get<std::string>(), name});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, 1, std::string("bad protocol json: ") + e.what());
  }
  return Protocol::seal(std::move(d));
}

// --- isomorphism ----------------------------------------------------------

namespace {

// Iterative color refinement, then backtracking within color classes.
std::vector<int> refine_colors(const Protocol& a, const Protocol& b) {
  int na = a.node_count(), nb = b.node_count();
  std::vector<int> color(na + nb);
  auto kind_of = [&](int i) {
    return i < na ? a.kind(i) : b.kind(i - na);
  };
  for (int i = 0; i < na + nb; ++i) color[i] = kind_of(i) == NodeKind::kVariable ? 0 : 1;
  auto neighbors = [&](int i, bool out) -> const std::vector<int>& {
    if (i < na) return out ? a.succs(i) : a.preds(i);
    return out ? b.succs(i - na) : b.preds(i - na);
  };
  for (int round = 0; round < na + nb; ++round) {
    std::map<std::tuple<int, std::vector<int>, std::vector<int>>, int> sig_ids;
    std::vector<int> next(na + nb);
    for (int i = 0; i < na + nb; ++i) {
      std::vector<int> ins, outs;
      int base = i < na ? 0 : na;
      for (int w : neighbors(i, false)) ins.push_back(color[base + w]);
      for (int w : neighbors(i, true)) outs.push_back(color[base + w]);
      std::sort(ins.begin(), ins.end());
      std::sort(outs.begin(), outs.end());
      auto key = std::make_tuple(color[i], std::move(ins), std::move(outs));
      auto [it, fresh] = sig_ids.try_emplace(std::move(key), static_cast<int>(sig_ids.size()));
      (void)fresh;
      next[i] = it->second;
    }
    if (next == color) break;
    color = std::move(next);
  }
  return color;
}

bool extend_iso(const Protocol& a, const Protocol& b, const std::vector<int>& color,
                std::vector<int>& map_ab, std::vector<char>& used_b, int i) {
  int na = a.node_count();
  if (i == na) return true;
  for (int j = 0; j < b.node_count(); ++j) {
    if (used_b[j] || color[na + j] != color[i]) continue;
    bool ok = true;
    for (int w : a.preds(i)) {
      if (map_ab[w] != -1 && !b.has_edge(map_ab[w], j)) { ok = false; break; }
    }
    if (ok) {
      for (int w : a.succs(i)) {
        if (map_ab[w] != -1 && !b.has_edge(j, map_ab[w])) { ok = false; break; }
      }
    }
    // Reverse direction: mapped neighbors of j must correspond.
    if (ok) {
      for (int w : b.preds(j)) {
        int pre = -1;
        for (int t = 0; t < i; ++t) {
          if (map_ab[t] == w) { pre = t; break; }
        }
        if (pre != -1 && !a.has_edge(pre, i)) { ok = false; break; }
      }
    }
    if (ok) {
      for (int w : b.succs(j)) {
        int pre = -1;
        for (int t = 0; t < i; ++t) {
          if (map_ab[t] == w) { pre = t; break; }
        }
        if (pre != -1 && !a.has_edge(i, pre)) { ok = false; break; }
      }
    }
    if (!ok) continue;
    map_ab[i] = j;
    used_b[j] = 1;
    if (extend_iso(a, b, color, map_ab, used_b, i + 1)) return true;
    map_ab[i] = -1;
    used_b[j] = 0;
  }
  return false;
}

}  // namespace

bool isomorphic(const Protocol& a, const Protocol& b) {
  if (a.node_count() != b.node_count()) return false;
  if (a.edges().size() != b.edges().size()) return false;
  if (a.variables().size() != b.variables().size()) return false;
  auto color = refine_colors(a, b);
  int na = a.node_count();
  std::map<int, int> count_a, count_b;
  for (int i = 0; i < na; ++i) count_a[color[i]]++;
  for (int j = 0; j < b.node_count(); ++j) count_b[color[na + j]]++;
  if (count_a != count_b) return false;
  std::vector<int> map_ab(na, -1);
  std::vector<char> used_b(b.node_count(), 0);
  return extend_iso(a, b, color, map_ab, used_b, 0);
}

std::string fresh_name(const Protocol& p, std::string_view base) {
  for (int k = 1;; ++k) {
    std::string cand = std::string(base) + std::to_string(k);
    if (!p.find(cand)) return cand;
  }
}

}  // namespace lnk
