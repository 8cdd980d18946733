#include "lnk/analysis.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "json.hpp"

namespace lnk {

const char* secure_reason_name(SecureReason r) {
  switch (r) {
    case SecureReason::kDisjointPartition:
      return "disjoint-partition";
    case SecureReason::kPrivateVariablesNoTracking:
      return "private-variables-no-tracking";
    case SecureReason::kLayeredDisjoint:
      return "layered-disjoint";
    case SecureReason::kLayeredPrivate:
      return "layered-private";
    case SecureReason::kEmbeddedSecure:
      return "embedded-secure";
  }
  return "?";
}

bool operator==(const TrackingStrategy& a, const TrackingStrategy& b) {
  return a.tInit == b.tInit && a.tracked == b.tracked &&
         a.forwardPaths == b.forwardPaths;
}

bool operator==(const Verdict& a, const Verdict& b) {
  if (a.tag != b.tag || a.reason != b.reason) return false;
  if (a.witness.has_value() != b.witness.has_value()) return false;
  if (a.witness && !(*a.witness == *b.witness)) return false;
  return a.groupA == b.groupA && a.groupB == b.groupB && a.layer == b.layer &&
         a.privates == b.privates && a.embeddedSub == b.embeddedSub &&
         a.embedding.phi == b.embedding.phi && a.embedding.chi == b.embedding.chi &&
         a.notes == b.notes;
}

bool operator!=(const Verdict& a, const Verdict& b) { return !(a == b); }

namespace {

struct Dsu {
  std::vector<int> up;
  explicit Dsu(int n) : up(n) { std::iota(up.begin(), up.end(), 0); }
  int find(int x) { return up[x] == x ? x : up[x] = find(up[x]); }
  void join(int a, int b) { up[find(a)] = find(b); }
};

struct Grouped {
  std::vector<int> comp;        // member index -> component index
  std::vector<int> members;     // per component, member count
  std::vector<int> varCount;    // per component, |vars| (components are var-disjoint)
  int count = 0;
};

// Components of the variable-sharing graph over members, each member carrying
// a variable id set. Component indices follow first appearance.
Grouped group_by_shared_vars(const std::vector<std::vector<int>>& varSets) {
  int n = static_cast<int>(varSets.size());
  Dsu dsu(n);
  std::map<int, int> owner;  // var id -> first member seen
  for (int i = 0; i < n; ++i)
    for (int v : varSets[i]) {
      auto [it, fresh] = owner.emplace(v, i);
      if (!fresh) dsu.join(i, it->second);
    }
  Grouped g;
  g.comp.assign(n, -1);
  std::map<int, int> index;
  for (int i = 0; i < n; ++i) {
    int r = dsu.find(i);
    auto [it, fresh] = index.emplace(r, g.count);
    if (fresh) {
      g.members.push_back(0);
      g.varCount.push_back(0);
      ++g.count;
    }
    g.comp[i] = it->second;
    g.members[it->second] += 1;
    g.varCount[it->second] += static_cast<int>(varSets[i].size());
  }
  // varSets of one member never repeat a variable, but two members of one
  // component can share; recount through a set.
  std::vector<std::set<int>> vs(g.count);
  for (int i = 0; i < n; ++i)
    vs[g.comp[i]].insert(varSets[i].begin(), varSets[i].end());
  for (int c = 0; c < g.count; ++c)
    g.varCount[c] = static_cast<int>(vs[c].size());
  return g;
}

// First component mask where both sides have services and strictly more
// variables than services.
std::optional<uint32_t> split_mask(const Grouped& g) {
  if (g.count < 2) return std::nullopt;
  int total = static_cast<int>(g.comp.size());
  int totalVars = std::accumulate(g.varCount.begin(), g.varCount.end(), 0);
  for (uint32_t mask = 1; mask + 1 < (1u << g.count); ++mask) {
    int svc = 0, vars = 0;
    for (int c = 0; c < g.count; ++c)
      if (mask & (1u << c)) {
        svc += g.members[c];
        vars += g.varCount[c];
      }
    if (svc >= 1 && vars > svc && (total - svc) >= 1 && (totalVars - vars) > (total - svc))
      return mask;
  }
  return std::nullopt;
}

constexpr int kGroupingCap = 20;

}  // namespace

std::optional<FlatSplit> disjoint_partition(const Protocol& p, const FlatForm& f,
                                            std::string* why) {
  auto fail = [&](const std::string& w) -> std::optional<FlatSplit> {
    if (why) *why = w;
    return std::nullopt;
  };
  if (f.services.size() < 2) return fail("fewer than two services");
  Grouped g = group_by_shared_vars(f.args);
  if (g.count == 1) return fail("variable-sharing graph is a single component");
  if (g.count > kGroupingCap)
    return fail("component grouping capped at " + std::to_string(kGroupingCap) +
                " components, got " + std::to_string(g.count));
  auto mask = split_mask(g);
  if (!mask) return fail("no component grouping satisfies the cardinality bounds");
  FlatSplit out;
  for (size_t i = 0; i < f.services.size(); ++i) {
    auto& side = (*mask & (1u << g.comp[i])) ? out.groupA : out.groupB;
    side.push_back(p.name(f.services[i]));
  }
  return out;
}

std::optional<std::map<std::string, std::vector<std::string>>> private_variables(
    const Protocol& p, const FlatForm& f, std::string* why) {
  std::map<int, int> seenBy;
  for (const auto& args : f.args)
    for (int v : args) seenBy[v] += 1;
  std::map<std::string, std::vector<std::string>> out;
  for (size_t i = 0; i < f.services.size(); ++i) {
    std::vector<std::string> mine;
    for (int v : f.args[i])
      if (seenBy[v] == 1) mine.push_back(p.name(v));
    if (mine.empty()) {
      if (why) *why = "service " + p.name(f.services[i]) + " has no private variable";
      return std::nullopt;
    }
    out[p.name(f.services[i])] = std::move(mine);
  }
  return out;
}

std::optional<LayerSplit> layered_disjoint(const Protocol& p, const LayeredForm& lf,
                                           std::string* why) {
  std::string capNote;
  for (size_t i = 0; i + 1 < lf.layers.size(); ++i) {
    const auto& layer = lf.layers[i];
    if (layer.size() < 2) continue;
    std::vector<std::vector<int>> varSets;
    varSets.reserve(layer.size());
    for (int m : layer) varSets.push_back(vars_of(p, m));
    Grouped g = group_by_shared_vars(varSets);
    if (g.count > kGroupingCap) {
      capNote += " (layer " + std::to_string(i) + " grouping capped)";
      continue;
    }
    auto mask = split_mask(g);
    if (!mask) continue;
    LayerSplit out;
    out.layer = static_cast<int>(i);
    for (size_t m = 0; m < layer.size(); ++m) {
      auto& side = (*mask & (1u << g.comp[m])) ? out.groupA : out.groupB;
      side.push_back(p.name(layer[m]));
    }
    return out;
  }
  if (why) *why = "no layer splits into variable-disjoint groups" + capNote;
  return std::nullopt;
}

std::optional<int> layered_private(const Protocol& p, const LayeredForm& lf,
                                   std::string* why) {
  for (size_t i = 0; i + 1 < lf.layers.size(); ++i) {
    const auto& layer = lf.layers[i];
    std::vector<std::set<int>> varSets;
    varSets.reserve(layer.size());
    for (int m : layer) {
      auto vs = vars_of(p, m);
      varSets.emplace_back(vs.begin(), vs.end());
    }
    bool privatesTotal = true;
    for (size_t a = 0; a < layer.size() && privatesTotal; ++a) {
      std::set<int> mine = varSets[a];
      for (size_t b = 0; b < layer.size(); ++b)
        if (b != a)
          for (int v : varSets[b]) mine.erase(v);
      privatesTotal = !mine.empty();
    }
    if (!privatesTotal) continue;
    // Flatten the layer: its members as inner services over their ancestral
    // variables, under a fresh root. The layer qualifies when that flat
    // protocol admits no tracking cover.
    ProtocolData d;
    d.name = p.protocol_name() + "__layer" + std::to_string(i);
    std::set<int> allVars;
    for (const auto& vs : varSets) allVars.insert(vs.begin(), vs.end());
    for (int v : allVars) d.nodes.emplace_back(p.name(v), NodeKind::kVariable);
    for (int m : layer) d.nodes.emplace_back(p.name(m), NodeKind::kService);
    std::string rootName = "__root";
    while (p.find(rootName)) rootName += "_";
    d.nodes.emplace_back(rootName, NodeKind::kService);
    for (size_t m = 0; m < layer.size(); ++m) {
      for (int v : varSets[m]) d.edges.emplace_back(p.name(v), p.name(layer[m]));
      d.edges.emplace_back(p.name(layer[m]), rootName);
    }
    Protocol flatp = Protocol::seal(std::move(d));
    if (!flat_tracking(flatp)) return static_cast<int>(i);
  }
  if (why) *why = "no layer passes the private-variable conditions";
  return std::nullopt;
}

SecureRegistry SecureRegistry::with_seeds() {
  SecureRegistry reg;
  reg.add("disjoint-pair", parse_protocol(
      "protocol disjoint_pair {\n"
      "  var x, y, u, v;\n"
      "  node f1(x, y);\n"
      "  node f2(u, v);\n"
      "  node g(f1, f2);\n"
      "}\n"));
  reg.add("private-triangle", parse_protocol(
      "protocol private_triangle {\n"
      "  var a1, a2, b1, b2, c1, c2;\n"
      "  node f1(a1, a2, b1);\n"
      "  node f2(b1, b2, c1);\n"
      "  node f3(c1, c2, a1);\n"
      "  node g(f1, f2, f3);\n"
      "}\n"));
  return reg;
}

void SecureRegistry::add(std::string name, Protocol p) {
  entries_.push_back(RegistryEntry{std::move(name), std::move(p)});
}

namespace {

const SecureRegistry& seed_registry() {
  static const SecureRegistry reg = SecureRegistry::with_seeds();
  return reg;
}

}  // namespace

Verdict analyze(const Protocol& p) { return analyze(p, seed_registry()); }

Verdict analyze(const Protocol& p, const SecureRegistry& reg) {
  Verdict v;
  if (auto ts = find_tracking_strategy(p)) {
    v.tag = Verdict::Tag::kInsecure;
    v.witness = std::move(*ts);
    return v;
  }
  v.notes.push_back("tracking: no strategy found");

  std::string why;
  if (auto flat = as_flat(p)) {
    if (auto split = disjoint_partition(p, *flat, &why)) {
      v.tag = Verdict::Tag::kSecure;
      v.reason = SecureReason::kDisjointPartition;
      v.groupA = std::move(split->groupA);
      v.groupB = std::move(split->groupB);
      return v;
    }
    v.notes.push_back("disjoint-partition: " + why);
    if (auto priv = private_variables(p, *flat, &why)) {
      v.tag = Verdict::Tag::kSecure;
      v.reason = SecureReason::kPrivateVariablesNoTracking;
      v.privates = std::move(*priv);
      return v;
    }
    v.notes.push_back("private-variables: " + why);
  } else {
    v.notes.push_back("disjoint-partition: no flat form");
    v.notes.push_back("private-variables: no flat form");
  }

  Protocol layered = layerize(p);
  if (auto lf = as_layered(layered)) {
    if (auto split = layered_disjoint(layered, *lf, &why)) {
      v.tag = Verdict::Tag::kSecure;
      v.reason = SecureReason::kLayeredDisjoint;
      v.layer = split->layer;
      v.groupA = std::move(split->groupA);
      v.groupB = std::move(split->groupB);
      return v;
    }
    v.notes.push_back("layered-disjoint: " + why);
    if (auto layer = layered_private(layered, *lf, &why)) {
      v.tag = Verdict::Tag::kSecure;
      v.reason = SecureReason::kLayeredPrivate;
      v.layer = *layer;
      return v;
    }
    v.notes.push_back("layered-private: " + why);
  }

  for (const auto& entry : reg.entries()) {
    Embedding e;
    bool present = true;
    for (int n = 0; n < entry.proto.node_count() && present; ++n) {
      const std::string& name = entry.proto.name(n);
      if (!p.find(name)) {
        v.notes.push_back("embedding " + entry.name + ": host lacks node " + name);
        present = false;
        break;
      }
      e.phi[name] = name;
      if (entry.proto.is_variable(n)) e.chi[name] = name;
    }
    if (!present) continue;
    EmbeddingCheck chk = check_embedding(entry.proto, p, e);
    if (chk.ok) {
      v.tag = Verdict::Tag::kSecure;
      v.reason = SecureReason::kEmbeddedSecure;
      v.embeddedSub = entry.name;
      v.embedding = std::move(e);
      return v;
    }
    v.notes.push_back("embedding " + entry.name + ": " + chk.violations.front());
  }

  v.tag = Verdict::Tag::kUnknown;
  return v;
}

Verdict xr_verdict(const Protocol& p, const std::vector<std::string>& keep) {
  return xr_verdict(p, keep, seed_registry());
}

Verdict xr_verdict(const Protocol& p, const std::vector<std::string>& keep,
                   const SecureRegistry& reg) {
  Verdict v = analyze(restrict_protocol(p, keep), reg);
  v.restrictedTo = keep;
  std::sort(v.restrictedTo.begin(), v.restrictedTo.end());
  return v;
}

std::string verdict_to_json(const Verdict& v) {
  nlohmann::ordered_json j;
  switch (v.tag) {
    case Verdict::Tag::kInsecure: {
      j["verdict"] = "insecure";
      nlohmann::ordered_json w;
      w["t_init"] = v.witness->tInit;
      w["T"] = v.witness->tracked;
      w["paths"] = v.witness->forwardPaths;
      j["witness"] = std::move(w);
      break;
    }
    case Verdict::Tag::kSecure: {
      j["verdict"] = "secure";
      j["reason"] = secure_reason_name(*v.reason);
      switch (*v.reason) {
        case SecureReason::kDisjointPartition:
          j["groups"] = {v.groupA, v.groupB};
          break;
        case SecureReason::kPrivateVariablesNoTracking:
          j["privates"] = v.privates;
          break;
        case SecureReason::kLayeredDisjoint:
          j["layer"] = v.layer;
          j["groups"] = {v.groupA, v.groupB};
          break;
        case SecureReason::kLayeredPrivate:
          j["layer"] = v.layer;
          break;
        case SecureReason::kEmbeddedSecure:
          j["sub"] = v.embeddedSub;
          j["phi"] = v.embedding.phi;
          j["chi"] = v.embedding.chi;
          break;
      }
      break;
    }
    case Verdict::Tag::kUnknown:
      j["verdict"] = "unknown";
      j["notes"] = v.notes;
      break;
  }
  if (!v.restrictedTo.empty()) j["restricted_to"] = v.restrictedTo;
  return j.dump(2);
}

int verdict_exit_code(const Verdict& v) {
  switch (v.tag) {
    case Verdict::Tag::kSecure:
      return 0;
    case Verdict::Tag::kInsecure:
      return 1;
    case Verdict::Tag::kUnknown:
      return 2;
  }
  return 2;
}

}  // namespace lnk
