#include "lnk/transforms.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <set>

namespace lnk {

namespace {

int require_service(const Protocol& p, const std::string& n, const char* op) {
  int id = p.require(n);
  if (p.is_variable(id))
    throw OpError(std::string(op) + ": " + n + " is a variable");
  return id;
}

}  // namespace

Protocol bypass(const Protocol& p, const std::string& u, const std::string& v) {
  int ui = require_service(p, u, "bypass");
  int vi = p.require(v);
  if (!p.has_edge(ui, vi))
    throw OpError("bypass: no edge " + u + " -> " + v);
  ProtocolData d = p.data();
  std::vector<std::pair<std::string, std::string>> edges;
  edges.reserve(d.edges.size() + p.preds(ui).size());
  for (const auto& e : d.edges) {
    if (e.first == u && e.second == v) {
      // u's arguments take its place in v's argument list.
      for (int w : p.preds(ui)) edges.emplace_back(p.name(w), v);
    } else {
      edges.push_back(e);
    }
  }
  d.edges = std::move(edges);
  return Protocol::seal(std::move(d));
}

std::pair<Protocol, std::string> clone_node(const Protocol& p,
                                            const std::string& v,
                                            const std::vector<std::string>& moved) {
  int vi = require_service(p, v, "clone_node");
  std::set<std::string> mv;
  for (const auto& m : moved) {
    int mi = p.require(m);
    if (!p.has_edge(vi, mi))
      throw OpError("clone_node: " + m + " is not a successor of " + v);
    mv.insert(m);
  }
  std::string cname = fresh_name(p, v + "__c");
  ProtocolData d = p.data();
  d.nodes.emplace_back(cname, NodeKind::kService);
  for (auto& e : d.edges)
    if (e.first == v && mv.count(e.second)) e.first = cname;
  for (int w : p.preds(vi)) d.edges.emplace_back(p.name(w), cname);
  return {Protocol::seal(std::move(d)), std::move(cname)};
}

Protocol remove_removable(const Protocol& p, const std::string& u) {
  int ui = require_service(p, u, "remove_removable");
  if (!p.succs(ui).empty())
    throw OpError("remove_removable: " + u + " has successors");
  bool witnessed = false;
  for (int w = 0; w < p.node_count() && !witnessed; ++w) {
    if (w == ui) continue;
    const auto& pw = p.preds(w);
    witnessed = std::all_of(p.preds(ui).begin(), p.preds(ui).end(), [&](int q) {
      return std::find(pw.begin(), pw.end(), q) != pw.end();
    });
  }
  if (!witnessed)
    throw OpError("remove_removable: no other node sees all inputs of " + u);
  ProtocolData d = p.data();
  d.nodes.erase(std::remove_if(d.nodes.begin(), d.nodes.end(),
                               [&](const auto& n) { return n.first == u; }),
                d.nodes.end());
  d.edges.erase(std::remove_if(d.edges.begin(), d.edges.end(),
                               [&](const auto& e) {
                                 return e.first == u || e.second == u;
                               }),
                d.edges.end());
  return Protocol::seal(std::move(d));
}

std::pair<Protocol, std::string> split_edge(const Protocol& p,
                                            const std::string& u,
                                            const std::string& v) {
  int ui = p.require(u);
  int vi = p.require(v);
  if (!p.has_edge(ui, vi))
    throw OpError("split_edge: no edge " + u + " -> " + v);
  std::string w = fresh_name(p, u + "__s");
  ProtocolData d = p.data();
  d.nodes.emplace_back(w, NodeKind::kService);
  for (auto& e : d.edges)
    if (e.first == u && e.second == v) e.first = w;  // keeps v's argument slot
  d.edges.emplace_back(u, w);
  return {Protocol::seal(std::move(d)), std::move(w)};
}

Protocol unsplit(const Protocol& p, const std::string& w) {
  int wi = require_service(p, w, "unsplit");
  if (p.preds(wi).size() != 1 || p.succs(wi).size() != 1)
    throw OpError("unsplit: " + w +
                  " must have exactly one predecessor and one successor");
  int ui = p.preds(wi)[0];
  int vi = p.succs(wi)[0];
  if (p.has_edge(ui, vi))
    throw OpError("unsplit: edge " + p.name(ui) + " -> " + p.name(vi) +
                  " already present");
  const std::string& u = p.name(ui);
  const std::string& v = p.name(vi);
  ProtocolData d = p.data();
  d.nodes.erase(std::remove_if(d.nodes.begin(), d.nodes.end(),
                               [&](const auto& n) { return n.first == w; }),
                d.nodes.end());
  std::vector<std::pair<std::string, std::string>> edges;
  edges.reserve(d.edges.size());
  for (const auto& e : d.edges) {
    if (e.first == u && e.second == w) continue;
    if (e.first == w && e.second == v)
      edges.emplace_back(u, v);  // same argument slot in v
    else
      edges.push_back(e);
  }
  d.edges = std::move(edges);
  return Protocol::seal(std::move(d));
}

Protocol closed_subprotocol(const Protocol& p,
                            const std::vector<std::string>& nodes) {
  if (nodes.empty()) throw OpError("closed_subprotocol: empty node set");
  std::set<int> keep;
  for (const auto& n : nodes) keep.insert(p.require(n));
  for (int k : keep)
    for (int q : p.preds(k))
      if (!keep.count(q))
        throw OpError("closed_subprotocol: not predecessor-closed: " +
                      p.name(k) + " misses " + p.name(q));
  std::vector<int> boundary;
  for (int k : keep)
    for (int s : p.succs(k))
      if (!keep.count(s)) {
        boundary.push_back(k);
        break;
      }
  if (boundary.size() > 1) {
    std::string names;
    for (int b : boundary) {
      if (!names.empty()) names += ", ";
      names += p.name(b);
    }
    throw OpError("closed_subprotocol: multiple exit nodes: " + names);
  }
  if (boundary.size() == 1) {
    for (int s : p.succs(boundary[0]))
      if (keep.count(s))
        throw OpError("closed_subprotocol: exit " + p.name(boundary[0]) +
                      " has successors inside the sub-protocol");
  }
  ProtocolData d;
  d.name = p.protocol_name();
  const ProtocolData full = p.data();
  for (const auto& n : full.nodes)
    if (keep.count(*p.find(n.first))) d.nodes.push_back(n);
  for (const auto& e : full.edges)
    if (keep.count(*p.find(e.first)) && keep.count(*p.find(e.second)))
      d.edges.push_back(e);
  return Protocol::seal(std::move(d));
}

namespace {

// Minimal-mask antichain insert; masks are over the service-image set.
void insert_min(std::vector<uint32_t>& a, uint32_t m) {
  for (uint32_t x : a)
    if ((x & m) == x) return;  // a subset is already there
  a.erase(std::remove_if(a.begin(), a.end(),
                         [&](uint32_t x) { return (m & x) == m; }),
          a.end());
  a.push_back(m);
}

}  // namespace

EmbeddingCheck check_embedding(const Protocol& sub, const Protocol& host,
                               const Embedding& e) {
  EmbeddingCheck out;
  auto& V = out.violations;

  std::vector<int> phi(sub.node_count(), -1);
  for (int s = 0; s < sub.node_count(); ++s) {
    auto it = e.phi.find(sub.name(s));
    if (it == e.phi.end()) {
      V.push_back("phi undefined on " + sub.name(s));
      continue;
    }
    auto h = host.find(it->second);
    if (!h)
      V.push_back("phi maps " + sub.name(s) + " to unknown node " + it->second);
    else
      phi[s] = *h;
  }
  std::vector<int> chi(sub.node_count(), -1);
  std::set<int> chiRange;
  for (int x : sub.variables()) {
    auto it = e.chi.find(sub.name(x));
    if (it == e.chi.end()) {
      V.push_back("chi undefined on variable " + sub.name(x));
      continue;
    }
    auto h = host.find(it->second);
    if (!h) {
      V.push_back("chi maps " + sub.name(x) + " to unknown node " + it->second);
    } else if (!host.is_variable(*h)) {
      V.push_back("chi maps " + sub.name(x) + " to non-variable " + it->second);
    } else if (!chiRange.insert(*h).second) {
      V.push_back("chi is not injective at " + sub.name(x));
    } else {
      chi[x] = *h;
    }
  }
  if (!V.empty()) return out;

  int n = host.node_count();
  std::set<int> images(phi.begin(), phi.end());

  // Exit condition: anything reachable from the image of a node with
  // successors must be able to reach an image again.
  std::vector<char> toImage(n, 0);
  {
    std::deque<int> q(images.begin(), images.end());
    for (int i : images) toImage[i] = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (int w : host.preds(u))
        if (!toImage[w]) {
          toImage[w] = 1;
          q.push_back(w);
        }
    }
  }
  for (int s = 0; s < sub.node_count(); ++s) {
    if (sub.succs(s).empty()) continue;
    std::vector<char> seen(n, 0);
    std::deque<int> q{phi[s]};
    seen[phi[s]] = 1;
    bool reported = false;
    while (!q.empty() && !reported) {
      int u = q.front();
      q.pop_front();
      for (int w : host.succs(u)) {
        if (seen[w]) continue;
        seen[w] = 1;
        if (!toImage[w]) {
          V.push_back("exit: " + host.name(phi[s]) + " (image of " +
                      sub.name(s) + ") reaches " + host.name(w) +
                      ", which cannot reach the image");
          reported = true;
          break;
        }
        q.push_back(w);
      }
    }
  }

  // Shortcut-freeness: an image-to-image path with no image inside demands
  // the matching sub edge.
  std::vector<std::vector<int>> preimage(n);
  for (int s = 0; s < sub.node_count(); ++s) preimage[phi[s]].push_back(s);
  for (int a = 0; a < sub.node_count(); ++a) {
    std::vector<char> seen(n, 0);
    std::deque<int> q{phi[a]};
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (int w : host.succs(u)) {
        if (seen[w]) continue;
        seen[w] = 1;
        if (images.count(w)) {
          for (int b : preimage[w])
            if (b != a && !sub.has_edge(a, b))
              V.push_back("shortcut: path " + host.name(phi[a]) + " -> ... -> " +
                          host.name(w) + " has no matching edge " + sub.name(a) +
                          " -> " + sub.name(b));
          continue;  // stop at the image
        }
        q.push_back(w);
      }
    }
  }

  for (int x : sub.variables())
    if (!reaches(host, chi[x], phi[x]))
      V.push_back("variable " + sub.name(x) + ": no path from " +
                  host.name(chi[x]) + " to " + host.name(phi[x]));

  // Exclusivity. B = images of sub services; two mapped variables may only
  // meet downstream of a shared member of B. A pair of distinct paths from
  // one mapped variable is held to the same rule.
  std::set<int> B;
  for (int g : sub.services()) B.insert(phi[g]);
  if (B.size() > 30)
    throw OpError("check_embedding: too many service images for the exclusivity check");
  std::vector<uint32_t> maskOf(n, 0);
  {
    uint32_t bit = 1;
    for (int b : B) {
      maskOf[b] = bit;
      bit <<= 1;
    }
  }
  // rs[u]: for each w reachable from u, the minimal B-masks over u ~> w paths.
  std::vector<std::map<int, std::vector<uint32_t>>> rs(n);
  {
    const auto& topo = host.topo_order();
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      int u = *it;
      insert_min(rs[u][u], maskOf[u]);
      for (int v : host.succs(u))
        for (const auto& [w, masks] : rs[v])
          for (uint32_t m : masks) insert_min(rs[u][w], m | maskOf[u]);
    }
  }
  auto disjointMeet = [&](int a, int b) -> std::optional<int> {
    for (const auto& [w, ma] : rs[a]) {
      auto it = rs[b].find(w);
      if (it == rs[b].end()) continue;
      for (uint32_t x : ma)
        for (uint32_t y : it->second)
          if ((x & y) == 0) return w;
    }
    return std::nullopt;
  };
  const auto& subvars = sub.variables();
  for (size_t i = 0; i < subvars.size(); ++i)
    for (size_t j = i + 1; j < subvars.size(); ++j)
      if (auto w = disjointMeet(chi[subvars[i]], chi[subvars[j]]))
        V.push_back("exclusivity: " + sub.name(subvars[i]) + " and " +
                    sub.name(subvars[j]) + " meet at " + host.name(*w) +
                    " along image-disjoint paths");
  // Same variable: a fork after an image-free prefix whose branches meet on
  // disjoint masks gives two distinct paths.
  for (int x : subvars) {
    std::vector<char> zr(n, 0);
    std::deque<int> q{chi[x]};
    zr[chi[x]] = 1;  // variables never sit in B
    bool reported = false;
    while (!q.empty() && !reported) {
      int u = q.front();
      q.pop_front();
      const auto& ss = host.succs(u);
      for (size_t i = 0; i < ss.size() && !reported; ++i)
        for (size_t j = i + 1; j < ss.size() && !reported; ++j)
          if (auto w = disjointMeet(ss[i], ss[j])) {
            V.push_back("exclusivity: " + sub.name(x) + " reaches " +
                        host.name(*w) + " along two image-disjoint paths (fork at " +
                        host.name(u) + ")");
            reported = true;
          }
      if (reported) break;
      for (int s : ss)
        if (!maskOf[s] && !zr[s]) {
          zr[s] = 1;
          q.push_back(s);
        }
    }
  }

  out.ok = V.empty();
  return out;
}

namespace {

struct Reducer {
  Protocol cur;
  const Protocol& sub;
  std::map<std::string, std::string> phi;
  std::map<std::string, std::string> chi;

  Reducer(const Protocol& host, const Protocol& s, const Embedding& e)
      : cur(host), sub(s), phi(e.phi), chi(e.chi) {}

  std::set<int> image_ids() const {
    std::set<int> out;
    for (const auto& kv : phi) out.insert(cur.require(kv.second));
    return out;
  }

  // Bypasses every out-edge of v, then removes it; any former successor
  // witnesses the removal.
  void eliminate(const std::string& v) {
    int vi = cur.require(v);
    std::vector<std::string> ss;
    for (int s : cur.succs(vi)) ss.push_back(cur.name(s));
    for (const auto& s : ss) cur = bypass(cur, v, s);
    cur = remove_removable(cur, v);
  }

  // Non-image node strictly between two images, if any.
  std::optional<std::string> intermediate() const {
    std::set<int> imgs = image_ids();
    int n = cur.node_count();
    std::vector<char> fromImg(n, 0), toImg(n, 0);
    std::deque<int> q;
    for (int i : imgs) {
      fromImg[i] = toImg[i] = 1;
      q.push_back(i);
    }
    std::deque<int> q2 = q;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (int w : cur.succs(u))
        if (!fromImg[w]) {
          fromImg[w] = 1;
          q.push_back(w);
        }
    }
    while (!q2.empty()) {
      int u = q2.front();
      q2.pop_front();
      for (int w : cur.preds(u))
        if (!toImg[w]) {
          toImg[w] = 1;
          q2.push_back(w);
        }
    }
    for (int v = 0; v < n; ++v)
      if (fromImg[v] && toImg[v] && !imgs.count(v)) return cur.name(v);
    return std::nullopt;
  }

  void clear_intermediates() {
    while (auto v = intermediate()) eliminate(*v);
  }

  void make_injective() {
    auto order = sub.topo_order();
    std::map<std::string, std::string> keeperOf;  // host image -> sub keeper
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::string& sname = sub.name(*it);
      const std::string& img = phi.at(sname);
      auto k = keeperOf.find(img);
      if (k == keeperOf.end()) {
        keeperOf[img] = sname;
        continue;
      }
      // Another sub node owns this image; the clone takes the out-edges the
      // owner's sub successors do not justify.
      int ki = sub.require(k->second);
      int wi = cur.require(img);
      std::vector<std::string> moved;
      for (int t : cur.succs(wi)) {
        const std::string& tn = cur.name(t);
        bool justified = false;
        for (int s2 : sub.succs(ki))
          if (phi.at(sub.name(s2)) == tn) {
            justified = true;
            break;
          }
        if (!justified) moved.push_back(tn);
      }
      auto [next, cname] = clone_node(cur, img, moved);
      cur = std::move(next);
      keeperOf[cname] = sname;
      phi[sname] = cname;
    }
  }

  void drop_unmapped() {
    std::vector<std::string> keepVars;
    for (const auto& kv : chi) keepVars.push_back(kv.second);
    cur = restrict_protocol(cur, keepVars);
    for (;;) {
      std::set<int> imgs = image_ids();
      std::optional<std::string> victim;
      for (int v = 0; v < cur.node_count() && !victim; ++v)
        if (!imgs.count(v) && vars_of(cur, v).empty()) victim = cur.name(v);
      if (!victim) break;
      eliminate(*victim);
    }
  }

  void collapse_chains() {
    for (int x : sub.variables()) {
      const std::string& sname = sub.name(x);
      std::string cx = chi.at(sname);
      std::string px = phi.at(sname);
      if (cx == px) continue;
      int ci = cur.require(cx);
      int pi = cur.require(px);
      std::vector<std::string> interior;
      for (int v = 0; v < cur.node_count(); ++v) {
        if (v == ci || v == pi) continue;
        if (reaches(cur, ci, v) && reaches(cur, v, pi)) {
          if (cur.preds(v).size() != 1 || cur.succs(v).size() != 1)
            throw OpError("chain from " + cx + " to " + px + " runs through " +
                          cur.name(v) + ", which is not a pass-through");
          interior.push_back(cur.name(v));
        }
      }
      for (const auto& w : interior) cur = unsplit(cur, w);
      ci = cur.require(cx);
      pi = cur.require(px);
      if (!cur.has_edge(ci, pi))
        throw OpError("no direct edge " + cx + " -> " + px +
                      " after collapsing the chain");
      std::vector<std::string> ss;
      for (int s : cur.succs(pi)) ss.push_back(cur.name(s));
      for (const auto& s : ss) cur = bypass(cur, px, s);
      cur = remove_removable(cur, px);
      phi[sname] = cx;
    }
  }

  void complete_edges() {
    for (const auto& [a, b] : sub.edges()) {
      const std::string& pa = phi.at(sub.name(a));
      const std::string& pb = phi.at(sub.name(b));
      if (!cur.has_edge(cur.require(pa), cur.require(pb))) {
        ProtocolData d = cur.data();
        d.edges.emplace_back(pa, pb);
        cur = Protocol::seal(std::move(d));
      }
    }
  }

  Protocol extract() {
    std::set<std::string> keep;
    for (const auto& kv : phi) keep.insert(kv.second);
    return closed_subprotocol(cur,
                              std::vector<std::string>(keep.begin(), keep.end()));
  }
};

}  // namespace

Protocol reduce_via_embedding(const Protocol& host, const Protocol& sub,
                              const Embedding& e) {
  EmbeddingCheck chk = check_embedding(sub, host, e);
  if (!chk.ok)
    throw OpError("reduce_via_embedding: embedding does not check out: " +
                  chk.violations.front());
  if (!root(sub))
    throw OpError("reduce_via_embedding: sub-protocol has no root");

  Reducer r(host, sub, e);
  int stage = 0;
  auto run = [&](int n, auto&& fn) {
    stage = n;
    fn();
  };
  try {
    run(1, [&] { r.clear_intermediates(); });
    run(2, [&] { r.make_injective(); });
    run(3, [&] { r.drop_unmapped(); });
    run(4, [&] { r.collapse_chains(); });
    // Relabeling in stage 4 can expose new between-image nodes.
    run(5, [&] { r.clear_intermediates(); });
    run(6, [&] { r.complete_edges(); });
    stage = 7;
    return r.extract();
  } catch (const OpError& ex) {
    throw OpError("reduce_via_embedding stage " + std::to_string(stage) + ": " +
                  ex.what());
  } catch (const ValidationError& ex) {
    throw OpError("reduce_via_embedding stage " + std::to_string(stage) + ": " +
                  ex.what());
  }
}

}  // namespace lnk
