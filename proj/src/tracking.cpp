#include "lnk/tracking.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace lnk {

namespace {

std::vector<char> close_forward(const Protocol& p, const std::vector<int>& seed) {
  std::vector<char> in(p.node_count(), 0);
  std::deque<int> open;
  for (int s : seed)
    if (!in[s]) {
      in[s] = 1;
      open.push_back(s);
    }
  while (!open.empty()) {
    int u = open.front();
    open.pop_front();
    for (int v : p.succs(u))
      if (!in[v]) {
        in[v] = 1;
        open.push_back(v);
      }
  }
  return in;
}

}  // namespace

std::vector<std::string> closure(const Protocol& p,
                                 const std::vector<std::string>& seed) {
  std::vector<int> ids;
  for (const auto& n : seed) ids.push_back(p.require(n));
  auto in = close_forward(p, ids);
  std::vector<std::string> out;
  for (int i = 0; i < p.node_count(); ++i)
    if (in[i]) out.push_back(p.name(i));
  return out;
}

TrackingCheck check_tracking_strategy(const Protocol& p,
                                      const TrackingStrategy& ts) {
  TrackingCheck c;
  auto bad = [&](std::string v) { c.violations.push_back(std::move(v)); };

  auto tinit = p.find(ts.tInit);
  if (!tinit) {
    bad("t_init " + ts.tInit + " is not a node");
    return c;
  }
  if (p.is_variable(*tinit)) bad("t_init " + ts.tInit + " is not a service");

  std::vector<int> tnodes;
  bool tinitListed = false;
  for (const auto& n : ts.tracked) {
    auto id = p.find(n);
    if (!id) {
      bad("tracked node " + n + " is not a node");
      continue;
    }
    if (p.is_variable(*id)) bad("variable " + n + " inside the tracked set");
    if (*id == *tinit) tinitListed = true;
    tnodes.push_back(*id);
  }
  if (!tinitListed) bad("t_init " + ts.tInit + " outside the tracked set");
  for (int u : tnodes)
    if (!reaches(p, *tinit, u))
      bad("t_init " + ts.tInit + " does not reach " + p.name(u));
  if (!c.violations.empty()) return c;

  auto inT = close_forward(p, tnodes);

  // owner[n] = variable whose path claims node n outside the tracked set.
  std::vector<int> owner(p.node_count(), -1);
  std::set<int> covered;
  for (const auto& [vn, path] : ts.forwardPaths) {
    auto vid = p.find(vn);
    if (!vid || !p.is_variable(*vid)) {
      bad("path key " + vn + " is not a variable");
      continue;
    }
    covered.insert(*vid);
    if (path.empty() || path.front() != vn) {
      bad("path for " + vn + " must start at " + vn);
      continue;
    }
    std::vector<int> ids;
    bool broken = false;
    for (const auto& n : path) {
      auto id = p.find(n);
      if (!id) {
        bad("path for " + vn + " visits unknown node " + n);
        broken = true;
        break;
      }
      ids.push_back(*id);
    }
    if (broken) continue;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i)
      if (!p.has_edge(ids[i], ids[i + 1])) {
        bad("path for " + vn + " uses a missing edge " + path[i] + "->" +
            path[i + 1]);
        broken = true;
        break;
      }
    if (broken) continue;
    if (!inT[ids.back()]) {
      bad("path for " + vn + " does not end in the tracked set");
      continue;
    }
    for (int id : ids) {
      if (inT[id]) continue;
      if (owner[id] >= 0 && owner[id] != *vid)
        bad("paths for " + p.name(owner[id]) + " and " + vn + " overlap at " +
            p.name(id));
      owner[id] = *vid;
    }
  }
  for (int v : p.variables())
    if (!covered.count(v)) bad("variable " + p.name(v) + " uncovered");

  c.ok = c.violations.empty();
  return c;
}

namespace {

// Unit-capacity Dinic over the split graph: source -> variables, variables and
// split pass-through nodes -> contracted tracked-set sink.
struct Flow {
  struct Arc {
    int to;
    int cap;
    int rev;
    int origTo;  // original protocol node behind this arc's head, -1 if none
  };
  std::vector<std::vector<Arc>> g;
  std::vector<int> level, it;

  explicit Flow(int n) : g(n), level(n), it(n) {}

  void add(int a, int b, int origTo = -1) {
    g[a].push_back({b, 1, static_cast<int>(g[b].size()), origTo});
    g[b].push_back({a, 0, static_cast<int>(g[a].size()) - 1, -1});
  }

  bool bfs(int s, int t) {
    std::fill(level.begin(), level.end(), -1);
    std::deque<int> q{s};
    level[s] = 0;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (const Arc& a : g[u])
        if (a.cap > 0 && level[a.to] < 0) {
          level[a.to] = level[u] + 1;
          q.push_back(a.to);
        }
    }
    return level[t] >= 0;
  }

  int dfs(int u, int t) {
    if (u == t) return 1;
    for (int& i = it[u]; i < static_cast<int>(g[u].size()); ++i) {
      Arc& a = g[u][i];
      if (a.cap > 0 && level[a.to] == level[u] + 1 && dfs(a.to, t)) {
        a.cap -= 1;
        g[a.to][a.rev].cap += 1;
        return 1;
      }
    }
    return 0;
  }

  int max_flow(int s, int t) {
    int f = 0;
    while (bfs(s, t)) {
      std::fill(it.begin(), it.end(), 0);
      while (dfs(s, t)) ++f;
    }
    return f;
  }
};

}  // namespace

std::optional<TrackingStrategy> find_tracking_strategy(const Protocol& p) {
  const int n = p.node_count();
  const auto& vars = p.variables();
  const int need = static_cast<int>(vars.size());

  for (int cand : p.topo_order()) {
    if (p.is_variable(cand)) continue;
    auto inT = close_forward(p, {cand});

    // Every variable must reach the tracked set, and the set's in-edges must
    // admit enough disjoint entries; both prune before the flow runs.
    std::vector<char> reachT(n, 0);
    std::deque<int> open;
    for (int i = 0; i < n; ++i)
      if (inT[i]) {
        reachT[i] = 1;
        open.push_back(i);
      }
    while (!open.empty()) {
      int u = open.front();
      open.pop_front();
      for (int q : p.preds(u))
        if (!reachT[q]) {
          reachT[q] = 1;
          open.push_back(q);
        }
    }
    bool viable = true;
    for (int v : vars)
      if (!reachT[v]) {
        viable = false;
        break;
      }
    if (!viable) continue;
    std::set<int> boundary;
    for (const auto& [u, v] : p.edges())
      if (!inT[u] && inT[v]) boundary.insert(u);
    if (static_cast<int>(boundary.size()) < need) continue;

    // Node ids in the flow graph: source 0, sink 1, variable x -> vx[x],
    // other untracked nodes u -> (uin[u], uin[u]+1).
    std::vector<int> nid(n, -1);
    int next = 2;
    for (int v : vars) nid[v] = next++;
    for (int u = 0; u < n; ++u)
      if (!inT[u] && !p.is_variable(u)) {
        nid[u] = next;
        next += 2;
      }
    Flow fl(next);
    for (int v : vars) fl.add(0, nid[v], v);
    for (int u = 0; u < n; ++u)
      if (!inT[u] && !p.is_variable(u)) fl.add(nid[u], nid[u] + 1, u);
    for (const auto& [u, v] : p.edges()) {
      if (inT[u]) continue;
      int from = p.is_variable(u) ? nid[u] : nid[u] + 1;
      if (inT[v])
        fl.add(from, 1, v);
      else
        fl.add(from, nid[v], v);
    }
    if (fl.max_flow(0, 1) != need) continue;

    TrackingStrategy ts;
    ts.tInit = p.name(cand);
    for (int i = 0; i < n; ++i)
      if (inT[i]) ts.tracked.push_back(p.name(i));
    // Each flow node carries at most one unit, so every visited node has
    // exactly one drained forward arc; walking them recovers the paths.
    for (int v : vars) {
      std::vector<std::string> path{p.name(v)};
      int cur = nid[v];
      while (true) {
        const Flow::Arc* used = nullptr;
        for (const auto& a : fl.g[cur])
          if (a.origTo >= 0 && a.cap == 0) {
            used = &a;
            break;
          }
        if (!used) throw OpError("flow decomposition lost a path");
        if (used->to == 1) {
          path.push_back(p.name(used->origTo));
          break;
        }
        bool split = !p.is_variable(used->origTo) &&
                     used->to == nid[used->origTo] + 1;
        if (!split) path.push_back(p.name(used->origTo));
        cur = used->to;
      }
      ts.forwardPaths[p.name(v)] = std::move(path);
    }
    return ts;
  }
  return std::nullopt;
}

std::optional<FlatTracking> flat_tracking(const Protocol& p) {
  auto flat = as_flat(p);
  if (!flat) throw OpError("flat form required");
  const auto& vars = p.variables();
  const int k = static_cast<int>(flat->services.size());

  std::vector<std::set<int>> sees(k);
  for (int i = 0; i < k; ++i)
    for (int a : flat->args[i]) sees[i].insert(a);

  // Injective cover of `todo` by singleton slots among services != skip.
  auto match_singles =
      [&](const std::vector<int>& todo,
          int skip) -> std::optional<std::map<int, int>> {
    std::vector<int> serviceOf(todo.size(), -1);
    std::vector<int> varAt(k, -1);
    std::function<bool(int, std::vector<char>&)> augment =
        [&](int vi, std::vector<char>& used) {
          for (int j = 0; j < k; ++j) {
            if (j == skip || used[j] || !sees[j].count(todo[vi])) continue;
            used[j] = 1;
            if (varAt[j] < 0 || augment(varAt[j], used)) {
              varAt[j] = vi;
              serviceOf[vi] = j;
              return true;
            }
          }
          return false;
        };
    for (std::size_t vi = 0; vi < todo.size(); ++vi) {
      std::vector<char> used(k, 0);
      if (!augment(static_cast<int>(vi), used)) return std::nullopt;
    }
    std::map<int, int> out;  // service index -> variable id
    for (std::size_t vi = 0; vi < todo.size(); ++vi)
      out[serviceOf[vi]] = todo[vi];
    return out;
  };

  // Try each service as the one multi-variable slot; it takes everything it
  // sees, the rest must land on distinct singleton slots. An all-singleton
  // cover implies success here too (restrict it to the slot's complement).
  for (int i = 0; i < k; ++i) {
    std::vector<int> todo;
    for (int v : vars)
      if (!sees[i].count(v)) todo.push_back(v);
    if (auto singles = match_singles(todo, i)) {
      FlatTracking ft;
      ft.tInit = p.name(flat->services[i]);
      std::vector<std::string> own;
      for (int v : vars)
        if (sees[i].count(v)) own.push_back(p.name(v));
      if (!own.empty()) ft.assigned[ft.tInit] = own;
      for (const auto& [j, v] : *singles)
        ft.assigned[p.name(flat->services[j])] = {p.name(v)};
      return ft;
    }
  }
  return std::nullopt;
}

TrackingStrategy to_tracking(const Protocol& p, const FlatTracking& ft) {
  auto flat = as_flat(p);
  if (!flat) throw OpError("flat form required");
  TrackingStrategy ts;
  ts.tInit = ft.tInit;
  int tinit = p.require(ft.tInit);
  ts.tracked = closure(p, {ft.tInit});
  std::string rootName = p.name(flat->root);
  for (const auto& [svc, vs] : ft.assigned) {
    int sid = p.require(svc);
    for (const auto& v : vs) {
      if (sid == tinit)
        ts.forwardPaths[v] = {v, svc};
      else
        ts.forwardPaths[v] = {v, svc, rootName};
    }
  }
  return ts;
}

namespace {

class TrackingRunner : public Strategy {
 public:
  TrackingRunner(const Protocol& p, const TrackingStrategy& ts, bool consistent)
      : p_(p), consistent_(consistent) {
    auto chk = check_tracking_strategy(p, ts);
    if (!chk.ok) {
      std::string msg = "tracking strategy does not check out:";
      for (const auto& v : chk.violations) msg += " " + v + ";";
      throw OpError(msg);
    }
    tInit_ = p.require(ts.tInit);
    std::vector<int> tnodes;
    for (const auto& n : ts.tracked) tnodes.push_back(p.require(n));
    inT_ = close_forward(p, tnodes);

    tpos_.assign(p.node_count(), -1);
    for (int u = 0; u < p.node_count(); ++u) {
      if (!inT_[u] || u == tInit_) continue;
      const auto& qs = p.preds(u);
      for (std::size_t i = 0; i < qs.size(); ++i)
        if (inT_[qs[i]]) {
          tpos_[u] = static_cast<int>(i);
          break;
        }
      if (tpos_[u] < 0)
        throw OpError("tracked node " + p.name(u) + " has no tracked input");
    }

    fwdPos_.assign(p.node_count(), -1);
    extractAt_.assign(p.node_count(), {});
    for (const auto& [vn, path] : ts.forwardPaths) {
      int var = p.require(vn);
      std::vector<int> ids;
      for (const auto& n : path) {
        int id = p.require(n);
        ids.push_back(id);
        if (inT_[id]) break;  // first tracked node ends the walk
      }
      for (std::size_t i = 1; i + 1 < ids.size(); ++i)
        fwdPos_[ids[i]] = p.pred_position(ids[i], ids[i - 1]);
      int end = ids.back();
      int prev = ids[ids.size() - 2];
      extractAt_[end].push_back({var, p.pred_position(end, prev)});
    }
    iOut_.assign(p.node_count(), -1);
  }

  void reset() override {
    std::fill(iOut_.begin(), iOut_.end(), -1);
    outCount_ = 0;
    scan_ = 0;
    firstInit_ = -1;
    firstInitInputs_.clear();
  }

  AdversaryAction decide(const AdversaryView& view) override {
    if (view.records.size() < lastSeen_) reset();  // rewound replay
    lastSeen_ = view.records.size();

    if (outCount_ == static_cast<int>(p_.variables().size()))
      return AdversaryAction::print(iOut_);

    while (scan_ < view.records.size() && view.records[scan_].reply >= 0)
      ++scan_;
    // track the first synchronizer query even if it sits past scan_
    for (std::size_t i = 0; i < view.records.size() && firstInit_ < 0; ++i)
      if (view.records[i].service == tInit_) {
        firstInit_ = static_cast<int>(i);
        int arity = static_cast<int>(p_.preds(tInit_).size());
        firstInitInputs_.assign(view.records[i].inputs,
                                view.records[i].inputs + arity);
      }

    if (scan_ < view.records.size()) {
      const ViewRecord& r = view.records[scan_];
      int u = r.service;
      int reply;
      if (u == tInit_) {
        bool zero;
        if (consistent_) {
          int arity = static_cast<int>(p_.preds(tInit_).size());
          zero = std::equal(r.inputs, r.inputs + arity,
                            firstInitInputs_.begin(), firstInitInputs_.end());
        } else {
          zero = static_cast<int>(scan_) == firstInit_;
        }
        reply = zero ? 0 : 1;
      } else if (inT_[u]) {
        reply = r.inputs[tpos_[u]];
      } else if (fwdPos_[u] >= 0) {
        reply = r.inputs[fwdPos_[u]];
      } else {
        reply = 1;
      }
      if (reply == 0 && inT_[u]) {
        for (const auto& [var, pos] : extractAt_[u])
          if (iOut_[var] < 0) {
            iOut_[var] = r.inputs[pos];
            ++outCount_;
          }
      }
      return AdversaryAction::reply(static_cast<int>(scan_), reply);
    }
    return AdversaryAction::wait();
  }

 private:
  const Protocol& p_;
  bool consistent_;
  int tInit_ = -1;
  std::vector<char> inT_;
  std::vector<int> tpos_;
  std::vector<int> fwdPos_;
  std::vector<std::vector<std::pair<int, int>>> extractAt_;

  std::vector<int8_t> iOut_;
  int outCount_ = 0;
  std::size_t scan_ = 0;
  std::size_t lastSeen_ = 0;
  int firstInit_ = -1;
  std::vector<int8_t> firstInitInputs_;
};

}  // namespace

std::unique_ptr<Strategy> build_tracking_runner(const Protocol& p,
                                                const TrackingStrategy& ts,
                                                bool consistentInit) {
  return std::make_unique<TrackingRunner>(p, ts, consistentInit);
}

}  // namespace lnk
