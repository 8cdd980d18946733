#include "lnk/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <set>
#include <thread>

namespace lnk {

namespace {

void append_record(std::string& out, const Protocol& p, int service,
                   const int8_t* inputs, int reply, int replyTime) {
  out += p.name(service);
  out += '(';
  for (std::size_t i = 0; i < p.preds(service).size(); ++i)
    out += static_cast<char>('0' + inputs[i]);
  out += ')';
  if (reply >= 0) {
    out += "->";
    out += static_cast<char>('0' + reply);
    out += '@';
    out += std::to_string(replyTime);
  } else {
    out += "->*";
  }
  out += '\n';
}

std::string view_header(int users, bool wait) {
  return "users=" + std::to_string(users) + ";wait=" + (wait ? "1" : "0") + "\n";
}

std::string serialize_history(const Protocol& p,
                              const std::vector<QueryRecord>& h, int users) {
  std::string out = view_header(users, false);
  for (const auto& r : h)
    append_record(out, p, r.service, r.inputs.data(), r.reply, r.replyTime);
  return out;
}

// g(f1(x,y), f2(u,v)): exactly two inner services, arity 2 each, variable
// sets disjoint.
std::optional<FlatForm> flat22_form(const Protocol& p) {
  auto f = as_flat(p);
  if (!f || f->services.size() != 2) return std::nullopt;
  if (f->args[0].size() != 2 || f->args[1].size() != 2) return std::nullopt;
  std::set<int> vs(f->args[0].begin(), f->args[0].end());
  vs.insert(f->args[1].begin(), f->args[1].end());
  if (vs.size() != 4) return std::nullopt;
  return f;
}

LocalSession flat22_session(const Protocol& p, const FlatForm& f, int xy, int uv) {
  LocalSession ls(p.node_count());
  ls.set(f.args[0][0], (xy >> 1) & 1);
  ls.set(f.args[0][1], xy & 1);
  ls.set(f.args[1][0], (uv >> 1) & 1);
  ls.set(f.args[1][1], uv & 1);
  return ls;
}

}  // namespace

std::string serialize_view(const Protocol& p, const AdversaryView& v) {
  std::string out = view_header(v.userCount, v.waitAvailable);
  for (const auto& r : v.records)
    append_record(out, p, r.service, r.inputs, r.reply, r.replyTime);
  return out;
}

AdversaryAction TableStrategy::decide(const AdversaryView& view) {
  const std::size_t total = view.userCount * proto->services().size();
  if (view.records.size() == total) {
    // Schedule exhausted; print on the final view, pending replies and all.
    auto it = printRule.find(serialize_view(*proto, view));
    if (it != printRule.end()) return AdversaryAction::print(it->second);
    std::vector<int8_t> zero(proto->node_count(), -1);
    for (int x : proto->variables()) zero[x] = 0;
    return AdversaryAction::print(std::move(zero));
  }
  for (std::size_t i = 0; i < view.records.size(); ++i) {
    const ViewRecord& r = view.records[i];
    if (r.reply >= 0) continue;
    auto t = tables.find(r.service);
    if (t == tables.end())
      return AdversaryAction::reply(static_cast<int>(i), 0);
    int arity = static_cast<int>(proto->preds(r.service).size());
    int bits = 0;
    for (int k = 0; k < arity; ++k) bits = (bits << 1) | r.inputs[k];
    int occ = 0;
    if (!consistent) {
      for (std::size_t j = 0; j < i; ++j)
        if (view.records[j].service == r.service) {
          occ = 1;
          break;
        }
    }
    return AdversaryAction::reply(static_cast<int>(i), t->second[occ][bits]);
  }
  return AdversaryAction::wait();
}

SessionUniverse bounded_universe(const Protocol& p, int users,
                                 SessionUniverse::Schedules schedules,
                                 std::optional<std::size_t> limit) {
  if (users < 1) throw OpError("bounded_universe: users must be positive");
  int V = static_cast<int>(p.variables().size());
  if (V > 12)
    throw OpError("bounded_universe: " + std::to_string(V) +
                  " variables make the assignment space unreasonable");
  int A = 1 << V;
  std::vector<LocalSession> all;
  all.reserve(A);
  for (int a = 0; a < A; ++a) {
    LocalSession ls(p.node_count());
    for (int i = 0; i < V; ++i)
      ls.set(p.variables()[i], (a >> (V - 1 - i)) & 1);
    all.push_back(std::move(ls));
  }
  SessionUniverse u;
  u.schedules = schedules;
  u.limit = limit;
  for (int size = 1; size <= users; ++size) {
    std::vector<int> idx(size, 0);
    for (;;) {
      std::vector<LocalSession> ms;
      ms.reserve(size);
      for (int i : idx) ms.push_back(all[i]);
      u.sessions.push_back(std::move(ms));
      if (u.sessions.size() > 200000)
        throw OpError("bounded_universe: session family too large");
      int k = size - 1;
      while (k >= 0 && idx[k] == A - 1) --k;
      if (k < 0) break;
      int v = idx[k] + 1;
      for (int j = k; j < size; ++j) idx[j] = v;
    }
  }
  return u;
}

SessionUniverse distinct_inputs_universe(const Protocol& p) {
  auto f = flat22_form(p);
  if (!f)
    throw OpError("distinct_inputs_universe: protocol is not g(f1(x,y), f2(u,v))");
  SessionUniverse u;
  u.schedules = SessionUniverse::Schedules::kCanonical;
  // Every pairing under every member order. User indices break schedule ties,
  // so a single fixed order would leak the pairing through root-block
  // positions; the refuting pairs need their aligned orders present.
  std::array<int, 4> perm{0, 1, 2, 3};
  do {
    std::array<int, 4> order{0, 1, 2, 3};
    do {
      std::vector<LocalSession> ms;
      ms.reserve(4);
      for (int i = 0; i < 4; ++i)
        ms.push_back(flat22_session(p, *f, order[i], perm[order[i]]));
      u.sessions.push_back(std::move(ms));
    } while (std::next_permutation(order.begin(), order.end()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return u;
}

std::optional<GlobalSession> verify_strategy(const Protocol& p, Strategy& s,
                                             const SessionUniverse& u) {
  Runtime rt(p);
  for (const auto& members : u.sessions) {
    int n = static_cast<int>(members.size());
    std::vector<Schedule> scheds;
    if (u.schedules == SessionUniverse::Schedules::kCanonical) {
      CanonicalOrder ord;
      ord.members = &members;
      scheds.push_back(canonical_schedule(p, n, &ord));
    } else {
      scheds = enumerate_schedules(p, n, u.limit);
    }
    for (auto& sc : scheds) {
      GlobalSession g{members, std::move(sc)};
      s.reset();
      if (rt.play(g, s) != OutcomeKind::kPrintedMember) return g;
    }
  }
  return std::nullopt;
}

std::pair<GlobalSession, GlobalSession> refute_flat_strategy(
    const Protocol& p, const std::array<int8_t, 4>& t1,
    const std::array<int8_t, 4>& t2) {
  auto f = flat22_form(p);
  if (!f)
    throw OpError("refute_flat_strategy: protocol is not g(f1(x,y), f2(u,v))");

  std::vector<std::array<int, 4>> perms;
  {
    std::array<int, 4> perm{0, 1, 2, 3};
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
  }
  // Left pairs inputs by lam, right by rho. Views can only coincide when the
  // root sees the same reply-pair multiset, and members must differ pointwise.
  const std::array<int, 4>* lam = nullptr;
  const std::array<int, 4>* rho = nullptr;
  for (const auto& l : perms) {
    for (const auto& r : perms) {
      bool touches = false;
      for (int a = 0; a < 4 && !touches; ++a) touches = l[a] == r[a];
      if (touches) continue;
      int cl[2][2] = {}, cr[2][2] = {};
      for (int a = 0; a < 4; ++a) {
        cl[t1[a]][t2[l[a]]] += 1;
        cr[t1[a]][t2[r[a]]] += 1;
      }
      if (cl[0][0] == cr[0][0] && cl[0][1] == cr[0][1] && cl[1][0] == cr[1][0] &&
          cl[1][1] == cr[1][1]) {
        lam = &l;
        rho = &r;
        break;
      }
    }
    if (lam) break;
  }
  if (!lam)
    throw OpError("refute_flat_strategy: no indistinguishable pairing for these tables");

  // Order the right members so user i's root query carries the same reply
  // pair on both sides.
  std::array<std::vector<int>, 4> bucket;
  for (int b = 0; b < 4; ++b)
    bucket[t1[b] * 2 + t2[(*rho)[b]]].push_back(b);
  GlobalSession L, R;
  for (int a = 0; a < 4; ++a) {
    L.members.push_back(flat22_session(p, *f, a, (*lam)[a]));
    auto& bk = bucket[t1[a] * 2 + t2[(*lam)[a]]];
    int b = bk.front();
    bk.erase(bk.begin());
    R.members.push_back(flat22_session(p, *f, b, (*rho)[b]));
  }
  CanonicalOrder lo, ro;
  lo.members = &L.members;
  ro.members = &R.members;
  L.schedule = canonical_schedule(p, 4, &lo);
  R.schedule = canonical_schedule(p, 4, &ro);
  return {std::move(L), std::move(R)};
}

namespace {

struct PreparedRun {
  const std::vector<LocalSession>* members;
  Schedule schedule;
  std::size_t multiset;
};

}  // namespace

std::optional<TableStrategy> search_universe(const Protocol& p,
                                             const SessionUniverse& u,
                                             uint64_t strategyBudget,
                                             bool consistentOnly, int jobs) {
  std::vector<int> tabled;
  for (int s : p.services())
    if (!p.succs(s).empty()) tabled.push_back(s);  // sink replies stay 0
  int K = 0;
  for (int s : tabled) {
    int a = static_cast<int>(p.preds(s).size());
    if (a > 10) throw OpError("search_universe: service arity too large");
    K += (consistentOnly ? 1 : 2) << a;
  }
  if (K >= 63 || (uint64_t{1} << K) > strategyBudget)
    throw OpError("search_universe: 2^" + std::to_string(K) +
                  " table strategies exceed the budget of " +
                  std::to_string(strategyBudget));
  const uint64_t count = uint64_t{1} << K;

  std::vector<PreparedRun> runs;
  for (std::size_t m = 0; m < u.sessions.size(); ++m) {
    const auto& members = u.sessions[m];
    int n = static_cast<int>(members.size());
    if (u.schedules == SessionUniverse::Schedules::kCanonical) {
      CanonicalOrder ord;
      ord.members = &members;
      runs.push_back({&members, canonical_schedule(p, n, &ord), m});
    } else {
      for (auto& sc : enumerate_schedules(p, n, u.limit))
        runs.push_back({&members, std::move(sc), m});
    }
  }
  std::vector<std::vector<std::vector<int8_t>>> memberSets(u.sessions.size());
  for (std::size_t m = 0; m < u.sessions.size(); ++m) {
    std::set<std::vector<int8_t>> distinct;
    for (const auto& ls : u.sessions[m]) distinct.insert(ls.values);
    memberSets[m].assign(distinct.begin(), distinct.end());
  }

  auto buildStrategy = [&](uint64_t c) {
    TableStrategy s;
    s.proto = &p;
    s.consistent = consistentOnly;
    int pos = 0;
    for (int svc : tabled) {
      int width = 1 << p.preds(svc).size();
      auto& tab = s.tables[svc];
      tab[0].assign(width, 0);
      tab[1].assign(width, 0);
      for (int occ = 0; occ < (consistentOnly ? 1 : 2); ++occ)
        for (int b = 0; b < width; ++b, ++pos)
          tab[occ][b] = static_cast<int8_t>((c >> pos) & 1);
      if (consistentOnly) tab[1] = tab[0];
    }
    return s;
  };

  // A candidate wins when every class of runs sharing a final view has an
  // assignment present in all its session multisets.
  auto winningRule = [&](TableStrategy& s,
                         std::map<std::string, std::vector<int8_t>>* rule) {
    Runtime rt(p);
    std::map<std::string, std::set<std::size_t>> classes;
    for (const auto& r : runs) {
      GlobalSession g{*r.members, r.schedule};
      s.reset();
      rt.play(g, s);
      classes[serialize_history(p, rt.history(),
                                static_cast<int>(r.members->size()))]
          .insert(r.multiset);
    }
    for (const auto& [key, ms] : classes) {
      const std::vector<int8_t>* common = nullptr;
      for (const auto& cand : memberSets[*ms.begin()]) {
        bool everywhere = true;
        for (std::size_t mi : ms) {
          const auto& set = memberSets[mi];
          if (std::find(set.begin(), set.end(), cand) == set.end()) {
            everywhere = false;
            break;
          }
        }
        if (everywhere) {
          common = &cand;
          break;
        }
      }
      if (!common) return false;
      if (rule) (*rule)[key] = *common;
    }
    return true;
  };

  std::atomic<uint64_t> best{UINT64_MAX};
  int nj = std::max(1, jobs);
  if (nj == 1) {
    for (uint64_t c = 0; c < count; ++c) {
      TableStrategy s = buildStrategy(c);
      if (winningRule(s, nullptr)) {
        best = c;
        break;
      }
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nj);
    for (int t = 0; t < nj; ++t)
      pool.emplace_back([&, t] {
        for (uint64_t c = t; c < count; c += nj) {
          if (c >= best.load(std::memory_order_relaxed)) break;
          TableStrategy s = buildStrategy(c);
          if (winningRule(s, nullptr)) {
            uint64_t cur = best.load();
            while (c < cur && !best.compare_exchange_weak(cur, c)) {
            }
            break;
          }
        }
      });
    for (auto& w : pool) w.join();
  }
  if (best.load() == UINT64_MAX) return std::nullopt;
  TableStrategy s = buildStrategy(best.load());
  std::map<std::string, std::vector<int8_t>> rule;
  winningRule(s, &rule);
  s.printRule = std::move(rule);
  return s;
}

std::optional<TableStrategy> brute_force_attack(const Protocol& p,
                                                const AttackBounds& b) {
  SessionUniverse u = bounded_universe(p, b.users, b.schedules, b.scheduleLimit);
  return search_universe(p, u, b.strategyBudget, b.consistentOnly, b.jobs);
}

}  // namespace lnk
