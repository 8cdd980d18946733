// linkcheck: command-line front end for protocol linkability analysis.
//
// Subcommands: analyze, track, simulate, transform, embed-check, oracle,
// export, corpus. JSON output with --json, human-readable otherwise.
// Exit codes for analyze follow the verdict (0 secure, 1 insecure,
// 2 unknown); every command exits 3 on parse or validation failures.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "lnk/analysis.hpp"
#include "lnk/corpus.hpp"
#include "lnk/execution.hpp"
#include "lnk/oracle.hpp"
#include "lnk/protocol.hpp"
#include "lnk/tracking.hpp"
#include "lnk/transforms.hpp"

using nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lnk::OpError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

lnk::Protocol load_protocol(const std::string& path) {
  try {
    return lnk::parse_protocol(read_file(path));
  } catch (const lnk::ParseError& e) {
    throw lnk::OpError(path + ": " + e.what());
  } catch (const lnk::ValidationError& e) {
    throw lnk::OpError(path + ": " + e.what());
  }
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

ordered_json session_json(const lnk::Protocol& p, const lnk::GlobalSession& g) {
  ordered_json j;
  j["members"] = ordered_json::array();
  for (const auto& m : g.members) {
    ordered_json a;
    for (int v : p.variables()) a[p.name(v)] = static_cast<int>(m.values[v]);
    j["members"].push_back(std::move(a));
  }
  j["schedule"] = ordered_json::array();
  for (const auto& s : g.schedule.steps)
    j["schedule"].push_back({{"user", s.user}, {"service", p.name(s.service)}});
  return j;
}

ordered_json printed_json(const lnk::Protocol& p, const std::vector<int8_t>& printed) {
  ordered_json a;
  for (int v : p.variables())
    if (v < static_cast<int>(printed.size()) && printed[v] >= 0)
      a[p.name(v)] = static_cast<int>(printed[v]);
  return a;
}

lnk::TraceSink jsonl_sink(const lnk::Protocol& p) {
  return [&p](const lnk::TraceEvent& ev) {
    ordered_json j;
    j["clock"] = ev.clock;
    switch (ev.kind) {
      case lnk::TraceEvent::kQuery: {
        j["action"] = "query";
        j["service"] = p.name(ev.service);
        j["user"] = ev.user;
        ordered_json in = ordered_json::array();
        for (int8_t b : *ev.inputs) in.push_back(static_cast<int>(b));
        j["inputs"] = std::move(in);
        break;
      }
      case lnk::TraceEvent::kReply:
        j["action"] = "reply";
        j["service"] = p.name(ev.service);
        j["bit"] = ev.bit;
        break;
      case lnk::TraceEvent::kPrint:
        j["action"] = "print";
        j["printed"] = printed_json(p, *ev.printed);
        break;
    }
    std::cout << j.dump() << "\n";
  };
}

void print_verdict_human(const lnk::Verdict& v) {
  using Tag = lnk::Verdict::Tag;
  switch (v.tag) {
    case Tag::kInsecure: {
      std::cout << "insecure\n";
      std::cout << "  t_init: " << v.witness->tInit << "\n";
      std::cout << "  T: " << join(v.witness->tracked) << "\n";
      for (const auto& [var, path] : v.witness->forwardPaths)
        std::cout << "  path " << var << ": " << join(path, " -> ") << "\n";
      break;
    }
    case Tag::kSecure: {
      std::cout << "secure (" << lnk::secure_reason_name(*v.reason) << ")\n";
      switch (*v.reason) {
        case lnk::SecureReason::kDisjointPartition:
          std::cout << "  groups: {" << join(v.groupA) << "} / {" << join(v.groupB)
                    << "}\n";
          break;
        case lnk::SecureReason::kPrivateVariablesNoTracking:
          for (const auto& [svc, vars] : v.privates)
            std::cout << "  " << svc << ": " << join(vars) << "\n";
          break;
        case lnk::SecureReason::kLayeredDisjoint:
          std::cout << "  layer " << v.layer << ": {" << join(v.groupA) << "} / {"
                    << join(v.groupB) << "}\n";
          break;
        case lnk::SecureReason::kLayeredPrivate:
          std::cout << "  layer " << v.layer << "\n";
          break;
        case lnk::SecureReason::kEmbeddedSecure:
          std::cout << "  sub-protocol: " << v.embeddedSub << "\n";
          break;
      }
      break;
    }
    case Tag::kUnknown:
      std::cout << "unknown\n";
      for (const auto& n : v.notes) std::cout << "  - " << n << "\n";
      break;
  }
  if (!v.restrictedTo.empty())
    std::cout << "  restricted to: " << join(v.restrictedTo) << "\n";
}

// Uniform random member bits and a random legal interleaving.
lnk::GlobalSession random_session(const lnk::Protocol& p, int users,
                                  std::mt19937_64& rng) {
  lnk::GlobalSession g;
  for (int u = 0; u < users; ++u) {
    lnk::LocalSession ls(p.node_count());
    for (int v : p.variables()) ls.set(v, static_cast<int>(rng() & 1));
    g.members.push_back(std::move(ls));
  }
  g.schedule.users = users;
  std::vector<std::set<int>> done(users);
  const auto& services = p.services();
  std::vector<std::pair<int, int>> avail;
  while (g.schedule.steps.size() < services.size() * users) {
    avail.clear();
    for (int u = 0; u < users; ++u)
      for (int s : services) {
        if (done[u].count(s)) continue;
        bool ready = true;
        for (int q : p.preds(s))
          if (!p.is_variable(q) && !done[u].count(q)) {
            ready = false;
            break;
          }
        if (ready) avail.emplace_back(u, s);
      }
    const auto& pick = avail[rng() % avail.size()];
    done[pick.first].insert(pick.second);
    g.schedule.steps.push_back({pick.first + 1, pick.second});
  }
  return g;
}

struct SimTally {
  std::size_t runs = 0, member = 0, nonMember = 0, exhausted = 0;
  std::optional<ordered_json> firstFailure;
};

int cmd_analyze(const std::string& file, const std::string& xr, bool json) {
  lnk::Protocol p = load_protocol(file);
  lnk::Verdict v = xr.empty() ? lnk::analyze(p) : lnk::xr_verdict(p, split_csv(xr));
  if (json)
    std::cout << lnk::verdict_to_json(v) << "\n";
  else
    print_verdict_human(v);
  return lnk::verdict_exit_code(v);
}

int cmd_track(const std::string& file, bool json) {
  lnk::Protocol p = load_protocol(file);
  auto ts = lnk::find_tracking_strategy(p);
  if (json) {
    ordered_json j;
    if (ts) {
      j["t_init"] = ts->tInit;
      j["T"] = ts->tracked;
      j["paths"] = ts->forwardPaths;
    } else {
      j["result"] = "none";
    }
    std::cout << j.dump(2) << "\n";
  } else if (ts) {
    std::cout << "t_init: " << ts->tInit << "\n";
    std::cout << "T: " << join(ts->tracked) << "\n";
    for (const auto& [var, path] : ts->forwardPaths)
      std::cout << "path " << var << ": " << join(path, " -> ") << "\n";
  } else {
    std::cout << "none\n";
  }
  return 0;
}

struct SimOptions {
  std::string file, strategy = "tracking", schedule = "canonical";
  int users = 2;
  int sessions = 0;  // >0: random mode
  uint64_t seed = 0;
  bool seedSet = false;
  bool consistent = false;
  bool trace = false;
  bool json = false;
  int jobs = 1;
  std::optional<std::size_t> limit;
};

int cmd_simulate(const SimOptions& o) {
  lnk::Protocol p = load_protocol(o.file);
  std::optional<lnk::TrackingStrategy> ts;
  if (o.strategy == "tracking") {
    ts = lnk::find_tracking_strategy(p);
    if (!ts) throw lnk::OpError(o.file + ": no tracking strategy exists to simulate");
  } else if (o.strategy != "never-print") {
    throw lnk::OpError("unknown strategy: " + o.strategy);
  }
  auto makeStrategy = [&]() -> std::unique_ptr<lnk::Strategy> {
    if (ts) return lnk::build_tracking_runner(p, *ts, o.consistent);
    return std::make_unique<lnk::NeverPrintStrategy>();
  };

  SimTally tally;
  auto record = [&](const lnk::GlobalSession& g, lnk::OutcomeKind k,
                    const std::vector<int8_t>& printed) {
    tally.runs += 1;
    switch (k) {
      case lnk::OutcomeKind::kPrintedMember:
        tally.member += 1;
        return;
      case lnk::OutcomeKind::kPrintedNonMember:
        tally.nonMember += 1;
        break;
      case lnk::OutcomeKind::kExhaustedWithoutPrint:
        tally.exhausted += 1;
        break;
    }
    if (!tally.firstFailure) {
      ordered_json f;
      f["session"] = session_json(p, g);
      f["outcome"] = k == lnk::OutcomeKind::kPrintedNonMember
                         ? "printed-non-member"
                         : "exhausted-without-print";
      if (k == lnk::OutcomeKind::kPrintedNonMember)
        f["printed"] = printed_json(p, printed);
      tally.firstFailure = std::move(f);
    }
  };

  lnk::TraceSink sink = jsonl_sink(p);
  const lnk::TraceSink* tracePtr = o.trace ? &sink : nullptr;

  if (o.sessions > 0) {
    if (!o.seedSet) throw lnk::OpError("--sessions requires --seed");
    std::mt19937_64 rng(o.seed);
    auto strat = makeStrategy();
    lnk::Runtime rt(p);
    for (int i = 0; i < o.sessions; ++i) {
      lnk::GlobalSession g = random_session(p, o.users, rng);
      strat->reset();
      lnk::OutcomeKind k = rt.play(g, *strat, tracePtr);
      record(g, k, rt.printed());
    }
  } else {
    lnk::SessionUniverse u = lnk::bounded_universe(
        p, o.users,
        o.schedule == "exhaustive" ? lnk::SessionUniverse::Schedules::kExhaustive
                                   : lnk::SessionUniverse::Schedules::kCanonical,
        o.limit);
    int nj = o.trace ? 1 : std::max(1, o.jobs);
    if (nj == 1) {
      auto strat = makeStrategy();
      lnk::Runtime rt(p);
      for (const auto& members : u.sessions) {
        std::vector<lnk::Schedule> scheds;
        if (u.schedules == lnk::SessionUniverse::Schedules::kCanonical) {
          lnk::CanonicalOrder ord;
          ord.members = &members;
          scheds.push_back(
              lnk::canonical_schedule(p, static_cast<int>(members.size()), &ord));
        } else {
          scheds = lnk::enumerate_schedules(p, static_cast<int>(members.size()),
                                            u.limit);
        }
        for (auto& sc : scheds) {
          lnk::GlobalSession g{members, std::move(sc)};
          strat->reset();
          lnk::OutcomeKind k = rt.play(g, *strat, tracePtr);
          record(g, k, rt.printed());
        }
      }
    } else {
      // Multiset-striped workers; the lowest failing multiset wins the report.
      struct Local {
        SimTally tally;
        std::size_t failIndex = SIZE_MAX;
      };
      std::vector<Local> locals(nj);
      std::vector<std::thread> pool;
      for (int t = 0; t < nj; ++t)
        pool.emplace_back([&, t] {
          auto strat = makeStrategy();
          lnk::Runtime rt(p);
          Local& mine = locals[t];
          for (std::size_t m = t; m < u.sessions.size();
               m += static_cast<std::size_t>(nj)) {
            const auto& members = u.sessions[m];
            std::vector<lnk::Schedule> scheds;
            if (u.schedules == lnk::SessionUniverse::Schedules::kCanonical) {
              lnk::CanonicalOrder ord;
              ord.members = &members;
              scheds.push_back(lnk::canonical_schedule(
                  p, static_cast<int>(members.size()), &ord));
            } else {
              scheds = lnk::enumerate_schedules(
                  p, static_cast<int>(members.size()), u.limit);
            }
            for (auto& sc : scheds) {
              lnk::GlobalSession g{members, std::move(sc)};
              strat->reset();
              lnk::OutcomeKind k = rt.play(g, *strat, nullptr);
              mine.tally.runs += 1;
              if (k == lnk::OutcomeKind::kPrintedMember) {
                mine.tally.member += 1;
              } else {
                if (k == lnk::OutcomeKind::kPrintedNonMember)
                  mine.tally.nonMember += 1;
                else
                  mine.tally.exhausted += 1;
                if (m < mine.failIndex) {
                  mine.failIndex = m;
                  ordered_json f;
                  f["session"] = session_json(p, g);
                  f["outcome"] = k == lnk::OutcomeKind::kPrintedNonMember
                                     ? "printed-non-member"
                                     : "exhausted-without-print";
                  if (k == lnk::OutcomeKind::kPrintedNonMember)
                    f["printed"] = printed_json(p, rt.printed());
                  mine.tally.firstFailure = std::move(f);
                }
              }
            }
          }
        });
      for (auto& w : pool) w.join();
      std::size_t bestFail = SIZE_MAX;
      for (const auto& l : locals) {
        tally.runs += l.tally.runs;
        tally.member += l.tally.member;
        tally.nonMember += l.tally.nonMember;
        tally.exhausted += l.tally.exhausted;
        if (l.failIndex < bestFail) {
          bestFail = l.failIndex;
          tally.firstFailure = l.tally.firstFailure;
        }
      }
    }
  }

  bool allMember = tally.member == tally.runs;
  if (o.json) {
    ordered_json j;
    j["runs"] = tally.runs;
    j["printed_member"] = tally.member;
    j["printed_non_member"] = tally.nonMember;
    j["exhausted_without_print"] = tally.exhausted;
    if (tally.firstFailure) j["first_failure"] = *tally.firstFailure;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << tally.runs << " runs: " << tally.member << " printed-member, "
              << tally.nonMember << " printed-non-member, " << tally.exhausted
              << " exhausted-without-print\n";
    if (tally.firstFailure)
      std::cout << "first failure: " << tally.firstFailure->dump() << "\n";
  }
  return allMember ? 0 : 1;
}

struct TransformOptions {
  std::string file, op, node, target;
  std::string moved, keep;
  bool json = false;
};

int cmd_transform(const TransformOptions& o) {
  lnk::Protocol p = load_protocol(o.file);
  std::optional<lnk::Protocol> out;
  std::optional<std::string> fresh;
  if (o.op == "bypass") {
    out = lnk::bypass(p, o.node, o.target);
  } else if (o.op == "clone") {
    auto [q, n] = lnk::clone_node(p, o.node, split_csv(o.moved));
    out = std::move(q);
    fresh = std::move(n);
  } else if (o.op == "split") {
    auto [q, n] = lnk::split_edge(p, o.node, o.target);
    out = std::move(q);
    fresh = std::move(n);
  } else if (o.op == "unsplit") {
    out = lnk::unsplit(p, o.node);
  } else if (o.op == "remove") {
    out = lnk::remove_removable(p, o.node);
  } else if (o.op == "restrict") {
    out = lnk::restrict_protocol(p, split_csv(o.keep));
  } else if (o.op == "subprotocol") {
    out = lnk::closed_subprotocol(p, split_csv(o.keep));
  } else if (o.op == "layerize") {
    out = lnk::layerize(p);
  } else {
    throw lnk::OpError("unknown transform op: " + o.op);
  }
  if (o.json) {
    ordered_json j;
    j["protocol"] = lnk::serialize_protocol(*out);
    if (fresh) j["new_node"] = *fresh;
    std::cout << j.dump(2) << "\n";
  } else {
    if (fresh) std::cerr << "new node: " << *fresh << "\n";
    std::cout << lnk::serialize_protocol(*out);
  }
  return 0;
}

int cmd_embed_check(const std::string& subFile, const std::string& hostFile,
                    const std::string& mapFile, bool reduce, bool json) {
  lnk::Protocol sub = load_protocol(subFile);
  lnk::Protocol host = load_protocol(hostFile);
  ordered_json m = ordered_json::parse(read_file(mapFile));
  lnk::Embedding e;
  for (const auto& [k, v] : m.at("phi").items()) e.phi[k] = v.get<std::string>();
  for (const auto& [k, v] : m.at("chi").items()) e.chi[k] = v.get<std::string>();
  lnk::EmbeddingCheck chk = lnk::check_embedding(sub, host, e);
  std::optional<std::string> reduced;
  if (chk.ok && reduce)
    reduced = lnk::serialize_protocol(lnk::reduce_via_embedding(host, sub, e));
  if (json) {
    ordered_json j;
    j["ok"] = chk.ok;
    j["violations"] = chk.violations;
    if (reduced) j["reduced"] = *reduced;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << (chk.ok ? "ok" : "violations:") << "\n";
    for (const auto& v : chk.violations) std::cout << "  - " << v << "\n";
    if (reduced) std::cout << *reduced;
  }
  return chk.ok ? 0 : 1;
}

std::array<int8_t, 4> parse_table(const std::string& s, const char* flag) {
  if (s.size() != 4 || s.find_first_not_of("01") != std::string::npos)
    throw lnk::OpError(std::string(flag) +
                       " must be 4 bits for inputs 00,01,10,11 (e.g. 0110)");
  std::array<int8_t, 4> t{};
  for (int i = 0; i < 4; ++i) t[i] = static_cast<int8_t>(s[i] - '0');
  return t;
}

int cmd_oracle_refute(const std::string& file, const std::string& t1s,
                      const std::string& t2s, bool json) {
  lnk::Protocol p = load_protocol(file);
  auto t1 = parse_table(t1s, "--t1");
  auto t2 = parse_table(t2s, "--t2");
  auto [left, right] = lnk::refute_flat_strategy(p, t1, t2);

  // Replay both sessions under the table strategy and compare what the
  // adversary ends up seeing.
  auto f = lnk::as_flat(p);
  lnk::TableStrategy probe;
  probe.proto = &p;
  probe.consistent = true;
  for (int side = 0; side < 2; ++side) {
    auto& tab = probe.tables[f->services[side]];
    const auto& src = side == 0 ? t1 : t2;
    tab[0].assign(src.begin(), src.end());
    tab[1] = tab[0];
  }
  auto finalView = [&](const lnk::GlobalSession& g) {
    probe.reset();
    lnk::RunOutcome out = lnk::run(p, g, probe);
    return lnk::serialize_view(p, lnk::make_view(p, g, out.finalState));
  };
  std::string viewL = finalView(left);
  std::string viewR = finalView(right);
  bool equal = viewL == viewR;
  std::set<std::vector<int8_t>> ml, mr;
  for (const auto& m : left.members) ml.insert(m.values);
  for (const auto& m : right.members) mr.insert(m.values);
  bool disjoint = true;
  for (const auto& v : ml)
    if (mr.count(v)) disjoint = false;

  if (json) {
    ordered_json j;
    j["left"] = session_json(p, left);
    j["right"] = session_json(p, right);
    j["views_equal"] = equal;
    j["members_disjoint"] = disjoint;
    j["view"] = viewL;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "left:  " << session_json(p, left)["members"].dump() << "\n";
    std::cout << "right: " << session_json(p, right)["members"].dump() << "\n";
    std::cout << "views equal: " << (equal ? "yes" : "NO") << "\n";
    std::cout << "members disjoint: " << (disjoint ? "yes" : "NO") << "\n";
  }
  return equal && disjoint ? 0 : 1;
}

struct OracleSearchOptions {
  std::string file, schedule = "canonical";
  int users = 2;
  uint64_t budget = 1ull << 20;
  bool consistent = false;
  bool distinctInputs = false;
  bool json = false;
  int jobs = 1;
  std::optional<std::size_t> limit;
};

int cmd_oracle_search(const OracleSearchOptions& o) {
  lnk::Protocol p = load_protocol(o.file);
  std::optional<lnk::TableStrategy> win;
  if (o.distinctInputs) {
    win = lnk::search_universe(p, lnk::distinct_inputs_universe(p), o.budget,
                               o.consistent, o.jobs);
  } else {
    lnk::AttackBounds b;
    b.users = o.users;
    b.schedules = o.schedule == "exhaustive"
                      ? lnk::SessionUniverse::Schedules::kExhaustive
                      : lnk::SessionUniverse::Schedules::kCanonical;
    b.scheduleLimit = o.limit;
    b.strategyBudget = o.budget;
    b.consistentOnly = o.consistent;
    b.jobs = o.jobs;
    win = lnk::brute_force_attack(p, b);
  }
  if (o.json) {
    ordered_json j;
    if (win) {
      ordered_json tabs;
      for (const auto& [svc, tab] : win->tables) {
        ordered_json t;
        t["first"] = std::vector<int>(tab[0].begin(), tab[0].end());
        t["later"] = std::vector<int>(tab[1].begin(), tab[1].end());
        tabs[p.name(svc)] = std::move(t);
      }
      j["tables"] = std::move(tabs);
      j["print_classes"] = win->printRule.size();
    } else {
      j["result"] = "none";
    }
    std::cout << j.dump(2) << "\n";
  } else if (win) {
    for (const auto& [svc, tab] : win->tables) {
      std::cout << p.name(svc) << " first:";
      for (int8_t b : tab[0]) std::cout << ' ' << static_cast<int>(b);
      std::cout << "  later:";
      for (int8_t b : tab[1]) std::cout << ' ' << static_cast<int>(b);
      std::cout << "\n";
    }
    std::cout << win->printRule.size() << " final-view print classes\n";
  } else {
    std::cout << "none\n";
  }
  return 0;
}

struct OracleVerifyOptions {
  std::string file, strategy = "tracking", schedule = "canonical";
  int users = 2;
  bool consistent = false;
  bool json = false;
  std::optional<std::size_t> limit;
};

int cmd_oracle_verify(const OracleVerifyOptions& o) {
  lnk::Protocol p = load_protocol(o.file);
  std::unique_ptr<lnk::Strategy> strat;
  if (o.strategy == "tracking") {
    auto ts = lnk::find_tracking_strategy(p);
    if (!ts) throw lnk::OpError(o.file + ": no tracking strategy exists to verify");
    strat = lnk::build_tracking_runner(p, *ts, o.consistent);
  } else if (o.strategy == "never-print") {
    strat = std::make_unique<lnk::NeverPrintStrategy>();
  } else {
    throw lnk::OpError("unknown strategy: " + o.strategy);
  }
  lnk::SessionUniverse u = lnk::bounded_universe(
      p, o.users,
      o.schedule == "exhaustive" ? lnk::SessionUniverse::Schedules::kExhaustive
                                 : lnk::SessionUniverse::Schedules::kCanonical,
      o.limit);
  auto cx = lnk::verify_strategy(p, *strat, u);
  if (o.json) {
    ordered_json j;
    if (cx) {
      j["result"] = "counterexample";
      j["session"] = session_json(p, *cx);
      j["transcript"] = ordered_json::array();
      auto& arr = j["transcript"];
      lnk::TraceSink sink = [&](const lnk::TraceEvent& ev) {
        ordered_json t;
        t["clock"] = ev.clock;
        switch (ev.kind) {
          case lnk::TraceEvent::kQuery: {
            t["action"] = "query";
            t["service"] = p.name(ev.service);
            t["user"] = ev.user;
            ordered_json in = ordered_json::array();
            for (int8_t b : *ev.inputs) in.push_back(static_cast<int>(b));
            t["inputs"] = std::move(in);
            break;
          }
          case lnk::TraceEvent::kReply:
            t["action"] = "reply";
            t["service"] = p.name(ev.service);
            t["bit"] = ev.bit;
            break;
          case lnk::TraceEvent::kPrint:
            t["action"] = "print";
            t["printed"] = printed_json(p, *ev.printed);
            break;
        }
        arr.push_back(std::move(t));
      };
      strat->reset();
      lnk::run(p, *cx, *strat, &sink);
    } else {
      j["result"] = "ok";
    }
    std::cout << j.dump(2) << "\n";
  } else if (cx) {
    std::cout << "counterexample: " << session_json(p, *cx).dump() << "\n";
  } else {
    std::cout << "ok\n";
  }
  return cx ? 1 : 0;
}

int cmd_export(const std::string& file, const std::string& format) {
  lnk::Protocol p = load_protocol(file);
  if (format == "dot")
    std::cout << lnk::export_dot(p);
  else if (format == "json")
    std::cout << lnk::protocol_to_json(p) << "\n";
  else
    throw lnk::OpError("unknown export format: " + format);
  return 0;
}

int cmd_corpus(const std::string& action, const std::string& dir, bool json) {
  if (action == "list") {
    ordered_json j = ordered_json::array();
    for (const auto& e : lnk::corpus()) {
      if (json) {
        j.push_back({{"name", e.name}, {"nodes", e.nodes}, {"edges", e.edges}});
      } else {
        std::cout << e.name << ": " << e.nodes << " nodes, " << e.edges
                  << " edges\n";
      }
    }
    if (json) std::cout << j.dump(2) << "\n";
    return 0;
  }
  if (action == "write") {
    for (const auto& e : lnk::corpus()) {
      std::ofstream out(dir + "/" + e.name + ".lnk", std::ios::binary);
      if (!out) throw lnk::OpError("cannot write " + dir + "/" + e.name + ".lnk");
      out << e.text;
    }
    return 0;
  }
  if (action != "check") throw lnk::OpError("unknown corpus action: " + action);
  bool ok = true;
  ordered_json report = ordered_json::array();
  for (const auto& e : lnk::corpus()) {
    std::string status = "ok";
    try {
      lnk::Protocol p = lnk::parse_protocol(e.text);
      if (p.node_count() != e.nodes ||
          static_cast<int>(p.edges().size()) != e.edges)
        status = "node/edge counts drifted";
      std::string path = dir + "/" + e.name + ".lnk";
      std::ifstream in(path, std::ios::binary);
      if (!in) {
        status = "missing file " + path;
      } else {
        std::ostringstream ss;
        ss << in.rdbuf();
        if (ss.str() != e.text) status = "file differs from the embedded text";
      }
    } catch (const std::exception& ex) {
      status = ex.what();
    }
    if (status != "ok") ok = false;
    if (json)
      report.push_back({{"name", e.name}, {"status", status}});
    else
      std::cout << e.name << ": " << status << "\n";
  }
  if (json) std::cout << report.dump(2) << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protocol linkability analysis"};
  app.require_subcommand(1);

  std::string xr;
  bool json = false;

  auto* analyze = app.add_subcommand("analyze", "security verdict for a protocol");
  std::string analyzeFile;
  analyze->add_option("file", analyzeFile, "protocol file (.lnk)")->required();
  analyze->add_option("--xr", xr, "restrict to these variables (comma-separated)");
  analyze->add_flag("--json", json, "JSON output");

  auto* track = app.add_subcommand("track", "synthesize a tracking strategy");
  std::string trackFile;
  track->add_option("file", trackFile, "protocol file (.lnk)")->required();
  track->add_flag("--json", json, "JSON output");

  SimOptions sim;
  auto* simulate = app.add_subcommand("simulate", "run a strategy over sessions");
  simulate->add_option("file", sim.file, "protocol file (.lnk)")->required();
  simulate->add_option("--strategy", sim.strategy, "tracking | never-print");
  simulate->add_option("--users", sim.users, "member count bound");
  simulate->add_option("--schedule", sim.schedule, "canonical | exhaustive");
  simulate->add_option("--sessions", sim.sessions,
                       "random sessions instead of the bounded universe");
  auto* seedOpt = simulate->add_option("--seed", sim.seed, "random seed");
  simulate->add_flag("--consistent", sim.consistent,
                     "consistent synchronizer variant");
  simulate->add_flag("--trace", sim.trace, "JSONL event trace on stdout");
  simulate->add_option("--jobs", sim.jobs, "worker threads");
  std::size_t simLimit = 0;
  auto* simLimitOpt =
      simulate->add_option("--limit", simLimit, "cap on schedules per session");
  simulate->add_flag("--json", sim.json, "JSON output");

  TransformOptions tr;
  auto* transform = app.add_subcommand("transform", "apply a graph rewrite");
  transform->add_option("file", tr.file, "protocol file (.lnk)")->required();
  transform->add_option("--op", tr.op,
                        "bypass|clone|split|unsplit|remove|restrict|subprotocol|layerize")
      ->required();
  transform->add_option("--node", tr.node, "primary node argument");
  transform->add_option("--target", tr.target, "edge target (bypass, split)");
  transform->add_option("--moved", tr.moved, "successors moved to the clone");
  transform->add_option("--keep", tr.keep,
                        "variables (restrict) or nodes (subprotocol) to keep");
  transform->add_flag("--json", tr.json, "JSON output");

  auto* embed = app.add_subcommand("embed-check", "verify an embedding");
  std::string embSub, embHost, embMap;
  bool embReduce = false;
  embed->add_option("sub", embSub, "sub-protocol file")->required();
  embed->add_option("host", embHost, "host protocol file")->required();
  embed->add_option("map", embMap, "JSON file with phi and chi")->required();
  embed->add_flag("--reduce", embReduce, "also reduce the host to the image");
  embed->add_flag("--json", json, "JSON output");

  auto* oracle = app.add_subcommand("oracle", "bounded brute-force ground truth");
  oracle->require_subcommand(1);
  std::string refuteFile, refuteT1, refuteT2;
  auto* refute = oracle->add_subcommand(
      "refute", "indistinguishable session pair for reply tables");
  refute->add_option("file", refuteFile, "two-service flat protocol")->required();
  refute->add_option("--t1", refuteT1, "first service table, 4 bits")->required();
  refute->add_option("--t2", refuteT2, "second service table, 4 bits")->required();
  refute->add_flag("--json", json, "JSON output");

  OracleSearchOptions osearch;
  auto* search = oracle->add_subcommand("search", "enumerate reply tables");
  search->add_option("file", osearch.file, "protocol file (.lnk)")->required();
  search->add_option("--users", osearch.users, "member count bound");
  search->add_option("--schedule", osearch.schedule, "canonical | exhaustive");
  search->add_option("--budget", osearch.budget, "strategy count budget");
  search->add_flag("--consistent", osearch.consistent, "consistent tables only");
  search->add_flag("--distinct-inputs", osearch.distinctInputs,
                   "4-user distinct-inputs family instead of the bounded universe");
  search->add_option("--jobs", osearch.jobs, "worker threads");
  std::size_t searchLimit = 0;
  auto* searchLimitOpt =
      search->add_option("--limit", searchLimit, "cap on schedules per session");
  search->add_flag("--json", osearch.json, "JSON output");

  OracleVerifyOptions overify;
  auto* verify = oracle->add_subcommand("verify", "check a strategy exhaustively");
  verify->add_option("file", overify.file, "protocol file (.lnk)")->required();
  verify->add_option("--strategy", overify.strategy, "tracking | never-print");
  verify->add_option("--users", overify.users, "member count bound");
  verify->add_option("--schedule", overify.schedule, "canonical | exhaustive");
  verify->add_flag("--consistent", overify.consistent,
                   "consistent synchronizer variant");
  std::size_t verifyLimit = 0;
  auto* verifyLimitOpt =
      verify->add_option("--limit", verifyLimit, "cap on schedules per session");
  verify->add_flag("--json", json, "JSON output");

  auto* exportCmd = app.add_subcommand("export", "emit dot or json");
  std::string exportFile, exportFormat = "dot";
  exportCmd->add_option("file", exportFile, "protocol file (.lnk)")->required();
  exportCmd->add_option("--format", exportFormat, "dot | json");

  auto* corpusCmd = app.add_subcommand("corpus", "shipped example protocols");
  std::string corpusAction = "list", corpusDir = "corpus";
  corpusCmd->add_option("action", corpusAction, "list | check | write");
  corpusCmd->add_option("--dir", corpusDir, "corpus directory");
  corpusCmd->add_flag("--json", json, "JSON output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(analyze)) return cmd_analyze(analyzeFile, xr, json);
    if (app.got_subcommand(track)) return cmd_track(trackFile, json);
    if (app.got_subcommand(simulate)) {
      sim.seedSet = seedOpt->count() > 0;
      if (simLimitOpt->count() > 0) sim.limit = simLimit;
      return cmd_simulate(sim);
    }
    if (app.got_subcommand(transform)) return cmd_transform(tr);
    if (app.got_subcommand(embed))
      return cmd_embed_check(embSub, embHost, embMap, embReduce, json);
    if (app.got_subcommand(oracle)) {
      if (oracle->got_subcommand(refute))
        return cmd_oracle_refute(refuteFile, refuteT1, refuteT2, json);
      if (oracle->got_subcommand(search)) {
        if (searchLimitOpt->count() > 0) osearch.limit = searchLimit;
        return cmd_oracle_search(osearch);
      }
      if (oracle->got_subcommand(verify)) {
        overify.json = json;
        if (verifyLimitOpt->count() > 0) overify.limit = verifyLimit;
        return cmd_oracle_verify(overify);
      }
    }
    if (app.got_subcommand(exportCmd)) return cmd_export(exportFile, exportFormat);
    if (app.got_subcommand(corpusCmd))
      return cmd_corpus(corpusAction, corpusDir, json);
  } catch (const lnk::OpError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const lnk::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const lnk::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
