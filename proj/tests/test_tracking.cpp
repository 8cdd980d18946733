#include <string>

#include "doctest.h"
#include "lnk/corpus.hpp"
#include "lnk/execution.hpp"
#include "lnk/tracking.hpp"
#include "oracles.hpp"

using namespace lnk;

namespace {

bool mentions(const std::vector<std::string>& vs, const std::string& part) {
  for (const auto& v : vs)
    if (v.find(part) != std::string::npos) return true;
  return false;
}

// Random flat protocol: services over random nonempty variable subsets, a
// fresh root, every variable wired to at least one service.
ProtocolData random_flat(std::mt19937_64& rng) {
  int vars = 2 + static_cast<int>(rng() % 4);
  int svcs = 1 + static_cast<int>(rng() % 4);
  ProtocolData d;
  d.name = "fp";
  for (int i = 0; i < vars; ++i)
    d.nodes.push_back({"x" + std::to_string(i), NodeKind::kVariable});
  for (int i = 0; i < svcs; ++i)
    d.nodes.push_back({"f" + std::to_string(i), NodeKind::kService});
  d.nodes.push_back({"g", NodeKind::kService});
  std::vector<char> fed(vars, 0);
  for (int s = 0; s < svcs; ++s) {
    bool any = false;
    for (int v = 0; v < vars; ++v)
      if (rng() % 100 < 45) {
        d.edges.push_back({"x" + std::to_string(v), "f" + std::to_string(s)});
        fed[v] = 1;
        any = true;
      }
    if (!any) {
      int v = static_cast<int>(rng() % vars);
      d.edges.push_back({"x" + std::to_string(v), "f" + std::to_string(s)});
      fed[v] = 1;
    }
  }
  for (int v = 0; v < vars; ++v)
    if (!fed[v])
      d.edges.push_back(
          {"x" + std::to_string(v), "f" + std::to_string(rng() % svcs)});
  for (int s = 0; s < svcs; ++s)
    d.edges.push_back({"f" + std::to_string(s), "g"});
  return d;
}

}  // namespace

TEST_CASE("forward closure walks successors in id order") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  CHECK(closure(p, {"t_init"}) ==
        std::vector<std::string>{"t_init", "f1", "f2", "g"});
  CHECK(closure(p, {"g"}) == std::vector<std::string>{"g"});
  CHECK(closure(p, {"w"}) == std::vector<std::string>{"w", "f1", "g"});
}

TEST_CASE("synthesis matches the corpus security folklore") {
  struct Row {
    const char* entry;
    bool exists;
  };
  const Row rows[] = {
      {"fig2_tau_ex", true},  {"fig3_nosync", false}, {"fig4_sync", true},
      {"fig9_tau_sec", false}, {"fig10_tau_insec", true},
      {"fig1_private_vars", false},
  };
  for (const auto& r : rows) {
    Protocol p = lnk::corpus_protocol(r.entry);
    auto ts = find_tracking_strategy(p);
    CHECK_MESSAGE(ts.has_value() == r.exists, r.entry);
    CHECK_MESSAGE(ref::tracking_exists(p) == r.exists, r.entry);
    if (ts) CHECK_MESSAGE(check_tracking_strategy(p, *ts).ok, r.entry);
  }

  auto fig4 = find_tracking_strategy(lnk::corpus_protocol("fig4_sync"));
  REQUIRE(fig4.has_value());
  CHECK(fig4->tInit == "t_init");
  for (const char* n : {"t_init", "f1", "f2"})
    CHECK(std::count(fig4->tracked.begin(), fig4->tracked.end(), n) == 1);
  CHECK(fig4->forwardPaths.at("w") == std::vector<std::string>{"w", "f1"});
  CHECK(fig4->forwardPaths.at("z") == std::vector<std::string>{"z", "f2"});

  // The two synchronizer-free services cannot both cover their second
  // variable, so the detector must settle on f2.
  auto fig10 = find_tracking_strategy(lnk::corpus_protocol("fig10_tau_insec"));
  REQUIRE(fig10.has_value());
  CHECK(fig10->tInit == "f2");
}

TEST_CASE("strategy validation pinpoints each broken condition") {
  Protocol p = lnk::corpus_protocol("fig4_sync");

  TrackingStrategy good;
  good.tInit = "t_init";
  good.tracked = {"t_init", "f1", "f2"};  // closure adds g
  good.forwardPaths = {{"w", {"w", "f1"}},
                       {"x", {"x", "t_init"}},
                       {"y", {"y", "t_init"}},
                       {"z", {"z", "f2"}}};
  CHECK(check_tracking_strategy(p, good).ok);

  TrackingStrategy varInit = good;
  varInit.tInit = "w";
  auto c = check_tracking_strategy(p, varInit);
  CHECK(!c.ok);
  CHECK(mentions(c.violations, "is not a service"));

  TrackingStrategy unlisted = good;
  unlisted.tracked = {"f1", "f2"};
  c = check_tracking_strategy(p, unlisted);
  CHECK(!c.ok);
  CHECK(mentions(c.violations, "outside the tracked set"));

  TrackingStrategy unreachable = good;
  unreachable.tInit = "f1";
  unreachable.tracked = {"f1", "f2"};
  c = check_tracking_strategy(p, unreachable);
  CHECK(!c.ok);
  CHECK(mentions(c.violations, "does not reach"));

  TrackingStrategy uncovered = good;
  uncovered.forwardPaths.erase("z");
  c = check_tracking_strategy(p, uncovered);
  CHECK(!c.ok);
  CHECK(mentions(c.violations, "z uncovered"));

  TrackingStrategy gap = good;
  gap.forwardPaths["w"] = {"w", "f2"};
  c = check_tracking_strategy(p, gap);
  CHECK(!c.ok);
  CHECK(mentions(c.violations, "missing edge"));

  TrackingStrategy stray = good;
  stray.forwardPaths["w"] = {"w"};
  c = check_tracking_strategy(p, stray);
  CHECK(!c.ok);
  CHECK(mentions(c.violations, "does not end in the tracked set"));

  // Two paths sharing an untracked node.
  Protocol q = parse_protocol(
      "protocol q{var a,b; node m(a,b); node t(a); node r(t,m);}");
  TrackingStrategy overlap;
  overlap.tInit = "t";
  overlap.tracked = {"t", "r"};
  overlap.forwardPaths = {{"a", {"a", "m", "r"}}, {"b", {"b", "m", "r"}}};
  c = check_tracking_strategy(q, overlap);
  CHECK(!c.ok);
  CHECK(mentions(c.violations, "overlap at m"));
}

TEST_CASE("flow detection agrees with the backtracking oracle on random graphs") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 150; ++i) {
    Protocol p = Protocol::seal(ref::random_dag(rng, 8));
    auto ts = find_tracking_strategy(p);
    bool expected = ref::tracking_exists(p);
    REQUIRE_MESSAGE(ts.has_value() == expected, serialize_protocol(p));
    if (ts)
      REQUIRE_MESSAGE(check_tracking_strategy(p, *ts).ok, serialize_protocol(p));
  }
}

TEST_CASE("flat cover maps coincide with general synthesis on flat protocols") {
  Protocol ft = parse_protocol(
      "protocol ft{var a,b,c; node f1(a,b); node f2(b,c); node g(f1,f2);}");
  auto cover = flat_tracking(ft);
  REQUIRE(cover.has_value());
  TrackingStrategy ts = to_tracking(ft, *cover);
  CHECK(check_tracking_strategy(ft, ts).ok);

  CHECK(!flat_tracking(lnk::corpus_protocol("fig3_nosync")).has_value());
  CHECK(!flat_tracking(lnk::corpus_protocol("fig1_private_vars")).has_value());
  CHECK_THROWS_AS(flat_tracking(lnk::corpus_protocol("fig4_sync")), OpError);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 120; ++i) {
    Protocol p = Protocol::seal(random_flat(rng));
    auto fc = flat_tracking(p);
    auto any = find_tracking_strategy(p);
    REQUIRE_MESSAGE(fc.has_value() == any.has_value(), serialize_protocol(p));
    if (fc)
      REQUIRE_MESSAGE(check_tracking_strategy(p, to_tracking(p, *fc)).ok,
                      serialize_protocol(p));
  }
}

TEST_CASE("the runner issues exactly one zero at the synchronizer") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  auto ts = find_tracking_strategy(p);
  REQUIRE(ts.has_value());
  auto runner = build_tracking_runner(p, *ts);
  int tInit = p.require("t_init");

  std::mt19937_64 rng(17);
  auto schedules = enumerate_schedules(p, 2);
  for (int i = 0; i < 40; ++i) {
    GlobalSession g;
    for (int u = 0; u < 2; ++u) {
      LocalSession ls(p.node_count());
      for (int v : p.variables()) ls.set(v, static_cast<int>(rng() & 1));
      g.members.push_back(std::move(ls));
    }
    g.schedule = schedules[rng() % schedules.size()];
    runner->reset();
    RunOutcome out = run(p, g, *runner);
    CHECK(out.kind == OutcomeKind::kPrintedMember);
    int zeros = 0;
    for (const auto& h : out.finalState.history)
      if (h.service == tInit && h.reply == 0) ++zeros;
    CHECK(zeros == 1);
  }
}

TEST_CASE("path interiors forward the tracked variable verbatim") {
  Protocol p = parse_protocol(
      "protocol fwd{var x,y; node t(x); node m(y); node g(t,m);}");
  auto ts = find_tracking_strategy(p);
  REQUIRE(ts.has_value());
  CHECK(ts->tInit == "t");
  CHECK(ts->forwardPaths.at("y") == std::vector<std::string>{"y", "m", "g"});

  auto runner = build_tracking_runner(p, *ts);
  int m = p.require("m"), y = p.require("y");
  for (int bits = 0; bits < 16; ++bits) {
    GlobalSession g;
    for (int u = 0; u < 2; ++u) {
      LocalSession ls(p.node_count());
      ls.set(p.require("x"), bits >> (2 * u) & 1);
      ls.set(y, bits >> (2 * u + 1) & 1);
      g.members.push_back(std::move(ls));
    }
    for (auto& sched : enumerate_schedules(p, 2)) {
      g.schedule = sched;
      runner->reset();
      RunOutcome out = run(p, g, *runner);
      CHECK(out.kind == OutcomeKind::kPrintedMember);
      for (const auto& h : out.finalState.history)
        if (h.service == m)
          CHECK(h.reply == g.members[h.user - 1].bit(y));
    }
  }
}

TEST_CASE("the runner refuses strategies naming unknown nodes") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  TrackingStrategy bogus;
  bogus.tInit = "phantom";
  bogus.tracked = {"phantom"};
  CHECK_THROWS_AS(build_tracking_runner(p, bogus), OpError);
}
