#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lnk/corpus.hpp"
#include "lnk/protocol.hpp"
#include "oracles.hpp"

using lnk::NodeKind;
using lnk::Protocol;
using lnk::ProtocolData;

namespace {

bool same_data(const ProtocolData& a, const ProtocolData& b) {
  return a.name == b.name && a.nodes == b.nodes && a.edges == b.edges;
}

bool has_violation(const std::vector<lnk::Violation>& vs, const std::string& inv) {
  for (const auto& v : vs)
    if (v.invariant == inv) return true;
  return false;
}

}  // namespace

TEST_CASE("corpus entries parse and match their counts") {
  REQUIRE(lnk::corpus().size() == 6);
  for (const auto& e : lnk::corpus()) {
    Protocol p = lnk::parse_protocol(e.text);
    CHECK(p.node_count() == e.nodes);
    CHECK(static_cast<int>(p.edges().size()) == e.edges);
    CHECK(same_data(p.data(), lnk::corpus_protocol(e.name).data()));
  }
  CHECK_THROWS_AS(lnk::corpus_entry("fig11"), lnk::OpError);
}

TEST_CASE("shipped corpus files are byte-identical to the embedded texts") {
  for (const auto& e : lnk::corpus()) {
    std::ifstream in(std::string(CORPUS_DIR) + "/" + e.name + ".lnk",
                     std::ios::binary);
    REQUIRE_MESSAGE(bool(in), e.name);
    std::ostringstream ss;
    ss << in.rdbuf();
    CHECK_MESSAGE(ss.str() == e.text, e.name);
  }
}

TEST_CASE("reaches agrees with a matrix-closure oracle") {
  std::mt19937_64 rng(7);
  std::vector<Protocol> samples;
  for (const auto& e : lnk::corpus()) samples.push_back(lnk::corpus_protocol(e.name));
  for (int i = 0; i < 30; ++i)
    samples.push_back(Protocol::seal(ref::random_dag(rng, 10)));
  for (const auto& p : samples) {
    auto row = ref::reach_matrix(p);
    for (int u = 0; u < p.node_count(); ++u)
      for (int v = 0; v < p.node_count(); ++v)
        CHECK(lnk::reaches(p, u, v) == bool(row[u] >> v & 1));
  }
}

TEST_CASE("topological order is valid and prefers small declaration indices") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  const auto& topo = p.topo_order();
  REQUIRE(static_cast<int>(topo.size()) == p.node_count());
  std::vector<int> pos(p.node_count());
  for (int i = 0; i < p.node_count(); ++i) pos[topo[i]] = i;
  for (auto [u, v] : p.edges()) CHECK(pos[u] < pos[v]);
  // fig4 is declared in topological order already, so Kahn with a min-heap
  // must return the identity.
  for (int i = 0; i < p.node_count(); ++i) CHECK(topo[i] == i);
}

TEST_CASE("adjacency accessors") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  int w = p.require("w"), t = p.require("t_init"), f1 = p.require("f1");
  int g = p.require("g");
  CHECK(p.find("nope") == std::nullopt);
  CHECK_THROWS_AS(p.require("nope"), lnk::OpError);
  CHECK(p.preds(f1) == std::vector<int>{w, t});
  CHECK(p.pred_position(f1, t) == 1);
  CHECK(p.pred_position(f1, g) == -1);
  CHECK(p.has_edge(w, f1));
  CHECK(!p.has_edge(f1, w));
  CHECK(p.variables().size() == 4);
  CHECK(p.services().size() == 4);
  CHECK(lnk::root(p) == g);
  CHECK(lnk::output_nodes(p) == std::vector<int>{g});
  CHECK(lnk::depth(p) == 3);
  auto vg = lnk::vars_of(p, g);
  CHECK(vg.size() == 4);
  auto vf1 = lnk::vars_of(p, f1);
  CHECK(vf1.size() == 3);  // w, x, y
}

TEST_CASE("flat form detection") {
  Protocol fig3 = lnk::corpus_protocol("fig3_nosync");
  auto f = lnk::as_flat(fig3);
  REQUIRE(f.has_value());
  CHECK(fig3.name(f->root) == "g");
  REQUIRE(f->services.size() == 2);
  CHECK(fig3.name(f->services[0]) == "f1");
  CHECK(fig3.name(f->services[1]) == "f2");
  CHECK(f->args[0] == std::vector<int>{fig3.require("x"), fig3.require("y")});

  // A variable feeding the root disqualifies the shape.
  CHECK(!lnk::as_flat(lnk::corpus_protocol("fig2_tau_ex")).has_value());
  // A service feeding a non-root service does too.
  CHECK(!lnk::as_flat(lnk::corpus_protocol("fig4_sync")).has_value());
  CHECK(!lnk::as_flat(lnk::corpus_protocol("fig9_tau_sec")).has_value());
  CHECK(lnk::as_flat(lnk::corpus_protocol("fig1_private_vars")).has_value());
}

TEST_CASE("layered form detection") {
  Protocol fig3 = lnk::corpus_protocol("fig3_nosync");
  auto lf = lnk::as_layered(fig3);
  REQUIRE(lf.has_value());
  REQUIRE(lf->layers.size() == 3);
  CHECK(lf->layers[0] == std::vector<int>{fig3.require("g")});
  CHECK(lf->layers[1].size() == 2);
  CHECK(lf->layers[2].size() == 4);

  CHECK(!lnk::as_layered(lnk::corpus_protocol("fig4_sync")).has_value());
  CHECK(!lnk::as_layered(lnk::corpus_protocol("fig2_tau_ex")).has_value());
}

TEST_CASE("layerize inserts exactly the pass-throughs the level audit demands") {
  struct Row {
    const char* entry;
    int inserts;
  };
  // Frozen counts, audited against the longest-path labeling: fig4's w and z
  // each skip one level, fig2's address skips one.
  const Row rows[] = {{"fig4_sync", 2}, {"fig2_tau_ex", 1}, {"fig3_nosync", 0}};
  for (const auto& r : rows) {
    Protocol p = lnk::corpus_protocol(r.entry);
    CHECK(ref::layering_inserts(p) == r.inserts);
    Protocol lp = lnk::layerize(p);
    CHECK(lp.node_count() == p.node_count() + r.inserts);
    CHECK(lnk::as_layered(lp).has_value());
    for (int i = 0; i < p.node_count(); ++i)
      CHECK(lp.find(p.name(i)).has_value());
  }
}

TEST_CASE("layerize output is layered on random graphs") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 40; ++i) {
    Protocol p = Protocol::seal(ref::random_dag(rng, 10));
    Protocol lp = lnk::layerize(p);
    CHECK(lnk::as_layered(lp).has_value());
    CHECK(lp.node_count() == p.node_count() + ref::layering_inserts(p));
  }
}

TEST_CASE("restrict keeps the chosen variables and drops the rest") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  Protocol r = lnk::restrict_protocol(p, {"w", "z"});
  CHECK(r.node_count() == 6);
  CHECK(r.edges().size() == 6);
  CHECK(!r.find("x").has_value());
  CHECK(r.find("t_init").has_value());  // services survive losing inputs

  Protocol all = lnk::restrict_protocol(p, {"w", "x", "y", "z"});
  CHECK(same_data(all.data(), p.data()));

  CHECK_THROWS_AS(lnk::restrict_protocol(p, {}), lnk::OpError);
  CHECK_THROWS_AS(lnk::restrict_protocol(p, {"f1"}), lnk::OpError);
  CHECK_THROWS_AS(lnk::restrict_protocol(p, {"ghost"}), lnk::OpError);
}

TEST_CASE("DSL serialize then parse is the identity") {
  std::mt19937_64 rng(3);
  std::vector<Protocol> samples;
  for (const auto& e : lnk::corpus()) samples.push_back(lnk::corpus_protocol(e.name));
  for (int i = 0; i < 25; ++i)
    samples.push_back(Protocol::seal(ref::random_dag(rng, 12)));
  for (const auto& p : samples) {
    Protocol q = lnk::parse_protocol(lnk::serialize_protocol(p));
    CHECK(same_data(p.data(), q.data()));
  }
}

TEST_CASE("json serialize then parse is the identity") {
  std::mt19937_64 rng(4);
  std::vector<Protocol> samples;
  for (const auto& e : lnk::corpus()) samples.push_back(lnk::corpus_protocol(e.name));
  for (int i = 0; i < 10; ++i)
    samples.push_back(Protocol::seal(ref::random_dag(rng, 12)));
  for (const auto& p : samples) {
    Protocol q = lnk::protocol_from_json(lnk::protocol_to_json(p));
    CHECK(same_data(p.data(), q.data()));
  }
}

TEST_CASE("dot export lists every node and edge") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  std::string dot = lnk::export_dot(p);
  CHECK(dot.find("digraph") != std::string::npos);
  std::size_t boxes = 0, arrows = 0;
  for (std::size_t at = dot.find("shape=box"); at != std::string::npos;
       at = dot.find("shape=box", at + 1))
    ++boxes;
  for (std::size_t at = dot.find("->"); at != std::string::npos;
       at = dot.find("->", at + 1))
    ++arrows;
  CHECK(boxes == p.variables().size());
  CHECK(arrows == p.edges().size());
}

TEST_CASE("parse errors carry a position") {
  try {
    lnk::parse_protocol("protocol p{var x; node f(x)");
    FAIL("expected a parse error");
  } catch (const lnk::ParseError& e) {
    CHECK(e.line >= 1);
    CHECK(e.col >= 1);
  }
  CHECK_THROWS_AS(lnk::parse_protocol("protocol p{var x; node f(%x)}"),
                  lnk::ParseError);
  CHECK_THROWS_AS(lnk::parse_protocol(""), lnk::ParseError);
}

TEST_CASE("validation names the broken invariant") {
  ProtocolData cyc;
  cyc.name = "c";
  cyc.nodes = {{"x", NodeKind::kVariable},
               {"a", NodeKind::kService},
               {"b", NodeKind::kService}};
  cyc.edges = {{"x", "a"}, {"a", "b"}, {"b", "a"}};
  CHECK(has_violation(lnk::validate(cyc), "cycle"));
  CHECK_THROWS_AS(Protocol::seal(cyc), lnk::ValidationError);

  ProtocolData novars;
  novars.name = "n";
  novars.nodes = {{"a", NodeKind::kService}};
  CHECK(has_violation(lnk::validate(novars), "empty Vars"));

  ProtocolData dangling;
  dangling.name = "d";
  dangling.nodes = {{"x", NodeKind::kVariable}, {"a", NodeKind::kService}};
  dangling.edges = {{"ghost", "a"}};
  CHECK(has_violation(lnk::validate(dangling), "dangling edge"));

  ProtocolData varin;
  varin.name = "v";
  varin.nodes = {{"x", NodeKind::kVariable}, {"y", NodeKind::kVariable},
                 {"a", NodeKind::kService}};
  varin.edges = {{"a", "y"}, {"x", "a"}};
  CHECK(has_violation(lnk::validate(varin), "variable with in-edge"));
  // The cycle check must not mask it.
  CHECK(!has_violation(lnk::validate(varin), "cycle"));

  ProtocolData dup;
  dup.name = "d";
  dup.nodes = {{"x", NodeKind::kVariable}, {"x", NodeKind::kService}};
  CHECK(has_violation(lnk::validate(dup), "duplicate name"));

  ProtocolData badname;
  badname.name = "1bad";
  badname.nodes = {{"x", NodeKind::kVariable}};
  CHECK(has_violation(lnk::validate(badname), "invalid name"));

  CHECK(lnk::validate(lnk::corpus_protocol("fig4_sync").data()).empty());

  try {
    lnk::parse_protocol("protocol p{var x,x;}");
    FAIL("expected a validation error");
  } catch (const lnk::ValidationError& e) {
    CHECK(std::string(e.what()).find("duplicate name") != std::string::npos);
  }
}

TEST_CASE("fresh_name appends the first unused counter") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  CHECK(lnk::fresh_name(p, "q") == "q1");
  CHECK(lnk::fresh_name(p, "t_init") == "t_init1");
}

TEST_CASE("isomorphism is name-insensitive and kind-preserving") {
  Protocol fig3 = lnk::corpus_protocol("fig3_nosync");
  Protocol renamed = lnk::parse_protocol(
      "protocol other{var a,b,c,d; node left(a,b); node right(c,d); "
      "node top(left,right);}");
  CHECK(lnk::isomorphic(fig3, renamed));
  CHECK(lnk::isomorphic(renamed, fig3));
  CHECK(!lnk::isomorphic(fig3, lnk::corpus_protocol("fig4_sync")));
  CHECK(!lnk::isomorphic(fig3, lnk::corpus_protocol("fig9_tau_sec")));

  // Same degree profile, different wiring: a chain versus a fork.
  Protocol chain = lnk::parse_protocol(
      "protocol c{var x; node a(x); node b(a); node d(b);}");
  Protocol fork = lnk::parse_protocol(
      "protocol f{var x; node a(x); node b(a); node d(a);}");
  CHECK(!lnk::isomorphic(chain, fork));
}
