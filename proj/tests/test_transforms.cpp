#include <string>

#include "doctest.h"
#include "lnk/corpus.hpp"
#include "lnk/transforms.hpp"
#include "oracles.hpp"

using namespace lnk;

namespace {

bool mentions(const std::vector<std::string>& vs, const std::string& part) {
  for (const auto& v : vs)
    if (v.find(part) != std::string::npos) return true;
  return false;
}

std::vector<std::string> pred_names(const Protocol& p, const std::string& n) {
  std::vector<std::string> out;
  for (int q : p.preds(p.require(n))) out.push_back(p.name(q));
  return out;
}

// Name-identity embedding: phi on every sub node, chi on the variables.
Embedding identity_embedding(const Protocol& sub) {
  Embedding e;
  for (int i = 0; i < sub.node_count(); ++i) e.phi[sub.name(i)] = sub.name(i);
  for (int v : sub.variables()) e.chi[sub.name(v)] = sub.name(v);
  return e;
}

}  // namespace

TEST_CASE("bypass splices the skipped node's inputs into place") {
  Protocol p = lnk::corpus_protocol("fig9_tau_sec");
  Protocol q = bypass(p, "f3", "g");
  CHECK(q.node_count() == p.node_count());
  CHECK(pred_names(q, "g") == std::vector<std::string>{"f1", "f2"});
  CHECK(q.succs(q.require("f3")).empty());

  CHECK_THROWS_AS(bypass(p, "f1", "f2"), OpError);  // no such edge
  CHECK_THROWS_AS(bypass(p, "x", "f1"), OpError);   // variables cannot be bypassed

  // Now f3 is removable, with the root as its witness.
  Protocol r = remove_removable(q, "f3");
  CHECK(lnk::isomorphic(r, lnk::corpus_protocol("fig3_nosync")));
}

TEST_CASE("cloning with nothing moved is undone by removal") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 60; ++i) {
    Protocol p = Protocol::seal(ref::random_dag(rng, 12, true));
    const auto& svcs = p.services();
    std::string v = p.name(svcs[rng() % svcs.size()]);
    auto [q, cloneName] = clone_node(p, v, {});
    CHECK(q.node_count() == p.node_count() + 1);
    CHECK(pred_names(q, cloneName) == pred_names(q, v));
    CHECK(lnk::validate(q.data()).empty());
    Protocol back = remove_removable(q, cloneName);
    CHECK_MESSAGE(lnk::isomorphic(back, p), serialize_protocol(p));
  }
}

TEST_CASE("cloning can take over part of a node's fanout") {
  Protocol p = lnk::corpus_protocol("fig10_tau_insec");
  auto [q, cloneName] = clone_node(p, "f1", {"f3"});
  CHECK(pred_names(q, "f3") == std::vector<std::string>{cloneName});
  CHECK(q.succs(q.require("f1")).empty());
  // The stripped original is redundant next to its twin f1p.
  Protocol r = remove_removable(q, "f1");
  CHECK(lnk::isomorphic(r, p));

  CHECK_THROWS_AS(clone_node(p, "f1", {"g"}), OpError);  // g is no successor of f1
}

TEST_CASE("removal requires a sink whose inputs another node sees") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  CHECK_THROWS_AS(remove_removable(p, "t_init"), OpError);  // has successors
  try {
    // deliveryprice is a sink, but nothing else sees {parceltype, address}.
    remove_removable(lnk::corpus_protocol("fig2_tau_ex"), "deliveryprice");
    FAIL("expected a precondition failure");
  } catch (const OpError& e) {
    CHECK(std::string(e.what()).find("no other node sees all inputs") !=
          std::string::npos);
  }
}

TEST_CASE("splitting an edge is inverted by unsplit") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  auto [q, w] = split_edge(p, "t_init", "f1");
  CHECK(q.node_count() == p.node_count() + 1);
  CHECK(pred_names(q, "f1") == std::vector<std::string>{"w", w});
  CHECK(pred_names(q, w) == std::vector<std::string>{"t_init"});
  Protocol back = unsplit(q, w);
  CHECK(lnk::isomorphic(back, p));

  CHECK_THROWS_AS(split_edge(p, "f1", "f2"), OpError);

  std::mt19937_64 rng(47);
  for (int i = 0; i < 60; ++i) {
    Protocol r = Protocol::seal(ref::random_dag(rng, 12, true));
    const auto& es = r.edges();
    auto [u, v] = es[rng() % es.size()];
    auto [split, node] = split_edge(r, r.name(u), r.name(v));
    CHECK(lnk::validate(split.data()).empty());
    CHECK_MESSAGE(lnk::isomorphic(unsplit(split, node), r), serialize_protocol(r));
  }
}

TEST_CASE("unsplit rejects non-pass-through nodes and existing shortcuts") {
  Protocol p = lnk::corpus_protocol("fig4_sync");
  CHECK_THROWS_AS(unsplit(p, "t_init"), OpError);  // two successors

  Protocol shortcut = parse_protocol("protocol s{var x; node a(x); node b(x,a);}");
  try {
    unsplit(shortcut, "a");
    FAIL("expected a precondition failure");
  } catch (const OpError& e) {
    CHECK(std::string(e.what()).find("unsplit: edge") != std::string::npos);
  }
}

TEST_CASE("closed sub-protocol extraction polices its boundary") {
  Protocol p = lnk::corpus_protocol("fig4_sync");

  Protocol inner = closed_subprotocol(p, {"x", "y", "t_init"});
  CHECK(inner.node_count() == 3);
  CHECK(inner.edges().size() == 2);

  Protocol whole = closed_subprotocol(
      p, {"w", "x", "y", "z", "t_init", "f1", "f2", "g"});
  CHECK(lnk::isomorphic(whole, p));

  CHECK_THROWS_AS(closed_subprotocol(p, {}), OpError);
  try {
    closed_subprotocol(p, {"x", "t_init"});
    FAIL("expected a precondition failure");
  } catch (const OpError& e) {
    CHECK(std::string(e.what()).find("not predecessor-closed") != std::string::npos);
  }
  try {
    closed_subprotocol(p, {"w", "x", "y", "t_init", "f1"});
    FAIL("expected a precondition failure");
  } catch (const OpError& e) {
    CHECK(std::string(e.what()).find("multiple exit nodes") != std::string::npos);
  }

  Protocol fork = parse_protocol("protocol f{var x; node a(x); node b(a); node c(a);}");
  try {
    closed_subprotocol(fork, {"x", "a", "b"});
    FAIL("expected a precondition failure");
  } catch (const OpError& e) {
    CHECK(std::string(e.what()).find("successors inside") != std::string::npos);
  }
}

TEST_CASE("identity embeddings always check out") {
  for (const auto& e : lnk::corpus()) {
    Protocol p = lnk::corpus_protocol(e.name);
    auto chk = check_embedding(p, p, identity_embedding(p));
    CHECK_MESSAGE(chk.ok, e.name);
  }
}

TEST_CASE("embedding verification reports totality and injectivity gaps") {
  Protocol sub = lnk::corpus_protocol("fig3_nosync");
  Protocol host = lnk::corpus_protocol("fig9_tau_sec");

  Embedding partial = identity_embedding(sub);
  partial.phi.erase("f2");
  auto chk = check_embedding(sub, host, partial);
  CHECK(!chk.ok);
  CHECK(mentions(chk.violations, "phi undefined on f2"));

  Embedding collide = identity_embedding(sub);
  collide.chi["y"] = "x";
  chk = check_embedding(sub, host, collide);
  CHECK(!chk.ok);
  CHECK(mentions(chk.violations, "not injective"));

  Embedding toService = identity_embedding(sub);
  toService.chi["y"] = "f1";
  chk = check_embedding(sub, host, toService);
  CHECK(!chk.ok);
  CHECK(mentions(chk.violations, "non-variable"));
}

TEST_CASE("the flat pair does not embed into the synchronized protocol") {
  Protocol sub = lnk::corpus_protocol("fig3_nosync");
  Protocol host = lnk::corpus_protocol("fig4_sync");
  Embedding e;
  e.phi = {{"x", "w"}, {"y", "x"}, {"u", "y"}, {"v", "z"},
           {"f1", "f1"}, {"f2", "f2"}, {"g", "g"}};
  e.chi = {{"x", "w"}, {"y", "x"}, {"u", "y"}, {"v", "z"}};
  auto chk = check_embedding(sub, host, e);
  CHECK(!chk.ok);
  // The synchronizer smuggles x's host image into f2 and y's into f1, and
  // gives two mapped variables an image-free meeting point.
  CHECK(mentions(chk.violations, "no matching edge y -> f2"));
  CHECK(mentions(chk.violations, "no matching edge u -> f1"));
  CHECK(mentions(chk.violations, "y and u meet at t_init"));
}

TEST_CASE("embedding into the split protocol survives the pass-through") {
  Protocol sub = lnk::corpus_protocol("fig3_nosync");
  auto [host, mid] = split_edge(sub, "x", "f1");
  auto chk = check_embedding(sub, host, identity_embedding(sub));
  CHECK_MESSAGE(chk.ok, mid);
}

TEST_CASE("reduction carves the embedded protocol out of its host") {
  Protocol sub = lnk::corpus_protocol("fig3_nosync");
  Protocol host = lnk::corpus_protocol("fig9_tau_sec");
  Embedding e = identity_embedding(sub);
  REQUIRE(check_embedding(sub, host, e).ok);
  Protocol reduced = reduce_via_embedding(host, sub, e);
  CHECK(lnk::isomorphic(reduced, sub));

  for (const char* name : {"fig3_nosync", "fig4_sync", "fig10_tau_insec"}) {
    Protocol p = lnk::corpus_protocol(name);
    Protocol r = reduce_via_embedding(p, p, identity_embedding(p));
    CHECK_MESSAGE(lnk::isomorphic(r, p), name);
  }

  Embedding broken = e;
  broken.chi["x"] = "y";  // not injective
  CHECK_THROWS_AS(reduce_via_embedding(host, sub, broken), OpError);
}
