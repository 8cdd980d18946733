#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lnk/protocol.hpp"

// Insecurity-preserving graph rewrites plus the embedding verifier and the
// staged reduction built on them. Every operation returns a freshly sealed
// protocol; inputs are never mutated.

namespace lnk {

// phi maps every sub node to a host node; chi maps sub variables to host
// variables, injectively.
struct Embedding {
  std::map<std::string, std::string> phi;
  std::map<std::string, std::string> chi;
};

struct EmbeddingCheck {
  bool ok = false;
  std::vector<std::string> violations;
};

// Splices u's predecessors into v's argument list at u's position and drops
// the edge u->v. u must be a service with that edge.
Protocol bypass(const Protocol& p, const std::string& u, const std::string& v);

// Clones service v: the clone takes copies of all in-edges, and the edges to
// the moved successors switch source from v to the clone (argument positions
// kept). Clone names follow v + "__c" + counter.
std::pair<Protocol, std::string> clone_node(const Protocol& p,
                                            const std::string& v,
                                            const std::vector<std::string>& moved);

// Removes a service with no successors whose predecessor set is covered by
// some other node's.
Protocol remove_removable(const Protocol& p, const std::string& u);

// Replaces edge u->v with u -> w -> v for a fresh pass-through service w
// (named u + "__s" + counter), preserving v's argument position.
std::pair<Protocol, std::string> split_edge(const Protocol& p,
                                            const std::string& u,
                                            const std::string& v);

// Inverse of split_edge: w must have exactly one predecessor and one
// successor, and the shortcut edge must not already exist.
Protocol unsplit(const Protocol& p, const std::string& w);

// Induced sub-protocol on nodes, after validating predecessor-closure and
// that at most one node has successors outside (the exit, which then may have
// none inside). Throws OpError naming the failed condition.
Protocol closed_subprotocol(const Protocol& p,
                            const std::vector<std::string>& nodes);

// Verifies the three embedding conditions: exit (host nodes reachable from an
// image can still reach one), shortcut-freeness (image-to-image paths that
// avoid images internally are backed by sub edges), and exclusivity (mapped
// variables only meet beyond a shared service image; two distinct paths from
// the same mapped variable count as a pair too).
EmbeddingCheck check_embedding(const Protocol& sub, const Protocol& host,
                               const Embedding& e);

// Rewrites host down to the image of sub: eliminates intermediates on
// image-to-image paths, clones shared images apart, restricts to mapped
// variables, collapses variable chains, then extracts the closed
// sub-protocol. Throws OpError with the stage on any invariant failure.
Protocol reduce_via_embedding(const Protocol& host, const Protocol& sub,
                              const Embedding& e);

}  // namespace lnk
