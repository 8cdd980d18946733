#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lnk/execution.hpp"
#include "lnk/protocol.hpp"

// Active linkability attacks. A tracking strategy names a synchronizer
// service t_init, a tracked node set T, and one forward path per variable;
// the derived runner links a whole input assignment to a single user by
// propagating a reply cookie through T and forwarding inputs along the paths.

namespace lnk {

struct TrackingStrategy {
  std::string tInit;
  std::vector<std::string> tracked;  // T
  // Variable name -> node names of its path, from the variable to the first
  // node inside T.
  std::map<std::string, std::vector<std::string>> forwardPaths;
};

struct TrackingCheck {
  bool ok = false;
  std::vector<std::string> violations;
};

// Forward closure: seed plus everything reachable from it. Ascending id order.
std::vector<std::string> closure(const Protocol& p,
                                 const std::vector<std::string>& seed);

// Validates against the definition, after closing the tracked set forward:
// t_init is a service in T reaching every tracked node, every variable's path
// walks existing edges and ends inside the closed set, and the paths are
// pairwise node-disjoint outside it.
TrackingCheck check_tracking_strategy(const Protocol& p,
                                      const TrackingStrategy& ts);

// Searches synchronizer candidates in topology order; for each, decides the
// path cover by unit-capacity max-flow (tracked set contracted to a sink,
// other nodes split). First hit wins.
std::optional<TrackingStrategy> find_tracking_strategy(const Protocol& p);

// Cover map for depth-2 protocols: each inner service covers a visible
// variable set, at most one of them more than a singleton. Throws OpError
// when p has no flat form.
struct FlatTracking {
  std::string tInit;
  std::map<std::string, std::vector<std::string>> assigned;
};
std::optional<FlatTracking> flat_tracking(const Protocol& p);

// Expands a flat cover map into path form.
TrackingStrategy to_tracking(const Protocol& p, const FlatTracking& ft);

// Runnable adversary for ts (which must check out). Replies 0 to the first
// synchronizer query and 1 to later ones, forwards the cookie inside T and
// inputs along the paths, prints once the linked assignment is total. With
// consistentInit the synchronizer instead replies 0 to every query repeating
// the first one's inputs; that variant answers consistently but its print can
// mix users.
std::unique_ptr<Strategy> build_tracking_runner(const Protocol& p,
                                                const TrackingStrategy& ts,
                                                bool consistentInit = false);

}  // namespace lnk
