#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lnk/protocol.hpp"
#include "lnk/tracking.hpp"
#include "lnk/transforms.hpp"

// Security verdicts. A protocol is insecure when a tracking strategy exists;
// the secure criteria are sufficient conditions, so the pipeline can end in
// Unknown with diagnostics.

namespace lnk {

enum class SecureReason {
  kDisjointPartition,
  kPrivateVariablesNoTracking,
  kLayeredDisjoint,
  kLayeredPrivate,
  kEmbeddedSecure,
};

const char* secure_reason_name(SecureReason r);

struct Verdict {
  enum class Tag { kInsecure, kSecure, kUnknown };
  Tag tag = Tag::kUnknown;

  std::optional<TrackingStrategy> witness;  // Insecure
  std::optional<SecureReason> reason;       // Secure

  // Witness data, per reason.
  std::vector<std::string> groupA, groupB;  // the two sides of a split
  int layer = -1;                           // layered criteria
  std::map<std::string, std::vector<std::string>> privates;
  std::string embeddedSub;                  // registry entry name
  Embedding embedding;

  std::vector<std::string> notes;           // Unknown: what was tried and why it failed
  std::vector<std::string> restrictedTo;    // set by xr_verdict; not part of equality
};

// Content equality; restrictedTo is deliberately ignored.
bool operator==(const Verdict& a, const Verdict& b);
bool operator!=(const Verdict& a, const Verdict& b);

bool operator==(const TrackingStrategy& a, const TrackingStrategy& b);

struct FlatSplit {
  std::vector<std::string> groupA, groupB;  // service names, declaration order
};

// Splits the services of a flat protocol into two variable-disjoint groups,
// each seeing strictly more variables than it has members. Components of the
// variable-sharing graph are grouped exhaustively (capped at 20 components).
std::optional<FlatSplit> disjoint_partition(const Protocol& p, const FlatForm& f,
                                            std::string* why = nullptr);

// Per-service variables seen by that service alone; none when any service
// has no private variable.
std::optional<std::map<std::string, std::vector<std::string>>> private_variables(
    const Protocol& p, const FlatForm& f, std::string* why = nullptr);

struct LayerSplit {
  int layer = -1;
  std::vector<std::string> groupA, groupB;
};

// Scans service layers (ancestral variables) for a two-sided split with
// disjoint variable sets and the strict cardinality bound on both sides.
std::optional<LayerSplit> layered_disjoint(const Protocol& p, const LayeredForm& lf,
                                           std::string* why = nullptr);

// First layer where every member has a private ancestral variable and the
// flattened layer admits no tracking cover.
std::optional<int> layered_private(const Protocol& p, const LayeredForm& lf,
                                   std::string* why = nullptr);

struct RegistryEntry {
  std::string name;
  Protocol proto;
};

// Known-secure protocols searched for name-identity embeddings into the
// protocol under analysis.
class SecureRegistry {
 public:
  static SecureRegistry with_seeds();
  void add(std::string name, Protocol p);
  const std::vector<RegistryEntry>& entries() const { return entries_; }

 private:
  std::vector<RegistryEntry> entries_;
};

// Pipeline: tracking detection, flat disjoint partition, flat private
// variables, layered splits and privates on the layerized protocol, then
// registry embeddings. First hit wins; otherwise Unknown with notes.
Verdict analyze(const Protocol& p);
Verdict analyze(const Protocol& p, const SecureRegistry& reg);

// Verdict of the protocol restricted to keep, tagged with the restriction.
Verdict xr_verdict(const Protocol& p, const std::vector<std::string>& keep);
Verdict xr_verdict(const Protocol& p, const std::vector<std::string>& keep,
                   const SecureRegistry& reg);

std::string verdict_to_json(const Verdict& v);

// 0 secure, 1 insecure, 2 unknown.
int verdict_exit_code(const Verdict& v);

}  // namespace lnk
