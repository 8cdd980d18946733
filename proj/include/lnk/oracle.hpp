#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lnk/execution.hpp"
#include "lnk/protocol.hpp"

// Desk-scale ground truth: exhaustive reply-table enumeration over bounded
// session universes, exhaustive strategy verification, and the
// indistinguishable-session construction for the two-service flat shape.

namespace lnk {

struct SessionUniverse {
  enum class Schedules { kCanonical, kExhaustive };
  std::vector<std::vector<LocalSession>> sessions;  // multisets, fixed order
  Schedules schedules = Schedules::kCanonical;
  std::optional<std::size_t> limit;  // exhaustive-mode cap per multiset
};

// Every multiset of 1..users local sessions over the full assignment space.
// Throws OpError when the variable count makes that space unreasonable.
SessionUniverse bounded_universe(
    const Protocol& p, int users,
    SessionUniverse::Schedules schedules = SessionUniverse::Schedules::kCanonical,
    std::optional<std::size_t> limit = std::nullopt);

// For the flat shape g(f1(x,y), f2(u,v)): the 4-user sessions in which each
// inner service sees each of its four input patterns exactly once, one
// session per (pairing bijection, member order) pair. Reply tables act
// consistently here, which is what makes a none result evidence.
SessionUniverse distinct_inputs_universe(const Protocol& p);

// Replies from per-service lookup tables; prints via a final-view rule once
// the schedule is exhausted (pending replies stay pending).
struct TableStrategy final : public Strategy {
  const Protocol* proto = nullptr;
  // Per service id: tables[0] answers its first query, tables[1] all later
  // ones, each indexed by packed input bits (first argument = high bit).
  // Services without an entry (sinks) reply 0.
  std::map<int, std::array<std::vector<int8_t>, 2>> tables;
  bool consistent = false;  // occurrence index ignored
  std::map<std::string, std::vector<int8_t>> printRule;  // final view -> assignment

  AdversaryAction decide(const AdversaryView& view) override;
};

// Canonical text form of a view; the oracle compares views byte-wise.
std::string serialize_view(const Protocol& p, const AdversaryView& v);

// Runs s on every global session of u (canonical schedule, or all schedules
// in exhaustive mode). First session not ending in PrintedMember, or nullopt.
std::optional<GlobalSession> verify_strategy(const Protocol& p, Strategy& s,
                                             const SessionUniverse& u);

// For the two-service flat shape and consistent reply tables t1 (services[0])
// and t2 (services[1]), two 4-user global sessions whose canonical-schedule
// views coincide record for record while their member multisets are disjoint.
// Any strategy replying per the tables therefore fails on one of them.
std::pair<GlobalSession, GlobalSession> refute_flat_strategy(
    const Protocol& p, const std::array<int8_t, 4>& t1,
    const std::array<int8_t, 4>& t2);

// Enumerates reply tables in fixed bit order and returns the first one whose
// final views admit a winning print rule: every class of runs sharing a view
// must have a session assignment common to all its multisets. none rules out
// only the enumerated family within this universe.
std::optional<TableStrategy> search_universe(const Protocol& p,
                                             const SessionUniverse& u,
                                             uint64_t strategyBudget = 1ull << 20,
                                             bool consistentOnly = false,
                                             int jobs = 1);

struct AttackBounds {
  int users = 2;
  SessionUniverse::Schedules schedules = SessionUniverse::Schedules::kCanonical;
  std::optional<std::size_t> scheduleLimit;
  uint64_t strategyBudget = 1ull << 20;
  bool consistentOnly = false;
  int jobs = 1;
};

// search_universe over bounded_universe(p, users). Throws OpError when the
// table space exceeds the budget rather than truncating it.
std::optional<TableStrategy> brute_force_attack(const Protocol& p,
                                                const AttackBounds& b);

}  // namespace lnk
