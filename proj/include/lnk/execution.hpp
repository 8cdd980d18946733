#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lnk/protocol.hpp"

// Scheduled multi-user execution against an active adversary. The adversary
// owns every service: it sees queries as they arrive (minus the issuing user),
// picks each reply bit, and may print one assignment to end the run.

namespace lnk {

// Per-user assignment, one slot per node id. -1 = undefined. Starts with the
// variable slots set; replies fill service slots as the run progresses.
struct LocalSession {
  std::vector<int8_t> values;

  LocalSession() = default;
  explicit LocalSession(int nodeCount) : values(nodeCount, -1) {}
  bool defined(int node) const { return values[node] >= 0; }
  int bit(int node) const { return values[node]; }
  void set(int node, int b) { values[node] = static_cast<int8_t>(b); }
};

// Builds a local session from named variable bits. Every variable of p must be
// given exactly once.
LocalSession session_from_vars(
    const Protocol& p, const std::map<std::string, int>& bits);

// Users are numbered from 1.
struct Step {
  int user = 0;
  int service = -1;
};

struct Schedule {
  int users = 0;
  std::vector<Step> steps;
};

// A schedule is legal when it lists each (user, service) pair exactly once and
// respects per-user service precedence. Throws OpError otherwise.
void validate_schedule(const Protocol& p, const Schedule& s);

// Session multiset plus the schedule that drives it. members[i] belongs to
// user i+1.
struct GlobalSession {
  std::vector<LocalSession> members;
  Schedule schedule;
};

void validate_global_session(const Protocol& p, const GlobalSession& g);

struct QueryRecord {
  int service = -1;
  std::vector<int8_t> inputs;  // aligned with preds(service)
  int user = 0;                // never shown to the adversary
  int8_t reply = -1;           // -1 while unanswered
  int replyTime = 0;
};

struct ProtocolState {
  std::vector<QueryRecord> history;
  std::size_t nextStep = 0;
  int clock = 0;
  int userCount = 0;
};

// What the adversary sees of one record. inputs points into the owning
// ProtocolState's history; views do not outlive their state.
struct ViewRecord {
  int service = -1;
  const int8_t* inputs = nullptr;
  int8_t reply = -1;
  int replyTime = 0;
};

struct AdversaryView {
  std::vector<ViewRecord> records;
  int userCount = 0;
  bool waitAvailable = false;
};

AdversaryView make_view(const Protocol& p, const GlobalSession& g,
                        const ProtocolState& st);

struct AdversaryAction {
  enum Kind { kWait, kReply, kPrint };
  Kind kind = kWait;
  int record = -1;              // kReply: index into the view
  int bit = 0;                  // kReply
  std::vector<int8_t> printed;  // kPrint: node-indexed, -1 = unset

  static AdversaryAction wait() { return {}; }
  static AdversaryAction reply(int record, int bit) {
    AdversaryAction a;
    a.kind = kReply;
    a.record = record;
    a.bit = bit;
    return a;
  }
  static AdversaryAction print(std::vector<int8_t> assignment) {
    AdversaryAction a;
    a.kind = kPrint;
    a.printed = std::move(assignment);
    return a;
  }
};

// Deterministic in the view: decide() may cache work across calls, but the
// cache must be a function of the view prefix seen so far. reset() runs before
// each new run and after any replay rewind.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual void reset() {}
  virtual AdversaryAction decide(const AdversaryView& view) = 0;
};

// Replies 0 to the earliest unanswered query, waits otherwise. Ends every run
// in ExhaustedWithoutPrint.
class NeverPrintStrategy : public Strategy {
 public:
  AdversaryAction decide(const AdversaryView& view) override;
};

enum class OutcomeKind { kPrintedMember, kPrintedNonMember, kExhaustedWithoutPrint };

struct RunOutcome {
  OutcomeKind kind = OutcomeKind::kExhaustedWithoutPrint;
  std::vector<int8_t> printed;  // empty when no print happened
  ProtocolState finalState;
};

// True when printed agrees with some member's variable assignment. Only
// variable slots are compared.
bool is_member(const Protocol& p, const std::vector<int8_t>& printed,
               const GlobalSession& g);

ProtocolState initial_state(const Protocol& p, const GlobalSession& g);

// One adversary action. Returns the successor state, or the outcome when the
// run was already terminal (schedule empty, every query answered). Illegal
// actions throw OpError.
std::variant<ProtocolState, RunOutcome> step(const Protocol& p,
                                             const GlobalSession& g,
                                             const ProtocolState& st,
                                             Strategy& strategy);

struct TraceEvent {
  enum Kind { kQuery, kReply, kPrint };
  Kind kind = kQuery;
  int clock = 0;
  int service = -1;
  int user = 0;                          // kQuery only
  const std::vector<int8_t>* inputs = nullptr;  // kQuery only
  int bit = 0;                           // kReply only
  const std::vector<int8_t>* printed = nullptr;  // kPrint only
};
using TraceSink = std::function<void(const TraceEvent&)>;

RunOutcome run(const Protocol& p, const GlobalSession& g, Strategy& strategy,
               const TraceSink* trace = nullptr);

// Reusable engine for bulk simulation: no per-run validation, buffers are
// recycled, the transcript stays readable until the next play().
class Runtime {
 public:
  explicit Runtime(const Protocol& p);

  OutcomeKind play(const GlobalSession& g, Strategy& strategy,
                   const TraceSink* trace = nullptr);

  const std::vector<QueryRecord>& history() const { return history_; }
  const std::vector<int8_t>& printed() const { return printed_; }
  int clock() const { return clock_; }

 private:
  const Protocol& p_;
  std::vector<QueryRecord> history_;
  std::vector<std::vector<int8_t>> assign_;  // per user, node-indexed
  std::vector<int8_t> printed_;
  AdversaryView view_;
  int clock_ = 0;

  friend RunOutcome run(const Protocol&, const GlobalSession&, Strategy&,
                        const TraceSink*);
};

// All legal schedules for n users, in lexicographic step order ((user,
// service id) pairs). limit caps the count when set.
std::vector<Schedule> enumerate_schedules(
    const Protocol& p, int users,
    std::optional<std::size_t> limit = std::nullopt);

// User order inside one service block of a canonical schedule. Explicit
// permutations win; otherwise, when members is set, users are sorted by their
// values at the service's variable inputs (ties by user index); otherwise
// index order.
struct CanonicalOrder {
  std::map<int, std::vector<int>> perService;
  const std::vector<LocalSession>* members = nullptr;
};

// Service-major schedule: one block per service in topology order, each block
// queried by every user. Legal for every protocol.
Schedule canonical_schedule(const Protocol& p, int users,
                            const CanonicalOrder* order = nullptr);

}  // namespace lnk
