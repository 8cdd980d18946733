#include "lnk/execution.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace lnk {

namespace {

std::string step_text(const Protocol& p, const Step& s) {
  return "(" + std::to_string(s.user) + ", " +
         (s.service >= 0 && s.service < p.node_count() ? p.name(s.service)
                                                       : std::string("?")) +
         ")";
}

}  // namespace

LocalSession session_from_vars(const Protocol& p,
                               const std::map<std::string, int>& bits) {
  LocalSession s(p.node_count());
  for (const auto& [name, bit] : bits) {
    int id = p.require(name);
    if (!p.is_variable(id)) throw OpError(name + " is not a variable");
    if (bit != 0 && bit != 1) throw OpError("bit for " + name + " out of range");
    s.set(id, bit);
  }
  for (int v : p.variables())
    if (!s.defined(v)) throw OpError("variable " + p.name(v) + " unassigned");
  return s;
}

void validate_schedule(const Protocol& p, const Schedule& s) {
  if (s.users < 1) throw OpError("schedule needs at least one user");
  const auto& services = p.services();
  if (s.steps.size() != services.size() * static_cast<std::size_t>(s.users))
    throw OpError("schedule must list each (user, service) pair exactly once");
  std::set<std::pair<int, int>> seen;
  // queried[u] tracks, per user, which services were already scheduled.
  std::vector<std::vector<char>> queried(
      s.users, std::vector<char>(p.node_count(), 0));
  for (const auto& st : s.steps) {
    if (st.user < 1 || st.user > s.users)
      throw OpError("schedule step has user " + std::to_string(st.user) +
                    " out of range");
    if (st.service < 0 || st.service >= p.node_count() ||
        p.is_variable(st.service))
      throw OpError("schedule step " + step_text(p, st) +
                    " does not name a service");
    if (!seen.insert({st.user, st.service}).second)
      throw OpError("schedule repeats step " + step_text(p, st));
    for (int q : p.preds(st.service))
      if (!p.is_variable(q) && !queried[st.user - 1][q])
        throw OpError("schedule step " + step_text(p, st) + " precedes (" +
                      std::to_string(st.user) + ", " + p.name(q) + ")");
    queried[st.user - 1][st.service] = 1;
  }
}

void validate_global_session(const Protocol& p, const GlobalSession& g) {
  validate_schedule(p, g.schedule);
  if (g.members.size() != static_cast<std::size_t>(g.schedule.users))
    throw OpError("session multiset size must match the schedule's user count");
  for (std::size_t i = 0; i < g.members.size(); ++i) {
    const auto& m = g.members[i];
    if (m.values.size() != static_cast<std::size_t>(p.node_count()))
      throw OpError("member " + std::to_string(i + 1) +
                    " is not indexed by this protocol's nodes");
    for (int v : p.variables())
      if (!m.defined(v))
        throw OpError("member " + std::to_string(i + 1) + " leaves variable " +
                      p.name(v) + " unassigned");
  }
}

namespace {

// Value of node q for user u, given the variable assignment and the answered
// queries so far. -1 when still undefined.
int user_value(const Protocol& p, const GlobalSession& g,
               const std::vector<QueryRecord>& history, int user, int q) {
  if (p.is_variable(q)) return g.members[user - 1].bit(q);
  for (const auto& r : history)
    if (r.user == user && r.service == q && r.reply >= 0) return r.reply;
  return -1;
}

bool wait_ready_state(const Protocol& p, const GlobalSession& g,
                      const ProtocolState& st) {
  if (st.nextStep >= g.schedule.steps.size()) return false;
  const Step& s = g.schedule.steps[st.nextStep];
  for (int q : p.preds(s.service))
    if (user_value(p, g, st.history, s.user, q) < 0) return false;
  return true;
}

std::vector<int8_t> normalize_printed(const Protocol& p,
                                      const std::vector<int8_t>& printed) {
  std::vector<int8_t> out(p.node_count(), -1);
  for (std::size_t i = 0; i < printed.size() && i < out.size(); ++i)
    out[i] = printed[i];
  return out;
}

}  // namespace

AdversaryView make_view(const Protocol& p, const GlobalSession& g,
                        const ProtocolState& st) {
  AdversaryView v;
  v.userCount = st.userCount;
  v.records.reserve(st.history.size());
  for (const auto& r : st.history)
    v.records.push_back({r.service, r.inputs.data(), r.reply, r.replyTime});
  v.waitAvailable = wait_ready_state(p, g, st);
  return v;
}

bool is_member(const Protocol& p, const std::vector<int8_t>& printed,
               const GlobalSession& g) {
  for (const auto& m : g.members) {
    bool match = true;
    for (int v : p.variables())
      if (printed[v] != m.values[v]) {
        match = false;
        break;
      }
    if (match) return true;
  }
  return false;
}

ProtocolState initial_state(const Protocol& p, const GlobalSession& g) {
  validate_global_session(p, g);
  ProtocolState st;
  st.userCount = g.schedule.users;
  return st;
}

std::variant<ProtocolState, RunOutcome> step(const Protocol& p,
                                             const GlobalSession& g,
                                             const ProtocolState& st,
                                             Strategy& strategy) {
  bool allAnswered = std::all_of(st.history.begin(), st.history.end(),
                                 [](const QueryRecord& r) { return r.reply >= 0; });
  if (st.nextStep >= g.schedule.steps.size() && allAnswered) {
    RunOutcome out;
    out.kind = OutcomeKind::kExhaustedWithoutPrint;
    out.finalState = st;
    return out;
  }

  AdversaryView view = make_view(p, g, st);
  AdversaryAction a = strategy.decide(view);
  ProtocolState next = st;

  switch (a.kind) {
    case AdversaryAction::kWait: {
      if (next.nextStep >= g.schedule.steps.size())
        throw OpError("wait with an empty schedule");
      const Step& s = g.schedule.steps[next.nextStep];
      QueryRecord r;
      r.service = s.service;
      r.user = s.user;
      for (int q : p.preds(s.service)) {
        int bit = user_value(p, g, next.history, s.user, q);
        if (bit < 0)
          throw OpError("wait while step " + step_text(p, s) +
                        " still has undefined inputs");
        r.inputs.push_back(static_cast<int8_t>(bit));
      }
      next.clock += 1;
      next.history.push_back(std::move(r));
      next.nextStep += 1;
      return next;
    }
    case AdversaryAction::kReply: {
      if (a.record < 0 || a.record >= static_cast<int>(next.history.size()))
        throw OpError("reply to a record that does not exist");
      QueryRecord& r = next.history[a.record];
      if (r.reply >= 0) throw OpError("reply to an already answered record");
      if (a.bit != 0 && a.bit != 1) throw OpError("reply bit out of range");
      next.clock += 1;
      r.reply = static_cast<int8_t>(a.bit);
      r.replyTime = next.clock;
      return next;
    }
    case AdversaryAction::kPrint: {
      // print is not a counted action; the clock tracks queries and replies
      RunOutcome out;
      out.printed = normalize_printed(p, a.printed);
      out.kind = is_member(p, out.printed, g) ? OutcomeKind::kPrintedMember
                                              : OutcomeKind::kPrintedNonMember;
      out.finalState = std::move(next);
      return out;
    }
  }
  throw OpError("strategy returned a malformed action");
}

AdversaryAction NeverPrintStrategy::decide(const AdversaryView& view) {
  if (view.waitAvailable) return AdversaryAction::wait();
  for (std::size_t i = 0; i < view.records.size(); ++i)
    if (view.records[i].reply < 0)
      return AdversaryAction::reply(static_cast<int>(i), 0);
  return AdversaryAction::wait();
}

Runtime::Runtime(const Protocol& p) : p_(p) {}

OutcomeKind Runtime::play(const GlobalSession& g, Strategy& strategy,
                          const TraceSink* trace) {
  const auto& steps = g.schedule.steps;
  history_.clear();
  history_.reserve(steps.size());
  view_.records.clear();
  view_.records.reserve(steps.size());
  view_.userCount = g.schedule.users;
  printed_.clear();
  clock_ = 0;

  assign_.resize(g.members.size());
  for (std::size_t i = 0; i < g.members.size(); ++i) assign_[i] = g.members[i].values;

  std::size_t next = 0;
  std::size_t answered = 0;
  const int budget = 2 * static_cast<int>(steps.size()) + 1;
  strategy.reset();

  auto settle_print = [&](const std::vector<int8_t>& claim) {
    printed_ = normalize_printed(p_, claim);
    if (trace) {
      TraceEvent ev;
      ev.kind = TraceEvent::kPrint;
      ev.clock = clock_;
      ev.printed = &printed_;
      (*trace)(ev);
    }
    for (const auto& m : g.members) {
      bool match = true;
      for (int v : p_.variables())
        if (printed_[v] != m.values[v]) {
          match = false;
          break;
        }
      if (match) return OutcomeKind::kPrintedMember;
    }
    return OutcomeKind::kPrintedNonMember;
  };

  while (true) {
    if (next == steps.size() && answered == history_.size()) {
      // One closing decision on the complete view; only a print changes the
      // outcome.
      view_.waitAvailable = false;
      AdversaryAction last = strategy.decide(view_);
      if (last.kind == AdversaryAction::kPrint) return settle_print(last.printed);
      return OutcomeKind::kExhaustedWithoutPrint;
    }
    if (clock_ >= budget) throw OpError("adversary exceeded the action budget");

    bool ready = false;
    if (next < steps.size()) {
      const Step& s = steps[next];
      ready = true;
      for (int q : p_.preds(s.service))
        if (assign_[s.user - 1][q] < 0) {
          ready = false;
          break;
        }
    }
    view_.waitAvailable = ready;

    AdversaryAction a = strategy.decide(view_);
    switch (a.kind) {
      case AdversaryAction::kWait: {
        if (next >= steps.size()) throw OpError("wait with an empty schedule");
        if (!ready)
          throw OpError("wait while step " + step_text(p_, steps[next]) +
                        " still has undefined inputs");
        const Step& s = steps[next];
        QueryRecord r;
        r.service = s.service;
        r.user = s.user;
        const auto& qs = p_.preds(s.service);
        r.inputs.reserve(qs.size());
        for (int q : qs) r.inputs.push_back(assign_[s.user - 1][q]);
        clock_ += 1;
        history_.push_back(std::move(r));
        const QueryRecord& stored = history_.back();
        view_.records.push_back(
            {stored.service, stored.inputs.data(), int8_t{-1}, 0});
        next += 1;
        if (trace) {
          TraceEvent ev;
          ev.kind = TraceEvent::kQuery;
          ev.clock = clock_;
          ev.service = stored.service;
          ev.user = stored.user;
          ev.inputs = &stored.inputs;
          (*trace)(ev);
        }
        break;
      }
      case AdversaryAction::kReply: {
        if (a.record < 0 || a.record >= static_cast<int>(history_.size()))
          throw OpError("reply to a record that does not exist");
        QueryRecord& r = history_[a.record];
        if (r.reply >= 0) throw OpError("reply to an already answered record");
        if (a.bit != 0 && a.bit != 1) throw OpError("reply bit out of range");
        clock_ += 1;
        r.reply = static_cast<int8_t>(a.bit);
        r.replyTime = clock_;
        view_.records[a.record].reply = r.reply;
        view_.records[a.record].replyTime = clock_;
        assign_[r.user - 1][r.service] = r.reply;
        answered += 1;
        if (trace) {
          TraceEvent ev;
          ev.kind = TraceEvent::kReply;
          ev.clock = clock_;
          ev.service = r.service;
          ev.bit = r.reply;
          (*trace)(ev);
        }
        break;
      }
      case AdversaryAction::kPrint:
        return settle_print(a.printed);
    }
  }
}

RunOutcome run(const Protocol& p, const GlobalSession& g, Strategy& strategy,
               const TraceSink* trace) {
  validate_global_session(p, g);
  Runtime rt(p);
  RunOutcome out;
  out.kind = rt.play(g, strategy, trace);
  out.printed = rt.printed_;
  out.finalState.history = rt.history_;
  out.finalState.clock = rt.clock_;
  out.finalState.userCount = g.schedule.users;
  out.finalState.nextStep = rt.history_.size();
  return out;
}

std::vector<Schedule> enumerate_schedules(const Protocol& p, int users,
                                          std::optional<std::size_t> limit) {
  if (users < 1) throw OpError("schedule needs at least one user");
  const auto& services = p.services();
  std::vector<Schedule> out;
  std::size_t total = services.size() * static_cast<std::size_t>(users);
  std::vector<Step> current;
  current.reserve(total);
  std::vector<std::vector<char>> queried(
      users, std::vector<char>(p.node_count(), 0));

  // Backtracking over ready steps, candidates in (user, service id) order, so
  // the result sequence is lexicographic and free of duplicates.
  auto ready = [&](int u, int f) {
    if (queried[u - 1][f]) return false;
    for (int q : p.preds(f))
      if (!p.is_variable(q) && !queried[u - 1][q]) return false;
    return true;
  };
  std::function<bool()> go = [&]() -> bool {
    if (current.size() == total) {
      Schedule s;
      s.users = users;
      s.steps = current;
      out.push_back(std::move(s));
      return !(limit && out.size() >= *limit);
    }
    for (int u = 1; u <= users; ++u)
      for (int f : services)
        if (ready(u, f)) {
          queried[u - 1][f] = 1;
          current.push_back({u, f});
          bool keep = go();
          current.pop_back();
          queried[u - 1][f] = 0;
          if (!keep) return false;
        }
    return true;
  };
  go();
  return out;
}

Schedule canonical_schedule(const Protocol& p, int users,
                            const CanonicalOrder* order) {
  if (users < 1) throw OpError("schedule needs at least one user");
  Schedule s;
  s.users = users;
  for (int n : p.topo_order()) {
    if (p.is_variable(n)) continue;
    const std::vector<int>* seq = nullptr;
    if (order) {
      auto it = order->perService.find(n);
      if (it != order->perService.end()) seq = &it->second;
    }
    if (seq) {
      if (seq->size() != static_cast<std::size_t>(users))
        throw OpError("user order for " + p.name(n) +
                      " must list every user once");
      for (int u : *seq) s.steps.push_back({u, n});
    } else if (order && order->members &&
               order->members->size() == static_cast<std::size_t>(users)) {
      // sort by the statically known inputs: the variable arguments
      std::vector<int> us(users);
      for (int u = 0; u < users; ++u) us[u] = u + 1;
      std::stable_sort(us.begin(), us.end(), [&](int a, int b) {
        for (int q : p.preds(n)) {
          if (!p.is_variable(q)) continue;
          int av = (*order->members)[a - 1].bit(q);
          int bv = (*order->members)[b - 1].bit(q);
          if (av != bv) return av < bv;
        }
        return a < b;
      });
      for (int u : us) s.steps.push_back({u, n});
    } else {
      for (int u = 1; u <= users; ++u) s.steps.push_back({u, n});
    }
  }
  return s;
}

}  // namespace lnk
