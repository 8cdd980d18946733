// Protocol graphs: multi-party web-service protocols modeled as DAGs.
//
// Nodes are either variables (user inputs, in-degree 0) or services.
// An edge u -> v means v's query takes u's value as an argument; the
// per-node predecessor list preserves declaration order, which fixes
// query argument positions everywhere downstream (execution, tracking).

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lnk {

enum class NodeKind : uint8_t { kVariable, kService };

struct ParseError : std::runtime_error {
  int line;
  int col;
  ParseError(int line, int col, const std::string& what)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + what),
        line(line),
        col(col) {}
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition failure on a library operation (bad node name, missing edge, ...).
struct OpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raw, possibly-invalid protocol description. validate() reports violations;
// Protocol::seal() turns a clean one into an immutable Protocol.
struct ProtocolData {
  std::string name;
  std::vector<std::pair<std::string, NodeKind>> nodes;   // declaration order
  std::vector<std::pair<std::string, std::string>> edges;  // declaration order, u feeds v
};

struct Violation {
  std::string invariant;  // "cycle", "dangling edge", "variable with in-edge", ...
  std::string detail;
};

std::vector<Violation> validate(const ProtocolData& d);

class Protocol {
 public:
  // Throws ValidationError listing every violated invariant.
  static Protocol seal(ProtocolData d);

  int node_count() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const { return names_[id]; }
  NodeKind kind(int id) const { return kinds_[id]; }
  bool is_variable(int id) const { return kinds_[id] == NodeKind::kVariable; }
  const std::string& protocol_name() const { return proto_name_; }

  std::optional<int> find(std::string_view name) const;
  int require(std::string_view name) const;  // throws OpError if absent

  const std::vector<int>& preds(int id) const { return preds_[id]; }
  const std::vector<int>& succs(int id) const { return succs_[id]; }
  // Position of node u in preds(v), or -1.
  int pred_position(int v, int u) const;
  bool has_edge(int u, int v) const;

  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& variables() const { return variables_; }
  const std::vector<int>& services() const { return services_; }
  // Deterministic topological order (Kahn, smallest declaration index first).
  const std::vector<int>& topo_order() const { return topo_; }

  ProtocolData data() const;

 private:
  Protocol() = default;
  std::string proto_name_;
  std::vector<std::string> names_;
  std::vector<NodeKind> kinds_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<int>> preds_;
  std::vector<std::vector<int>> succs_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<int> variables_;
  std::vector<int> services_;
  std::vector<int> topo_;
};

// --- structural queries ---------------------------------------------------

// Variables with a path to n; {n} itself when n is a variable.
std::vector<int> vars_of(const Protocol& p, int n);
// Reflexive-transitive reachability.
bool reaches(const Protocol& p, int u, int v);
std::vector<int> output_nodes(const Protocol& p);  // out-degree 0
std::optional<int> root(const Protocol& p);        // unique output node
// Length (in edges) of the longest directed path.
int depth(const Protocol& p);

// Depth-2 rooted form g(f1(args1), ..., fn(argsn)). None unless every
// non-root service takes only variables, no variable feeds the root
// directly, and every variable feeds some service.
struct FlatForm {
  int root;
  std::vector<int> services;            // declaration order, root excluded
  std::vector<std::vector<int>> args;   // per service, argument order
};
std::optional<FlatForm> as_flat(const Protocol& p);

// Layer partition L0..Ln: every edge goes from L_{i+1} to L_i, variables
// all sit in the deepest layer Ln.
struct LayeredForm {
  std::vector<std::vector<int>> layers;
};
std::optional<LayeredForm> as_layered(const Protocol& p);

// Splits layer-skipping edges with identity pass-through nodes until
// as_layered succeeds. Security-equivalent to the input.
Protocol layerize(const Protocol& p);

// Drops every variable not in keep (with its out-edges); services are
// retained even if they lose all inputs. keep must be a non-empty subset
// of the variables.
Protocol restrict_protocol(const Protocol& p, const std::vector<std::string>& keep);

// --- serialization --------------------------------------------------------

Protocol parse_protocol(std::string_view text);       // throws Parse/ValidationError
ProtocolData parse_protocol_data(std::string_view text);  // syntax only
std::string serialize_protocol(const Protocol& p);    // DSL text; parse . serialize = id
std::string export_dot(const Protocol& p);            // variables boxes, services ellipses
std::string protocol_to_json(const Protocol& p);
Protocol protocol_from_json(std::string_view json);

// --- misc -----------------------------------------------------------------

// Kind-preserving digraph isomorphism, name-insensitive. Intended for the
// small graphs the transformation algebra produces.
bool isomorphic(const Protocol& a, const Protocol& b);

// base + "1", base + "2", ... first name unused in p.
std::string fresh_name(const Protocol& p, std::string_view base);

}  // namespace lnk
