#pragma once

#include <compare>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modpair/errors.hpp"

namespace modpair {

/// Kind of value a module consumes or produces. Every denotation is a
/// probability distribution over the kind's support.
enum class ValueKind {
  TokenDist,
  NumberDist,
  DateDist,
  CountDist,
  ComposedValueDist,
  Answer,
};

std::string to_string(ValueKind k);

/// Signature of one module. `answer_root` marks modules that may sit at the
/// root of a full program; each such module has an answer decoding rule in
/// the evaluator.
struct ModuleSpec {
  std::string name;
  std::vector<ValueKind> input_kinds;
  ValueKind output_kind;
  bool takes_string_arg = false;
  bool answer_root = false;
};

/// The fixed module set: find, filter, project, count, find-num, find-date,
/// find-max-num, find-min-num, num-compare-gt/lt, date-compare-gt/lt,
/// num-add, num-diff, time-diff, span.
const std::vector<ModuleSpec>& module_registry();

/// Registry lookup; nullptr when the name is unknown.
const ModuleSpec* find_module(const std::string& name);

struct ProgramNode {
  const ModuleSpec* module = nullptr;
  std::optional<std::vector<std::string>> string_arg;
  std::vector<ProgramNode> children;

  bool operator==(const ProgramNode& other) const;
};

/// A typed module program (the computation tree executed over a passage).
struct Program {
  ProgramNode root;

  bool operator==(const Program& other) const { return root == other.root; }
};

/// Address of a node: child indices from the root. Empty path = root.
struct NodePath {
  std::vector<int> indices;

  auto operator<=>(const NodePath&) const = default;

  NodePath child(int i) const {
    NodePath p = *this;
    p.indices.push_back(i);
    return p;
  }

  /// "": root, "0.1": second child of first child.
  std::string str() const;
  static NodePath from_string(const std::string& s);
};

/// Program skeleton with string arguments erased; two programs share a
/// signature iff their erased trees are identical.
struct TemplateSignature {
  std::string key;
  auto operator<=>(const TemplateSignature&) const = default;
};

/// One finding of the typechecker.
struct TypeError {
  NodePath path;
  ValueKind expected;
  ValueKind found;
  std::string message;
};

enum class RootPolicy {
  any,     // subtree check: no constraint on the root module
  answer,  // full-program check: root must be an answer-decodable module
};

/// Parses `name[arg tokens](child, child)` syntax. Throws SyntaxError (with
/// byte offset) on unbalanced parentheses, unknown module names, missing or
/// unexpected bracket arguments, and arity mismatches.
Program parse(const std::string& text);

/// Canonical textual form; parse(render(p)) == p.
std::string render(const Program& p);
std::string render(const ProgramNode& n);

/// Empty result = well-typed. With RootPolicy::answer an additional error is
/// reported when the root module cannot decode to an answer.
std::vector<TypeError> typecheck(const Program& p, RootPolicy policy = RootPolicy::any);

/// Node addressed by `path`, or nullptr when the path does not resolve.
const ProgramNode* resolve(const Program& p, const NodePath& path);

/// Every subtree exactly once, in preorder; size == node count.
std::vector<std::pair<NodePath, Program>> enumerate_subtrees(const Program& p);

TemplateSignature template_signature(const Program& p);
TemplateSignature template_signature(const ProgramNode& n);

/// Preorder paths of every node whose module matches `name`.
std::vector<NodePath> find_nodes(const Program& p, const std::string& name);

}  // namespace modpair
