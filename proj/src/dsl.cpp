#include "modpair/dsl.hpp"

#include <cctype>
#include <sstream>

namespace modpair {

std::string to_string(ValueKind k) {
  switch (k) {
    case ValueKind::TokenDist: return "TokenDist";
    case ValueKind::NumberDist: return "NumberDist";
    case ValueKind::DateDist: return "DateDist";
    case ValueKind::CountDist: return "CountDist";
    case ValueKind::ComposedValueDist: return "ComposedValueDist";
    case ValueKind::Answer: return "Answer";
  }
  return "?";
}

namespace {

using VK = ValueKind;

std::vector<ModuleSpec> build_registry() {
  // name, inputs, output, takes_string_arg, answer_root
  return {
      {"find", {}, VK::TokenDist, true, false},
      {"filter", {VK::TokenDist}, VK::TokenDist, true, false},
      {"project", {VK::TokenDist}, VK::TokenDist, true, true},
      {"count", {VK::TokenDist}, VK::CountDist, false, true},
      {"find-num", {VK::TokenDist}, VK::NumberDist, false, true},
      {"find-date", {VK::TokenDist}, VK::DateDist, false, true},
      {"find-max-num", {VK::TokenDist}, VK::TokenDist, false, false},
      {"find-min-num", {VK::TokenDist}, VK::TokenDist, false, false},
      {"num-compare-gt", {VK::TokenDist, VK::TokenDist}, VK::TokenDist, false, true},
      {"num-compare-lt", {VK::TokenDist, VK::TokenDist}, VK::TokenDist, false, true},
      {"date-compare-gt", {VK::TokenDist, VK::TokenDist}, VK::TokenDist, false, true},
      {"date-compare-lt", {VK::TokenDist, VK::TokenDist}, VK::TokenDist, false, true},
      {"num-add", {VK::NumberDist, VK::NumberDist}, VK::ComposedValueDist, false, true},
      {"num-diff", {VK::NumberDist, VK::NumberDist}, VK::ComposedValueDist, false, true},
      {"time-diff", {VK::TokenDist, VK::TokenDist}, VK::ComposedValueDist, false, true},
      {"span", {VK::TokenDist}, VK::TokenDist, false, true},
  };
}

}  // namespace

const std::vector<ModuleSpec>& module_registry() {
  static const std::vector<ModuleSpec> registry = build_registry();
  return registry;
}

const ModuleSpec* find_module(const std::string& name) {
  for (const ModuleSpec& m : module_registry()) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

bool ProgramNode::operator==(const ProgramNode& other) const {
  return module == other.module && string_arg == other.string_arg &&
         children == other.children;
}

std::string NodePath::str() const {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0) out += '.';
    out += std::to_string(indices[i]);
  }
  return out;
}

NodePath NodePath::from_string(const std::string& s) {
  NodePath p;
  if (s.empty()) return p;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t dot = s.find('.', pos);
    if (dot == std::string::npos) dot = s.size();
    p.indices.push_back(std::stoi(s.substr(pos, dot - pos)));
    pos = dot + 1;
  }
  return p;
}

namespace {

// Recursive-descent parser over program text. Tracks byte offsets for
// error reporting.
class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  Program run() {
    ProgramNode root = parse_node();
    skip_ws();
    if (pos_ != text_.size()) {
      throw SyntaxError("trailing input after program", pos_);
    }
    return Program{std::move(root)};
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool at_end() const { return pos_ >= text_.size(); }

  ProgramNode parse_node() {
    skip_ws();
    const std::size_t name_start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '-')) {
      ++pos_;
    }
    if (pos_ == name_start) {
      throw SyntaxError("expected module name", pos_);
    }
    const std::string name = text_.substr(name_start, pos_ - name_start);
    const ModuleSpec* module = find_module(name);
    if (module == nullptr) {
      throw SyntaxError("unknown module name '" + name + "'", name_start);
    }

    ProgramNode node;
    node.module = module;

    skip_ws();
    if (!at_end() && text_[pos_] == '[') {
      const std::size_t bracket = pos_;
      ++pos_;
      std::size_t close = text_.find(']', pos_);
      if (close == std::string::npos) {
        throw SyntaxError("unterminated string argument", bracket);
      }
      std::vector<std::string> tokens;
      std::istringstream in(text_.substr(pos_, close - pos_));
      std::string tok;
      while (in >> tok) tokens.push_back(tok);
      if (tokens.empty()) {
        throw SyntaxError("empty string argument", bracket);
      }
      if (!module->takes_string_arg) {
        throw SyntaxError("module '" + name + "' does not take a string argument", bracket);
      }
      node.string_arg = std::move(tokens);
      pos_ = close + 1;
    } else if (module->takes_string_arg) {
      throw SyntaxError("missing string argument for '" + name + "'", pos_);
    }

    skip_ws();
    if (!at_end() && text_[pos_] == '(') {
      ++pos_;
      skip_ws();
      if (!at_end() && text_[pos_] == ')') {
        throw SyntaxError("empty child list", pos_);
      }
      while (true) {
        node.children.push_back(parse_node());
        skip_ws();
        if (at_end()) {
          throw SyntaxError("unbalanced parentheses: expected ',' or ')'", pos_);
        }
        if (text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        throw SyntaxError("expected ',' or ')'", pos_);
      }
    }

    if (node.children.size() != module->input_kinds.size()) {
      throw SyntaxError("module '" + name + "' takes " +
                            std::to_string(module->input_kinds.size()) + " children, got " +
                            std::to_string(node.children.size()),
                        pos_);
    }
    return node;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

void render_node(const ProgramNode& n, std::string& out, bool erase_args) {
  out += n.module->name;
  if (n.string_arg && !erase_args) {
    out += '[';
    for (std::size_t i = 0; i < n.string_arg->size(); ++i) {
      if (i > 0) out += ' ';
      out += (*n.string_arg)[i];
    }
    out += ']';
  }
  if (!n.children.empty()) {
    out += '(';
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      if (i > 0) out += ", ";
      render_node(n.children[i], out, erase_args);
    }
    out += ')';
  }
}

void typecheck_node(const ProgramNode& n, const NodePath& path, std::vector<TypeError>& out) {
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    const ValueKind expected = n.module->input_kinds[i];
    const ValueKind found = n.children[i].module->output_kind;
    if (found != expected) {
      out.push_back({path.child(static_cast<int>(i)), expected, found,
                     n.module->name + " expects " + to_string(expected) + ", found " +
                         to_string(found)});
    }
    typecheck_node(n.children[i], path.child(static_cast<int>(i)), out);
  }
}

void enumerate_node(const ProgramNode& n, const NodePath& path,
                    std::vector<std::pair<NodePath, Program>>& out) {
  out.emplace_back(path, Program{n});
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    enumerate_node(n.children[i], path.child(static_cast<int>(i)), out);
  }
}

void find_nodes_rec(const ProgramNode& n, const NodePath& path, const std::string& name,
                    std::vector<NodePath>& out) {
  if (n.module->name == name) out.push_back(path);
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    find_nodes_rec(n.children[i], path.child(static_cast<int>(i)), name, out);
  }
}

}  // namespace

Program parse(const std::string& text) { return Parser(text).run(); }

std::string render(const ProgramNode& n) {
  std::string out;
  render_node(n, out, /*erase_args=*/false);
  return out;
}

std::string render(const Program& p) { return render(p.root); }

std::vector<TypeError> typecheck(const Program& p, RootPolicy policy) {
  std::vector<TypeError> errors;
  if (policy == RootPolicy::answer && !p.root.module->answer_root) {
    errors.push_back({NodePath{}, ValueKind::Answer, p.root.module->output_kind,
                      "module '" + p.root.module->name +
                          "' cannot be the root of a full program"});
  }
  typecheck_node(p.root, NodePath{}, errors);
  return errors;
}

const ProgramNode* resolve(const Program& p, const NodePath& path) {
  const ProgramNode* node = &p.root;
  for (int idx : path.indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= node->children.size()) return nullptr;
    node = &node->children[idx];
  }
  return node;
}

std::vector<std::pair<NodePath, Program>> enumerate_subtrees(const Program& p) {
  std::vector<std::pair<NodePath, Program>> out;
  enumerate_node(p.root, NodePath{}, out);
  return out;
}

TemplateSignature template_signature(const ProgramNode& n) {
  std::string key;
  render_node(n, key, /*erase_args=*/true);
  return TemplateSignature{std::move(key)};
}

TemplateSignature template_signature(const Program& p) { return template_signature(p.root); }

std::vector<NodePath> find_nodes(const Program& p, const std::string& name) {
  std::vector<NodePath> out;
  find_nodes_rec(p.root, NodePath{}, name, out);
  return out;
}

}  // namespace modpair
