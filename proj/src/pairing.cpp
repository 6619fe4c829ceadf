#include "modpair/pairing.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <json.hpp>

#include "modpair/dataset_io.hpp"
#include "modpair/rng.hpp"

namespace modpair {

namespace {

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i > 0) out += ' ';
    out += toks[i];
  }
  return out;
}

bool capitalized(const std::string& tok) {
  return !tok.empty() && std::isupper(static_cast<unsigned char>(tok[0]));
}

std::set<std::string> entity_set(const std::vector<std::string>& tokens) {
  std::set<std::string> out;
  for (const std::string& t : tokens) {
    if (capitalized(t)) out.insert(t);
  }
  return out;
}

const std::vector<std::string>& find_arg_at(const QAExample& ex, const NodePath& path) {
  const ProgramNode* node = resolve(ex.program, path);
  if (node == nullptr || !node->string_arg) {
    throw DanglingPairError("no string argument at [" + path.str() + "] of '" + ex.id + "'");
  }
  return *node->string_arg;
}

}  // namespace

const RowVector& ArgEmbeddings::of(const std::string& token) {
  auto it = cache_.find(token);
  if (it != cache_.end()) return it->second;
  Rng rng(mix_seed(seed_, fnv1a(token)));
  RowVector v(dim_);
  for (int i = 0; i < dim_; ++i) v(i) = rng.normal();
  return cache_.emplace(token, std::move(v)).first->second;
}

SimilarityVerdict arg_similarity(const std::vector<std::string>& arg_a,
                                 const std::vector<std::string>& arg_b, const Lexicon& lexicon,
                                 ArgEmbeddings& embeddings, double tau_sim) {
  if (arg_a.empty() || arg_b.empty()) throw DomainError("arg_similarity: empty argument");

  auto weight = [&](const std::string& a, const std::string& b) -> double {
    if (a == b || lexicon.linked(a, b)) return 1.0;
    const RowVector& va = embeddings.of(a);
    const RowVector& vb = embeddings.of(b);
    const double denom = va.norm() * vb.norm();
    if (denom == 0.0) return 0.0;
    return std::clamp(va.dot(vb) / denom, 0.0, 1.0);
  };

  double precision = 0.0;
  for (const std::string& a : arg_a) {
    double best = 0.0;
    for (const std::string& b : arg_b) best = std::max(best, weight(a, b));
    precision += best;
  }
  precision /= static_cast<double>(arg_a.size());

  double recall = 0.0;
  for (const std::string& b : arg_b) {
    double best = 0.0;
    for (const std::string& a : arg_a) best = std::max(best, weight(a, b));
    recall += best;
  }
  recall /= static_cast<double>(arg_b.size());

  SimilarityVerdict v;
  v.score = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  v.entity_match = entity_set(arg_a) == entity_set(arg_b);
  v.equivalent = v.score >= tau_sim && v.entity_match;
  return v;
}

std::vector<PairLink> find_natural_pairs(const WorldInstance& world, const Lexicon& lexicon,
                                         ArgEmbeddings& embeddings, double tau_sim) {
  std::vector<PairLink> out;
  const auto& qs = world.questions;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (qs[i].is_probe) continue;
    for (std::size_t j = i + 1; j < qs.size(); ++j) {
      if (qs[j].is_probe) continue;
      for (const NodePath& pa : find_nodes(qs[i].program, "find")) {
        for (const NodePath& pb : find_nodes(qs[j].program, "find")) {
          const SimilarityVerdict v = arg_similarity(find_arg_at(qs[i], pa),
                                                     find_arg_at(qs[j], pb), lexicon,
                                                     embeddings, tau_sim);
          if (v.equivalent) {
            out.push_back({qs[i].id, pa, qs[j].id, pb, "equality", "found"});
          }
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

/// Template family of a program, identified by its argument-erased
/// signature, with the find-leaf paths the construction attaches to.
struct FamilyMatch {
  enum class Kind { grounding, date_grounding, invertible } kind;
  std::vector<NodePath> find_paths;
};

std::optional<FamilyMatch> match_family(const Program& p) {
  const std::string sig = template_signature(p).key;
  if (sig == "count(find)") return FamilyMatch{FamilyMatch::Kind::grounding, {NodePath{{0}}}};
  if (sig == "count(filter(find))") {
    return FamilyMatch{FamilyMatch::Kind::grounding, {NodePath{{0, 0}}}};
  }
  for (const char* mm : {"find-max-num", "find-min-num"}) {
    const std::string m(mm);
    if (sig == "find-num(" + m + "(find))" || sig == "project(" + m + "(find))") {
      return FamilyMatch{FamilyMatch::Kind::invertible, {NodePath{{0, 0}}}};
    }
    if (sig == "find-num(" + m + "(filter(find)))" ||
        sig == "project(" + m + "(filter(find)))") {
      return FamilyMatch{FamilyMatch::Kind::invertible, {NodePath{{0, 0, 0}}}};
    }
  }
  if (sig == "date-compare-gt(find, find)" || sig == "date-compare-lt(find, find)" ||
      sig == "time-diff(find, find)") {
    return FamilyMatch{FamilyMatch::Kind::date_grounding, {NodePath{{0}}, NodePath{{1}}}};
  }
  return std::nullopt;
}

const std::map<std::string, std::string>& superlative_antonyms() {
  static const std::map<std::string, std::string> m = {
      {"longest", "shortest"}, {"shortest", "longest"}, {"largest", "smallest"},
      {"smallest", "largest"}, {"highest", "lowest"},   {"lowest", "highest"},
  };
  return m;
}

void swap_min_max(ProgramNode& node) {
  if (node.module->name == "find-max-num") {
    node.module = find_module("find-min-num");
  } else if (node.module->name == "find-min-num") {
    node.module = find_module("find-max-num");
  }
  for (ProgramNode& c : node.children) swap_min_max(c);
}

QAExample make_probe(const std::string& id, std::vector<std::string> tokens,
                     const std::string& program_text,
                     std::map<NodePath, std::pair<int, int>> arg_spans,
                     const WorldInstance& world) {
  QAExample probe;
  probe.id = id;
  probe.question_tokens = std::move(tokens);
  probe.program = parse(program_text);
  probe.arg_spans = std::move(arg_spans);
  probe.is_probe = true;
  probe.gold_module_outputs = symbolic_module_outputs(probe.program, world);
  return probe;
}

}  // namespace

std::vector<Construction> construct_template_pairs(const QAExample& example,
                                                   const WorldInstance& world) {
  std::vector<Construction> out;
  if (example.is_probe) return out;
  const std::optional<FamilyMatch> fam = match_family(example.program);
  if (!fam) return out;

  if (fam->kind == FamilyMatch::Kind::grounding ||
      fam->kind == FamilyMatch::Kind::invertible) {
    // "What were the <find-arg> ?" with program span(find[arg])
    const NodePath& fp = fam->find_paths.front();
    const std::vector<std::string>& arg = find_arg_at(example, fp);
    std::vector<std::string> tokens = {"What", "were", "the"};
    const int b = static_cast<int>(tokens.size());
    tokens.insert(tokens.end(), arg.begin(), arg.end());
    const int e = static_cast<int>(tokens.size());
    tokens.push_back("?");
    Construction c;
    c.example = make_probe(example.id + "-probe", std::move(tokens),
                           "span(find[" + join_tokens(arg) + "])",
                           {{NodePath{{0}}, {b, e}}}, world);
    c.links.push_back({example.id, fp, c.example.id, NodePath{{0}}, "equality", "template"});
    out.push_back(std::move(c));
  }

  if (fam->kind == FamilyMatch::Kind::date_grounding) {
    // "When did the <arg> ?" with program find-date(find[arg]), one per leaf
    for (std::size_t i = 0; i < fam->find_paths.size(); ++i) {
      const NodePath& fp = fam->find_paths[i];
      const std::vector<std::string>& arg = find_arg_at(example, fp);
      std::vector<std::string> tokens = {"When", "did", "the"};
      const int b = static_cast<int>(tokens.size());
      tokens.insert(tokens.end(), arg.begin(), arg.end());
      const int e = static_cast<int>(tokens.size());
      tokens.push_back("?");
      Construction c;
      c.example = make_probe(example.id + "-probe" + std::to_string(i), std::move(tokens),
                             "find-date(find[" + join_tokens(arg) + "])",
                             {{NodePath{{0}}, {b, e}}}, world);
      c.links.push_back({example.id, fp, c.example.id, NodePath{{0}}, "equality", "template"});
      out.push_back(std::move(c));
    }
  }

  if (fam->kind == FamilyMatch::Kind::invertible) {
    // superlative inversion: antonym-swapped text, min/max-swapped program,
    // answer filled by symbolic execution
    bool swapped = false;
    QAExample inv = example;
    inv.id = example.id + "-inv";
    for (std::string& tok : inv.question_tokens) {
      auto it = superlative_antonyms().find(tok);
      if (it != superlative_antonyms().end()) {
        tok = it->second;
        swapped = true;
      }
    }
    if (swapped) {
      swap_min_max(inv.program.root);
      SymbolicResult sym = symbolic_execute(inv.program, world);
      inv.answer = sym.answer;
      inv.gold_module_outputs = std::move(sym.module_outputs);
      Construction c;
      c.example = std::move(inv);
      c.links.push_back({example.id, fam->find_paths.front(), c.example.id,
                         fam->find_paths.front(), "equality", "template"});
      out.push_back(std::move(c));
    }
  }
  return out;
}

AugmentResult apply_template_constructions(const WorldInstance& world) {
  AugmentResult result;
  std::map<std::string, std::string> probe_ids;  // content key -> assigned id
  int next_probe = 0;

  for (const QAExample& q : world.questions) {
    for (Construction& c : construct_template_pairs(q, world)) {
      if (c.example.is_probe) {
        const std::string key =
            render(c.example.program) + "|" + join_tokens(c.example.question_tokens);
        auto it = probe_ids.find(key);
        if (it == probe_ids.end()) {
          const std::string id = world.passage_id + "-probe" + std::to_string(next_probe++);
          probe_ids.emplace(key, id);
          c.example.id = id;
          for (PairLink& l : c.links) l.example_b = id;
          result.new_examples.push_back(std::move(c.example));
        } else {
          for (PairLink& l : c.links) l.example_b = it->second;
        }
        result.links.insert(result.links.end(), c.links.begin(), c.links.end());
      } else {
        result.links.insert(result.links.end(), c.links.begin(), c.links.end());
        result.new_examples.push_back(std::move(c.example));
      }
    }
  }
  std::sort(result.links.begin(), result.links.end());
  result.links.erase(std::unique(result.links.begin(), result.links.end()),
                     result.links.end());
  return result;
}

AugmentResult generate_probe_pairs(const WorldInstance& world, std::uint64_t seed, int k,
                                   const Lexicon& lexicon, ArgEmbeddings& embeddings,
                                   double tau_sim) {
  AugmentResult result;
  if (k <= 0) return result;
  const int n_anchors = static_cast<int>(world.numbers.size() + world.dates.size());
  if (n_anchors == 0) return result;

  Rng rng(seed);
  std::vector<int> order(n_anchors);
  for (int i = 0; i < n_anchors; ++i) order[i] = i;
  rng.shuffle(order);
  order.resize(std::min(k, n_anchors));

  auto owning_event = [&](int token_idx) -> const Event* {
    for (const Event& ev : world.events) {
      if (token_idx >= ev.span_begin && token_idx < ev.span_end) return &ev;
    }
    return nullptr;
  };

  std::set<std::string> seen;
  int next_probe = 0;

  for (int pick : order) {
    const bool is_number = pick < static_cast<int>(world.numbers.size());
    const int token_idx =
        is_number ? world.numbers[pick].first
                  : world.dates[pick - static_cast<int>(world.numbers.size())].first;
    const Event* ev = owning_event(token_idx);
    if (ev == nullptr) continue;

    std::vector<std::string> tokens;
    std::string program_text;
    std::pair<int, int> arg_span;
    if (is_number) {
      // "How many yards was <Agent> 's <kind> ?" about the owning event
      std::vector<std::string> kind_toks;
      if (ev->kind == "field-goal") {
        kind_toks = {"field", "goal"};
      } else if (ev->kind == "touchdown-pass") {
        kind_toks = {"touchdown", "pass"};
      } else {
        kind_toks = {"touchdown", "run"};
      }
      tokens = {"How", "many", "yards", "was", ev->agent, "'s"};
      arg_span.first = static_cast<int>(tokens.size());
      tokens.insert(tokens.end(), kind_toks.begin(), kind_toks.end());
      arg_span.second = static_cast<int>(tokens.size());
      tokens.push_back("?");
      program_text = "find-num(find[" + join_tokens(kind_toks) + "])";
    } else {
      // "When did the <Head> of <Name> happen ?"
      std::vector<std::string> desc = {ev->kind == "battle"   ? "Battle"
                                       : ev->kind == "treaty" ? "Treaty"
                                                              : "Siege",
                                       "of"};
      std::istringstream in(ev->agent);
      std::string tok;
      while (in >> tok) desc.push_back(tok);
      tokens = {"When", "did", "the"};
      arg_span.first = static_cast<int>(tokens.size());
      tokens.insert(tokens.end(), desc.begin(), desc.end());
      arg_span.second = static_cast<int>(tokens.size());
      tokens.push_back("happen");
      tokens.push_back("?");
      program_text = "find-date(find[" + join_tokens(desc) + "])";
    }

    const std::string key = program_text + "|" + join_tokens(tokens);
    if (seen.count(key)) continue;

    QAExample probe =
        make_probe("", std::move(tokens), program_text, {{NodePath{{0}}, arg_span}}, world);
    const std::vector<std::string>& probe_arg =
        *resolve(probe.program, NodePath{{0}})->string_arg;

    const std::string id = world.passage_id + "-gprobe" + std::to_string(next_probe);
    std::vector<PairLink> links;
    for (const QAExample& q : world.questions) {
      if (q.is_probe) continue;
      for (const NodePath& pa : find_nodes(q.program, "find")) {
        const SimilarityVerdict v =
            arg_similarity(find_arg_at(q, pa), probe_arg, lexicon, embeddings, tau_sim);
        if (v.equivalent) {
          links.push_back({q.id, pa, id, NodePath{{0}}, "equality", "generated"});
        }
      }
    }
    if (links.empty()) continue;  // unlinked probes would never reach training

    probe.id = id;
    seen.insert(key);
    ++next_probe;
    result.new_examples.push_back(std::move(probe));
    result.links.insert(result.links.end(), links.begin(), links.end());
  }
  std::sort(result.links.begin(), result.links.end());
  return result;
}

void save_pairs_jsonl(const std::string& path, const std::vector<PairLink>& links) {
  std::string out;
  for (const PairLink& l : links) {
    nlohmann::json j;
    j["example_a"] = l.example_a;
    j["path_a"] = l.path_a.str();
    j["example_b"] = l.example_b;
    j["path_b"] = l.path_b.str();
    j["relation"] = l.relation;
    j["source"] = l.source;
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<PairLink> load_pairs_jsonl(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<PairLink> links;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      PairLink l;
      l.example_a = j.at("example_a").get<std::string>();
      l.path_a = NodePath::from_string(j.at("path_a").get<std::string>());
      l.example_b = j.at("example_b").get<std::string>();
      l.path_b = NodePath::from_string(j.at("path_b").get<std::string>());
      l.relation = j.at("relation").get<std::string>();
      l.source = j.at("source").get<std::string>();
      links.push_back(std::move(l));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return links;
}

void validate_pairs(const std::vector<WorldInstance>& worlds,
                    const std::vector<PairLink>& links) {
  std::map<std::string, std::pair<const WorldInstance*, const QAExample*>> index;
  for (const WorldInstance& w : worlds) {
    for (const QAExample& q : w.questions) index[q.id] = {&w, &q};
  }
  for (const PairLink& l : links) {
    auto ia = index.find(l.example_a);
    auto ib = index.find(l.example_b);
    if (ia == index.end() || ib == index.end()) {
      throw DanglingPairError("link references unknown example '" +
                              (ia == index.end() ? l.example_a : l.example_b) + "'");
    }
    if (ia->second.first != ib->second.first) {
      throw DanglingPairError("link endpoints on different passages: " + l.example_a + " vs " +
                              l.example_b);
    }
    const ProgramNode* na = resolve(ia->second.second->program, l.path_a);
    const ProgramNode* nb = resolve(ib->second.second->program, l.path_b);
    if (na == nullptr || nb == nullptr) {
      throw DanglingPairError("link path does not resolve for " + l.example_a + " / " +
                              l.example_b);
    }
    if (template_signature(*na) != template_signature(*nb) ||
        na->module->output_kind != nb->module->output_kind) {
      throw DanglingPairError("link endpoints are not matching subtrees: " + l.example_a + "[" +
                              l.path_a.str() + "] vs " + l.example_b + "[" + l.path_b.str() +
                              "]");
    }
  }
}

}  // namespace modpair
