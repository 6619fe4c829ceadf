#include <doctest.h>

#include <algorithm>
#include <set>

#include "modpair/pairing.hpp"
#include "modpair/rng.hpp"
#include "modpair/world.hpp"

using namespace modpair;

namespace {

std::vector<std::string> toks(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Independent brute-force matcher: ordered double loop over questions and
/// all find-leaf pairs, normalized afterwards. No dedup shortcuts.
std::vector<PairLink> brute_force_pairs(const WorldInstance& world, const Lexicon& lexicon,
                                        ArgEmbeddings& embeddings, double tau) {
  std::set<std::vector<std::string>> seen;
  for (const QAExample& qa : world.questions) {
    (void)qa;
  }
  std::vector<PairLink> out;
  for (const QAExample& qa : world.questions) {
    for (const QAExample& qb : world.questions) {
      if (qa.is_probe || qb.is_probe || qa.id == qb.id) continue;
      for (const NodePath& pa : find_nodes(qa.program, "find")) {
        for (const NodePath& pb : find_nodes(qb.program, "find")) {
          const auto& arga = *resolve(qa.program, pa)->string_arg;
          const auto& argb = *resolve(qb.program, pb)->string_arg;
          if (!arg_similarity(arga, argb, lexicon, embeddings, tau).equivalent) continue;
          PairLink link{qa.id, pa, qb.id, pb, "equality", "found"};
          if (link.example_b < link.example_a ||
              (link.example_a == link.example_b && link.path_b < link.path_a)) {
            std::swap(link.example_a, link.example_b);
            std::swap(link.path_a, link.path_b);
          }
          out.push_back(link);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

TEST_CASE("argument similarity on the canonical phrase pairs") {
  ArgEmbeddings emb(0);
  const Lexicon& lex = default_lexicon();

  SimilarityVerdict same = arg_similarity(toks("field goals"), toks("field goals"), lex, emb);
  CHECK(same.score == doctest::Approx(1.0));
  CHECK(same.entity_match);
  CHECK(same.equivalent);

  SimilarityVerdict syn =
      arg_similarity(toks("passing touchdowns"), toks("touchdown passes"), lex, emb);
  CHECK(syn.score == doctest::Approx(1.0));
  CHECK(syn.equivalent);

  // high lexical overlap but different entities: never equivalent
  SimilarityVerdict ent = arg_similarity(toks("Feely 's field goal"),
                                         toks("Janikowski 's field goal"), lex, emb);
  CHECK(ent.score >= 0.6);
  CHECK(!ent.entity_match);
  CHECK(!ent.equivalent);

  SimilarityVerdict diff = arg_similarity(toks("field goals"), toks("battles"), lex, emb);
  CHECK(diff.score < 0.6);
}

TEST_CASE("argument similarity is symmetric") {
  ArgEmbeddings emb(1);
  Rng rng(3);
  const std::vector<std::string> pool = {"field", "goals",  "touchdown", "passes", "Battle",
                                         "of",    "Verden", "longest",   "'s",     "run"};
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> a, b;
    for (int k = rng.uniform_int(1, 4); k > 0; --k) {
      a.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
    }
    for (int k = rng.uniform_int(1, 4); k > 0; --k) {
      b.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
    }
    const double ab = arg_similarity(a, b, default_lexicon(), emb).score;
    const double ba = arg_similarity(b, a, default_lexicon(), emb).score;
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  }
}

TEST_CASE("natural pair discovery matches the brute-force matcher") {
  ArgEmbeddings emb(0);
  int worlds_checked = 0;
  int links_total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    std::vector<PairLink> fast = find_natural_pairs(w, default_lexicon(), emb);
    std::vector<PairLink> slow = brute_force_pairs(w, default_lexicon(), emb, 0.6);
    CHECK(fast == slow);
    links_total += static_cast<int>(fast.size());
    ++worlds_checked;
  }
  CHECK(worlds_checked == 100);
  CHECK(links_total > 100);  // pairs actually occur
}

TEST_CASE("natural pairs require entity agreement") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    ArgEmbeddings emb(0);
    for (const PairLink& l : find_natural_pairs(w, default_lexicon(), emb)) {
      const QAExample* qa = nullptr;
      const QAExample* qb = nullptr;
      for (const QAExample& q : w.questions) {
        if (q.id == l.example_a) qa = &q;
        if (q.id == l.example_b) qb = &q;
      }
      REQUIRE(qa != nullptr);
      REQUIRE(qb != nullptr);
      const auto& arga = *resolve(qa->program, l.path_a)->string_arg;
      const auto& argb = *resolve(qb->program, l.path_b)->string_arg;
      std::set<std::string> capsa, capsb;
      for (const auto& t : arga) {
        if (std::isupper(static_cast<unsigned char>(t[0]))) capsa.insert(t);
      }
      for (const auto& t : argb) {
        if (std::isupper(static_cast<unsigned char>(t[0]))) capsb.insert(t);
      }
      CHECK(capsa == capsb);
    }
  }
}

TEST_CASE("every emitted link joins matching subtrees") {
  ArgEmbeddings emb(0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    AugmentResult tmpl = apply_template_constructions(w);
    for (QAExample& ex : tmpl.new_examples) w.questions.push_back(std::move(ex));
    AugmentResult gen = generate_probe_pairs(w, seed, 6, default_lexicon(), emb);
    for (QAExample& ex : gen.new_examples) w.questions.push_back(std::move(ex));
    std::vector<PairLink> links = find_natural_pairs(w, default_lexicon(), emb);
    links.insert(links.end(), tmpl.links.begin(), tmpl.links.end());
    links.insert(links.end(), gen.links.begin(), gen.links.end());
    CHECK_NOTHROW(validate_pairs({w}, links));
  }
}

TEST_CASE("grounding construction produces the canonical probe") {
  // plant: Who scored the longest of the touchdowns ?
  WorldInstance w;
  bool planted = false;
  for (std::uint64_t seed = 0; seed < 400 && !planted; ++seed) {
    w = generate_world(seed, GenConfig{});
    for (const QAExample& q : w.questions) {
      if (template_signature(q.program).key == "project(find-max-num(find))" &&
          *resolve(q.program, NodePath{{0, 0}})->string_arg ==
              std::vector<std::string>{"touchdowns"}) {
        std::vector<Construction> cs = construct_template_pairs(q, w);
        REQUIRE(!cs.empty());
        bool found_probe = false;
        for (const Construction& c : cs) {
          if (!c.example.is_probe) continue;
          if (c.example.question_tokens ==
              std::vector<std::string>{"What", "were", "the", "touchdowns", "?"}) {
            found_probe = true;
            CHECK(render(c.example.program) == "span(find[touchdowns])");
            CHECK(!c.links.empty());
            CHECK(c.links[0].path_a == NodePath{{0, 0}});
            CHECK(c.links[0].path_b == NodePath{{0}});
            CHECK(c.links[0].source == "template");
            CHECK(!c.example.answer.has_value());
          }
        }
        CHECK(found_probe);
        planted = true;
        break;
      }
    }
  }
  CHECK(planted);
}

TEST_CASE("date construction produces the canonical probes") {
  bool planted = false;
  for (std::uint64_t seed = 0; seed < 600 && !planted; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    for (const QAExample& q : w.questions) {
      const std::string sig = template_signature(q.program).key;
      if (sig != "time-diff(find, find)") continue;
      const auto& arg0 = *resolve(q.program, NodePath{{0}})->string_arg;
      if (arg0 != std::vector<std::string>{"Battle", "of", "Rullion", "Green"}) continue;
      std::vector<Construction> cs = construct_template_pairs(q, w);
      REQUIRE(cs.size() == 2);  // one probe per find leaf
      CHECK(cs[0].example.question_tokens ==
            std::vector<std::string>{"When", "did", "the", "Battle", "of", "Rullion", "Green",
                                     "?"});
      CHECK(render(cs[0].example.program) == "find-date(find[Battle of Rullion Green])");
      CHECK(cs[0].links[0].path_a == NodePath{{0}});
      CHECK(cs[1].links[0].path_a == NodePath{{1}});
      planted = true;
      break;
    }
  }
  CHECK(planted);
}

TEST_CASE("superlative inversion swaps the antonym and the module") {
  bool planted = false;
  for (std::uint64_t seed = 0; seed < 200 && !planted; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    for (const QAExample& q : w.questions) {
      if (template_signature(q.program).key != "find-num(find-max-num(find))") continue;
      std::vector<Construction> cs = construct_template_pairs(q, w);
      const Construction* inv = nullptr;
      for (const Construction& c : cs) {
        if (!c.example.is_probe) inv = &c;
      }
      REQUIRE(inv != nullptr);
      CHECK(template_signature(inv->example.program).key == "find-num(find-min-num(find))");
      CHECK(std::count(inv->example.question_tokens.begin(),
                       inv->example.question_tokens.end(), "shortest") == 1);
      CHECK(std::count(inv->example.question_tokens.begin(),
                       inv->example.question_tokens.end(), "longest") == 0);
      REQUIRE(inv->example.answer.has_value());
      CHECK(*inv->example.answer == symbolic_execute(inv->example.program, w).answer);
      planted = true;
      break;
    }
  }
  CHECK(planted);
}

TEST_CASE("template construction is total over the eight families") {
  Dataset ds = generate_dataset(21, GenConfig{}, 60);
  const std::set<std::string> families = {
      "count(find)",
      "count(filter(find))",
      "find-num(find-max-num(find))",
      "find-num(find-min-num(find))",
      "find-num(find-max-num(filter(find)))",
      "find-num(find-min-num(filter(find)))",
      "project(find-max-num(find))",
      "project(find-min-num(find))",
      "project(find-max-num(filter(find)))",
      "project(find-min-num(filter(find)))",
      "date-compare-gt(find, find)",
      "date-compare-lt(find, find)",
      "time-diff(find, find)",
  };
  for (const WorldInstance& w : ds.worlds) {
    for (const QAExample& q : w.questions) {
      if (!families.count(template_signature(q.program).key)) continue;
      CHECK(!construct_template_pairs(q, w).empty());
    }
  }
}

TEST_CASE("probe hubs deduplicate across questions of one passage") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    AugmentResult aug = apply_template_constructions(w);
    std::set<std::string> contents;
    std::set<std::string> ids;
    for (const QAExample& ex : aug.new_examples) {
      CHECK(ids.insert(ex.id).second);
      if (!ex.is_probe) continue;
      std::string key = render(ex.program) + "|";
      for (const auto& t : ex.question_tokens) key += t + " ";
      CHECK(contents.insert(key).second);  // no duplicate probes
    }
  }
}

TEST_CASE("generated probes link to matching find arguments") {
  ArgEmbeddings emb(0);
  int with_links = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    AugmentResult aug = generate_probe_pairs(w, seed, 8, default_lexicon(), emb);
    CHECK(generate_probe_pairs(w, seed, 0, default_lexicon(), emb).new_examples.empty());
    for (const QAExample& ex : aug.new_examples) {
      CHECK(ex.is_probe);
      CHECK(!ex.answer.has_value());
      const std::string root = ex.program.root.module->name;
      CHECK((root == "find-num" || root == "find-date"));
    }
    // every probe participates in at least one link
    std::set<std::string> linked;
    for (const PairLink& l : aug.links) {
      CHECK(l.source == "generated");
      linked.insert(l.example_b);
    }
    for (const QAExample& ex : aug.new_examples) CHECK(linked.count(ex.id) == 1);
    with_links += !aug.links.empty();
  }
  CHECK(with_links > 20);
}

TEST_CASE("pair files round-trip") {
  WorldInstance w = generate_world(2, GenConfig{});
  ArgEmbeddings emb(0);
  std::vector<PairLink> links = find_natural_pairs(w, default_lexicon(), emb);
  const std::string path = "/tmp/modpair_test_pairs.jsonl";
  save_pairs_jsonl(path, links);
  CHECK(load_pairs_jsonl(path) == links);
}
