#include <doctest.h>

#include <set>

#include "modpair/dataset_io.hpp"
#include "modpair/rng.hpp"
#include "modpair/world.hpp"

using namespace modpair;

namespace {

int count_events_of_kind(const WorldInstance& w, const std::string& kind) {
  int n = 0;
  for (const Event& ev : w.events) n += ev.kind == kind;
  return n;
}

std::string dataset_bytes(const std::vector<WorldInstance>& worlds) {
  const std::string path = "/tmp/modpair_test_world.jsonl";
  save_dataset_jsonl(path, worlds);
  return read_file(path);
}

}  // namespace

TEST_CASE("generate_world is deterministic and self-consistent") {
  GenConfig config;
  WorldInstance a = generate_world(0, config);
  WorldInstance b = generate_world(0, config);
  CHECK(dataset_bytes({a}) == dataset_bytes({b}));

  WorldInstance c = generate_world(1, config);
  CHECK(dataset_bytes({a}) != dataset_bytes({c}));
}

TEST_CASE("config validation rejects out-of-range fields") {
  GenConfig config;
  config.event_kinds = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = GenConfig{};
  config.events_min = 2;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = GenConfig{};
  config.value_max = 200;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = GenConfig{};
  config.year_min = 100;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  CHECK_THROWS_AS(generate_dataset(0, GenConfig{}, 0), ConfigError);
}

TEST_CASE("count answers equal the number of matching events") {
  GenConfig config;
  config.question_set = "minmaxcount";
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldInstance w = generate_world(seed, config);
    for (const QAExample& q : w.questions) {
      if (q.program.root.module->name != "count") continue;
      if (q.program.root.children[0].module->name != "find") continue;
      const std::vector<int> events =
          resolve_find_arg(*q.program.root.children[0].string_arg, w, default_lexicon());
      REQUIRE(q.answer.has_value());
      CHECK(q.answer->value == static_cast<long long>(events.size()));
      ++checked;
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("symbolic max picks the largest matching value") {
  GenConfig config;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40 && checked < 5; ++seed) {
    WorldInstance w = generate_world(seed, config);
    if (count_events_of_kind(w, "field-goal") < 2) continue;
    SymbolicResult res = symbolic_execute(parse("find-num(find-max-num(find[field goals]))"), w);
    long long best = -1;
    for (const Event& ev : w.events) {
      if (ev.kind == "field-goal") best = std::max(best, static_cast<long long>(*ev.value));
    }
    CHECK(res.answer.value == best);
    ++checked;
  }
  CHECK(checked == 5);
}

TEST_CASE("unresolvable find arguments raise") {
  WorldInstance w = generate_world(0, GenConfig{});
  CHECK_THROWS_AS(symbolic_execute(parse("count(find[unicorns])"), w), UnresolvableArg);
}

TEST_CASE("every emitted question is consistent with the symbolic oracle") {
  GenConfig config;
  for (std::uint64_t seed = 100; seed < 160; ++seed) {
    WorldInstance w = generate_world(seed, config);
    for (const QAExample& q : w.questions) {
      SymbolicResult res = symbolic_execute(q.program, w);
      CHECK(res.answer == *q.answer);
      CHECK(res.module_outputs == q.gold_module_outputs);
      for (const auto& [path, toks] : q.gold_module_outputs) {
        CHECK(!toks.empty());
        for (int t : toks) {
          CHECK(t >= 0);
          CHECK(t < static_cast<int>(w.passage_tokens.size()));
        }
      }
    }
  }
}

TEST_CASE("numbers and dates point into event spans") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    auto inside_event = [&](int idx) {
      for (const Event& ev : w.events) {
        if (idx >= ev.span_begin && idx < ev.span_end) return true;
      }
      return false;
    };
    int prev = -1;
    for (const auto& [idx, value] : w.numbers) {
      CHECK(inside_event(idx));
      CHECK(idx > prev);
      prev = idx;
    }
    prev = -1;
    for (const auto& [idx, date] : w.dates) {
      CHECK(inside_event(idx));
      CHECK(idx > prev);
      prev = idx;
    }
  }
}

TEST_CASE("generate_dataset splits passages 80/10/10") {
  Dataset ds = generate_dataset(7, GenConfig{}, 100);
  CHECK(ds.split.train.size() == 80);
  CHECK(ds.split.dev.size() == 10);
  CHECK(ds.split.test.size() == 10);
  std::set<std::string> all;
  for (const auto& list : {ds.split.train, ds.split.dev, ds.split.test}) {
    all.insert(list.begin(), list.end());
  }
  CHECK(all.size() == 100);
  validate_dataset(ds.worlds);
}

TEST_CASE("workers do not change the generated dataset") {
  Dataset a = generate_dataset(3, GenConfig{}, 24, 1);
  Dataset b = generate_dataset(3, GenConfig{}, 24, 3);
  CHECK(dataset_bytes(a.worlds) == dataset_bytes(b.worlds));
}

TEST_CASE("minmaxcount preset emits only count and superlative families") {
  GenConfig config;
  config.question_set = "minmaxcount";
  Dataset ds = generate_dataset(5, config, 30);
  const std::set<std::string> allowed = {
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
  };
  for (const WorldInstance& w : ds.worlds) {
    for (const QAExample& q : w.questions) {
      CHECK(allowed.count(template_signature(q.program).key) == 1);
    }
  }
}

TEST_CASE("dataset JSONL round-trips") {
  Dataset ds = generate_dataset(9, GenConfig{}, 12);
  const std::string path = "/tmp/modpair_test_roundtrip.jsonl";
  save_dataset_jsonl(path, ds.worlds);
  std::vector<WorldInstance> loaded = load_dataset_jsonl(path);
  REQUIRE(loaded.size() == ds.worlds.size());
  CHECK(dataset_bytes(loaded) == read_file(path));
  validate_dataset(loaded);
}

TEST_CASE("each template family clears the 2% frequency floor") {
  Dataset ds = generate_dataset(0, GenConfig{}, 500);
  std::set<std::string> train(ds.split.train.begin(), ds.split.train.end());
  std::map<std::string, int> family_counts;
  int total = 0;
  auto family_of = [](const Program& p) -> std::string {
    const std::string sig = template_signature(p).key;
    if (sig == "count(find)") return "1";
    if (sig == "count(filter(find))") return "2";
    for (const char* m : {"find-max-num", "find-min-num"}) {
      const std::string mm(m);
      if (sig == "find-num(" + mm + "(find))") return "3";
      if (sig == "find-num(" + mm + "(filter(find)))") return "4";
      if (sig == "project(" + mm + "(find))") return "5";
      if (sig == "project(" + mm + "(filter(find)))") return "6";
    }
    if (sig == "date-compare-gt(find, find)" || sig == "date-compare-lt(find, find)")
      return "7";
    if (sig == "time-diff(find, find)") return "8";
    return "";
  };
  for (const WorldInstance& w : ds.worlds) {
    if (!train.count(w.passage_id)) continue;
    for (const QAExample& q : w.questions) {
      ++total;
      const std::string fam = family_of(q.program);
      if (!fam.empty()) family_counts[fam]++;
    }
  }
  REQUIRE(total > 1000);
  for (const char* fam : {"1", "2", "3", "4", "5", "6", "7", "8"}) {
    INFO("family ", fam, " count ", family_counts[fam], " of ", total);
    CHECK(family_counts[fam] >= total * 2 / 100);
  }
}

TEST_CASE("event name spans and quarters read back from the passage") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    WorldInstance w = generate_world(seed, GenConfig{});
    for (const Event& ev : w.events) {
      auto [b, e] = event_name_span(w, ev);
      CHECK(b >= ev.span_begin);
      CHECK(e <= ev.span_end);
      if (ev.value) {
        CHECK(w.passage_tokens[b] == ev.agent);
        CHECK(event_quarter(w, ev) >= 1);
        CHECK(event_quarter(w, ev) <= 4);
      } else {
        std::string joined;
        for (int t = b; t < e; ++t) {
          if (t > b) joined += ' ';
          joined += w.passage_tokens[t];
        }
        CHECK(joined == ev.agent);
      }
    }
  }
}
