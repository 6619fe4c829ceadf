#include <doctest.h>

#include <cmath>

#include "modpair/executor.hpp"
#include "modpair/rng.hpp"
#include "modpair/world.hpp"

using namespace modpair;
using ad::Tape;
using ad::Value;

namespace {

struct Fixture {
  ModelConfig config;
  GenConfig gen;
  WorldInstance world;
  Executor executor;
  ad::ParamStore store;

  explicit Fixture(std::uint64_t seed = 0, int d = 32, std::string question_set = "default")
      : executor(ModelConfig{}, Vocab{}) {
    gen.question_set = std::move(question_set);
    world = generate_world(seed, gen);
    config.d_model = d;
    executor = Executor(config, Vocab::build({world}));
    executor.init_params(store, mix_seed(seed, 99));
  }

  const QAExample& question_with(const std::string& module) {
    for (const QAExample& q : world.questions) {
      if (!find_nodes(q.program, module).empty()) return q;
    }
    throw std::logic_error("no question using " + module + " in fixture world");
  }

  ExecutionTrace run(Tape& tape, const QAExample& q) {
    Encoding enc = executor.encode(tape, store, q.question_tokens, world.passage_tokens);
    return executor.execute(tape, store, q, world, enc);
  }
};

void check_distribution(const Matrix& d) {
  CHECK(d.rows() == 1);
  CHECK(d.minCoeff() >= 0.0);
  CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-6));
}

/// Hand-built single-kind game world matching the generator's sentence
/// geometry: every sentence 13 tokens with the value at local index 6.
WorldInstance single_kind_world(const std::vector<int>& values) {
  WorldInstance w;
  w.passage_id = "fixture";
  const char* agents[] = {"Smith", "Jones", "Davis", "Walker", "Turner", "Parker"};
  const char* ordinals[] = {"first", "second", "third", "fourth"};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int begin = static_cast<int>(w.passage_tokens.size());
    std::vector<std::string> s = {agents[i % 6], "kicked", "a",
                                  "field",       "goal",   "of",
                                  std::to_string(values[i]), "yards", "in",
                                  "the",         ordinals[i % 4], "quarter", "."};
    w.passage_tokens.insert(w.passage_tokens.end(), s.begin(), s.end());
    w.numbers.emplace_back(begin + 6, values[i]);
    Event ev;
    ev.kind = "field-goal";
    ev.agent = agents[i % 6];
    ev.value = values[i];
    ev.span_begin = begin;
    ev.span_end = begin + 13;
    w.events.push_back(ev);
  }
  return w;
}

QAExample max_question() {
  QAExample q;
  q.id = "fixture-q0";
  q.question_tokens = {"How", "many", "yards", "was", "the", "longest",
                       "of",  "the",  "field", "goals", "?"};
  q.program = parse("find-num(find-max-num(find[field goals]))");
  q.arg_spans[NodePath{{0, 0}}] = {8, 10};
  return q;
}

}  // namespace

TEST_CASE("encoding is deterministic and passage-dependent") {
  Fixture f(3);
  const QAExample& q = f.world.questions.front();
  Tape t1, t2;
  Encoding a = f.executor.encode(t1, f.store, q.question_tokens, f.world.passage_tokens);
  Encoding b = f.executor.encode(t2, f.store, q.question_tokens, f.world.passage_tokens);
  CHECK(a.question_reps.data() == b.question_reps.data());
  CHECK(a.passage_reps.data() == b.passage_reps.data());

  // same question against a different passage: different question reps
  WorldInstance other = generate_world(17, f.gen);
  Executor ex2(f.config, Vocab::build({f.world, other}));
  ad::ParamStore store2;
  ex2.init_params(store2, 1);
  Tape t3, t4;
  Encoding c = ex2.encode(t3, store2, q.question_tokens, f.world.passage_tokens);
  Encoding d = ex2.encode(t4, store2, q.question_tokens, other.passage_tokens);
  CHECK(c.question_reps.data() != d.question_reps.data());
}

TEST_CASE("empty passage is rejected") {
  Fixture f(3);
  Tape t;
  CHECK_THROWS_AS(f.executor.encode(t, f.store, {"How"}, {}), ConfigError);
}

TEST_CASE("trace covers every program node") {
  Fixture f(5);
  for (const QAExample& q : f.world.questions) {
    Tape t;
    ExecutionTrace trace = f.run(t, q);
    const auto subtrees = enumerate_subtrees(q.program);
    CHECK(trace.nodes.size() == subtrees.size());
    for (const auto& [path, sub] : subtrees) {
      CHECK(trace.nodes.count(path) == 1);
      CHECK(trace.at(path).kind == sub.root.module->output_kind);
    }
  }
}

TEST_CASE("every denotation is a probability distribution") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Fixture f(seed, 24);
    for (const QAExample& q : f.world.questions) {
      Tape t;
      ExecutionTrace trace = f.run(t, q);
      for (const auto& [path, den] : trace.nodes) check_distribution(den.dist.data());
    }
  }
}

TEST_CASE("the same subtree in two questions yields different denotations") {
  // find[<same arg>] inside two different question contexts
  GenConfig gen;
  gen.question_set = "minmaxcount";
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldInstance w = generate_world(seed, gen);
    const QAExample* qa = nullptr;
    const QAExample* qb = nullptr;
    NodePath pa, pb;
    for (const QAExample& q1 : w.questions) {
      for (const QAExample& q2 : w.questions) {
        if (q1.id == q2.id) continue;
        for (const NodePath& f1 : find_nodes(q1.program, "find")) {
          for (const NodePath& f2 : find_nodes(q2.program, "find")) {
            if (*resolve(q1.program, f1)->string_arg == *resolve(q2.program, f2)->string_arg) {
              qa = &q1;
              qb = &q2;
              pa = f1;
              pb = f2;
            }
          }
        }
      }
    }
    if (qa == nullptr) continue;
    ModelConfig config;
    config.d_model = 32;
    Executor ex(config, Vocab::build({w}));
    ad::ParamStore store;
    ex.init_params(store, seed + 1);
    Tape t;
    Encoding ea = ex.encode(t, store, qa->question_tokens, w.passage_tokens);
    Encoding eb = ex.encode(t, store, qb->question_tokens, w.passage_tokens);
    ExecutionTrace ta = ex.execute(t, store, *qa, w, ea);
    ExecutionTrace tb = ex.execute(t, store, *qb, w, eb);
    CHECK(ta.at(pa).dist.data() != tb.at(pb).dist.data());
    return;
  }
  FAIL("no shared-argument question pair found");
}

TEST_CASE("answer loss on one-hot and uniform roots") {
  Fixture f(0);
  const ModelConfig& cfg = f.executor.config();
  Program program = parse("count(find[field goals])");
  GoldAnswer gold;
  gold.kind = GoldAnswer::Kind::count;
  gold.value = 3;

  Tape t;
  ExecutionTrace trace;
  Matrix onehot = Matrix::Zero(1, cfg.c_max + 1);
  onehot(0, 3) = 1.0;
  trace.nodes[NodePath{}] = {ValueKind::CountDist, t.constant(onehot)};
  Value loss = f.executor.answer_loss(t, trace, program, gold, f.world);
  CHECK(loss.data()(0, 0) == doctest::Approx(0.0).epsilon(1e-9));

  ExecutionTrace uniform;
  uniform.nodes[NodePath{}] = {
      ValueKind::CountDist,
      t.constant(Matrix::Constant(1, cfg.c_max + 1, 1.0 / (cfg.c_max + 1)))};
  Value lu = f.executor.answer_loss(t, uniform, program, gold, f.world);
  CHECK(lu.data()(0, 0) == doctest::Approx(std::log(10.0)).epsilon(1e-6));

  gold.value = 25;  // outside count support
  CHECK_THROWS_AS(f.executor.answer_loss(t, uniform, program, gold, f.world), KindMismatch);

  // number absent from the composed bin support
  Program diff = parse("num-diff(find-num(find[field goals]), find-num(find[field goals]))");
  GoldAnswer big;
  big.kind = GoldAnswer::Kind::number;
  big.value = 100000;
  ExecutionTrace ctrace;
  const int bins = cfg.value_bin_max - cfg.value_bin_min + 1;
  ctrace.nodes[NodePath{}] = {ValueKind::ComposedValueDist,
                              t.constant(Matrix::Constant(1, bins, 1.0 / bins))};
  CHECK_THROWS_AS(f.executor.answer_loss(t, ctrace, diff, big, f.world), KindMismatch);
}

TEST_CASE("answer loss gradients match finite differences through the whole model") {
  Fixture f(4, 16);
  int checked = 0;
  for (const QAExample& q : f.world.questions) {
    if (checked >= 2) break;
    ++checked;
    Tape tape;
    Encoding enc = f.executor.encode(tape, f.store, q.question_tokens, f.world.passage_tokens);
    ExecutionTrace trace = f.executor.execute(tape, f.store, q, f.world, enc);
    Value loss = f.executor.answer_loss(tape, trace, q.program, *q.answer, f.world);
    tape.backward(loss);

    auto eval_loss = [&]() {
      Tape t2;
      Encoding e2 = f.executor.encode(t2, f.store, q.question_tokens, f.world.passage_tokens);
      ExecutionTrace tr2 = f.executor.execute(t2, f.store, q, f.world, e2);
      return f.executor.answer_loss(t2, tr2, q.program, *q.answer, f.world).data()(0, 0);
    };

    const double h = 1e-5;
    Rng rng(checked);
    for (const char* name : {"find.W", "enc.Wq", "num.gamma", "count.bias", "emb.token"}) {
      ad::Parameter& p = f.store.at(name);
      const int i = rng.uniform_int(0, static_cast<int>(p.value.rows()) - 1);
      const int j = rng.uniform_int(0, static_cast<int>(p.value.cols()) - 1);
      const double orig = p.value(i, j);
      p.value(i, j) = orig + h;
      const double fp = eval_loss();
      p.value(i, j) = orig - h;
      const double fm = eval_loss();
      p.value(i, j) = orig;
      const double fd = (fp - fm) / (2 * h);
      const double ad_grad = p.grad(i, j);
      const double rel =
          std::abs(ad_grad - fd) / std::max({1.0, std::abs(ad_grad), std::abs(fd)});
      INFO("question ", q.id, " param ", name, " entry ", i, ",", j);
      CHECK(rel < 1e-4);
    }
    f.store.zero_grads();
  }
  CHECK(checked == 2);
}

TEST_CASE("soft argmax concentrates on the symbolic max event at small temperature") {
  // gold find distribution as input, tau -> 0: >= 0.99 of the output mass
  // must sit on the max event's tokens
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<int> values = rng.sample_distinct(5, 75, 5);
    WorldInstance w = single_kind_world(values);
    QAExample q = max_question();

    ModelConfig config;
    config.d_model = 32;
    config.tau_softargmax = 0.01;
    Executor ex(config, Vocab::build({w}));
    ad::ParamStore store;
    ex.init_params(store, seed);

    // gold find distribution: uniform over all field-goal spans
    const std::vector<int> gold_find =
        symbolic_module_outputs(parse("span(find[field goals])"), w).at(NodePath{{0}});
    Matrix gold = Matrix::Zero(1, static_cast<long>(w.passage_tokens.size()));
    for (int tok : gold_find) gold(0, tok) = 1.0 / gold_find.size();

    Tape t;
    Encoding enc = ex.encode(t, store, q.question_tokens, w.passage_tokens);
    std::map<NodePath, Executor::DenotationOverride> overrides;
    overrides[NodePath{{0, 0}}] = {ValueKind::TokenDist, gold};
    ExecutionTrace trace = ex.execute(t, store, q, w, enc, overrides);

    const Matrix& out = trace.at(NodePath{{0}}).dist.data();
    check_distribution(out);
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (values[i] > values[best]) best = static_cast<int>(i);
    }
    double mass = 0.0;
    for (int tok = w.events[best].span_begin; tok < w.events[best].span_end; ++tok) {
      mass += out(0, tok);
    }
    INFO("seed ", seed, " mass on max event ", mass);
    CHECK(mass >= 0.99);
  }
}

TEST_CASE("compare gate saturates towards the larger side") {
  WorldInstance w = single_kind_world({70, 10});
  QAExample q;
  q.id = "fixture-cmp";
  q.question_tokens = {"Which", "was", "longer", ":", "Smith", "'s", "field", "goal",
                       "or",    "Jones", "'s",   "field", "goal", "?"};
  q.program = parse("num-compare-gt(find[Smith 's field goal], find[Jones 's field goal])");
  q.arg_spans[NodePath{{0}}] = {4, 8};
  q.arg_spans[NodePath{{1}}] = {9, 13};

  ModelConfig config;
  config.d_model = 32;
  Executor ex(config, Vocab::build({w}));
  ad::ParamStore store;
  ex.init_params(store, 0);

  const int n = static_cast<int>(w.passage_tokens.size());
  Matrix p1 = Matrix::Zero(1, n), p2 = Matrix::Zero(1, n);
  for (int t = w.events[0].span_begin; t < w.events[0].span_end; ++t) p1(0, t) = 1.0 / 13;
  for (int t = w.events[1].span_begin; t < w.events[1].span_end; ++t) p2(0, t) = 1.0 / 13;

  Tape t;
  Encoding enc = ex.encode(t, store, q.question_tokens, w.passage_tokens);
  std::map<NodePath, Executor::DenotationOverride> overrides;
  overrides[NodePath{{0}}] = {ValueKind::TokenDist, p1};
  overrides[NodePath{{1}}] = {ValueKind::TokenDist, p2};
  ExecutionTrace trace = ex.execute(t, store, q, w, enc, overrides);

  // E[v1] - E[v2] = 60 >> tau_c = 1: the output is P1 to within 1e-3 L1
  const Matrix& out = trace.at(NodePath{}).dist.data();
  CHECK((out - p1).cwiseAbs().sum() < 1e-3);
}

TEST_CASE("num-diff over one-hot inputs is exact") {
  WorldInstance w = single_kind_world({42, 19});
  QAExample q;
  q.id = "fixture-diff";
  q.question_tokens = {"How", "many", "more", "yards", "was", "Smith", "'s", "field", "goal",
                       "than", "Jones", "'s", "field", "goal", "?"};
  q.program =
      parse("num-diff(find-num(find[Smith 's field goal]), find-num(find[Jones 's field goal]))");
  q.arg_spans[NodePath{{0, 0}}] = {5, 9};
  q.arg_spans[NodePath{{1, 0}}] = {10, 14};

  ModelConfig config;
  config.d_model = 32;
  Executor ex(config, Vocab::build({w}));
  ad::ParamStore store;
  ex.init_params(store, 0);

  Matrix n1 = Matrix::Zero(1, 2), n2 = Matrix::Zero(1, 2);
  n1(0, 0) = 1.0;  // the 42
  n2(0, 1) = 1.0;  // the 19
  Tape t;
  Encoding enc = ex.encode(t, store, q.question_tokens, w.passage_tokens);
  std::map<NodePath, Executor::DenotationOverride> overrides;
  overrides[NodePath{{0}}] = {ValueKind::NumberDist, n1};
  overrides[NodePath{{1}}] = {ValueKind::NumberDist, n2};
  ExecutionTrace trace = ex.execute(t, store, q, w, enc, overrides);

  const Matrix& out = trace.at(NodePath{}).dist.data();
  check_distribution(out);
  const int expect_bin = (42 - 19) - config.value_bin_min;
  CHECK(out(0, expect_bin) == doctest::Approx(1.0));

  GoldAnswer decoded = ex.decode_answer(trace, q.program, w);
  CHECK(decoded.kind == GoldAnswer::Kind::number);
  CHECK(decoded.value == 23);
}

TEST_CASE("span decoding picks the maximal contiguous segment above threshold") {
  Fixture f(0);
  Program program = parse("span(find[field goals])");
  const int n = static_cast<int>(f.world.passage_tokens.size());
  Matrix dist = Matrix::Constant(1, n, 0.001);
  // a 3-token plateau and a taller single token elsewhere
  dist(0, 4) = 0.1;
  dist(0, 5) = 0.12;
  dist(0, 6) = 0.1;
  dist(0, 10) = 0.15;
  dist /= dist.sum();
  Tape t;
  ExecutionTrace trace;
  trace.nodes[NodePath{}] = {ValueKind::TokenDist, t.constant(dist)};
  GoldAnswer decoded = f.executor.decode_answer(trace, program, f.world);
  CHECK(decoded.kind == GoldAnswer::Kind::span);
  CHECK(decoded.span_begin == 4);
  CHECK(decoded.span_end == 7);
}
