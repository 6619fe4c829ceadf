#include "modpair/executor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "modpair/rng.hpp"

namespace modpair {

using ad::Tape;
using ad::Value;

Vocab Vocab::build(const std::vector<WorldInstance>& worlds) {
  std::set<std::string> seen;
  for (const WorldInstance& w : worlds) {
    seen.insert(w.passage_tokens.begin(), w.passage_tokens.end());
    for (const QAExample& q : w.questions) {
      seen.insert(q.question_tokens.begin(), q.question_tokens.end());
    }
  }
  std::vector<std::string> toks = {"<unk>"};
  toks.insert(toks.end(), seen.begin(), seen.end());
  return from_tokens(std::move(toks));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = static_cast<int>(i);
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? 0 : it->second;
}

const Denotation& ExecutionTrace::at(const NodePath& path) const {
  auto it = nodes.find(path);
  if (it == nodes.end()) throw MissingNode("no trace entry at [" + path.str() + "]");
  return it->second;
}

namespace {

Matrix normal_matrix(Rng& rng, int rows, int cols, Scalar scale) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal() * scale;
  }
  return m;
}

Matrix const_row(const std::vector<Scalar>& xs) {
  Matrix m(1, static_cast<long>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) m(0, static_cast<long>(i)) = xs[i];
  return m;
}

/// Per-execution context: world index structures and lazily built
/// alignment matrices shared by every node of one trace.
struct ExecContext {
  Tape& tape;
  ad::ParamStore& store;
  const Executor& exec;
  const ModelConfig& cfg;
  const QAExample& example;
  const WorldInstance& world;
  const Encoding& enc;
  const std::map<NodePath, Executor::DenotationOverride>* overrides = nullptr;

  std::vector<int> num_positions;
  std::vector<Scalar> num_values;
  std::vector<int> date_positions;
  std::vector<Scalar> date_years;

  Value num_align;   // |p| x n, rows sum to 1; undefined until needed
  Value date_align;  // |p| x m

  ExecContext(Tape& t, ad::ParamStore& s, const Executor& e, const QAExample& ex,
              const WorldInstance& w, const Encoding& en)
      : tape(t), store(s), exec(e), cfg(e.config()), example(ex), world(w), enc(en) {
    for (const auto& [idx, v] : w.numbers) {
      num_positions.push_back(idx);
      num_values.push_back(static_cast<Scalar>(v));
    }
    for (const auto& [idx, d] : w.dates) {
      date_positions.push_back(idx);
      date_years.push_back(static_cast<Scalar>(d.year));
    }
  }

  int passage_len() const { return static_cast<int>(world.passage_tokens.size()); }

  /// Mean representation of a question argument span.
  Value arg_vector(const NodePath& path) {
    auto it = example.arg_spans.find(path);
    if (it == example.arg_spans.end()) {
      throw StateError("missing argument span at [" + path.str() + "] in '" + example.id + "'");
    }
    const auto [b, e] = it->second;
    Value slice = tape.slice_rows(enc.question_reps, b, e - b);
    Matrix uniform = Matrix::Constant(1, e - b, 1.0 / static_cast<Scalar>(e - b));
    return tape.weighted_sum(tape.constant(uniform), slice);
  }

  /// Bilinear scores of a 1xk vector against every passage token: (v W) P^T,
  /// scaled by 1/sqrt(d).
  Value token_scores(Value vec, const std::string& weight_name) {
    Value w = tape.param(store, weight_name);
    Value s = tape.matmul(tape.matmul(vec, w), tape.transpose(enc.passage_reps));
    return tape.scale(s, 1.0 / std::sqrt(static_cast<Scalar>(w.cols())));
  }

  /// Token-to-anchor alignment: bilinear scores plus a learned multiple of
  /// the token distance, softmaxed per token over anchors within the
  /// locality window (the nearest anchor is always in-window). Anchors are
  /// the passage's number or date tokens.
  Value build_alignment(const std::vector<int>& positions, const char* weight_name,
                        const char* gamma_name) {
    const int n = static_cast<int>(positions.size());
    const int p = passage_len();
    if (n == 0) throw DomainError("passage has no alignment anchors for this module");

    Value reps = tape.gather_rows(enc.passage_reps, positions);
    Value w = tape.param(store, weight_name);
    Value bil = tape.scale(tape.matmul(tape.matmul(enc.passage_reps, w), tape.transpose(reps)),
                           1.0 / std::sqrt(static_cast<Scalar>(cfg.d_model)));

    Matrix dist(p, n);
    MaskMatrix allowed(p, n);
    for (int t = 0; t < p; ++t) {
      int nearest = 0;
      for (int j = 0; j < n; ++j) {
        dist(t, j) = std::abs(t - positions[j]);
        if (dist(t, j) < dist(t, nearest)) nearest = j;
      }
      for (int j = 0; j < n; ++j) {
        allowed(t, j) = dist(t, j) <= cfg.align_window || j == nearest;
      }
    }
    Value gamma = tape.param(store, gamma_name);
    Value scores = tape.add(bil, tape.mul_scalar(tape.constant(dist), gamma));
    return tape.masked_softmax_row(scores, allowed);
  }

  Value number_alignment() {
    if (!num_align.defined()) num_align = build_alignment(num_positions, "num.W", "num.gamma");
    return num_align;
  }

  Value date_alignment() {
    if (!date_align.defined()) {
      date_align = build_alignment(date_positions, "date.W", "date.gamma");
    }
    return date_align;
  }

  Value renormalize(Value weights) {
    Value total = tape.pow_const(tape.add_const(tape.sum(weights), 1e-12), -1.0);
    return tape.mul_scalar(weights, total);
  }

  /// Soft selection of the extreme-valued anchor: softmax over anchors of
  /// log(mass) + scaled value / tau, restricted to anchors with nonzero
  /// mass, then redistributed to tokens through the column-normalized
  /// alignment.
  Value soft_argmax_tokens(Value mass, Value align, const std::vector<Scalar>& values,
                           bool maximize) {
    const int n = static_cast<int>(values.size());
    Scalar lo = values[0];
    for (Scalar v : values) lo = std::min(lo, v);
    std::vector<Scalar> scaled(values.size());
    for (std::size_t j = 0; j < values.size(); ++j) {
      const Scalar unit = (values[j] - lo) / cfg.value_unit;
      scaled[j] = (maximize ? unit : -unit) / cfg.tau_softargmax;
    }

    MaskMatrix supported(1, n);
    for (int j = 0; j < n; ++j) supported(0, j) = mass.data()(0, j) > 0.0;

    Value logits = tape.add(tape.log(tape.add_const(mass, 1e-12)),
                            tape.constant(const_row(scaled)));
    Value sel = tape.masked_softmax_row(logits, supported);

    Value colsum = tape.matmul(tape.constant(Matrix::Ones(1, passage_len())), align);
    Value inv = tape.pow_const(tape.add_const(colsum, 1e-12), -1.0);
    return tape.matmul(tape.mul(sel, inv), tape.transpose(align));
  }

  /// Outer product of two anchor distributions accumulated into integer
  /// bins at combine(v_i, v_j), clipped to the bin range.
  Value composed_bins(Value d1, Value d2, const std::vector<Scalar>& v1,
                      const std::vector<Scalar>& v2,
                      long long (*combine)(Scalar, Scalar), int bin_min, int bin_max) {
    const int n1 = static_cast<int>(v1.size());
    const int n2 = static_cast<int>(v2.size());
    const int bins = bin_max - bin_min + 1;
    Matrix binning = Matrix::Zero(n1 * n2, bins);
    for (int i = 0; i < n1; ++i) {
      for (int j = 0; j < n2; ++j) {
        long long value = combine(v1[i], v2[j]);
        value = std::clamp(value, static_cast<long long>(bin_min),
                           static_cast<long long>(bin_max));
        binning(i * n2 + j, static_cast<int>(value - bin_min)) = 1.0;
      }
    }
    Value outer = tape.matmul(tape.transpose(d1), d2);
    return tape.matmul(tape.reshape_row(outer), tape.constant(std::move(binning)));
  }
};

Denotation exec_node(ExecContext& ctx, const ProgramNode& node, const NodePath& path,
                     ExecutionTrace& trace);

Denotation exec_children_and_dispatch(ExecContext& ctx, const ProgramNode& node,
                                      const NodePath& path, ExecutionTrace& trace) {
  Tape& t = ctx.tape;
  const std::string& name = node.module->name;
  std::vector<Denotation> kids;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    kids.push_back(exec_node(ctx, node.children[i], path.child(static_cast<int>(i)), trace));
  }

  Denotation out;
  out.kind = node.module->output_kind;

  if (name == "find") {
    out.dist = t.softmax_row(ctx.token_scores(ctx.arg_vector(path), "find.W"));
  } else if (name == "filter") {
    Value gate = t.sigmoid(ctx.token_scores(ctx.arg_vector(path), "filter.W"));
    out.dist = ctx.renormalize(t.mul(kids[0].dist, gate));
  } else if (name == "project") {
    Value pooled = t.weighted_sum(kids[0].dist, ctx.enc.passage_reps);
    Value combo = t.concat_cols(ctx.arg_vector(path), pooled);
    out.dist = t.softmax_row(ctx.token_scores(combo, "project.W"));
  } else if (name == "find-num") {
    out.dist = t.matmul(kids[0].dist, ctx.number_alignment());
  } else if (name == "find-date") {
    out.dist = t.matmul(kids[0].dist, ctx.date_alignment());
  } else if (name == "find-max-num" || name == "find-min-num") {
    Value align = ctx.number_alignment();
    Value mass = t.matmul(kids[0].dist, align);
    out.dist = ctx.soft_argmax_tokens(mass, align, ctx.num_values, name == "find-max-num");
  } else if (name == "count") {
    Value m = t.sum(t.pow_const(kids[0].dist, ctx.cfg.beta_count));
    Value lm = t.log(t.add_const(m, 1e-12));
    std::vector<Scalar> knots;
    for (int k = 0; k < ctx.cfg.count_knots; ++k) {
      knots.push_back(-6.0 + 6.0 * static_cast<Scalar>(k) /
                                 static_cast<Scalar>(ctx.cfg.count_knots - 1));
    }
    Value spread = t.relu(t.sub(
        t.mul_scalar(t.constant(Matrix::Ones(1, ctx.cfg.count_knots)), lm),
        t.constant(const_row(knots))));
    Value drop = t.matmul(spread, t.softplus(t.param(ctx.store, "count.slopes")));
    Value h = t.sub(t.param(ctx.store, "count.bias"), drop);
    std::vector<Scalar> grid;
    for (int c = 0; c <= ctx.cfg.c_max; ++c) grid.push_back(static_cast<Scalar>(c));
    Value diff = t.sub(t.mul_scalar(t.constant(Matrix::Ones(1, ctx.cfg.c_max + 1)), h),
                       t.constant(const_row(grid)));
    out.dist = t.softmax_row(t.scale(t.mul(diff, diff), -1.0));
  } else if (name == "num-compare-gt" || name == "num-compare-lt" ||
             name == "date-compare-gt" || name == "date-compare-lt") {
    const bool numeric = name.rfind("num", 0) == 0;
    Value align = numeric ? ctx.number_alignment() : ctx.date_alignment();
    const std::vector<Scalar>& values = numeric ? ctx.num_values : ctx.date_years;
    Matrix vcol(static_cast<long>(values.size()), 1);
    for (std::size_t j = 0; j < values.size(); ++j) vcol(static_cast<long>(j), 0) = values[j];
    Value vconst = t.constant(vcol);
    Value e1 = t.matmul(t.matmul(kids[0].dist, align), vconst);
    Value e2 = t.matmul(t.matmul(kids[1].dist, align), vconst);
    Value g = t.sigmoid(t.scale(t.sub(e1, e2), 1.0 / ctx.cfg.tau_compare));
    Value gbar = t.sub(t.constant(Matrix::Ones(1, 1)), g);
    const bool greater = name.ends_with("gt");
    Value w1 = greater ? g : gbar;
    Value w2 = greater ? gbar : g;
    out.dist = t.add(t.mul_scalar(kids[0].dist, w1), t.mul_scalar(kids[1].dist, w2));
  } else if (name == "num-add" || name == "num-diff") {
    auto combine = name == "num-add"
                       ? +[](Scalar a, Scalar b) { return static_cast<long long>(a + b); }
                       : +[](Scalar a, Scalar b) { return static_cast<long long>(a - b); };
    out.dist = ctx.composed_bins(kids[0].dist, kids[1].dist, ctx.num_values, ctx.num_values,
                                 combine, ctx.cfg.value_bin_min, ctx.cfg.value_bin_max);
  } else if (name == "time-diff") {
    Value align = ctx.date_alignment();
    Value d1 = t.matmul(kids[0].dist, align);
    Value d2 = t.matmul(kids[1].dist, align);
    out.dist = ctx.composed_bins(
        d1, d2, ctx.date_years, ctx.date_years,
        +[](Scalar a, Scalar b) { return static_cast<long long>(b - a); },
        ctx.cfg.yeardiff_bin_min, ctx.cfg.yeardiff_bin_max);
  } else if (name == "span") {
    out.dist = kids[0].dist;
  } else {
    throw StateError("no neural rule for module '" + name + "'");
  }
  return out;
}

Denotation exec_node(ExecContext& ctx, const ProgramNode& node, const NodePath& path,
                     ExecutionTrace& trace) {
  if (ctx.overrides != nullptr) {
    auto it = ctx.overrides->find(path);
    if (it != ctx.overrides->end()) {
      Denotation d{it->second.kind, ctx.tape.constant(it->second.dist)};
      trace.nodes[path] = d;
      return d;
    }
  }
  Denotation d = exec_children_and_dispatch(ctx, node, path, trace);
  trace.nodes[path] = d;
  return d;
}

}  // namespace

void Executor::init_params(ad::ParamStore& store, std::uint64_t seed) const {
  Rng rng(seed);
  const int d = config_.d_model;
  auto fill = [&](const std::string& name, int rows, int cols, Scalar scale) {
    store.create(name, rows, cols).value = normal_matrix(rng, rows, cols, scale);
  };
  fill("emb.token", vocab_.size(), d, config_.emb_init);
  fill("emb.pos", config_.max_seq, d, config_.emb_init);
  fill("enc.Wq", d, d, config_.weight_init);
  fill("enc.Wk", d, d, config_.weight_init);
  fill("enc.Wv", d, d, config_.weight_init);
  fill("find.W", d, d, config_.weight_init);
  fill("filter.W", d, d, config_.weight_init);
  fill("project.W", 2 * d, d, config_.weight_init);
  fill("num.W", d, d, config_.weight_init);
  fill("date.W", d, d, config_.weight_init);
  store.create("num.gamma", 1, 1).value(0, 0) = config_.gamma_dist_init;
  store.create("date.gamma", 1, 1).value(0, 0) = config_.gamma_dist_init;
  // init puts the count head's scalar in the useful range of log-mass
  store.create("count.slopes", config_.count_knots, 1).value.setConstant(0.4);
  store.create("count.bias", 1, 1).value(0, 0) = 8.0;
}

Encoding Executor::encode(Tape& tape, ad::ParamStore& store,
                          const std::vector<std::string>& question_tokens,
                          const std::vector<std::string>& passage_tokens) const {
  const int nq = static_cast<int>(question_tokens.size());
  const int np = static_cast<int>(passage_tokens.size());
  if (nq == 0 || np == 0) throw ConfigError("encode: empty question or passage");
  if (nq + np > config_.max_seq) {
    throw ConfigError("encode: sequence length " + std::to_string(nq + np) +
                      " exceeds max_seq " + std::to_string(config_.max_seq));
  }
  std::vector<int> ids;
  ids.reserve(nq + np);
  for (const std::string& tok : question_tokens) ids.push_back(vocab_.id(tok));
  for (const std::string& tok : passage_tokens) ids.push_back(vocab_.id(tok));

  Value emb = tape.gather_rows(tape.param(store, "emb.token"), ids);
  Value pos = tape.slice_rows(tape.param(store, "emb.pos"), 0, nq + np);
  Value x = tape.add(emb, pos);

  Value q = tape.matmul(x, tape.param(store, "enc.Wq"));
  Value k = tape.matmul(x, tape.param(store, "enc.Wk"));
  Value v = tape.matmul(x, tape.param(store, "enc.Wv"));
  Value att = tape.softmax_row(
      tape.scale(tape.matmul(q, tape.transpose(k)),
                 1.0 / std::sqrt(static_cast<Scalar>(config_.d_model))));
  Value h = tape.add(x, tape.matmul(att, v));

  Encoding enc;
  enc.question_reps = tape.slice_rows(h, 0, nq);
  enc.passage_reps = tape.slice_rows(h, nq, np);
  return enc;
}

ExecutionTrace Executor::execute(Tape& tape, ad::ParamStore& store, const QAExample& example,
                                 const WorldInstance& world, const Encoding& enc,
                                 const std::map<NodePath, DenotationOverride>& overrides) const {
  ExecContext ctx(tape, store, *this, example, world, enc);
  ctx.overrides = &overrides;
  ExecutionTrace trace;
  exec_node(ctx, example.program.root, NodePath{}, trace);
  return trace;
}

namespace {

/// Indicator column over the support positions matching the gold outcome.
Matrix gold_indicator(const Executor& exec, ValueKind kind, const std::string& root_module,
                      const GoldAnswer& gold, const WorldInstance& world, int support) {
  const ModelConfig& cfg = exec.config();
  Matrix ind = Matrix::Zero(support, 1);
  bool any = false;
  switch (kind) {
    case ValueKind::CountDist: {
      if (gold.kind != GoldAnswer::Kind::count) throw KindMismatch("root produces a count");
      if (gold.value < 0 || gold.value > cfg.c_max) {
        throw KindMismatch("gold count " + std::to_string(gold.value) + " outside support");
      }
      ind(static_cast<int>(gold.value), 0) = 1.0;
      any = true;
      break;
    }
    case ValueKind::NumberDist: {
      if (gold.kind != GoldAnswer::Kind::number) throw KindMismatch("root produces a number");
      for (std::size_t j = 0; j < world.numbers.size(); ++j) {
        if (world.numbers[j].second == gold.value) {
          ind(static_cast<long>(j), 0) = 1.0;
          any = true;
        }
      }
      if (!any) throw KindMismatch("gold number absent from the passage's number support");
      break;
    }
    case ValueKind::DateDist: {
      if (gold.kind != GoldAnswer::Kind::year) throw KindMismatch("root produces a year");
      for (std::size_t j = 0; j < world.dates.size(); ++j) {
        if (world.dates[j].second.year == gold.value) {
          ind(static_cast<long>(j), 0) = 1.0;
          any = true;
        }
      }
      if (!any) throw KindMismatch("gold year absent from the passage's date support");
      break;
    }
    case ValueKind::ComposedValueDist: {
      if (gold.kind != GoldAnswer::Kind::number) throw KindMismatch("root produces a number");
      const bool year_bins = root_module == "time-diff";
      const int bin_min = year_bins ? cfg.yeardiff_bin_min : cfg.value_bin_min;
      const int bin_max = year_bins ? cfg.yeardiff_bin_max : cfg.value_bin_max;
      if (gold.value < bin_min || gold.value > bin_max) {
        throw KindMismatch("gold value " + std::to_string(gold.value) +
                           " absent from bin support");
      }
      ind(static_cast<int>(gold.value - bin_min), 0) = 1.0;
      any = true;
      break;
    }
    case ValueKind::TokenDist: {
      if (gold.kind != GoldAnswer::Kind::span) throw KindMismatch("root produces a span");
      if (gold.span_begin < 0 || gold.span_end > support || gold.span_begin >= gold.span_end) {
        throw KindMismatch("gold span outside the passage");
      }
      for (int t = gold.span_begin; t < gold.span_end; ++t) ind(t, 0) = 1.0;
      any = true;
      break;
    }
    default:
      throw KindMismatch("root kind cannot express an answer");
  }
  (void)any;
  return ind;
}

}  // namespace

Value Executor::answer_loss(Tape& tape, const ExecutionTrace& trace, const Program& program,
                            const GoldAnswer& gold, const WorldInstance& world) const {
  const Denotation& root = trace.at(NodePath{});
  Matrix ind = gold_indicator(*this, root.kind, program.root.module->name, gold, world,
                              root.dist.cols());
  Value mass = tape.matmul(root.dist, tape.constant(std::move(ind)));
  return tape.scale(tape.log(tape.add_const(mass, 1e-12)), -1.0);
}

GoldAnswer Executor::decode_answer(const ExecutionTrace& trace, const Program& program,
                                   const WorldInstance& world) const {
  const Denotation& root = trace.at(NodePath{});
  const Matrix& d = root.dist.data();
  GoldAnswer out;
  switch (root.kind) {
    case ValueKind::CountDist: {
      long best = 0;
      d.row(0).maxCoeff(&best);
      out.kind = GoldAnswer::Kind::count;
      out.value = best;
      break;
    }
    case ValueKind::NumberDist: {
      long best = 0;
      d.row(0).maxCoeff(&best);
      out.kind = GoldAnswer::Kind::number;
      out.value = world.numbers[best].second;
      break;
    }
    case ValueKind::DateDist: {
      long best = 0;
      d.row(0).maxCoeff(&best);
      out.kind = GoldAnswer::Kind::year;
      out.value = world.dates[best].second.year;
      break;
    }
    case ValueKind::ComposedValueDist: {
      long best = 0;
      d.row(0).maxCoeff(&best);
      const bool year_bins = program.root.module->name == "time-diff";
      const int bin_min = year_bins ? config_.yeardiff_bin_min : config_.value_bin_min;
      out.kind = GoldAnswer::Kind::number;
      out.value = bin_min + best;
      break;
    }
    case ValueKind::TokenDist: {
      // maximal contiguous segment whose every token exceeds alpha * max
      const Scalar thr = config_.alpha_span * d.row(0).maxCoeff();
      int best_b = 0, best_e = 1, b = -1;
      long bmax = 0;
      d.row(0).maxCoeff(&bmax);
      best_b = static_cast<int>(bmax);
      best_e = best_b + 1;
      for (int t = 0; t <= d.cols(); ++t) {
        const bool above = t < d.cols() && d(0, t) > thr;
        if (above && b < 0) b = t;
        if (!above && b >= 0) {
          if (t - b > best_e - best_b) {
            best_b = b;
            best_e = t;
          }
          b = -1;
        }
      }
      out.kind = GoldAnswer::Kind::span;
      out.span_begin = best_b;
      out.span_end = best_e;
      break;
    }
    default:
      throw KindMismatch("root kind cannot be decoded");
  }
  return out;
}

}  // namespace modpair
