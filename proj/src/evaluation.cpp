#include "modpair/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <json.hpp>

namespace modpair {

using nlohmann::json;

double span_f1(const GoldAnswer& pred, const GoldAnswer& gold) {
  const int overlap_b = std::max(pred.span_begin, gold.span_begin);
  const int overlap_e = std::min(pred.span_end, gold.span_end);
  const int overlap = std::max(0, overlap_e - overlap_b);
  const int np = pred.span_end - pred.span_begin;
  const int ng = gold.span_end - gold.span_begin;
  if (overlap == 0 || np <= 0 || ng <= 0) return 0.0;
  const double precision = static_cast<double>(overlap) / np;
  const double recall = static_cast<double>(overlap) / ng;
  return 2.0 * precision * recall / (precision + recall);
}

AnswerMetrics answer_metrics(const std::vector<GoldAnswer>& predictions,
                             const std::vector<GoldAnswer>& golds) {
  if (predictions.size() != golds.size()) {
    throw LengthMismatch("answer_metrics: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(golds.size()) + " golds");
  }
  AnswerMetrics m;
  m.n = static_cast<int>(golds.size());
  if (m.n == 0) return m;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const GoldAnswer& p = predictions[i];
    const GoldAnswer& g = golds[i];
    bool exact = false;
    double f1 = 0.0;
    if (p.kind == g.kind) {
      if (g.kind == GoldAnswer::Kind::span) {
        exact = p.span_begin == g.span_begin && p.span_end == g.span_end;
        f1 = span_f1(p, g);
      } else {
        exact = p.value == g.value;
        f1 = exact ? 1.0 : 0.0;
      }
    }
    m.em += exact ? 1.0 : 0.0;
    m.f1 += f1;
  }
  m.em /= m.n;
  m.f1 /= m.n;
  return m;
}

std::map<NodePath, double> faithfulness(const ExecutionTrace& trace,
                                        const std::map<NodePath, std::vector<int>>& gold,
                                        double eps) {
  std::map<NodePath, double> out;
  for (const auto& [path, tokens] : gold) {
    const Denotation& d = trace.at(path);  // MissingNode if absent
    const Matrix& dist = d.dist.data();
    double mass = 0.0;
    for (int t : tokens) mass += dist(0, t);
    out[path] = -std::log(mass + eps);
  }
  return out;
}

SplitSpec SplitSpec::by_name(const std::string& name) {
  if (name != "complex-arithmetic" && name != "filter-argmax") {
    throw SplitError("unknown split spec '" + name + "'");
  }
  return SplitSpec{name};
}

namespace {

bool contains_argmax_over_filter(const ProgramNode& n) {
  if ((n.module->name == "find-max-num" || n.module->name == "find-min-num") &&
      !n.children.empty() && n.children[0].module->name == "filter") {
    return true;
  }
  for (const ProgramNode& c : n.children) {
    if (contains_argmax_over_filter(c)) return true;
  }
  return false;
}

}  // namespace

bool SplitSpec::held_out(const Program& program) const {
  if (name == "complex-arithmetic") {
    const std::string& root = program.root.module->name;
    if (root != "num-add" && root != "num-diff") return false;
    const std::string sig = template_signature(program).key;
    return sig != root + "(find-num(find), find-num(find))";
  }
  return contains_argmax_over_filter(program.root);
}

SplitManifest build_comp_split(const std::vector<WorldInstance>& worlds,
                               const SplitSpec& spec) {
  SplitManifest out;
  out.kind = "question";
  std::vector<std::string> remainder;
  for (const WorldInstance& w : worlds) {
    for (const QAExample& q : w.questions) {
      if (q.is_probe) continue;  // probes follow their links, not the manifest
      if (spec.held_out(q.program)) {
        out.test.push_back(q.id);
      } else {
        remainder.push_back(q.id);
      }
    }
  }
  if (out.test.empty() || remainder.empty()) {
    throw SplitError("split '" + spec.name + "' leaves an empty partition");
  }
  for (std::size_t i = 0; i < remainder.size(); ++i) {
    if (i % 10 == 9) {
      out.dev.push_back(remainder[i]);
    } else {
      out.train.push_back(remainder[i]);
    }
  }
  return out;
}

namespace {

std::string question_type(const Program& p) {
  if (p.root.module->name == "count") return "count";
  if (!find_nodes(p, "find-max-num").empty() || !find_nodes(p, "find-min-num").empty()) {
    return "min-max";
  }
  return "other";
}

json metrics_json(const AnswerMetrics& m) {
  return json{{"em", m.em}, {"f1", m.f1}, {"n", m.n}};
}

AnswerMetrics metrics_from_json(const json& j) {
  AnswerMetrics m;
  m.em = j.at("em").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.n = j.at("n").get<int>();
  return m;
}

}  // namespace

std::string EvalReport::to_json() const {
  json j;
  j["split"] = split;
  j["em"] = answers.em;
  j["f1"] = answers.f1;
  j["n_examples"] = n_examples;
  json f;
  f["overall"] = faithfulness.overall;
  f["per_module"] = faithfulness.per_module;
  f["grouped"] = faithfulness.grouped;
  f["n_nodes"] = faithfulness.n_nodes;
  j["faithfulness"] = f;
  json bt = json::object();
  for (const auto& [type, m] : by_type) bt[type] = metrics_json(m);
  j["by_type"] = bt;
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json_text(const std::string& text) {
  json j = json::parse(text);
  EvalReport r;
  r.split = j.at("split").get<std::string>();
  r.answers.em = j.at("em").get<double>();
  r.answers.f1 = j.at("f1").get<double>();
  r.n_examples = j.at("n_examples").get<int>();
  r.answers.n = r.n_examples;
  const json& f = j.at("faithfulness");
  r.faithfulness.overall = f.at("overall").get<double>();
  r.faithfulness.per_module = f.at("per_module").get<std::map<std::string, double>>();
  r.faithfulness.grouped = f.at("grouped").get<std::map<std::string, double>>();
  r.faithfulness.n_nodes = f.at("n_nodes").get<int>();
  for (const auto& [type, m] : j.at("by_type").items()) {
    r.by_type[type] = metrics_from_json(m);
  }
  return r;
}

namespace {

/// Raw per-world results, merged in world order so multi-worker runs are
/// byte-identical to single-worker runs.
struct WorldRows {
  std::vector<GoldAnswer> preds, golds;
  std::vector<std::string> types;
  std::vector<std::pair<std::string, double>> node_scores;  // (module, score)
  std::vector<std::pair<std::string, std::string>> dumps;   // (qid, json)
};

WorldRows evaluate_world(const Executor& executor, ad::ParamStore& store,
                         const WorldInstance& w, const std::set<std::string>& question_ids,
                         bool want_dump) {
  WorldRows rows;
  for (const QAExample& q : w.questions) {
    if (q.is_probe || !q.answer || !question_ids.count(q.id)) continue;
    ad::Tape tape;
    Encoding enc = executor.encode(tape, store, q.question_tokens, w.passage_tokens);
    ExecutionTrace trace = executor.execute(tape, store, q, w, enc);
    rows.preds.push_back(executor.decode_answer(trace, q.program, w));
    rows.golds.push_back(*q.answer);
    rows.types.push_back(question_type(q.program));

    for (const auto& [path, score] : faithfulness(trace, q.gold_module_outputs)) {
      const ProgramNode* node = resolve(q.program, path);
      rows.node_scores.emplace_back(node->module->name, score);
    }

    if (want_dump) {
      json tj = json::object();
      for (const auto& [path, den] : trace.nodes) {
        const Matrix& d = den.dist.data();
        std::vector<std::pair<int, double>> entries;
        for (int i = 0; i < d.cols(); ++i) entries.emplace_back(i, d(0, i));
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.second > b.second; });
        entries.resize(std::min<std::size_t>(entries.size(), 5));
        json top = json::array();
        for (const auto& [idx, prob] : entries) top.push_back(json::array({idx, prob}));
        tj[path.str()] = top;
      }
      rows.dumps.emplace_back(q.id, tj.dump());
    }
  }
  return rows;
}

}  // namespace

EvalReport evaluate_questions(const Executor& executor, ad::ParamStore& store,
                              const std::vector<WorldInstance>& worlds,
                              const std::set<std::string>& question_ids,
                              const std::string& split_name,
                              std::map<std::string, std::string>* trace_dump, int workers) {
  EvalReport report;
  report.split = split_name;

  std::vector<WorldRows> per_world(worlds.size());
  const bool want_dump = trace_dump != nullptr;
  if (workers <= 1 || worlds.size() < 2) {
    for (std::size_t i = 0; i < worlds.size(); ++i) {
      per_world[i] = evaluate_world(executor, store, worlds[i], question_ids, want_dump);
    }
  } else {
    const int n = std::min<int>(workers, static_cast<int>(worlds.size()));
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) {
      pool.emplace_back([&, t]() {
        for (std::size_t i = t; i < worlds.size(); i += n) {
          per_world[i] = evaluate_world(executor, store, worlds[i], question_ids, want_dump);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  std::vector<GoldAnswer> preds, golds;
  std::map<std::string, std::vector<GoldAnswer>> type_preds, type_golds;
  std::map<std::string, std::pair<double, int>> module_sums;
  double overall_sum = 0.0;
  int overall_n = 0;

  for (const WorldRows& rows : per_world) {
    for (std::size_t i = 0; i < rows.preds.size(); ++i) {
      preds.push_back(rows.preds[i]);
      golds.push_back(rows.golds[i]);
      type_preds[rows.types[i]].push_back(rows.preds[i]);
      type_golds[rows.types[i]].push_back(rows.golds[i]);
    }
    for (const auto& [module, score] : rows.node_scores) {
      auto& [sum, count] = module_sums[module];
      sum += score;
      count += 1;
      overall_sum += score;
      overall_n += 1;
    }
    if (trace_dump != nullptr) {
      for (const auto& [qid, dump] : rows.dumps) (*trace_dump)[qid] = dump;
    }
  }

  report.answers = answer_metrics(preds, golds);
  report.n_examples = report.answers.n;
  for (const auto& [type, p] : type_preds) {
    report.by_type[type] = answer_metrics(p, type_golds[type]);
  }
  report.faithfulness.n_nodes = overall_n;
  report.faithfulness.overall = overall_n > 0 ? overall_sum / overall_n : 0.0;
  for (const auto& [module, sums] : module_sums) {
    report.faithfulness.per_module[module] = sums.first / sums.second;
  }
  {  // grouped min/max average mirrors the paper's column pairing
    auto mx = module_sums.find("find-max-num");
    auto mn = module_sums.find("find-min-num");
    double sum = 0;
    int n = 0;
    for (auto it : {mx, mn}) {
      if (it != module_sums.end()) {
        sum += it->second.first;
        n += it->second.second;
      }
    }
    if (n > 0) report.faithfulness.grouped["min-max"] = sum / n;
  }
  return report;
}

namespace {

std::pair<double, double> mean_stdev(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var)};
}

}  // namespace

RunComparison compare_runs(const std::vector<EvalReport>& baseline,
                           const std::vector<EvalReport>& candidate) {
  if (baseline.empty() || baseline.size() != candidate.size()) {
    throw SplitMismatch("compare_runs: group sizes " + std::to_string(baseline.size()) +
                        " vs " + std::to_string(candidate.size()));
  }
  RunComparison c;
  c.split = baseline.front().split;
  c.n_seeds = static_cast<int>(baseline.size());
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (baseline[i].split != c.split || candidate[i].split != c.split) {
      throw SplitMismatch("compare_runs: reports evaluate different splits");
    }
    c.f1_delta.push_back(candidate[i].answers.f1 - baseline[i].answers.f1);
    c.em_delta.push_back(candidate[i].answers.em - baseline[i].answers.em);
    c.faithfulness_delta.push_back(candidate[i].faithfulness.overall -
                                   baseline[i].faithfulness.overall);
  }
  std::tie(c.f1_mean, c.f1_stdev) = mean_stdev(c.f1_delta);
  std::tie(c.em_mean, c.em_stdev) = mean_stdev(c.em_delta);
  std::tie(c.faithfulness_mean, c.faithfulness_stdev) = mean_stdev(c.faithfulness_delta);
  return c;
}

std::string RunComparison::to_json() const {
  json j;
  j["split"] = split;
  j["n_seeds"] = n_seeds;
  j["f1_delta"] = f1_delta;
  j["em_delta"] = em_delta;
  j["faithfulness_delta"] = faithfulness_delta;
  j["f1"] = {{"mean", f1_mean}, {"stdev", f1_stdev}};
  j["em"] = {{"mean", em_mean}, {"stdev", em_stdev}};
  j["faithfulness"] = {{"mean", faithfulness_mean}, {"stdev", faithfulness_stdev}};
  return j.dump(2) + "\n";
}

}  // namespace modpair
