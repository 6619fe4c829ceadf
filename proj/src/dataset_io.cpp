#include "modpair/dataset_io.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace modpair {

using nlohmann::json;

namespace {

json span_to_json(int b, int e) { return json::array({b, e}); }

json date_to_json(const Date& d) {
  json j;
  j["year"] = d.year;
  if (d.month != 0) j["month"] = d.month;
  return j;
}

Date date_from_json(const json& j) {
  Date d;
  d.year = j.at("year").get<int>();
  if (j.contains("month")) d.month = j.at("month").get<int>();
  return d;
}

json answer_to_json(const GoldAnswer& a) {
  json j;
  j["kind"] = to_string(a.kind);
  if (a.kind == GoldAnswer::Kind::span) {
    j["value"] = span_to_json(a.span_begin, a.span_end);
  } else {
    j["value"] = a.value;
  }
  return j;
}

GoldAnswer answer_from_json(const json& j) {
  GoldAnswer a;
  a.kind = answer_kind_from_string(j.at("kind").get<std::string>());
  if (a.kind == GoldAnswer::Kind::span) {
    a.span_begin = j.at("value").at(0).get<int>();
    a.span_end = j.at("value").at(1).get<int>();
  } else {
    a.value = j.at("value").get<long long>();
  }
  return a;
}

json world_to_json(const WorldInstance& w) {
  json j;
  j["passage_id"] = w.passage_id;
  j["passage_tokens"] = w.passage_tokens;
  json numbers = json::array();
  for (const auto& [idx, v] : w.numbers) numbers.push_back(json::array({idx, v}));
  j["numbers"] = numbers;
  json dates = json::array();
  for (const auto& [idx, d] : w.dates) dates.push_back(json::array({idx, date_to_json(d)}));
  j["dates"] = dates;
  json events = json::array();
  for (const Event& ev : w.events) {
    json e;
    e["kind"] = ev.kind;
    e["agent"] = ev.agent;
    e["value"] = ev.value ? json(*ev.value) : json(nullptr);
    e["date"] = ev.date ? date_to_json(*ev.date) : json(nullptr);
    e["token_span"] = span_to_json(ev.span_begin, ev.span_end);
    events.push_back(e);
  }
  j["events"] = events;
  json questions = json::array();
  for (const QAExample& q : w.questions) {
    json e;
    e["id"] = q.id;
    e["question_tokens"] = q.question_tokens;
    e["program"] = render(q.program);
    json spans = json::object();
    for (const auto& [path, span] : q.arg_spans) {
      spans[path.str()] = span_to_json(span.first, span.second);
    }
    e["arg_spans"] = spans;
    e["answer"] = q.answer ? answer_to_json(*q.answer) : json(nullptr);
    json outputs = json::object();
    for (const auto& [path, toks] : q.gold_module_outputs) outputs[path.str()] = toks;
    e["gold_module_outputs"] = outputs;
    e["is_probe"] = q.is_probe;
    questions.push_back(e);
  }
  j["questions"] = questions;
  return j;
}

WorldInstance world_from_json(const json& j) {
  WorldInstance w;
  w.passage_id = j.at("passage_id").get<std::string>();
  w.passage_tokens = j.at("passage_tokens").get<std::vector<std::string>>();
  for (const json& n : j.at("numbers")) {
    w.numbers.emplace_back(n.at(0).get<int>(), n.at(1).get<int>());
  }
  for (const json& d : j.at("dates")) {
    w.dates.emplace_back(d.at(0).get<int>(), date_from_json(d.at(1)));
  }
  for (const json& e : j.at("events")) {
    Event ev;
    ev.kind = e.at("kind").get<std::string>();
    ev.agent = e.at("agent").get<std::string>();
    if (!e.at("value").is_null()) ev.value = e.at("value").get<int>();
    if (!e.at("date").is_null()) ev.date = date_from_json(e.at("date"));
    ev.span_begin = e.at("token_span").at(0).get<int>();
    ev.span_end = e.at("token_span").at(1).get<int>();
    w.events.push_back(std::move(ev));
  }
  for (const json& e : j.at("questions")) {
    QAExample q;
    q.id = e.at("id").get<std::string>();
    q.question_tokens = e.at("question_tokens").get<std::vector<std::string>>();
    q.program = parse(e.at("program").get<std::string>());
    for (const auto& [key, span] : e.at("arg_spans").items()) {
      q.arg_spans[NodePath::from_string(key)] = {span.at(0).get<int>(), span.at(1).get<int>()};
    }
    if (!e.at("answer").is_null()) q.answer = answer_from_json(e.at("answer"));
    for (const auto& [key, toks] : e.at("gold_module_outputs").items()) {
      q.gold_module_outputs[NodePath::from_string(key)] = toks.get<std::vector<int>>();
    }
    q.is_probe = e.at("is_probe").get<bool>();
    w.questions.push_back(std::move(q));
  }
  return w;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << contents;
  }
  std::filesystem::rename(tmp, path);
}

void save_dataset_jsonl(const std::string& path, const std::vector<WorldInstance>& worlds) {
  std::string out;
  for (const WorldInstance& w : worlds) {
    out += world_to_json(w).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<WorldInstance> load_dataset_jsonl(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<WorldInstance> worlds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      worlds.push_back(world_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return worlds;
}

void save_split_manifest(const std::string& path, const SplitManifest& split) {
  json j;
  j["kind"] = split.kind;
  j["train"] = split.train;
  j["dev"] = split.dev;
  j["test"] = split.test;
  write_file_atomic(path, j.dump(2) + "\n");
}

SplitManifest load_split_manifest(const std::string& path) {
  json j = json::parse(read_file(path));
  SplitManifest s;
  s.kind = j.at("kind").get<std::string>();
  s.train = j.at("train").get<std::vector<std::string>>();
  s.dev = j.at("dev").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  return s;
}

void validate_dataset(const std::vector<WorldInstance>& worlds) {
  std::set<std::string> ids;
  for (const WorldInstance& w : worlds) {
    const int n = static_cast<int>(w.passage_tokens.size());
    for (const QAExample& q : w.questions) {
      if (!ids.insert(q.id).second) throw IoError("duplicate question id '" + q.id + "'");
      if (q.is_probe && q.answer) throw IoError("probe '" + q.id + "' carries an answer");
      if (!q.is_probe && !q.answer) throw IoError("question '" + q.id + "' has no answer");
      std::vector<TypeError> errors = typecheck(q.program, RootPolicy::answer);
      if (!errors.empty()) {
        throw IoError("question '" + q.id + "' program is ill-typed: " + errors[0].message);
      }
      // arg_spans must reproduce string arguments exactly
      for (const auto& [path, prog] : enumerate_subtrees(q.program)) {
        if (!prog.root.string_arg) continue;
        auto it = q.arg_spans.find(path);
        if (it == q.arg_spans.end()) {
          throw IoError("question '" + q.id + "' is missing the argument span at [" +
                        path.str() + "]");
        }
        const auto [b, e] = it->second;
        if (b < 0 || e > static_cast<int>(q.question_tokens.size()) || b >= e) {
          throw IoError("question '" + q.id + "' has an out-of-range argument span");
        }
        const auto& arg = *prog.root.string_arg;
        if (static_cast<int>(arg.size()) != e - b) {
          throw IoError("question '" + q.id + "' argument span length mismatch at [" +
                        path.str() + "]");
        }
        for (int i = b; i < e; ++i) {
          if (q.question_tokens[i] != arg[i - b]) {
            throw IoError("question '" + q.id + "' argument span does not reproduce the arg");
          }
        }
      }
      for (const auto& [path, toks] : q.gold_module_outputs) {
        if (toks.empty()) {
          throw IoError("question '" + q.id + "' has an empty gold set at [" + path.str() + "]");
        }
        for (int t : toks) {
          if (t < 0 || t >= n) throw IoError("question '" + q.id + "' gold token out of range");
        }
      }
    }
  }
}

}  // namespace modpair
