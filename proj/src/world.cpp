#include "modpair/world.hpp"

#include <algorithm>
#include <array>
#include <thread>
#include <cassert>
#include <sstream>

#include "modpair/rng.hpp"

namespace modpair {

std::string to_string(GoldAnswer::Kind k) {
  switch (k) {
    case GoldAnswer::Kind::count: return "count";
    case GoldAnswer::Kind::number: return "number";
    case GoldAnswer::Kind::year: return "year";
    case GoldAnswer::Kind::span: return "span";
  }
  return "?";
}

GoldAnswer::Kind answer_kind_from_string(const std::string& s) {
  if (s == "count") return GoldAnswer::Kind::count;
  if (s == "number") return GoldAnswer::Kind::number;
  if (s == "year") return GoldAnswer::Kind::year;
  if (s == "span") return GoldAnswer::Kind::span;
  throw IoError("unknown answer kind '" + s + "'");
}

bool Lexicon::linked(const std::string& a, const std::string& b) const {
  for (const auto& [x, y] : synonyms) {
    if ((x == a && y == b) || (x == b && y == a)) return true;
  }
  return false;
}

const Lexicon& default_lexicon() {
  static const Lexicon lex{{
      {"touchdown", "touchdowns"},
      {"pass", "passes"},
      {"pass", "passing"},
      {"passes", "passing"},
      {"run", "runs"},
      {"run", "rushing"},
      {"runs", "rushing"},
      {"goal", "goals"},
      {"battle", "battles"},
      {"treaty", "treaties"},
      {"siege", "sieges"},
  }};
  return lex;
}

namespace {

const std::array<const char*, 12> kGameAgents = {
    "Smith",  "Jones",  "Walker", "Davis", "Turner", "Parker",
    "Bailey", "Carter", "Mason",  "Hayes", "Brooks", "Fisher"};

const std::array<const char*, 8> kOneTokenNames = {
    "Drumclog", "Verden", "Ghent", "Lund", "Narva", "Tours", "Falkirk", "Dessau"};

const std::array<const char*, 4> kTwoTokenNames = {
    "Rullion Green", "Stamford Bridge", "Marston Moor", "Bosworth Field"};

const std::array<const char*, 12> kMonths = {
    "January", "February", "March",     "April",   "May",      "June",
    "July",    "August",   "September", "October", "November", "December"};

const std::array<const char*, 4> kOrdinals = {"first", "second", "third", "fourth"};

const std::array<const char*, 3> kGameKinds = {"field-goal", "touchdown-pass",
                                               "touchdown-run"};
const std::array<const char*, 3> kHistoryKinds = {"battle", "treaty", "siege"};

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i > 0) out += ' ';
    out += toks[i];
  }
  return out;
}

/// Surface forms a kind (or kind group) can be queried with.
struct KindSurface {
  std::vector<std::string> kinds;   // event kinds covered
  std::string singular;
  std::string plural;
};

std::vector<KindSurface> game_surfaces(bool synonym_variants) {
  std::vector<KindSurface> s;
  s.push_back({{"field-goal"}, "field goal", "field goals"});
  s.push_back({{"touchdown-pass"}, "touchdown pass", "touchdown passes"});
  s.push_back({{"touchdown-run"}, "touchdown run", "touchdown runs"});
  if (synonym_variants) {
    s.push_back({{"touchdown-pass"}, "passing touchdown", "passing touchdowns"});
    s.push_back({{"touchdown-run"}, "rushing touchdown", "rushing touchdowns"});
  }
  s.push_back({{"touchdown-pass", "touchdown-run"}, "touchdown", "touchdowns"});
  return s;
}

std::vector<KindSurface> history_surfaces() {
  return {
      {{"battle"}, "battle", "battles"},
      {{"treaty"}, "treaty", "treaties"},
      {{"siege"}, "siege", "sieges"},
  };
}

const char* history_head(const std::string& kind) {
  if (kind == "battle") return "Battle";
  if (kind == "treaty") return "Treaty";
  return "Siege";
}

bool is_game_kind(const std::string& kind) {
  return kind == "field-goal" || kind == "touchdown-pass" || kind == "touchdown-run";
}

}  // namespace

void GenConfig::validate() const {
  if (n_passages < 1) throw ConfigError("n_passages must be >= 1");
  if (game_fraction < 0.0 || game_fraction > 1.0)
    throw ConfigError("game_fraction must be in [0, 1]");
  if (events_min < 4 || events_max > 12 || events_min > events_max)
    throw ConfigError("events per passage must lie in [4, 12]");
  if (event_kinds < 3) throw ConfigError("event_kinds must be >= 3");
  if (event_kinds > 3) throw ConfigError("at most 3 event kinds per domain are defined");
  if (value_min < 1 || value_max > 80 || value_min >= value_max)
    throw ConfigError("value range must lie in [1, 80]");
  if (year_min < 1400 || year_max > 2015 || year_min >= year_max)
    throw ConfigError("year range must lie in [1400, 2015]");
  if (questions_min < 1 || questions_min > questions_max)
    throw ConfigError("invalid questions per passage range");
  if (question_set != "default" && question_set != "minmaxcount")
    throw ConfigError("question_set must be 'default' or 'minmaxcount'");
}

int event_quarter(const WorldInstance& world, const Event& ev) {
  for (int t = ev.span_begin; t < ev.span_end; ++t) {
    for (std::size_t q = 0; q < kOrdinals.size(); ++q) {
      if (world.passage_tokens[t] == kOrdinals[q]) return static_cast<int>(q) + 1;
    }
  }
  return 0;
}

std::pair<int, int> event_name_span(const WorldInstance& world, const Event& ev) {
  if (is_game_kind(ev.kind)) {
    for (int t = ev.span_begin; t < ev.span_end; ++t) {
      if (world.passage_tokens[t] == ev.agent) return {t, t + 1};
    }
    return {ev.span_begin, ev.span_begin + 1};
  }
  // history: the place-name tokens after "The <Head> of"
  const std::vector<std::string> name = split_tokens(ev.agent);
  const int start = ev.span_begin + 3;
  return {start, start + static_cast<int>(name.size())};
}

// --------------------------------------------------------------------------
// Symbolic execution

std::vector<int> resolve_find_arg(const std::vector<std::string>& arg_tokens,
                                  const WorldInstance& world, const Lexicon& lexicon) {
  if (arg_tokens.empty()) throw UnresolvableArg("empty find argument");
  const std::string arg = join_tokens(arg_tokens);
  const bool game_surface_world =
      !world.events.empty() && is_game_kind(world.events.front().kind);

  auto events_of_kinds = [&](const std::vector<std::string>& kinds,
                             const std::string& agent) {
    std::vector<int> out;
    for (std::size_t i = 0; i < world.events.size(); ++i) {
      const Event& ev = world.events[i];
      bool kind_ok = false;
      for (const std::string& k : kinds) kind_ok = kind_ok || ev.kind == k;
      if (kind_ok && (agent.empty() || ev.agent == agent)) out.push_back(static_cast<int>(i));
    }
    return out;
  };

  // "<Head> of <name...>": a specific history event.
  if (arg_tokens.size() >= 3 && arg_tokens[1] == "of" &&
      (arg_tokens[0] == "Battle" || arg_tokens[0] == "Treaty" || arg_tokens[0] == "Siege")) {
    std::string kind = arg_tokens[0] == "Battle"   ? "battle"
                       : arg_tokens[0] == "Treaty" ? "treaty"
                                                   : "siege";
    std::string name = join_tokens({arg_tokens.begin() + 2, arg_tokens.end()});
    std::vector<int> out = events_of_kinds({kind}, name);
    if (out.empty()) throw UnresolvableArg("no event named '" + arg + "'");
    return out;
  }

  // "<Agent> 's <kind surface>": events of a kind by one agent.
  if (arg_tokens.size() >= 3 && arg_tokens[1] == "'s") {
    const std::string agent = arg_tokens[0];
    const std::string rest = join_tokens({arg_tokens.begin() + 2, arg_tokens.end()});
    for (const KindSurface& ks : game_surfaces(true)) {
      if (rest == ks.singular || rest == ks.plural) {
        std::vector<int> out = events_of_kinds(ks.kinds, agent);
        if (out.empty()) throw UnresolvableArg("no event matching '" + arg + "'");
        return out;
      }
    }
    throw UnresolvableArg("unknown kind surface in '" + arg + "'");
  }

  // Bare kind surface.
  const auto surfaces = game_surface_world ? game_surfaces(true) : history_surfaces();
  for (const KindSurface& ks : surfaces) {
    if (arg == ks.singular || arg == ks.plural) {
      std::vector<int> out = events_of_kinds(ks.kinds, "");
      if (out.empty()) throw UnresolvableArg("no events of kind '" + arg + "'");
      return out;
    }
  }
  (void)lexicon;
  throw UnresolvableArg("cannot resolve find argument '" + arg + "'");
}

namespace {

struct SymState {
  ValueKind kind = ValueKind::TokenDist;
  std::vector<int> events;
  long long scalar = 0;
};

std::vector<int> span_tokens(const WorldInstance& world, const std::vector<int>& events,
                             bool name_only) {
  std::vector<int> out;
  for (int e : events) {
    const Event& ev = world.events[e];
    int b = ev.span_begin, n = ev.span_end;
    if (name_only) std::tie(b, n) = event_name_span(world, ev);
    for (int t = b; t < n; ++t) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int singleton(const std::vector<int>& events, const char* what) {
  if (events.size() != 1) {
    throw DomainError(std::string(what) + " requires a single grounded event, got " +
                      std::to_string(events.size()));
  }
  return events.front();
}

long long event_value(const WorldInstance& world, int e, const char* what) {
  if (!world.events[e].value) throw DomainError(std::string(what) + " on event without value");
  return *world.events[e].value;
}

Date event_date(const WorldInstance& world, int e, const char* what) {
  if (!world.events[e].date) throw DomainError(std::string(what) + " on event without date");
  return *world.events[e].date;
}

bool date_before(const Date& a, const Date& b) {
  if (a.year != b.year) return a.year < b.year;
  return a.month < b.month;
}

SymState sym_eval(const ProgramNode& node, const NodePath& path, const WorldInstance& world,
                  const Lexicon& lexicon, std::map<NodePath, std::vector<int>>& outputs,
                  bool lenient) {
  const std::string& name = node.module->name;
  std::vector<SymState> kids;
  kids.reserve(node.children.size());
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    kids.push_back(sym_eval(node.children[i], path.child(static_cast<int>(i)), world, lexicon,
                            outputs, lenient));
  }

  SymState st;
  st.kind = node.module->output_kind;

  if (name == "find") {
    st.events = resolve_find_arg(*node.string_arg, world, lexicon);
  } else if (name == "filter") {
    const std::vector<std::string>& mod = *node.string_arg;
    if (mod.size() == 4 && mod[0] == "in" && mod[1] == "the" && mod[3] == "half" &&
        (mod[2] == "first" || mod[2] == "second")) {
      const int lo = mod[2] == "first" ? 1 : 3;
      for (int e : kids[0].events) {
        const int q = event_quarter(world, world.events[e]);
        if (q >= lo && q <= lo + 1) st.events.push_back(e);
      }
    } else if (mod.size() == 2 && mod[0] == "by") {
      for (int e : kids[0].events) {
        if (world.events[e].agent == mod[1]) st.events.push_back(e);
      }
    } else {
      throw UnresolvableArg("cannot resolve filter modifier '" + join_tokens(mod) + "'");
    }
  } else if (name == "project") {
    st.events = kids[0].events;
  } else if (name == "count") {
    st.scalar = static_cast<long long>(kids[0].events.size());
  } else if (name == "find-num") {
    // scalars are only defined over a single grounded event; token-set
    // annotation of probe programs skips them
    if (!lenient || kids[0].events.size() == 1) {
      st.scalar = event_value(world, singleton(kids[0].events, "find-num"), "find-num");
    }
  } else if (name == "find-date") {
    if (!lenient || kids[0].events.size() == 1) {
      st.scalar = event_date(world, singleton(kids[0].events, "find-date"), "find-date").year;
    }
  } else if (name == "find-max-num" || name == "find-min-num") {
    if (kids[0].events.empty()) throw DomainError(name + " over empty event set");
    int best = kids[0].events.front();
    for (int e : kids[0].events) {
      const long long v = event_value(world, e, name.c_str());
      const long long bv = event_value(world, best, name.c_str());
      if ((name == "find-max-num" && v > bv) || (name == "find-min-num" && v < bv)) best = e;
    }
    st.events = {best};
  } else if (name == "num-add" || name == "num-diff") {
    st.scalar = name == "num-add" ? kids[0].scalar + kids[1].scalar
                                  : kids[0].scalar - kids[1].scalar;
  } else if (name == "time-diff") {
    const Date a = event_date(world, singleton(kids[0].events, "time-diff"), "time-diff");
    const Date b = event_date(world, singleton(kids[1].events, "time-diff"), "time-diff");
    st.scalar = b.year - a.year;
  } else if (name == "num-compare-gt" || name == "num-compare-lt") {
    const int e1 = singleton(kids[0].events, name.c_str());
    const int e2 = singleton(kids[1].events, name.c_str());
    const long long v1 = event_value(world, e1, name.c_str());
    const long long v2 = event_value(world, e2, name.c_str());
    st.events = {(name == "num-compare-gt") == (v1 > v2) ? e1 : e2};
  } else if (name == "date-compare-gt" || name == "date-compare-lt") {
    const int e1 = singleton(kids[0].events, name.c_str());
    const int e2 = singleton(kids[1].events, name.c_str());
    const bool first_earlier = date_before(event_date(world, e1, name.c_str()),
                                           event_date(world, e2, name.c_str()));
    st.events = {(name == "date-compare-lt") == first_earlier ? e1 : e2};
  } else if (name == "span") {
    st.events = kids[0].events;
  } else {
    throw DomainError("no symbolic rule for module '" + name + "'");
  }

  if (st.kind == ValueKind::TokenDist) {
    outputs[path] = span_tokens(world, st.events, name == "project");
  }
  return st;
}

GoldAnswer answer_from_root(const SymState& st, const ProgramNode& root,
                            const WorldInstance& world) {
  const std::string& name = root.module->name;
  GoldAnswer ans;
  if (name == "count") {
    ans.kind = GoldAnswer::Kind::count;
    ans.value = st.scalar;
  } else if (name == "find-num" || name == "num-add" || name == "num-diff" ||
             name == "time-diff") {
    ans.kind = GoldAnswer::Kind::number;
    ans.value = st.scalar;
  } else if (name == "find-date") {
    ans.kind = GoldAnswer::Kind::year;
    ans.value = st.scalar;
  } else if (name == "project" || name == "num-compare-gt" || name == "num-compare-lt" ||
             name == "date-compare-gt" || name == "date-compare-lt") {
    // the answer text names the selected event
    const Event& ev = world.events[singleton(st.events, "span answer")];
    std::tie(ans.span_begin, ans.span_end) = event_name_span(world, ev);
    ans.kind = GoldAnswer::Kind::span;
  } else if (name == "span") {
    const Event& ev = world.events[singleton(st.events, "span answer")];
    ans.kind = GoldAnswer::Kind::span;
    ans.span_begin = ev.span_begin;
    ans.span_end = ev.span_end;
  } else {
    throw DomainError("module '" + name + "' has no answer decoding rule");
  }
  return ans;
}

}  // namespace

SymbolicResult symbolic_execute(const Program& program, const WorldInstance& world,
                                const Lexicon& lexicon) {
  SymbolicResult result;
  SymState root =
      sym_eval(program.root, NodePath{}, world, lexicon, result.module_outputs, false);
  result.answer = answer_from_root(root, program.root, world);
  return result;
}

std::map<NodePath, std::vector<int>> symbolic_module_outputs(const Program& program,
                                                             const WorldInstance& world,
                                                             const Lexicon& lexicon) {
  std::map<NodePath, std::vector<int>> outputs;
  sym_eval(program.root, NodePath{}, world, lexicon, outputs, true);
  return outputs;
}

// --------------------------------------------------------------------------
// Generation

namespace {

/// A question under construction: tokens plus the program and the spans its
/// string arguments occupy.
struct QuestionDraft {
  std::vector<std::string> tokens;
  std::string program;
  std::map<NodePath, std::pair<int, int>> arg_spans;

  /// Appends `toks`, returning the [begin, end) they occupy.
  std::pair<int, int> append(const std::vector<std::string>& toks) {
    const int b = static_cast<int>(tokens.size());
    tokens.insert(tokens.end(), toks.begin(), toks.end());
    return {b, static_cast<int>(tokens.size())};
  }
  void append(std::initializer_list<const char*> toks) {
    for (const char* t : toks) tokens.emplace_back(t);
  }
};

struct PassageDraft {
  WorldInstance world;
  bool game = false;
};

void emit_game_sentence(WorldInstance& w, Rng& rng, const std::string& kind,
                        const std::string& agent, int value) {
  const int begin = static_cast<int>(w.passage_tokens.size());
  const char* verb = kind == "field-goal" ? "kicked" : kind == "touchdown-pass" ? "threw" : "scored";
  const char* n1 = kind == "field-goal" ? "field" : "touchdown";
  const char* n2 = kind == "field-goal" ? "goal" : kind == "touchdown-pass" ? "pass" : "run";
  const int quarter = rng.uniform_int(1, 4);
  // 13 tokens; the value token sits at local index 6 so every token of the
  // sentence is strictly nearer its own number than any neighbour's.
  std::vector<std::string> s = {agent, verb,    "a",  n1,
                                n2,    "of",    std::to_string(value),
                                "yards", "in",  "the", kOrdinals[quarter - 1],
                                "quarter", "."};
  w.passage_tokens.insert(w.passage_tokens.end(), s.begin(), s.end());
  w.numbers.emplace_back(begin + 6, value);
  Event ev;
  ev.kind = kind;
  ev.agent = agent;
  ev.value = value;
  ev.span_begin = begin;
  ev.span_end = begin + 13;
  w.events.push_back(ev);
}

void emit_history_sentence(WorldInstance& w, Rng& rng, const std::string& kind,
                           const std::string& name, int year) {
  const int begin = static_cast<int>(w.passage_tokens.size());
  const int month = rng.uniform_int(1, 12);
  const std::vector<std::string> name_toks = split_tokens(name);
  std::vector<std::string> s;
  if (name_toks.size() == 1) {
    const char* verb = kind == "battle" ? "occurred" : kind == "treaty" ? "signed" : "happened";
    s = {"The", history_head(kind), "of", name_toks[0], verb, "in", std::to_string(year)};
  } else {
    s = {"The", history_head(kind), "of", name_toks[0], name_toks[1], "in",
         std::to_string(year)};
  }
  s.insert(s.end(), {"in", "the", "month", "of", kMonths[month - 1], "."});
  // year token again sits at local index 6 of a 13-token sentence
  w.passage_tokens.insert(w.passage_tokens.end(), s.begin(), s.end());
  w.dates.emplace_back(begin + 6, Date{year, month});
  Event ev;
  ev.kind = kind;
  ev.agent = name;
  ev.date = Date{year, month};
  ev.span_begin = begin;
  ev.span_end = begin + 13;
  w.events.push_back(ev);
}

std::vector<int> kind_events(const WorldInstance& w, const std::vector<std::string>& kinds) {
  std::vector<int> out;
  for (std::size_t i = 0; i < w.events.size(); ++i) {
    for (const std::string& k : kinds) {
      if (w.events[i].kind == k) {
        out.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> entity_descriptor(const Event& ev) {
  std::vector<std::string> out = {history_head(ev.kind), "of"};
  for (const std::string& t : split_tokens(ev.agent)) out.push_back(t);
  return out;
}

/// Candidate questions for one game passage.
std::vector<QuestionDraft> game_candidates(const WorldInstance& w, Rng& rng,
                                           const GenConfig& config) {
  std::vector<QuestionDraft> out;
  const bool full = config.question_set == "default";

  for (const KindSurface& ks : game_surfaces(config.synonym_variants)) {
    const std::vector<int> evs = kind_events(w, ks.kinds);
    if (evs.empty()) continue;
    const std::vector<std::string> plural = split_tokens(ks.plural);
    const std::vector<std::string> singular = split_tokens(ks.singular);

    {  // (1) count(find)
      QuestionDraft q;
      q.append({"How", "many"});
      auto span = q.append(plural);
      q.append({"were", "scored", "?"});
      q.program = "count(find[" + ks.plural + "])";
      q.arg_spans[NodePath{{0}}] = span;
      out.push_back(std::move(q));
    }

    for (int half = 1; half <= 2; ++half) {  // (2) count(filter(find)), half modifier
      const int lo = half == 1 ? 1 : 3;
      int n_in_half = 0;
      for (int e : evs) {
        const int qt = event_quarter(w, w.events[e]);
        if (qt >= lo && qt <= lo + 1) ++n_in_half;
      }
      if (n_in_half == 0) continue;
      const char* hw = half == 1 ? "first" : "second";
      QuestionDraft q;
      q.append({"How", "many"});
      auto span = q.append(plural);
      q.append({"were", "scored"});
      auto mspan = q.append({std::string("in"), "the", hw, "half"});
      q.append({"?"});
      q.program = "count(filter[in the " + std::string(hw) + " half](find[" + ks.plural + "]))";
      q.arg_spans[NodePath{{0, 0}}] = span;
      q.arg_spans[NodePath{{0}}] = mspan;
      out.push_back(std::move(q));
    }

    if (full) {  // (2) with "by <agent>" modifier
      std::vector<std::string> agents;
      for (int e : evs) {
        if (std::find(agents.begin(), agents.end(), w.events[e].agent) == agents.end())
          agents.push_back(w.events[e].agent);
      }
      const std::string agent = agents[rng.uniform_int(0, static_cast<int>(agents.size()) - 1)];
      QuestionDraft q;
      q.append({"How", "many"});
      auto span = q.append(plural);
      q.append({"were", "scored"});
      auto mspan = q.append({std::string("by"), agent});
      q.append({"?"});
      q.program = "count(filter[by " + agent + "](find[" + ks.plural + "]))";
      q.arg_spans[NodePath{{0, 0}}] = span;
      q.arg_spans[NodePath{{0}}] = mspan;
      out.push_back(std::move(q));
    }

    if (evs.size() >= 2) {
      for (const char* sup : {"longest", "shortest"}) {
        const char* mod = std::string(sup) == "longest" ? "find-max-num" : "find-min-num";
        {  // (3) find-num(find-max/min-num(find))
          QuestionDraft q;
          q.append({"How", "many", "yards", "was", "the", sup, "of", "the"});
          auto span = q.append(plural);
          q.append({"?"});
          q.program = "find-num(" + std::string(mod) + "(find[" + ks.plural + "]))";
          q.arg_spans[NodePath{{0, 0}}] = span;
          out.push_back(std::move(q));
        }
        {  // (5) project(find-max/min-num(find))
          QuestionDraft q;
          auto pspan = q.append({std::string("Who"), "scored"});
          q.append({"the", sup, "of", "the"});
          auto span = q.append(plural);
          q.append({"?"});
          q.program = "project[Who scored](" + std::string(mod) + "(find[" + ks.plural + "]))";
          q.arg_spans[NodePath{}] = pspan;
          q.arg_spans[NodePath{{0, 0}}] = span;
          out.push_back(std::move(q));
        }
        for (int half = 1; half <= 2; ++half) {  // (4) and (6), filtered variants
          const int lo = half == 1 ? 1 : 3;
          int n_in_half = 0;
          for (int e : evs) {
            const int qt = event_quarter(w, w.events[e]);
            if (qt >= lo && qt <= lo + 1) ++n_in_half;
          }
          if (n_in_half < 2) continue;
          const char* hw = half == 1 ? "first" : "second";
          const std::string filter_arg = "in the " + std::string(hw) + " half";
          {
            QuestionDraft q;
            q.append({"How", "many", "yards", "was", "the", sup, "of", "the"});
            auto span = q.append(plural);
            auto mspan = q.append({std::string("in"), "the", hw, "half"});
            q.append({"?"});
            q.program = "find-num(" + std::string(mod) + "(filter[" + filter_arg + "](find[" +
                        ks.plural + "])))";
            q.arg_spans[NodePath{{0, 0, 0}}] = span;
            q.arg_spans[NodePath{{0, 0}}] = mspan;
            out.push_back(std::move(q));
          }
          {
            QuestionDraft q;
            auto pspan = q.append({std::string("Who"), "scored"});
            q.append({"the", sup, "of", "the"});
            auto span = q.append(plural);
            auto mspan = q.append({std::string("in"), "the", hw, "half"});
            q.append({"?"});
            q.program = "project[Who scored](" + std::string(mod) + "(filter[" + filter_arg +
                        "](find[" + ks.plural + "])))";
            q.arg_spans[NodePath{}] = pspan;
            q.arg_spans[NodePath{{0, 0, 0}}] = span;
            q.arg_spans[NodePath{{0, 0}}] = mspan;
            out.push_back(std::move(q));
          }
        }
      }

      if (full) {  // complex arithmetic: longest minus shortest
        QuestionDraft q;
        q.append({"How", "many", "more", "yards", "was", "the", "longest", "of", "the"});
        auto span1 = q.append(plural);
        q.append({"than", "the", "shortest", "of", "the"});
        auto span2 = q.append(plural);
        q.append({"?"});
        q.program = "num-diff(find-num(find-max-num(find[" + ks.plural +
                    "])), find-num(find-min-num(find[" + ks.plural + "])))";
        q.arg_spans[NodePath{{0, 0, 0}}] = span1;
        q.arg_spans[NodePath{{1, 0, 0}}] = span2;
        out.push_back(std::move(q));
      }
    }

    if (full && ks.kinds.size() == 1) {
      // agents with exactly one event of this kind
      std::vector<int> unique_events;
      for (int e : evs) {
        int n = 0;
        for (int e2 : evs) {
          if (w.events[e2].agent == w.events[e].agent) ++n;
        }
        if (n == 1) unique_events.push_back(e);
      }
      if (!unique_events.empty()) {
        const int e = unique_events[rng.uniform_int(0, static_cast<int>(unique_events.size()) - 1)];
        const std::string& agent = w.events[e].agent;
        QuestionDraft q;  // simple find-num(find)
        q.append({"How", "many", "yards", "was"});
        std::vector<std::string> arg = {agent, "'s"};
        arg.insert(arg.end(), singular.begin(), singular.end());
        auto span = q.append(arg);
        q.append({"?"});
        q.program = "find-num(find[" + join_tokens(arg) + "])";
        q.arg_spans[NodePath{{0}}] = span;
        out.push_back(std::move(q));
      }
      if (unique_events.size() >= 2) {
        int ea = unique_events[0], eb = unique_events[1];
        if (*w.events[ea].value < *w.events[eb].value) std::swap(ea, eb);
        std::vector<std::string> arga = {w.events[ea].agent, "'s"};
        arga.insert(arga.end(), singular.begin(), singular.end());
        std::vector<std::string> argb = {w.events[eb].agent, "'s"};
        argb.insert(argb.end(), singular.begin(), singular.end());
        {  // simple subtraction template
          QuestionDraft q;
          q.append({"How", "many", "more", "yards", "was"});
          auto span1 = q.append(arga);
          q.append({"than"});
          auto span2 = q.append(argb);
          q.append({"?"});
          q.program = "num-diff(find-num(find[" + join_tokens(arga) + "]), find-num(find[" +
                      join_tokens(argb) + "]))";
          q.arg_spans[NodePath{{0, 0}}] = span1;
          q.arg_spans[NodePath{{1, 0}}] = span2;
          out.push_back(std::move(q));
        }
        {  // simple addition template
          QuestionDraft q;
          q.append({"How", "many", "combined", "yards", "were"});
          auto span1 = q.append(arga);
          q.append({"and"});
          auto span2 = q.append(argb);
          q.append({"?"});
          q.program = "num-add(find-num(find[" + join_tokens(arga) + "]), find-num(find[" +
                      join_tokens(argb) + "]))";
          q.arg_spans[NodePath{{0, 0}}] = span1;
          q.arg_spans[NodePath{{1, 0}}] = span2;
          out.push_back(std::move(q));
        }
        {  // number comparison
          const bool gt = rng.uniform_int(0, 1) == 1;
          QuestionDraft q;
          q.append({"Which", "was", gt ? "longer" : "shorter", ":"});
          auto span1 = q.append(arga);
          q.append({"or"});
          auto span2 = q.append(argb);
          q.append({"?"});
          q.program = std::string("num-compare-") + (gt ? "gt" : "lt") + "(find[" +
                      join_tokens(arga) + "], find[" + join_tokens(argb) + "])";
          q.arg_spans[NodePath{{0}}] = span1;
          q.arg_spans[NodePath{{1}}] = span2;
          out.push_back(std::move(q));
        }
      }
    }
  }
  return out;
}

std::vector<QuestionDraft> history_candidates(const WorldInstance& w, Rng& rng) {
  std::vector<QuestionDraft> out;

  for (const KindSurface& ks : history_surfaces()) {
    const std::vector<int> evs = kind_events(w, ks.kinds);
    if (evs.empty()) continue;
    QuestionDraft q;  // count(find)
    q.append({"How", "many"});
    auto span = q.append(split_tokens(ks.plural));
    q.append({"were", "there", "?"});
    q.program = "count(find[" + ks.plural + "])";
    q.arg_spans[NodePath{{0}}] = span;
    out.push_back(std::move(q));
  }

  // year questions for a couple of events
  for (std::size_t i = 0; i < w.events.size() && i < 3; ++i) {
    const Event& ev = w.events[i];
    const std::vector<std::string> desc = entity_descriptor(ev);
    QuestionDraft q;
    q.append({"In", "what", "year", "did", "the"});
    auto span = q.append(desc);
    q.append({"occur", "?"});
    q.program = "find-date(find[" + join_tokens(desc) + "])";
    q.arg_spans[NodePath{{0}}] = span;
    out.push_back(std::move(q));
  }

  if (w.events.size() >= 2) {
    // ordered pairs for compare / time-diff questions
    for (int rep = 0; rep < 3; ++rep) {
      int a = rng.uniform_int(0, static_cast<int>(w.events.size()) - 1);
      int b = rng.uniform_int(0, static_cast<int>(w.events.size()) - 1);
      if (a == b) continue;
      const std::vector<std::string> da = entity_descriptor(w.events[a]);
      const std::vector<std::string> db = entity_descriptor(w.events[b]);
      if (rep < 2) {  // (7) date-compare
        const bool first = rep == 0;
        QuestionDraft q;
        q.append({"What", "happened", first ? "first" : "second", ":", "the"});
        auto span1 = q.append(da);
        q.append({"or", "the"});
        auto span2 = q.append(db);
        q.append({"?"});
        q.program = std::string("date-compare-") + (first ? "lt" : "gt") + "(find[" +
                    join_tokens(da) + "], find[" + join_tokens(db) + "])";
        q.arg_spans[NodePath{{0}}] = span1;
        q.arg_spans[NodePath{{1}}] = span2;
        out.push_back(std::move(q));
      } else {  // (8) time-diff; earlier event asked first so the answer is positive
        if (w.events[a].date->year > w.events[b].date->year) std::swap(a, b);
        const std::vector<std::string> ea = entity_descriptor(w.events[a]);
        const std::vector<std::string> eb = entity_descriptor(w.events[b]);
        QuestionDraft q;
        q.append({"How", "many", "years", "after", "the"});
        auto span1 = q.append(ea);
        q.append({"was", "the"});
        auto span2 = q.append(eb);
        q.append({"?"});
        q.program = "time-diff(find[" + join_tokens(ea) + "], find[" + join_tokens(eb) + "])";
        q.arg_spans[NodePath{{0}}] = span1;
        q.arg_spans[NodePath{{1}}] = span2;
        out.push_back(std::move(q));
      }
    }
  }
  return out;
}

}  // namespace

WorldInstance generate_world(std::uint64_t seed, const GenConfig& config,
                             const std::string& passage_id) {
  config.validate();
  Rng rng(seed);
  WorldInstance w;
  w.passage_id = passage_id;

  const bool game = config.question_set == "minmaxcount" ||
                    rng.uniform_real() < config.game_fraction;
  const int n_events = rng.uniform_int(config.events_min, config.events_max);

  if (game) {
    const std::vector<int> values =
        rng.sample_distinct(config.value_min, config.value_max, n_events);
    for (int i = 0; i < n_events; ++i) {
      const std::string kind = kGameKinds[rng.uniform_int(0, config.event_kinds - 1)];
      const std::string agent = kGameAgents[rng.uniform_int(0, kGameAgents.size() - 1)];
      emit_game_sentence(w, rng, kind, agent, values[i]);
    }
  } else {
    const std::vector<int> years =
        rng.sample_distinct(config.year_min, config.year_max, n_events);
    std::vector<std::string> names;
    for (const char* n : kOneTokenNames) names.push_back(n);
    for (const char* n : kTwoTokenNames) names.push_back(n);
    rng.shuffle(names);
    for (int i = 0; i < n_events; ++i) {
      const std::string kind = kHistoryKinds[rng.uniform_int(0, config.event_kinds - 1)];
      emit_history_sentence(w, rng, kind, names[i % names.size()], years[i]);
    }
  }

  std::vector<QuestionDraft> candidates =
      game ? game_candidates(w, rng, config) : history_candidates(w, rng);
  rng.shuffle(candidates);
  const int want = rng.uniform_int(config.questions_min, config.questions_max);
  const int take = std::min<int>(want, static_cast<int>(candidates.size()));

  for (int i = 0; i < take; ++i) {
    QuestionDraft& d = candidates[i];
    QAExample ex;
    ex.id = passage_id + "-q" + std::to_string(i);
    ex.question_tokens = std::move(d.tokens);
    ex.program = parse(d.program);
    ex.arg_spans = std::move(d.arg_spans);
    SymbolicResult sym = symbolic_execute(ex.program, w);
    ex.answer = sym.answer;
    ex.gold_module_outputs = std::move(sym.module_outputs);
    w.questions.push_back(std::move(ex));
  }
  return w;
}

Dataset generate_dataset(std::uint64_t seed, const GenConfig& config, int n_passages,
                         int workers) {
  if (n_passages < 1) throw ConfigError("n_passages must be >= 1");
  config.validate();
  Dataset ds;
  ds.worlds.resize(n_passages);
  auto passage_id = [](int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%04d", i);
    return std::string(buf);
  };
  if (workers <= 1 || n_passages < 2) {
    for (int i = 0; i < n_passages; ++i) {
      ds.worlds[i] = generate_world(mix_seed(seed, i), config, passage_id(i));
    }
  } else {
    const int n = std::min(workers, n_passages);
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) {
      pool.emplace_back([&, t]() {
        for (int i = t; i < n_passages; i += n) {
          ds.worlds[i] = generate_world(mix_seed(seed, i), config, passage_id(i));
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }
  for (int i = 0; i < n_passages; ++i) {
    const int slot = i % 10;
    if (slot == 8) {
      ds.split.dev.push_back(passage_id(i));
    } else if (slot == 9) {
      ds.split.test.push_back(passage_id(i));
    } else {
      ds.split.train.push_back(passage_id(i));
    }
  }
  return ds;
}

}  // namespace modpair
