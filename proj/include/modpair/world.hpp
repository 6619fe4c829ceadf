#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modpair/dsl.hpp"
#include "modpair/errors.hpp"

namespace modpair {

struct Date {
  int year = 0;
  int month = 0;  // 0 = absent, else 1..12

  bool operator==(const Date&) const = default;
};

/// One structured occurrence in a passage. Game events carry a value
/// (yards); history events carry a date. `token_span` covers the full
/// sentence mentioning the event.
struct Event {
  std::string kind;
  std::string agent;  // "Smith", or the place name of a history event
  std::optional<int> value;
  std::optional<Date> date;
  int span_begin = 0;
  int span_end = 0;

  bool operator==(const Event&) const = default;
};

struct GoldAnswer {
  enum class Kind { count, number, year, span };
  Kind kind = Kind::count;
  long long value = 0;    // count / number / year
  int span_begin = 0;     // span answers: [begin, end) passage slice
  int span_end = 0;

  bool operator==(const GoldAnswer&) const = default;
};

std::string to_string(GoldAnswer::Kind k);
GoldAnswer::Kind answer_kind_from_string(const std::string& s);

/// A question over a passage: gold program, per-node question slices for
/// string arguments, gold answer (absent on probes), and the gold passage
/// token set for every node that outputs a token distribution.
struct QAExample {
  std::string id;
  std::vector<std::string> question_tokens;
  Program program;
  std::map<NodePath, std::pair<int, int>> arg_spans;
  std::optional<GoldAnswer> answer;
  std::map<NodePath, std::vector<int>> gold_module_outputs;
  bool is_probe = false;
};

/// Synthetic structured passage with its questions.
struct WorldInstance {
  std::string passage_id;
  std::vector<std::string> passage_tokens;
  std::vector<std::pair<int, int>> numbers;   // (token index, value)
  std::vector<std::pair<int, Date>> dates;    // (token index, date)
  std::vector<Event> events;
  std::vector<QAExample> questions;
};

/// Token-level synonym links used both when sampling question surface forms
/// and by the argument similarity matcher.
struct Lexicon {
  std::vector<std::pair<std::string, std::string>> synonyms;

  bool linked(const std::string& a, const std::string& b) const;
};

const Lexicon& default_lexicon();

struct GenConfig {
  int n_passages = 100;
  double game_fraction = 0.5;   // rest are history passages
  int events_min = 4;
  int events_max = 8;
  int event_kinds = 3;          // kinds available per domain
  int value_min = 1;
  int value_max = 80;
  int year_min = 1400;
  int year_max = 2015;
  int questions_min = 5;
  int questions_max = 8;
  // "default": all templates. "minmaxcount": count / min / max families
  // (count(find), count(filter(find)), min and max arithmetic and project
  // forms) on game passages only.
  std::string question_set = "default";
  bool synonym_variants = true;

  /// Throws ConfigError when a field is outside its documented range.
  void validate() const;
};

/// Deterministic in (seed, config).
WorldInstance generate_world(std::uint64_t seed, const GenConfig& config,
                             const std::string& passage_id = "p0000");

struct SplitManifest {
  // "passage": lists hold passage ids. "question": lists hold question ids.
  std::string kind = "passage";
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
};

struct Dataset {
  std::vector<WorldInstance> worlds;
  SplitManifest split;
};

/// n_passages worlds with derived per-passage seeds
/// (passage_seed = mix_seed(seed, passage_index)) and an 80/10/10 passage
/// split. Workers parallelize per passage; the output does not depend on
/// the worker count.
Dataset generate_dataset(std::uint64_t seed, const GenConfig& config, int n_passages,
                         int workers = 1);

struct SymbolicResult {
  GoldAnswer answer;
  std::map<NodePath, std::vector<int>> module_outputs;
};

/// Exact discrete semantics of a program over the world's events. The gold
/// annotation oracle: answers and per-node token sets for generated
/// questions come from here. Throws UnresolvableArg when a string argument
/// matches no lexicon entry of the world.
SymbolicResult symbolic_execute(const Program& program, const WorldInstance& world,
                                const Lexicon& lexicon = default_lexicon());

/// Gold token sets only, without deriving an answer (probes have answer
/// kinds that may be undefined, e.g. span over several events).
std::map<NodePath, std::vector<int>> symbolic_module_outputs(
    const Program& program, const WorldInstance& world,
    const Lexicon& lexicon = default_lexicon());

/// Event indices a find argument grounds to (sorted). Used by
/// symbolic_execute and by tests.
std::vector<int> resolve_find_arg(const std::vector<std::string>& arg_tokens,
                                  const WorldInstance& world, const Lexicon& lexicon);

/// Quarter (1..4) of a game event, read back from its sentence tokens.
int event_quarter(const WorldInstance& world, const Event& ev);

/// Passage span of the tokens naming the event: the agent token for game
/// events, the place-name tokens for history events.
std::pair<int, int> event_name_span(const WorldInstance& world, const Event& ev);

}  // namespace modpair
