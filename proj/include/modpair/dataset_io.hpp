#pragma once

#include <string>

#include "modpair/world.hpp"

namespace modpair {

/// One WorldInstance per line. Programs are stored as DSL strings, spans as
/// two-element [begin, end) arrays, answers as {"kind", "value"} objects
/// (null on probes).
void save_dataset_jsonl(const std::string& path, const std::vector<WorldInstance>& worlds);
std::vector<WorldInstance> load_dataset_jsonl(const std::string& path);

void save_split_manifest(const std::string& path, const SplitManifest& split);
SplitManifest load_split_manifest(const std::string& path);

/// Schema and referential-integrity check: ids unique, arg_spans reproduce
/// string arguments, token sets inside passage bounds, probes unlabeled,
/// answers consistent with symbolic execution. Throws IoError.
void validate_dataset(const std::vector<WorldInstance>& worlds);

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace modpair
