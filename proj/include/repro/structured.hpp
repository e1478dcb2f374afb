#pragma once

#include <string>

#include "json.hpp"

namespace repro {

enum class StructKind { int_array, json_list, json_object, plan_document, code_files };

// Pulls the first well-formed structure of the requested kind out of raw
// model text, tolerating surrounding prose and fenced code blocks.
//
//   int_array     -> JSON array of integers (non-integers are rejected)
//   json_list     -> JSON array
//   json_object   -> JSON object
//   plan_document -> {"config_steps": [...], "file_plans": [{"file","steps"}]}
//   code_files    -> {"files": {"name": "content", ...}}
//
// Throws ParseFailure (carrying the raw text) when no candidate parses.
nlohmann::json extract_structured(const std::string& text, StructKind kind);

}  // namespace repro
