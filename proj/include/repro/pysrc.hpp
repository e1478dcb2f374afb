#pragma once

#include <set>
#include <string>
#include <vector>

namespace repro {

// Line-level Python source inspection: enough structure awareness to find
// top-level symbols, import statements, and stub-only bodies. Not a parser.
namespace pysrc {

struct Symbol {
    std::string name;
    std::string kind;  // "class" or "function"
    int start_line = 0;  // 0-based, inclusive
    int end_line = 0;    // 0-based, exclusive
    bool is_stub = false;
};

std::vector<std::string> split_lines(const std::string& text);
std::string join_lines(const std::vector<std::string>& lines);

// Top-level import statements, trimmed, in file order.
std::set<std::string> imports(const std::string& text);

// Top-level class/def blocks in file order; is_stub true when the body holds
// only docstrings, comments, pass/... statements, and stub-bodied nested defs.
std::vector<Symbol> top_level_symbols(const std::string& text);

// True when every top-level class/function body is a stub.
bool all_bodies_stubbed(const std::string& text);

// Case-insensitive scan for forbidden placeholder markers.
bool has_placeholder(const std::string& text);

// Replaces the block of `symbol` with `replacement` (already dedented to
// top level). Returns the updated file text.
std::string replace_symbol_block(const std::string& text, const Symbol& symbol,
                                 const std::string& replacement);

// Splits a code chunk into (leading import lines, rest).
std::pair<std::vector<std::string>, std::string> split_leading_imports(const std::string& code);

// Inserts new import lines after the last existing top-level import (or at
// the top), skipping imports already present.
std::string merge_imports(const std::string& text, const std::vector<std::string>& new_imports);

}  // namespace pysrc
}  // namespace repro
