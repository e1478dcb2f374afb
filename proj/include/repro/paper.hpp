#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace repro {

enum class ParagraphKind { prose, code_fence, equation_block, heading };

std::string to_string(ParagraphKind k);
ParagraphKind paragraph_kind_from_string(const std::string& s);

struct Sentence {
    int index = 0;  // 1-based
    std::string text;
};

struct Paragraph {
    int id = 0;
    std::string raw;
    std::vector<Sentence> sentences;
    ParagraphKind kind = ParagraphKind::prose;
};

struct PaperDoc {
    std::vector<Paragraph> paragraphs;
    std::string title;
    std::string source_path;

    const Paragraph* find(int paragraph_id) const;
};

// Splits a Markdown body into paragraphs at blank lines, keeping fenced code
// blocks and display-math blocks whole. Headings become kind=heading
// paragraphs. Throws EmptyDocument on whitespace-only input.
PaperDoc load_paper(const std::string& markdown_text, const std::string& source_path = "");

// Rule-based sentence splitter for normalized prose. Terminal punctuation
// followed by whitespace and an uppercase letter or digit ends a sentence,
// unless the preceding token is on the abbreviation allowlist.
std::vector<Sentence> segment_sentences(const std::string& paragraph_raw);

// Collapses internal whitespace runs (including newlines) to single spaces.
std::string normalize_whitespace(const std::string& text);

nlohmann::json to_json(const PaperDoc& doc);
PaperDoc paper_doc_from_json(const nlohmann::json& j);

}  // namespace repro
