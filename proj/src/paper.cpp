#include "repro/paper.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "repro/error.hpp"

namespace repro {

std::string to_string(ParagraphKind k) {
    switch (k) {
        case ParagraphKind::prose: return "prose";
        case ParagraphKind::code_fence: return "code_fence";
        case ParagraphKind::equation_block: return "equation_block";
        case ParagraphKind::heading: return "heading";
    }
    return "prose";
}

ParagraphKind paragraph_kind_from_string(const std::string& s) {
    if (s == "code_fence") return ParagraphKind::code_fence;
    if (s == "equation_block") return ParagraphKind::equation_block;
    if (s == "heading") return ParagraphKind::heading;
    return ParagraphKind::prose;
}

const Paragraph* PaperDoc::find(int paragraph_id) const {
    if (paragraph_id < 0 || paragraph_id >= static_cast<int>(paragraphs.size())) return nullptr;
    return &paragraphs[static_cast<std::size_t>(paragraph_id)];
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

bool is_fence(const std::string& line) {
    std::string t = trim(line);
    return t.rfind("```", 0) == 0 || t.rfind("~~~", 0) == 0;
}

bool is_math_delim(const std::string& line) {
    std::string t = trim(line);
    return t == "$$" || t == "\\[" || t == "\\]";
}

bool opens_math(const std::string& line) {
    std::string t = trim(line);
    return t == "$$" || t == "\\[";
}

}  // namespace

std::string normalize_whitespace(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(c);
        }
    }
    return out;
}

namespace {

// Tokens that end with '.' but do not terminate a sentence.
const char* kAbbreviations[] = {"e.g.", "i.e.", "eq.",  "fig.", "et al.", "al.",
                                "etc.", "cf.",  "vs.",  "sec.", "tab.",   "no.",
                                "dr.",  "mr.",  "ms.",  "prof."};

bool ends_with_abbreviation(const std::string& text, std::size_t dot_pos) {
    // text[dot_pos] == '.'; check the token ending there (case-insensitive).
    std::string lowered = text.substr(0, dot_pos + 1);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const char* abbr : kAbbreviations) {
        std::string a(abbr);
        if (lowered.size() >= a.size() && lowered.compare(lowered.size() - a.size(), a.size(), a) == 0) {
            // Token boundary: preceded by start-of-text or whitespace/paren.
            std::size_t start = lowered.size() - a.size();
            if (start == 0) return true;
            char prev = lowered[start - 1];
            if (prev == ' ' || prev == '(' || prev == '[') return true;
        }
    }
    return false;
}

}  // namespace

std::vector<Sentence> segment_sentences(const std::string& paragraph_raw) {
    std::string text = normalize_whitespace(paragraph_raw);
    std::vector<Sentence> out;
    if (text.empty()) return out;

    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        // Allow closing quotes/brackets directly after the terminator.
        std::size_t j = i + 1;
        while (j < text.size() && (text[j] == '"' || text[j] == '\'' || text[j] == ')' || text[j] == ']')) ++j;
        if (j >= text.size()) break;  // trailing text handled after the loop
        if (text[j] != ' ') continue;
        std::size_t k = j + 1;
        // The next sentence may open with quotes or brackets before its first
        // alphanumeric character.
        std::size_t probe = k;
        while (probe < text.size() && (text[probe] == '"' || text[probe] == '\'' ||
                                       text[probe] == '(' || text[probe] == '['))
            ++probe;
        if (probe >= text.size()) break;
        char next = text[probe];
        bool starts_sentence = std::isupper(static_cast<unsigned char>(next)) ||
                               std::isdigit(static_cast<unsigned char>(next));
        if (!starts_sentence) continue;
        if (c == '.' && ends_with_abbreviation(text, i)) continue;
        std::string piece = trim(text.substr(start, j - start));
        if (!piece.empty()) out.push_back({static_cast<int>(out.size()) + 1, piece});
        start = k;
        i = k - 1;
    }
    std::string tail = trim(text.substr(start));
    if (!tail.empty()) out.push_back({static_cast<int>(out.size()) + 1, tail});
    return out;
}

PaperDoc load_paper(const std::string& markdown_text, const std::string& source_path) {
    if (trim(markdown_text).empty()) throw EmptyDocument();

    // Split into lines.
    std::vector<std::string> lines;
    {
        std::string cur;
        for (char c : markdown_text) {
            if (c == '\n') {
                lines.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur.push_back(c);
            }
        }
        lines.push_back(cur);
    }

    PaperDoc doc;
    doc.source_path = source_path;

    std::vector<std::string> block;
    ParagraphKind block_kind = ParagraphKind::prose;
    bool in_fence = false;
    bool in_math = false;

    auto flush = [&]() {
        if (block.empty()) return;
        std::string raw;
        for (std::size_t i = 0; i < block.size(); ++i) {
            if (i) raw.push_back('\n');
            raw += block[i];
        }
        if (trim(raw).empty()) {
            block.clear();
            return;
        }
        Paragraph p;
        p.id = static_cast<int>(doc.paragraphs.size());
        p.raw = raw;
        p.kind = block_kind;
        if (block_kind == ParagraphKind::prose) {
            p.sentences = segment_sentences(raw);
        } else if (block_kind == ParagraphKind::heading) {
            std::string t = trim(raw);
            while (!t.empty() && t.front() == '#') t.erase(t.begin());
            t = trim(t);
            p.sentences = {{1, t.empty() ? trim(raw) : t}};
            if (doc.title.empty()) doc.title = p.sentences[0].text;
        } else {
            p.sentences = {{1, trim(raw)}};
        }
        doc.paragraphs.push_back(std::move(p));
        block.clear();
        block_kind = ParagraphKind::prose;
    };

    for (const std::string& line : lines) {
        if (in_fence) {
            block.push_back(line);
            if (is_fence(line)) {
                in_fence = false;
                flush();
            }
            continue;
        }
        if (in_math) {
            block.push_back(line);
            if (is_math_delim(line)) {
                in_math = false;
                flush();
            }
            continue;
        }
        if (is_fence(line)) {
            flush();
            block_kind = ParagraphKind::code_fence;
            block.push_back(line);
            in_fence = true;
            continue;
        }
        if (opens_math(line)) {
            flush();
            block_kind = ParagraphKind::equation_block;
            block.push_back(line);
            in_math = true;
            continue;
        }
        if (is_blank(line)) {
            flush();
            continue;
        }
        if (trim(line).front() == '#' && block.empty()) {
            block_kind = ParagraphKind::heading;
            block.push_back(line);
            flush();
            continue;
        }
        block.push_back(line);
    }
    flush();

    if (doc.paragraphs.empty()) throw EmptyDocument();
    return doc;
}

nlohmann::json to_json(const PaperDoc& doc) {
    nlohmann::json paras = nlohmann::json::array();
    for (const auto& p : doc.paragraphs) {
        nlohmann::json sents = nlohmann::json::array();
        for (const auto& s : p.sentences) sents.push_back({{"index", s.index}, {"text", s.text}});
        paras.push_back({{"id", p.id},
                         {"kind", to_string(p.kind)},
                         {"raw", p.raw},
                         {"sentences", sents}});
    }
    return {{"title", doc.title}, {"source_path", doc.source_path}, {"paragraphs", paras}};
}

PaperDoc paper_doc_from_json(const nlohmann::json& j) {
    PaperDoc doc;
    doc.title = j.value("title", "");
    doc.source_path = j.value("source_path", "");
    for (const auto& jp : j.at("paragraphs")) {
        Paragraph p;
        p.id = jp.at("id").get<int>();
        p.kind = paragraph_kind_from_string(jp.at("kind").get<std::string>());
        p.raw = jp.at("raw").get<std::string>();
        for (const auto& js : jp.at("sentences"))
            p.sentences.push_back({js.at("index").get<int>(), js.at("text").get<std::string>()});
        doc.paragraphs.push_back(std::move(p));
    }
    return doc;
}

}  // namespace repro
