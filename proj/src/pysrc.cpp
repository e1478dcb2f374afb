#include "repro/pysrc.hpp"

#include <algorithm>
#include <cctype>

namespace repro {
namespace pysrc {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

int indent_of(const std::string& line) {
    int n = 0;
    for (char c : line) {
        if (c == ' ') ++n;
        else if (c == '\t') n += 4;
        else break;
    }
    return n;
}

bool is_import_line(const std::string& line) {
    std::string t = trim(line);
    return t.rfind("import ", 0) == 0 || t.rfind("from ", 0) == 0;
}

bool starts_def_or_class(const std::string& trimmed, std::string* name, std::string* kind) {
    std::string head;
    if (trimmed.rfind("class ", 0) == 0) {
        head = trimmed.substr(6);
        *kind = "class";
    } else if (trimmed.rfind("def ", 0) == 0) {
        head = trimmed.substr(4);
        *kind = "function";
    } else if (trimmed.rfind("async def ", 0) == 0) {
        head = trimmed.substr(10);
        *kind = "function";
    } else {
        return false;
    }
    std::string n;
    for (char c : head) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') n.push_back(c);
        else break;
    }
    if (n.empty()) return false;
    *name = n;
    return true;
}

}  // namespace

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') { lines.push_back(cur); cur.clear(); }
        else if (c != '\r') cur.push_back(c);
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::set<std::string> imports(const std::string& text) {
    std::set<std::string> out;
    for (const auto& line : split_lines(text)) {
        if (indent_of(line) == 0 && is_import_line(line)) out.insert(trim(line));
    }
    return out;
}

namespace {

// True when block lines (excluding the signature) contain only docstrings,
// comments, pass/Ellipsis, decorators, and nested signatures.
bool block_is_stub(const std::vector<std::string>& lines, std::size_t begin, std::size_t end) {
    bool in_doc = false;
    std::string doc_delim;
    for (std::size_t i = begin; i < end; ++i) {
        std::string t = trim(lines[i]);
        if (in_doc) {
            if (t.find(doc_delim) != std::string::npos) in_doc = false;
            continue;
        }
        if (t.empty() || t[0] == '#' || t[0] == '@') continue;
        if (t.rfind("\"\"\"", 0) == 0 || t.rfind("'''", 0) == 0) {
            doc_delim = t.substr(0, 3);
            // Single-line docstring closes on the same line.
            if (t.size() >= 6 && t.find(doc_delim, 3) != std::string::npos) continue;
            in_doc = true;
            continue;
        }
        if (t == "pass" || t == "..." ) continue;
        std::string name, kind;
        if (starts_def_or_class(t, &name, &kind)) continue;
        // Continuation of a multi-line signature.
        if (!t.empty() && (t.back() == ',' || t.back() == '(' || t.back() == ':' ))
            if (i > begin) {
                std::string prev = trim(lines[i - 1]);
                if (!prev.empty() && (prev.back() == ',' || prev.back() == '(')) continue;
            }
        return false;
    }
    return true;
}

}  // namespace

std::vector<Symbol> top_level_symbols(const std::string& text) {
    auto lines = split_lines(text);
    std::vector<Symbol> symbols;
    std::size_t i = 0;
    while (i < lines.size()) {
        std::string t = trim(lines[i]);
        std::string name, kind;
        if (indent_of(lines[i]) == 0 && starts_def_or_class(t, &name, &kind)) {
            std::size_t start = i;
            // Include decorators directly above.
            while (start > 0 && trim(lines[start - 1]).rfind("@", 0) == 0) --start;
            std::size_t j = i + 1;
            while (j < lines.size()) {
                std::string tj = trim(lines[j]);
                if (!tj.empty() && indent_of(lines[j]) == 0 && tj[0] != '#' && tj[0] != '@') break;
                if (!tj.empty() && indent_of(lines[j]) == 0 && tj[0] == '@') break;
                ++j;
            }
            // Trim trailing blank lines out of the block.
            std::size_t end = j;
            while (end > i + 1 && trim(lines[end - 1]).empty()) --end;
            Symbol sym;
            sym.name = name;
            sym.kind = kind;
            sym.start_line = static_cast<int>(start);
            sym.end_line = static_cast<int>(end);
            sym.is_stub = block_is_stub(lines, i + 1, end);
            symbols.push_back(sym);
            i = j;
        } else {
            ++i;
        }
    }
    return symbols;
}

bool all_bodies_stubbed(const std::string& text) {
    for (const auto& sym : top_level_symbols(text))
        if (!sym.is_stub) return false;
    return true;
}

bool has_placeholder(const std::string& text) {
    std::string l = lower(text);
    return l.find("todo") != std::string::npos ||
           l.find("dummy implementation") != std::string::npos ||
           l.find("your implementation") != std::string::npos;
}

std::string replace_symbol_block(const std::string& text, const Symbol& symbol,
                                 const std::string& replacement) {
    auto lines = split_lines(text);
    std::vector<std::string> out;
    for (int i = 0; i < symbol.start_line && i < static_cast<int>(lines.size()); ++i)
        out.push_back(lines[static_cast<std::size_t>(i)]);
    for (const auto& l : split_lines(replacement)) out.push_back(l);
    for (std::size_t i = static_cast<std::size_t>(symbol.end_line); i < lines.size(); ++i)
        out.push_back(lines[i]);
    return join_lines(out);
}

std::pair<std::vector<std::string>, std::string> split_leading_imports(const std::string& code) {
    auto lines = split_lines(code);
    std::vector<std::string> import_lines;
    std::size_t i = 0;
    while (i < lines.size()) {
        std::string t = trim(lines[i]);
        if (t.empty()) { ++i; continue; }
        if (is_import_line(lines[i]) && indent_of(lines[i]) == 0) {
            import_lines.push_back(t);
            ++i;
            continue;
        }
        break;
    }
    std::vector<std::string> rest(lines.begin() + static_cast<long>(i), lines.end());
    return {import_lines, join_lines(rest)};
}

std::string merge_imports(const std::string& text, const std::vector<std::string>& new_imports) {
    auto existing = imports(text);
    std::vector<std::string> to_add;
    for (const auto& imp : new_imports)
        if (!existing.count(trim(imp))) to_add.push_back(trim(imp));
    if (to_add.empty()) return text;

    auto lines = split_lines(text);
    // Insert after the last top-level import, or at the very top.
    std::size_t insert_at = 0;
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (indent_of(lines[i]) == 0 && is_import_line(lines[i])) insert_at = i + 1;
    std::vector<std::string> out(lines.begin(), lines.begin() + static_cast<long>(insert_at));
    for (const auto& imp : to_add) out.push_back(imp);
    out.insert(out.end(), lines.begin() + static_cast<long>(insert_at), lines.end());
    return join_lines(out);
}

}  // namespace pysrc
}  // namespace repro
