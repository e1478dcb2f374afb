#include "repro/structured.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <vector>

#include "repro/error.hpp"

namespace repro {
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

// Tries to parse a JSON value starting at every occurrence of `open` and
// returns the first success passing `accept`.
template <typename Accept>
nlohmann::json first_candidate(const std::string& text, char open, Accept accept) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != open) continue;
        // Find the matching close by letting the JSON parser decide: try
        // progressively shorter suffixes is wasteful, so scan for balanced
        // spans first (strings handled).
        int depth = 0;
        bool in_str = false;
        bool esc = false;
        char close = (open == '[') ? ']' : '}';
        for (std::size_t j = i; j < text.size(); ++j) {
            char c = text[j];
            if (in_str) {
                if (esc) esc = false;
                else if (c == '\\') esc = true;
                else if (c == '"') in_str = false;
                continue;
            }
            if (c == '"') { in_str = true; continue; }
            if (c == open) ++depth;
            else if (c == close) {
                --depth;
                if (depth == 0) {
                    auto parsed = nlohmann::json::parse(text.substr(i, j - i + 1), nullptr, false);
                    if (!parsed.is_discarded() && accept(parsed)) return parsed;
                    break;
                }
            }
        }
    }
    return nlohmann::json();  // null = not found
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') { lines.push_back(cur); cur.clear(); }
        else if (c != '\r') cur.push_back(c);
    }
    lines.push_back(cur);
    return lines;
}

bool is_step_line(const std::string& line, std::string* step) {
    std::string t = trim(line);
    if (t.empty()) return false;
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
        *step = trim(t.substr(i + 1));
        return !step->empty();
    }
    if (t[0] == '-' || t[0] == '*') {
        *step = trim(t.substr(1));
        return !step->empty();
    }
    return false;
}

std::string strip_filename(std::string name) {
    name = trim(name);
    if (!name.empty() && name.front() == '[') name.erase(name.begin());
    if (!name.empty() && name.back() == ']') name.pop_back();
    while (!name.empty() && name.front() == '`') name.erase(name.begin());
    while (!name.empty() && name.back() == '`') name.pop_back();
    return trim(name);
}

nlohmann::json parse_plan_document(const std::string& text) {
    auto lines = split_lines(text);
    nlohmann::json config_steps = nlohmann::json::array();
    nlohmann::json file_plans = nlohmann::json::array();

    enum class Section { none, config, code } section = Section::none;
    bool saw_config = false, saw_code = false;
    std::string current_file;
    nlohmann::json current_steps = nlohmann::json::array();

    auto flush_file = [&]() {
        if (!current_file.empty())
            file_plans.push_back({{"file", current_file}, {"steps", current_steps}});
        current_file.clear();
        current_steps = nlohmann::json::array();
    };

    for (const auto& line : lines) {
        std::string t = trim(line);
        std::string lt = lower(t);
        if (lt.rfind("###", 0) == 0 && lt.find("config_plan") != std::string::npos) {
            section = Section::config;
            saw_config = true;
            continue;
        }
        if (lt.rfind("###", 0) == 0 && lt.find("code_plan") != std::string::npos) {
            section = Section::code;
            saw_code = true;
            continue;
        }
        if (section == Section::code && lt.rfind("## code:", 0) == 0) {
            flush_file();
            current_file = strip_filename(t.substr(8));
            continue;
        }
        std::string step;
        if (!is_step_line(line, &step)) continue;
        if (section == Section::config) {
            if (lower(step).find("no changes needed") == std::string::npos)
                config_steps.push_back(step);
        } else if (section == Section::code && !current_file.empty()) {
            current_steps.push_back(step);
        }
    }
    flush_file();

    if (!saw_config || !saw_code)
        throw ParseFailure("plan missing ### CONFIG_PLAN / ### CODE_PLAN headings", text);
    return {{"config_steps", config_steps}, {"file_plans", file_plans}};
}

nlohmann::json parse_code_files(const std::string& text) {
    auto lines = split_lines(text);
    nlohmann::json files = nlohmann::json::object();
    std::string current_file;
    bool in_fence = false;
    std::string body;
    for (const auto& line : lines) {
        std::string t = trim(line);
        if (!in_fence && lower(t).rfind("## code:", 0) == 0) {
            current_file = strip_filename(t.substr(8));
            continue;
        }
        if (t.rfind("```", 0) == 0) {
            if (!in_fence) {
                in_fence = true;
                body.clear();
            } else {
                in_fence = false;
                if (!current_file.empty()) {
                    files[current_file] = body;
                    current_file.clear();
                }
            }
            continue;
        }
        if (in_fence) {
            body += line;
            body += '\n';
        }
    }
    if (files.empty()) throw ParseFailure("no '## Code: [filename]' blocks found", text);
    return {{"files", files}};
}

}  // namespace

nlohmann::json extract_structured(const std::string& text, StructKind kind) {
    switch (kind) {
        case StructKind::int_array: {
            auto v = first_candidate(text, '[', [](const nlohmann::json& j) {
                if (!j.is_array()) return false;
                for (const auto& e : j)
                    if (!e.is_number_integer()) return false;
                return true;
            });
            if (v.is_null()) throw ParseFailure("no integer array found", text);
            return v;
        }
        case StructKind::json_list: {
            auto v = first_candidate(text, '[', [](const nlohmann::json& j) { return j.is_array(); });
            if (v.is_null()) throw ParseFailure("no JSON array found", text);
            return v;
        }
        case StructKind::json_object: {
            auto v = first_candidate(text, '{', [](const nlohmann::json& j) { return j.is_object(); });
            if (v.is_null()) throw ParseFailure("no JSON object found", text);
            return v;
        }
        case StructKind::plan_document:
            return parse_plan_document(text);
        case StructKind::code_files:
            return parse_code_files(text);
    }
    throw ParseFailure("unknown structure kind", text);
}

}  // namespace repro
