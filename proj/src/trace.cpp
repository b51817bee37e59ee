#include "eog/trace.hpp"

#include <cctype>
#include <fstream>
#include <istream>

#include <nlohmann/json.hpp>

#include "eog/norm.hpp"

namespace eog {

using nlohmann::json;

namespace {

struct TagSpan {
    std::size_t open_begin = std::string_view::npos;  // position of '<'
    std::size_t content_begin = 0;
    std::size_t content_end = 0;
    std::size_t close_end = 0;  // one past '>'
    int open_count = 0;
    int close_count = 0;
};

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
         pos = text.find(needle, pos + 1)) {
        ++n;
    }
    return n;
}

TagSpan find_block(std::string_view text, std::string_view name) {
    const std::string open = "<" + std::string(name) + ">";
    const std::string close = "</" + std::string(name) + ">";
    TagSpan span;
    span.open_count = static_cast<int>(count_occurrences(text, open));
    span.close_count = static_cast<int>(count_occurrences(text, close));
    std::size_t open_pos = text.find(open);
    if (open_pos == std::string_view::npos) return span;
    std::size_t close_pos = text.find(close, open_pos + open.size());
    if (close_pos == std::string_view::npos) return span;
    span.open_begin = open_pos;
    span.content_begin = open_pos + open.size();
    span.content_end = close_pos;
    span.close_end = close_pos + close.size();
    return span;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::set<std::string> parse_answer_content(std::string_view content) {
    std::set<std::string> answers;
    json j = json::parse(content, nullptr, false);
    if (!j.is_discarded() && j.is_array()) {
        for (const auto& item : j) {
            std::string value = item.is_string() ? item.get<std::string>() : item.dump();
            std::string norm = normalize(value);
            if (!norm.empty()) answers.insert(std::move(norm));
        }
        return answers;
    }
    std::string norm = normalize(trim(content));
    if (!norm.empty()) answers.insert(std::move(norm));
    return answers;
}

}  // namespace

std::size_t count_tokens(std::string_view raw) { return count_whitespace_tokens(raw); }

Trace parse_trace(std::string_view raw) {
    Trace trace;
    trace.raw = std::string(raw);
    trace.token_count = count_tokens(raw);

    TagSpan think = find_block(raw, "think");
    TagSpan answer = find_block(raw, "answer");

    const bool single_pair = think.open_count == 1 && think.close_count == 1 &&
                             answer.open_count == 1 && answer.close_count == 1;
    const bool found = think.open_begin != std::string_view::npos &&
                       answer.open_begin != std::string_view::npos;
    const bool ordered = found && think.close_end <= answer.open_begin;

    if (!(single_pair && ordered)) {
        trace.format_valid = false;
        return trace;
    }

    trace.format_valid = true;
    trace.think = std::string(
        raw.substr(think.content_begin, think.content_end - think.content_begin));
    trace.answers = parse_answer_content(
        raw.substr(answer.content_begin, answer.content_end - answer.content_begin));
    return trace;
}

std::set<Triple> extract_mentioned_triples(std::string_view think,
                                           const std::set<Triple>& candidates) {
    const std::string norm = normalize(think);
    std::set<Triple> mentioned;
    for (const auto& t : candidates) {
        if (norm.find(t.subject) != std::string::npos &&
            norm.find(t.relation) != std::string::npos &&
            norm.find(t.object) != std::string::npos) {
            mentioned.insert(t);
        }
    }
    return mentioned;
}

std::set<Triple> extract_tuple_patterns(std::string_view think, const KnowledgeGraph& g) {
    std::set<Triple> found;
    std::size_t pos = 0;
    while ((pos = think.find('(', pos)) != std::string_view::npos) {
        std::size_t close = think.find(')', pos + 1);
        if (close == std::string_view::npos) break;
        std::string_view body = think.substr(pos + 1, close - pos - 1);
        std::size_t c1 = body.find(',');
        std::size_t c2 = c1 == std::string_view::npos ? std::string_view::npos
                                                      : body.find(',', c1 + 1);
        if (c2 != std::string_view::npos && body.find(',', c2 + 1) == std::string_view::npos) {
            std::string s = normalize(body.substr(0, c1));
            std::string r = normalize(body.substr(c1 + 1, c2 - c1 - 1));
            std::string o = normalize(body.substr(c2 + 1));
            if (!s.empty() && !r.empty() && !o.empty()) {
                Triple t{s, r, o};
                if (g.contains(t)) found.insert(std::move(t));
            }
        }
        pos = close + 1;
    }
    return found;
}

std::vector<TraceRecord> load_traces(std::istream& in, const std::string& source_name) {
    std::vector<TraceRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        const std::string where = source_name + ":" + std::to_string(line_no);
        if (j.is_discarded()) throw Error(where + ": invalid JSON");
        if (!j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
            !j["text"].is_string()) {
            throw Error(where + ": expected string keys \"id\" and \"text\"");
        }
        records.push_back({j["id"].get<std::string>(), j["text"].get<std::string>()});
    }
    return records;
}

std::vector<TraceRecord> load_traces_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trace file: " + path);
    return load_traces(in, path);
}

}  // namespace eog
