#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "eog/kg.hpp"

namespace eog {

// A model output split into its structured parts. `format_valid` holds
// iff the raw text contains exactly one <think> block followed by
// exactly one <answer> block; reward consumers treat the answers of an
// invalid trace as empty.
struct Trace {
    std::string raw;
    std::optional<std::string> think;
    std::optional<std::set<std::string>> answers;  // normalized
    bool format_valid = false;
    std::size_t token_count = 0;  // whitespace-delimited tokens of raw

    // Answer set as reward consumers see it: empty unless format_valid.
    std::set<std::string> effective_answers() const {
        if (!format_valid || !answers) return {};
        return *answers;
    }
};

// Total and deterministic: every input yields a Trace. Answer content is
// parsed as a JSON array (elements normalized; non-string scalars are
// stringified; empty strings dropped). Content that is not a JSON array
// falls back to a singleton answer of the trimmed content.
Trace parse_trace(std::string_view raw);

std::size_t count_tokens(std::string_view raw);

// Candidates whose subject, relation, and object all occur as substrings
// of the normalized think text.
std::set<Triple> extract_mentioned_triples(std::string_view think,
                                           const std::set<Triple>& candidates);

// Diagnostic: scans the think text for "(a, b, c)" tuples and keeps the
// ones the graph contains. Not used by any reward path.
std::set<Triple> extract_tuple_patterns(std::string_view think, const KnowledgeGraph& g);

struct TraceRecord {
    std::string id;
    std::string text;
};

// JSONL with keys "id" and "text".
std::vector<TraceRecord> load_traces(std::istream& in,
                                     const std::string& source_name = "<stream>");
std::vector<TraceRecord> load_traces_file(const std::string& path);

}  // namespace eog
