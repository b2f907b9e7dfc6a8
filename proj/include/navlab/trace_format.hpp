#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace navlab::trace {

enum class DecisionKind { Action, Answer };

// First rule a raw response violates.
enum class TraceError {
    MissingTag,
    WrongOrder,
    DuplicateBlock,
    LeadingContent,
    ContentBetweenBlocks,
    TrailingContent,
    EmptyThink,
    EmptyDecision,
    BothDecisions,
};

std::string_view error_name(TraceError e);

struct ParsedTrace {
    std::string think;
    DecisionKind kind = DecisionKind::Action;
    std::string decision;
    std::string raw;  // canonical serialization

    friend bool operator==(const ParsedTrace&, const ParsedTrace&) = default;
};

struct FormatVerdict {
    bool valid = false;
    std::optional<std::string> reason;
};

class MalformedTrace : public std::runtime_error {
public:
    explicit MalformedTrace(TraceError reason);
    TraceError reason() const { return reason_; }

private:
    TraceError reason_;
};

enum class ParseMode {
    Strict,   // only whitespace allowed outside the two blocks
    Lenient,  // prose before the first <think> and after the last decision block is dropped
};

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kActionOpen = "<action>";
inline constexpr std::string_view kActionClose = "</action>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

// The template statement handed to generators.
inline constexpr std::string_view kFormatSpec =
    "<think>{think}</think><action>{action}</action>";

std::string serialize(std::string_view think, DecisionKind kind, std::string_view decision);

// Throws MalformedTrace.
ParsedTrace parse_trace(std::string_view raw, ParseMode mode = ParseMode::Strict);

// Non-throwing form: either a trace or the violated rule.
struct ParseResult {
    std::optional<ParsedTrace> trace;
    std::optional<TraceError> error;
};
ParseResult try_parse(std::string_view raw, ParseMode mode = ParseMode::Strict);

FormatVerdict check_format(std::string_view raw);

// 1.0 iff the strict parse succeeds.
double format_reward(std::string_view raw);

}  // namespace navlab::trace
