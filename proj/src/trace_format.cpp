#include "navlab/trace_format.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace navlab::trace {

namespace {

enum Tag { ThinkOpen, ThinkClose, ActionOpen, ActionClose, AnswerOpen, AnswerClose, kTagCount };

constexpr std::array<std::string_view, kTagCount> kTags = {kThinkOpen,  kThinkClose,  kActionOpen,
                                                           kActionClose, kAnswerOpen, kAnswerClose};

struct TagHit {
    Tag tag;
    std::size_t pos;
    std::size_t end() const { return pos + kTags[tag].size(); }
};

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool blank(std::string_view s) { return std::all_of(s.begin(), s.end(), is_space); }

std::vector<TagHit> scan_tags(std::string_view raw) {
    std::vector<TagHit> hits;
    for (std::size_t i = raw.find('<'); i != std::string_view::npos; i = raw.find('<', i + 1)) {
        for (int t = 0; t < kTagCount; ++t) {
            if (raw.substr(i, kTags[t].size()) == kTags[t]) {
                hits.push_back({static_cast<Tag>(t), i});
                break;
            }
        }
    }
    return hits;
}

std::optional<TraceError> parse_strict(std::string_view raw, ParsedTrace& out) {
    const std::vector<TagHit> hits = scan_tags(raw);
    std::array<int, kTagCount> count{};
    for (const TagHit& h : hits) ++count[h.tag];

    const bool has_action = count[ActionOpen] + count[ActionClose] > 0;
    const bool has_answer = count[AnswerOpen] + count[AnswerClose] > 0;
    if (has_action && has_answer) return TraceError::BothDecisions;
    if (std::any_of(count.begin(), count.end(), [](int c) { return c > 1; })) {
        return TraceError::DuplicateBlock;
    }
    if (count[ThinkOpen] == 0 || count[ThinkClose] == 0) return TraceError::MissingTag;
    const Tag open = has_answer ? AnswerOpen : ActionOpen;
    const Tag close = has_answer ? AnswerClose : ActionClose;
    if (count[open] == 0 || count[close] == 0) return TraceError::MissingTag;

    // Exactly four tags remain; they must appear as think-open, think-close, open, close.
    const std::array<Tag, 4> expected = {ThinkOpen, ThinkClose, open, close};
    for (std::size_t k = 0; k < 4; ++k) {
        if (hits[k].tag != expected[k]) return TraceError::WrongOrder;
    }
    if (!blank(raw.substr(0, hits[0].pos))) return TraceError::LeadingContent;
    if (!blank(raw.substr(hits[1].end(), hits[2].pos - hits[1].end()))) {
        return TraceError::ContentBetweenBlocks;
    }
    if (!blank(raw.substr(hits[3].end()))) return TraceError::TrailingContent;

    const std::string_view think = raw.substr(hits[0].end(), hits[1].pos - hits[0].end());
    const std::string_view decision = raw.substr(hits[2].end(), hits[3].pos - hits[2].end());
    if (blank(think)) return TraceError::EmptyThink;
    if (blank(decision)) return TraceError::EmptyDecision;

    out.think = std::string(think);
    out.kind = has_answer ? DecisionKind::Answer : DecisionKind::Action;
    out.decision = std::string(decision);
    out.raw = serialize(out.think, out.kind, out.decision);
    return std::nullopt;
}

// Drops prose before the first <think> and after the last closing decision tag.
std::string_view lenient_window(std::string_view raw) {
    const std::size_t first = raw.find(kThinkOpen);
    const std::size_t last_action = raw.rfind(kActionClose);
    const std::size_t last_answer = raw.rfind(kAnswerClose);
    std::size_t end = std::string_view::npos;
    if (last_action != std::string_view::npos) end = last_action + kActionClose.size();
    if (last_answer != std::string_view::npos) {
        const std::size_t e = last_answer + kAnswerClose.size();
        end = end == std::string_view::npos ? e : std::max(end, e);
    }
    if (first == std::string_view::npos || end == std::string_view::npos || end <= first) return raw;
    return raw.substr(first, end - first);
}

}  // namespace

std::string_view error_name(TraceError e) {
    switch (e) {
        case TraceError::MissingTag: return "missing tag";
        case TraceError::WrongOrder: return "wrong order";
        case TraceError::DuplicateBlock: return "duplicate block";
        case TraceError::LeadingContent: return "leading content";
        case TraceError::ContentBetweenBlocks: return "content between blocks";
        case TraceError::TrailingContent: return "trailing content";
        case TraceError::EmptyThink: return "empty think";
        case TraceError::EmptyDecision: return "empty decision";
        case TraceError::BothDecisions: return "both decision variants present";
    }
    return "unknown";
}

MalformedTrace::MalformedTrace(TraceError reason)
    : std::runtime_error("malformed trace: " + std::string(error_name(reason))), reason_(reason) {}

std::string serialize(std::string_view think, DecisionKind kind, std::string_view decision) {
    const bool answer = kind == DecisionKind::Answer;
    std::string out;
    out.reserve(think.size() + decision.size() + 36);
    out += kThinkOpen;
    out += think;
    out += kThinkClose;
    out += answer ? kAnswerOpen : kActionOpen;
    out += decision;
    out += answer ? kAnswerClose : kActionClose;
    return out;
}

ParseResult try_parse(std::string_view raw, ParseMode mode) {
    const std::string_view window = mode == ParseMode::Lenient ? lenient_window(raw) : raw;
    ParsedTrace parsed;
    if (auto err = parse_strict(window, parsed)) return {std::nullopt, err};
    return {std::move(parsed), std::nullopt};
}

ParsedTrace parse_trace(std::string_view raw, ParseMode mode) {
    ParseResult r = try_parse(raw, mode);
    if (r.error) throw MalformedTrace(*r.error);
    return std::move(*r.trace);
}

FormatVerdict check_format(std::string_view raw) {
    ParseResult r = try_parse(raw, ParseMode::Strict);
    if (r.error) return {false, std::string(error_name(*r.error))};
    return {true, std::nullopt};
}

double format_reward(std::string_view raw) { return try_parse(raw).trace ? 1.0 : 0.0; }

}  // namespace navlab::trace
