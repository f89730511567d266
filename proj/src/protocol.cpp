#include "toolgym/protocol.hpp"

#include <algorithm>
#include <array>

namespace toolgym {

namespace {

enum class SegmentKind { Think, ToolCall, Answer };

struct TagInfo {
    std::string_view text;
    SegmentKind kind;
    bool closing;
};

constexpr std::array<TagInfo, 6> kTags{{
    {"<think>", SegmentKind::Think, false},
    {"</think>", SegmentKind::Think, true},
    {"<tool_call>", SegmentKind::ToolCall, false},
    {"</tool_call>", SegmentKind::ToolCall, true},
    {"<answer>", SegmentKind::Answer, false},
    {"</answer>", SegmentKind::Answer, true},
}};

struct Segment {
    SegmentKind kind;
    std::size_t open_begin;
    std::size_t content_begin;
    std::size_t content_end;
    std::size_t close_end;
};

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), is_space);
}

const TagInfo* match_tag(std::string_view raw, std::size_t pos) {
    for (const auto& tag : kTags) {
        if (raw.compare(pos, tag.text.size(), tag.text) == 0) return &tag;
    }
    return nullptr;
}

}  // namespace

std::string_view to_string(ViolationCode code) {
    switch (code) {
        case ViolationCode::MissingThink: return "MissingThink";
        case ViolationCode::MissingAction: return "MissingAction";
        case ViolationCode::WrongOrder: return "WrongOrder";
        case ViolationCode::DuplicateSegment: return "DuplicateSegment";
        case ViolationCode::NestedTags: return "NestedTags";
        case ViolationCode::UnclosedTag: return "UnclosedTag";
        case ViolationCode::StrayText: return "StrayText";
        case ViolationCode::EmptySegment: return "EmptySegment";
        case ViolationCode::AnswerBeforeFinal: return "AnswerBeforeFinal";
    }
    return "Unknown";
}

std::optional<ViolationCode> violation_from_string(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(ViolationCode::AnswerBeforeFinal); ++i) {
        auto code = static_cast<ViolationCode>(i);
        if (to_string(code) == name) return code;
    }
    return std::nullopt;
}

std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::None: return "none";
        case ActionKind::ToolCall: return "tool_call";
        case ActionKind::Answer: return "answer";
    }
    return "none";
}

std::optional<ActionKind> action_kind_from_string(std::string_view name) {
    if (name == "none") return ActionKind::None;
    if (name == "tool_call") return ActionKind::ToolCall;
    if (name == "answer") return ActionKind::Answer;
    return std::nullopt;
}

bool Turn::has_violation(ViolationCode code) const {
    return std::any_of(violations.begin(), violations.end(),
                       [code](const Violation& v) { return v.code == code; });
}

Turn parse_turn(std::string_view raw, bool is_final_expected, std::size_t index) {
    Turn turn;
    turn.index = index;
    turn.raw_text = std::string(raw);
    const std::size_t n = raw.size();
    auto add = [&](ViolationCode code, std::size_t b, std::size_t e) {
        turn.violations.push_back({code, {b, e}});
    };

    std::vector<Segment> segments;
    std::optional<Segment> open;
    std::size_t gap_begin = 0;

    // Text between top-level segments may only be whitespace.
    auto flush_gap = [&](std::size_t gap_end) {
        std::size_t b = gap_begin;
        std::size_t e = gap_end;
        while (b < e && is_space(raw[b])) ++b;
        while (e > b && is_space(raw[e - 1])) --e;
        if (b < e) add(ViolationCode::StrayText, b, e);
    };

    std::size_t i = 0;
    while (i < n) {
        const TagInfo* tag = raw[i] == '<' ? match_tag(raw, i) : nullptr;
        if (!tag) {
            ++i;
            continue;
        }
        const std::size_t len = tag->text.size();
        if (!open) {
            flush_gap(i);
            if (tag->closing) {
                add(ViolationCode::StrayText, i, i + len);
            } else {
                open = Segment{tag->kind, i, i + len, 0, 0};
            }
            gap_begin = i + len;
        } else if (tag->closing && tag->kind == open->kind) {
            open->content_end = i;
            open->close_end = i + len;
            segments.push_back(*open);
            open.reset();
            gap_begin = i + len;
        } else {
            add(ViolationCode::NestedTags, i, i + len);
        }
        i += len;
    }
    if (open) {
        add(ViolationCode::UnclosedTag, open->open_begin, n);
    } else {
        flush_gap(n);
    }

    const Segment* first_think = nullptr;
    const Segment* first_action = nullptr;
    for (const auto& seg : segments) {
        std::string_view content = raw.substr(seg.content_begin, seg.content_end - seg.content_begin);
        if (seg.kind == SegmentKind::Think) {
            if (first_think) {
                add(ViolationCode::DuplicateSegment, seg.open_begin, seg.close_end);
            } else {
                first_think = &seg;
            }
        } else {
            if (first_action) {
                add(ViolationCode::DuplicateSegment, seg.open_begin, seg.close_end);
            } else {
                first_action = &seg;
            }
        }
        if (seg.kind != SegmentKind::ToolCall && is_blank(content)) {
            add(ViolationCode::EmptySegment, seg.open_begin, seg.close_end);
        }
        if (seg.kind == SegmentKind::Answer && !is_final_expected) {
            add(ViolationCode::AnswerBeforeFinal, seg.open_begin, seg.close_end);
        }
    }
    if (!first_think) add(ViolationCode::MissingThink, 0, n);
    if (!first_action) add(ViolationCode::MissingAction, 0, n);
    if (first_think && first_action && first_action->open_begin < first_think->open_begin) {
        add(ViolationCode::WrongOrder, first_action->open_begin, first_action->close_end);
    }

    std::sort(turn.violations.begin(), turn.violations.end(), [](const Violation& a, const Violation& b) {
        if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
        return static_cast<int>(a.code) < static_cast<int>(b.code);
    });

    auto content_of = [&](const Segment& seg) {
        return std::string(raw.substr(seg.content_begin, seg.content_end - seg.content_begin));
    };
    if (first_think) turn.think_text = content_of(*first_think);
    if (first_action) {
        if (first_action->kind == SegmentKind::Answer) {
            turn.action_kind = ActionKind::Answer;
            turn.action = AnswerPayload{content_of(*first_action)};
        } else {
            turn.action_kind = ActionKind::ToolCall;
            turn.tool_call_text = content_of(*first_action);
            auto parsed = parse_tool_payload(*turn.tool_call_text);
            if (auto* payload = std::get_if<ToolCallPayload>(&parsed)) {
                turn.action = std::move(*payload);
            } else {
                turn.schema_error = std::get<SchemaViolation>(std::move(parsed));
            }
        }
    }
    return turn;
}

std::variant<ToolCallPayload, SchemaViolation> parse_tool_payload(std::string_view inner) {
    nlohmann::json doc = nlohmann::json::parse(inner.begin(), inner.end(), nullptr, false);
    if (doc.is_discarded()) return SchemaViolation{"payload is not a parseable JSON document"};
    if (!doc.is_object()) return SchemaViolation{"payload must be a JSON object"};

    for (const auto& [key, value] : doc.items()) {
        if (key != "tool" && key != "task" && key != "arguments") {
            return SchemaViolation{"unexpected key `" + key + "`"};
        }
    }
    for (const char* key : {"tool", "task"}) {
        auto it = doc.find(key);
        if (it == doc.end()) return SchemaViolation{std::string("missing key `") + key + "`"};
        if (!it->is_string()) return SchemaViolation{std::string("key `") + key + "` must be a string"};
        if (it->get_ref<const std::string&>().empty()) {
            return SchemaViolation{std::string("key `") + key + "` must be non-empty"};
        }
    }
    ToolCallPayload payload;
    payload.tool = doc["tool"].get<std::string>();
    payload.task = doc["task"].get<std::string>();
    if (auto it = doc.find("arguments"); it != doc.end()) {
        if (!it->is_object()) return SchemaViolation{"key `arguments` must be an object"};
        payload.arguments = *it;
    }
    return payload;
}

std::string render_turn(const Turn& turn) {
    if (!turn.well_formed()) throw Error("render_turn: turn has format violations");
    std::string out = "<think>" + turn.think_text + "</think>";
    if (const auto* answer = turn.answer()) {
        out += "<answer>" + answer->answer_text + "</answer>";
    } else if (turn.tool_call_text) {
        out += "<tool_call>" + *turn.tool_call_text + "</tool_call>";
    } else if (const auto* call = turn.tool_call()) {
        nlohmann::json doc{{"tool", call->tool}, {"task", call->task}};
        if (call->arguments) doc["arguments"] = *call->arguments;
        out += "<tool_call>" + doc.dump() + "</tool_call>";
    } else {
        throw Error("render_turn: turn has no action");
    }
    return out;
}

std::optional<std::size_t> find_sentinel(std::string_view stream) {
    auto pos = stream.find(kToolCallClose);
    if (pos == std::string_view::npos) return std::nullopt;
    return pos + kToolCallClose.size();
}

}  // namespace toolgym
