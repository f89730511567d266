// Tagged turn grammar used between the policy and the environment.
//
// A non-final turn is   <think>...</think><tool_call>{json}</tool_call>
// a final turn is       <think>...</think><answer>...</answer>
// with only whitespace permitted between and around the segments.
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace toolgym {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ViolationCode {
    MissingThink,
    MissingAction,
    WrongOrder,
    DuplicateSegment,
    NestedTags,
    UnclosedTag,
    StrayText,
    EmptySegment,
    AnswerBeforeFinal,
};

std::string_view to_string(ViolationCode code);
std::optional<ViolationCode> violation_from_string(std::string_view name);

/// Half-open byte range [begin, end) into Turn::raw_text.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const Span&) const = default;
};

struct Violation {
    ViolationCode code;
    Span span;
    bool operator==(const Violation&) const = default;
};

struct ToolCallPayload {
    std::string tool;
    std::string task;
    std::optional<nlohmann::json> arguments;  // always an object when present
    bool operator==(const ToolCallPayload&) const = default;
};

struct AnswerPayload {
    std::string answer_text;  // verbatim, not normalized
    bool operator==(const AnswerPayload&) const = default;
};

struct SchemaViolation {
    std::string reason;
    bool operator==(const SchemaViolation&) const = default;
};

enum class ActionKind { None, ToolCall, Answer };
std::string_view to_string(ActionKind kind);
std::optional<ActionKind> action_kind_from_string(std::string_view name);

struct Turn {
    std::size_t index = 0;
    std::string think_text;
    std::variant<std::monostate, ToolCallPayload, AnswerPayload> action;
    std::string raw_text;
    std::vector<Violation> violations;

    // Which action segment came first, whether or not its payload parsed.
    ActionKind action_kind = ActionKind::None;
    // Verbatim content of the first <tool_call> segment.
    std::optional<std::string> tool_call_text;
    // Set when a <tool_call> segment exists but its payload is not a valid call.
    std::optional<SchemaViolation> schema_error;

    bool well_formed() const { return violations.empty(); }
    bool has_violation(ViolationCode code) const;
    const ToolCallPayload* tool_call() const { return std::get_if<ToolCallPayload>(&action); }
    const AnswerPayload* answer() const { return std::get_if<AnswerPayload>(&action); }
};

/// Parses one policy turn. Never throws; every detectable violation is recorded.
Turn parse_turn(std::string_view raw, bool is_final_expected, std::size_t index = 0);

/// Parses the body of a <tool_call> segment. Mandatory keys are `tool` and
/// `task` (strings); `arguments` is optional and must be an object. Any other
/// top-level key is rejected.
std::variant<ToolCallPayload, SchemaViolation> parse_tool_payload(std::string_view inner);

/// Canonical text for a well-formed turn. Throws Error if the turn has violations.
std::string render_turn(const Turn& turn);

/// End offset of the first complete `</tool_call>`, if any.
std::optional<std::size_t> find_sentinel(std::string_view stream);

inline constexpr std::string_view kToolCallClose = "</tool_call>";

}  // namespace toolgym
