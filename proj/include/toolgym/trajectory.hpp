#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "toolgym/protocol.hpp"

namespace toolgym {

enum class ObservationKind { ToolOutput, ToolError, EnvError, Initial };
std::string_view to_string(ObservationKind kind);
std::optional<ObservationKind> observation_kind_from_string(std::string_view name);

/// Environment feedback for one step. `payload` is the raw tool output or
/// error detail; fencing for the prompt happens in render_observation().
struct Observation {
    ObservationKind kind = ObservationKind::Initial;
    std::string payload;
    std::optional<std::string> source_tool;
    std::int64_t latency_ms = 0;
    bool operator==(const Observation&) const = default;
};

enum class EpisodeStatus { Running, Answered, Truncated, Aborted };
std::string_view to_string(EpisodeStatus status);
std::optional<EpisodeStatus> episode_status_from_string(std::string_view name);

/// What the reward engine needs from a finished (or in-progress) episode.
struct Trajectory {
    std::vector<Turn> turns;
    // Observations that followed each tool-call turn, aligned with `turns`
    // where present; the reward engine ignores them.
    std::vector<Observation> observations;
    bool reached_answer = false;

    std::optional<std::string> final_answer() const;
    /// Concatenated policy-generated text, the input to repetition scanning.
    std::string policy_text() const;
};

}  // namespace toolgym
