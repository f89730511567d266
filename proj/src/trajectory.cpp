#include "toolgym/trajectory.hpp"

namespace toolgym {

std::string_view to_string(ObservationKind kind) {
    switch (kind) {
        case ObservationKind::ToolOutput: return "ToolOutput";
        case ObservationKind::ToolError: return "ToolError";
        case ObservationKind::EnvError: return "EnvError";
        case ObservationKind::Initial: return "Initial";
    }
    return "Initial";
}

std::optional<ObservationKind> observation_kind_from_string(std::string_view name) {
    for (auto k : {ObservationKind::ToolOutput, ObservationKind::ToolError, ObservationKind::EnvError,
                   ObservationKind::Initial}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

std::string_view to_string(EpisodeStatus status) {
    switch (status) {
        case EpisodeStatus::Running: return "Running";
        case EpisodeStatus::Answered: return "Answered";
        case EpisodeStatus::Truncated: return "Truncated";
        case EpisodeStatus::Aborted: return "Aborted";
    }
    return "Running";
}

std::optional<EpisodeStatus> episode_status_from_string(std::string_view name) {
    for (auto s : {EpisodeStatus::Running, EpisodeStatus::Answered, EpisodeStatus::Truncated,
                   EpisodeStatus::Aborted}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

std::optional<std::string> Trajectory::final_answer() const {
    if (turns.empty()) return std::nullopt;
    if (const auto* answer = turns.back().answer()) return answer->answer_text;
    return std::nullopt;
}

std::string Trajectory::policy_text() const {
    std::string out;
    for (const auto& turn : turns) {
        if (!out.empty()) out.push_back('\n');
        out += turn.raw_text;
    }
    return out;
}

}  // namespace toolgym
