// Append-only trajectory log (one JSON record per line) and pass-rate
// aggregation over it.
#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "toolgym/env.hpp"
#include "toolgym/reward.hpp"

namespace toolgym {

struct TurnRecord {
    std::string raw_text;
    std::vector<Violation> violations;
    ActionKind action_kind = ActionKind::None;
    std::optional<std::string> tool;
    std::optional<std::string> task;
    std::optional<nlohmann::json> arguments;
    std::optional<std::string> schema_error;
    // Static taxonomy class assigned at step time (tool-call turns only).
    std::optional<TaxonomyCode> taxonomy;
    bool operator==(const TurnRecord&) const = default;
};

struct TrajectoryRecord {
    std::string episode_id;
    std::string instance_id;
    int rollout_index = 0;
    std::vector<TurnRecord> turns;
    std::vector<Observation> observations;  // Initial first, then one per tool-call turn
    std::optional<std::string> final_answer;
    EpisodeStatus status = EpisodeStatus::Answered;
    RewardBreakdown reward;
    std::int64_t wall_ms = 0;
    std::string ground_truth;
    AnswerRule answer_rule;
    std::optional<std::string> abort_reason;
    bool operator==(const TrajectoryRecord&) const = default;

    /// Re-parses the logged turn text into a trajectory for re-scoring.
    Trajectory to_trajectory() const;
};

TrajectoryRecord make_record(const EpisodeState& state, int rollout_index, std::int64_t wall_ms);

nlohmann::json to_json(const TrajectoryRecord& record);
TrajectoryRecord trajectory_record_from_json(const nlohmann::json& j);
/// Single-line serialization; timing fields can be dropped for comparisons.
std::string serialize_record(const TrajectoryRecord& record, bool include_timing = true);

/// Line-atomic appender, safe to share between threads.
class TrajectoryLog {
public:
    explicit TrajectoryLog(std::filesystem::path path, bool truncate = false);
    ~TrajectoryLog();
    TrajectoryLog(const TrajectoryLog&) = delete;
    TrajectoryLog& operator=(const TrajectoryLog&) = delete;

    /// Throws Error for a non-terminal record or a failed write.
    void append(const TrajectoryRecord& record);
    /// fsync; records are durable once this returns.
    void flush();
    const std::filesystem::path& path() const { return path_; }
    std::size_t appended() const;

private:
    std::filesystem::path path_;
    int fd_ = -1;
    mutable std::mutex mu_;
    std::size_t appended_ = 0;
};

struct LogContents {
    std::vector<TrajectoryRecord> records;
    std::size_t corrupt_lines = 0;
};

/// Reads every parseable record; corrupt lines are counted and skipped.
LogContents read_log(const std::filesystem::path& path);

struct PassRateRecord {
    std::string instance_id;
    int successes = 0;
    int rollouts = 0;
    double rate = 0.0;
    bool operator==(const PassRateRecord&) const = default;
};

nlohmann::json to_json(const PassRateRecord& r);
PassRateRecord pass_rate_from_json(const nlohmann::json& j);
std::vector<PassRateRecord> load_pass_rates(const std::filesystem::path& path);

/// Groups by instance (sorted by id); success means reward.r_correct == 1.
std::vector<PassRateRecord> pass_rates(std::span<const TrajectoryRecord> records);

}  // namespace toolgym
