// Concurrent episode orchestration and rollout-group assembly.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "toolgym/env.hpp"
#include "toolgym/grpo.hpp"
#include "toolgym/policy.hpp"
#include "toolgym/store.hpp"

namespace toolgym {

struct RunConfig {
    int concurrency = 24;
    int group_size = 8;
    int max_turns = 3;
    std::vector<std::uint64_t> seeds;
    // Abort an episode as soon as a tool call comes back Unreachable/Timeout
    // instead of letting the policy continue.
    bool abort_on_env_error = false;

    void validate() const;
};

struct RunSummary {
    std::size_t episodes = 0;
    std::map<EpisodeStatus, std::size_t> by_status;
    double mean_reward = 0.0;
    double std_reward = 0.0;
    double mean_turns = 0.0;
    std::size_t env_errors = 0;
    std::map<TaxonomyCode, std::size_t> taxonomy;  // static class of every tool-call turn
    std::int64_t wall_ms = 0;

    std::size_t count(EpisodeStatus status) const;
    /// Line-delimited report records.
    std::vector<nlohmann::json> to_records() const;
};

/// Runs every instance cfg.group_size times with at most cfg.concurrency
/// episodes in flight. Records are appended in (instance, rollout) order,
/// independent of completion order.
RunSummary run_episodes(std::span<const TaskInstance> instances, Policy& policy, const RunConfig& cfg,
                        const Environment& env, TrajectoryLog& log);

/// One group per requested instance, rewards ordered by rollout index, taking
/// the first group_size records. Throws Error naming an instance with too few
/// records.
std::vector<RolloutGroup> collect_groups(std::span<const TrajectoryRecord> records,
                                         std::span<const std::string> instance_ids, int group_size,
                                         double eps_std = 1e-8);

}  // namespace toolgym
