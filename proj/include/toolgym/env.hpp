// Episode engine: Gym-style reset/step over the multi-turn tool protocol.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "toolgym/reward.hpp"
#include "toolgym/router.hpp"
#include "toolgym/toolspace.hpp"
#include "toolgym/trajectory.hpp"

namespace toolgym {

struct TaskInstance {
    std::string id;
    std::string question;
    std::vector<std::string> image_refs;
    std::string ground_truth;
    std::string task_type;
    AnswerRule answer_rule;
};

nlohmann::json to_json(const TaskInstance& instance);
TaskInstance task_instance_from_json(const nlohmann::json& j);
/// One instance per line; ids must be unique.
std::vector<TaskInstance> load_dataset(const std::filesystem::path& path);

struct StepRecord {
    Turn turn;
    std::optional<Observation> observation;  // absent for the answer turn
    // Static class of the call (OK when dispatched, E1-E3 when rejected);
    // unset for answer turns.
    std::optional<TaxonomyClass> taxonomy;
};

struct EpisodeState {
    TaskInstance instance;
    std::string episode_id;
    Observation initial;
    std::vector<StepRecord> history;
    int turn_index = 0;
    int max_turns = 3;
    EpisodeStatus status = EpisodeStatus::Running;
    std::optional<RewardBreakdown> reward;
    std::optional<std::string> abort_reason;

    bool terminal() const { return status != EpisodeStatus::Running; }
    Trajectory trajectory() const;
};

struct StepResult {
    std::optional<Observation> observation;  // absent when the policy answered
    bool done = false;
    std::optional<RewardBreakdown> reward;  // present iff done
};

/// Fenced block fed back to the policy:  ```output\n<payload>\n```
std::string render_observation(std::string_view raw_tool_output, bool is_error);

/// Rendered question plus image reference tokens.
std::string render_question(const TaskInstance& instance);

class Environment {
public:
    Environment(ToolRouter& router, RepetitionConfig repetition = {});

    std::pair<EpisodeState, Observation> reset(const TaskInstance& instance, int max_turns = 3,
                                               std::string episode_id = {}) const;

    /// Advances one turn. Throws Error when the episode is already terminal.
    StepResult step(EpisodeState& state, std::string_view raw_policy_output) const;

    /// Marks a running episode Aborted and scores it as unanswered.
    void abort(EpisodeState& state, std::string_view reason) const;

    const Registry& registry() const { return router_.registry(); }

private:
    RewardBreakdown finish(EpisodeState& state, EpisodeStatus status) const;

    ToolRouter& router_;
    RepetitionConfig repetition_;
};

}  // namespace toolgym
