#include "toolgym/env.hpp"

#include <fstream>
#include <set>

namespace toolgym {

nlohmann::json to_json(const TaskInstance& instance) {
    return {{"id", instance.id},
            {"question", instance.question},
            {"image_refs", instance.image_refs},
            {"ground_truth", instance.ground_truth},
            {"task_type", instance.task_type},
            {"answer_rule", to_json(instance.answer_rule)}};
}

TaskInstance task_instance_from_json(const nlohmann::json& j) {
    TaskInstance t;
    try {
        t.id = j.at("id").get<std::string>();
        t.question = j.at("question").get<std::string>();
        t.image_refs = j.value("image_refs", std::vector<std::string>{});
        t.ground_truth = j.at("ground_truth").get<std::string>();
        t.task_type = j.value("task_type", std::string());
        t.answer_rule = answer_rule_from_json(j.value("answer_rule", nlohmann::json()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("task instance: ") + e.what());
    }
    if (t.id.empty()) throw Error("task instance: empty id");
    if (t.ground_truth.empty()) throw Error("task instance `" + t.id + "`: empty ground truth");
    return t;
}

std::vector<TaskInstance> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("dataset: cannot open " + path.string());
    std::vector<TaskInstance> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded()) throw Error("dataset: line " + std::to_string(lineno) + " is not a valid record");
        auto instance = task_instance_from_json(doc);
        if (!ids.insert(instance.id).second) throw Error("dataset: duplicate id `" + instance.id + "`");
        out.push_back(std::move(instance));
    }
    return out;
}

Trajectory EpisodeState::trajectory() const {
    Trajectory traj;
    for (const auto& step : history) {
        traj.turns.push_back(step.turn);
        if (step.observation) traj.observations.push_back(*step.observation);
    }
    traj.reached_answer = status == EpisodeStatus::Answered;
    return traj;
}

std::string render_observation(std::string_view raw_tool_output, bool is_error) {
    std::string out = "```output\n";
    if (is_error) out += "error: ";
    out += raw_tool_output;
    out += "\n```";
    return out;
}

std::string render_question(const TaskInstance& instance) {
    std::string out = instance.question;
    for (const auto& ref : instance.image_refs) out += "\n<image:" + ref + ">";
    return out;
}

Environment::Environment(ToolRouter& router, RepetitionConfig repetition)
    : router_(router), repetition_(repetition) {
    repetition_.validate();
}

std::pair<EpisodeState, Observation> Environment::reset(const TaskInstance& instance, int max_turns,
                                                        std::string episode_id) const {
    if (max_turns < 1) throw Error("reset: max_turns must be >= 1");
    EpisodeState state;
    state.instance = instance;
    state.episode_id = episode_id.empty() ? instance.id : std::move(episode_id);
    state.max_turns = max_turns;
    state.initial = Observation{ObservationKind::Initial, render_question(instance), std::nullopt, 0};
    Observation initial = state.initial;
    return {std::move(state), std::move(initial)};
}

StepResult Environment::step(EpisodeState& state, std::string_view raw_policy_output) const {
    if (state.terminal()) throw Error("step: episode `" + state.episode_id + "` is already terminal");

    // Finality is decided by the segment the policy emitted, so an answer is
    // accepted on any turn.
    StepRecord record{parse_turn(raw_policy_output, true, static_cast<std::size_t>(state.turn_index)), std::nullopt,
                      std::nullopt};
    const Turn& turn = record.turn;
    ++state.turn_index;

    if (turn.action_kind == ActionKind::Answer) {
        state.history.push_back(std::move(record));
        auto reward = finish(state, EpisodeStatus::Answered);
        return {std::nullopt, true, reward};
    }

    Observation obs;
    TaxonomyClass cls;
    if (const auto* payload = turn.tool_call()) {
        ToolCall call{payload->tool, payload->task, payload->arguments.value_or(nlohmann::json::object()),
                      state.episode_id, state.turn_index - 1};
        cls = validate_call(call, registry());
        if (cls.ok()) {
            ToolRequest req;
            req.correlation_id = state.episode_id + ":" + std::to_string(call.turn_index);
            req.tool = call.tool;
            req.task = call.task;
            req.arguments = call.arguments;
            req.image_refs = state.instance.image_refs;
            auto resp = router_.dispatch(req);
            obs.source_tool = call.tool;
            obs.latency_ms = resp.latency_ms;
            obs.payload = resp.payload;
            switch (resp.status) {
                case ResponseStatus::Ok: obs.kind = ObservationKind::ToolOutput; break;
                case ResponseStatus::ToolError: obs.kind = ObservationKind::ToolError; break;
                case ResponseStatus::Timeout:
                case ResponseStatus::Unreachable: obs.kind = ObservationKind::EnvError; break;
            }
        } else {
            obs.kind = ObservationKind::ToolError;
            obs.source_tool = call.tool;
            obs.payload = "Tool Call Error (" + std::string(to_string(cls.code)) + "): " + cls.detail;
        }
    } else {
        cls = TaxonomyClass{TaxonomyCode::E1, turn.schema_error ? turn.schema_error->reason
                                                                 : std::string("no tool call or answer found")};
        obs.kind = ObservationKind::ToolError;
        obs.payload = "Tool Call Error (E1): " + cls.detail;
    }

    record.observation = obs;
    record.taxonomy = cls;
    state.history.push_back(std::move(record));

    StepResult result{obs, false, std::nullopt};
    if (state.turn_index >= state.max_turns) {
        result.done = true;
        result.reward = finish(state, EpisodeStatus::Truncated);
    }
    return result;
}

void Environment::abort(EpisodeState& state, std::string_view reason) const {
    if (state.terminal()) throw Error("abort: episode `" + state.episode_id + "` is already terminal");
    state.abort_reason = std::string(reason);
    finish(state, EpisodeStatus::Aborted);
}

RewardBreakdown Environment::finish(EpisodeState& state, EpisodeStatus status) const {
    state.status = status;
    state.reward = score_trajectory(state.trajectory(), state.instance.ground_truth, state.instance.answer_rule,
                                    repetition_);
    return *state.reward;
}

}  // namespace toolgym
