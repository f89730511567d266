#include "toolgym/policy.hpp"

#include <fstream>

#include "httplib.h"

namespace toolgym {

namespace {

constexpr std::string_view kInstructions =
    "Solve the problem step by step. In each turn, reason inside <think></think>, then either call one tool "
    "with <tool_call>{\"tool\": ..., \"task\": ..., \"arguments\": {...}}</tool_call> or give the final answer "
    "inside <answer></answer>.\n\n";

}  // namespace

std::string render_prompt(const EpisodeState& state) {
    std::string prompt(kInstructions);
    prompt += state.initial.payload;
    for (const auto& step : state.history) {
        prompt += "\n";
        prompt += step.turn.raw_text;
        if (step.observation) {
            const bool is_error = step.observation->kind != ObservationKind::ToolOutput;
            prompt += "\n" + render_observation(step.observation->payload, is_error);
        }
    }
    return prompt;
}

void ScriptedPolicy::add(std::string instance_id, int turn_index, std::string output, std::optional<int> rollout) {
    entries_[{std::move(instance_id), turn_index, rollout.value_or(-1)}] = std::move(output);
}

std::string ScriptedPolicy::generate(const PolicyContext& ctx) {
    const auto& id = ctx.state.instance.id;
    const int turn = ctx.state.turn_index;
    if (auto it = entries_.find({id, turn, ctx.rollout_index}); it != entries_.end()) return it->second;
    if (auto it = entries_.find({id, turn, -1}); it != entries_.end()) return it->second;
    throw PolicyError("scripted policy has no output for instance `" + id + "` turn " + std::to_string(turn) +
                      " rollout " + std::to_string(ctx.rollout_index));
}

ScriptedPolicy ScriptedPolicy::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("policy script: cannot open " + path.string());
    ScriptedPolicy policy;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            std::optional<int> rollout;
            if (j.contains("rollout") && !j["rollout"].is_null()) rollout = j["rollout"].get<int>();
            policy.add(j.at("instance_id").get<std::string>(), j.at("turn_index").get<int>(),
                       j.at("output").get<std::string>(), rollout);
        } catch (const nlohmann::json::exception& e) {
            throw Error("policy script: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return policy;
}

RemoteHttpPolicy::RemoteHttpPolicy(std::string endpoint, SamplingParams params, std::int64_t timeout_ms)
    : endpoint_(std::move(endpoint)), params_(params), timeout_ms_(timeout_ms) {}

std::string RemoteHttpPolicy::generate(const PolicyContext& ctx) {
    nlohmann::json body{{"prompt", render_prompt(ctx.state)},
                        {"temperature", params_.temperature},
                        {"max_response_tokens", params_.max_response_tokens},
                        {"seed", ctx.seed},
                        {"instance_id", ctx.state.instance.id},
                        {"turn_index", ctx.state.turn_index}};
    httplib::Client client(endpoint_);
    const auto sec = static_cast<time_t>(timeout_ms_ / 1000);
    const auto usec = static_cast<time_t>((timeout_ms_ % 1000) * 1000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    auto res = client.Post("/generate", body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                           "application/json");
    if (!res) throw PolicyError("policy endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw PolicyError("policy endpoint returned HTTP " + std::to_string(res->status));

    std::string text = res->body;
    auto doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_object() && doc.contains("text") && doc["text"].is_string()) text = doc["text"].get<std::string>();
    if (auto cut = find_sentinel(text)) text.resize(*cut);
    return text;
}

}  // namespace toolgym
