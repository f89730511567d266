#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>

#include "toolgym/env.hpp"

namespace toolgym {

/// Raised when a policy cannot produce a turn; the episode is aborted.
class PolicyError : public Error {
public:
    using Error::Error;
};

struct PolicyContext {
    const EpisodeState& state;
    int rollout_index = 0;
    std::uint64_t seed = 0;
};

class Policy {
public:
    virtual ~Policy() = default;
    /// Raw text of the next turn. Must be safe to call concurrently for
    /// different episodes.
    virtual std::string generate(const PolicyContext& ctx) = 0;
};

/// Full prompt for the next turn: tool-use instructions, the question, and
/// every prior turn followed by its fenced observation.
std::string render_prompt(const EpisodeState& state);

/// Replays fixed outputs keyed by (instance, turn), optionally specialised
/// per rollout index.
class ScriptedPolicy final : public Policy {
public:
    void add(std::string instance_id, int turn_index, std::string output, std::optional<int> rollout = std::nullopt);
    std::string generate(const PolicyContext& ctx) override;
    std::size_t size() const { return entries_.size(); }

    /// One JSON record per line: {"instance_id", "turn_index", "output", "rollout"?}.
    static ScriptedPolicy load(const std::filesystem::path& path);

private:
    // rollout -1 means "any rollout"
    std::map<std::tuple<std::string, int, int>, std::string> entries_;
};

struct SamplingParams {
    double temperature = 0.7;
    int max_response_tokens = 26'780;
};

/// POSTs {"prompt", "temperature", "max_response_tokens", "seed",
/// "instance_id", "turn_index"} to <endpoint>/generate and expects either
/// {"text": ...} or a plain-text body. Output is cut after the first
/// </tool_call>.
class RemoteHttpPolicy final : public Policy {
public:
    RemoteHttpPolicy(std::string endpoint, SamplingParams params = {}, std::int64_t timeout_ms = 120'000);
    std::string generate(const PolicyContext& ctx) override;

private:
    std::string endpoint_;
    SamplingParams params_;
    std::int64_t timeout_ms_;
};

}  // namespace toolgym
