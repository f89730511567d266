#include "toolgym/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>

namespace toolgym {

namespace {

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& value) {
    j[key] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

std::optional<std::string> get_optional_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

nlohmann::json to_json(const Violation& v) {
    return {{"code", to_string(v.code)}, {"span", {v.span.begin, v.span.end}}};
}

Violation violation_from_json(const nlohmann::json& j) {
    auto code = violation_from_string(j.at("code").get<std::string>());
    if (!code) throw Error("record: unknown violation code");
    return {*code, {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()}};
}

nlohmann::json to_json(const TurnRecord& t) {
    nlohmann::json violations = nlohmann::json::array();
    for (const auto& v : t.violations) violations.push_back(to_json(v));
    nlohmann::json j{{"raw_text", t.raw_text}, {"violations", violations}, {"action_kind", to_string(t.action_kind)}};
    put_optional(j, "tool", t.tool);
    put_optional(j, "task", t.task);
    j["arguments"] = t.arguments ? *t.arguments : nlohmann::json(nullptr);
    put_optional(j, "schema_error", t.schema_error);
    j["taxonomy"] = t.taxonomy ? nlohmann::json(to_string(*t.taxonomy)) : nlohmann::json(nullptr);
    return j;
}

TurnRecord turn_record_from_json(const nlohmann::json& j) {
    TurnRecord t;
    t.raw_text = j.at("raw_text").get<std::string>();
    for (const auto& v : j.at("violations")) t.violations.push_back(violation_from_json(v));
    auto kind = action_kind_from_string(j.at("action_kind").get<std::string>());
    if (!kind) throw Error("record: unknown action kind");
    t.action_kind = *kind;
    t.tool = get_optional_string(j, "tool");
    t.task = get_optional_string(j, "task");
    if (j.contains("arguments") && !j["arguments"].is_null()) t.arguments = j["arguments"];
    t.schema_error = get_optional_string(j, "schema_error");
    if (auto code = get_optional_string(j, "taxonomy")) {
        t.taxonomy = taxonomy_code_from_string(*code);
        if (!t.taxonomy) throw Error("record: unknown taxonomy code");
    }
    return t;
}

nlohmann::json to_json(const Observation& o, bool include_timing) {
    nlohmann::json j{{"kind", to_string(o.kind)}, {"payload", o.payload}};
    put_optional(j, "source_tool", o.source_tool);
    if (include_timing) j["latency_ms"] = o.latency_ms;
    return j;
}

Observation observation_from_json(const nlohmann::json& j) {
    Observation o;
    auto kind = observation_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error("record: unknown observation kind");
    o.kind = *kind;
    o.payload = j.at("payload").get<std::string>();
    o.source_tool = get_optional_string(j, "source_tool");
    o.latency_ms = j.value("latency_ms", std::int64_t{0});
    return o;
}

nlohmann::json record_json(const TrajectoryRecord& r, bool include_timing) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : r.turns) turns.push_back(to_json(t));
    nlohmann::json observations = nlohmann::json::array();
    for (const auto& o : r.observations) observations.push_back(to_json(o, include_timing));
    nlohmann::json j{{"episode_id", r.episode_id},
                     {"instance_id", r.instance_id},
                     {"rollout_index", r.rollout_index},
                     {"turns", turns},
                     {"observations", observations}};
    put_optional(j, "final_answer", r.final_answer);
    j["status"] = to_string(r.status);
    j["reward"] = to_json(r.reward);
    if (include_timing) j["wall_ms"] = r.wall_ms;
    j["ground_truth"] = r.ground_truth;
    j["answer_rule"] = to_json(r.answer_rule);
    put_optional(j, "abort_reason", r.abort_reason);
    return j;
}

}  // namespace

Trajectory TrajectoryRecord::to_trajectory() const {
    Trajectory traj;
    for (std::size_t i = 0; i < turns.size(); ++i) traj.turns.push_back(parse_turn(turns[i].raw_text, true, i));
    for (std::size_t i = 1; i < observations.size(); ++i) traj.observations.push_back(observations[i]);
    traj.reached_answer = status == EpisodeStatus::Answered;
    return traj;
}

TrajectoryRecord make_record(const EpisodeState& state, int rollout_index, std::int64_t wall_ms) {
    TrajectoryRecord r;
    r.episode_id = state.episode_id;
    r.instance_id = state.instance.id;
    r.rollout_index = rollout_index;
    r.observations.push_back(state.initial);
    for (const auto& step : state.history) {
        TurnRecord t;
        t.raw_text = step.turn.raw_text;
        t.violations = step.turn.violations;
        t.action_kind = step.turn.action_kind;
        if (const auto* call = step.turn.tool_call()) {
            t.tool = call->tool;
            t.task = call->task;
            t.arguments = call->arguments;
        }
        if (step.turn.schema_error) t.schema_error = step.turn.schema_error->reason;
        if (step.taxonomy) t.taxonomy = step.taxonomy->code;
        r.turns.push_back(std::move(t));
        if (step.observation) r.observations.push_back(*step.observation);
    }
    if (!state.history.empty()) {
        if (const auto* answer = state.history.back().turn.answer()) r.final_answer = answer->answer_text;
    }
    r.status = state.status;
    if (state.reward) r.reward = *state.reward;
    r.wall_ms = wall_ms;
    r.ground_truth = state.instance.ground_truth;
    r.answer_rule = state.instance.answer_rule;
    r.abort_reason = state.abort_reason;
    return r;
}

nlohmann::json to_json(const TrajectoryRecord& record) { return record_json(record, true); }

TrajectoryRecord trajectory_record_from_json(const nlohmann::json& j) {
    TrajectoryRecord r;
    try {
        r.episode_id = j.at("episode_id").get<std::string>();
        r.instance_id = j.at("instance_id").get<std::string>();
        r.rollout_index = j.value("rollout_index", 0);
        for (const auto& t : j.at("turns")) r.turns.push_back(turn_record_from_json(t));
        for (const auto& o : j.at("observations")) r.observations.push_back(observation_from_json(o));
        r.final_answer = get_optional_string(j, "final_answer");
        auto status = episode_status_from_string(j.at("status").get<std::string>());
        if (!status) throw Error("record: unknown status");
        r.status = *status;
        r.reward = reward_from_json(j.at("reward"));
        r.wall_ms = j.value("wall_ms", std::int64_t{0});
        r.ground_truth = j.value("ground_truth", std::string());
        r.answer_rule = answer_rule_from_json(j.value("answer_rule", nlohmann::json()));
        r.abort_reason = get_optional_string(j, "abort_reason");
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("record: ") + e.what());
    }
    return r;
}

std::string serialize_record(const TrajectoryRecord& record, bool include_timing) {
    return record_json(record, include_timing).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

TrajectoryLog::TrajectoryLog(std::filesystem::path path, bool truncate) : path_(std::move(path)) {
    int flags = O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC;
    if (truncate) flags |= O_TRUNC;
    fd_ = ::open(path_.c_str(), flags, 0644);
    if (fd_ < 0) throw Error("log: cannot open " + path_.string() + ": " + std::strerror(errno));
}

TrajectoryLog::~TrajectoryLog() {
    if (fd_ >= 0) ::close(fd_);
}

void TrajectoryLog::append(const TrajectoryRecord& record) {
    if (record.status == EpisodeStatus::Running) throw Error("log: cannot append a non-terminal record");
    const std::string line = serialize_record(record) + "\n";
    std::lock_guard lock(mu_);
    // O_APPEND plus a single write per line keeps lines whole even across
    // processes sharing the file.
    std::size_t done = 0;
    while (done < line.size()) {
        ssize_t n = ::write(fd_, line.data() + done, line.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("log: write failed: " + std::string(std::strerror(errno)));
        }
        done += static_cast<std::size_t>(n);
    }
    ++appended_;
}

void TrajectoryLog::flush() {
    std::lock_guard lock(mu_);
    if (::fsync(fd_) != 0) throw Error("log: fsync failed: " + std::string(std::strerror(errno)));
}

std::size_t TrajectoryLog::appended() const {
    std::lock_guard lock(mu_);
    return appended_;
}

LogContents read_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("log: cannot open " + path.string());
    LogContents out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            ++out.corrupt_lines;
            continue;
        }
        try {
            out.records.push_back(trajectory_record_from_json(doc));
        } catch (const Error&) {
            ++out.corrupt_lines;
        }
    }
    return out;
}

nlohmann::json to_json(const PassRateRecord& r) {
    return {{"instance_id", r.instance_id}, {"successes", r.successes}, {"rollouts", r.rollouts}, {"rate", r.rate}};
}

PassRateRecord pass_rate_from_json(const nlohmann::json& j) {
    PassRateRecord r;
    try {
        r.instance_id = j.at("instance_id").get<std::string>();
        r.successes = j.at("successes").get<int>();
        r.rollouts = j.at("rollouts").get<int>();
        r.rate = j.contains("rate") ? j.at("rate").get<double>()
                                    : static_cast<double>(r.successes) / static_cast<double>(r.rollouts);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("pass rate: ") + e.what());
    }
    if (r.rollouts < 1 || r.successes < 0 || r.successes > r.rollouts || r.rate < 0.0 || r.rate > 1.0) {
        throw Error("pass rate: inconsistent counts for `" + r.instance_id + "`");
    }
    return r;
}

std::vector<PassRateRecord> load_pass_rates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("pass rates: cannot open " + path.string());
    std::vector<PassRateRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded()) throw Error("pass rates: unparseable line in " + path.string());
        out.push_back(pass_rate_from_json(doc));
    }
    return out;
}

std::vector<PassRateRecord> pass_rates(std::span<const TrajectoryRecord> records) {
    std::map<std::string, PassRateRecord> by_instance;
    for (const auto& r : records) {
        auto& agg = by_instance[r.instance_id];
        agg.instance_id = r.instance_id;
        ++agg.rollouts;
        if (r.reward.r_correct == 1.0) ++agg.successes;
    }
    std::vector<PassRateRecord> out;
    for (auto& [id, agg] : by_instance) {
        agg.rate = static_cast<double>(agg.successes) / static_cast<double>(agg.rollouts);
        out.push_back(agg);
    }
    return out;
}

}  // namespace toolgym
