#include "toolgym/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

namespace toolgym {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

// Appends records in job order as soon as the next one in sequence is ready.
class OrderedCommitter {
public:
    OrderedCommitter(TrajectoryLog& log, std::size_t jobs) : log_(log), pending_(jobs) {}

    void submit(std::size_t job, TrajectoryRecord record) {
        std::lock_guard lock(mu_);
        pending_[job] = std::move(record);
        while (next_ < pending_.size() && pending_[next_]) {
            log_.append(*pending_[next_]);
            pending_[next_].reset();
            ++next_;
        }
    }

private:
    TrajectoryLog& log_;
    std::mutex mu_;
    std::vector<std::optional<TrajectoryRecord>> pending_;
    std::size_t next_ = 0;
};

}  // namespace

void RunConfig::validate() const {
    if (concurrency < 1) throw Error("run config: concurrency must be >= 1");
    if (group_size < 1) throw Error("run config: group_size must be >= 1");
    if (max_turns < 1) throw Error("run config: max_turns must be >= 1");
}

std::size_t RunSummary::count(EpisodeStatus status) const {
    auto it = by_status.find(status);
    return it == by_status.end() ? 0 : it->second;
}

std::vector<nlohmann::json> RunSummary::to_records() const {
    std::vector<nlohmann::json> out;
    out.push_back({{"record", "summary"},
                   {"episodes", episodes},
                   {"mean_reward", mean_reward},
                   {"std_reward", std_reward},
                   {"mean_turns", mean_turns},
                   {"env_errors", env_errors},
                   {"wall_ms", wall_ms}});
    for (auto status : {EpisodeStatus::Answered, EpisodeStatus::Truncated, EpisodeStatus::Aborted}) {
        out.push_back({{"record", "status"}, {"status", to_string(status)}, {"count", count(status)}});
    }
    for (const auto& [code, n] : taxonomy) {
        out.push_back({{"record", "taxonomy"}, {"code", to_string(code)}, {"count", n}});
    }
    return out;
}

RunSummary run_episodes(std::span<const TaskInstance> instances, Policy& policy, const RunConfig& cfg,
                        const Environment& env, TrajectoryLog& log) {
    cfg.validate();
    const auto run_start = Clock::now();
    const std::size_t group = static_cast<std::size_t>(cfg.group_size);
    const std::size_t jobs = instances.size() * group;

    OrderedCommitter committer(log, jobs);
    std::vector<TrajectoryRecord> finished(jobs);
    std::atomic<std::size_t> next_job{0};
    std::mutex error_mu;
    std::exception_ptr error;

    auto run_jobs = [&] {
        for (std::size_t job = next_job++; job < jobs; job = next_job++) {
            const TaskInstance& instance = instances[job / group];
            const int rollout = static_cast<int>(job % group);
            const auto start = Clock::now();
            const std::uint64_t seed =
                cfg.seeds.empty() ? static_cast<std::uint64_t>(rollout) : cfg.seeds[job % cfg.seeds.size()];

            EpisodeState state =
                env.reset(instance, cfg.max_turns, instance.id + "#" + std::to_string(rollout)).first;
            while (!state.terminal()) {
                std::string output;
                try {
                    output = policy.generate(PolicyContext{state, rollout, seed});
                } catch (const std::exception& e) {
                    env.abort(state, e.what());
                    break;
                }
                auto result = env.step(state, output);
                if (cfg.abort_on_env_error && !state.terminal() && result.observation &&
                    result.observation->kind == ObservationKind::EnvError) {
                    env.abort(state, "tool endpoint failure: " + result.observation->payload);
                }
            }
            auto record = make_record(state, rollout, ms_since(start));
            finished[job] = record;
            committer.submit(job, std::move(record));
        }
    };
    auto worker = [&] {
        try {
            run_jobs();
        } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            next_job = jobs;
        }
    };

    const std::size_t threads =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency), std::max<std::size_t>(jobs, 1));
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);

    RunSummary summary;
    summary.episodes = jobs;
    double sum = 0.0;
    double sum_sq = 0.0;
    double turns = 0.0;
    for (const auto& r : finished) {
        ++summary.by_status[r.status];
        sum += r.reward.total;
        sum_sq += r.reward.total * r.reward.total;
        turns += static_cast<double>(r.turns.size());
        for (const auto& o : r.observations) {
            if (o.kind == ObservationKind::EnvError) ++summary.env_errors;
        }
        for (const auto& t : r.turns) {
            if (t.taxonomy) ++summary.taxonomy[*t.taxonomy];
        }
    }
    if (jobs > 0) {
        const double n = static_cast<double>(jobs);
        summary.mean_reward = sum / n;
        summary.std_reward = std::sqrt(std::max(0.0, sum_sq / n - summary.mean_reward * summary.mean_reward));
        summary.mean_turns = turns / n;
    }
    summary.wall_ms = ms_since(run_start);
    return summary;
}

std::vector<RolloutGroup> collect_groups(std::span<const TrajectoryRecord> records,
                                         std::span<const std::string> instance_ids, int group_size, double eps_std) {
    if (group_size < 2) throw Error("collect_groups: group size must be >= 2");
    std::vector<RolloutGroup> groups;
    for (const auto& id : instance_ids) {
        std::vector<const TrajectoryRecord*> mine;
        for (const auto& r : records) {
            if (r.instance_id == id) mine.push_back(&r);
        }
        if (mine.size() < static_cast<std::size_t>(group_size)) {
            throw Error("collect_groups: instance `" + id + "` has " + std::to_string(mine.size()) +
                        " rollouts, need " + std::to_string(group_size));
        }
        std::stable_sort(mine.begin(), mine.end(), [](const TrajectoryRecord* a, const TrajectoryRecord* b) {
            return a->rollout_index < b->rollout_index;
        });
        RolloutGroup g;
        g.instance_id = id;
        for (int i = 0; i < group_size; ++i) {
            g.rewards.push_back(mine[static_cast<std::size_t>(i)]->reward.total);
            g.episode_ids.push_back(mine[static_cast<std::size_t>(i)]->episode_id);
        }
        g.advantages = compute_advantages(g.rewards, eps_std);
        groups.push_back(std::move(g));
    }
    return groups;
}

}  // namespace toolgym
