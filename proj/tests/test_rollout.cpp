#include <atomic>
#include <set>
#include <thread>

#include "doctest.h"
#include "support.hpp"
#include "toolgym/rollout.hpp"

using namespace toolgym;

namespace {

std::vector<TaskInstance> dataset() { return load_dataset(testing::fixture("dataset.jsonl")); }

class ThrowingPolicy final : public Policy {
public:
    std::string generate(const PolicyContext&) override { throw PolicyError("model server down"); }
};

}  // namespace

TEST_CASE("scripted policy lookup") {
    ScriptedPolicy p;
    p.add("a", 0, "any");
    p.add("a", 0, "third", 3);
    testing::FakeRouter router(testing::fixture_registry(), [](const ToolRequest&) { return testing::ok_response("x"); });
    Environment env(router);
    TaskInstance inst{"a", "q", {}, "1", "", {}};
    auto state = env.reset(inst).first;
    CHECK(p.generate({state, 0, 0}) == "any");
    CHECK(p.generate({state, 3, 0}) == "third");
    TaskInstance other{"b", "q", {}, "1", "", {}};
    auto s2 = env.reset(other).first;
    CHECK_THROWS_AS(p.generate({s2, 0, 0}), PolicyError);
}

TEST_CASE("prompt contains prior turns and fenced observations") {
    testing::FakeRouter router(testing::fixture_registry(), [](const ToolRequest&) { return testing::ok_response("x = 15"); });
    Environment env(router);
    auto state = env.reset(dataset()[1]).first;
    env.step(state, testing::call_turn("gllava", "solve", {}));
    auto prompt = render_prompt(state);
    CHECK(prompt.find(dataset()[1].question) != std::string::npos);
    CHECK(prompt.find("```output\nx = 15\n```") != std::string::npos);
}

TEST_CASE("runs G rollouts per instance in order") {
    auto policy = ScriptedPolicy::load(testing::fixture("policy.jsonl"));
    testing::FakeRouter router(testing::fixture_registry(), [](const ToolRequest& r) {
        std::this_thread::sleep_for(std::chrono::milliseconds(r.correlation_id.size() % 3));
        return testing::ok_response("result");
    });
    Environment env(router);
    testing::TempDir dir;
    TrajectoryLog log(dir / "run.jsonl", true);
    RunConfig cfg;
    auto summary = run_episodes(dataset(), policy, cfg, env, log);
    CHECK(summary.episodes == 40);
    CHECK(summary.count(EpisodeStatus::Answered) == 40);
    auto recs = read_log(dir / "run.jsonl").records;
    REQUIRE(recs.size() == 40);
    for (std::size_t j = 0; j < recs.size(); ++j) {
        CHECK(recs[j].instance_id == dataset()[j / 8].id);
        CHECK(recs[j].rollout_index == static_cast<int>(j % 8));
        CHECK(recs[j].episode_id == recs[j].instance_id + "#" + std::to_string(j % 8));
    }
    std::vector<std::string> ids;
    for (const auto& t : dataset()) ids.push_back(t.id);
    auto groups = collect_groups(recs, ids, 8);
    CHECK(groups.size() == 5);
    CHECK(groups[0].advantages->size() == 8);
    CHECK_THROWS_AS(collect_groups(recs, ids, 9), Error);
}

TEST_CASE("policy failure aborts only that episode") {
    ThrowingPolicy policy;
    testing::FakeRouter router(testing::fixture_registry(), [](const ToolRequest&) { return testing::ok_response("x"); });
    Environment env(router);
    testing::TempDir dir;
    TrajectoryLog log(dir / "run.jsonl", true);
    RunConfig cfg;
    cfg.group_size = 2;
    auto summary = run_episodes(dataset(), policy, cfg, env, log);
    CHECK(summary.count(EpisodeStatus::Aborted) == 10);
    auto recs = read_log(dir / "run.jsonl").records;
    CHECK(recs.size() == 10);
    CHECK(recs[0].abort_reason.has_value());
}

TEST_CASE("endpoint failure aborts when asked") {
    auto policy = ScriptedPolicy::load(testing::fixture("policy.jsonl"));
    testing::FakeRouter router(testing::fixture_registry(), [](const ToolRequest&) {
        return ToolResponse{"", ResponseStatus::Unreachable, "refused", 1, 2};
    });
    Environment env(router);
    testing::TempDir dir;
    TrajectoryLog log(dir / "run.jsonl", true);
    RunConfig cfg;
    cfg.group_size = 2;
    cfg.abort_on_env_error = true;
    auto summary = run_episodes(dataset(), policy, cfg, env, log);
    CHECK(summary.count(EpisodeStatus::Aborted) == 10);
    CHECK(summary.env_errors == 10);

    TrajectoryLog log2(dir / "run2.jsonl", true);
    cfg.abort_on_env_error = false;
    summary = run_episodes(dataset(), policy, cfg, env, log2);
    CHECK(summary.count(EpisodeStatus::Aborted) == 0);
}

TEST_CASE("config validation") {
    RunConfig cfg;
    cfg.concurrency = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
