#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"
#include "toolgym/reward.hpp"

using namespace toolgym;

namespace {

Trajectory make(std::vector<std::string> raws, bool reached) {
    Trajectory t;
    for (std::size_t i = 0; i < raws.size(); ++i) t.turns.push_back(parse_turn(raws[i], true, i));
    t.reached_answer = reached;
    return t;
}

const AnswerRule kNumeric{AnswerKind::Numeric, 0.0, {}};

}  // namespace

TEST_CASE("repetition severity thresholds") {
    CHECK(detect_repetition(testing::repeated_think(25)).severity == RepetitionSeverity::Extreme);
    CHECK(detect_repetition(testing::repeated_think(12)).severity == RepetitionSeverity::Severe);
    CHECK(detect_repetition(testing::repeated_think(6)).severity == RepetitionSeverity::Moderate);
    CHECK(detect_repetition(testing::repeated_think(4)).severity == RepetitionSeverity::None);
    CHECK(detect_repetition("The answer is 34 because the bar reaches 34.").severity == RepetitionSeverity::None);
    CHECK(detect_repetition(std::string(250, 'a')).severity == RepetitionSeverity::Extreme);
    CHECK(detect_repetition(testing::repeated_think(6)).r_rep == -1.5);
    CHECK(repetition_penalty(RepetitionSeverity::Severe) == -2.0);
}

TEST_CASE("repetition config must be ordered") {
    RepetitionConfig cfg;
    cfg.severe_repeats = 4;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("answer matching") {
    AnswerRule text;
    CHECK(check_answer("34", "34", text) == 1);
    CHECK(check_answer("15°", "15", text) == 1);
    CHECK(check_answer("$15^\\circ$", "15", text) == 1);
    CHECK(check_answer("\\boxed{Monthly  Revenue}.", "monthly revenue", text) == 1);
    CHECK(check_answer("35", "34", text) == 0);

    CHECK(check_answer("20.4", "34", kNumeric) == 0);
    CHECK(check_answer("58^\\circ", "58", kNumeric) == 1);
    CHECK(check_answer("58.0", "58", kNumeric) == 1);
    AnswerRule tol{AnswerKind::Numeric, 0.05, {}};
    CHECK(check_answer("3.16", "3.14", tol) == 1);
    CHECK(check_answer("3.2", "3.14", tol) == 0);

    AnswerRule mc{AnswerKind::MultipleChoiceLetter, 0.0, {"2019", "2020", "2021"}};
    CHECK(check_answer("(B) 2020", "B", mc) == 1);
    CHECK(check_answer("b", "B", mc) == 1);
    CHECK(check_answer("2020", "B", mc) == 1);
    CHECK(check_answer("C", "B", mc) == 0);
}

TEST_CASE("format reward") {
    auto good = make({testing::call_turn("gllava", "solve", {}), testing::call_turn("gllava", "solve", {}),
                      testing::answer_turn("58")},
                     true);
    CHECK(format_reward(good.turns, true) == 1.0);
    auto wrong_order = make({"<tool_call>{\"tool\":\"a\",\"task\":\"b\"}</tool_call><think>x</think>",
                             testing::answer_turn("58")},
                            true);
    CHECK(format_reward(wrong_order.turns, true) == -1.0);
    auto truncated = make({testing::call_turn("a", "b", {}), testing::call_turn("a", "b", {}),
                           testing::call_turn("a", "b", {})},
                          false);
    CHECK(format_reward(truncated.turns, false) == -1.0);
}

TEST_CASE("truth table matches the hierarchy oracle") {
    const int repeats[] = {0, 6, 12, 25};
    for (int sev = 0; sev < 4; ++sev) {
        for (bool format_ok : {true, false}) {
            for (bool correct : {true, false}) {
                const std::string think = sev == 0 ? "Look at the figure." : testing::repeated_think(repeats[sev]);
                const std::string ans = correct ? "58" : "61";
                std::string last = format_ok ? testing::answer_turn(ans, think) : "<answer>" + ans + "</answer>";
                auto traj = make({testing::call_turn("gllava", "solve", {}), last}, true);
                if (!format_ok && sev != 0) traj.turns[0] = parse_turn(testing::call_turn("g", "s", {}, think), true);
                auto r = score_trajectory(traj, "58", kNumeric);
                CHECK_MESSAGE(r.total == oracle::hierarchy_total(sev, format_ok, correct),
                              "sev=" << sev << " format=" << format_ok << " correct=" << correct);
                CHECK(r.answer_match == (correct ? 1 : 0));
            }
        }
    }
}

TEST_CASE("correctness is gated on format") {
    auto a = make({"<answer>58</answer>"}, true);
    auto b = make({"<answer>61</answer>"}, true);
    CHECK(score_trajectory(a, "58", kNumeric).total == score_trajectory(b, "58", kNumeric).total);
}

TEST_CASE("variant formulas") {
    CHECK(variant_dense(1, 1) == 1.0);
    CHECK(variant_dense(1, 0) == -0.5);
    CHECK(variant_dense(-1, 0) == -1.5);
    CHECK(variant_dense(-1, 1) == -2.0);
    CHECK(variant_sparse(1, 1) == 1.0);
    CHECK(variant_sparse(-1, 1) == -1.0);
    CHECK(variant_dense(-1, 1, IndicatorConvention::Binary) == -0.5);
    CHECK(variant_sparse(-1, 1, IndicatorConvention::Binary) == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 200; ++i) {
        double f = rng() % 2 ? 1.0 : -1.0;
        double c = u(rng);
        CHECK(std::abs(variant_dense(f, c) - oracle::dense(f, c)) <= 1e-12);
        CHECK(std::abs(variant_sparse(f, c) - oracle::sparse(f, c)) <= 1e-12);
    }
}

TEST_CASE("difficulty weight endpoints") {
    std::vector<double> d2{2, 2, 2, 2}, d1{1, 1, 1, 1}, d0{0, 0}, dm1{-1, -1, -1};
    CHECK(difficulty_weight(d2) == 0.5);
    CHECK(difficulty_weight(d1) == 1.0);
    CHECK(difficulty_weight(d0) == 1.0);
    CHECK(difficulty_weight(dm1) == 1.0);
    CHECK(variant_difficulty(d2) == std::vector<double>{1, 1, 1, 1});
    std::vector<double> mixed{2, 1};
    CHECK(difficulty_weight(mixed) == 0.75);
    CHECK_THROWS_AS(difficulty_weight(std::vector<double>{}), Error);
}

TEST_CASE("breakdown json round trip") {
    auto traj = make({testing::call_turn("gllava", "solve", {}), testing::answer_turn("58")}, true);
    auto r = score_trajectory(traj, "58", kNumeric);
    CHECK(reward_from_json(to_json(r)) == r);
    AnswerRule mc{AnswerKind::MultipleChoiceLetter, 0.0, {"a", "b"}};
    CHECK(answer_rule_from_json(to_json(mc)) == mc);
}
