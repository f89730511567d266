// Hierarchical trajectory reward: repetition gate, then format, then
// correctness. Plus the dense / sparse / difficulty-adaptive variants.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "toolgym/trajectory.hpp"

namespace toolgym {

enum class RepetitionSeverity { None, Moderate, Severe, Extreme };
std::string_view to_string(RepetitionSeverity severity);
std::optional<RepetitionSeverity> severity_from_string(std::string_view name);

/// Penalty for a severity: Extreme -3.0, Severe -2.0, Moderate -1.5, None 0.
double repetition_penalty(RepetitionSeverity severity);

struct RepetitionConfig {
    int ngram_min = 1;
    int ngram_max = 10;
    int moderate_repeats = 5;
    int severe_repeats = 10;
    int extreme_repeats = 20;
    int char_run_extreme = 200;

    /// Throws Error unless the thresholds are positive and strictly ordered.
    void validate() const;
};

struct RepetitionResult {
    RepetitionSeverity severity = RepetitionSeverity::None;
    double r_rep = 0.0;
    int max_repeats = 0;  // longest contiguous n-gram repeat found
    int max_char_run = 0;
};

RepetitionResult detect_repetition(std::string_view text, const RepetitionConfig& cfg = {});

enum class AnswerKind { ExactText, MultipleChoiceLetter, Numeric };
std::string_view to_string(AnswerKind kind);
std::optional<AnswerKind> answer_kind_from_string(std::string_view name);

struct AnswerRule {
    AnswerKind kind = AnswerKind::ExactText;
    // Numeric only. 0 selects the default: exact for integers, 1e-6 relative otherwise.
    double tolerance = 0.0;
    std::vector<std::string> choices;  // MultipleChoiceLetter only

    void validate() const;
    bool operator==(const AnswerRule&) const = default;
};

nlohmann::json to_json(const AnswerRule& rule);
AnswerRule answer_rule_from_json(const nlohmann::json& j);

/// Normalization used by ExactText: trim, ASCII case-fold, collapse
/// whitespace, strip \boxed{...}, $...$, degree marks and trailing periods.
std::string normalize_answer(std::string_view text);

/// 1 iff predicted matches ground_truth under `rule`, else 0.
int check_answer(std::string_view predicted, std::string_view ground_truth, const AnswerRule& rule);

/// +1.0 iff every turn is well-formed, all but the last are tool-call turns,
/// the last is an answer turn, and the episode reached its answer; else -1.0.
double format_reward(std::span<const Turn> turns, bool reached_answer);

struct RewardBreakdown {
    double r_rep = 0.0;
    RepetitionSeverity rep_severity = RepetitionSeverity::None;
    double r_format = 0.0;   // 0 when gated off by repetition
    double r_correct = 0.0;  // credited only when repetition-free and well-formed
    double total = 0.0;
    // Raw answer match, before gating. Feeds the reward variants.
    int answer_match = 0;
    bool operator==(const RewardBreakdown&) const = default;
};

nlohmann::json to_json(const RewardBreakdown& r);
RewardBreakdown reward_from_json(const nlohmann::json& j);

RewardBreakdown score_trajectory(const Trajectory& traj, std::string_view ground_truth,
                                 const AnswerRule& rule, const RepetitionConfig& cfg = {});

/// How r_format enters the variant formulas: the published {-1,+1} values, or
/// a {0,1} indicator.
enum class IndicatorConvention { Signed, Binary };

double variant_dense(double r_format, double r_correct,
                     IndicatorConvention convention = IndicatorConvention::Signed);
double variant_sparse(double r_format, double r_correct,
                      IndicatorConvention convention = IndicatorConvention::Signed);

/// w = clamp(2 - D, 0, 1) * 0.5 + 0.5 where D is the mean of the group.
double difficulty_weight(std::span<const double> base_rewards);
std::vector<double> variant_difficulty(std::span<const double> base_rewards);

}  // namespace toolgym
