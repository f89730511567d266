#include "toolgym/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <regex>

namespace toolgym {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t b = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (b < i) out.push_back(text.substr(b, i - b));
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

void erase_all(std::string& s, std::string_view needle) {
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos)) {
        s.erase(pos, needle.size());
    }
}

// Strips one enclosing \boxed{...} when it spans the whole string.
bool strip_boxed(std::string& s) {
    constexpr std::string_view prefix = "\\boxed{";
    if (s.rfind(prefix, 0) != 0 || s.empty() || s.back() != '}') return false;
    int depth = 0;
    for (std::size_t i = prefix.size() - 1; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        if (s[i] == '}' && --depth == 0 && i != s.size() - 1) return false;
    }
    s = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    return true;
}

// Answer text with markup removed but case and spacing kept; shared by the
// exact and numeric rules.
std::string strip_markup(std::string_view text) {
    std::string s = trim(text);
    for (auto degree : {"^{\\circ}", "^\\circ", "\\circ", "\\degree", "\xC2\xB0", "\xC2\xBA"}) {
        erase_all(s, degree);
    }
    erase_all(s, "$");
    for (bool changed = true; changed;) {
        changed = false;
        s = trim(s);
        if (strip_boxed(s)) changed = true;
        while (!s.empty() && s.back() == '.') {
            s.pop_back();
            changed = true;
        }
    }
    return trim(s);
}

std::optional<double> parse_real(const std::string& s, bool& is_integer) {
    if (s.empty()) return std::nullopt;
    std::string cleaned;
    for (char c : s) {
        if (c != ',') cleaned.push_back(c);
    }
    const char* begin = cleaned.c_str();
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(value)) return std::nullopt;
    is_integer = cleaned.find_first_of(".eE") == std::string::npos;
    return value;
}

std::optional<char> leading_letter(std::string_view text) {
    static const std::regex pattern(R"(^\s*\(?([A-Ea-e])\)?(?=$|[\s:.)\],]))");
    std::string s(text);
    std::smatch m;
    if (!std::regex_search(s, m, pattern)) return std::nullopt;
    return static_cast<char>(std::toupper(static_cast<unsigned char>(m[1].str()[0])));
}

std::optional<char> choice_letter(std::string_view text, const std::vector<std::string>& choices) {
    if (auto letter = leading_letter(text)) return letter;
    const std::string needle = normalize_answer(text);
    for (std::size_t i = 0; i < choices.size() && i < 5; ++i) {
        if (!needle.empty() && normalize_answer(choices[i]) == needle) return static_cast<char>('A' + i);
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(RepetitionSeverity severity) {
    switch (severity) {
        case RepetitionSeverity::None: return "None";
        case RepetitionSeverity::Moderate: return "Moderate";
        case RepetitionSeverity::Severe: return "Severe";
        case RepetitionSeverity::Extreme: return "Extreme";
    }
    return "None";
}

std::optional<RepetitionSeverity> severity_from_string(std::string_view name) {
    for (auto s : {RepetitionSeverity::None, RepetitionSeverity::Moderate, RepetitionSeverity::Severe,
                   RepetitionSeverity::Extreme}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

double repetition_penalty(RepetitionSeverity severity) {
    switch (severity) {
        case RepetitionSeverity::Extreme: return -3.0;
        case RepetitionSeverity::Severe: return -2.0;
        case RepetitionSeverity::Moderate: return -1.5;
        case RepetitionSeverity::None: return 0.0;
    }
    return 0.0;
}

void RepetitionConfig::validate() const {
    if (ngram_min < 1 || ngram_max < ngram_min) throw Error("repetition config: invalid n-gram range");
    if (moderate_repeats < 1 || char_run_extreme < 1) throw Error("repetition config: thresholds must be positive");
    if (!(extreme_repeats > severe_repeats && severe_repeats > moderate_repeats)) {
        throw Error("repetition config: thresholds must satisfy extreme > severe > moderate");
    }
}

RepetitionResult detect_repetition(std::string_view text, const RepetitionConfig& cfg) {
    cfg.validate();
    RepetitionResult result;

    // Longest run of one repeated non-space byte.
    int run = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_space(text[i])) {
            run = 0;
            continue;
        }
        run = (i > 0 && text[i] == text[i - 1]) ? run + 1 : 1;
        result.max_char_run = std::max(result.max_char_run, run);
    }

    // An n-gram repeated k times back to back gives (k-1)*n consecutive
    // positions p with tok[p] == tok[p+n].
    const auto tokens = whitespace_tokens(text);
    const auto count = static_cast<int>(tokens.size());
    for (int n = cfg.ngram_min; n <= cfg.ngram_max && n < count; ++n) {
        int matches = 0;
        for (int p = 0; p + n < count; ++p) {
            matches = tokens[p] == tokens[p + n] ? matches + 1 : 0;
            result.max_repeats = std::max(result.max_repeats, matches / n + 1);
        }
    }
    if (count > 0) result.max_repeats = std::max(result.max_repeats, 1);

    if (result.max_char_run >= cfg.char_run_extreme || result.max_repeats >= cfg.extreme_repeats) {
        result.severity = RepetitionSeverity::Extreme;
    } else if (result.max_repeats >= cfg.severe_repeats) {
        result.severity = RepetitionSeverity::Severe;
    } else if (result.max_repeats >= cfg.moderate_repeats) {
        result.severity = RepetitionSeverity::Moderate;
    }
    result.r_rep = repetition_penalty(result.severity);
    return result;
}

std::string_view to_string(AnswerKind kind) {
    switch (kind) {
        case AnswerKind::ExactText: return "ExactText";
        case AnswerKind::MultipleChoiceLetter: return "MultipleChoiceLetter";
        case AnswerKind::Numeric: return "Numeric";
    }
    return "ExactText";
}

std::optional<AnswerKind> answer_kind_from_string(std::string_view name) {
    for (auto k : {AnswerKind::ExactText, AnswerKind::MultipleChoiceLetter, AnswerKind::Numeric}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

void AnswerRule::validate() const {
    if (tolerance < 0.0 || !std::isfinite(tolerance)) throw Error("answer rule: tolerance must be non-negative");
    if (kind != AnswerKind::Numeric && tolerance != 0.0) {
        throw Error("answer rule: tolerance is only valid for Numeric");
    }
    if (kind != AnswerKind::MultipleChoiceLetter && !choices.empty()) {
        throw Error("answer rule: choices are only valid for MultipleChoiceLetter");
    }
}

nlohmann::json to_json(const AnswerRule& rule) {
    nlohmann::json j{{"kind", to_string(rule.kind)}};
    if (rule.kind == AnswerKind::Numeric) j["tolerance"] = rule.tolerance;
    if (!rule.choices.empty()) j["choices"] = rule.choices;
    return j;
}

AnswerRule answer_rule_from_json(const nlohmann::json& j) {
    AnswerRule rule;
    if (j.is_null()) return rule;
    if (j.is_string()) {
        auto kind = answer_kind_from_string(j.get<std::string>());
        if (!kind) throw Error("answer rule: unknown kind " + j.get<std::string>());
        rule.kind = *kind;
        return rule;
    }
    if (!j.is_object()) throw Error("answer rule: expected object or string");
    auto kind = answer_kind_from_string(j.value("kind", std::string("ExactText")));
    if (!kind) throw Error("answer rule: unknown kind");
    rule.kind = *kind;
    rule.tolerance = j.value("tolerance", 0.0);
    if (j.contains("choices")) rule.choices = j.at("choices").get<std::vector<std::string>>();
    rule.validate();
    return rule;
}

std::string normalize_answer(std::string_view text) {
    std::string s = strip_markup(text);
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

int check_answer(std::string_view predicted, std::string_view ground_truth, const AnswerRule& rule) {
    switch (rule.kind) {
        case AnswerKind::ExactText: {
            auto a = normalize_answer(predicted);
            return !a.empty() && a == normalize_answer(ground_truth) ? 1 : 0;
        }
        case AnswerKind::MultipleChoiceLetter: {
            auto a = choice_letter(predicted, rule.choices);
            auto b = choice_letter(ground_truth, rule.choices);
            return a && b && *a == *b ? 1 : 0;
        }
        case AnswerKind::Numeric: {
            bool a_int = false;
            bool b_int = false;
            auto a = parse_real(strip_markup(predicted), a_int);
            auto b = parse_real(strip_markup(ground_truth), b_int);
            if (!a || !b) return 0;
            const double diff = std::fabs(*a - *b);
            if (rule.tolerance > 0.0) return diff <= rule.tolerance ? 1 : 0;
            if (a_int && b_int) return *a == *b ? 1 : 0;
            return diff <= 1e-6 * std::max(std::fabs(*a), std::fabs(*b)) ? 1 : 0;
        }
    }
    return 0;
}

double format_reward(std::span<const Turn> turns, bool reached_answer) {
    if (!reached_answer || turns.empty()) return -1.0;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const Turn& t = turns[i];
        if (!t.well_formed()) return -1.0;
        const bool last = i + 1 == turns.size();
        if (last && t.action_kind != ActionKind::Answer) return -1.0;
        if (!last && t.action_kind != ActionKind::ToolCall) return -1.0;
    }
    return 1.0;
}

nlohmann::json to_json(const RewardBreakdown& r) {
    return {{"r_rep", r.r_rep},         {"rep_severity", to_string(r.rep_severity)},
            {"r_format", r.r_format},   {"r_correct", r.r_correct},
            {"total", r.total},         {"answer_match", r.answer_match}};
}

RewardBreakdown reward_from_json(const nlohmann::json& j) {
    RewardBreakdown r;
    r.r_rep = j.at("r_rep").get<double>();
    auto sev = severity_from_string(j.at("rep_severity").get<std::string>());
    if (!sev) throw Error("reward: unknown severity");
    r.rep_severity = *sev;
    r.r_format = j.at("r_format").get<double>();
    r.r_correct = j.at("r_correct").get<double>();
    r.total = j.at("total").get<double>();
    r.answer_match = j.value("answer_match", 0);
    return r;
}

RewardBreakdown score_trajectory(const Trajectory& traj, std::string_view ground_truth,
                                 const AnswerRule& rule, const RepetitionConfig& cfg) {
    RewardBreakdown r;
    auto rep = detect_repetition(traj.policy_text(), cfg);
    r.rep_severity = rep.severity;
    r.r_rep = rep.r_rep;
    if (auto answer = traj.final_answer()) r.answer_match = check_answer(*answer, ground_truth, rule);

    if (rep.severity != RepetitionSeverity::None) {
        r.total = r.r_rep;
        return r;
    }
    r.r_format = format_reward(traj.turns, traj.reached_answer);
    r.r_correct = r.r_format > 0.0 ? r.answer_match : 0.0;
    r.total = r.r_format + r.r_correct;
    return r;
}

namespace {
double convert_format(double r_format, IndicatorConvention convention) {
    return convention == IndicatorConvention::Binary ? (r_format > 0.0 ? 1.0 : 0.0) : r_format;
}
}  // namespace

double variant_dense(double r_format, double r_correct, IndicatorConvention convention) {
    const double f = convert_format(r_format, convention);
    return -1.0 + 0.5 * f + 0.5 * r_correct + f * r_correct;
}

double variant_sparse(double r_format, double r_correct, IndicatorConvention convention) {
    return convert_format(r_format, convention) * r_correct;
}

double difficulty_weight(std::span<const double> base_rewards) {
    if (base_rewards.empty()) throw Error("difficulty variant: empty group");
    const double mean =
        std::accumulate(base_rewards.begin(), base_rewards.end(), 0.0) / static_cast<double>(base_rewards.size());
    return std::clamp(2.0 - mean, 0.0, 1.0) * 0.5 + 0.5;
}

std::vector<double> variant_difficulty(std::span<const double> base_rewards) {
    const double w = difficulty_weight(base_rewards);
    std::vector<double> out;
    out.reserve(base_rewards.size());
    for (double r : base_rewards) out.push_back(r * w);
    return out;
}

}  // namespace toolgym
