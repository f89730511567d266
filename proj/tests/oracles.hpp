// Independent reference implementations and generators. These restate the
// formulas directly and share no code with the library.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"

namespace oracle {

// ---- protocol ----

inline bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Whole-turn grammar as one regex. A body is any text that does not contain
// one of the six tags.
inline bool well_formed(const std::string& raw, bool is_final) {
    static const std::string body = R"(((?:(?!</?(?:think|tool_call|answer)>)[\s\S])*))";
    static const std::regex turn(R"(^\s*<think>)" + body + R"(</think>\s*(?:<tool_call>)" + body +
                                 R"(</tool_call>|<answer>)" + body + R"(</answer>)\s*$)");
    std::smatch m;
    if (!std::regex_match(raw, m, turn)) return false;
    if (blank(m[1].str())) return false;
    if (m[3].matched) {
        if (!is_final) return false;
        if (blank(m[3].str())) return false;
    }
    return true;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool allow_blank = false) {
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:!?()[]{}+-*/=^_'\"\\\n\t<>";
    std::uniform_int_distribution<std::size_t> len(allow_blank ? 0 : 1, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (;;) {
        std::string s;
        const std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) s += alphabet[pick(rng)];
        // avoid accidentally spelling a tag
        static const std::regex tag("</?(think|tool_call|answer)>");
        if (std::regex_search(s, tag)) continue;
        if (!allow_blank && blank(s)) continue;
        return s;
    }
}

inline nlohmann::json random_arguments(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n(0, 4);
    std::uniform_int_distribution<int> kind(0, 3);
    nlohmann::json args = nlohmann::json::object();
    const int count = n(rng);
    for (int i = 0; i < count; ++i) {
        const std::string key = "k" + std::to_string(i);
        switch (kind(rng)) {
            case 0: args[key] = random_text(rng, 12); break;
            case 1: args[key] = static_cast<int>(rng() % 1000); break;
            case 2: args[key] = nlohmann::json::array({1, "two", 3.5}); break;
            default: args[key] = nlohmann::json{{"nested", true}}; break;
        }
    }
    return args;
}

// Canonical well-formed turn: no whitespace between segments.
inline std::string random_turn(std::mt19937_64& rng, bool answer) {
    std::string out = "<think>" + random_text(rng, 60) + "</think>";
    if (answer) return out + "<answer>" + random_text(rng, 20) + "</answer>";
    nlohmann::json doc{{"tool", "t" + std::to_string(rng() % 30)}, {"task", "task" + std::to_string(rng() % 5)}};
    if (rng() % 4 != 0) doc["arguments"] = random_arguments(rng);
    return out + "<tool_call>" + doc.dump() + "</tool_call>";
}

// Byte strings built from grammar fragments, partial tags, JSON bits and raw
// bytes, plus mutations of valid turns.
inline std::string fuzz_bytes(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {
        "<think>", "</think>", "<tool_call>", "</tool_call>", "<answer>", "</answer>", "<think", "</", "<", ">",
        " ", "\n", "\t", "x", "reason", "42", "{\"tool\":\"gllava\",\"task\":\"solve\"}", "{", "}", "\"", "<answer",
        "tool_call>", "\xff", std::string(1, '\0'), "\xc3\xa9"};
    std::string s;
    if (rng() % 3 == 0) {
        s = random_turn(rng, rng() % 2 == 0);
        const int edits = 1 + static_cast<int>(rng() % 3);
        for (int e = 0; e < edits && !s.empty(); ++e) {
            const std::size_t pos = rng() % s.size();
            switch (rng() % 3) {
                case 0: s.erase(pos, 1 + rng() % 8); break;
                case 1: s.insert(pos, pieces[rng() % pieces.size()]); break;
                default: s[pos] = static_cast<char>(rng() % 256); break;
            }
        }
        return s;
    }
    const int n = static_cast<int>(rng() % 16);
    for (int i = 0; i < n; ++i) {
        if (rng() % 5 == 0) {
            s += static_cast<char>(rng() % 256);
        } else {
            s += pieces[rng() % pieces.size()];
        }
    }
    return s;
}

// ---- reward ----

inline double repetition_value(int severity) {  // 0 none, 1 moderate, 2 severe, 3 extreme
    static const double values[] = {0.0, -1.5, -2.0, -3.0};
    return values[severity];
}

inline double hierarchy_total(int severity, bool format_ok, bool correct) {
    if (severity != 0) return repetition_value(severity);
    if (!format_ok) return -1.0;
    return correct ? 2.0 : 1.0;
}

inline double dense(double f, double c) { return -1.0 + 0.5 * f + 0.5 * c + f * c; }
inline double sparse(double f, double c) { return f * c; }

inline double difficulty_w(const std::vector<double>& r) {
    double d = 0.0;
    for (double x : r) d += x;
    d /= static_cast<double>(r.size());
    double c = 2.0 - d;
    if (c < 0.0) c = 0.0;
    if (c > 1.0) c = 1.0;
    return c * 0.5 + 0.5;
}

// ---- grpo ----

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double popstd(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

// One token of the surrogate, written out branch by branch.
inline double surrogate_token(double r, double a, double eps) {
    double clipped = r;
    if (r > 1.0 + eps) clipped = 1.0 + eps;
    if (r < 1.0 - eps) clipped = 1.0 - eps;
    const double unclipped_term = r * a;
    const double clipped_term = clipped * a;
    return unclipped_term < clipped_term ? unclipped_term : clipped_term;
}

struct Rollout {
    std::vector<double> logp_new, logp_old;
    std::vector<int> mask;
};

inline double objective(const std::vector<Rollout>& rollouts, const std::vector<double>& adv, double eps) {
    double total = 0.0;
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t k = 0; k < rollouts[i].mask.size(); ++k) {
            if (rollouts[i].mask[k] != 1) continue;
            ++n;
            sum += surrogate_token(std::exp(rollouts[i].logp_new[k] - rollouts[i].logp_old[k]), adv[i], eps);
        }
        total += sum / n;
    }
    return total / static_cast<double>(rollouts.size());
}

}  // namespace oracle
