#include "toolgym/reports.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace toolgym {

std::string_view to_string(RewardVariant variant) {
    switch (variant) {
        case RewardVariant::Paper: return "paper";
        case RewardVariant::Dense: return "dense";
        case RewardVariant::Sparse: return "sparse";
        case RewardVariant::Difficulty: return "difficulty";
    }
    return "paper";
}

std::optional<RewardVariant> reward_variant_from_string(std::string_view name) {
    for (auto v : {RewardVariant::Paper, RewardVariant::Dense, RewardVariant::Sparse, RewardVariant::Difficulty}) {
        if (to_string(v) == name) return v;
    }
    return std::nullopt;
}

std::vector<nlohmann::json> ScoreReport::to_records() const {
    std::vector<nlohmann::json> out;
    for (const auto& row : rows) {
        out.push_back({{"record", "score"},
                       {"episode_id", row.episode_id},
                       {"instance_id", row.instance_id},
                       {"logged_total", row.logged_total},
                       {"value", row.value}});
    }
    nlohmann::json dist = nlohmann::json::array();
    for (const auto& [value, n] : distribution) dist.push_back({{"value", value}, {"count", n}});
    out.push_back({{"record", "score_summary"},
                   {"variant", to_string(variant)},
                   {"trajectories", rows.size()},
                   {"mean", mean},
                   {"mismatches", mismatches},
                   {"distribution", dist}});
    return out;
}

ScoreReport score_records(std::span<const TrajectoryRecord> records, RewardVariant variant,
                          IndicatorConvention convention, const RepetitionConfig& repetition) {
    ScoreReport report;
    report.variant = variant;
    std::vector<RewardBreakdown> recomputed;
    recomputed.reserve(records.size());
    for (const auto& r : records) {
        auto b = score_trajectory(r.to_trajectory(), r.ground_truth, r.answer_rule, repetition);
        if (b.total != r.reward.total) ++report.mismatches;
        recomputed.push_back(b);
        report.rows.push_back({r.episode_id, r.instance_id, r.reward.total, b.total});
    }

    switch (variant) {
        case RewardVariant::Paper: break;
        case RewardVariant::Dense:
        case RewardVariant::Sparse:
            for (std::size_t i = 0; i < records.size(); ++i) {
                const auto& b = recomputed[i];
                if (b.rep_severity != RepetitionSeverity::None) continue;
                report.rows[i].value = variant == RewardVariant::Dense
                                           ? variant_dense(b.r_format, b.answer_match, convention)
                                           : variant_sparse(b.r_format, b.answer_match, convention);
            }
            break;
        case RewardVariant::Difficulty: {
            std::map<std::string, std::vector<std::size_t>> by_instance;
            for (std::size_t i = 0; i < records.size(); ++i) by_instance[records[i].instance_id].push_back(i);
            for (const auto& [id, idx] : by_instance) {
                std::vector<double> base;
                for (auto i : idx) base.push_back(recomputed[i].total);
                auto scaled = variant_difficulty(base);
                for (std::size_t k = 0; k < idx.size(); ++k) report.rows[idx[k]].value = scaled[k];
            }
            break;
        }
    }

    double sum = 0.0;
    for (const auto& row : report.rows) {
        sum += row.value;
        ++report.distribution[row.value];
    }
    if (!report.rows.empty()) report.mean = sum / static_cast<double>(report.rows.size());
    return report;
}

std::vector<nlohmann::json> AdvantageReport::to_records() const {
    std::vector<nlohmann::json> out;
    for (const auto& g : groups) {
        nlohmann::json j{{"record", "advantages"},
                         {"instance_id", g.instance_id},
                         {"episode_ids", g.episode_ids},
                         {"rewards", g.rewards},
                         {"advantages", g.advantages.value_or(std::vector<double>{})}};
        if (auto it = objectives.find(g.instance_id); it != objectives.end()) j["objective"] = it->second;
        out.push_back(std::move(j));
    }
    return out;
}

std::map<std::string, TokenBatch> load_token_batches(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("token batches: cannot open " + path.string());
    std::map<std::string, TokenBatch> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            TokenBatch b;
            b.logp_new = j.at("logp_new").get<std::vector<double>>();
            b.logp_old = j.at("logp_old").get<std::vector<double>>();
            b.loss_mask = j.at("loss_mask").get<std::vector<int>>();
            b.validate();
            out[j.at("episode_id").get<std::string>()] = std::move(b);
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("token batches: ") + e.what());
        }
    }
    return out;
}

AdvantageReport advantage_report(std::span<const TrajectoryRecord> records, int group_size,
                                 const std::map<std::string, TokenBatch>& batches, const ObjectiveOptions& options) {
    std::vector<std::string> ids;
    std::map<std::string, int> counts;
    for (const auto& r : records) {
        if (counts[r.instance_id]++ == 0) ids.push_back(r.instance_id);
    }
    AdvantageReport report;
    for (const auto& id : ids) {
        const std::string one[] = {id};
        auto groups = collect_groups(records, one, group_size > 0 ? group_size : counts[id]);
        report.groups.push_back(std::move(groups.front()));
    }
    if (batches.empty()) return report;
    for (const auto& g : report.groups) {
        std::vector<TokenBatch> group_batches;
        for (const auto& eid : g.episode_ids) {
            auto it = batches.find(eid);
            if (it == batches.end()) break;
            group_batches.push_back(it->second);
        }
        if (group_batches.size() == g.size()) report.objectives[g.instance_id] = grpo_objective(g, group_batches, options);
    }
    return report;
}

std::vector<nlohmann::json> TaxonomyReport::to_records() const {
    std::vector<nlohmann::json> out;
    out.push_back({{"record", "taxonomy_summary"}, {"cases", cases}, {"error_cases", error_cases}});
    for (const auto& row : rows) {
        out.push_back({{"record", "taxonomy"}, {"code", to_string(row.code)}, {"cases", row.cases},
                       {"percent", row.percent}});
    }
    return out;
}

std::vector<TaxonomyCode> trajectory_labels(const TrajectoryRecord& record, const Registry* registry) {
    std::set<TaxonomyCode> labels;
    std::size_t obs_index = 1;
    const bool final_correct = record.status == EpisodeStatus::Answered && record.reward.answer_match == 1;
    for (const auto& turn : record.turns) {
        if (turn.action_kind == ActionKind::Answer) continue;
        OutcomeContext ctx;
        if (obs_index < record.observations.size()) {
            ctx.observation = record.observations[obs_index++];
        } else {
            ctx.observation = Observation{ObservationKind::EnvError, "", std::nullopt, 0};
        }
        ctx.final_correct = final_correct;
        ctx.schema_error = turn.schema_error;

        TaxonomyCode static_code = turn.taxonomy.value_or(TaxonomyCode::E1);
        OutputKind output_kind = OutputKind::Text;
        if (registry && turn.tool && turn.task) {
            ToolCall call{*turn.tool, *turn.task, turn.arguments.value_or(nlohmann::json::object()), record.episode_id,
                          0};
            static_code = validate_call(call, *registry).code;
            if (const auto* spec = registry->find(*turn.tool)) output_kind = spec->output_kind;
        }
        for (auto code : outcome_labels(static_code, ctx, output_kind)) labels.insert(code);
    }
    return {labels.begin(), labels.end()};
}

TaxonomyReport taxonomy_report(std::span<const TrajectoryRecord> records, const Registry* registry) {
    TaxonomyReport report;
    std::map<TaxonomyCode, std::size_t> counts;
    for (const auto& r : records) {
        const bool has_call = std::any_of(r.turns.begin(), r.turns.end(),
                                          [](const TurnRecord& t) { return t.action_kind != ActionKind::Answer; });
        if (!has_call) continue;
        ++report.cases;
        auto labels = trajectory_labels(r, registry);
        if (labels.empty()) continue;
        ++report.error_cases;
        for (auto code : labels) ++counts[code];
    }
    for (auto code : {TaxonomyCode::E1, TaxonomyCode::E2, TaxonomyCode::E3, TaxonomyCode::E4, TaxonomyCode::E5,
                      TaxonomyCode::E6}) {
        TaxonomyRow row{code, counts[code], 0.0};
        if (report.error_cases > 0) {
            row.percent = 100.0 * static_cast<double>(row.cases) / static_cast<double>(report.error_cases);
        }
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace toolgym
