// Offline analyses over trajectory logs, shared by the CLI and tests.
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "toolgym/grpo.hpp"
#include "toolgym/rollout.hpp"
#include "toolgym/reward.hpp"
#include "toolgym/store.hpp"
#include "toolgym/toolspace.hpp"

namespace toolgym {

enum class RewardVariant { Paper, Dense, Sparse, Difficulty };
std::string_view to_string(RewardVariant variant);
std::optional<RewardVariant> reward_variant_from_string(std::string_view name);

struct ScoredTrajectory {
    std::string episode_id;
    std::string instance_id;
    double logged_total = 0.0;
    double value = 0.0;
};

struct ScoreReport {
    RewardVariant variant = RewardVariant::Paper;
    std::vector<ScoredTrajectory> rows;
    std::size_t mismatches = 0;  // recomputed default total != logged total
    double mean = 0.0;
    std::map<double, std::size_t> distribution;

    std::vector<nlohmann::json> to_records() const;
};

/// Re-parses every logged turn and re-scores it. Repetition penalties still
/// dominate under the dense and sparse variants; those formulas see the raw
/// answer match.
ScoreReport score_records(std::span<const TrajectoryRecord> records, RewardVariant variant,
                          IndicatorConvention convention = IndicatorConvention::Signed,
                          const RepetitionConfig& repetition = {});

struct AdvantageReport {
    std::vector<RolloutGroup> groups;
    // Objective per group, when token batches cover every rollout in it.
    std::map<std::string, double> objectives;

    std::vector<nlohmann::json> to_records() const;
};

/// Token batches keyed by episode id, one JSON record per line:
/// {"episode_id", "logp_new", "logp_old", "loss_mask"}.
std::map<std::string, TokenBatch> load_token_batches(const std::filesystem::path& path);

/// group_size 0 uses every record of each instance.
AdvantageReport advantage_report(std::span<const TrajectoryRecord> records, int group_size,
                                 const std::map<std::string, TokenBatch>& batches, const ObjectiveOptions& options);

struct TaxonomyRow {
    TaxonomyCode code;
    std::size_t cases = 0;
    double percent = 0.0;  // of error cases
};

struct TaxonomyReport {
    std::size_t cases = 0;        // trajectories with at least one tool-call turn
    std::size_t error_cases = 0;  // of those, trajectories with at least one label
    std::vector<TaxonomyRow> rows;  // E1..E6

    std::vector<nlohmann::json> to_records() const;
};

/// Labels for every tool-call turn of one trajectory (union over turns).
std::vector<TaxonomyCode> trajectory_labels(const TrajectoryRecord& record, const Registry* registry);

/// Percent of error cases carrying each label; rows may sum past 100.
TaxonomyReport taxonomy_report(std::span<const TrajectoryRecord> records, const Registry* registry = nullptr);

}  // namespace toolgym
