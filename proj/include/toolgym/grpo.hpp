// Group-relative policy optimization math: group-normalized advantages,
// per-token importance ratios and the clipped surrogate objective.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toolgym/env.hpp"
#include "toolgym/trajectory.hpp"

namespace toolgym {

struct RolloutGroup {
    std::string instance_id;
    std::vector<double> rewards;
    std::optional<std::vector<double>> advantages;
    // Episode ids in the same order as rewards.
    std::vector<std::string> episode_ids;

    std::size_t size() const { return rewards.size(); }
};

/// Per-rollout token log-probabilities. loss_mask is 1 for policy-generated
/// tokens and 0 for tool-output tokens.
struct TokenBatch {
    std::vector<double> logp_new;
    std::vector<double> logp_old;
    std::vector<int> loss_mask;

    std::size_t size() const { return logp_new.size(); }
    /// Throws Error on length mismatch, non-finite values or no masked tokens.
    void validate() const;
};

/// (R_i - mean) / std with population statistics. A group whose std is below
/// eps_std gets all-zero advantages. Throws Error for fewer than two rewards.
std::vector<double> compute_advantages(std::span<const double> rewards, double eps_std = 1e-8);

/// exp(logp_new - logp_old) for every token, masked or not.
std::vector<double> importance_ratios(const TokenBatch& batch);

enum class LengthNormalizer { MaskedTokens, AllTokens };

struct ObjectiveOptions {
    double epsilon = 0.2;
    LengthNormalizer normalizer = LengthNormalizer::MaskedTokens;
    // Optional KL penalty beta * KL(pi_new || pi_old); 0 disables it.
    double kl_beta = 0.0;
};

/// Per-token surrogate term min(r*A, clip(r, 1-eps, 1+eps)*A).
double clipped_term(double ratio, double advantage, double epsilon);

/// Mean over rollouts of the length-normalized sum of clipped terms over
/// loss-masked tokens. The value is to be maximized.
double grpo_objective(const RolloutGroup& group, std::span<const TokenBatch> batches,
                      const ObjectiveOptions& options);
double grpo_objective(const RolloutGroup& group, std::span<const TokenBatch> batches, double epsilon);

/// Per-token k3 estimate of KL(pi_new || pi_old), averaged over masked tokens
/// and rollouts.
double kl_estimate(std::span<const TokenBatch> batches, LengthNormalizer normalizer = LengthNormalizer::MaskedTokens);

struct FilterCandidate {
    Trajectory trajectory;
    TaskInstance instance;
};

/// Keeps, in order, the trajectories whose extracted answer matches the
/// instance's ground truth under its answer rule.
std::vector<Trajectory> outcome_filter(std::span<const FilterCandidate> candidates);

}  // namespace toolgym
