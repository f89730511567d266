#include "toolgym/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace toolgym {

void TokenBatch::validate() const {
    if (logp_old.size() != logp_new.size() || loss_mask.size() != logp_new.size()) {
        throw Error("token batch: logp_new, logp_old and loss_mask lengths differ");
    }
    for (std::size_t k = 0; k < logp_new.size(); ++k) {
        if (!std::isfinite(logp_new[k]) || !std::isfinite(logp_old[k])) {
            throw Error("token batch: non-finite log-probability at token " + std::to_string(k));
        }
        if (loss_mask[k] != 0 && loss_mask[k] != 1) throw Error("token batch: loss_mask must be 0 or 1");
    }
    if (std::count(loss_mask.begin(), loss_mask.end(), 1) == 0) throw Error("token batch: no policy tokens");
}

std::vector<double> compute_advantages(std::span<const double> rewards, double eps_std) {
    if (rewards.size() < 2) throw Error("advantages: group needs at least 2 rollouts");
    const double g = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / g;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double std_dev = std::sqrt(var / g);

    std::vector<double> out(rewards.size(), 0.0);
    if (std_dev < eps_std) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / std_dev;
    return out;
}

std::vector<double> importance_ratios(const TokenBatch& batch) {
    batch.validate();
    std::vector<double> out(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) out[k] = std::exp(batch.logp_new[k] - batch.logp_old[k]);
    return out;
}

double clipped_term(double ratio, double advantage, double epsilon) {
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

namespace {

double normalizer_count(const TokenBatch& batch, LengthNormalizer normalizer) {
    if (normalizer == LengthNormalizer::AllTokens) return static_cast<double>(batch.size());
    return static_cast<double>(std::count(batch.loss_mask.begin(), batch.loss_mask.end(), 1));
}

}  // namespace

double kl_estimate(std::span<const TokenBatch> batches, LengthNormalizer normalizer) {
    if (batches.empty()) throw Error("kl: no rollouts");
    double total = 0.0;
    for (const auto& batch : batches) {
        batch.validate();
        double sum = 0.0;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            if (!batch.loss_mask[k]) continue;
            const double log_ratio = batch.logp_old[k] - batch.logp_new[k];
            sum += std::exp(log_ratio) - log_ratio - 1.0;
        }
        total += sum / normalizer_count(batch, normalizer);
    }
    return total / static_cast<double>(batches.size());
}

double grpo_objective(const RolloutGroup& group, std::span<const TokenBatch> batches,
                      const ObjectiveOptions& options) {
    if (options.epsilon <= 0.0) throw Error("objective: epsilon must be positive");
    if (!group.advantages) throw Error("objective: group advantages not computed");
    const auto& adv = *group.advantages;
    if (adv.size() != group.size() || batches.size() != group.size()) {
        throw Error("objective: group size, advantages and token batches must agree");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        const auto ratios = importance_ratios(batches[i]);
        double sum = 0.0;
        for (std::size_t k = 0; k < ratios.size(); ++k) {
            if (batches[i].loss_mask[k]) sum += clipped_term(ratios[k], adv[i], options.epsilon);
        }
        total += sum / normalizer_count(batches[i], options.normalizer);
    }
    double objective = total / static_cast<double>(batches.size());
    if (options.kl_beta != 0.0) objective -= options.kl_beta * kl_estimate(batches, options.normalizer);
    return objective;
}

double grpo_objective(const RolloutGroup& group, std::span<const TokenBatch> batches, double epsilon) {
    ObjectiveOptions options;
    options.epsilon = epsilon;
    return grpo_objective(group, batches, options);
}

std::vector<Trajectory> outcome_filter(std::span<const FilterCandidate> candidates) {
    std::vector<Trajectory> kept;
    for (const auto& c : candidates) {
        auto answer = c.trajectory.final_answer();
        if (answer && check_answer(*answer, c.instance.ground_truth, c.instance.answer_rule) == 1) {
            kept.push_back(c.trajectory);
        }
    }
    return kept;
}

}  // namespace toolgym
