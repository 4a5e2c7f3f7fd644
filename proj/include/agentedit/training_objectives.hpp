#pragma once

#include "agentedit/error.hpp"

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace agentedit::objectives {

// Sequence log-likelihoods of the chosen (p+) and rejected (p-) plans under
// the trained policy and the frozen reference policy.
struct PlanLogProbs {
    double policy_chosen = 0.0;
    double policy_rejected = 0.0;
    double ref_chosen = 0.0;
    double ref_rejected = 0.0;

    void check() const
    {
        for (double v : {policy_chosen, policy_rejected, ref_chosen, ref_rejected}) {
            if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "log-probability is not finite");
            if (v > 0.0) fail(ErrorCode::NonFiniteInput, "log-probability must be <= 0");
        }
    }
};

struct DpoConfig {
    double beta = 0.1;

    void check() const
    {
        if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::InvalidConfig, "beta must be positive");
    }
};

// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept
{
    if (x > 30.0) return x + std::exp(-x);
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) noexcept
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double sft_nll(std::span<const double> token_logprobs)
{
    if (token_logprobs.empty()) fail(ErrorCode::EmptySequence, "target plan has no tokens");
    double sum = 0.0;
    for (double lp : token_logprobs) {
        if (!std::isfinite(lp)) fail(ErrorCode::NonFiniteInput, "token log-probability is not finite");
        sum += lp;
    }
    return -sum;
}

enum class Reduction {
    SequenceSum, // mean over sequences of per-sequence NLL
    TokenMean,   // total NLL divided by total token count
};

inline double sft_nll_batch(const std::vector<std::vector<double>>& batch, Reduction reduction = Reduction::SequenceSum)
{
    if (batch.empty()) fail(ErrorCode::EmptySequence, "empty batch");
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& seq : batch) {
        total += sft_nll(seq);
        tokens += seq.size();
    }
    return reduction == Reduction::SequenceSum ? total / static_cast<double>(batch.size())
                                               : total / static_cast<double>(tokens);
}

// beta * [(log pi(p+) - log ref(p+)) - (log pi(p-) - log ref(p-))]
inline double dpo_margin(const PlanLogProbs& lp, const DpoConfig& cfg)
{
    return cfg.beta * ((lp.policy_chosen - lp.ref_chosen) - (lp.policy_rejected - lp.ref_rejected));
}

// -log sigmoid(h) = softplus(-h)
inline double dpo_loss(const PlanLogProbs& lp, const DpoConfig& cfg = {})
{
    lp.check();
    cfg.check();
    return softplus(-dpo_margin(lp, cfg));
}

// d loss / d (policy_chosen, policy_rejected, ref_chosen, ref_rejected)
inline std::array<double, 4> dpo_gradient(const PlanLogProbs& lp, const DpoConfig& cfg = {})
{
    lp.check();
    cfg.check();
    const double g = cfg.beta * sigmoid(-dpo_margin(lp, cfg));
    return {-g, g, g, -g};
}

inline double dpo_loss_mean(const std::vector<PlanLogProbs>& pairs, const DpoConfig& cfg = {})
{
    if (pairs.empty()) fail(ErrorCode::EmptySequence, "no preference pairs");
    double total = 0.0;
    for (const auto& p : pairs) total += dpo_loss(p, cfg);
    return total / static_cast<double>(pairs.size());
}

} // namespace agentedit::objectives
