#pragma once

// Randomized property suites for the numeric kernels and objectives. Shared
// by `kernels selftest` and the acceptance binary.

#include "agentedit/bench_harness.hpp"
#include "agentedit/conditioning_math.hpp"
#include "agentedit/training_objectives.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace agentedit::selftest {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

using Rng = std::mt19937_64;

inline kernels::Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> d(lo, hi);
    kernels::Vector v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

inline CheckResult run_check(const std::string& name, const std::function<std::string()>& body)
{
    try {
        auto err = body();
        return {name, err.empty(), err.empty() ? "ok" : err};
    } catch (const std::exception& e) {
        return {name, false, std::string("threw: ") + e.what()};
    }
}

// λ_img = 1 collapses three-pass guidance onto v_vneg + λ_txt (v_plus - v_vneg);
// the combination is linear in the stacked branch predictions.
inline std::vector<CheckResult> guidance_checks(std::uint64_t seed = 7, int instances = 1000)
{
    std::vector<CheckResult> out;
    out.push_back(run_check("guidance_img_scale_one_reduction", [&] {
        Rng rng(seed);
        std::uniform_real_distribution<double> lam(0.0, 4.0);
        std::uniform_int_distribution<int> dim(1, 64);
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            const auto n = static_cast<std::size_t>(dim(rng));
            kernels::GuidanceInputs g{random_vector(rng, n), random_vector(rng, n), random_vector(rng, n), lam(rng), 1.0};
            const auto v = kernels::guided_velocity(g);
            for (std::size_t k = 0; k < n; ++k) {
                const double expect = g.v_vneg[k] + g.lambda_txt * (g.v_plus[k] - g.v_vneg[k]);
                worst = std::max(worst, std::abs(v[k] - expect));
            }
        }
        return worst <= 1e-12 ? std::string() : "max error " + fmt(worst);
    }));
    out.push_back(run_check("guidance_linearity", [&] {
        Rng rng(seed + 1);
        std::uniform_real_distribution<double> lam(0.0, 4.0), coef(-2.0, 2.0);
        std::uniform_int_distribution<int> dim(1, 64);
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            const auto n = static_cast<std::size_t>(dim(rng));
            const double lt = lam(rng), li = lam(rng), a = coef(rng), b = coef(rng);
            kernels::GuidanceInputs x{random_vector(rng, n), random_vector(rng, n), random_vector(rng, n), lt, li};
            kernels::GuidanceInputs y{random_vector(rng, n), random_vector(rng, n), random_vector(rng, n), lt, li};
            kernels::GuidanceInputs mix{kernels::Vector(n), kernels::Vector(n), kernels::Vector(n), lt, li};
            for (std::size_t k = 0; k < n; ++k) {
                mix.v_plus[k] = a * x.v_plus[k] + b * y.v_plus[k];
                mix.v_vneg[k] = a * x.v_vneg[k] + b * y.v_vneg[k];
                mix.v_empty[k] = a * x.v_empty[k] + b * y.v_empty[k];
            }
            const auto gx = kernels::guided_velocity(x), gy = kernels::guided_velocity(y),
                       gm = kernels::guided_velocity(mix);
            for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(gm[k] - (a * gx[k] + b * gy[k])));
        }
        return worst <= 1e-12 ? std::string() : "max error " + fmt(worst);
    }));
    return out;
}

inline std::vector<CheckResult> preset_checks()
{
    std::vector<CheckResult> out;
    struct Expect {
        const char* id;
        double txt, img;
        bool tools;
        bench::OutputFramePolicy policy;
    };
    for (const Expect& e : {Expect{"agentedit", 2.0, 1.25, true, bench::OutputFramePolicy::SaveAll81},
                            Expect{"editverse", 1.5, 1.0, false, bench::OutputFramePolicy::KeepFirst64},
                            Expect{"openve", 2.0, 1.0, false, bench::OutputFramePolicy::TemporalResizeToSource}}) {
        out.push_back(run_check(std::string("preset_") + e.id, [&] {
            const auto p = bench::resolve_inference_preset(e.id);
            if (p.lambda_txt != e.txt || p.lambda_img != e.img) return std::string("guidance scales differ");
            if (p.tools_search_enabled != e.tools || p.tools_mask_enabled != e.tools) return std::string("tool toggles differ");
            if (p.output_frame_policy != e.policy) return std::string("frame policy differs");
            return std::string();
        }));
    }
    return out;
}

inline std::vector<CheckResult> kernel_checks(std::uint64_t seed = 11)
{
    std::vector<CheckResult> out;
    out.push_back(run_check("interpolation_endpoints", [&] {
        Rng rng(seed);
        for (int i = 0; i < 200; ++i) {
            const auto z0 = random_vector(rng, 1 + i % 50), z1 = random_vector(rng, 1 + i % 50);
            if (kernels::interpolate_latent(z0, z1, 0.0) != z0) return std::string("t=0 does not return z0");
            if (kernels::interpolate_latent(z0, z1, 1.0) != z1) return std::string("t=1 does not return z1");
        }
        return std::string();
    }));
    out.push_back(run_check("flow_matching_oracle", [&] {
        Rng rng(seed + 1);
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const std::size_t n = 1 + static_cast<std::size_t>(i % 97);
            const auto z0 = random_vector(rng, n), z1 = random_vector(rng, n), v = random_vector(rng, n, -3, 3);
            kernels::Vector target(n);
            for (std::size_t k = 0; k < n; ++k) target[k] = z1[k] - z0[k];
            if (kernels::flow_matching_loss(target, z0, z1) != 0.0) return std::string("nonzero at oracle velocity");
            long double brute = 0.0L;
            for (std::size_t k = 0; k < n; ++k) {
                const long double r = static_cast<long double>(v[k]) - (static_cast<long double>(z1[k]) - z0[k]);
                brute += r * r;
            }
            brute /= static_cast<long double>(n);
            worst = std::max(worst, std::abs(kernels::flow_matching_loss(v, z0, z1) - static_cast<double>(brute)));
        }
        return worst <= 1e-12 ? std::string() : "max error " + fmt(worst);
    }));
    out.push_back(run_check("token_sequence_invariants", [&] {
        Rng rng(seed + 2);
        std::uniform_int_distribution<int> count(0, 12), width(1, 16), nrefs(0, 5);
        auto block = [&](int tokens, std::size_t w) {
            kernels::TokenBlock b;
            for (int t = 0; t < tokens; ++t) b.tokens.push_back(random_vector(rng, w));
            return b;
        };
        for (int i = 0; i < 200; ++i) {
            const auto w = static_cast<std::size_t>(width(rng));
            const int n_noisy = count(rng), n_src = count(rng), k = nrefs(rng);
            auto noisy = block(n_noisy, w), source = block(n_src, w);
            std::vector<kernels::TokenBlock> refs;
            std::vector<kernels::Vector> emb;
            std::size_t expect_len = static_cast<std::size_t>(n_noisy + n_src);
            for (int r = 0; r < k; ++r) {
                refs.push_back(block(count(rng), w));
                emb.push_back(random_vector(rng, w));
                expect_len += refs.back().tokens.size();
            }
            const auto seq = kernels::assemble_token_sequence(noisy, source, refs, emb);
            if (seq.length() != expect_len || seq.flatten().size() != expect_len) return "length mismatch at instance " + std::to_string(i);
            for (std::size_t j = 0; j < seq.selectors.size(); ++j) {
                if (seq.selectors[j] != (j < static_cast<std::size_t>(n_noisy) ? 0 : 1)) return "selector pattern broken at instance " + std::to_string(i);
            }
            for (int r = 0; r < k; ++r) {
                const auto& got = seq.blocks[2 + r];
                if (got.ref_index != r + 1) return std::string("reference index wrong");
                for (std::size_t t = 0; t < got.tokens.size(); ++t) {
                    for (std::size_t d = 0; d < w; ++d) {
                        if (got.tokens[t][d] != refs[r].tokens[t][d] + emb[r][d]) return std::string("embedding not broadcast");
                    }
                }
            }
        }
        return std::string();
    }));
    out.push_back(run_check("zero_init_projection", [&] {
        Rng rng(seed + 3);
        for (int i = 0; i < 50; ++i) {
            const std::size_t in = 1 + i % 13, outd = 1 + i % 7;
            std::vector<kernels::Vector> states;
            for (int s = 0; s < 5; ++s) states.push_back(random_vector(rng, in, -100, 100));
            for (const auto& y : kernels::project_context(states, kernels::AffineProjector::zeros(in, outd))) {
                for (double v : y) {
                    if (v != 0.0 || std::signbit(v)) return std::string("nonzero context");
                }
            }
        }
        return std::string();
    }));
    return out;
}

inline objectives::PlanLogProbs random_logprobs(Rng& rng)
{
    std::uniform_real_distribution<double> d(-40.0, -0.5);
    return {d(rng), d(rng), d(rng), d(rng)};
}

inline std::vector<CheckResult> objective_checks(std::uint64_t seed = 13, int instances = 1000)
{
    using namespace objectives;
    std::vector<CheckResult> out;
    out.push_back(run_check("dpo_zero_margin_is_ln2", [&] {
        Rng rng(seed);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            auto lp = random_logprobs(rng);
            lp.policy_rejected = lp.policy_chosen - lp.ref_chosen + lp.ref_rejected;
            if (lp.policy_rejected > 0.0) continue;
            worst = std::max(worst, std::abs(dpo_loss(lp) - std::log(2.0)));
        }
        PlanLogProbs equal{-3.0, -3.0, -3.0, -3.0};
        worst = std::max(worst, std::abs(dpo_loss(equal) - 0.69314718055994530942));
        return worst < 1e-12 ? std::string() : "max error " + fmt(worst);
    }));
    out.push_back(run_check("dpo_margin_shift_invariance", [&] {
        Rng rng(seed + 1);
        std::uniform_real_distribution<double> shift(-5.0, 0.0);
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            const auto lp = random_logprobs(rng);
            const double c = shift(rng), d = shift(rng);
            PlanLogProbs moved{lp.policy_chosen + c, lp.policy_rejected + d, lp.ref_chosen + c, lp.ref_rejected + d};
            worst = std::max(worst, std::abs(dpo_loss(lp) - dpo_loss(moved)));
        }
        return worst <= 1e-12 ? std::string() : "max error " + fmt(worst);
    }));
    out.push_back(run_check("dpo_gradient_finite_difference", [&] {
        Rng rng(seed + 2);
        std::uniform_real_distribution<double> beta(0.05, 0.5);
        const double step = 1e-6;
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            const auto lp = random_logprobs(rng);
            const DpoConfig cfg{beta(rng)};
            const auto g = dpo_gradient(lp, cfg);
            for (int k = 0; k < 4; ++k) {
                auto plus = lp, minus = lp;
                double* fields_p[] = {&plus.policy_chosen, &plus.policy_rejected, &plus.ref_chosen, &plus.ref_rejected};
                double* fields_m[] = {&minus.policy_chosen, &minus.policy_rejected, &minus.ref_chosen, &minus.ref_rejected};
                *fields_p[k] += step;
                *fields_m[k] -= step;
                const double fd = (dpo_loss(plus, cfg) - dpo_loss(minus, cfg)) / (2.0 * step);
                worst = std::max(worst, std::abs(fd - g[k]) / std::max(std::abs(g[k]), 1e-300));
            }
        }
        return worst <= 1e-6 ? std::string() : "max relative error " + fmt(worst);
    }));
    out.push_back(run_check("dpo_pinned_value", [&] {
        // chosen beats rejected by a policy-side margin of 1 with beta 0.1 -> -ln sigmoid(0.1)
        const double got = dpo_loss({-1.0, -2.0, -5.0, -5.0});
        const double err = std::abs(got - 0.64439666007357089483);
        return err < 1e-10 ? std::string() : "error " + fmt(err);
    }));
    out.push_back(run_check("sft_nll_loop_oracle", [&] {
        Rng rng(seed + 3);
        std::uniform_real_distribution<double> d(-8.0, 0.0);
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            std::vector<double> lp(1 + static_cast<std::size_t>(i % 40));
            for (auto& x : lp) x = d(rng);
            double oracle = 0.0;
            for (std::size_t k = 0; k < lp.size(); ++k) oracle -= lp[k];
            worst = std::max(worst, std::abs(sft_nll(lp) - oracle));
        }
        return worst <= 1e-12 ? std::string() : "max error " + fmt(worst);
    }));
    return out;
}

inline std::vector<CheckResult> all_checks()
{
    std::vector<CheckResult> out;
    for (auto* group : {+[] { return guidance_checks(); }, +[] { return preset_checks(); },
                        +[] { return kernel_checks(); }, +[] { return objective_checks(); }}) {
        auto part = group();
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

} // namespace agentedit::selftest
