#pragma once

// Numeric kernels for the editor's conditioning algebra: the straight-line
// latent path and its velocity loss, token-sequence assembly with reference
// index embeddings, per-token timestep modulation, the context projector and
// three-branch guidance. Everything works on flat double arrays; encoders and
// the velocity field itself are supplied by the caller.

#include "agentedit/error.hpp"
#include "agentedit/media.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace agentedit::kernels {

using Vector = std::vector<double>;

namespace detail {

inline void same_size(std::size_t a, std::size_t b, const char* what)
{
    if (a != b) {
        fail(ErrorCode::DimensionMismatch,
             std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace detail

struct LatentState {
    Vector values;
    double t = 0.0;
};

// z_t = (1 - t) z0 + t z1
inline Vector interpolate_latent(std::span<const double> z0, std::span<const double> z1, double t)
{
    detail::same_size(z0.size(), z1.size(), "interpolate_latent");
    if (!(t >= 0.0 && t <= 1.0)) fail(ErrorCode::TimestepOutOfRange, "t=" + std::to_string(t));
    Vector out(z0.size());
    for (std::size_t i = 0; i < z0.size(); ++i) out[i] = (1.0 - t) * z0[i] + t * z1[i];
    return out;
}

inline LatentState interpolate_state(std::span<const double> z0, std::span<const double> z1, double t)
{
    return {interpolate_latent(z0, z1, t), t};
}

// Mean over elements of (v_pred - (z1 - z0))^2.
inline double flow_matching_loss(std::span<const double> v_pred, std::span<const double> z0,
                                 std::span<const double> z1)
{
    detail::same_size(v_pred.size(), z0.size(), "flow_matching_loss");
    detail::same_size(z0.size(), z1.size(), "flow_matching_loss");
    if (v_pred.empty()) fail(ErrorCode::DimensionMismatch, "flow_matching_loss: empty arrays");
    detail::CompensatedSum acc;
    for (std::size_t i = 0; i < v_pred.size(); ++i) {
        const double r = v_pred[i] - (z1[i] - z0[i]);
        acc.add(r * r);
    }
    return acc.value() / static_cast<double>(v_pred.size());
}

enum class BlockKind { Noisy, Source, Reference };

struct TokenBlock {
    std::vector<Vector> tokens;
    BlockKind kind = BlockKind::Noisy;
    std::optional<int> ref_index; // 1-based, references only

    std::size_t width() const { return tokens.empty() ? 0 : tokens.front().size(); }
};

struct TokenSequence {
    std::vector<TokenBlock> blocks;
    std::vector<std::uint8_t> selectors; // 0 on noisy tokens, 1 on conditioning tokens

    std::size_t length() const noexcept { return selectors.size(); }

    std::vector<Vector> flatten() const
    {
        std::vector<Vector> out;
        out.reserve(length());
        for (const auto& b : blocks) out.insert(out.end(), b.tokens.begin(), b.tokens.end());
        return out;
    }
};

// [noisy; source; ref_1 + e_1; ...; ref_K + e_K], with one embedding broadcast
// over every token of its reference block.
inline TokenSequence assemble_token_sequence(const TokenBlock& noisy, const TokenBlock& source,
                                             const std::vector<TokenBlock>& refs,
                                             const std::vector<Vector>& ref_embeddings)
{
    if (ref_embeddings.size() < refs.size()) {
        fail(ErrorCode::WidthMismatch, std::to_string(refs.size()) + " reference blocks but only " +
                                           std::to_string(ref_embeddings.size()) + " index embeddings");
    }
    std::optional<std::size_t> width;
    auto check_width = [&](const TokenBlock& block, const char* what) {
        for (const auto& tok : block.tokens) {
            if (!width) width = tok.size();
            if (tok.size() != *width) {
                fail(ErrorCode::WidthMismatch, std::string(what) + " token width " + std::to_string(tok.size()) +
                                                   ", expected " + std::to_string(*width));
            }
        }
    };
    check_width(noisy, "noisy");
    check_width(source, "source");
    for (const auto& r : refs) check_width(r, "reference");

    TokenSequence seq;
    seq.blocks.reserve(2 + refs.size());

    TokenBlock n = noisy;
    n.kind = BlockKind::Noisy;
    n.ref_index.reset();
    seq.blocks.push_back(std::move(n));
    seq.selectors.insert(seq.selectors.end(), noisy.tokens.size(), 0);

    TokenBlock s = source;
    s.kind = BlockKind::Source;
    s.ref_index.reset();
    seq.blocks.push_back(std::move(s));
    seq.selectors.insert(seq.selectors.end(), source.tokens.size(), 1);

    for (std::size_t k = 0; k < refs.size(); ++k) {
        const auto& e = ref_embeddings[k];
        TokenBlock r = refs[k];
        r.kind = BlockKind::Reference;
        r.ref_index = static_cast<int>(k + 1);
        for (auto& tok : r.tokens) {
            if (e.size() != tok.size()) {
                fail(ErrorCode::WidthMismatch, "embedding e_" + std::to_string(k + 1) + " has width " +
                                                   std::to_string(e.size()));
            }
            for (std::size_t d = 0; d < tok.size(); ++d) tok[d] += e[d];
        }
        seq.selectors.insert(seq.selectors.end(), r.tokens.size(), 1);
        seq.blocks.push_back(std::move(r));
    }
    return seq;
}

// Zero vectors for every reference slot; the index embedding is a no-op by default.
inline std::vector<Vector> zero_embeddings(std::size_t count, std::size_t width)
{
    return std::vector<Vector>(count, Vector(width, 0.0));
}

struct ModulationPair {
    Vector a_t; // real-timestep modulation
    Vector a_0; // zero-timestep modulation
};

// a_i = (1 - eta_i) a(t) + eta_i a(0)
inline std::vector<Vector> modulation_mix(const ModulationPair& pair, std::span<const std::uint8_t> selectors)
{
    detail::same_size(pair.a_t.size(), pair.a_0.size(), "modulation_mix");
    std::vector<Vector> out;
    out.reserve(selectors.size());
    for (std::uint8_t eta : selectors) {
        if (eta > 1) fail(ErrorCode::DimensionMismatch, "selector must be 0 or 1");
        const double w = eta;
        Vector a(pair.a_t.size());
        for (std::size_t d = 0; d < a.size(); ++d) a[d] = (1.0 - w) * pair.a_t[d] + w * pair.a_0[d];
        out.push_back(std::move(a));
    }
    return out;
}

// out = W x + b, W stored row-major as out_dim x in_dim.
struct AffineProjector {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Vector weights;
    Vector bias;

    static AffineProjector zeros(std::size_t in, std::size_t out)
    {
        return {in, out, Vector(in * out, 0.0), Vector(out, 0.0)};
    }

    static AffineProjector identity(std::size_t n)
    {
        auto p = zeros(n, n);
        for (std::size_t i = 0; i < n; ++i) p.weights[i * n + i] = 1.0;
        return p;
    }
};

inline std::vector<Vector> project_context(const std::vector<Vector>& encoder_states, const AffineProjector& proj)
{
    detail::same_size(proj.weights.size(), proj.in_dim * proj.out_dim, "projector weights");
    detail::same_size(proj.bias.size(), proj.out_dim, "projector bias");
    std::vector<Vector> out;
    out.reserve(encoder_states.size());
    for (const auto& h : encoder_states) {
        detail::same_size(h.size(), proj.in_dim, "project_context");
        Vector y(proj.bias);
        for (std::size_t r = 0; r < proj.out_dim; ++r) {
            const double* row = proj.weights.data() + r * proj.in_dim;
            double acc = 0.0;
            for (std::size_t c = 0; c < proj.in_dim; ++c) acc += row[c] * h[c];
            y[r] += acc;
        }
        out.push_back(std::move(y));
    }
    return out;
}

struct GuidanceInputs {
    Vector v_plus;  // full text and visual conditions
    Vector v_vneg;  // visual-negative branch
    Vector v_empty; // unconditional branch
    double lambda_txt = 1.0;
    double lambda_img = 1.0;
};

// v_empty + lambda_img (v_vneg - v_empty) + lambda_txt (v_plus - v_vneg)
inline Vector guided_velocity(const GuidanceInputs& g)
{
    detail::same_size(g.v_plus.size(), g.v_vneg.size(), "guided_velocity");
    detail::same_size(g.v_vneg.size(), g.v_empty.size(), "guided_velocity");
    if (!std::isfinite(g.lambda_txt) || !std::isfinite(g.lambda_img)) {
        fail(ErrorCode::NonFiniteInput, "guidance scales must be finite");
    }
    Vector out(g.v_plus.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = g.v_empty[i] + g.lambda_img * (g.v_vneg[i] - g.v_empty[i]) +
                 g.lambda_txt * (g.v_plus[i] - g.v_vneg[i]);
    }
    return out;
}

// Reference patch embedder: averages each patch x patch cell per channel and
// emits one 3-wide token per cell (ragged edges are dropped).
inline TokenBlock block_mean_patchify(const Image& img, int patch, BlockKind kind = BlockKind::Source,
                                      std::optional<int> ref_index = std::nullopt)
{
    if (patch < 1) fail(ErrorCode::InvalidConfig, "patch size must be positive");
    TokenBlock block;
    block.kind = kind;
    block.ref_index = ref_index;
    const double area = static_cast<double>(patch) * patch;
    for (int py = 0; py + patch <= img.height; py += patch) {
        for (int px = 0; px + patch <= img.width; px += patch) {
            Vector tok(3, 0.0);
            for (int y = py; y < py + patch; ++y) {
                for (int x = px; x < px + patch; ++x) {
                    const auto o = img.offset(y, x);
                    for (int c = 0; c < 3; ++c) tok[c] += img.rgb[o + c];
                }
            }
            for (double& v : tok) v /= area;
            block.tokens.push_back(std::move(tok));
        }
    }
    return block;
}

} // namespace agentedit::kernels
