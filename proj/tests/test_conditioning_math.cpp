#include "support.hpp"

#include <cmath>
#include <random>

using namespace agentedit;
using namespace agentedit::kernels;

TEST(Interpolation, EndpointsAndMidpoint)
{
    const Vector z0{1.0, -2.0, 0.5}, z1{3.0, 4.0, -0.5};
    EXPECT_EQ(interpolate_latent(z0, z1, 0.0), z0);
    EXPECT_EQ(interpolate_latent(z0, z1, 1.0), z1);
    EXPECT_EQ(interpolate_latent(z0, z1, 0.5), (Vector{2.0, 1.0, 0.0}));
    EXPECT_EQ(interpolate_state(z0, z1, 0.25).t, 0.25);
}

TEST(Interpolation, RejectsBadInputs)
{
    const Vector a{1.0}, b{2.0}, c{1.0, 2.0};
    EXPECT_AGENTEDIT_ERROR(interpolate_latent(a, b, -0.01), ErrorCode::TimestepOutOfRange);
    EXPECT_AGENTEDIT_ERROR(interpolate_latent(a, b, 1.01), ErrorCode::TimestepOutOfRange);
    EXPECT_AGENTEDIT_ERROR(interpolate_latent(a, b, std::nan("")), ErrorCode::TimestepOutOfRange);
    EXPECT_AGENTEDIT_ERROR(interpolate_latent(a, c, 0.5), ErrorCode::DimensionMismatch);
}

TEST(FlowMatching, ZeroAtOracleVelocityAndHandValue)
{
    const Vector z0{0.0, 1.0}, z1{1.0, 3.0};
    EXPECT_EQ(flow_matching_loss(Vector{1.0, 2.0}, z0, z1), 0.0);
    // residuals (1, -2) -> (1 + 4) / 2
    EXPECT_DOUBLE_EQ(flow_matching_loss(Vector{2.0, 0.0}, z0, z1), 2.5);
    EXPECT_AGENTEDIT_ERROR(flow_matching_loss(Vector{1.0}, z0, z1), ErrorCode::DimensionMismatch);
    EXPECT_AGENTEDIT_ERROR(flow_matching_loss(Vector{}, Vector{}, Vector{}), ErrorCode::DimensionMismatch);
}

TEST(FlowMatching, CompensatedSumHandlesMixedMagnitudes)
{
    // one huge residual followed by many tiny ones
    Vector v(10001, 1e-8), z0(10001, 0.0), z1(10001, 0.0);
    v[0] = 1e4;
    long double brute = 0.0L;
    for (double x : v) brute += static_cast<long double>(x) * x;
    brute /= v.size();
    EXPECT_NEAR(flow_matching_loss(v, z0, z1), static_cast<double>(brute), 1e-12);
}

namespace {
TokenBlock block(int n, std::size_t w, double base)
{
    TokenBlock b;
    for (int i = 0; i < n; ++i) b.tokens.push_back(Vector(w, base + i));
    return b;
}
} // namespace

TEST(TokenSequence, LayoutSelectorsAndEmbeddings)
{
    const auto seq = assemble_token_sequence(block(3, 2, 0.0), block(2, 2, 10.0), {block(1, 2, 20.0), block(2, 2, 30.0)},
                                             {Vector{0.5, 0.5}, Vector{-1.0, 1.0}});
    EXPECT_EQ(seq.length(), 8u);
    EXPECT_EQ(seq.selectors, (std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1, 1, 1}));
    ASSERT_EQ(seq.blocks.size(), 4u);
    EXPECT_EQ(seq.blocks[2].ref_index, 1);
    EXPECT_EQ(seq.blocks[3].ref_index, 2);
    EXPECT_EQ(seq.blocks[2].tokens[0], (Vector{20.5, 20.5}));
    EXPECT_EQ(seq.blocks[3].tokens[1], (Vector{30.0, 32.0}));
    EXPECT_EQ(seq.blocks[1].kind, BlockKind::Source);
}

TEST(TokenSequence, NoReferencesAndZeroEmbeddings)
{
    const auto seq = assemble_token_sequence(block(2, 3, 0.0), block(2, 3, 1.0), {}, {});
    EXPECT_EQ(seq.length(), 4u);
    const auto refs = std::vector<TokenBlock>{block(2, 3, 5.0)};
    const auto with_zero = assemble_token_sequence(block(1, 3, 0.0), block(1, 3, 1.0), refs, zero_embeddings(1, 3));
    EXPECT_EQ(with_zero.blocks[2].tokens, refs[0].tokens);
}

TEST(TokenSequence, WidthMismatch)
{
    EXPECT_AGENTEDIT_ERROR(assemble_token_sequence(block(1, 2, 0), block(1, 3, 0), {}, {}), ErrorCode::WidthMismatch);
    EXPECT_AGENTEDIT_ERROR(assemble_token_sequence(block(1, 2, 0), block(1, 2, 0), {block(1, 2, 0)}, {Vector{1.0}}),
                           ErrorCode::WidthMismatch);
    EXPECT_AGENTEDIT_ERROR(assemble_token_sequence(block(1, 2, 0), block(1, 2, 0), {block(1, 2, 0)}, {}),
                           ErrorCode::WidthMismatch);
}

TEST(Modulation, SelectorPicksZeroTimestepBranch)
{
    ModulationPair pair{{1.0, 2.0}, {-1.0, -2.0}};
    const std::vector<std::uint8_t> eta{0, 1, 0};
    const auto mods = modulation_mix(pair, eta);
    ASSERT_EQ(mods.size(), 3u);
    EXPECT_EQ(mods[0], pair.a_t);
    EXPECT_EQ(mods[1], pair.a_0);
    EXPECT_EQ(mods[2], pair.a_t);
}

TEST(Projection, ZeroInitEmitsZeroAndIdentityPassesThrough)
{
    std::vector<Vector> h{{1.0, -2.0, 3.0}, {4.0, 5.0, 6.0}};
    for (const auto& y : project_context(h, AffineProjector::zeros(3, 5))) EXPECT_EQ(y, Vector(5, 0.0));
    EXPECT_EQ(project_context(h, AffineProjector::identity(3)), h);
    EXPECT_AGENTEDIT_ERROR(project_context(h, AffineProjector::zeros(2, 2)), ErrorCode::DimensionMismatch);
}

TEST(Guidance, SpecialCases)
{
    GuidanceInputs g{{1.0, 2.0}, {0.5, 0.5}, {0.0, -1.0}, 1.0, 1.0};
    EXPECT_EQ(guided_velocity(g), g.v_plus);
    g.lambda_txt = 0.0;
    g.lambda_img = 0.0;
    EXPECT_EQ(guided_velocity(g), g.v_empty);
    g.lambda_txt = 2.0;
    g.lambda_img = 1.25;
    // 0 + 1.25*0.5 + 2*0.5 ; -1 + 1.25*1.5 + 2*1.5
    const auto v = guided_velocity(g);
    EXPECT_DOUBLE_EQ(v[0], 1.625);
    EXPECT_DOUBLE_EQ(v[1], 3.875);
    g.lambda_img = std::numeric_limits<double>::infinity();
    EXPECT_AGENTEDIT_ERROR(guided_velocity(g), ErrorCode::NonFiniteInput);
}

TEST(Guidance, PropertySuites)
{
    for (const auto& r : selftest::guidance_checks()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
    for (const auto& r : selftest::kernel_checks()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Patchify, BlockMeans)
{
    Image img(4, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            const auto o = img.offset(y, x);
            img.rgb[o] = static_cast<std::uint8_t>(y * 4 + x);
            img.rgb[o + 1] = 100;
            img.rgb[o + 2] = static_cast<std::uint8_t>(x < 2 ? 0 : 200);
        }
    }
    const auto b = block_mean_patchify(img, 2, BlockKind::Reference, 1);
    ASSERT_EQ(b.tokens.size(), 4u);
    EXPECT_EQ(b.tokens[0], (Vector{2.5, 100.0, 0.0}));
    EXPECT_EQ(b.tokens[1], (Vector{4.5, 100.0, 200.0}));
    EXPECT_EQ(b.tokens[3], (Vector{12.5, 100.0, 200.0}));
    EXPECT_EQ(block_mean_patchify(img, 3).tokens.size(), 1u);
    EXPECT_AGENTEDIT_ERROR(block_mean_patchify(img, 0), ErrorCode::InvalidConfig);
}
