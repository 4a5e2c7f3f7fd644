#include "support.hpp"

#include <random>

using namespace agentedit;
using testing_support::make_request;
using testing_support::no_sleep;

namespace {

EditPlan make_plan(TaskLabel::Kind kind, std::optional<std::string> q = std::nullopt,
                   std::optional<std::string> m = std::nullopt)
{
    return {"Do the edit.", TaskLabel(kind), std::move(q), std::move(m)};
}

struct Mocks {
    mock::MockSearchClient search;
    mock::MockChatClient selector{{}, [](const ChatRequest&) { return std::string("Selected: image_1"); }};
    mock::MockGroundingClient grounder;
    SyntheticFrameSource frames;

    ToolEndpoints endpoints() { return {&search, &selector, &grounder, &frames}; }
};

ToolConfig quiet_config()
{
    ToolConfig cfg;
    cfg.sleeper = no_sleep();
    return cfg;
}

} // namespace

TEST(SearchImages, EmptyQueryMakesNoCall)
{
    mock::MockSearchClient search;
    std::vector<ToolCall> log;
    auto set = search_images(std::nullopt, &search, 4, {}, no_sleep(), &log);
    EXPECT_TRUE(set.empty());
    EXPECT_EQ(search.calls(), 0);
    EXPECT_TRUE(log.empty());
    // no endpoint needed either
    EXPECT_TRUE(search_images(std::nullopt, nullptr, 4).empty());
}

TEST(SearchImages, IdsAreOneBasedAndTruncatedToTopK)
{
    std::map<std::string, std::vector<SearchHit>> fx{{"q", {{"u1", "a"}, {"u2", "b"}, {"u3", "c"}, {"u4", "d"}, {"u5", "e"}}}};
    mock::MockSearchClient search(fx, false);
    auto set = search_images(std::string("q"), &search, 3, {}, no_sleep());
    ASSERT_EQ(set.candidates.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(set.candidates[i].id, i + 1);
        EXPECT_EQ(set.candidates[i].source_url, "u" + std::to_string(i + 1));
    }
    EXPECT_EQ(set.attempts, 1);
}

TEST(SearchImages, ZeroHitsIsAnEmptySetNotAnError)
{
    mock::MockSearchClient search({}, false);
    auto set = search_images(std::string("nothing"), &search, 4, {}, no_sleep());
    EXPECT_TRUE(set.empty());
    EXPECT_EQ(search.calls(), 1);
}

TEST(SearchImages, TransportFailuresRetryWithBackoff)
{
    mock::MockSearchClient search;
    search.faults.fail_next(2);
    testing_support::RecordingSleeper sleeper;
    std::vector<ToolCall> log;
    auto set = search_images(std::string("Darth Vader"), &search, 4, {}, sleeper.fn(), &log);
    EXPECT_EQ(set.attempts, 3);
    EXPECT_EQ(search.calls(), 3);
    EXPECT_EQ(*sleeper.delays, (std::vector<long long>{500, 1000}));
    ASSERT_EQ(log.size(), 1u);
    EXPECT_EQ(log[0].attempts, 3);
}

TEST(SearchImages, ExhaustedRetriesRaiseNetworkError)
{
    mock::MockSearchClient search;
    search.faults.fail_next(5);
    try {
        search_images(std::string("q"), &search, 4, {}, no_sleep());
        FAIL() << "expected NetworkError";
    } catch (const NetworkError& e) {
        EXPECT_EQ(e.attempts(), 3);
        EXPECT_EQ(e.code(), ErrorCode::NetworkError);
    }
    EXPECT_EQ(search.calls(), 3);
}

TEST(SearchImages, ParseErrorsAreNotRetried)
{
    struct BadSearch : SearchClient {
        int calls = 0;
        std::vector<SearchHit> search(const std::string&, int) override
        {
            ++calls;
            fail(ErrorCode::MalformedDocument, "garbage");
        }
    } bad;
    EXPECT_AGENTEDIT_ERROR(search_images(std::string("q"), &bad, 4, {}, no_sleep()), ErrorCode::MalformedDocument);
    EXPECT_EQ(bad.calls, 1);
}

TEST(Selection, ParsesCommonReplyShapes)
{
    EXPECT_EQ(parse_selection("Selected: image_2."), 2);
    EXPECT_EQ(parse_selection("selected:image_3"), 3);
    EXPECT_EQ(parse_selection("I pick Image 4 because..."), 4);
    EXPECT_EQ(parse_selection("image1"), 1);
    EXPECT_FALSE(parse_selection("none of these fit").has_value());
}

TEST(Selection, ErrorsAreTyped)
{
    mock::MockChatClient selector({}, [](const ChatRequest&) { return std::string("Selected: image_9"); });
    CandidateSet empty;
    EXPECT_AGENTEDIT_ERROR(select_reference(empty, "p", &selector), ErrorCode::NoCandidates);
    EXPECT_EQ(selector.calls(), 0);

    mock::MockSearchClient search;
    auto set = search_images(std::string("q"), &search, 4, {}, no_sleep());
    EXPECT_AGENTEDIT_ERROR(select_reference(set, "p", &selector, {}, no_sleep()), ErrorCode::IndexOutOfRange);

    mock::MockChatClient decliner({}, [](const ChatRequest&) { return std::string("none suitable"); });
    EXPECT_AGENTEDIT_ERROR(select_reference(set, "p", &decliner, {}, no_sleep()), ErrorCode::UnparseableSelection);

    mock::MockChatClient zero({}, [](const ChatRequest&) { return std::string("Selected: image_0"); });
    EXPECT_AGENTEDIT_ERROR(select_reference(set, "p", &zero, {}, no_sleep()), ErrorCode::IndexOutOfRange);
}

TEST(Selection, PicksTheNamedCandidate)
{
    mock::MockSearchClient search;
    mock::MockChatClient selector({}, [](const ChatRequest&) { return std::string("Selected: image_3."); });
    auto set = search_images(std::string("Joker"), &search, 4, {}, no_sleep());
    auto ref = select_reference(set, "Joker (for the edit: ...)", &selector, {}, no_sleep());
    EXPECT_EQ(ref.provenance, Provenance::WebSearch);
    EXPECT_EQ(ref.image.uri, set.candidates[2].source_url);
    const auto reqs = selector.requests();
    ASSERT_EQ(reqs.size(), 1u);
    EXPECT_EQ(reqs[0].image_uris().size(), 4u);
    EXPECT_EQ(reqs[0].temperature, 0.0);
}

TEST(Grounding, DecodesRleAndRaw)
{
    auto rle = decode_grounding_payload(nlohmann::json::parse(
        R"({"detections":1,"height":2,"width":3,"mask":{"encoding":"rle","counts":[1,2,3]}})"));
    EXPECT_EQ(rle.bits, (std::vector<bool>{false, true, true, false, false, false}));
    auto raw = decode_grounding_payload(nlohmann::json::parse(
        R"({"detections":2,"height":2,"width":2,"mask":{"encoding":"raw","data":"1001"}})"));
    EXPECT_EQ(raw.bits, (std::vector<bool>{true, false, false, true}));
    EXPECT_AGENTEDIT_ERROR(decode_grounding_payload(nlohmann::json::parse(
                               R"({"detections":1,"height":2,"width":2,"mask":{"encoding":"raw","data":"100"}})")),
                           ErrorCode::DimensionMismatch);
    EXPECT_AGENTEDIT_ERROR(decode_grounding_payload(nlohmann::json::parse(R"({"detections":1})")),
                           ErrorCode::MalformedDocument);
    EXPECT_EQ(decode_grounding_payload(nlohmann::json::parse(R"({"detections":0})")).detections, 0);
}

TEST(Grounding, EmptyPhraseMakesNoCall)
{
    mock::MockGroundingClient grounder;
    EXPECT_FALSE(ground_mask(std::nullopt, Image(4, 4), &grounder).has_value());
    EXPECT_EQ(grounder.calls(), 0);
}

TEST(Grounding, NoDetectionsAndWrongSizeAreErrors)
{
    mock::MockGroundingClient grounder(
        {{"ghost", nlohmann::json::parse(R"({"detections":0})")},
         {"small", nlohmann::json::parse(R"({"detections":1,"height":1,"width":2,"mask":{"encoding":"raw","data":"11"}})")}});
    EXPECT_AGENTEDIT_ERROR(ground_mask(std::string("ghost"), Image(4, 4), &grounder, {}, no_sleep()),
                           ErrorCode::NoTargetFound);
    EXPECT_AGENTEDIT_ERROR(ground_mask(std::string("small"), Image(4, 4), &grounder, {}, no_sleep()),
                           ErrorCode::DimensionMismatch);
}

TEST(Composite, CheckerboardMatchesBruteForceOracle)
{
    const int h = 37, w = 53;
    SyntheticFrameSource src;
    const Image frame = src.frame({"clip", 1, h, w, 24.0}, 0);
    BinaryMask mask{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) mask.bits[static_cast<std::size_t>(y) * w + x] = ((x / 4 + y / 4) % 2) ? 1 : 0;
    }
    const auto ref = composite_masked_image(mask, frame, 128, "checker");
    ASSERT_TRUE(ref.image.pixels);
    const Image& out = *ref.image.pixels;
    ASSERT_EQ(out.height, h);
    ASSERT_EQ(out.width, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool masked = ((x / 4 + y / 4) % 2) != 0;
            for (int c = 0; c < 3; ++c) {
                const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3 + c;
                ASSERT_EQ(out.rgb[i], masked ? 128 : frame.rgb[i]) << y << "," << x << "," << c;
            }
        }
    }
    EXPECT_EQ(ref.provenance, Provenance::MaskComposite);
    EXPECT_EQ(ref.origin_meta, "checker");
}

TEST(Composite, SizeMismatchIsRejected)
{
    BinaryMask mask{2, 2, {1, 0, 0, 1}};
    EXPECT_AGENTEDIT_ERROR(composite_masked_image(mask, Image(3, 2)), ErrorCode::DimensionMismatch);
}

TEST(ConstructConditions, RandomizedReferenceCountAndCallCounts)
{
    std::mt19937_64 rng(2024);
    const TaskLabel::Kind eligible[] = {TaskLabel::Kind::AddObject, TaskLabel::Kind::ReplaceObject,
                                        TaskLabel::Kind::ChangeBackground};
    for (int i = 0; i < 50; ++i) {
        Mocks m;
        const int k = static_cast<int>(rng() % 4);
        const bool want_q = k == 0 && rng() % 2;
        const bool want_m = rng() % 2;
        const auto kind = want_m ? TaskLabel::Kind::RemoveObject : eligible[rng() % 3];
        EditPlan plan = make_plan(kind);
        if (want_q && !want_m) plan.image_search = "entity " + std::to_string(i);
        if (want_m) plan.mask_phrase = "object " + std::to_string(i);
        auto cfg = quiet_config();
        cfg.mask_requires_removal = true;
        const auto request = make_request("case " + std::to_string(i), k);
        std::vector<ToolCall> log;
        const auto tuple = construct_conditions(plan, request, m.endpoints(), cfg, &log);

        const std::size_t expect = static_cast<std::size_t>(k) + (plan.image_search ? 1 : 0) + (plan.mask_phrase ? 1 : 0);
        ASSERT_EQ(tuple.references.size(), expect) << "case " << i;
        EXPECT_EQ(m.search.calls(), plan.image_search ? 1 : 0);
        EXPECT_EQ(m.selector.calls(), plan.image_search ? 1 : 0);
        EXPECT_EQ(m.grounder.calls(), plan.mask_phrase ? 1 : 0);
        for (int r = 0; r < k; ++r) {
            EXPECT_EQ(tuple.references[r].provenance, Provenance::User);
            EXPECT_EQ(tuple.references[r].image.uri, request.user_references[r].uri);
        }
        EXPECT_EQ(tuple.refined_instruction, plan.refined_instruction);
        EXPECT_EQ(tuple.source_video, request.source_video);
    }
}

TEST(ConstructConditions, BothToolsRunAndMergeInFixedOrder)
{
    for (bool concurrent : {true, false}) {
        Mocks m;
        auto cfg = quiet_config();
        cfg.mask_requires_removal = false;
        cfg.concurrent = concurrent;
        auto plan = make_plan(TaskLabel::Kind::ReplaceObject, "Starbucks tumbler", "the mug");
        std::vector<ToolCall> log;
        const auto tuple = construct_conditions(plan, make_request("swap", 0), m.endpoints(), cfg, &log);
        ASSERT_EQ(tuple.references.size(), 2u);
        EXPECT_EQ(tuple.references[0].provenance, Provenance::WebSearch);
        EXPECT_EQ(tuple.references[1].provenance, Provenance::MaskComposite);
        ASSERT_EQ(log.size(), 3u);
        EXPECT_EQ(log[0].tool, "search");
        EXPECT_EQ(log[1].tool, "selector");
        EXPECT_EQ(log[2].tool, "grounder");
    }
}

TEST(ConstructConditions, MaskCompositePreservesResolution)
{
    Mocks m;
    auto plan = make_plan(TaskLabel::Kind::RemoveObject, std::nullopt, "the table");
    const auto request = make_request("remove", 0, 10, 30, 40);
    const auto tuple = construct_conditions(plan, request, m.endpoints(), quiet_config());
    ASSERT_EQ(tuple.references.size(), 1u);
    const auto& img = *tuple.references[0].image.pixels;
    EXPECT_EQ(img.height, 30);
    EXPECT_EQ(img.width, 40);
    const auto frame = m.frames.frame(request.source_video, 0);
    std::size_t kept = 0;
    for (int y = 0; y < 30; ++y) {
        for (int x = 0; x < 40; ++x) {
            const bool inside = y >= 30 / 4 && y < 30 - 30 / 4 && x >= 40 / 4 && x < 40 - 40 / 4;
            if (inside) continue;
            const auto o = img.offset(y, x);
            for (int c = 0; c < 3; ++c) ASSERT_EQ(img.rgb[o + c], frame.rgb[o + c]);
            ++kept;
        }
    }
    EXPECT_GT(kept, 0u);
}

TEST(ConstructConditions, InvalidPlanMakesNoCalls)
{
    Mocks m;
    auto plan = make_plan(TaskLabel::Kind::AddObject, "Darth Vader");
    EXPECT_AGENTEDIT_ERROR(construct_conditions(plan, make_request("add", 1), m.endpoints(), quiet_config()),
                           ErrorCode::PlanInvalid);
    EXPECT_EQ(m.search.calls(), 0);
    EXPECT_EQ(m.selector.calls(), 0);
    EXPECT_EQ(m.grounder.calls(), 0);
}

TEST(ConstructConditions, UnboundEndpointIsTyped)
{
    auto plan = make_plan(TaskLabel::Kind::AddObject, "Darth Vader");
    ToolEndpoints none;
    EXPECT_AGENTEDIT_ERROR(construct_conditions(plan, make_request(), none, quiet_config()), ErrorCode::RoleUnbound);
}

TEST(ConstructConditions, NoToolPlanIsPassThrough)
{
    Mocks m;
    auto plan = make_plan(TaskLabel::Kind::GlobalStyle);
    const auto request = make_request("make it anime", 2);
    const auto tuple = construct_conditions(plan, request, m.endpoints(), quiet_config());
    EXPECT_EQ(tuple.references.size(), 2u);
    EXPECT_EQ(m.search.calls() + m.selector.calls() + m.grounder.calls(), 0);
}

TEST(ConstructConditions, DigestIsStable)
{
    auto plan = make_plan(TaskLabel::Kind::AddObject, "Darth Vader");
    std::string first;
    for (int i = 0; i < 5; ++i) {
        Mocks m;
        const auto tuple = construct_conditions(plan, make_request("add"), m.endpoints(), quiet_config());
        const auto d = tuple_digest(tuple);
        if (i == 0) first = d;
        EXPECT_EQ(d, first);
        EXPECT_EQ(d.size(), 64u);
    }
}

TEST(ConstructConditions, SharedClientsSurviveConcurrentRequests)
{
    Mocks m;
    auto cfg = quiet_config();
    cfg.mask_requires_removal = false;
    auto plan = make_plan(TaskLabel::Kind::ReplaceObject, "tumbler", "mug");
    auto digests = parallel_map<std::string>(16, 8, [&](std::size_t) {
        return tuple_digest(construct_conditions(plan, make_request("swap"), m.endpoints(), cfg));
    });
    for (const auto& d : digests) EXPECT_EQ(d, digests.front());
    EXPECT_EQ(m.search.calls(), 16);
    EXPECT_EQ(m.grounder.calls(), 16);
}
