#include "support.hpp"

#include <random>

using namespace agentedit;
using namespace agentedit::dataset;
using testing_support::fixture;
using testing_support::make_request;

TEST(PlanningRecords, ReferenceInputsBuild)
{
    const auto rows = testing_support::read_jsonl(fixture("planning_inputs.jsonl"));
    const auto plans = testing_support::read_lines(fixture("planning_plans.jsonl"));
    ASSERT_EQ(rows.size(), plans.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto rec = planning_record_from_json(rows[i]);
        EXPECT_EQ(rec.context.raw_instruction, rows[i].at("degraded").get<std::string>());
        EXPECT_EQ(serialize_edit_plan(rec.target_plan), plans[i]);
        const auto out = to_json(rec);
        EXPECT_EQ(out.at("schema_version"), schema_version);
        EXPECT_EQ(out.at("plan").dump(), plans[i]);
    }
}

TEST(PlanningRecords, RejectsBadInputs)
{
    EditPlan ok{"Make it anime.", TaskLabel(TaskLabel::Kind::GlobalStyle), std::nullopt, std::nullopt};
    EXPECT_AGENTEDIT_ERROR(build_planning_record("   ", make_request(), ok), ErrorCode::InvalidRequest);
    EditPlan bad{"Add it.", TaskLabel(TaskLabel::Kind::AddObject), "thing", std::nullopt};
    EXPECT_AGENTEDIT_ERROR(build_planning_record("add it", make_request("x", 1), bad), ErrorCode::PlanInvalid);
}

TEST(SelectionRecords, ReferenceAnswers)
{
    const auto rows = testing_support::read_jsonl(fixture("selection_inputs.jsonl"));
    ASSERT_EQ(rows.size(), 6u);
    const std::vector<std::string> expected{"image_2", "image_2", "image_1", "image_3", "image_3", "image_2"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto out = build_record("selection", rows[i]);
        EXPECT_EQ(out.at("target"), "Selected: " + expected[i]);
        EXPECT_EQ(out.at("candidates").size(), 4u);
    }
}

TEST(SelectionRecords, AnswerMustIndexACandidate)
{
    CandidateSet set = candidates_from_json("q", nlohmann::json::parse(R"([{"imageUrl":"a"},{"imageUrl":"b"}])"));
    EXPECT_EQ(build_selection_record("p", set, 2).target_text(), "image_2");
    EXPECT_AGENTEDIT_ERROR(build_selection_record("p", set, 3), ErrorCode::IndexOutOfRange);
    EXPECT_AGENTEDIT_ERROR(build_selection_record("p", set, 0), ErrorCode::IndexOutOfRange);
    EXPECT_AGENTEDIT_ERROR(build_selection_record("p", CandidateSet{}, 1), ErrorCode::NoCandidates);
}

TEST(PreferencePairs, ReferencePairsReproduce)
{
    const auto rows = testing_support::read_jsonl(fixture("dpo_pairs.jsonl"));
    ASSERT_EQ(rows.size(), 6u);
    std::set<std::string> categories;
    for (const auto& row : rows) {
        const auto out = build_record("preference", row);
        const auto chosen = plan_from_json(nlohmann::json::parse(out.at("chosen").dump()));
        const auto rejected = plan_from_json(nlohmann::json::parse(out.at("rejected").dump()));
        EXPECT_EQ(serialize_edit_plan(rejected), serialize_edit_plan(plan_from_json(row.at("expect_rejected"))))
            << row.at("id");
        EXPECT_EQ(chosen, plan_from_json(row.at("seed").at("plan"))) << row.at("id");
        const auto diff = plan_field_diff(chosen, rejected);
        EXPECT_EQ(diff, (std::vector<std::string>{row.at("expect_field").get<std::string>()}));
        categories.insert(out.at("category").get<std::string>());
    }
    EXPECT_EQ(categories.size(), 5u);
}

TEST(PreferencePairs, HundredPairCorpusDiffersInExactlyOneField)
{
    std::mt19937_64 rng(17);
    const std::vector<std::string> labels{"add_object", "remove_object", "replace_object", "change_background",
                                          "global_style", "change_color", "combined_tasks"};
    const std::map<BoundaryCategory, std::string> field{
        {BoundaryCategory::SourceEntityFalseTrigger, "image_search"},
        {BoundaryCategory::FalseImageSearch, "image_search"},
        {BoundaryCategory::AmbiguousMask, "mask"},
        {BoundaryCategory::ConstraintLosingRewrite, "refined_text_instruction"},
        {BoundaryCategory::TaskRouting, "subtask"},
    };
    std::map<BoundaryCategory, int> per_category;
    for (int i = 0; i < 100; ++i) {
        const auto category = boundary_categories[static_cast<std::size_t>(i) % 5].first;
        const auto tag = std::to_string(i);
        EditPlan plan;
        std::string perturbation;
        switch (category) {
        case BoundaryCategory::SourceEntityFalseTrigger:
        case BoundaryCategory::FalseImageSearch:
            plan = {"Replace the man in the grey sweater " + tag + " with an old man.",
                    TaskLabel(TaskLabel::Kind::ReplaceObject), std::nullopt, std::nullopt};
            perturbation = "the man in the grey sweater " + tag;
            break;
        case BoundaryCategory::AmbiguousMask:
            plan = {"Remove the person on the right " + tag + ".", TaskLabel(TaskLabel::Kind::RemoveObject), std::nullopt,
                    "person on the right " + tag};
            perturbation = "person";
            break;
        case BoundaryCategory::ConstraintLosingRewrite:
            plan = {"Change the green garment to pink and add a single floating red rose " + tag + ".",
                    TaskLabel(TaskLabel::Kind::CombinedTasks), std::nullopt, std::nullopt};
            perturbation = "Change the outfit to pink.";
            break;
        case BoundaryCategory::TaskRouting: {
            const auto& from = labels[rng() % labels.size()];
            std::string to;
            do to = labels[rng() % labels.size()];
            while (to == from);
            plan = {"Restyle scene " + tag + ".", normalize_task_label(from), std::nullopt, std::nullopt};
            if (from == "remove_object") plan.mask_phrase = "object " + tag;
            perturbation = to;
            break;
        }
        }
        const auto seed = build_planning_record("request " + tag, make_request(), plan);
        const auto pair = generate_preference_pair(seed, category, perturbation);
        EXPECT_EQ(pair.chosen, plan);
        EXPECT_EQ(plan_field_diff(pair.chosen, pair.rejected), (std::vector<std::string>{field.at(category)}))
            << "pair " << i;
        ++per_category[category];
    }
    EXPECT_EQ(per_category.size(), 5u);
    for (const auto& [c, n] : per_category) EXPECT_EQ(n, 20);
}

TEST(PreferencePairs, InvalidInputsAreTyped)
{
    EditPlan searchy{"Add Vader.", TaskLabel(TaskLabel::Kind::AddObject), "Darth Vader", std::nullopt};
    EditPlan plain{"Add a cat.", TaskLabel(TaskLabel::Kind::AddObject), std::nullopt, std::nullopt};
    EditPlan removal{"Remove the person.", TaskLabel(TaskLabel::Kind::RemoveObject), std::nullopt, "person on the left"};
    const auto s_searchy = build_planning_record("r", make_request(), searchy);
    const auto s_plain = build_planning_record("r", make_request(), plain);
    const auto s_removal = build_planning_record("r", make_request(), removal);

    EXPECT_AGENTEDIT_ERROR(generate_preference_pair(s_plain, BoundaryCategory::FalseImageSearch, ""),
                           ErrorCode::CategoryInputMissing);
    EXPECT_AGENTEDIT_ERROR(generate_preference_pair(s_searchy, BoundaryCategory::FalseImageSearch, "x"),
                           ErrorCode::InvalidPerturbation);
    EXPECT_AGENTEDIT_ERROR(generate_preference_pair(s_plain, BoundaryCategory::AmbiguousMask, "x"),
                           ErrorCode::InvalidPerturbation);
    EXPECT_AGENTEDIT_ERROR(generate_preference_pair(s_removal, BoundaryCategory::AmbiguousMask, "the person on the left side"),
                           ErrorCode::InvalidPerturbation);
    EXPECT_AGENTEDIT_ERROR(generate_preference_pair(s_plain, BoundaryCategory::TaskRouting, "teleport"),
                           ErrorCode::InvalidPerturbation);
    EXPECT_AGENTEDIT_ERROR(generate_preference_pair(s_plain, BoundaryCategory::TaskRouting, "add_object"),
                           ErrorCode::DegenerateRejection);
    EXPECT_AGENTEDIT_ERROR(generate_preference_pair(s_plain, BoundaryCategory::ConstraintLosingRewrite, "Add a cat."),
                           ErrorCode::DegenerateRejection);
}

TEST(CombinedFilter, ExhaustiveTruthTable)
{
    const std::vector<std::pair<std::string, EditCategory>> cats{{"style", EditCategory::StyleTransfer},
                                                                  {"scene", EditCategory::GlobalSceneChange},
                                                                  {"local", EditCategory::LocalEdit}};
    const std::vector<std::optional<std::string>> objects{std::nullopt, "cup", "dog"};
    int kept = 0, total = 0;
    for (const auto& [na, ca] : cats) {
        for (const auto& [nb, cb] : cats) {
            for (const auto& oa : objects) {
                for (const auto& ob : objects) {
                    // oracle: category clash first, then shared target
                    std::string reason;
                    if (na == "style" && nb == "style") reason = "both_style";
                    else if (na == "scene" && nb == "scene") reason = "both_global_scene";
                    else if (oa.has_value() && ob.has_value() && *oa == *ob) reason = "same_object";
                    const auto d = filter_combined_task_candidates({ca, oa}, {cb, ob});
                    EXPECT_EQ(d.keep, reason.empty()) << na << "/" << nb;
                    EXPECT_EQ(d.reason, reason);
                    // symmetric in its arguments
                    EXPECT_EQ(filter_combined_task_candidates({cb, ob}, {ca, oa}), d);
                    kept += d.keep;
                    ++total;
                }
            }
        }
    }
    EXPECT_EQ(total, 81);
    // 7 category pairs without a clash, each keeps 9 - 2 same-object combinations
    EXPECT_EQ(kept, 7 * 7);
}

TEST(Curation, VerdictFixtures)
{
    const auto rows = testing_support::read_jsonl(fixture("curation_verdicts.jsonl"));
    ASSERT_EQ(rows.size(), 9u);
    for (const auto& row : rows) {
        const auto& expect = row.at("expect");
        if (expect.contains("error")) {
            try {
                build_record("curation", row);
                ADD_FAILURE() << row.at("id") << " should fail";
            } catch (const Error& e) {
                EXPECT_EQ(std::string(e.name()), expect.at("error").get<std::string>()) << row.at("id");
            }
            continue;
        }
        const auto out = build_record("curation", row);
        EXPECT_EQ(out.at("decision").get<std::string>(), expect.at("decision").get<std::string>()) << row.at("id");
        if (expect.contains("instruction")) EXPECT_EQ(out.at("instruction").get<std::string>(), expect.at("instruction").get<std::string>()) << row.at("id");
        else EXPECT_FALSE(out.contains("instruction"));
    }
}

TEST(BuildRecord, UnknownKindAndMalformedInput)
{
    EXPECT_AGENTEDIT_ERROR(build_record("bogus", nlohmann::json::object()), ErrorCode::UnknownSubcommand);
    EXPECT_AGENTEDIT_ERROR(build_record("selection", nlohmann::json::object()), ErrorCode::MalformedDocument);
}
