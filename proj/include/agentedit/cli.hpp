#pragma once

#include "agentedit/bench_runner.hpp"
#include "agentedit/dataset_builder.hpp"
#include "agentedit/error.hpp"
#include "agentedit/runtime.hpp"
#include "agentedit/selftest.hpp"
#include "agentedit/training_objectives.hpp"

#include "CLI11.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace agentedit::cli {

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) fail(ErrorCode::IoError, "cannot read " + file.string());
    std::vector<nlohmann::json> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorCode::MalformedDocument, file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

inline std::ofstream open_out(const std::filesystem::path& file)
{
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
    return out;
}

struct EndpointFlags {
    std::string config;
    std::string mock;

    RuntimeConfig resolve() const
    {
        if (config.empty() && mock.empty()) fail(ErrorCode::ConfigMissing, "pass --config or --mock");
        RuntimeConfig cfg;
        if (!config.empty()) cfg = load_config(config);
        if (!mock.empty()) cfg = overlay(std::move(cfg), mock_config(mock));
        return cfg;
    }
};

inline void add_endpoint_flags(CLI::App* cmd, EndpointFlags& f)
{
    cmd->add_option("--config", f.config, "endpoint configuration file");
    cmd->add_option("--mock", f.mock, "directory of mock fixtures, binds every role");
}

inline int cmd_plan(const std::string& in_path, const std::string& request_path, bool mask_any_task, std::ostream& out)
{
    const auto doc = mock::load_json_file(in_path);
    EditPlan plan;
    EditRequest request;
    request.source_video.path = "unspecified";
    request.raw_instruction = "unspecified";
    if (doc.is_object() && doc.contains("plan")) {
        plan = plan_from_json(doc.at("plan"));
        if (doc.contains("request")) request = request_from_json(doc.at("request"));
    } else {
        plan = plan_from_json(doc);
    }
    if (!request_path.empty()) request = request_from_json(mock::load_json_file(request_path));

    ValidationOptions opts;
    opts.mask_requires_removal = !mask_any_task;
    const auto report = validate_plan(plan, request, opts);
    nlohmann::ordered_json result{{"plan", plan_to_json(plan)}, {"canonical", serialize_edit_plan(plan)},
                                  {"validation", report_to_json(report)}};
    out << result.dump(2) << "\n";
    if (!report.valid) fail(ErrorCode::PlanInvalid, report.violations.front().rule + ": " + report.violations.front().reason);
    return 0;
}

struct RunFlags {
    std::string request;
    std::string benchmark;
    std::string out;
    EndpointFlags endpoints;
    bool judge = false;
    std::string edit_type;
    std::string target_entity;
    std::string edit_region;
    bool mask_any_task = false;
};

inline int cmd_run(const RunFlags& f, std::ostream& out)
{
    const auto cfg = f.endpoints.resolve();
    if (f.judge && !cfg.bound(Role::Judge)) fail(ErrorCode::ConfigMissing, "--judge needs a judge endpoint");
    EndpointRegistry registry(cfg);
    const auto request = request_from_json(mock::load_json_file(f.request));

    PipelineOptions opts;
    opts.tools.mask_requires_removal = !f.mask_any_task;
    if (!f.out.empty()) opts.out_dir = f.out;
    std::optional<std::string> bench_id;
    if (!f.benchmark.empty()) bench_id = f.benchmark;
    const auto rec = run_pipeline(request, bench_id, registry, opts);

    auto doc = record_to_json(rec);
    if (f.judge) {
        bench::BenchCase c;
        c.case_id = rec.run_id;
        c.edit_type = f.edit_type.empty() ? bench::EditType::Reasoning : bench::parse_edit_type(f.edit_type);
        c.prompt = request.raw_instruction;
        if (!f.target_entity.empty()) c.target_entity = f.target_entity;
        if (!f.edit_region.empty()) c.edit_region = f.edit_region;
        c.source_video = request.source_video;
        c.edited_video = *rec.edited_video;
        DefaultFrameSource frames;
        const auto judged = bench::judge_case(c, *registry.chat(Role::Judge), frames);
        doc["judgement"] = bench::judgement_to_json(judged);
    }
    out << doc.dump(2) << "\n";
    return 0;
}

struct BenchScoreFlags {
    std::string manifest;
    EndpointFlags endpoints;
    std::size_t parallel = 1;
    std::string out;
};

inline int cmd_bench_score(const BenchScoreFlags& f, std::ostream& out)
{
    const auto cfg = f.endpoints.resolve();
    if (!cfg.bound(Role::Judge)) fail(ErrorCode::ConfigMissing, "bench score needs a judge endpoint");
    EndpointRegistry registry(cfg);
    std::vector<bench::BenchCase> cases;
    for (const auto& row : read_jsonl(f.manifest)) cases.push_back(bench::case_from_json(row));

    DefaultFrameSource frames;
    bench::JudgeOptions jopts;
    jopts.parallel = f.parallel;
    const auto judged = bench::judge_manifest(cases, *registry.chat(Role::Judge), frames, jopts);
    const auto report = bench::report_from_judgements(judged);
    const auto report_doc = bench::report_to_json(report);

    if (!f.out.empty()) {
        const std::filesystem::path dir = f.out;
        auto scores = open_out(dir / "scores.jsonl");
        for (const auto& j : judged) scores << bench::judgement_to_json(j).dump() << "\n";
        open_out(dir / "report.json") << report_doc.dump(2) << "\n";
    }
    out << report_doc.dump(2) << "\n";
    return 0;
}

inline int cmd_bench_report(const std::string& scores_path, std::ostream& out)
{
    std::vector<bench::ScoredCase> scored;
    for (const auto& row : read_jsonl(scores_path)) scored.push_back(bench::scored_case_from_json(row));
    out << bench::report_to_json(bench::aggregate_benchmark(std::move(scored))).dump(2) << "\n";
    return 0;
}

inline int cmd_dataset_build(const std::string& kind, const std::string& in_path, const std::string& out_path,
                             std::size_t parallel, std::ostream& out)
{
    const auto rows = read_jsonl(in_path);
    const auto records = parallel_map<nlohmann::ordered_json>(rows.size(), parallel, [&](std::size_t i) {
        try {
            return dataset::build_record(kind, rows[i]);
        } catch (const Error& e) {
            throw Error(e.code(), "record " + std::to_string(i + 1) + ": " + e.message());
        }
    });
    if (!out_path.empty()) {
        auto file = open_out(out_path);
        for (const auto& r : records) file << r.dump() << "\n";
    } else {
        for (const auto& r : records) out << r.dump() << "\n";
    }
    if (!out_path.empty()) out << nlohmann::ordered_json{{"kind", kind}, {"records", records.size()}}.dump() << "\n";
    return 0;
}

struct ScorePairsFlags {
    std::string in;
    EndpointFlags endpoints;
    std::string policy_model = "policy";
    std::string reference_model = "reference";
    double beta = 0.1;
};

// Scores preference records with the scorer endpoint and reports the mean DPO loss.
inline int cmd_dataset_score_pairs(const ScorePairsFlags& f, std::ostream& out)
{
    const auto cfg = f.endpoints.resolve();
    if (!cfg.bound(Role::Scorer)) fail(ErrorCode::ConfigMissing, "score-pairs needs a scorer endpoint");
    EndpointRegistry registry(cfg);
    auto* scorer = registry.scorer();

    std::vector<objectives::PlanLogProbs> pairs;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : read_jsonl(f.in)) {
        const auto context = row.at("context").dump();
        const auto chosen = serialize_edit_plan(plan_from_json(row.at("chosen")));
        const auto rejected = serialize_edit_plan(plan_from_json(row.at("rejected")));
        auto seq = [&](const std::string& model, const std::string& plan) {
            const auto lp = scorer->token_logprobs(model, context, plan);
            return -objectives::sft_nll(lp);
        };
        objectives::PlanLogProbs lp{seq(f.policy_model, chosen), seq(f.policy_model, rejected),
                                    seq(f.reference_model, chosen), seq(f.reference_model, rejected)};
        const objectives::DpoConfig dcfg{f.beta};
        rows.push_back({{"category", row.value("category", "")},
                        {"margin", objectives::dpo_margin(lp, dcfg)},
                        {"loss", objectives::dpo_loss(lp, dcfg)}});
        pairs.push_back(lp);
    }
    nlohmann::ordered_json doc{{"pairs", rows}, {"mean_loss", objectives::dpo_loss_mean(pairs, {f.beta})}};
    out << doc.dump(2) << "\n";
    return 0;
}

inline int cmd_kernels_selftest(std::ostream& out)
{
    int failed = 0;
    for (const auto& r : selftest::all_checks()) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << (r.passed ? "" : ": " + r.detail) << "\n";
        if (!r.passed) ++failed;
    }
    if (failed) fail(ErrorCode::InvalidConfig, std::to_string(failed) + " property checks failed");
    return 0;
}

inline const std::map<std::string, std::set<std::string>>& command_table()
{
    static const std::map<std::string, std::set<std::string>> table{
        {"plan", {}},
        {"run", {}},
        {"bench", {"score", "report"}},
        {"dataset", {"build", "score-pairs"}},
        {"kernels", {"selftest"}},
    };
    return table;
}

// Rejects unknown command words before flag parsing so the error is typed.
inline void check_command_words(int argc, const char* const* argv)
{
    if (argc < 2) fail(ErrorCode::UnknownSubcommand, "no subcommand given");
    const std::string first = argv[1];
    if (first == "-h" || first == "--help") return;
    const auto it = command_table().find(first);
    if (it == command_table().end()) fail(ErrorCode::UnknownSubcommand, "unknown subcommand " + first);
    if (it->second.empty()) return;
    if (argc < 3) fail(ErrorCode::UnknownSubcommand, first + " needs one of its subcommands");
    const std::string second = argv[2];
    if (second == "-h" || second == "--help") return;
    if (!it->second.contains(second)) fail(ErrorCode::UnknownSubcommand, "unknown subcommand " + first + " " + second);
}

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"agentedit: condition construction and evaluation for agentic video editing"};
    app.require_subcommand(1);

    std::string plan_in, plan_request;
    bool plan_mask_any = false;
    auto* plan = app.add_subcommand("plan", "parse and validate an edit plan document");
    plan->add_option("--in", plan_in, "plan JSON, or {plan, request}")->required();
    plan->add_option("--request", plan_request, "request JSON used for validation context");
    plan->add_flag("--allow-mask-any-task", plan_mask_any, "accept mask phrases outside removal tasks");

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "plan, build conditions and call the editor for one request");
    run->add_option("--request", run_flags.request, "request JSON")->required();
    run->add_option("--benchmark", run_flags.benchmark, "benchmark preset: agentedit, editverse, openve");
    run->add_option("--out", run_flags.out, "directory for run records");
    add_endpoint_flags(run, run_flags.endpoints);
    run->add_flag("--judge", run_flags.judge, "score the edited clip with the judge endpoint");
    run->add_option("--edit-type", run_flags.edit_type, "bench edit type used with --judge");
    run->add_option("--target-entity", run_flags.target_entity);
    run->add_option("--edit-region", run_flags.edit_region);
    run->add_flag("--allow-mask-any-task", run_flags.mask_any_task);

    auto* bench = app.add_subcommand("bench", "judge-based benchmark scoring");
    bench->require_subcommand(1);
    BenchScoreFlags score_flags;
    auto* score = bench->add_subcommand("score", "judge every case of a manifest and aggregate");
    score->add_option("--manifest", score_flags.manifest, "line-delimited bench cases")->required();
    add_endpoint_flags(score, score_flags.endpoints);
    score->add_option("--parallel", score_flags.parallel, "worker bound")->check(CLI::PositiveNumber);
    score->add_option("--out", score_flags.out, "directory for scores.jsonl and report.json");
    std::string report_scores;
    auto* report = bench->add_subcommand("report", "re-aggregate persisted scores");
    report->add_option("--scores", report_scores, "scores.jsonl from bench score")->required();

    auto* dataset = app.add_subcommand("dataset", "training-record builders");
    dataset->require_subcommand(1);
    std::string ds_kind, ds_in, ds_out;
    std::size_t ds_parallel = 1;
    auto* build = dataset->add_subcommand("build", "build records from line-delimited inputs");
    build->add_option("--kind", ds_kind, "planning, selection, preference, combined_filter, curation")->required();
    build->add_option("--in", ds_in, "input .jsonl")->required();
    build->add_option("--out", ds_out, "output .jsonl (stdout when omitted)");
    build->add_option("--parallel", ds_parallel, "worker bound")->check(CLI::PositiveNumber);
    ScorePairsFlags sp_flags;
    auto* score_pairs = dataset->add_subcommand("score-pairs", "DPO loss of preference records via the scorer");
    score_pairs->add_option("--in", sp_flags.in, "preference records .jsonl")->required();
    add_endpoint_flags(score_pairs, sp_flags.endpoints);
    score_pairs->add_option("--policy-model", sp_flags.policy_model);
    score_pairs->add_option("--reference-model", sp_flags.reference_model);
    score_pairs->add_option("--beta", sp_flags.beta);

    auto* kernels = app.add_subcommand("kernels", "numeric kernels");
    kernels->require_subcommand(1);
    auto* selftest = kernels->add_subcommand("selftest", "run the randomized property suites");

    try {
        check_command_words(argc, argv);
        app.parse(argc, argv);
        if (*plan) return cmd_plan(plan_in, plan_request, plan_mask_any, out);
        if (*run) return cmd_run(run_flags, out);
        if (*score) return cmd_bench_score(score_flags, out);
        if (*report) return cmd_bench_report(report_scores, out);
        if (*build) return cmd_dataset_build(ds_kind, ds_in, ds_out, ds_parallel, out);
        if (*score_pairs) return cmd_dataset_score_pairs(sp_flags, out);
        if (*selftest) return cmd_kernels_selftest(out);
        fail(ErrorCode::UnknownSubcommand, "no subcommand given");
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "error: InvalidRequest: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: Internal: " << e.what() << "\n";
        return 1;
    }
}

} // namespace agentedit::cli
