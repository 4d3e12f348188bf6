// SPDX-License-Identifier: Apache-2.0
//
// fusewire CLI: run samples through the evidence-fusion pipeline, batch over
// manifests, replay and ablate recorded runs, and print the analytics tables.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fusewire/backends_http.hpp"
#include "fusewire/fusewire.hpp"

namespace fs = std::filesystem;
using namespace fusewire;

namespace {

struct OwnedBackends {
    std::unique_ptr<ChatClient> source_a;
    std::unique_ptr<ChatClient> source_b;
    std::unique_ptr<ChatClient> reasoner;
    std::unique_ptr<ToolClient> tools;

    PipelineBackends view() const {
        return {source_a.get(), source_b.get(), reasoner.get(), tools.get()};
    }
};

std::unique_ptr<ChatClient> chat_client_for(const BackendProfile& profile) {
    if (profile.kind != BackendKind::Replay) return make_chat_client(profile);
    std::vector<ChatExchange> log;
    for (const auto& record : read_records(profile.fixture_path))
        for (const auto& e : record.chat_log) log.push_back(e);
    return std::make_unique<ReplayChatClient>(std::move(log));
}

std::unique_ptr<ToolClient> tool_client_for(const BackendProfile& profile) {
    if (profile.kind != BackendKind::Replay) return make_tool_client(profile);
    std::vector<ToolResult> log;
    for (const auto& record : read_records(profile.fixture_path))
        for (const auto& r : record.tool_results) log.push_back(r);
    return std::make_unique<ReplayToolClient>(std::move(log));
}

OwnedBackends build_backends(const RunConfig& config) {
    OwnedBackends b;
    b.source_a = chat_client_for(config.profiles.at("source_a"));
    b.source_b = chat_client_for(config.profiles.at("source_b"));
    b.reasoner = chat_client_for(config.profiles.at("reasoner"));
    b.tools = tool_client_for(config.profiles.at("tools"));
    return b;
}

void write_json_file(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void print_band_table(const std::string& title, const std::vector<BandStat>& bands) {
    std::printf("%s\n", title.c_str());
    std::printf("  %-12s %8s %8s %9s\n", "band", "N", "correct", "accuracy");
    for (const auto& b : bands)
        std::printf("  %-12s %8zu %8zu %8.1f%%\n", b.label.c_str(), b.n, b.correct,
                    100.0 * b.accuracy());
    std::printf("\n");
}

void write_band_csv(const fs::path& path, const std::vector<BandStat>& bands) {
    std::ofstream out(path);
    out << "band,n,correct,accuracy\n";
    for (const auto& b : bands)
        out << b.label << "," << b.n << "," << b.correct << "," << text::round4(b.accuracy())
            << "\n";
}

int cmd_run(const RunConfig& config, const SampleSpec& sample) {
    config.validate();
    auto backends = build_backends(config);
    PipelineRecord record = run_sample(sample, config, backends.view());

    fs::create_directories(config.out_dir);
    fs::path record_path = fs::path(config.out_dir) / (sample.id + ".record.json");
    fs::path answer_path = fs::path(config.out_dir) / (sample.id + ".answer.json");
    write_json_file(record_path, json(record));
    write_json_file(answer_path, final_output_json(record));

    std::printf("sample %s: %s (confidence %.2f)\n", sample.id.c_str(),
                record.decision.chosen.c_str(), record.decision.confidence);
    for (const auto& section : record.reasoning.sections)
        std::printf("## %s\n%s\n", section.title.c_str(), section.body.c_str());
    std::printf("completeness: %s\n", record.completeness.pass ? "pass" : "incomplete");
    std::printf("wrote %s\n", record_path.string().c_str());
    return 0;
}

int cmd_batch(const RunConfig& config, const std::string& manifest_path) {
    config.validate();
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open manifest: " + manifest_path);
    std::vector<SampleSpec> samples;
    std::string line;
    size_t line_number = 0, bad_lines = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            std::fprintf(stderr, "warning: manifest line %zu is not valid JSON, skipped\n",
                         line_number);
            ++bad_lines;
            continue;
        }
        try {
            samples.push_back(j.get<SampleSpec>());
        } catch (const std::exception& e) {
            std::fprintf(stderr, "warning: manifest line %zu: %s\n", line_number, e.what());
            ++bad_lines;
        }
    }

    std::vector<PipelineRecord> records(samples.size());
    std::vector<std::string> failures(samples.size());
    size_t next = 0;
    int workers = std::max(1, config.workers);
    while (next < samples.size()) {
        std::vector<std::future<void>> batch;
        for (int w = 0; w < workers && next < samples.size(); ++w, ++next) {
            size_t idx = next;
            batch.push_back(std::async(std::launch::async, [&, idx] {
                try {
                    auto backends = build_backends(config);
                    records[idx] = run_sample(samples[idx], config, backends.view());
                } catch (const std::exception& e) {
                    failures[idx] = e.what();
                }
            }));
        }
        for (auto& f : batch) f.get();
    }

    fs::create_directories(config.out_dir);
    fs::path records_path = fs::path(config.out_dir) / "records.jsonl";
    std::ofstream records_out(records_path);
    size_t ok = 0, correct = 0, with_gold = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (!failures[i].empty()) {
            std::fprintf(stderr, "warning: sample %s failed: %s\n", samples[i].id.c_str(),
                         failures[i].c_str());
            continue;
        }
        append_record(records_out, records[i]);
        ++ok;
        if (records[i].correct_choice) {
            ++with_gold;
            if (record_correct(records[i])) ++correct;
        }
    }

    json summary = {{"samples", samples.size()},
                    {"completed", ok},
                    {"manifest_lines_skipped", bad_lines},
                    {"records_file", records_path.string()}};
    if (with_gold > 0) {
        summary["with_gold"] = with_gold;
        summary["correct"] = correct;
        summary["accuracy"] = text::round4(static_cast<double>(correct) / with_gold);
    }
    write_json_file(fs::path(config.out_dir) / "summary.json", summary);
    std::printf("%s\n", summary.dump(2).c_str());
    return 0;
}

int cmd_analyze(const std::string& records_path, const std::string& csv_dir) {
    std::vector<ReadWarning> warnings;
    auto records = read_records(records_path, &warnings);
    for (const auto& w : warnings)
        std::fprintf(stderr, "warning: line %zu skipped: %s\n", w.line_number, w.message.c_str());

    auto agreement = stratify_agreement(records);
    auto calibration = calibration_buckets(records);
    auto corroboration = corroboration_stats(records);
    auto overrides = override_rate(records);

    print_band_table("Accuracy by source agreement level", agreement);
    print_band_table("Accuracy by decision confidence", calibration);
    print_band_table("Accuracy by corroborated-item count", corroboration);
    std::printf("Tool-evidence overrides\n");
    std::printf("  overridden %zu / %zu = %.1f%%  (%zu records lacked predictions)\n\n",
                overrides.n_overridden, overrides.n_with_predictions,
                100.0 * overrides.fraction(), overrides.n_excluded);

    if (!csv_dir.empty()) {
        fs::create_directories(csv_dir);
        write_band_csv(fs::path(csv_dir) / "agreement.csv", agreement);
        write_band_csv(fs::path(csv_dir) / "calibration.csv", calibration);
        write_band_csv(fs::path(csv_dir) / "corroboration.csv", corroboration);
        std::ofstream out(fs::path(csv_dir) / "override.csv");
        out << "n_overridden,n_with_predictions,fraction\n";
        out << overrides.n_overridden << "," << overrides.n_with_predictions << ","
            << text::round4(overrides.fraction()) << "\n";
        std::printf("csv written to %s\n", csv_dir.c_str());
    }
    return 0;
}

int cmd_replay(const std::string& records_path, const std::string& filter_name) {
    auto records = read_records(records_path);
    EvidenceFilter filter = evidence_filter_from_string(filter_name);
    ScoringConfig scoring = ScoringConfig::defaults();
    RecordingChat no_backend{};

    size_t n = 0, correct = 0, flipped = 0;
    for (const auto& record : records) {
        auto decision = replay_decision(record, filter, no_backend, scoring);
        if (!decision) continue;
        ++n;
        if (decision->chosen != record.decision.chosen) ++flipped;
        if (record.correct_choice && decision->chosen == *record.correct_choice) ++correct;
    }
    json summary = {{"filter", to_string(filter)},
                    {"replayed", n},
                    {"accuracy", n ? text::round4(static_cast<double>(correct) / n) : 0.0},
                    {"changed_vs_recorded", flipped}};
    std::printf("%s\n", summary.dump(2).c_str());
    return 0;
}

int cmd_ablate(const std::string& records_path, const std::string& filter_name, double alpha,
               const std::string& out_path) {
    auto records = read_records(records_path);
    ScoringConfig scoring = ScoringConfig::defaults();
    RecordingChat no_backend{};

    std::vector<EvidenceFilter> filters;
    if (filter_name == "family" || filter_name.empty()) {
        filters = {EvidenceFilter::SourceAOnly, EvidenceFilter::SourceBOnly};
    } else {
        filters = {evidence_filter_from_string(filter_name)};
    }
    auto results = run_ablation_family(records, filters, no_backend, scoring, alpha);

    json out = json::array();
    for (const auto& r : results) out.push_back(r);
    if (!out_path.empty()) write_json_file(out_path, out);

    std::printf("| Configuration | Acc. | Delta | N_d | p | significant |\n");
    std::printf("|---|---|---|---|---|---|\n");
    bool first = true;
    for (const auto& r : results) {
        if (first) {
            std::printf("| baseline replay | %.1f%% | --- | --- | --- | --- |\n",
                        100.0 * r.baseline_accuracy);
            first = false;
        }
        std::printf("| %s | %.1f%% | %+.1f | %d | %s | %s |\n", r.label.c_str(),
                    100.0 * r.accuracy, r.delta_pp, r.discordant(),
                    r.p_value < 0.001 ? "<.001" : [&] {
                        char buf[32];
                        std::snprintf(buf, sizeof buf, "%.3f", r.p_value);
                        return std::string(buf);
                    }().c_str(),
                    r.significant ? "yes" : "no");
    }
    if (!out_path.empty()) std::printf("json written to %s\n", out_path.c_str());
    return 0;
}

int cmd_tools(const std::string& catalog_path, const std::string& content_name) {
    ToolCatalog catalog = build_default_catalog();
    if (!catalog_path.empty()) {
        std::ifstream in(catalog_path);
        if (!in) throw ConfigError("cannot open catalog file: " + catalog_path);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ConfigError("catalog file is not valid JSON");
        catalog = j.get<ToolCatalog>();
    }
    auto report = validate_catalog(catalog);
    if (!report.valid()) {
        for (const auto& v : report.violations)
            std::fprintf(stderr, "catalog violation: %s\n", v.c_str());
        throw ConfigError("catalog invalid");
    }
    ContentType content = content_from_string(content_name);
    for (auto step : {VerificationStep::Step1, VerificationStep::Step2}) {
        auto specs = tools_for_step(catalog, step, content);
        std::printf("Step %d (%s content): %zu tools\n", step == VerificationStep::Step1 ? 1 : 2,
                    content_name.c_str(), specs.size());
        for (const auto& s : specs)
            std::printf("  %-32s %-13s %-13s%s%s\n", s.name.c_str(), to_string(s.tier),
                        to_string(s.scope), s.music_only ? " music-only" : "",
                        s.interpreted ? " interpreted" : "");
    }
    std::printf("catalog total: %zu tools\n", catalog.specs.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fusewire: reliability-tiered evidence fusion for audio reasoning"};
    app.require_subcommand(1);

    std::string config_path, out_dir, content_override;
    uint64_t seed = 0;
    int workers = 0;
    app.add_option("--config", config_path, "run configuration JSON");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "sampling seed recorded in requests");
    app.add_option("--content-override", content_override,
                   "force content type: speech|music|mixed|environmental");
    app.add_option("--workers", workers, "batch worker pool size");

    auto* run = app.add_subcommand("run", "run one sample through the pipeline");
    SampleSpec sample;
    run->add_option("--id", sample.id, "sample id")->default_val("sample");
    run->add_option("--audio", sample.audio, "audio URI")->required();
    run->add_option("--question", sample.question, "question text")->required();
    run->add_option("--choice", sample.choices, "answer choice (repeat per option)")
        ->required()
        ->expected(-2);
    run->add_option("--duration", sample.duration_s, "audio duration in seconds");
    run->add_option("--answer", sample.answer, "gold answer label, when known");

    auto* batch = app.add_subcommand("batch", "run a JSONL manifest of samples");
    std::string manifest_path;
    batch->add_option("--manifest", manifest_path, "JSONL manifest")->required();

    auto* replay = app.add_subcommand("replay", "re-run argumentation from records");
    std::string records_path, filter_name = "both";
    replay->add_option("--records", records_path, "records JSONL")->required();
    replay->add_option("--filter", filter_name, "both|source-a|source-b");

    auto* ablate = app.add_subcommand("ablate", "argumentation-level replay ablation");
    std::string ablate_records, ablate_filter = "family", ablate_out;
    double alpha = 0.05;
    ablate->add_option("--records", ablate_records, "records JSONL")->required();
    ablate->add_option("--filter", ablate_filter, "family|source-a|source-b");
    ablate->add_option("--alpha", alpha, "family-wise significance level");
    ablate->add_option("--json", ablate_out, "write results JSON here");

    auto* analyze = app.add_subcommand("analyze", "print the analytics tables");
    std::string analyze_records, csv_dir;
    analyze->add_option("--records", analyze_records, "records JSONL")->required();
    analyze->add_option("--csv", csv_dir, "also write CSV tables to this directory");

    auto* tools_cmd = app.add_subcommand("tools", "tool catalog commands");
    auto* tools_list = tools_cmd->add_subcommand("list", "print the step catalogs");
    std::string catalog_path, content_name = "speech";
    tools_list->add_option("--catalog", catalog_path, "catalog JSON file (default built-in)");
    tools_list->add_option("--content", content_name, "speech|music|mixed|environmental");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config;
        if (!config_path.empty()) config = load_config(config_path);
        else apply_env_overrides(config);
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (seed != 0) config.seed = seed;
        if (workers != 0) config.workers = workers;
        if (!content_override.empty())
            config.content_override = content_from_string(content_override);

        if (run->parsed()) return cmd_run(config, sample);
        if (batch->parsed()) return cmd_batch(config, manifest_path);
        if (replay->parsed()) return cmd_replay(records_path, filter_name);
        if (ablate->parsed()) return cmd_ablate(ablate_records, ablate_filter, alpha, ablate_out);
        if (analyze->parsed()) return cmd_analyze(analyze_records, csv_dir);
        if (tools_cmd->parsed() && tools_list->parsed()) return cmd_tools(catalog_path, content_name);
        std::fprintf(stderr, "no subcommand\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "pipeline error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
