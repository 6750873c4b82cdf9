// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// almlab: desk-scale audio-language-model laboratory.
//
//   synth               generate a synthetic audio-QA manifest
//   train               fine-tune a model on one or more manifests
//   generate            answer one prompt about one audio clip
//   eval-mc             multiple-choice evaluation with the content-checking scorer
//   eval-chat           judged open-ended evaluation (stub or HTTP judge)
//   ablate              one-dimension-at-a-time ablation grid with a delta table
//   inspect-checkpoint  dump checkpoint header and tensor table
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure, 5 external
// service failure. Failures print a single machine-parseable line:
//   error: <category>: <message>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "almlab/ablate.hpp"
#include "almlab/checkpoint.hpp"
#include "almlab/harness.hpp"
#include "almlab/judge_http.hpp"
#include "almlab/runcfg.hpp"
#include "almlab/synth.hpp"
#include "almlab/train.hpp"

namespace {

using namespace alm;

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

void fail_line(const char* category, const std::string& message) {
    std::cerr << "error: " << category << ": " << one_line(message) << "\n";
}

struct CommonArgs {
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::vector<std::string> overrides;
};

RunConfig load_run_config(const std::string& config_path, const CommonArgs& common) {
    nlohmann::json j =
        config_path.empty() ? nlohmann::json::object() : load_json_file(config_path);
    for (const auto& assignment : common.overrides) apply_override(j, assignment);
    RunConfig cfg = RunConfig::from_json(j);
    if (common.seed_given) {
        cfg.seed = common.seed;
        cfg.train.seed = common.seed;
        cfg.generate.seed = common.seed;
    }
    return cfg;
}

std::vector<Sample> load_manifests(const std::vector<std::string>& paths) {
    if (paths.empty()) throw UsageError("no manifest given");
    std::vector<Sample> all;
    std::set<std::string> ids;
    for (const auto& path : paths) {
        for (auto& s : load_manifest(path)) {
            if (!ids.insert(s.id).second)
                throw DataError("duplicate sample id across manifests: " + s.id);
            all.push_back(std::move(s));
        }
    }
    if (all.empty()) throw DataError("manifests contain no samples");
    return all;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path);
    os << dump_json(j, 2) << "\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const std::string& spec_path, const CommonArgs& common, bool emit_wav) {
    nlohmann::json spec_json =
        spec_path.empty() ? nlohmann::json::object() : load_json_file(spec_path);
    for (const auto& assignment : common.overrides) apply_override(spec_json, assignment);
    SynthSpec spec = SynthSpec::from_json(spec_json);

    RunLock lock(common.out_dir);
    std::vector<Sample> samples = synth_dataset(spec, common.seed);
    if (emit_wav) {
        std::string wav_dir = common.out_dir + "/wav";
        std::filesystem::create_directories(wav_dir);
        for (auto& s : samples) {
            AudioInput audio = render_audio_spec(s.audio);
            std::string rel = "wav/" + s.id + ".wav";
            write_wav(common.out_dir + "/" + rel, audio);
            s.audio = rel;
        }
    }
    save_manifest(samples, common.out_dir + "/manifest.jsonl");
    nlohmann::json resolved = {{"command", "synth"},
                               {"spec", spec.to_json()},
                               {"seed", common.seed},
                               {"wav", emit_wav}};
    write_resolved_config(resolved, common.out_dir);
    std::cout << "wrote " << samples.size() << " samples to " << common.out_dir
              << "/manifest.jsonl\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const CommonArgs& common,
              std::vector<std::string> manifests) {
    RunConfig cfg = load_run_config(config_path, common);
    if (manifests.empty()) manifests = cfg.train_manifests;
    std::vector<Sample> data = load_manifests(manifests);

    RunLock lock(common.out_dir);
    nlohmann::json resolved = cfg.to_json();
    resolved["train_manifests"] = manifests;
    write_resolved_config(resolved, common.out_dir);

    ModelBundle<float> bundle = cfg.build_bundle<float>();
    TrainIo io;
    io.checkpoint_path = common.out_dir + "/checkpoint.bin";
    io.losses_csv_path = common.out_dir + "/losses.csv";
    TrainResult<float> result = train_run(cfg.train, data, bundle, cfg.data, io);
    double final_loss = result.curve.empty() ? 0.0 : result.curve.back().loss;
    std::cout << "trained " << result.final_step << " steps; final loss " << final_loss << "; "
              << io.checkpoint_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int cmd_generate(const std::string& checkpoint_path, const std::string& wav_path,
                 const std::string& audio_spec_text, std::string prompt,
                 const std::string& system_text, GenerationConfig gen, const CommonArgs& common,
                 double audio_seconds) {
    if (common.seed_given) gen.seed = common.seed;
    LoadedCheckpoint<float> loaded = load_checkpoint<float>(checkpoint_path);

    Sample sample;
    sample.id = "cli";
    if (!wav_path.empty())
        sample.audio = wav_path;
    else if (!audio_spec_text.empty())
        sample.audio = nlohmann::json::parse(audio_spec_text, nullptr, false);
    else
        throw UsageError("generate needs --audio or --audio-spec");
    if (sample.audio.is_discarded()) throw UsageError("--audio-spec is not valid JSON");
    if (count_placeholders(prompt) == 0) prompt = std::string(kAudioPlaceholder) + "\n" + prompt;
    sample.prompt = prompt;
    sample.completion = "-";  // unused in generation rendering
    sample.domain = "sound";

    CollateConfig ccfg;
    ccfg.audio_max_seconds = audio_seconds;
    ccfg.n_mels = loaded.bundle.enc_cfg.n_mels;
    ccfg.system_text = system_text;
    std::cout << generate_response(loaded.bundle, sample, gen, ccfg) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval-mc
// ---------------------------------------------------------------------------

void print_accuracy(const AccuracyReport& report) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-10s %10s %10s %10s\n", "domain", "correct", "total",
                  "accuracy");
    std::cout << line;
    for (const auto& [name, stats] : report.per_domain) {
        std::snprintf(line, sizeof(line), "%-10s %10zu %10zu %9.2f%%\n", name.c_str(),
                      stats.correct, stats.total, stats.accuracy());
        std::cout << line;
    }
    std::snprintf(line, sizeof(line), "micro %.2f%%  macro %.2f%%\n", report.micro, report.macro);
    std::cout << line;
}

int cmd_eval_mc(const std::string& checkpoint_path, const std::string& manifest_path,
                const std::string& responses_path, const CommonArgs& common, GenerationConfig gen,
                double audio_seconds) {
    if (common.seed_given) gen.seed = common.seed;
    std::vector<Sample> samples = load_manifests({manifest_path});

    RunLock lock(common.out_dir);
    nlohmann::json report_json;
    AccuracyReport report;
    if (!responses_path.empty()) {
        auto responses = load_responses(responses_path);
        std::vector<std::pair<Verdict, std::string>> records;
        nlohmann::json items = nlohmann::json::array();
        for (const auto& s : samples) {
            if (!s.choices) continue;
            auto it = responses.find(s.id);
            if (it == responses.end()) throw DataError("no response for sample '" + s.id + "'");
            Verdict v = score_mc(it->second, McQuestion::from_sample(s));
            records.emplace_back(v, s.domain);
            items.push_back({{"id", s.id},
                             {"correct", v.outcome == Outcome::Correct},
                             {"reason", reason_name(v.reason)},
                             {"domain", s.domain}});
        }
        if (records.empty()) throw DataError("eval-mc: no multiple-choice samples");
        report = aggregate_accuracy(records);
        report_json = report.to_json();
        report_json["items"] = items;
    } else {
        if (checkpoint_path.empty())
            throw UsageError("eval-mc needs --checkpoint or --responses");
        LoadedCheckpoint<float> loaded = load_checkpoint<float>(checkpoint_path);
        CollateConfig ccfg;
        ccfg.audio_max_seconds = audio_seconds;
        ccfg.n_mels = loaded.bundle.enc_cfg.n_mels;
        McEvalResult<float> result = run_mc_eval(loaded.bundle, samples, gen, ccfg);
        report = result.report;
        report_json = result.to_json();
    }
    write_json_file(report_json, common.out_dir + "/report.json");
    write_resolved_config(nlohmann::json{{"command", "eval-mc"},
                                         {"manifest", manifest_path},
                                         {"generate", to_json(gen)},
                                         {"seed", common.seed}},
                          common.out_dir);
    print_accuracy(report);
    return 0;
}

// ---------------------------------------------------------------------------
// eval-chat
// ---------------------------------------------------------------------------

int cmd_eval_chat(const std::string& items_path, const std::string& responses_path,
                  const CommonArgs& common, bool use_stub, double stub_score,
                  const std::string& endpoint, const std::string& model, int trials,
                  int parallelism, const std::string& cache_dir, double temperature) {
    auto items = load_chat_items(items_path);
    auto responses = load_responses(responses_path);

    RunLock lock(common.out_dir);
    ChatEvalReport report;
    if (use_stub) {
        char text[32];
        std::snprintf(text, sizeof(text), "%g %g", stub_score, stub_score);
        StubJudgeClient stub(
            [reply = std::string(text)](const ChatRequest&) { return reply; });
        report = run_chat_eval(items, responses, stub, trials, parallelism, model, temperature);
    } else {
        if (endpoint.empty()) throw UsageError("eval-chat needs --endpoint or --stub");
        HttpJudgeConfig http_cfg;
        http_cfg.base_url = endpoint;
        http_cfg.cache_dir = cache_dir;
        HttpJudgeClient client(http_cfg);
        report = run_chat_eval(items, responses, client, trials, parallelism, model, temperature);
    }
    write_json_file(report.to_json(), common.out_dir + "/report.json");
    write_resolved_config(nlohmann::json{{"command", "eval-chat"},
                                         {"items", items_path},
                                         {"responses", responses_path},
                                         {"trials", trials},
                                         {"stub", use_stub},
                                         {"model", model},
                                         {"seed", common.seed}},
                          common.out_dir);
    std::cout << "median score " << report.median << " over " << trials << " trial(s)\n";
    for (const auto& [cat, med] : report.per_category_median)
        std::cout << "  " << cat << ": " << med << "\n";
    if (!report.failed_items.empty())
        std::cout << report.failed_items.size() << " item(s) flagged as judge failures\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

int cmd_ablate(const std::string& config_path, const CommonArgs& common,
               std::vector<std::string> grid_dims, std::string train_manifest,
               std::string eval_manifest) {
    RunConfig cfg = load_run_config(config_path, common);
    if (train_manifest.empty() && !cfg.train_manifests.empty())
        train_manifest = cfg.train_manifests.front();
    if (eval_manifest.empty()) eval_manifest = cfg.eval_manifest;
    if (train_manifest.empty() || eval_manifest.empty())
        throw UsageError("ablate needs --train-manifest and --eval-manifest (or config entries)");
    std::vector<Sample> train_data = load_manifests({train_manifest});
    std::vector<Sample> eval_data = load_manifests({eval_manifest});
    std::vector<AblateVariant> grid = parse_grid_args(grid_dims);

    RunLock lock(common.out_dir);
    write_resolved_config(cfg.to_json(), common.out_dir);
    AblateSummary summary = run_ablation<float>(
        cfg, grid, train_data, eval_data, common.out_dir,
        [](const std::string& name) { std::cout << "running " << name << "\n"; });
    write_json_file(summary.to_json(), common.out_dir + "/summary.json");
    std::string table = summary.to_table();
    std::ofstream(common.out_dir + "/summary.txt") << table;
    std::cout << table;
    return 0;
}

// ---------------------------------------------------------------------------
// inspect-checkpoint
// ---------------------------------------------------------------------------

int cmd_inspect(const std::string& checkpoint_path) {
    std::ifstream is(checkpoint_path, std::ios::binary);
    if (!is) throw DataError("cannot open " + checkpoint_path);
    nlohmann::json meta = read_checkpoint_meta(is);
    auto n_tensors = ckpt_detail::read_pod<std::uint64_t>(is);
    std::cout << "format_version: " << meta.value("format_version", 0) << "\n";
    std::cout << "step: " << meta.value("step", 0) << "\n";
    std::cout << "config:\n" << meta.dump(2) << "\n";
    std::cout << "tensors (" << n_tensors << "):\n";
    std::size_t total = 0;
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        auto [name, raw] = ckpt_detail::read_tensor(is);
        std::size_t numel = 1;
        std::string shape = "[";
        for (std::size_t d = 0; d < raw.shape.size(); ++d) {
            numel *= raw.shape[d];
            shape += (d ? "," : "") + std::to_string(raw.shape[d]);
        }
        shape += "]";
        if (name.rfind("optim.", 0) != 0) total += numel;
        char line[160];
        std::snprintf(line, sizeof(line), "  %-48s %-8s %-16s %zu\n", name.c_str(),
                      raw.dtype == 0 ? "f32" : "f64", shape.c_str(), numel);
        std::cout << line;
    }
    std::cout << "model parameters: " << total << "\n";
    return 0;
}

void add_generation_flags(CLI::App* cmd, GenerationConfig& gen) {
    cmd->add_option("--temperature", gen.temperature, "Sampling temperature (0 = greedy)");
    cmd->add_option("--top-p", gen.top_p, "Nucleus truncation mass");
    cmd->add_option("--top-k", gen.top_k, "Top-k truncation");
    cmd->add_option("--max-new-tokens", gen.max_new_tokens, "Generation length cap");
    cmd->add_option("--repetition-penalty", gen.repetition_penalty,
                    "Divide positive / multiply negative logits of generated tokens");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"almlab: desk-scale audio-language-model laboratory"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string config_path, spec_path, checkpoint_path, manifest_path, responses_path;
    std::string items_path, wav_path, audio_spec_text, prompt, system_text;
    std::string endpoint, model = "gpt-4-turbo", cache_dir, train_manifest, eval_manifest;
    std::vector<std::string> manifests, grid_dims;
    bool emit_wav = false, use_stub = false;
    double stub_score = 7.0, judge_temperature = 1.0, audio_seconds = 4.0;
    int trials = 3, parallelism = 4;
    GenerationConfig gen;

    auto add_common = [&](CLI::App* cmd, bool needs_out) {
        auto* out = cmd->add_option("--out", common.out_dir, "Run output directory");
        if (needs_out) out->required();
        cmd->add_option("--seed", common.seed, "Seed for all randomness (default 0)");
        cmd->add_option("--set", common.overrides,
                        "Override a config key: dotted.path=value (repeatable)");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic audio-QA manifest");
    synth->add_option("--spec", spec_path, "Synthesis spec JSON file");
    synth->add_flag("--wav", emit_wav, "Write WAV files instead of inline audio specs");
    add_common(synth, true);

    auto* train_cmd = app.add_subcommand("train", "Fine-tune on one or more manifests");
    train_cmd->add_option("--config", config_path, "Run config JSON file");
    train_cmd->add_option("--manifest", manifests, "Training manifest(s), repeatable");
    add_common(train_cmd, true);

    auto* generate_cmd = app.add_subcommand("generate", "Answer one prompt about one audio clip");
    generate_cmd->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
    generate_cmd->add_option("--audio", wav_path, "16 kHz mono WAV file");
    generate_cmd->add_option("--audio-spec", audio_spec_text, "Inline audio spec JSON");
    generate_cmd->add_option("--prompt", prompt, "Question text")->required();
    generate_cmd->add_option("--system", system_text, "System text");
    generate_cmd->add_option("--audio-seconds", audio_seconds, "Pad/trim audio to this length");
    add_generation_flags(generate_cmd, gen);
    generate_cmd->add_option("--seed", common.seed, "Seed for all randomness (default 0)");

    auto* eval_mc = app.add_subcommand("eval-mc", "Multiple-choice evaluation");
    eval_mc->add_option("--checkpoint", checkpoint_path, "Model checkpoint");
    eval_mc->add_option("--manifest", manifest_path, "Evaluation manifest")->required();
    eval_mc->add_option("--responses", responses_path,
                        "Score pre-generated responses (id/response JSONL) instead of generating");
    eval_mc->add_option("--audio-seconds", audio_seconds, "Pad/trim audio to this length");
    add_generation_flags(eval_mc, gen);
    add_common(eval_mc, true);

    auto* eval_chat = app.add_subcommand("eval-chat", "Judged open-ended evaluation");
    eval_chat->add_option("--items", items_path, "Chat items JSONL")->required();
    eval_chat->add_option("--responses", responses_path, "Candidate responses JSONL")->required();
    eval_chat->add_flag("--stub", use_stub, "Use the deterministic offline judge");
    eval_chat->add_option("--stub-score", stub_score, "Score the stub judge returns");
    eval_chat->add_option("--endpoint", endpoint, "Judge endpoint, e.g. http://host:port");
    eval_chat->add_option("--model", model, "Judge model name");
    eval_chat->add_option("--trials", trials, "Evaluation trials (median reported)");
    eval_chat->add_option("--parallelism", parallelism, "Concurrent judge calls");
    eval_chat->add_option("--cache-dir", cache_dir, "On-disk judge response cache");
    eval_chat->add_option("--judge-temperature", judge_temperature, "Judge sampling temperature");
    add_common(eval_chat, true);

    auto* ablate = app.add_subcommand("ablate", "Run the ablation grid");
    ablate->add_option("--config", config_path, "Base run config JSON file");
    ablate->add_option("--grid", grid_dims,
                       "Grid dimensions, optionally narrowed: stack, stack=2,8, layer_agg, "
                       "freeze=frozen_lm, stages (default: all)");
    ablate->add_option("--train-manifest", train_manifest, "Training manifest");
    ablate->add_option("--eval-manifest", eval_manifest, "Evaluation manifest");
    add_common(ablate, true);

    auto* inspect = app.add_subcommand("inspect-checkpoint", "Dump checkpoint header and tensors");
    inspect->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        fail_line("usage", e.what());
        return 2;
    }
    for (CLI::App* sub : app.get_subcommands()) {
        const CLI::Option* opt = sub->get_option_no_throw("--seed");
        if (opt && opt->count() > 0) common.seed_given = true;
    }

    try {
        if (synth->parsed()) return cmd_synth(spec_path, common, emit_wav);
        if (train_cmd->parsed()) return cmd_train(config_path, common, manifests);
        if (generate_cmd->parsed())
            return cmd_generate(checkpoint_path, wav_path, audio_spec_text, prompt, system_text,
                                gen, common, audio_seconds);
        if (eval_mc->parsed())
            return cmd_eval_mc(checkpoint_path, manifest_path, responses_path, common, gen,
                               audio_seconds);
        if (eval_chat->parsed())
            return cmd_eval_chat(items_path, responses_path, common, use_stub, stub_score,
                                 endpoint, model, trials, parallelism, cache_dir,
                                 judge_temperature);
        if (ablate->parsed())
            return cmd_ablate(config_path, common, grid_dims, train_manifest, eval_manifest);
        if (inspect->parsed()) return cmd_inspect(checkpoint_path);
        fail_line("usage", "no subcommand");
        return 2;
    } catch (const UsageError& e) {
        fail_line("usage", e.what());
        return e.exit_code;
    } catch (const DataError& e) {
        fail_line("data", e.what());
        return e.exit_code;
    } catch (const NumericError& e) {
        fail_line("numeric", e.what());
        return e.exit_code;
    } catch (const ServiceError& e) {
        fail_line("service", e.what());
        return e.exit_code;
    } catch (const std::exception& e) {
        fail_line("internal", e.what());
        return 1;
    }
}
