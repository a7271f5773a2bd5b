#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "expertaf/pipeline.hpp"
#include "expertaf/synthetic.hpp"

namespace fs = std::filesystem;
using namespace expertaf;
using pipeline::Json;

namespace {

// Flags shared by every subcommand that reads a config. Each one overrides
// the config file when given.
struct Overrides {
    std::string config;
    std::optional<std::string> out;
    bool stub = false;
    std::optional<double> window_length_s, fps, test_fraction;
    std::optional<std::size_t> stride, k_train, k_test, codebook_size, recall_k, workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode, scorer, split, review;
    bool no_scale = false, no_anchor = false, percent = false;

    void add_to(CLI::App* app) {
        app->add_option("--config", config, "JSON config file");
        app->add_option("--out", out, "output directory");
        app->add_flag("--stub", stub, "label with the offline keyword labeler");
        app->add_option("--window", window_length_s, "window length in seconds");
        app->add_option("--fps", fps, "expected frame rate");
        app->add_option("--stride", stride, "expert window stride in frames");
        app->add_option("--mode", mode, "PerFrame or PerSequence");
        app->add_flag("--no-scale", no_scale, "rigid Procrustes (no scale)");
        app->add_flag("--no-anchor", no_anchor, "ignore the expert commentary timestamp");
        app->add_option("--k-train", k_train);
        app->add_option("--k-test", k_test);
        app->add_option("--test-fraction", test_fraction);
        app->add_option("--seed", seed);
        app->add_option("--codebook-size", codebook_size);
        app->add_option("--scorer", scorer, "PoseAlignment, FeatureCosine or TokenOverlap");
        app->add_option("--recall-k", recall_k);
        app->add_option("--split", split, "train, test or all");
        app->add_option("--review", review, "reviewer decisions (JSONL)");
        app->add_flag("--percent", percent, "report text metrics on a 0-100 scale");
        app->add_option("--workers", workers, "worker threads, 0 = all cores");
    }

    PipelineConfig resolve() const {
        PipelineConfig c;
        if (!config.empty()) c = load_config(config);
        else c.llm.apply_environment();
        if (out) c.paths.output_dir = *out;
        if (stub) c.stub_labeler = true;
        if (window_length_s) c.window_length_s = *window_length_s;
        if (fps) c.fps = *fps;
        if (stride) c.stride = *stride;
        if (mode) c.mode = parse_align_mode(*mode);
        if (no_scale) c.allow_scale = false;
        if (no_anchor) c.use_anchor = false;
        if (k_train) c.k_train = *k_train;
        if (k_test) c.k_test = *k_test;
        if (test_fraction) c.test_fraction = *test_fraction;
        if (seed) c.seed = *seed;
        if (codebook_size) c.codebook_size = *codebook_size;
        if (scorer) c.scorer = parse_scorer_kind(*scorer);
        if (recall_k) c.recall_k = *recall_k;
        if (split) c.retrieval_split = *split;
        if (review) c.paths.review_decisions = *review;
        if (percent) c.percent_scale = true;
        if (workers) c.max_workers = *workers;
        c.validate();
        return c;
    }
};

void print_report(const pipeline::StageReport& r) { std::cout << r.to_json().dump() << '\n'; }

void print_error(std::string_view kind, std::string_view message) {
    Json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"expertaf: expert-feedback dataset and evaluation toolkit"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Overrides ov;
    std::string commentary, demos, labels, collection, tuples, ranks, text_pairs, report_out;

    auto* label = app.add_subcommand("label", "commentary manifest -> labels");
    ov.add_to(label);
    label->add_option("--commentary", commentary, "commentary manifest (JSONL)");
    label->add_option("--labels", labels, "output labels file");

    auto* mine = app.add_subcommand("mine", "demos + labels -> collection");
    ov.add_to(mine);
    mine->add_option("--demos", demos, "demonstration manifest (JSONL)")->required();
    mine->add_option("--labels", labels, "labels file from `label`")->required();

    auto* align = app.add_subcommand("align", "collection -> coaching tuples");
    ov.add_to(align);
    align->add_option("--demos", demos)->required();
    align->add_option("--labels", labels)->required();
    align->add_option("--collection", collection, "collection from `mine`; rebuilt when omitted");

    auto* codebook = app.add_subcommand("codebook", "pose codebook tools");
    codebook->require_subcommand(1);
    std::string cb_path, pose_path, token_path;
    double decode_scale = 1.0;
    auto* cb_train = codebook->add_subcommand("train", "k-means codebook over demo frames");
    ov.add_to(cb_train);
    cb_train->add_option("--demos", demos)->required();
    cb_train->add_option("--codebook", cb_path, "output codebook file")->required();
    auto* cb_encode = codebook->add_subcommand("encode", "pose file -> token file");
    cb_encode->add_option("--codebook", cb_path)->required();
    cb_encode->add_option("--pose", pose_path)->required();
    cb_encode->add_option("--tokens", token_path)->required();
    auto* cb_decode = codebook->add_subcommand("decode", "token file -> pose file");
    cb_decode->add_option("--codebook", cb_path)->required();
    cb_decode->add_option("--tokens", token_path)->required();
    cb_decode->add_option("--pose", pose_path)->required();
    cb_decode->add_option("--scale", decode_scale, "torso length of the decoded skeleton, metres");

    auto* retrieve = app.add_subcommand("retrieve", "tuples + scorer -> ranked results");
    ov.add_to(retrieve);
    retrieve->add_option("--tuples", tuples)->required();
    retrieve->add_option("--demos", demos)->required();
    retrieve->add_option("--labels", labels);
    retrieve->add_option("--codebook", cb_path, "pre-trained codebook for TokenOverlap");

    auto* evaluate = app.add_subcommand("evaluate", "ranked results / text pairs -> metric report");
    ov.add_to(evaluate);
    evaluate->add_option("--ranks", ranks);
    evaluate->add_option("--text-pairs", text_pairs);
    evaluate->add_option("--report", report_out, "output report file (default <out>/report.jsonl)");

    auto* run_all = app.add_subcommand("run-all", "every stage with one config");
    ov.add_to(run_all);

    std::string synth_dir;
    std::uint64_t synth_seed = 7;
    auto* synth = app.add_subcommand("synth", "write the planted-pair synthetic corpus");
    synth->add_option("--out", synth_dir)->required();
    synth->add_option("--seed", synth_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) print_error("UsageError", e.what());
        return app.exit(e);
    }

    try {
        if (*synth) {
            synthetic::write_planted_corpus(synth_dir, synth_seed);
            return 0;
        }
        if (*cb_encode) {
            auto cb = pipeline::load_codebook(cb_path);
            auto tokens = encode(io::load_pose(pose_path), cb);
            auto out = io::open_out(token_path);
            io::write_tokens(out, tokens);
            return 0;
        }
        if (*cb_decode) {
            auto cb = pipeline::load_codebook(cb_path);
            auto in = io::open_in(token_path);
            auto tokens = io::read_tokens(in, token_path);
            io::save_pose(pose_path, decode(tokens, cb, decode_scale));
            return 0;
        }

        PipelineConfig config = ov.resolve();
        const pipeline::OutputLayout layout{config.paths.output_dir};

        if (*run_all) {
            if (config.paths.commentary_manifest.empty() || config.paths.demo_manifest.empty())
                throw ConfigError("run-all needs paths.commentary_manifest and paths.demo_manifest");
            auto client = pipeline::make_client(config);
            const auto manifest = pipeline::run_all(config, *client);
            std::cout << manifest.to_json().dump() << '\n';
            return manifest.reconciles() ? 0 : 3;
        }
        if (*label) {
            if (!commentary.empty()) config.paths.commentary_manifest = commentary;
            if (config.paths.commentary_manifest.empty()) throw ConfigError("label needs --commentary");
            auto client = pipeline::make_client(config);
            print_report(pipeline::label_stage(config.paths.commentary_manifest, *client,
                                               labels.empty() ? layout.labels() : fs::path(labels),
                                               config.llm_max_in_flight));
            return 0;
        }
        if (*mine) {
            const auto load = pipeline::load_demonstrations(demos, labels);
            print_report(pipeline::mine_stage(load, build_collection(load.demos), layout));
            return 0;
        }
        if (*align) {
            const auto load = pipeline::load_demonstrations(demos, labels);
            auto entries = collection.empty() ? build_collection(load.demos) : pipeline::read_collection(collection, load);
            auto result = pipeline::align_stage(load, std::move(entries), config, layout);
            print_report(result.align);
            print_report(result.topk);
            return 0;
        }
        if (*cb_train) {
            const auto load = pipeline::load_demonstrations(demos, {});
            CodebookTrainingOptions opts;
            opts.size = config.codebook_size;
            opts.seed = config.seed;
            pipeline::save_codebook(cb_path, train_codebook(pipeline::all_frames(load.demos), opts));
            return 0;
        }
        if (*retrieve) {
            if (!cb_path.empty()) config.paths.codebook = cb_path;
            const auto load = pipeline::load_demonstrations(demos, labels);
            auto result = pipeline::retrieve_stage(pipeline::read_tuples(tuples), load, config, layout);
            print_report(result.report);
            return 0;
        }
        if (*evaluate) {
            if (ranks.empty() && text_pairs.empty()) throw ConfigError("evaluate needs --ranks or --text-pairs");
            if (text_pairs.empty()) text_pairs = config.paths.text_pairs.string();
            const auto results = ranks.empty() ? std::vector<RankedResult>{} : pipeline::read_ranks(ranks);
            const auto pairs = text_pairs.empty() ? std::vector<pipeline::TextPair>{} : pipeline::read_text_pairs(text_pairs);
            print_report(pipeline::evaluate_stage(results, pairs, config,
                                                  report_out.empty() ? layout.report() : fs::path(report_out)));
            return 0;
        }
    } catch (const Error& e) {
        print_error(e.kind(), e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        print_error("FormatError", e.what());
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        print_error("IoError", e.what());
        return 2;
    }
    return 0;
}
