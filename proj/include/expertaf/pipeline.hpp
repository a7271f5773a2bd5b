#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "expertaf/commentary.hpp"
#include "expertaf/config.hpp"
#include "expertaf/io.hpp"
#include "expertaf/labeling_client.hpp"
#include "expertaf/pairing.hpp"
#include "expertaf/parallel.hpp"
#include "expertaf/pose_codec.hpp"
#include "expertaf/records.hpp"
#include "expertaf/retrieval_eval.hpp"
#include "expertaf/text_metrics.hpp"

namespace expertaf::pipeline {

namespace fs = std::filesystem;
using io::Json;

/// Counts for one stage. Every input is either an output or a skip.
struct StageReport {
    std::string name;
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::size_t skips = 0;
    std::map<std::string, std::size_t> skip_reasons;
    double elapsed_ms = 0.0;
    Json extra = Json::object();

    bool reconciles() const { return inputs == outputs + skips; }

    void add_skip(const std::string& reason) {
        ++skips;
        ++skip_reasons[reason];
    }

    Json to_json() const {
        Json j;
        j["name"] = name;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["skips"] = skips;
        j["skip_reasons"] = Json::object();
        for (const auto& [k, v] : skip_reasons) j["skip_reasons"][k] = v;
        j["elapsed_ms"] = elapsed_ms;
        if (!extra.empty()) j["extra"] = extra;
        return j;
    }
};

struct RunManifest {
    std::string tool_version{kToolVersion};
    std::string config_hash;
    std::vector<StageReport> stages;

    bool reconciles() const {
        for (const auto& s : stages)
            if (!s.reconciles()) return false;
        return true;
    }

    Json to_json() const {
        Json j;
        j["tool_version"] = tool_version;
        j["config_hash"] = config_hash;
        j["stages"] = Json::array();
        for (const auto& s : stages) j["stages"].push_back(s.to_json());
        return j;
    }
};

/// File names inside the output directory.
struct OutputLayout {
    fs::path dir;

    fs::path labels() const { return dir / "labels.jsonl"; }
    fs::path collection() const { return dir / "collection.jsonl"; }
    fs::path mine_skips() const { return dir / "mine_skips.jsonl"; }
    fs::path tuples() const { return dir / "tuples.jsonl"; }
    fs::path align_skips() const { return dir / "align_skips.jsonl"; }
    fs::path review() const { return dir / "review.jsonl"; }
    fs::path codebook() const { return dir / "codebook.txt"; }
    fs::path ranks() const { return dir / "ranks.jsonl"; }
    fs::path retrieve_skips() const { return dir / "retrieve_skips.jsonl"; }
    fs::path report() const { return dir / "report.jsonl"; }
    fs::path manifest() const { return dir / "manifest.json"; }
};

class StageTimer {
public:
    explicit StageTimer(StageReport& report) : report_(report), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        report_.elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    StageReport& report_;
    std::chrono::steady_clock::time_point start_;
};

inline std::unique_ptr<LabelingClient> make_client(const PipelineConfig& config) {
    if (config.stub_labeler) return std::make_unique<StubLabelingClient>();
    return std::make_unique<HttpLabelingClient>(config.llm);
}

// ---------------------------------------------------------------------------
// label

/// Labels every commentary record. ServiceError aborts the stage; records
/// whose answers cannot be parsed are kept in the output as discarded.
inline StageReport label_stage(const fs::path& commentary_manifest, const LabelingClient& client,
                               const fs::path& labels_out, std::size_t max_in_flight) {
    StageReport report;
    report.name = "label";
    StageTimer timer(report);

    std::vector<CommentaryRecord> inputs;
    io::for_each_jsonl(commentary_manifest,
                       [&](const Json& j, std::size_t) { inputs.push_back(records::commentary_from_json(j)); });
    report.inputs = inputs.size();

    std::vector<ParseOutcome> outcomes(inputs.size());
    parallel_for(
        inputs.size(),
        [&](std::size_t i) {
            try {
                inputs[i].validate();
            } catch (const InvalidRecord& e) {
                outcomes[i].discard_kind = "InvalidRecord";
                outcomes[i].discard_reason = e.what();
                return;
            }
            outcomes[i] = classify_commentary(inputs[i], client);
        },
        max_in_flight);

    std::vector<Json> lines;
    std::size_t incorrect = 0, correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        lines.push_back(records::label_record(inputs[i], outcomes[i]));
        if (outcomes[i].discarded()) {
            report.add_skip(outcomes[i].discard_kind);
            continue;
        }
        ++report.outputs;
        incorrect += outcomes[i].label->has(RegionLabel::NeedsImprovement);
        correct += outcomes[i].label->has(RegionLabel::Correct);
    }
    io::write_jsonl(labels_out, lines);
    report.extra["with_needs_improvement"] = incorrect;
    report.extra["with_correct"] = correct;
    report.extra["labeler"] = client.describe();
    return report;
}

// ---------------------------------------------------------------------------
// Demonstration loading

struct DemoLoad {
    std::vector<Demonstration> demos;
    std::vector<SkipRecord> skips;
    std::size_t inputs = 0;

    std::map<std::string, std::size_t> index() const {
        std::map<std::string, std::size_t> out;
        for (std::size_t i = 0; i < demos.size(); ++i) out[demos[i].demo_id] = i;
        return out;
    }
};

/// Reads the demonstration manifest and attaches labeled commentary by
/// video id, in labels-file order. Pose and feature paths are relative to
/// the manifest. Demos that fail to load are skipped, not fatal. An empty
/// labels path loads demos without commentary.
inline DemoLoad load_demonstrations(const fs::path& demo_manifest, const fs::path& labels) {
    std::map<std::string, std::vector<LabeledCommentary>> by_video;
    if (!labels.empty()) io::for_each_jsonl(labels, [&](const Json& j, std::size_t) {
        if (j.at("status").get<std::string>() != "labeled") return;
        by_video[j.at("video_id").get<std::string>()].push_back(
            {records::commentary_from_json(j), records::label_from_json(j)});
    });

    DemoLoad load;
    const fs::path base = demo_manifest.parent_path();
    std::set<std::string> seen;
    io::for_each_jsonl(demo_manifest, [&](const Json& j, std::size_t line) {
        ++load.inputs;
        const std::string id = j.value("demo_id", "line " + std::to_string(line));
        try {
            if (!j.contains("demo_id")) throw InvalidRecord("record has no demo_id");
            if (!seen.insert(id).second) throw InvalidRecord("duplicate demo_id");
            auto pose = io::load_pose(base / j.at("pose").get<std::string>());
            Demonstration d{id,
                            j.value("participant_id", std::string()),
                            std::move(pose),
                            parse_skill_level(j.at("skill").get<std::string>()),
                            j.at("scenario").get<std::string>(),
                            {},
                            {},
                            4.0};
            if (j.contains("features") && !j.at("features").get<std::string>().empty()) {
                auto table = io::load_features(base / j.at("features").get<std::string>());
                d.video_features = std::move(table.rows);
                d.features_per_second = table.rate;
            }
            const std::string video = j.value("video_id", id);
            if (auto it = by_video.find(video); it != by_video.end()) d.commentaries = it->second;
            d.validate();
            load.demos.push_back(std::move(d));
        } catch (const Error& e) {
            load.skips.push_back({"mine", id, e.kind(), e.what()});
        } catch (const nlohmann::json::exception& e) {
            load.skips.push_back({"mine", id, "FormatError", e.what()});
        }
    });
    return load;
}

// ---------------------------------------------------------------------------
// mine

inline StageReport mine_stage(const DemoLoad& load, const std::vector<CollectionEntry>& collection,
                              const OutputLayout& out) {
    StageReport report;
    report.name = "mine";
    StageTimer timer(report);
    report.inputs = load.inputs;
    report.outputs = load.demos.size();
    for (const auto& s : load.skips) report.add_skip(s.reason);

    std::vector<Json> lines;
    for (const auto& e : collection) lines.push_back(records::collection_to_json(load.demos, e));
    io::write_jsonl(out.collection(), lines);
    std::vector<Json> skips;
    for (const auto& s : load.skips) skips.push_back(records::skip_to_json(s));
    io::write_jsonl(out.mine_skips(), skips);
    report.extra["collection_entries"] = collection.size();
    return report;
}

inline std::vector<CollectionEntry> read_collection(const fs::path& path, const DemoLoad& load) {
    const auto index = load.index();
    std::vector<CollectionEntry> out;
    io::for_each_jsonl(path, [&](const Json& j, std::size_t) {
        out.push_back(records::collection_from_json(j, index, load.demos));
    });
    return out;
}

// ---------------------------------------------------------------------------
// align

/// Reviewer decisions: one {"key": ..., "decision": "accept"|"reject"} per
/// line. Returns the rejected keys.
inline std::set<std::string> read_review_decisions(const fs::path& path) {
    std::set<std::string> rejected;
    if (path.empty()) return rejected;
    io::for_each_jsonl(path, [&](const Json& j, std::size_t) {
        const auto decision = j.at("decision").get<std::string>();
        if (decision == "reject") rejected.insert(j.at("key").get<std::string>());
        else if (decision != "accept") throw InvalidRecord("decision must be accept or reject");
    });
    return rejected;
}

inline DatasetOptions dataset_options(const PipelineConfig& config) {
    DatasetOptions o;
    o.window_length_s = config.window_length_s;
    o.stride = config.stride;
    o.metric = {config.mode, config.allow_scale};
    o.use_anchor = config.use_anchor;
    o.k_train = config.k_train;
    o.k_test = config.k_test;
    o.test_fraction = config.test_fraction;
    o.seed = config.seed;
    o.rejected = read_review_decisions(config.paths.review_decisions);
    o.max_workers = config.max_workers;
    return o;
}

struct AlignOutput {
    DatasetBuild build;
    StageReport align;
    StageReport topk;
};

inline AlignOutput align_stage(const DemoLoad& load, std::vector<CollectionEntry> collection,
                               const PipelineConfig& config, const OutputLayout& out) {
    AlignOutput result;
    result.align.name = "align";
    result.topk.name = "topk";
    {
        StageTimer timer(result.align);
        result.build = align_collection(load.demos, std::move(collection), dataset_options(config));
    }
    const auto& build = result.build;
    result.align.inputs = build.collection.size();
    result.align.outputs = build.aligned;
    result.topk.inputs = build.aligned;
    result.topk.outputs = build.tuples.size();
    for (const auto& s : build.skips) (s.stage == "align" ? result.align : result.topk).add_skip(s.reason);

    const records::TupleProvenance provenance{config.hash(), config.mode, config.stride};
    std::vector<Json> tuples, review, skips;
    std::size_t train = 0, test = 0;
    const auto index = load.index();
    for (const auto& t : build.tuples) {
        tuples.push_back(records::tuple_to_json(t, provenance));
        (t.split == Split::Train ? train : test) += 1;
        if (t.split != Split::Test) continue;
        Json r;
        r["key"] = tuple_key(t);
        r["decision"] = "pending";
        r["region"] = std::string(to_string(t.matched_region));
        r["summary"] = t.summary;
        r["learner_commentary"] = load.demos[index.at(t.learner_id)].commentaries[t.learner_commentary].record.text;
        r["expert_commentary"] = load.demos[index.at(t.expert_id)].commentaries[t.expert_commentary].record.text;
        r["learner_window"] = records::window_to_json(t.learner_window);
        r["expert_window"] = records::window_to_json(t.expert_window);
        r["score_mm"] = t.alignment_score_mm;
        review.push_back(std::move(r));
    }
    for (const auto& s : build.skips) skips.push_back(records::skip_to_json(s));
    io::write_jsonl(out.tuples(), tuples);
    io::write_jsonl(out.review(), review);
    io::write_jsonl(out.align_skips(), skips);
    result.topk.extra["train_tuples"] = train;
    result.topk.extra["test_tuples"] = test;
    // One expert remark may back several learner instances.
    std::map<std::string, std::size_t> uses;
    for (const auto& t : build.tuples) ++uses[t.expert_id + "#" + std::to_string(t.expert_commentary)];
    std::size_t reused = 0, max_uses = 0;
    for (const auto& [_, n] : uses) {
        reused += n > 1;
        max_uses = std::max(max_uses, n);
    }
    result.topk.extra["expert_commentaries_used"] = uses.size();
    result.topk.extra["expert_commentaries_reused"] = reused;
    result.topk.extra["max_expert_commentary_uses"] = max_uses;
    result.align.extra["stride"] = config.stride;
    result.align.extra["mode"] = std::string(to_string(config.mode));
    return result;
}

inline std::vector<CoachingTuple> read_tuples(const fs::path& path) {
    std::vector<CoachingTuple> out;
    io::for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(records::tuple_from_json(j)); });
    return out;
}

// ---------------------------------------------------------------------------
// codebook

inline std::vector<PoseFrame> all_frames(std::span<const Demonstration> demos) {
    std::vector<PoseFrame> frames;
    for (const auto& d : demos) frames.insert(frames.end(), d.pose.frames().begin(), d.pose.frames().end());
    return frames;
}

inline void save_codebook(const fs::path& path, const Codebook& cb) {
    auto out = io::open_out(path);
    cb.save(out);
}

inline Codebook load_codebook(const fs::path& path) {
    auto in = io::open_in(path);
    return Codebook::load(in);
}

// ---------------------------------------------------------------------------
// retrieve

inline std::vector<CoachingTuple> select_split(const std::vector<CoachingTuple>& tuples, const std::string& split) {
    if (split == "all") return tuples;
    const Split want = parse_split(split);
    std::vector<CoachingTuple> out;
    for (const auto& t : tuples)
        if (t.split == want) out.push_back(t);
    return out;
}

struct RetrieveOutput {
    std::vector<RankedResult> results;
    StageReport report;
};

inline RetrieveOutput retrieve_stage(const std::vector<CoachingTuple>& all_tuples, const DemoLoad& load,
                                     const PipelineConfig& config, const OutputLayout& out) {
    RetrieveOutput result;
    result.report.name = "retrieve";
    StageTimer timer(result.report);

    const auto tuples = select_split(all_tuples, config.retrieval_split);
    const auto set = retrieval_set(tuples, load.demos);
    result.report.inputs = set.queries.size();

    Scorer scorer;
    scorer.kind = config.scorer;
    scorer.stride = config.stride;
    scorer.metric = {config.mode, config.allow_scale};
    if (scorer.kind == ScorerKind::TokenOverlap) {
        if (!config.paths.codebook.empty()) {
            scorer.codebook = std::make_shared<const Codebook>(load_codebook(config.paths.codebook));
        } else {
            CodebookTrainingOptions opts;
            opts.size = config.codebook_size;
            opts.seed = config.seed;
            auto cb = train_codebook(all_frames(load.demos), opts);
            save_codebook(out.codebook(), cb);
            scorer.codebook = std::make_shared<const Codebook>(std::move(cb));
        }
    }

    std::vector<std::optional<RankedResult>> ranked(set.queries.size());
    std::vector<std::optional<SkipRecord>> failed(set.queries.size());
    parallel_for(
        set.queries.size(),
        [&](std::size_t i) {
            try {
                ranked[i] = retrieve(set.queries[i], set.candidates, scorer, set.ground_truth[i]);
            } catch (const Error& e) {
                failed[i] = SkipRecord{"retrieve", set.queries[i].demo_id, e.kind(), e.what()};
            }
        },
        config.max_workers);

    std::vector<Json> lines, skips;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i]) {
            lines.push_back(records::ranked_to_json(*ranked[i], scorer.kind));
            result.results.push_back(std::move(*ranked[i]));
            ++result.report.outputs;
        } else {
            result.report.add_skip(failed[i]->reason);
            skips.push_back(records::skip_to_json(*failed[i]));
        }
    }
    io::write_jsonl(out.ranks(), lines);
    io::write_jsonl(out.retrieve_skips(), skips);
    result.report.extra["scorer"] = std::string(to_string(scorer.kind));
    result.report.extra["candidates"] = set.candidates.size();
    result.report.extra["split"] = config.retrieval_split;
    return result;
}

inline std::vector<RankedResult> read_ranks(const fs::path& path) {
    std::vector<RankedResult> out;
    io::for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(records::ranked_from_json(j)); });
    return out;
}

// ---------------------------------------------------------------------------
// evaluate

struct TextPair {
    std::string id;
    std::string hypothesis;
    std::vector<std::string> references;
};

inline std::vector<TextPair> read_text_pairs(const fs::path& path) {
    std::vector<TextPair> out;
    io::for_each_jsonl(path, [&](const Json& j, std::size_t line) {
        TextPair p;
        p.id = j.value("id", "line-" + std::to_string(line));
        p.hypothesis = j.at("hypothesis").get<std::string>();
        if (j.contains("references")) p.references = j.at("references").get<std::vector<std::string>>();
        if (j.contains("reference")) p.references.push_back(j.at("reference").get<std::string>());
        out.push_back(std::move(p));
    });
    return out;
}

/// Writes the metric report: per-query ranks, the retrieval summary, per-pair
/// text scores and the text summary, one JSON object per line.
inline StageReport evaluate_stage(const std::vector<RankedResult>& results, const std::vector<TextPair>& pairs,
                                  const PipelineConfig& config, const fs::path& report_out) {
    StageReport report;
    report.name = "evaluate";
    StageTimer timer(report);
    report.inputs = results.size() + pairs.size();
    std::vector<Json> lines;

    std::vector<RankedResult> with_rank;
    for (const auto& r : results) {
        if (!r.rank) {
            report.add_skip("NoGroundTruth");
            continue;
        }
        Json j;
        j["type"] = "query";
        j["query_id"] = r.query_id;
        j["ground_truth"] = r.ground_truth;
        j["rank"] = *r.rank;
        lines.push_back(std::move(j));
        with_rank.push_back(r);
        ++report.outputs;
    }
    {
        Json j;
        j["type"] = "retrieval_summary";
        j["scorer"] = std::string(to_string(config.scorer));
        j["queries"] = with_rank.size();
        j["k"] = config.recall_k;
        if (with_rank.empty()) {
            j["recall_at_k"] = nullptr;
            j["median_rank"] = nullptr;
        } else {
            j["recall_at_k"] = recall_at_k(with_rank, config.recall_k);
            j["median_rank"] = median_rank(with_rank);
        }
        lines.push_back(std::move(j));
    }

    const double scale = config.percent_scale ? 100.0 : 1.0;
    double bleu_sum = 0.0, rouge_sum = 0.0;
    std::size_t scored = 0;
    for (const auto& p : pairs) {
        double bleu = 0.0, rouge = 0.0;
        try {
            bleu = bleu4(p.hypothesis, p.references);
            for (const auto& ref : p.references) rouge = std::max(rouge, rouge_l_f1(p.hypothesis, ref));
        } catch (const Error& e) {
            report.add_skip(e.kind());
            continue;
        }
        Json j;
        j["type"] = "text_pair";
        j["id"] = p.id;
        j["bleu4"] = scale * bleu;
        j["rouge_l_f1"] = scale * rouge;
        lines.push_back(std::move(j));
        bleu_sum += bleu;
        rouge_sum += rouge;
        ++scored;
        ++report.outputs;
    }
    if (!pairs.empty()) {
        Json j;
        j["type"] = "text_summary";
        j["pairs"] = scored;
        j["bleu4_mean"] = scored ? Json(scale * bleu_sum / static_cast<double>(scored)) : Json(nullptr);
        j["rouge_l_f1_mean"] = scored ? Json(scale * rouge_sum / static_cast<double>(scored)) : Json(nullptr);
        j["tokenizer"] = std::string(kTokenizerDescription);
        j["bleu_smoothing"] = "add-epsilon 1e-9";
        j["scale"] = config.percent_scale ? "percent" : "unit";
        lines.push_back(std::move(j));
    }
    io::write_jsonl(report_out, lines);
    return report;
}

// ---------------------------------------------------------------------------
// run-all

inline void write_manifest(const fs::path& path, const RunManifest& manifest) {
    auto out = io::open_out(path);
    out << manifest.to_json().dump(2) << '\n';
}

/// Every stage in order with one config. Writes all outputs plus
/// manifest.json into the output directory.
inline RunManifest run_all(const PipelineConfig& config, const LabelingClient& client) {
    config.validate();
    const OutputLayout out{config.paths.output_dir};
    fs::create_directories(out.dir);
    RunManifest manifest;
    manifest.config_hash = config.hash();

    manifest.stages.push_back(
        label_stage(config.paths.commentary_manifest, client, out.labels(), config.llm_max_in_flight));

    const DemoLoad load = load_demonstrations(config.paths.demo_manifest, out.labels());
    auto collection = build_collection(load.demos);
    manifest.stages.push_back(mine_stage(load, collection, out));

    auto aligned = align_stage(load, std::move(collection), config, out);
    manifest.stages.push_back(aligned.align);
    manifest.stages.push_back(aligned.topk);

    auto retrieved = retrieve_stage(aligned.build.tuples, load, config, out);
    manifest.stages.push_back(retrieved.report);

    const auto pairs = config.paths.text_pairs.empty() ? std::vector<TextPair>{} : read_text_pairs(config.paths.text_pairs);
    manifest.stages.push_back(evaluate_stage(retrieved.results, pairs, config, out.report()));

    write_manifest(out.manifest(), manifest);
    return manifest;
}

} // namespace expertaf::pipeline
