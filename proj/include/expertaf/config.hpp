#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "expertaf/error.hpp"
#include "expertaf/hash.hpp"
#include "expertaf/labeling_client.hpp"
#include "expertaf/pose_geometry.hpp"
#include "expertaf/retrieval_eval.hpp"

namespace expertaf {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Defaults mirror the reference dataset construction: 4 s clips sampled at
// 32 fps, top-5 experts per learner instance for training, top-1 for test.
inline constexpr double kDefaultWindowLengthS = 4.0;
inline constexpr double kDefaultFps = 32.0;
inline constexpr std::size_t kDefaultKTrain = 5;
inline constexpr std::size_t kDefaultKTest = 1;
inline constexpr std::size_t kDefaultRecallK = 50;
inline constexpr std::size_t kDefaultCodebookSize = 512;

struct PathsConfig {
    std::filesystem::path commentary_manifest;
    std::filesystem::path demo_manifest;
    /// Optional: hypothesis/reference pairs for the text metrics.
    std::filesystem::path text_pairs;
    /// Optional: reviewer accept/reject decisions for test tuples.
    std::filesystem::path review_decisions;
    /// Optional: pre-trained codebook for the TokenOverlap scorer.
    std::filesystem::path codebook;
    std::filesystem::path output_dir = "out";
};

struct PipelineConfig {
    PathsConfig paths;

    double window_length_s = kDefaultWindowLengthS;
    double fps = kDefaultFps;
    std::size_t stride = 1;
    AlignMode mode = AlignMode::PerFrame;
    bool allow_scale = true;
    bool use_anchor = true;

    std::size_t k_train = kDefaultKTrain;
    std::size_t k_test = kDefaultKTest;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;

    std::size_t codebook_size = kDefaultCodebookSize;

    ScorerKind scorer = ScorerKind::PoseAlignment;
    std::size_t recall_k = kDefaultRecallK;
    /// "train", "test" or "all".
    std::string retrieval_split = "test";
    bool percent_scale = false;

    bool stub_labeler = false;
    HttpClientConfig llm;
    std::size_t llm_max_in_flight = 4;

    /// 0 = hardware concurrency. Outputs do not depend on it.
    std::size_t max_workers = 0;

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw ConfigError(what);
        };
        require(window_length_s > 0.0, "alignment.window_length_s must be > 0");
        require(fps > 0.0, "alignment.fps must be > 0");
        require(stride >= 1, "alignment.stride must be >= 1");
        require(k_train >= 1 && k_test >= 1, "dataset.k_train and dataset.k_test must be >= 1");
        require(test_fraction >= 0.0 && test_fraction <= 1.0, "dataset.test_fraction must lie in [0, 1]");
        require(codebook_size >= 1, "codec.codebook_size must be >= 1");
        require(recall_k >= 1, "retrieval.recall_k must be >= 1");
        require(retrieval_split == "train" || retrieval_split == "test" || retrieval_split == "all",
                "retrieval.split must be train, test or all");
        require(llm_max_in_flight >= 1, "labeling.max_in_flight must be >= 1");
        require(llm.max_retries >= 0, "labeling.max_retries must be >= 0");
    }

    /// Fields that change pipeline outputs. Paths, credentials and worker
    /// counts are left out.
    nlohmann::json semantic_json() const {
        return {
            {"alignment",
             {{"window_length_s", window_length_s},
              {"fps", fps},
              {"stride", stride},
              {"mode", std::string(to_string(mode))},
              {"allow_scale", allow_scale},
              {"use_anchor", use_anchor}}},
            {"dataset", {{"k_train", k_train}, {"k_test", k_test}, {"test_fraction", test_fraction}, {"seed", seed}}},
            {"codec", {{"codebook_size", codebook_size}}},
            {"retrieval",
             {{"scorer", std::string(to_string(scorer))},
              {"recall_k", recall_k},
              {"split", retrieval_split},
              {"percent_scale", percent_scale}}},
            {"labeling",
             {{"stub", stub_labeler}, {"endpoint", stub_labeler ? "" : llm.endpoint}, {"model", stub_labeler ? "" : llm.model}}},
        };
    }

    std::string hash() const { return hex64(fnv1a64(semantic_json().dump())); }

    nlohmann::json to_json() const {
        nlohmann::json j = semantic_json();
        j["paths"] = {{"commentary_manifest", paths.commentary_manifest.generic_string()},
                      {"demo_manifest", paths.demo_manifest.generic_string()},
                      {"text_pairs", paths.text_pairs.generic_string()},
                      {"review_decisions", paths.review_decisions.generic_string()},
                      {"codebook", paths.codebook.generic_string()},
                      {"output_dir", paths.output_dir.generic_string()}};
        j["labeling"]["max_in_flight"] = llm_max_in_flight;
        j["labeling"]["max_retries"] = llm.max_retries;
        j["labeling"]["timeout_s"] = llm.timeout_s;
        j["runtime"] = {{"max_workers", max_workers}};
        return j;
    }
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& section, const char* section_name, const char* key, T& target) {
    if (!section.contains(key)) return;
    try {
        target = section.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string(section_name) + "." + key + " has the wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& section, const char* name, std::initializer_list<const char*> known) {
    if (!section.is_object()) throw ConfigError(std::string(name) + " must be an object");
    for (const auto& [key, _] : section.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("unknown config key " + std::string(name) + "." + key);
    }
}

} // namespace detail

/// Applies a JSON config tree on top of `config`. Relative paths resolve
/// against `base_dir`. Unknown keys are errors.
inline void apply_config_json(PipelineConfig& config, const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {}) {
    using detail::read_field;
    detail::reject_unknown(j, "config", {"paths", "alignment", "dataset", "codec", "retrieval", "labeling", "runtime"});
    const auto empty = nlohmann::json::object();
    auto section = [&](const char* name) -> const nlohmann::json& { return j.contains(name) ? j.at(name) : empty; };

    const auto& paths = section("paths");
    detail::reject_unknown(paths, "paths",
                           {"commentary_manifest", "demo_manifest", "text_pairs", "review_decisions", "codebook",
                            "output_dir"});
    auto read_path = [&](const char* key, std::filesystem::path& target) {
        std::string s;
        read_field(paths, "paths", key, s);
        if (s.empty()) return;
        std::filesystem::path p(s);
        target = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    read_path("commentary_manifest", config.paths.commentary_manifest);
    read_path("demo_manifest", config.paths.demo_manifest);
    read_path("text_pairs", config.paths.text_pairs);
    read_path("review_decisions", config.paths.review_decisions);
    read_path("codebook", config.paths.codebook);
    read_path("output_dir", config.paths.output_dir);

    const auto& align = section("alignment");
    detail::reject_unknown(align, "alignment",
                           {"window_length_s", "fps", "stride", "mode", "allow_scale", "use_anchor"});
    read_field(align, "alignment", "window_length_s", config.window_length_s);
    read_field(align, "alignment", "fps", config.fps);
    read_field(align, "alignment", "stride", config.stride);
    if (align.contains("mode")) config.mode = parse_align_mode(align.at("mode").get<std::string>());
    read_field(align, "alignment", "allow_scale", config.allow_scale);
    read_field(align, "alignment", "use_anchor", config.use_anchor);

    const auto& dataset = section("dataset");
    detail::reject_unknown(dataset, "dataset", {"k_train", "k_test", "test_fraction", "seed"});
    read_field(dataset, "dataset", "k_train", config.k_train);
    read_field(dataset, "dataset", "k_test", config.k_test);
    read_field(dataset, "dataset", "test_fraction", config.test_fraction);
    read_field(dataset, "dataset", "seed", config.seed);

    const auto& codec = section("codec");
    detail::reject_unknown(codec, "codec", {"codebook_size"});
    read_field(codec, "codec", "codebook_size", config.codebook_size);

    const auto& retrieval = section("retrieval");
    detail::reject_unknown(retrieval, "retrieval", {"scorer", "recall_k", "split", "percent_scale"});
    if (retrieval.contains("scorer")) config.scorer = parse_scorer_kind(retrieval.at("scorer").get<std::string>());
    read_field(retrieval, "retrieval", "recall_k", config.recall_k);
    read_field(retrieval, "retrieval", "split", config.retrieval_split);
    read_field(retrieval, "retrieval", "percent_scale", config.percent_scale);

    const auto& labeling = section("labeling");
    detail::reject_unknown(labeling, "labeling",
                           {"stub", "endpoint", "model", "max_in_flight", "max_retries", "timeout_s", "fixture_mode",
                            "fixture_dir"});
    read_field(labeling, "labeling", "stub", config.stub_labeler);
    read_field(labeling, "labeling", "endpoint", config.llm.endpoint);
    read_field(labeling, "labeling", "model", config.llm.model);
    read_field(labeling, "labeling", "max_in_flight", config.llm_max_in_flight);
    read_field(labeling, "labeling", "max_retries", config.llm.max_retries);
    read_field(labeling, "labeling", "timeout_s", config.llm.timeout_s);
    if (labeling.contains("fixture_mode")) {
        const auto mode = labeling.at("fixture_mode").get<std::string>();
        if (mode == "off") config.llm.fixture_mode = FixtureMode::Off;
        else if (mode == "record") config.llm.fixture_mode = FixtureMode::Record;
        else if (mode == "replay") config.llm.fixture_mode = FixtureMode::Replay;
        else throw ConfigError("labeling.fixture_mode must be off, record or replay");
    }
    if (labeling.contains("fixture_dir")) {
        std::filesystem::path p(labeling.at("fixture_dir").get<std::string>());
        config.llm.fixture_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }

    const auto& runtime = section("runtime");
    detail::reject_unknown(runtime, "runtime", {"max_workers"});
    read_field(runtime, "runtime", "max_workers", config.max_workers);
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    PipelineConfig config;
    try {
        apply_config_json(config, j, path.parent_path());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    config.llm.apply_environment();
    config.validate();
    return config;
}

} // namespace expertaf
