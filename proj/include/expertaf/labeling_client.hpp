#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

// Eigen before httplib: <resolv.h> defines a _res macro that breaks Eigen.
#include <Eigen/Dense>
#include <httplib.h>
#include <json.hpp>

#include "expertaf/commentary.hpp"
#include "expertaf/error.hpp"
#include "expertaf/hash.hpp"

namespace expertaf {

/// Something that answers a chat conversation with assistant text.
/// Implementations throw ServiceError when no answer could be obtained.
class LabelingClient {
public:
    virtual ~LabelingClient() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) const = 0;
    virtual std::string describe() const = 0;
};

inline ParseOutcome classify_commentary(const CommentaryRecord& record, const LabelingClient& client,
                                        const PromptOptions& prompt = {}) {
    return parse_label_response(client.complete(build_prompt(record, prompt)));
}

// ---------------------------------------------------------------------------
// Offline keyword labeler.

struct StubRule {
    /// Single word (matched as a whole word, plural allowed) or a phrase
    /// (matched as a substring).
    std::string keyword;
    BodyRegion region;
    /// When unset, polarity comes from cue words in the same sentence.
    std::optional<RegionLabel> label;
};

inline std::vector<StubRule> default_stub_rules() {
    std::vector<StubRule> rules;
    auto add = [&](BodyRegion r, std::initializer_list<const char*> words) {
        for (const char* w : words) rules.push_back({w, r, std::nullopt});
    };
    add(BodyRegion::Head, {"head", "neck", "eyes", "chin", "gaze"});
    add(BodyRegion::Shoulder, {"shoulder"});
    add(BodyRegion::Hands, {"hand", "wrist", "finger", "grip", "palm"});
    add(BodyRegion::Arms, {"arm", "elbow", "forearm"});
    add(BodyRegion::Legs, {"leg", "knee", "foot", "feet", "ankle", "stance", "step"});
    add(BodyRegion::Jump, {"jump", "landing", "leap", "takeoff"});
    return rules;
}

class StubLabelingClient final : public LabelingClient {
public:
    explicit StubLabelingClient(std::vector<StubRule> rules = default_stub_rules()) : rules_(std::move(rules)) {}

    /// Labels the last user turn. Commentary that fires no rule gets an
    /// answer outside the grammar, so it is discarded downstream.
    std::string complete(const std::vector<ChatMessage>& messages) const override {
        std::string_view query;
        for (auto it = messages.rbegin(); it != messages.rend(); ++it)
            if (it->role == "user") {
                query = it->content;
                break;
            }
        const auto sentences = split_sentences(query);
        CommentaryLabel label;
        bool fired = false;
        std::vector<BodyRegion> needs;
        for (const auto& sentence : sentences) {
            const std::string lowered = detail::lower(sentence);
            const auto words = split_words(lowered);
            for (const auto& rule : rules_) {
                if (!matches(rule.keyword, lowered, words)) continue;
                const auto polarity = rule.label ? rule.label : cue_polarity(words);
                if (!polarity || *polarity == RegionLabel::NoMention) continue;
                fired = true;
                if (*polarity == RegionLabel::NeedsImprovement) needs.push_back(rule.region);
                else if (label[rule.region] == RegionLabel::NoMention) label[rule.region] = RegionLabel::Correct;
            }
        }
        if (!fired) return "I cannot tell which body region this commentary is about.";
        for (BodyRegion r : needs) label[r] = RegionLabel::NeedsImprovement;
        label.summary = sentences.empty() ? std::string(detail::trim(query)) : sentences.front();
        return serialize_label(label);
    }

    std::string describe() const override { return "stub:" + std::to_string(rules_.size()) + "-rules"; }

    const std::vector<StubRule>& rules() const noexcept { return rules_; }

private:
    static std::vector<std::string> split_sentences(std::string_view text) {
        std::vector<std::string> out;
        std::size_t begin = 0;
        for (std::size_t i = 0; i < text.size(); ++i) {
            const char c = text[i];
            const bool at_end = i + 1 == text.size();
            if ((c == '.' || c == '!' || c == '?') &&
                (at_end || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
                auto s = detail::trim(text.substr(begin, i + 1 - begin));
                if (!s.empty()) out.emplace_back(s);
                begin = i + 1;
            }
        }
        auto tail = detail::trim(text.substr(std::min(begin, text.size())));
        if (!tail.empty()) out.emplace_back(tail);
        return out;
    }

    static std::vector<std::string> split_words(std::string_view lowered) {
        std::vector<std::string> words;
        std::string cur;
        for (char c : lowered) {
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '\'') cur.push_back(c);
            else if (!cur.empty()) words.push_back(std::exchange(cur, {}));
        }
        if (!cur.empty()) words.push_back(cur);
        return words;
    }

    static bool matches(const std::string& keyword, const std::string& lowered, const std::vector<std::string>& words) {
        const std::string kw = detail::lower(keyword);
        if (kw.find(' ') != std::string::npos) return lowered.find(kw) != std::string::npos;
        for (const auto& w : words)
            if (w == kw || w == kw + "s" || w == kw + "es") return true;
        return false;
    }

    static std::optional<RegionLabel> cue_polarity(const std::vector<std::string>& words) {
        static const std::vector<std::string_view> negative = {
            "not",   "don't",   "doesn't", "need",    "needs", "should", "too",     "locked", "wrong",
            "improve", "bad",   "lose",    "loses",   "losing", "careful", "instead", "missing", "stiff",
            "sloppy", "poor",   "late",    "never",   "mistake"};
        static const std::vector<std::string_view> positive = {"good",    "great",   "nice",   "well",  "perfect",
                                                               "excellent", "solid", "correct", "proper", "strong"};
        auto any = [&](const std::vector<std::string_view>& cues) {
            for (const auto& w : words)
                for (auto cue : cues)
                    if (w == cue) return true;
            return false;
        };
        if (any(negative)) return RegionLabel::NeedsImprovement;
        if (any(positive)) return RegionLabel::Correct;
        return std::nullopt;
    }

    std::vector<StubRule> rules_;
};

// ---------------------------------------------------------------------------
// Chat-completion HTTP client.

enum class FixtureMode { Off, Record, Replay };

struct HttpClientConfig {
    /// Full URL of the chat-completion route, e.g.
    /// http://localhost:8000/v1/chat/completions
    std::string endpoint;
    std::string model;
    std::string api_key;
    double temperature = 0.0;
    int timeout_s = 60;
    int max_retries = 3;
    int backoff_initial_ms = 250;
    FixtureMode fixture_mode = FixtureMode::Off;
    std::filesystem::path fixture_dir;

    /// EXPERTAF_LLM_URL, EXPERTAF_LLM_MODEL, EXPERTAF_LLM_API_KEY override
    /// the corresponding fields when set.
    void apply_environment() {
        if (const char* v = std::getenv("EXPERTAF_LLM_URL")) endpoint = v;
        if (const char* v = std::getenv("EXPERTAF_LLM_MODEL")) model = v;
        if (const char* v = std::getenv("EXPERTAF_LLM_API_KEY")) api_key = v;
    }
};

class HttpLabelingClient final : public LabelingClient {
public:
    explicit HttpLabelingClient(HttpClientConfig config) : config_(std::move(config)) {
        if (config_.fixture_mode != FixtureMode::Replay) split_endpoint();
        if (config_.fixture_mode != FixtureMode::Off && config_.fixture_dir.empty())
            throw ConfigError("fixture mode needs a fixture directory");
    }

    nlohmann::json request_body(const std::vector<ChatMessage>& messages) const {
        nlohmann::json msgs = nlohmann::json::array();
        for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
        return {{"model", config_.model}, {"messages", std::move(msgs)}, {"temperature", config_.temperature}};
    }

    /// Fixture file name for a request: hash of its canonical body.
    std::filesystem::path fixture_path(const nlohmann::json& body) const {
        return config_.fixture_dir / (hex64(fnv1a64(body.dump())) + ".json");
    }

    std::string complete(const std::vector<ChatMessage>& messages) const override {
        const nlohmann::json body = request_body(messages);
        if (config_.fixture_mode == FixtureMode::Replay) return extract_content(load_fixture(body));

        const std::string payload = body.dump();
        std::string last_error;
        int delay_ms = config_.backoff_initial_ms;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
                delay_ms *= 2;
            }
            httplib::Client cli(base_);
            cli.set_connection_timeout(config_.timeout_s, 0);
            cli.set_read_timeout(config_.timeout_s, 0);
            cli.set_write_timeout(config_.timeout_s, 0);
            httplib::Headers headers;
            if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
            auto res = cli.Post(path_, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            nlohmann::json response;
            try {
                response = nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                last_error = std::string("response is not JSON: ") + e.what();
                continue;
            }
            if (config_.fixture_mode == FixtureMode::Record) save_fixture(body, response);
            return extract_content(response);
        }
        throw ServiceError("chat completion failed after " + std::to_string(config_.max_retries + 1) +
                           " attempts: " + last_error);
    }

    std::string describe() const override { return "http:" + config_.model + "@" + config_.endpoint; }

    static std::string extract_content(const nlohmann::json& response) {
        try {
            return response.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ServiceError(std::string("unexpected chat completion response shape: ") + e.what());
        }
    }

private:
    void split_endpoint() {
        const auto scheme_end = config_.endpoint.find("://");
        if (config_.endpoint.empty() || scheme_end == std::string::npos)
            throw ConfigError("LLM endpoint must be an absolute URL, got '" + config_.endpoint + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (config_.endpoint.compare(0, scheme_end, "http") != 0)
            throw ConfigError("only http:// endpoints are supported in this build, got '" + config_.endpoint + "'");
#endif
        const auto path_begin = config_.endpoint.find('/', scheme_end + 3);
        base_ = config_.endpoint.substr(0, path_begin);
        path_ = path_begin == std::string::npos ? "/" : config_.endpoint.substr(path_begin);
    }

    nlohmann::json load_fixture(const nlohmann::json& body) const {
        const auto path = fixture_path(body);
        std::ifstream in(path);
        if (!in) throw ServiceError("no recorded response for request (" + path.string() + ")");
        try {
            return nlohmann::json::parse(in).at("response");
        } catch (const nlohmann::json::exception& e) {
            throw ServiceError("corrupt fixture " + path.string() + ": " + e.what());
        }
    }

    void save_fixture(const nlohmann::json& body, const nlohmann::json& response) const {
        std::filesystem::create_directories(config_.fixture_dir);
        std::ofstream out(fixture_path(body));
        out << nlohmann::json{{"request", body}, {"response", response}}.dump(2) << '\n';
    }

    HttpClientConfig config_;
    std::string base_;
    std::string path_;
};

} // namespace expertaf
