#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "expertaf/error.hpp"

namespace expertaf {

enum class BodyRegion { Head = 0, Shoulder, Hands, Arms, Legs, Jump };

inline constexpr std::size_t kNumBodyRegions = 6;
inline constexpr std::array<BodyRegion, kNumBodyRegions> kAllBodyRegions = {
    BodyRegion::Head, BodyRegion::Shoulder, BodyRegion::Hands, BodyRegion::Arms, BodyRegion::Legs, BodyRegion::Jump};
inline constexpr std::array<std::string_view, kNumBodyRegions> kBodyRegionNames = {"Head", "Shoulder", "Hands",
                                                                                  "Arms", "Legs",     "Jump"};

constexpr std::string_view to_string(BodyRegion r) { return kBodyRegionNames[static_cast<std::size_t>(r)]; }

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

inline bool is_trim_char(unsigned char c) {
    return std::isspace(c) || c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '"' ||
           c == '\'' || c == '*' || c == '(' || c == ')' || c == '`';
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::string_view trim_punct(std::string_view s) {
    while (!s.empty() && is_trim_char(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_trim_char(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

} // namespace detail

/// Case-insensitive, ignores surrounding whitespace and punctuation.
inline std::optional<BodyRegion> parse_body_region(std::string_view text) {
    const std::string key = detail::lower(detail::trim_punct(text));
    for (std::size_t i = 0; i < kNumBodyRegions; ++i)
        if (key == detail::lower(kBodyRegionNames[i])) return kAllBodyRegions[i];
    return std::nullopt;
}

enum class RegionLabel { NeedsImprovement = 0, Correct = 1, NoMention = 2 };

constexpr int code(RegionLabel l) { return static_cast<int>(l); }

inline std::string_view to_string(RegionLabel l) {
    switch (l) {
    case RegionLabel::NeedsImprovement: return "NeedsImprovement";
    case RegionLabel::Correct: return "Correct";
    case RegionLabel::NoMention: return "NoMention";
    }
    return "NoMention";
}

inline RegionLabel parse_region_label(std::string_view s) {
    if (s == "NeedsImprovement") return RegionLabel::NeedsImprovement;
    if (s == "Correct") return RegionLabel::Correct;
    if (s == "NoMention") return RegionLabel::NoMention;
    throw FormatError("unknown region label '" + std::string(s) + "'");
}

struct CommentaryRecord {
    std::string text;
    double timestamp_s = 0.0;
    std::string video_id;
    std::string expert_id;
    std::string scenario;

    void validate() const {
        if (detail::trim(text).empty()) throw InvalidRecord("commentary text is empty");
        if (!(timestamp_s >= 0.0)) throw InvalidRecord("commentary timestamp must be >= 0");
        if (detail::trim(scenario).empty()) throw InvalidRecord("commentary scenario is empty");
    }
};

/// One-sentence summary plus a label for every body region.
struct CommentaryLabel {
    std::string summary;
    std::array<RegionLabel, kNumBodyRegions> labels{RegionLabel::NoMention, RegionLabel::NoMention,
                                                    RegionLabel::NoMention, RegionLabel::NoMention,
                                                    RegionLabel::NoMention, RegionLabel::NoMention};

    RegionLabel operator[](BodyRegion r) const { return labels[static_cast<std::size_t>(r)]; }
    RegionLabel& operator[](BodyRegion r) { return labels[static_cast<std::size_t>(r)]; }

    bool has(RegionLabel l) const { return std::find(labels.begin(), labels.end(), l) != labels.end(); }

    friend bool operator==(const CommentaryLabel&, const CommentaryLabel&) = default;
};

struct ChatMessage {
    std::string role;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// Few-shot prompt. The exemplar commentaries are basketball clips and stay
// verbatim for every scenario; only the scenario name in the instruction
// changes.
inline constexpr std::string_view kDefaultSystemPrompt = "You are a helpful assistant.";

inline constexpr std::string_view kInstructionPrefix = "The following is an expert commentary about a person playing ";
inline constexpr std::string_view kInstructionSuffix =
    ". Give a one sentence summary of the expert feedback and then mention which body parts out of Head, "
    "Shoulder, Hands, Arms, Legs, Jump needs improvement and which ones are good execution (you can choose "
    "multiple body parts). Here is the expert's commentary:\n\n";

inline constexpr std::string_view kIncorrectExemplar =
    "He came down on one foot that time. You want to make sure you come down on two feet. Right now he's "
    "putting a little bit too much pressure and stress. Then on top of that, his left knee is locked, which "
    "could easily cause some hypertension. So be very aware and careful of your landing.";

inline constexpr std::string_view kIncorrectExemplarAnswer =
    "One sentence summary: He came down on one foot and his left knee is locked, which could cause some "
    "hypertension.\nNeeds improvement parts: Legs, Jump.\nGood execution parts: None.";

inline constexpr std::string_view kCorrectExemplar =
    "Let's take a look at the placement of the shooter's left guy hand. You can see that it's in a really good "
    "position on the left side of the ball. If you take a look at the shooting hand, his right hand is "
    "underneath the ball with his right index finger in the middle section of the ball. His right index finger "
    "is in the middle section of the ball. This is good positioning of both his right shooting hand and his "
    "left guy hand on the ball.";

inline constexpr std::string_view kCorrectExemplarAnswer =
    "One sentence summary: Shooter's hand is in a really good position on the left side of the ball.\nNeeds "
    "improvement parts: None.\nGood execution parts: Hands.";

/// "rock climbing" -> "Rock climbing".
inline std::string display_scenario(std::string_view scenario) {
    std::string s(detail::trim(scenario));
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

struct PromptOptions {
    std::string system_prompt{kDefaultSystemPrompt};
};

inline std::vector<ChatMessage> build_prompt(const CommentaryRecord& record, const PromptOptions& options = {}) {
    record.validate();
    std::string instruction;
    instruction.append(kInstructionPrefix).append(display_scenario(record.scenario)).append(kInstructionSuffix);
    instruction.append(kIncorrectExemplar);
    return {
        {"system", options.system_prompt},
        {"user", std::move(instruction)},
        {"assistant", std::string(kIncorrectExemplarAnswer)},
        {"user", std::string(kCorrectExemplar)},
        {"assistant", std::string(kCorrectExemplarAnswer)},
        {"user", std::string(detail::trim(record.text))},
    };
}

/// Result of reading a labeling response. A response that does not follow
/// the answer grammar is discarded; that is a normal outcome, not an error.
struct ParseOutcome {
    std::optional<CommentaryLabel> label;
    /// MissingHeader, EmptySummary or UnknownRegion when discarded.
    std::string discard_kind;
    std::string discard_reason;
    std::vector<std::string> warnings;

    bool discarded() const noexcept { return !label.has_value(); }
};

namespace detail {

inline constexpr std::string_view kSummaryHeader = "one sentence summary:";
inline constexpr std::string_view kNeedsHeader = "needs improvement parts:";
inline constexpr std::string_view kGoodHeader = "good execution parts:";

// Models sometimes emit the two characters '\' 'n' instead of a newline.
inline std::string unescape_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
            out.push_back('\n');
            ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

/// Length of the first sentence if more text follows it, else npos.
inline std::size_t first_sentence_end(std::string_view s) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const char c = s[i];
        if ((c == '.' || c == '!' || c == '?') && std::isspace(static_cast<unsigned char>(s[i + 1]))) {
            if (!trim(s.substr(i + 1)).empty()) return i + 1;
        }
    }
    return std::string_view::npos;
}

inline std::vector<std::string> split_region_list(std::string_view field) {
    std::string norm(field);
    for (char& c : norm)
        if (c == ';' || c == '/' || c == '\n' || c == '&') c = ',';
    // " and " joins the last two items in prose lists.
    std::string lowered = lower(norm);
    for (std::size_t pos = lowered.find(" and "); pos != std::string::npos; pos = lowered.find(" and ", pos + 1)) {
        norm.replace(pos, 5, " , ");
        lowered.replace(pos, 5, " , ");
    }
    std::vector<std::string> items;
    std::size_t begin = 0;
    while (begin <= norm.size()) {
        std::size_t end = norm.find(',', begin);
        if (end == std::string::npos) end = norm.size();
        const auto item = trim_punct(std::string_view(norm).substr(begin, end - begin));
        if (!item.empty()) items.emplace_back(item);
        begin = end + 1;
    }
    return items;
}

inline bool parse_region_field(std::string_view field, std::vector<BodyRegion>& out, std::string& bad) {
    for (const auto& item : split_region_list(field)) {
        if (lower(item) == "none") continue;
        const auto region = parse_body_region(item);
        if (!region) {
            bad = item;
            return false;
        }
        out.push_back(*region);
    }
    return true;
}

} // namespace detail

inline ParseOutcome parse_label_response(std::string_view response_text) {
    ParseOutcome out;
    const std::string text = detail::unescape_newlines(response_text);
    const std::string lowered = detail::lower(text);

    const std::size_t h1 = lowered.find(detail::kSummaryHeader);
    const std::size_t h2 = h1 == std::string::npos ? h1 : lowered.find(detail::kNeedsHeader, h1);
    const std::size_t h3 = h2 == std::string::npos ? h2 : lowered.find(detail::kGoodHeader, h2);
    if (h1 == std::string::npos || h2 == std::string::npos || h3 == std::string::npos) {
        out.discard_kind = "MissingHeader";
        out.discard_reason = "missing answer header";
        return out;
    }

    const std::size_t summary_begin = h1 + detail::kSummaryHeader.size();
    std::string_view summary = detail::trim(std::string_view(text).substr(summary_begin, h2 - summary_begin));
    if (summary.empty()) {
        out.discard_kind = "EmptySummary";
        out.discard_reason = "empty summary";
        return out;
    }
    if (const auto end = detail::first_sentence_end(summary); end != std::string_view::npos) {
        out.warnings.push_back("summary has more than one sentence; kept the first");
        summary = detail::trim(summary.substr(0, end));
    }

    const std::size_t needs_begin = h2 + detail::kNeedsHeader.size();
    const std::string_view needs_field = std::string_view(text).substr(needs_begin, h3 - needs_begin);
    std::string_view good_field = detail::trim(std::string_view(text).substr(h3 + detail::kGoodHeader.size()));
    if (const auto nl = good_field.find('\n'); nl != std::string_view::npos) {
        out.warnings.push_back("ignored text after the good execution list");
        good_field = good_field.substr(0, nl);
    }

    std::vector<BodyRegion> needs, good;
    std::string bad;
    if (!detail::parse_region_field(needs_field, needs, bad) || !detail::parse_region_field(good_field, good, bad)) {
        out.discard_kind = "UnknownRegion";
        out.discard_reason = "unknown body region '" + bad + "'";
        return out;
    }

    CommentaryLabel label;
    label.summary = std::string(summary);
    for (BodyRegion r : good) label[r] = RegionLabel::Correct;
    // A region flagged in both lists stays flagged.
    for (BodyRegion r : needs) label[r] = RegionLabel::NeedsImprovement;
    out.label = std::move(label);
    return out;
}

/// Writes a label in the answer grammar that parse_label_response reads.
inline std::string serialize_label(const CommentaryLabel& label) {
    auto list = [&](RegionLabel want) {
        std::string s;
        for (BodyRegion r : kAllBodyRegions) {
            if (label[r] != want) continue;
            if (!s.empty()) s += ", ";
            s += to_string(r);
        }
        return s.empty() ? std::string("None") : s;
    };
    return "One sentence summary: " + label.summary + "\nNeeds improvement parts: " +
           list(RegionLabel::NeedsImprovement) + ".\nGood execution parts: " + list(RegionLabel::Correct) + ".";
}

} // namespace expertaf
