#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "expertaf/error.hpp"
#include "expertaf/format.hpp"
#include "expertaf/pose_codec.hpp"
#include "expertaf/pose_geometry.hpp"

namespace expertaf::io {

namespace fs = std::filesystem;

inline std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

inline std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

inline std::string read_text(const fs::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Header-plus-rows numeric files. Every header line is "key value"; rows are
// space-separated numbers written in shortest round-trip form.

namespace detail {

class HeaderReader {
public:
    HeaderReader(std::istream& in, std::string file) : in_(in), file_(std::move(file)) {}

    std::string expect(std::string_view key) {
        std::string line;
        ++line_;
        if (!std::getline(in_, line) || line.rfind(std::string(key) + " ", 0) != 0)
            fail("expected '" + std::string(key) + " <value>'");
        return line.substr(key.size() + 1);
    }

    std::vector<double> row(std::size_t expected) {
        std::string line;
        ++line_;
        if (!std::getline(in_, line)) fail("unexpected end of file");
        std::vector<double> values;
        values.reserve(expected);
        std::istringstream ss(line);
        std::string tok;
        try {
            while (ss >> tok) values.push_back(parse_double(tok));
        } catch (const FormatError& e) {
            fail(e.what());
        }
        if (values.size() != expected)
            fail("expected " + std::to_string(expected) + " values, found " + std::to_string(values.size()));
        return values;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(file_ + ":" + std::to_string(line_) + ": " + what);
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::string file_;
    std::size_t line_ = 0;
};

inline void write_row(std::ostream& out, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) out << (i ? " " : "") << format_double(values[i]);
    out << '\n';
}

} // namespace detail

inline constexpr std::string_view kPoseMagic = "expertaf-pose";

/// Pose file: "expertaf-pose 1", "frames N", "joints 17", "fps F",
/// "source ID", then N rows of 51 values (joint-major x y z, meters).
inline void write_pose(std::ostream& out, const PoseSequence& pose) {
    out << kPoseMagic << " 1\nframes " << pose.size() << "\njoints " << kNumJoints << "\nfps "
        << format_double(pose.fps()) << "\nsource " << pose.source_id() << '\n';
    for (const auto& f : pose.frames()) detail::write_row(out, std::span<const double>(f.joints().data(), kFrameDim));
}

inline PoseSequence read_pose(std::istream& in, const std::string& name = "<pose>") {
    detail::HeaderReader r(in, name);
    if (r.expect(kPoseMagic) != "1") r.fail("unsupported pose format version");
    std::size_t n = 0, joints = 0;
    double fps = 0.0;
    try {
        n = parse_int<std::size_t>(r.expect("frames"));
        joints = parse_int<std::size_t>(r.expect("joints"));
        fps = parse_double(r.expect("fps"));
    } catch (const FormatError& e) {
        r.fail(e.what());
    }
    if (joints != kNumJoints) r.fail("joint count must be 17");
    const std::string source = r.expect("source");
    std::vector<PoseFrame> frames;
    frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = r.row(kFrameDim);
        try {
            frames.emplace_back(Eigen::Map<const JointMatrix>(v.data()));
        } catch (const InvalidPose& e) {
            r.fail(e.what());
        }
    }
    try {
        return PoseSequence(std::move(frames), fps, source);
    } catch (const InvalidPose& e) {
        r.fail(e.what());
    }
}

inline void save_pose(const fs::path& path, const PoseSequence& pose) {
    auto out = open_out(path);
    write_pose(out, pose);
}

inline PoseSequence load_pose(const fs::path& path) {
    auto in = open_in(path);
    return read_pose(in, path.string());
}

inline constexpr std::string_view kFeatureMagic = "expertaf-features";

struct FeatureTable {
    std::vector<std::vector<double>> rows;
    double rate = 4.0;
};

/// Feature file: "expertaf-features 1", "rows N", "dim D", "rate R"
/// (rows per second), then N rows of D values.
inline void write_features(std::ostream& out, const FeatureTable& table) {
    const std::size_t dim = table.rows.empty() ? 0 : table.rows.front().size();
    out << kFeatureMagic << " 1\nrows " << table.rows.size() << "\ndim " << dim << "\nrate "
        << format_double(table.rate) << '\n';
    for (const auto& row : table.rows) detail::write_row(out, row);
}

inline FeatureTable read_features(std::istream& in, const std::string& name = "<features>") {
    detail::HeaderReader r(in, name);
    if (r.expect(kFeatureMagic) != "1") r.fail("unsupported feature format version");
    FeatureTable table;
    std::size_t n = 0, dim = 0;
    try {
        n = parse_int<std::size_t>(r.expect("rows"));
        dim = parse_int<std::size_t>(r.expect("dim"));
        table.rate = parse_double(r.expect("rate"));
    } catch (const FormatError& e) {
        r.fail(e.what());
    }
    if (n > 0 && dim == 0) r.fail("feature dimension must be positive");
    for (std::size_t i = 0; i < n; ++i) table.rows.push_back(r.row(dim));
    return table;
}

inline void save_features(const fs::path& path, const FeatureTable& table) {
    auto out = open_out(path);
    write_features(out, table);
}

inline FeatureTable load_features(const fs::path& path) {
    auto in = open_in(path);
    return read_features(in, path.string());
}

inline constexpr std::string_view kTokenMagic = "expertaf-tokens";

/// Token file: "expertaf-tokens 1", "codebook FINGERPRINT", "fps F",
/// "source ID", "count N", then one line of N space-separated indices.
inline void write_tokens(std::ostream& out, const TokenSequence& tokens) {
    out << kTokenMagic << " 1\ncodebook " << tokens.codebook_fingerprint << "\nfps " << format_double(tokens.fps)
        << "\nsource " << tokens.source_id << "\ncount " << tokens.tokens.size() << '\n';
    for (std::size_t i = 0; i < tokens.tokens.size(); ++i) out << (i ? " " : "") << tokens.tokens[i];
    out << '\n';
}

inline TokenSequence read_tokens(std::istream& in, const std::string& name = "<tokens>") {
    detail::HeaderReader r(in, name);
    if (r.expect(kTokenMagic) != "1") r.fail("unsupported token format version");
    TokenSequence t;
    t.codebook_fingerprint = r.expect("codebook");
    std::size_t n = 0;
    try {
        t.fps = parse_double(r.expect("fps"));
        t.source_id = r.expect("source");
        n = parse_int<std::size_t>(r.expect("count"));
    } catch (const FormatError& e) {
        r.fail(e.what());
    }
    std::string line;
    std::getline(in, line);
    std::istringstream ss(line);
    std::string tok;
    try {
        while (ss >> tok) t.tokens.push_back(parse_int<std::size_t>(tok));
    } catch (const FormatError& e) {
        r.fail(e.what());
    }
    if (t.tokens.size() != n) r.fail("token count does not match header");
    return t;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON.

using Json = nlohmann::ordered_json;

/// Calls `fn(record, line_number)` for every non-blank line. Parse errors
/// and exceptions thrown by `fn` are rethrown with file:line context.
inline void for_each_jsonl(const fs::path& path, const std::function<void(const Json&, std::size_t)>& fn) {
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        Json record;
        try {
            record = Json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        }
        try {
            fn(record, line_no);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        } catch (const Error& e) {
            throw FormatError(where + ": " + e.kind() + ": " + e.what());
        }
    }
}

inline std::vector<Json> read_jsonl(const fs::path& path) {
    std::vector<Json> out;
    for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(j); });
    return out;
}

inline void write_jsonl(const fs::path& path, const std::vector<Json>& records) {
    auto out = open_out(path);
    for (const auto& r : records) out << r.dump() << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace expertaf::io
