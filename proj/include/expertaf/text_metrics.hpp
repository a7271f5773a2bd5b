#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "expertaf/error.hpp"

namespace expertaf {

/// Lowercases, splits on whitespace, and makes every ASCII punctuation
/// character its own token. Shared by all text metrics.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            flush();
            tokens.emplace_back(1, static_cast<char>(c));
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return tokens;
}

inline constexpr std::string_view kTokenizerDescription = "lowercase; split on whitespace; ASCII punctuation as single tokens";

enum class BleuSmoothing {
    /// Zero n-gram matches count as epsilon instead of zero.
    AddEpsilon,
    None,
};

struct BleuOptions {
    BleuSmoothing smoothing = BleuSmoothing::AddEpsilon;
    double epsilon = 1e-9;
};

struct BleuBreakdown {
    std::array<std::size_t, 4> matches{};
    std::array<std::size_t, 4> totals{};
    std::size_t hypothesis_length = 0;
    std::size_t reference_length = 0;
    double brevity_penalty = 1.0;
    double score = 0.0;
};

namespace detail {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

inline NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
}

} // namespace detail

/// Sentence BLEU-4 with uniform weights. N-gram counts are clipped by their
/// maximum count in any single reference; the brevity penalty uses the
/// reference length closest to the hypothesis length (shorter on ties).
/// Orders longer than the hypothesis have no n-grams at all and are left out
/// of the geometric mean, so an exact short match still scores 1.
inline BleuBreakdown bleu4_breakdown(std::string_view hypothesis, const std::vector<std::string>& references,
                                     const BleuOptions& options = {}) {
    const auto hyp = tokenize(hypothesis);
    if (hyp.empty()) throw EmptyHypothesis("BLEU: hypothesis has no tokens");
    if (references.empty()) throw EmptyInput("BLEU: no references");

    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references) refs.push_back(tokenize(r));

    BleuBreakdown out;
    out.hypothesis_length = hyp.size();
    out.reference_length = refs.front().size();
    for (const auto& r : refs) {
        const auto diff = [&](std::size_t len) { return len > hyp.size() ? len - hyp.size() : hyp.size() - len; };
        if (diff(r.size()) < diff(out.reference_length) ||
            (diff(r.size()) == diff(out.reference_length) && r.size() < out.reference_length))
            out.reference_length = r.size();
    }

    double log_sum = 0.0;
    std::size_t orders = 0;
    bool zero = false;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto hyp_counts = detail::count_ngrams(hyp, n);
        detail::NgramCounts max_ref;
        for (const auto& r : refs)
            for (const auto& [gram, c] : detail::count_ngrams(r, n)) max_ref[gram] = std::max(max_ref[gram], c);
        std::size_t matched = 0, total = 0;
        for (const auto& [gram, c] : hyp_counts) {
            total += c;
            const auto it = max_ref.find(gram);
            if (it != max_ref.end()) matched += std::min(c, it->second);
        }
        out.matches[n - 1] = matched;
        out.totals[n - 1] = total;

        if (total == 0) continue;
        ++orders;
        if (matched > 0) {
            log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
        } else if (options.smoothing == BleuSmoothing::AddEpsilon) {
            log_sum += std::log(options.epsilon / static_cast<double>(total));
        } else {
            zero = true;
        }
    }

    const auto c = static_cast<double>(out.hypothesis_length);
    const auto r = static_cast<double>(out.reference_length);
    out.brevity_penalty = c < r ? std::exp(1.0 - r / c) : 1.0;
    out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / static_cast<double>(orders));
    return out;
}

inline double bleu4(std::string_view hypothesis, const std::vector<std::string>& references,
                    const BleuOptions& options = {}) {
    return bleu4_breakdown(hypothesis, references, options).score;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

struct RougeL {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline RougeL rouge_l(std::string_view hypothesis, std::string_view reference) {
    const auto hyp = tokenize(hypothesis);
    const auto ref = tokenize(reference);
    if (hyp.empty() || ref.empty()) throw EmptyInput("ROUGE-L: hypothesis and reference need tokens");
    const auto lcs = static_cast<double>(lcs_length(hyp, ref));
    RougeL out;
    if (lcs == 0.0) return out;
    out.precision = lcs / static_cast<double>(hyp.size());
    out.recall = lcs / static_cast<double>(ref.size());
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

inline double rouge_l_f1(std::string_view hypothesis, std::string_view reference) {
    return rouge_l(hypothesis, reference).f1;
}

} // namespace expertaf
