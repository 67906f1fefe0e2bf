#include "ecopo/eval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include "ecopo/error.hpp"
#include "ecopo/utf8.hpp"

namespace ecopo {

SentenceJudgement correct_sentence(const ModelParams& params, const Vocabulary& vocab,
                                   const ParallelSentence& sentence) {
    const std::vector<std::int32_t> src = vocab.encode(sentence.source);
    const std::vector<std::int32_t> tgt = vocab.encode(sentence.target);
    const ForwardResult result = forward(params, src);

    SentenceJudgement j;
    j.sentence = sentence;
    j.predicted.reserve(src.size());

    bool all_gold = true;
    bool changed_matches_errors = true;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const auto probs = result.probs_row(i);
        std::int32_t best = 0;
        double best_p = probs[0];
        for (std::size_t c = 1; c < probs.size(); ++c) {
            if (probs[c] > best_p) {
                best_p = probs[c];
                best = static_cast<std::int32_t>(c);
            }
        }
        j.predicted.push_back(vocab.char_of(best));
        const bool model_changed = best != src[i];
        const bool is_error = src[i] != tgt[i];
        j.changed = j.changed || model_changed;
        if (model_changed != is_error) changed_matches_errors = false;
        if (best != tgt[i]) all_gold = false;
    }
    j.detection_hit = changed_matches_errors;
    j.correction_hit = all_gold;
    return j;
}

std::vector<SentenceJudgement> judge_corpus(const ModelParams& params, const Vocabulary& vocab,
                                            std::span<const ParallelSentence> corpus) {
    std::vector<SentenceJudgement> judgements;
    judgements.reserve(corpus.size());
    for (const auto& s : corpus) {
        judgements.push_back(correct_sentence(params, vocab, s));
    }
    return judgements;
}

MetricsReport sentence_metrics(std::span<const SentenceJudgement> judgements, MetricLevel level) {
    if (judgements.empty()) {
        throw Error("sentence_metrics: empty judgement list");
    }
    MetricsReport report;
    report.level = level;
    for (const auto& j : judgements) {
        const bool hit = level == MetricLevel::Detection ? j.detection_hit : j.correction_hit;
        if (j.sentence.has_errors()) {
            if (j.changed && hit) {
                ++report.tp;
            } else {
                ++report.fn;
                if (j.changed) ++report.fp;  // altered the sentence yet missed
            }
        } else {
            if (j.changed) {
                ++report.fp;
            } else {
                ++report.tn;
            }
        }
    }
    const auto total = report.tp + report.fp + report.fn + report.tn;
    report.accuracy =
        total > 0 ? static_cast<double>(report.tp + report.tn) / static_cast<double>(total) : 0.0;
    report.precision = (report.tp + report.fp) > 0
                           ? static_cast<double>(report.tp) /
                                 static_cast<double>(report.tp + report.fp)
                           : 0.0;
    report.recall = (report.tp + report.fn) > 0
                        ? static_cast<double>(report.tp) /
                              static_cast<double>(report.tp + report.fn)
                        : 0.0;
    report.f1 = (report.precision + report.recall) > 0.0
                    ? 2.0 * report.precision * report.recall / (report.precision + report.recall)
                    : 0.0;
    return report;
}

ErrorTaxonomy classify_wrong_corrections(std::span<const SentenceJudgement> judgements,
                                         const CooccurrenceTable& table,
                                         const ConfusionSet& confusion, std::uint64_t threshold) {
    ErrorTaxonomy tax;
    for (const auto& j : judgements) {
        const auto& src = j.sentence.source;
        const auto& tgt = j.sentence.target;
        for (std::size_t i : j.sentence.error_positions) {
            const char32_t out = j.predicted[i];
            if (out == tgt[i]) continue;  // corrected: not a wrong-correction sample
            const char32_t left = i > 0 ? src[i - 1] : Vocabulary::kPadChar;
            const char32_t right = i + 1 < src.size() ? src[i + 1] : Vocabulary::kPadChar;
            if (is_common(out, left, right, table, threshold)) {
                ++tax.common_count;
            } else if (confusion.confusable(tgt[i], out)) {
                ++tax.confusing_count;
            } else {
                ++tax.other_count;
            }
        }
    }
    const std::uint64_t total = tax.total();
    if (total > 0) {
        tax.common_share = static_cast<double>(tax.common_count) / static_cast<double>(total);
        tax.confusing_share =
            static_cast<double>(tax.confusing_count) / static_cast<double>(total);
        tax.other_share = static_cast<double>(tax.other_count) / static_cast<double>(total);
    }
    return tax;
}

namespace {

std::string format_prob(double p) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), p);
    return std::string(buf, end);
}

}  // namespace

void export_heatmap(const ModelParams& params, const Vocabulary& vocab,
                    const ParallelSentence& sentence, std::size_t position,
                    std::span<const std::int32_t> common_ids,
                    std::span<const std::int32_t> confusing_ids, const std::string& path) {
    if (common_ids.size() != 5 || confusing_ids.size() != 5) {
        throw ConfigError("heatmap requires exactly 5 common and 5 confusing characters");
    }
    if (position >= sentence.source.size()) {
        throw ConfigError("heatmap position out of range");
    }
    std::set<std::int32_t> distinct(common_ids.begin(), common_ids.end());
    distinct.insert(confusing_ids.begin(), confusing_ids.end());
    if (distinct.size() != 10) {
        throw ConfigError("heatmap characters must be pairwise distinct");
    }
    const std::int32_t gold = vocab.id_of(sentence.target[position]);
    if (std::find(confusing_ids.begin(), confusing_ids.end(), gold) == confusing_ids.end()) {
        throw ConfigError("gold character must be among the confusing characters");
    }

    const ForwardResult result = forward(params, vocab.encode(sentence.source));
    const auto probs = result.probs_row(position);

    auto sorted_desc = [&](std::span<const std::int32_t> ids) {
        std::vector<std::int32_t> v(ids.begin(), ids.end());
        std::sort(v.begin(), v.end(), [&](std::int32_t a, std::int32_t b) {
            const double pa = probs[static_cast<std::size_t>(a)];
            const double pb = probs[static_cast<std::size_t>(b)];
            if (pa != pb) return pa > pb;
            return a < b;
        });
        return v;
    };

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open heatmap output: " + path);
    }
    out << "char,class,prob\n";
    for (std::int32_t id : sorted_desc(common_ids)) {
        out << utf8_encode(vocab.char_of(id)) << ",common,"
            << format_prob(probs[static_cast<std::size_t>(id)]) << "\n";
    }
    for (std::int32_t id : sorted_desc(confusing_ids)) {
        out << utf8_encode(vocab.char_of(id)) << ",confusing,"
            << format_prob(probs[static_cast<std::size_t>(id)]) << "\n";
    }
    if (!out) {
        throw Error("heatmap write failure: " + path);
    }
}

}  // namespace ecopo
