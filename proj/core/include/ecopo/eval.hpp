#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecopo/data.hpp"
#include "ecopo/model.hpp"
#include "ecopo/vocab.hpp"

namespace ecopo {

/// Sentence-level outcome of running the model over one parallel sentence.
/// Comparisons are at the id level (out-of-vocabulary characters collapse
/// to UNK).
struct SentenceJudgement {
    ParallelSentence sentence;
    std::u32string predicted;
    bool detection_hit = false;   // positions changed by the model == error positions
    bool correction_hit = false;  // predicted == target everywhere
    bool changed = false;         // model altered at least one character
};

SentenceJudgement correct_sentence(const ModelParams& params, const Vocabulary& vocab,
                                   const ParallelSentence& sentence);

std::vector<SentenceJudgement> judge_corpus(const ModelParams& params, const Vocabulary& vocab,
                                            std::span<const ParallelSentence> corpus);

enum class MetricLevel { Detection, Correction };

/// Sentence-level confusion-matrix assignment:
///   TP: sentences with errors, changed and the level's hit is true.
///   FN: sentences with errors lacking that.
///   FP: error-free sentences the model changed, plus sentences with errors
///       that were changed without scoring the hit (counted in FN as well).
///   TN: error-free sentences left untouched.
/// accuracy = (TP+TN)/(TP+FP+FN+TN); precision, recall and F1 take 0 on
/// empty denominators.
struct MetricsReport {
    MetricLevel level = MetricLevel::Detection;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

MetricsReport sentence_metrics(std::span<const SentenceJudgement> judgements, MetricLevel level);

/// Wrong-correction breakdown. A wrong-correction sample is an error position
/// whose model output differs from gold; the output character is classified
/// common (co-occurrence rule, which takes precedence), else confusing
/// (member of the gold character's confusion entry), else other.
struct ErrorTaxonomy {
    std::uint64_t common_count = 0;
    std::uint64_t confusing_count = 0;
    std::uint64_t other_count = 0;
    double common_share = 0.0;
    double confusing_share = 0.0;
    double other_share = 0.0;

    std::uint64_t total() const { return common_count + confusing_count + other_count; }
};

ErrorTaxonomy classify_wrong_corrections(std::span<const SentenceJudgement> judgements,
                                         const CooccurrenceTable& table,
                                         const ConfusionSet& confusion, std::uint64_t threshold);

/// Writes a 10-row `char,class,prob` CSV for one position: the common block
/// first, then the confusing block, each sorted by probability descending.
/// The 10 ids must be pairwise distinct and the gold character must be among
/// the confusing ids.
void export_heatmap(const ModelParams& params, const Vocabulary& vocab,
                    const ParallelSentence& sentence, std::size_t position,
                    std::span<const std::int32_t> common_ids,
                    std::span<const std::int32_t> confusing_ids, const std::string& path);

}  // namespace ecopo
