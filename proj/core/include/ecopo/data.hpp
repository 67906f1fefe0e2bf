#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecopo/vocab.hpp"

namespace ecopo {

/// Aligned (source, target) character sequences of equal length.
/// error_positions is exactly { i : source[i] != target[i] }, sorted.
struct ParallelSentence {
    std::u32string source;
    std::u32string target;
    std::vector<std::size_t> error_positions;

    bool has_errors() const { return !error_positions.empty(); }
};

/// Validates lengths and computes error positions. Throws FormatError on
/// empty or unequal-length inputs.
ParallelSentence make_parallel(std::u32string source, std::u32string target);

struct CorpusStats {
    std::size_t sentence_count = 0;
    double avg_length = 0.0;
    std::size_t error_count = 0;
};

/// Loads a two-column TSV corpus (`source\ttarget`, one sentence per line,
/// blank lines ignored). Throws FormatError naming the line on malformed
/// rows or length mismatches.
std::vector<ParallelSentence> load_parallel(const std::string& path);

std::vector<ParallelSentence> parse_parallel_lines(std::span<const std::string> lines,
                                                   const std::string& origin = "<memory>");

/// Writes the same TSV format; load_parallel(save_parallel(x)) round-trips.
void save_parallel(std::span<const ParallelSentence> corpus, const std::string& path);

/// Corrupts `clean` by confusion-set substitution: every position whose
/// character has a confusion entry is independently replaced, with
/// probability `rate`, by a uniformly drawn confusable. target = clean.
/// Deterministic given rng_seed. Throws on empty input or rate outside [0,1].
ParallelSentence inject_errors(const std::u32string& clean, const ConfusionSet& confusion,
                               double rate, std::uint64_t rng_seed);

/// inject_errors over a whole corpus; sentence i uses a generator seeded by
/// mix_seed(seed, i), so output is independent of execution order.
std::vector<ParallelSentence> generate_corpus(std::span<const std::u32string> clean,
                                              const ConfusionSet& confusion, double rate,
                                              std::uint64_t seed);

CorpusStats corpus_stats(std::span<const ParallelSentence> corpus);

}  // namespace ecopo
