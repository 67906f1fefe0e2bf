#include "ecopo/data.hpp"

#include <fstream>

#include "ecopo/error.hpp"
#include "ecopo/rng.hpp"
#include "ecopo/utf8.hpp"

namespace ecopo {

ParallelSentence make_parallel(std::u32string source, std::u32string target) {
    if (source.empty() || target.empty()) {
        throw FormatError("empty sentence");
    }
    if (source.size() != target.size()) {
        throw FormatError("source/target length mismatch (" + std::to_string(source.size()) +
                          " vs " + std::to_string(target.size()) + ")");
    }
    ParallelSentence s{std::move(source), std::move(target), {}};
    for (std::size_t i = 0; i < s.source.size(); ++i) {
        if (s.source[i] != s.target[i]) {
            s.error_positions.push_back(i);
        }
    }
    return s;
}

std::vector<ParallelSentence> parse_parallel_lines(std::span<const std::string> lines,
                                                   const std::string& origin) {
    std::vector<ParallelSentence> corpus;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& raw = lines[i];
        if (raw.empty()) {
            continue;
        }
        const std::string where = origin + ":" + std::to_string(i + 1);
        const auto tab = raw.find('\t');
        if (tab == std::string::npos || raw.find('\t', tab + 1) != std::string::npos) {
            throw FormatError(where + ": expected 2 tab-separated fields");
        }
        try {
            corpus.push_back(make_parallel(utf8_decode(std::string_view(raw).substr(0, tab)),
                                           utf8_decode(std::string_view(raw).substr(tab + 1))));
        } catch (const FormatError& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    return corpus;
}

std::vector<ParallelSentence> load_parallel(const std::string& path) {
    return parse_parallel_lines(read_lines(path), path);
}

void save_parallel(std::span<const ParallelSentence> corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open file for writing: " + path);
    }
    for (const auto& s : corpus) {
        out << utf8_encode(s.source) << '\t' << utf8_encode(s.target) << '\n';
    }
    if (!out) {
        throw Error("write failure: " + path);
    }
}

ParallelSentence inject_errors(const std::u32string& clean, const ConfusionSet& confusion,
                               double rate, std::uint64_t rng_seed) {
    if (clean.empty()) {
        throw ConfigError("inject_errors: empty sentence");
    }
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw ConfigError("inject_errors: rate must be in [0, 1]");
    }
    Rng rng(rng_seed);
    std::u32string source = clean;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const std::u32string* cands = confusion.candidates(clean[i]);
        if (cands == nullptr) {
            continue;  // positions without confusables are never corrupted
        }
        if (rng.uniform() < rate) {
            source[i] = (*cands)[static_cast<std::size_t>(rng.below(cands->size()))];
        }
    }
    return make_parallel(std::move(source), clean);
}

std::vector<ParallelSentence> generate_corpus(std::span<const std::u32string> clean,
                                              const ConfusionSet& confusion, double rate,
                                              std::uint64_t seed) {
    std::vector<ParallelSentence> corpus;
    corpus.reserve(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) {
        corpus.push_back(inject_errors(clean[i], confusion, rate, mix_seed(seed, i)));
    }
    return corpus;
}

CorpusStats corpus_stats(std::span<const ParallelSentence> corpus) {
    CorpusStats stats;
    stats.sentence_count = corpus.size();
    std::size_t total_len = 0;
    for (const auto& s : corpus) {
        total_len += s.source.size();
        stats.error_count += s.error_positions.size();
    }
    stats.avg_length = corpus.empty()
                           ? 0.0
                           : static_cast<double>(total_len) / static_cast<double>(corpus.size());
    return stats;
}

}  // namespace ecopo
