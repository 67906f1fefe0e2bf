#include "ecopo/vocab.hpp"

#include <algorithm>

#include "ecopo/error.hpp"
#include "ecopo/utf8.hpp"

namespace ecopo {

void Vocabulary::add(char32_t c) {
    if (ids_.emplace(c, static_cast<std::int32_t>(chars_.size())).second) {
        chars_.push_back(c);
    }
}

Vocabulary Vocabulary::from_corpus(std::span<const std::u32string> corpus) {
    if (corpus.empty()) {
        throw Error("empty corpus");
    }
    Vocabulary v;
    v.add(kPadChar);
    v.add(kUnkChar);
    for (const auto& sentence : corpus) {
        for (char32_t c : sentence) {
            v.add(c);
        }
    }
    return v;
}

Vocabulary Vocabulary::from_content_chars(std::span<const char32_t> content) {
    Vocabulary v;
    v.add(kPadChar);
    v.add(kUnkChar);
    for (char32_t c : content) {
        if (c == kPadChar || c == kUnkChar) {
            throw Error("vocabulary content contains a reserved sentinel character");
        }
        if (v.contains(c)) {
            throw Error("vocabulary content contains duplicate character: " + utf8_encode(c));
        }
        v.add(c);
    }
    return v;
}

char32_t Vocabulary::char_of(std::int32_t id) const {
    if (id < 0 || id >= size()) {
        throw Error("character id out of range: " + std::to_string(id));
    }
    return chars_[static_cast<std::size_t>(id)];
}

std::vector<std::int32_t> Vocabulary::encode(std::u32string_view text) const {
    std::vector<std::int32_t> ids;
    ids.reserve(text.size());
    for (char32_t c : text) {
        ids.push_back(id_of(c));
    }
    return ids;
}

std::u32string Vocabulary::decode(std::span<const std::int32_t> ids) const {
    std::u32string text;
    text.reserve(ids.size());
    for (std::int32_t id : ids) {
        text.push_back(char_of(id));
    }
    return text;
}

namespace {

void reject_or_warn(bool lenient, std::vector<std::string>* warnings, const std::string& msg) {
    if (!lenient) {
        throw FormatError(msg);
    }
    if (warnings != nullptr) {
        warnings->push_back(msg);
    }
}

}  // namespace

ConfusionSet ConfusionSet::parse_lines(std::span<const std::string> lines, const Vocabulary& vocab,
                                       bool lenient, std::vector<std::string>* warnings,
                                       const std::string& origin) {
    ConfusionSet set;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& raw = lines[i];
        const std::string where = origin + ":" + std::to_string(i + 1);
        if (raw.empty() || raw[0] == '#') {
            continue;
        }
        const auto tab = raw.find('\t');
        if (tab == std::string::npos || raw.find('\t', tab + 1) != std::string::npos) {
            throw FormatError(where + ": expected `<char>\\t<candidates>`");
        }
        const std::u32string key_text = utf8_decode(std::string_view(raw).substr(0, tab));
        const std::u32string cands = utf8_decode(std::string_view(raw).substr(tab + 1));
        if (key_text.size() != 1) {
            throw FormatError(where + ": entry key must be a single character");
        }
        const char32_t key = key_text[0];
        if (!vocab.contains(key)) {
            reject_or_warn(lenient, warnings,
                           where + ": entry character not in vocabulary: " + utf8_encode(key));
            if (lenient) continue;
        }
        if (set.entries_.find(key) != set.entries_.end()) {
            throw FormatError(where + ": duplicate entry for " + utf8_encode(key));
        }
        std::u32string kept;
        for (char32_t c : cands) {
            if (c == key) {
                reject_or_warn(lenient, warnings, where + ": entry lists its own key character");
                continue;
            }
            if (!vocab.contains(c)) {
                reject_or_warn(lenient, warnings,
                               where + ": candidate not in vocabulary: " + utf8_encode(c));
                continue;
            }
            if (kept.find(c) != std::u32string::npos) {
                reject_or_warn(lenient, warnings, where + ": duplicate candidate " + utf8_encode(c));
                continue;
            }
            kept.push_back(c);
        }
        if (kept.empty()) {
            reject_or_warn(lenient, warnings, where + ": entry has no usable candidates");
            continue;
        }
        set.entries_.emplace(key, std::move(kept));
    }
    return set;
}

ConfusionSet ConfusionSet::load(const std::string& path, const Vocabulary& vocab, bool lenient,
                                std::vector<std::string>* warnings) {
    return parse_lines(read_lines(path), vocab, lenient, warnings, path);
}

std::uint64_t CooccurrenceTable::count(char32_t a, char32_t b, Direction d) const {
    const std::uint64_t k = d == Direction::After ? key(a, b) : key(b, a);
    auto it = after_.find(k);
    return it == after_.end() ? 0 : it->second;
}

std::uint64_t CooccurrenceTable::nonzero_percentile(double pct) const {
    if (after_.empty()) {
        return 1;
    }
    std::vector<std::uint64_t> values;
    values.reserve(after_.size());
    for (const auto& [k, v] : after_) {
        values.push_back(v);
    }
    std::sort(values.begin(), values.end());
    pct = std::clamp(pct, 0.0, 100.0);
    auto rank = static_cast<std::size_t>(pct / 100.0 * static_cast<double>(values.size()));
    if (rank >= values.size()) {
        rank = values.size() - 1;
    }
    return values[rank];
}

CooccurrenceTable count_cooccurrence(std::span<const std::u32string> corpus,
                                     const Vocabulary& vocab) {
    CooccurrenceTable table;
    for (const auto& sentence : corpus) {
        table.corpus_size_ += sentence.size();
        for (std::size_t i = 0; i + 1 < sentence.size(); ++i) {
            const char32_t a = vocab.contains(sentence[i]) ? sentence[i] : Vocabulary::kUnkChar;
            const char32_t b =
                vocab.contains(sentence[i + 1]) ? sentence[i + 1] : Vocabulary::kUnkChar;
            ++table.after_[CooccurrenceTable::key(a, b)];
        }
    }
    return table;
}

bool is_common(char32_t c, char32_t left, char32_t right, const CooccurrenceTable& table,
               std::uint64_t threshold) {
    return table.count(left, c, CooccurrenceTable::Direction::After) > threshold ||
           table.count(c, right, CooccurrenceTable::Direction::After) > threshold;
}

}  // namespace ecopo
