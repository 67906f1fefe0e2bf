#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ecopo/error.hpp"
#include "ecopo/eval.hpp"
#include "ecopo/rng.hpp"
#include "ecopo/train.hpp"
#include "ecopo/utf8.hpp"
#include "support/tmpdir.hpp"

using namespace ecopo;
using namespace ecopo::testsupport;

namespace {

// Deterministic toy model that predicts a fixed character-to-character map of
// the window's center (identity map = a pure copier). Embeddings are scaled
// one-hots, the encoder forwards the center block, and the projection applies
// the map, so argmax(probs_i) == map(source_i) by a comfortable margin.
ModelParams mapped_model(const Vocabulary& vocab,
                         const std::vector<std::pair<char32_t, char32_t>>& map = {}) {
    const auto n = vocab.size();
    ModelDims dims{n, n, n, 1};
    ModelParams p = ModelParams::init(dims, 0).zeros_like();
    for (std::int32_t c = 0; c < n; ++c) {
        p.embedding[static_cast<std::size_t>(c) * n + c] = 4.0;
    }
    // encoder input blocks: [left | center | right]; forward the center block
    const auto enc_in = static_cast<std::size_t>(dims.enc_in());
    for (std::int32_t h = 0; h < n; ++h) {
        p.enc_w[static_cast<std::size_t>(h) * enc_in + static_cast<std::size_t>(n + h)] = 1.0;
    }
    std::vector<std::int32_t> out_of(static_cast<std::size_t>(n));
    for (std::int32_t c = 0; c < n; ++c) out_of[static_cast<std::size_t>(c)] = c;
    for (const auto& [from, to] : map) {
        out_of[static_cast<std::size_t>(vocab.id_of(from))] = vocab.id_of(to);
    }
    for (std::int32_t c = 0; c < n; ++c) {
        p.proj_w[static_cast<std::size_t>(out_of[static_cast<std::size_t>(c)]) * n + c] = 40.0;
    }
    return p;
}

Vocabulary abc_vocab() {
    return Vocabulary::from_content_chars(std::vector<char32_t>{U'a', U'b', U'c', U'd', U'e'});
}

SentenceJudgement judgement(const char* src, const char* tgt, const char* pred) {
    SentenceJudgement j;
    j.sentence = make_parallel(utf8_decode(src), utf8_decode(tgt));
    j.predicted = utf8_decode(pred);
    j.changed = j.predicted != j.sentence.source;
    j.correction_hit = j.predicted == j.sentence.target;
    std::vector<std::size_t> changed_positions;
    for (std::size_t i = 0; i < j.predicted.size(); ++i) {
        if (j.predicted[i] != j.sentence.source[i]) changed_positions.push_back(i);
    }
    j.detection_hit = changed_positions == j.sentence.error_positions;
    return j;
}

}  // namespace

TEST_CASE("a copying model on a clean sentence scores both hits without changing") {
    const auto vocab = abc_vocab();
    const auto params = mapped_model(vocab);
    const auto s = make_parallel(U"abcab", U"abcab");
    const auto j = correct_sentence(params, vocab, s);
    CHECK(j.predicted == U"abcab");
    CHECK_FALSE(j.changed);
    CHECK(j.detection_hit);
    CHECK(j.correction_hit);
}

TEST_CASE("a model that fixes the single error scores both hits") {
    const auto vocab = abc_vocab();
    const auto params = mapped_model(vocab, {{U'e', U'b'}});
    const auto s = make_parallel(U"aecab", U"abcab");  // error at 1: e -> b
    const auto j = correct_sentence(params, vocab, s);
    CHECK(j.predicted == U"abcab");
    CHECK(j.changed);
    CHECK(j.detection_hit);
    CHECK(j.correction_hit);
}

TEST_CASE("changing the wrong position misses detection") {
    const auto vocab = abc_vocab();
    // error at 1 (e->b) is left alone; clean position 'c' is rewritten
    const auto params = mapped_model(vocab, {{U'c', U'd'}});
    const auto s = make_parallel(U"aecab", U"abcab");
    const auto j = correct_sentence(params, vocab, s);
    CHECK(j.predicted == U"aedab");
    CHECK(j.changed);
    CHECK_FALSE(j.detection_hit);
    CHECK_FALSE(j.correction_hit);
}

TEST_CASE("correction_hit implies detection_hit on model outputs") {
    const auto vocab = abc_vocab();
    Rng rng(31);
    const auto params = mapped_model(vocab, {{U'e', U'b'}, {U'd', U'c'}});
    for (int it = 0; it < 200; ++it) {
        std::u32string tgt, src;
        for (int i = 0; i < 6; ++i) {
            tgt.push_back(vocab.char_of(2 + static_cast<std::int32_t>(rng.below(5))));
            src.push_back(rng.uniform() < 0.3
                              ? vocab.char_of(2 + static_cast<std::int32_t>(rng.below(5)))
                              : tgt.back());
        }
        const auto j = correct_sentence(params, vocab, make_parallel(src, tgt));
        if (j.correction_hit) CHECK(j.detection_hit);
        CHECK(j.predicted.size() == src.size());
    }
}

TEST_CASE("metrics on the all-perfect and never-changing models") {
    std::vector<SentenceJudgement> perfect{
        judgement("ab", "ab", "ab"),
        judgement("ax", "ab", "ab"),
        judgement("xy", "ab", "ab"),
    };
    for (auto level : {MetricLevel::Detection, MetricLevel::Correction}) {
        const auto m = sentence_metrics(perfect, level);
        CHECK(m.accuracy == 1.0);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }

    // the null model never changes anything; half the sentences have errors
    std::vector<SentenceJudgement> null_model{
        judgement("ab", "ab", "ab"),
        judgement("cd", "cd", "cd"),
        judgement("ax", "ab", "ax"),
        judgement("cx", "cd", "cx"),
    };
    for (auto level : {MetricLevel::Detection, MetricLevel::Correction}) {
        const auto m = sentence_metrics(null_model, level);
        CHECK(m.recall == 0.0);
        CHECK(m.precision == 0.0);
        CHECK(m.accuracy == 0.5);
        CHECK(m.f1 == 0.0);
        CHECK(m.tn == 2);
        CHECK(m.fn == 2);
    }
}

TEST_CASE("ten-sentence fixture matches the hand-computed confusion matrix") {
    // Detection level tally, worked out by hand:
    //   1. clean, untouched                 -> TN
    //   2. clean, untouched                 -> TN
    //   3. clean, changed                   -> FP
    //   4. error, exact positions, fixed    -> TP
    //   5. error, exact positions, wrong char -> TP (detection) / FN+FP (correction)
    //   6. error, left alone                -> FN
    //   7. error, wrong position changed    -> FN + FP
    //   8. error, fixed                     -> TP
    //   9. error, partially detected        -> FN + FP
    //  10. clean, untouched                 -> TN
    std::vector<SentenceJudgement> js{
        judgement("aa", "aa", "aa"),      // 1
        judgement("bb", "bb", "bb"),      // 2
        judgement("cc", "cc", "cd"),      // 3
        judgement("ax", "ab", "ab"),      // 4
        judgement("ax", "ab", "ac"),      // 5
        judgement("bx", "ba", "bx"),      // 6
        judgement("xa", "ba", "xc"),      // 7
        judgement("xyz", "abc", "abc"),   // 8
        judgement("xxa", "bba", "bxa"),   // 9
        judgement("dd", "dd", "dd"),      // 10
    };
    const auto det = sentence_metrics(js, MetricLevel::Detection);
    CHECK(det.tp == 3);
    CHECK(det.tn == 3);
    CHECK(det.fp == 3);
    CHECK(det.fn == 3);
    CHECK(det.accuracy == doctest::Approx(6.0 / 12.0));
    CHECK(det.precision == doctest::Approx(3.0 / 6.0));
    CHECK(det.recall == doctest::Approx(3.0 / 6.0));
    CHECK(det.f1 == doctest::Approx(0.5));

    const auto cor = sentence_metrics(js, MetricLevel::Correction);
    CHECK(cor.tp == 2);
    CHECK(cor.tn == 3);
    CHECK(cor.fp == 4);
    CHECK(cor.fn == 4);
    CHECK(cor.accuracy == doctest::Approx(5.0 / 13.0));
    CHECK(cor.precision == doctest::Approx(2.0 / 6.0));
    CHECK(cor.recall == doctest::Approx(2.0 / 6.0));
    CHECK(cor.f1 == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("metrics match a brute-force tally on random judgement lists") {
    Rng rng(71);
    for (int it = 0; it < 100; ++it) {
        std::vector<SentenceJudgement> js;
        const std::size_t n = 1 + rng.below(40);
        for (std::size_t i = 0; i < n; ++i) {
            const bool has_error = rng.uniform() < 0.5;
            std::u32string src = has_error ? U"ax" : U"ab";
            std::u32string tgt = U"ab";
            std::u32string pred;
            switch (rng.below(4)) {
                case 0: pred = src; break;     // untouched
                case 1: pred = tgt; break;     // fixed / copy of gold
                case 2: pred = U"ay"; break;   // wrong char at the error slot
                default: pred = U"zb"; break;  // wrong position
            }
            js.push_back(judgement(utf8_encode(src).c_str(), utf8_encode(tgt).c_str(),
                                   utf8_encode(pred).c_str()));
        }
        for (auto level : {MetricLevel::Detection, MetricLevel::Correction}) {
            const auto m = sentence_metrics(js, level);
            std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
            for (const auto& j : js) {
                const bool hit =
                    level == MetricLevel::Detection ? j.detection_hit : j.correction_hit;
                if (j.sentence.has_errors()) {
                    if (j.changed && hit) {
                        ++tp;
                    } else {
                        ++fn;
                        if (j.changed) ++fp;
                    }
                } else if (j.changed) {
                    ++fp;
                } else {
                    ++tn;
                }
            }
            CHECK(m.tp == tp);
            CHECK(m.fp == fp);
            CHECK(m.fn == fn);
            CHECK(m.tn == tn);
            const auto total = tp + fp + fn + tn;
            CHECK(m.accuracy == doctest::Approx(static_cast<double>(tp + tn) /
                                                static_cast<double>(total)));
        }
    }
}

TEST_CASE("empty judgement list is an error") {
    CHECK_THROWS_AS(sentence_metrics({}, MetricLevel::Detection), Error);
}

namespace {

CooccurrenceTable table_over(const std::vector<std::u32string>& corpus, const Vocabulary& vocab) {
    return count_cooccurrence(corpus, vocab);
}

}  // namespace

TEST_CASE("wrong corrections are classified common, then confusing, then other") {
    const auto vocab = abc_vocab();
    // "ab" appears 10x -> 'b' is common after 'a' at threshold 5
    std::vector<std::u32string> cooc(10, U"ab");
    const auto table = table_over(cooc, vocab);
    const auto confusion = ConfusionSet::parse_lines(std::vector<std::string>{{"c\td"}}, vocab);

    // sentence "ax" with gold "ac": error at position 1, left neighbour 'a'
    std::vector<SentenceJudgement> js;

    js.push_back(judgement("ad", "ac", "ab"));  // predicted 'b': common with left 'a'
    js.push_back(judgement("ad", "ac", "ad"));  // predicted 'd': in conf(c) -> confusing
    js.push_back(judgement("ad", "ac", "ae"));  // predicted 'e': other
    js.push_back(judgement("ad", "ac", "ac"));  // corrected: not a sample

    const auto tax = classify_wrong_corrections(js, table, confusion, 5);
    CHECK(tax.common_count == 1);
    CHECK(tax.confusing_count == 1);
    CHECK(tax.other_count == 1);
    CHECK(tax.total() == 3);
    CHECK(tax.common_share == doctest::Approx(1.0 / 3.0));
    CHECK(std::abs(tax.common_share + tax.confusing_share + tax.other_share - 1.0) <= 1e-9);
}

TEST_CASE("common takes precedence over confusing") {
    const auto vocab = abc_vocab();
    std::vector<std::u32string> cooc(10, U"ad");
    const auto table = table_over(cooc, vocab);
    const auto confusion = ConfusionSet::parse_lines(std::vector<std::string>{{"c\td"}}, vocab);
    // predicted 'd' is both common (follows 'a' 10x) and in conf(c)
    std::vector<SentenceJudgement> js{judgement("ab", "ac", "ad")};
    const auto tax = classify_wrong_corrections(js, table, confusion, 5);
    CHECK(tax.common_count == 1);
    CHECK(tax.confusing_count == 0);
}

TEST_CASE("taxonomy partitions wrong corrections against an independent recount") {
    const auto vocab = abc_vocab();
    std::vector<std::u32string> cooc{U"abab", U"bcbc", U"dede", U"aaaa", U"cdcd"};
    const auto table = table_over(cooc, vocab);
    const auto confusion = ConfusionSet::parse_lines(std::vector<std::string>{{"a\tbc"}, {"b\tad"}, {"c\te"}}, vocab);

    Rng rng(41);
    std::vector<SentenceJudgement> js;
    const std::u32string alphabet = U"abcde";
    for (int i = 0; i < 400; ++i) {
        std::u32string tgt, src, pred;
        for (int k = 0; k < 5; ++k) {
            tgt.push_back(alphabet[rng.below(5)]);
            src.push_back(rng.uniform() < 0.4 ? alphabet[rng.below(5)] : tgt.back());
            pred.push_back(rng.uniform() < 0.5 ? alphabet[rng.below(5)] : tgt.back());
        }
        js.push_back(judgement(utf8_encode(src).c_str(), utf8_encode(tgt).c_str(),
                               utf8_encode(pred).c_str()));
    }
    const std::uint64_t threshold = 1;
    const auto tax = classify_wrong_corrections(js, table, confusion, threshold);

    std::uint64_t common = 0, confusing = 0, other = 0, samples = 0;
    using D = CooccurrenceTable::Direction;
    for (const auto& j : js) {
        const auto& s = j.sentence;
        for (std::size_t i = 0; i < s.source.size(); ++i) {
            if (s.source[i] == s.target[i] || j.predicted[i] == s.target[i]) continue;
            ++samples;
            const char32_t out = j.predicted[i];
            const char32_t l = i > 0 ? s.source[i - 1] : U'\0';
            const char32_t r = i + 1 < s.source.size() ? s.source[i + 1] : U'\0';
            if (table.count(l, out, D::After) > threshold ||
                table.count(out, r, D::After) > threshold) {
                ++common;
            } else if (confusion.candidates(s.target[i]) != nullptr &&
                       confusion.candidates(s.target[i])->find(out) != std::u32string::npos) {
                ++confusing;
            } else {
                ++other;
            }
        }
    }
    CHECK(tax.common_count == common);
    CHECK(tax.confusing_count == confusing);
    CHECK(tax.other_count == other);
    CHECK(tax.total() == samples);
}

TEST_CASE("heatmap export format and ordering") {
    TmpDir tmp;
    std::vector<char32_t> content;
    for (int i = 0; i < 12; ++i) content.push_back(static_cast<char32_t>(U'a' + i));
    const auto vocab = Vocabulary::from_content_chars(content);
    const auto params = ModelParams::init({vocab.size(), 4, 6, 1}, 77);

    const auto sentence = make_parallel(U"abda", U"abca");  // gold at 2 is 'c'
    const std::vector<std::int32_t> common{vocab.id_of(U'e'), vocab.id_of(U'f'),
                                           vocab.id_of(U'g'), vocab.id_of(U'h'),
                                           vocab.id_of(U'i')};
    const std::vector<std::int32_t> confusing{vocab.id_of(U'c'), vocab.id_of(U'd'),
                                              vocab.id_of(U'j'), vocab.id_of(U'k'),
                                              vocab.id_of(U'l')};
    const auto path = tmp.file("heat.csv");
    export_heatmap(params, vocab, sentence, 2, common, confusing, path);

    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    CHECK(line == "char,class,prob");
    double prev = 2.0;
    double total = 0.0;
    int commons = 0, confusings = 0;
    bool in_confusing = false;
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const std::string cls = line.substr(c1 + 1, c2 - c1 - 1);
        const double prob = std::stod(line.substr(c2 + 1));
        CHECK(prob >= 0.0);
        CHECK(prob <= 1.0);
        total += prob;
        if (cls == "common") {
            CHECK_FALSE(in_confusing);  // common block comes first
            ++commons;
        } else {
            CHECK(cls == "confusing");
            if (!in_confusing) prev = 2.0;  // ordering restarts per block
            in_confusing = true;
            ++confusings;
        }
        CHECK(prob <= prev);
        prev = prob;
    }
    CHECK(commons == 5);
    CHECK(confusings == 5);
    CHECK(total <= 1.0 + 1e-12);
}

TEST_CASE("training raises the gold character's heatmap probability") {
    TmpDir tmp;
    std::vector<char32_t> content;
    for (int i = 0; i < 12; ++i) content.push_back(static_cast<char32_t>(U'a' + i));
    const auto vocab = Vocabulary::from_content_chars(content);
    const auto confusion =
        ConfusionSet::parse_lines(std::vector<std::string>{{"b\te"}, {"e\tb"}}, vocab);

    // every training sentence shows gold 'b' inside "a_c"; a third of them
    // corrupted to the confusable 'e'
    std::vector<std::u32string> clean(90, U"abc");
    const auto corpus = generate_corpus(clean, confusion, 0.33, 17);

    ModelParams params = ModelParams::init({vocab.size(), 6, 8, 1}, 55);
    const ModelParams before = params;
    TrainConfig config;
    config.epochs = 20;
    config.batch_size = 16;
    config.learning_rate = 0.5;
    config.k = 3;
    train(params, vocab, corpus, config, LossKind::Joint);

    const auto fixture = make_parallel(U"aec", U"abc");
    const std::vector<std::int32_t> common{vocab.id_of(U'f'), vocab.id_of(U'g'),
                                           vocab.id_of(U'h'), vocab.id_of(U'i'),
                                           vocab.id_of(U'j')};
    const std::vector<std::int32_t> confusing{vocab.id_of(U'b'), vocab.id_of(U'e'),
                                              vocab.id_of(U'c'), vocab.id_of(U'd'),
                                              vocab.id_of(U'l')};
    export_heatmap(before, vocab, fixture, 1, common, confusing, tmp.file("before.csv"));
    export_heatmap(params, vocab, fixture, 1, common, confusing, tmp.file("after.csv"));

    auto gold_prob = [&](const std::string& path) {
        std::istringstream in(slurp(path));
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.starts_with("b,confusing,")) {
                return std::stod(line.substr(std::string("b,confusing,").size()));
            }
        }
        FAIL("gold row missing in " << path);
        return 0.0;
    };
    CHECK(gold_prob(tmp.file("after.csv")) > gold_prob(tmp.file("before.csv")));
}

TEST_CASE("heatmap input validation") {
    TmpDir tmp;
    std::vector<char32_t> content;
    for (int i = 0; i < 12; ++i) content.push_back(static_cast<char32_t>(U'a' + i));
    const auto vocab = Vocabulary::from_content_chars(content);
    const auto params = ModelParams::init({vocab.size(), 4, 6, 1}, 77);
    const auto sentence = make_parallel(U"abda", U"abca");

    const std::vector<std::int32_t> common{2, 3, 4, 5, 6};
    std::vector<std::int32_t> confusing{vocab.id_of(U'c'), 8, 9, 10, 11};

    SUBCASE("duplicate ids") {
        std::vector<std::int32_t> dup = common;
        dup[0] = confusing[1];
        CHECK_THROWS_AS(
            export_heatmap(params, vocab, sentence, 2, dup, confusing, tmp.file("h.csv")),
            ConfigError);
    }
    SUBCASE("gold must be among the confusing characters") {
        std::vector<std::int32_t> no_gold = confusing;
        no_gold[0] = vocab.id_of(U'l');
        CHECK_THROWS_AS(
            export_heatmap(params, vocab, sentence, 2, common, no_gold, tmp.file("h.csv")),
            ConfigError);
    }
    SUBCASE("wrong list sizes") {
        std::vector<std::int32_t> four(common.begin(), common.begin() + 4);
        CHECK_THROWS_AS(
            export_heatmap(params, vocab, sentence, 2, four, confusing, tmp.file("h.csv")),
            ConfigError);
    }
    SUBCASE("position out of range") {
        CHECK_THROWS_AS(
            export_heatmap(params, vocab, sentence, 9, common, confusing, tmp.file("h.csv")),
            ConfigError);
    }
}
