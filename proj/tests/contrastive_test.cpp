#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ecopo/contrastive.hpp"
#include "ecopo/data.hpp"
#include "ecopo/error.hpp"
#include "ecopo/model.hpp"
#include "ecopo/rng.hpp"
#include "ecopo/train.hpp"
#include "ecopo/utf8.hpp"
#include "ecopo/vocab.hpp"
#include "support/oracles.hpp"

using namespace ecopo;
using namespace ecopo::testsupport;

namespace {

std::vector<double> random_distribution(Rng& rng, std::size_t n, bool quantized = false) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& x : p) {
        x = rng.uniform() + 1e-9;
        if (quantized) x = std::floor(x * 16.0) + 1.0;  // few distinct values: many ties
        sum += x;
    }
    for (double& x : p) x /= sum;
    return p;
}

/// ForwardResult shell around explicit probability rows (for loss-formula
/// tests that do not need a real forward pass).
ForwardResult result_from_probs(const std::vector<std::vector<double>>& rows) {
    ForwardResult r;
    r.length = rows.size();
    r.vocab = static_cast<std::int32_t>(rows[0].size());
    r.hidden = 1;
    r.hidden_states.assign(r.length, 0.0);
    r.lse.assign(r.length, 0.0);
    for (const auto& row : rows) {
        r.probs.insert(r.probs.end(), row.begin(), row.end());
        for (double p : row) r.logits.push_back(std::log(std::max(p, 1e-300)));
    }
    return r;
}

}  // namespace

TEST_CASE("top-K negatives exclude the gold character") {
    const std::vector<double> probs{0.6, 0.3, 0.1};
    const auto sel = select_negatives(probs, 0, 2);
    CHECK(sel.negative_ids == std::vector<std::int32_t>{1, 2});
    CHECK(sel.negative_probs == std::vector<double>{0.3, 0.1});
    CHECK(sel.positive_id == 0);
    CHECK_FALSE(sel.clamped);
}

TEST_CASE("ties break toward the lower id") {
    const std::vector<double> probs{0.25, 0.25, 0.25, 0.25};
    const auto sel = select_negatives(probs, 0, 2);
    CHECK(sel.negative_ids == std::vector<std::int32_t>{1, 2});
}

TEST_CASE("K at or above vocab clamps and flags") {
    const std::vector<double> probs{0.5, 0.3, 0.2};
    const auto sel = select_negatives(probs, 1, 10);
    CHECK(sel.clamped);
    CHECK(sel.negative_ids.size() == 2);
    CHECK(sel.negative_ids == std::vector<std::int32_t>{0, 2});

    CHECK_THROWS_AS(select_negatives(probs, 3, 1), Error);
    CHECK_THROWS_AS(select_negatives(probs, 0, 0), ConfigError);
}

TEST_CASE("selection equals the full-sort oracle on 1000 random vectors") {
    Rng rng(101);
    for (int it = 0; it < 1000; ++it) {
        const bool quantized = it % 5 == 0;
        const auto probs = random_distribution(rng, 202, quantized);
        const auto positive = static_cast<std::int32_t>(rng.below(202));
        for (std::int32_t k : {1, 5, 50, 201}) {
            const auto sel = select_negatives(probs, positive, k);
            CHECK(sel.negative_ids == brute_force_top_k(probs, positive, k));
            CHECK(std::is_sorted(sel.negative_probs.begin(), sel.negative_probs.end(),
                                 std::greater<double>()));
            CHECK(sel.negative_ids.size() ==
                  static_cast<std::size_t>(std::min<std::int32_t>(k, 201)));
        }
    }
}

TEST_CASE("targeted positions are the current wrong argmaxes") {
    const auto r = result_from_probs({
        {0.7, 0.2, 0.1},  // argmax 0
        {0.1, 0.8, 0.1},  // argmax 1
        {0.2, 0.3, 0.5},  // argmax 2
    });
    CHECK(targeted_positions(r, std::vector<std::int32_t>{0, 1, 2}, -1).empty());
    CHECK(targeted_positions(r, std::vector<std::int32_t>{0, 1, 1}, -1) ==
          std::vector<std::size_t>{2});
    CHECK(targeted_positions(r, std::vector<std::int32_t>{1, 0, 0}, -1) ==
          std::vector<std::size_t>{0, 1, 2});
    // PAD targets never targeted
    CHECK(targeted_positions(r, std::vector<std::int32_t>{0, 2, 2}, 0) ==
          std::vector<std::size_t>{1});
}

TEST_CASE("targeted positions match a brute-force argmax scan on random rows") {
    Rng rng(7);
    for (int it = 0; it < 50; ++it) {
        std::vector<std::vector<double>> rows;
        std::vector<std::int32_t> targets;
        const std::size_t len = 1 + rng.below(12);
        for (std::size_t i = 0; i < len; ++i) {
            rows.push_back(random_distribution(rng, 17, it % 3 == 0));
            targets.push_back(static_cast<std::int32_t>(rng.below(17)));
        }
        const auto r = result_from_probs(rows);
        const auto got = targeted_positions(r, targets, 0);

        std::vector<std::size_t> expected;
        for (std::size_t i = 0; i < len; ++i) {
            if (targets[i] == 0) continue;
            std::size_t best = 0;
            for (std::size_t j = 1; j < rows[i].size(); ++j) {
                if (rows[i][j] > rows[i][best]) best = j;
            }
            if (static_cast<std::int32_t>(best) != targets[i]) expected.push_back(i);
        }
        CHECK(got == expected);
    }
}

TEST_CASE("contrastive loss hand example") {
    // p(gold) = 0.2, negatives {0.5, 0.3}, K = 2, single targeted position:
    // -((0.2-0.5) + (0.2-0.3)) / 2 = 0.2
    const auto r = result_from_probs({{0.5, 0.2, 0.3}});
    const auto loss = cpo_loss(r, std::vector<std::int32_t>{1}, 2, -1);
    REQUIRE(loss.selections.size() == 1);
    CHECK(loss.selections[0].negative_ids == std::vector<std::int32_t>{0, 2});
    CHECK(loss.loss == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("minimum value at a certain positive") {
    const auto r = result_from_probs({{1.0, 0.0, 0.0, 0.0}});
    std::vector<NegativeSelection> sel{select_negatives(r.probs_row(0), 0, 2)};
    sel[0].position = 0;
    const double loss = cpo_eval(r, sel, 1.0, nullptr);
    CHECK(loss == -1.0);
}

TEST_CASE("no targeted positions: zero loss, zero gradient") {
    const auto r = result_from_probs({{0.9, 0.05, 0.05}, {0.1, 0.8, 0.1}});
    const auto loss = cpo_loss(r, std::vector<std::int32_t>{0, 1}, 2, -1);
    CHECK(loss.loss == 0.0);
    CHECK(loss.selections.empty());
    for (double d : loss.dlogits) CHECK(d == 0.0);
}

TEST_CASE("loss stays within [-1, 1] on random distributions") {
    Rng rng(19);
    for (int it = 0; it < 2000; ++it) {
        const std::size_t vocab = 2 + rng.below(40);
        const auto probs = random_distribution(rng, vocab);
        const auto gold = static_cast<std::int32_t>(rng.below(vocab));
        const auto k = static_cast<std::int32_t>(1 + rng.below(vocab + 1));  // may clamp
        const auto r = result_from_probs({probs});
        auto sel = select_negatives(r.probs_row(0), gold, k);
        sel.position = 0;
        const double loss = cpo_eval(r, std::vector<NegativeSelection>{sel}, 1.0, nullptr);
        CHECK(loss >= -1.0);
        CHECK(loss <= 1.0);
    }
}

TEST_CASE("joint loss is the weighted combination of its parts") {
    const Vocabulary vocab = Vocabulary::from_content_chars(std::vector<char32_t>{U'a', U'b', U'c'});
    const auto params = ModelParams::init({vocab.size(), 3, 4, 1}, 5);
    const auto corpus = parse_parallel_lines(std::vector<std::string>{{"abca\tabcb"}, {"cab\tcab"}});
    const Batch batch = encode_batch(corpus, vocab);

    TrainConfig config;
    config.k = 2;
    config.lambda1 = 0.7;
    config.lambda2 = 1.9;
    const auto joint = batch_loss(params, batch, LossKind::Joint, config, vocab.pad_id());
    const auto ori = batch_loss(params, batch, LossKind::Ori, config, vocab.pad_id());
    const auto cpo = batch_loss(params, batch, LossKind::Cpo, config, vocab.pad_id());

    CHECK(joint.loss == doctest::Approx(0.7 * ori.ce + 1.9 * cpo.cpo).epsilon(1e-12));

    SUBCASE("degenerate weightings reduce to the single objectives") {
        TrainConfig only_ce = config;
        only_ce.lambda1 = 1.0;
        only_ce.lambda2 = 0.0;
        const auto j1 = batch_loss(params, batch, LossKind::Joint, only_ce, vocab.pad_id());
        CHECK(j1.loss == doctest::Approx(ori.loss).epsilon(1e-15));

        TrainConfig only_cpo = config;
        only_cpo.lambda1 = 0.0;
        only_cpo.lambda2 = 1.0;
        const auto j2 = batch_loss(params, batch, LossKind::Joint, only_cpo, vocab.pad_id());
        CHECK(j2.loss == doctest::Approx(cpo.loss).epsilon(1e-15));
    }
}

TEST_CASE("batch averaging mode rescales the contrastive term") {
    const Vocabulary vocab = Vocabulary::from_content_chars(std::vector<char32_t>{U'a', U'b', U'c'});
    const auto params = ModelParams::init({vocab.size(), 3, 4, 1}, 29);
    const auto corpus = parse_parallel_lines(std::vector<std::string>{{"abca\tabcb"}, {"cab\tbab"}});
    const Batch batch = encode_batch(corpus, vocab);

    TrainConfig targeted;
    const auto by_m = batch_loss(params, batch, LossKind::Cpo, targeted, vocab.pad_id());
    TrainConfig by_batch = targeted;
    by_batch.cpo_average = CpoAverage::Batch;
    const auto by_n = batch_loss(params, batch, LossKind::Cpo, by_batch, vocab.pad_id());

    REQUIRE(by_m.targeted > 0);
    const double rescaled =
        by_m.loss * static_cast<double>(by_m.targeted) / static_cast<double>(batch.size());
    CHECK(by_n.loss == doctest::Approx(rescaled).epsilon(1e-12));
}

TEST_CASE("a small step against the frozen gradient does not increase the frozen loss") {
    const Vocabulary vocab = Vocabulary::from_content_chars(std::vector<char32_t>{
        U'a', U'b', U'c', U'd', U'e', U'f'});
    ModelParams params = ModelParams::init({vocab.size(), 4, 5, 2}, 13);
    const auto corpus = parse_parallel_lines(std::vector<std::string>{{"abcdef\tabcfed"}, {"fedcba\tfedcab"}});
    const Batch batch = encode_batch(corpus, vocab);
    const TrainConfig config;

    BatchLoss base = batch_loss(params, batch, LossKind::Cpo, config, vocab.pad_id());
    REQUIRE(base.targeted > 0);
    ModelParams grads = params.zeros_like();
    batch_backward(params, batch, base, grads);

    params.axpy(-1e-4, grads);
    const double after = batch_loss(params, batch, LossKind::Cpo, config, vocab.pad_id(),
                                    &base.selection, false)
                             .loss;
    CHECK(after <= base.loss + 1e-12);
}

TEST_CASE("50 frozen contrastive steps improve the gold rank at >=90% of targeted positions") {
    const Vocabulary vocab = Vocabulary::from_content_chars([] {
        std::vector<char32_t> v;
        for (int i = 0; i < 30; ++i) v.push_back(static_cast<char32_t>(U'a' + i));
        return v;
    }());
    ModelParams params = ModelParams::init({vocab.size(), 6, 8, 2}, 97);

    Rng rng(55);
    std::vector<std::string> lines;
    for (int s = 0; s < 8; ++s) {
        std::u32string tgt, src;
        for (int i = 0; i < 10; ++i) {
            tgt.push_back(vocab.char_of(2 + static_cast<std::int32_t>(rng.below(30))));
            src.push_back(rng.uniform() < 0.3
                              ? vocab.char_of(2 + static_cast<std::int32_t>(rng.below(30)))
                              : tgt.back());
        }
        lines.push_back(utf8_encode(src) + "\t" + utf8_encode(tgt));
    }
    const auto corpus = parse_parallel_lines(lines);
    const Batch batch = encode_batch(corpus, vocab);
    TrainConfig config;
    config.k = 5;

    // Freeze the selection at the starting point, then descend on it.
    BatchLoss base = batch_loss(params, batch, LossKind::Cpo, config, vocab.pad_id());
    REQUIRE(base.targeted >= 10);
    std::vector<std::size_t> before_ranks;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        for (const auto& sel : base.selection.per_sentence[s]) {
            before_ranks.push_back(
                probability_rank(base.results[s].probs_row(sel.position), sel.positive_id));
        }
    }

    for (int step = 0; step < 50; ++step) {
        BatchLoss loss = batch_loss(params, batch, LossKind::Cpo, config, vocab.pad_id(),
                                    &base.selection, true);
        ModelParams grads = params.zeros_like();
        batch_backward(params, batch, loss, grads);
        params.axpy(-0.05, grads);
    }

    std::size_t improved_or_equal = 0;
    std::size_t idx = 0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const ForwardResult after = forward(params, batch.inputs[s]);
        for (const auto& sel : base.selection.per_sentence[s]) {
            const std::size_t rank_after =
                probability_rank(after.probs_row(sel.position), sel.positive_id);
            if (rank_after <= before_ranks[idx]) ++improved_or_equal;
            ++idx;
        }
    }
    CHECK(static_cast<double>(improved_or_equal) >=
          0.9 * static_cast<double>(before_ranks.size()));
}
