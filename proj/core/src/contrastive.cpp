#include "ecopo/contrastive.hpp"

#include <algorithm>

#include "ecopo/error.hpp"

namespace ecopo {

NegativeSelection select_negatives(std::span<const double> probs, std::int32_t positive_id,
                                   std::int32_t k) {
    const auto vocab = static_cast<std::int32_t>(probs.size());
    if (positive_id < 0 || positive_id >= vocab) {
        throw Error("select_negatives: positive id out of range");
    }
    if (k < 1) {
        throw ConfigError("select_negatives: K must be >= 1");
    }
    NegativeSelection sel;
    sel.positive_id = positive_id;
    if (k >= vocab) {
        k = vocab - 1;
        sel.clamped = true;
    }

    // Candidate set: all ids except the positive one.
    std::vector<std::int32_t> ids;
    ids.reserve(static_cast<std::size_t>(vocab) - 1);
    for (std::int32_t j = 0; j < vocab; ++j) {
        if (j != positive_id) ids.push_back(j);
    }
    const auto by_prob_then_id = [&probs](std::int32_t a, std::int32_t b) {
        const double pa = probs[static_cast<std::size_t>(a)];
        const double pb = probs[static_cast<std::size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    };
    std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), by_prob_then_id);
    ids.resize(static_cast<std::size_t>(k));

    sel.negative_ids = std::move(ids);
    sel.negative_probs.reserve(sel.negative_ids.size());
    for (std::int32_t id : sel.negative_ids) {
        sel.negative_probs.push_back(probs[static_cast<std::size_t>(id)]);
    }
    return sel;
}

namespace {

std::int32_t argmax_row(std::span<const double> probs) {
    std::int32_t best = 0;
    double best_p = probs[0];
    for (std::size_t j = 1; j < probs.size(); ++j) {
        if (probs[j] > best_p) {
            best_p = probs[j];
            best = static_cast<std::int32_t>(j);
        }
    }
    return best;
}

}  // namespace

std::vector<std::size_t> targeted_positions(const ForwardResult& result,
                                            std::span<const std::int32_t> targets,
                                            std::int32_t pad_id) {
    if (targets.size() != result.length) {
        throw Error("targeted_positions: target length mismatch");
    }
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < result.length; ++i) {
        if (targets[i] == pad_id) continue;
        if (argmax_row(result.probs_row(i)) != targets[i]) {
            positions.push_back(i);
        }
    }
    return positions;
}

std::vector<NegativeSelection> select_for_sentence(const ForwardResult& result,
                                                   std::span<const std::int32_t> targets,
                                                   std::int32_t k, std::int32_t pad_id) {
    std::vector<NegativeSelection> selections;
    for (std::size_t i : targeted_positions(result, targets, pad_id)) {
        NegativeSelection sel = select_negatives(result.probs_row(i), targets[i], k);
        sel.position = i;
        selections.push_back(std::move(sel));
    }
    return selections;
}

double cpo_eval(const ForwardResult& result, std::span<const NegativeSelection> selections,
                double inv_m, std::vector<double>* dlogits) {
    const auto vocab = static_cast<std::size_t>(result.vocab);
    double loss = 0.0;
    for (const NegativeSelection& sel : selections) {
        if (sel.negative_ids.empty()) continue;  // possible only at vocab 1
        const std::span<const double> p = result.probs_row(sel.position);
        const auto pos = static_cast<std::size_t>(sel.positive_id);
        const double inv_k = 1.0 / static_cast<double>(sel.negative_ids.size());

        double neg_sum = 0.0;
        for (std::int32_t id : sel.negative_ids) {
            neg_sum += p[static_cast<std::size_t>(id)];
        }
        loss += inv_m * (inv_k * neg_sum - p[pos]);

        if (dlogits == nullptr) continue;

        // dL/dp is sparse: -inv_m at the positive id, +inv_m*inv_k at each
        // negative. Chain through softmax: dL/dlogit_j = p_j (c_j - <c, p>).
        const double c_pos = -inv_m;
        const double c_neg = inv_m * inv_k;
        const double dot = c_pos * p[pos] + c_neg * neg_sum;

        double* d = dlogits->data() + sel.position * vocab;
        for (std::size_t j = 0; j < vocab; ++j) {
            d[j] -= p[j] * dot;
        }
        d[pos] += p[pos] * c_pos;
        for (std::int32_t id : sel.negative_ids) {
            d[static_cast<std::size_t>(id)] += p[static_cast<std::size_t>(id)] * c_neg;
        }
    }
    return loss;
}

SentenceLoss cpo_loss(const ForwardResult& result, std::span<const std::int32_t> targets,
                      std::int32_t k, std::int32_t pad_id) {
    SentenceLoss out;
    out.selections = select_for_sentence(result, targets, k, pad_id);
    out.dlogits.assign(result.length * static_cast<std::size_t>(result.vocab), 0.0);
    if (out.selections.empty()) {
        return out;  // no wrong corrections: zero loss, zero gradient
    }
    const double inv_m = 1.0 / static_cast<double>(out.selections.size());
    out.loss = cpo_eval(result, out.selections, inv_m, &out.dlogits);
    return out;
}

}  // namespace ecopo
