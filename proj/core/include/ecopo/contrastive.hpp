#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecopo/model.hpp"

namespace ecopo {

/// Error-driven negative samples for one position: the K highest-probability
/// characters excluding the gold one, probabilities non-increasing, ties
/// broken by lower id. `clamped` flags K >= vocab requests (reduced to
/// vocab - 1).
struct NegativeSelection {
    std::size_t position = 0;
    std::int32_t positive_id = 0;
    std::vector<std::int32_t> negative_ids;
    std::vector<double> negative_probs;
    bool clamped = false;
};

NegativeSelection select_negatives(std::span<const double> probs, std::int32_t positive_id,
                                   std::int32_t k);

/// Positions where the model's current argmax disagrees with the target
/// (its "wrong corrections"); PAD targets are skipped. Argmax ties break
/// toward the lower id.
std::vector<std::size_t> targeted_positions(const ForwardResult& result,
                                            std::span<const std::int32_t> targets,
                                            std::int32_t pad_id);

/// Negative selections at every targeted position of one sentence.
std::vector<NegativeSelection> select_for_sentence(const ForwardResult& result,
                                                   std::span<const std::int32_t> targets,
                                                   std::int32_t k, std::int32_t pad_id);

/// Contrastive probability term for frozen selections:
///   sum over selections of inv_m * (1/K) * sum_k [ p(neg_k) - p(pos) ]
/// (the negated mean probability gap). Selections are constants here;
/// gradients flow through both p(pos) and p(neg_k). When dlogits is given,
/// the contribution is chained through softmax and accumulated into it.
double cpo_eval(const ForwardResult& result, std::span<const NegativeSelection> selections,
                double inv_m, std::vector<double>* dlogits);

/// Loss value plus the per-position dL/dlogits buffer for one sentence.
struct SentenceLoss {
    double loss = 0.0;
    std::vector<double> dlogits;  // [length][vocab]
    std::vector<NegativeSelection> selections;
};

/// Contrastive loss for one sentence: selections are taken at the current
/// probabilities, averaged over the targeted-position count (0 when none).
SentenceLoss cpo_loss(const ForwardResult& result, std::span<const std::int32_t> targets,
                      std::int32_t k, std::int32_t pad_id);

}  // namespace ecopo
