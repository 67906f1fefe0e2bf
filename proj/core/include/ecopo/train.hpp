#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecopo/contrastive.hpp"
#include "ecopo/data.hpp"
#include "ecopo/model.hpp"
#include "ecopo/vocab.hpp"

namespace ecopo {

enum class LossKind { Ori, Cpo, Joint };

/// Denominator of the contrastive term: Targeted averages over the wrong-
/// correction positions M of the batch; Batch uses the literal batch size N.
enum class CpoAverage { Targeted, Batch };

struct TrainConfig {
    std::int32_t k = 5;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    std::int32_t batch_size = 64;
    double learning_rate = 0.5;
    std::int32_t epochs = 10;
    std::uint64_t seed = 0;
    CpoAverage cpo_average = CpoAverage::Targeted;
};

/// Throws ConfigError on invalid fields (and on lambda1 == lambda2 == 0 for
/// the joint loss).
void validate(const TrainConfig& config, LossKind kind);

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

/// One encoded mini-batch: per-sentence source and target id sequences.
struct Batch {
    std::vector<std::vector<std::int32_t>> inputs;
    std::vector<std::vector<std::int32_t>> targets;

    std::size_t size() const { return inputs.size(); }
};

Batch encode_batch(std::span<const ParallelSentence> sentences, const Vocabulary& vocab);

/// Frozen contrastive state captured at a base parameter point, so the same
/// (now smooth) objective can be re-evaluated at perturbed parameters.
struct FrozenSelection {
    std::vector<std::vector<NegativeSelection>> per_sentence;
    double inv_m = 0.0;
};

struct BatchLoss {
    double loss = 0.0;
    double ce = 0.0;   // unweighted cross-entropy component
    double cpo = 0.0;  // unweighted contrastive component
    std::size_t ce_positions = 0;
    std::size_t targeted = 0;
    std::vector<ForwardResult> results;
    std::vector<std::vector<double>> dlogits;  // empty unless want_grad
    FrozenSelection selection;                 // populated when the loss kind uses CPO
};

/// Loss (and optionally dL/dlogits) over a batch. With `frozen == nullptr`
/// the contrastive selections are re-taken from the current probabilities
/// (the error-driven path); otherwise the given selections and denominator
/// are reused, which freezes the loss to a differentiable function.
BatchLoss batch_loss(const ModelParams& params, const Batch& batch, LossKind kind,
                     const TrainConfig& config, std::int32_t pad_id,
                     const FrozenSelection* frozen = nullptr, bool want_grad = true);

/// Accumulates the parameter gradient for a batch whose dlogits were filled
/// by batch_loss.
void batch_backward(const ModelParams& params, const Batch& batch, const BatchLoss& loss,
                    ModelParams& grads);

struct EpochStats {
    double mean_loss = 0.0;
    double mean_ce = 0.0;
    double mean_cpo = 0.0;
    std::size_t targeted_positions = 0;
};

/// Per-step observability: emitted after selection + loss evaluation and
/// before the parameter update, so the two-stage structure is visible.
struct BatchEvent {
    std::int32_t epoch = 0;
    std::size_t batch_index = 0;
    double loss = 0.0;
    double ce = 0.0;
    double cpo = 0.0;
    std::size_t targeted = 0;
    std::size_t selected_negatives = 0;
};

using TrainHook = std::function<void(const BatchEvent&)>;

struct TrainResult {
    std::vector<EpochStats> epochs;
};

/// Mini-batch SGD over shuffled batches; negatives are re-selected at every
/// forward pass. Deterministic given config.seed. Throws TrainingDiverged
/// ("diverged ...") when a loss turns non-finite.
TrainResult train(ModelParams& params, const Vocabulary& vocab,
                  std::span<const ParallelSentence> corpus, const TrainConfig& config,
                  LossKind kind, const TrainHook& hook = {});

/// Compares analytic gradients against central finite differences (step h)
/// at `samples` randomly chosen parameter coordinates and returns the largest
/// relative error |a - n| / max(1, |a|, |n|). Contrastive selections are
/// frozen at the base point on both sides of the comparison.
double grad_check(const ModelParams& params, const Vocabulary& vocab,
                  std::span<const ParallelSentence> batch, LossKind kind,
                  const TrainConfig& config, int samples, std::uint64_t seed, double h = 1e-5);

}  // namespace ecopo
