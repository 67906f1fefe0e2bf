#include "ecopo/train.hpp"

#include <cmath>
#include <numeric>

#include "ecopo/error.hpp"
#include "ecopo/rng.hpp"

namespace ecopo {

void validate(const TrainConfig& config, LossKind kind) {
    if (config.k < 1) throw ConfigError("K must be >= 1");
    if (config.lambda1 < 0.0 || config.lambda2 < 0.0) throw ConfigError("lambdas must be >= 0");
    if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (kind == LossKind::Joint && config.lambda1 == 0.0 && config.lambda2 == 0.0) {
        throw ConfigError("joint loss requires lambda1 or lambda2 to be nonzero");
    }
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "ori") return LossKind::Ori;
    if (name == "cpo") return LossKind::Cpo;
    if (name == "joint") return LossKind::Joint;
    throw ConfigError("unknown loss kind: " + name + " (expected ori|cpo|joint)");
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Ori: return "ori";
        case LossKind::Cpo: return "cpo";
        case LossKind::Joint: return "joint";
    }
    return "?";
}

Batch encode_batch(std::span<const ParallelSentence> sentences, const Vocabulary& vocab) {
    Batch batch;
    batch.inputs.reserve(sentences.size());
    batch.targets.reserve(sentences.size());
    for (const auto& s : sentences) {
        batch.inputs.push_back(vocab.encode(s.source));
        batch.targets.push_back(vocab.encode(s.target));
    }
    return batch;
}

namespace {

// Effective weights: Ori and Cpo are the degenerate single-term objectives.
std::pair<double, double> loss_weights(LossKind kind, const TrainConfig& config) {
    switch (kind) {
        case LossKind::Ori: return {1.0, 0.0};
        case LossKind::Cpo: return {0.0, 1.0};
        case LossKind::Joint: return {config.lambda1, config.lambda2};
    }
    return {1.0, 0.0};
}

}  // namespace

BatchLoss batch_loss(const ModelParams& params, const Batch& batch, LossKind kind,
                     const TrainConfig& config, std::int32_t pad_id,
                     const FrozenSelection* frozen, bool want_grad) {
    if (batch.inputs.size() != batch.targets.size()) {
        throw Error("batch_loss: input/target count mismatch");
    }
    const auto [w_ce, w_cpo] = loss_weights(kind, config);
    const bool needs_cpo = w_cpo != 0.0;

    BatchLoss out;
    out.results.reserve(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
        out.results.push_back(forward(params, batch.inputs[s]));
    }

    // First pass: denominators. CE averages over all non-PAD positions of the
    // batch; CPO over the targeted-position count M (or the batch size N).
    std::size_t ce_positions = 0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        ce_positions += ce_terms(out.results[s], batch.targets[s], pad_id).positions;
    }
    out.ce_positions = ce_positions;

    FrozenSelection fresh;
    const FrozenSelection* sel = frozen;
    if (needs_cpo && sel == nullptr) {
        fresh.per_sentence.resize(batch.size());
        std::size_t targeted = 0;
        for (std::size_t s = 0; s < batch.size(); ++s) {
            fresh.per_sentence[s] =
                select_for_sentence(out.results[s], batch.targets[s], config.k, pad_id);
            targeted += fresh.per_sentence[s].size();
        }
        if (config.cpo_average == CpoAverage::Batch) {
            fresh.inv_m = batch.size() > 0 ? 1.0 / static_cast<double>(batch.size()) : 0.0;
        } else {
            fresh.inv_m = targeted > 0 ? 1.0 / static_cast<double>(targeted) : 0.0;
        }
        sel = &fresh;
    }
    if (needs_cpo) {
        for (const auto& per_sentence : sel->per_sentence) {
            out.targeted += per_sentence.size();
        }
    }

    if (want_grad) {
        out.dlogits.resize(batch.size());
        for (std::size_t s = 0; s < batch.size(); ++s) {
            out.dlogits[s].assign(
                out.results[s].length * static_cast<std::size_t>(out.results[s].vocab), 0.0);
        }
    }

    // Second pass: loss terms and (optionally) dL/dlogits.
    double ce_sum = 0.0;
    double cpo_sum = 0.0;
    const double ce_scale = ce_positions > 0 ? 1.0 / static_cast<double>(ce_positions) : 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const ForwardResult& r = out.results[s];
        if (w_ce != 0.0 && ce_positions > 0) {
            ce_sum += ce_terms(r, batch.targets[s], pad_id).neglogp_sum * ce_scale;
        }
        if (needs_cpo && s < sel->per_sentence.size() && !sel->per_sentence[s].empty()) {
            std::vector<double>* d = nullptr;
            std::vector<double> scratch;
            if (want_grad) {
                // CPO gradient accumulates into a scratch buffer first so the
                // lambda weight can be applied once.
                scratch.assign(r.length * static_cast<std::size_t>(r.vocab), 0.0);
                d = &scratch;
            }
            cpo_sum += cpo_eval(r, sel->per_sentence[s], sel->inv_m, d);
            if (want_grad && w_cpo != 0.0) {
                for (std::size_t j = 0; j < scratch.size(); ++j) {
                    out.dlogits[s][j] += w_cpo * scratch[j];
                }
            }
        }
    }
    if (want_grad && w_ce != 0.0 && ce_positions > 0) {
        for (std::size_t s = 0; s < batch.size(); ++s) {
            ce_backward_into(out.results[s], batch.targets[s], pad_id, w_ce * ce_scale,
                             out.dlogits[s]);
        }
    }

    out.ce = ce_sum;
    out.cpo = cpo_sum;
    out.loss = w_ce * ce_sum + w_cpo * cpo_sum;
    if (needs_cpo && frozen == nullptr) {
        out.selection = std::move(fresh);
    }
    return out;
}

void batch_backward(const ModelParams& params, const Batch& batch, const BatchLoss& loss,
                    ModelParams& grads) {
    if (loss.dlogits.size() != batch.size()) {
        throw Error("batch_backward: loss carries no gradients");
    }
    for (std::size_t s = 0; s < batch.size(); ++s) {
        backward(params, batch.inputs[s], loss.results[s], loss.dlogits[s], grads);
    }
}

TrainResult train(ModelParams& params, const Vocabulary& vocab,
                  std::span<const ParallelSentence> corpus, const TrainConfig& config,
                  LossKind kind, const TrainHook& hook) {
    validate(config, kind);
    if (corpus.empty()) {
        throw ConfigError("train: empty corpus");
    }

    const Batch all = encode_batch(corpus, vocab);
    const std::int32_t pad_id = vocab.pad_id();
    const auto batch_size = static_cast<std::size_t>(config.batch_size);

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    ModelParams grads = params.zeros_like();
    for (std::int32_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        shuffle(order, rng);

        EpochStats stats;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(start + batch_size, order.size());
            Batch batch;
            batch.inputs.reserve(end - start);
            batch.targets.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch.inputs.push_back(all.inputs[order[i]]);
                batch.targets.push_back(all.targets[order[i]]);
            }

            // Stage 1 (selection) and stage 2 (loss) happen inside batch_loss;
            // the update below only applies the already-computed gradient.
            BatchLoss loss = batch_loss(params, batch, kind, config, pad_id);
            if (!std::isfinite(loss.loss)) {
                throw TrainingDiverged(epoch, batches,
                                       "diverged: non-finite loss at epoch " +
                                           std::to_string(epoch) + ", batch " +
                                           std::to_string(batches));
            }
            if (hook) {
                BatchEvent ev;
                ev.epoch = epoch;
                ev.batch_index = batches;
                ev.loss = loss.loss;
                ev.ce = loss.ce;
                ev.cpo = loss.cpo;
                ev.targeted = loss.targeted;
                for (const auto& per_sentence : loss.selection.per_sentence) {
                    for (const auto& sel : per_sentence) {
                        ev.selected_negatives += sel.negative_ids.size();
                    }
                }
                hook(ev);
            }

            grads = params.zeros_like();
            batch_backward(params, batch, loss, grads);
            params.axpy(-config.learning_rate, grads);

            stats.mean_loss += loss.loss;
            stats.mean_ce += loss.ce;
            stats.mean_cpo += loss.cpo;
            stats.targeted_positions += loss.targeted;
            ++batches;
        }
        if (batches > 0) {
            stats.mean_loss /= static_cast<double>(batches);
            stats.mean_ce /= static_cast<double>(batches);
            stats.mean_cpo /= static_cast<double>(batches);
        }
        if (!params.all_finite()) {
            throw TrainingDiverged(epoch, batches,
                                   "diverged: non-finite parameters after epoch " +
                                       std::to_string(epoch));
        }
        result.epochs.push_back(stats);
    }
    return result;
}

double grad_check(const ModelParams& params, const Vocabulary& vocab,
                  std::span<const ParallelSentence> batch_sentences, LossKind kind,
                  const TrainConfig& config, int samples, std::uint64_t seed, double h) {
    if (samples < 1) {
        throw ConfigError("grad_check: samples must be >= 1");
    }
    const Batch batch = encode_batch(batch_sentences, vocab);
    const std::int32_t pad_id = vocab.pad_id();

    // Analytic gradient with selections captured at the base point.
    BatchLoss base = batch_loss(params, batch, kind, config, pad_id);
    ModelParams grads = params.zeros_like();
    batch_backward(params, batch, base, grads);
    const FrozenSelection* frozen = &base.selection;

    ModelParams probe = params;
    Rng rng(seed);
    double max_rel = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto idx = static_cast<std::size_t>(rng.below(probe.param_count()));
        const double original = probe.param_at(idx);

        probe.param_at(idx) = original + h;
        const double up = batch_loss(probe, batch, kind, config, pad_id, frozen, false).loss;
        probe.param_at(idx) = original - h;
        const double down = batch_loss(probe, batch, kind, config, pad_id, frozen, false).loss;
        probe.param_at(idx) = original;

        const double numeric = (up - down) / (2.0 * h);
        const double analytic = grads.param_at(idx);
        const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
        max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
    }
    return max_rel;
}

}  // namespace ecopo
