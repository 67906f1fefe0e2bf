#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ecopo {

struct ModelDims {
    std::int32_t vocab = 0;
    std::int32_t d_emb = 32;
    std::int32_t hidden = 64;
    std::int32_t window = 2;

    std::int32_t window_span() const { return 2 * window + 1; }
    std::int32_t enc_in() const { return window_span() * d_emb; }

    bool operator==(const ModelDims&) const = default;
};

/// All differentiable parameters: token embeddings, a windowed tanh encoder,
/// and the linear projection to vocabulary logits. Double precision, row-major.
/// The same struct doubles as the gradient container (see zeros_like).
struct ModelParams {
    ModelDims dims;
    std::uint64_t init_seed = 0;

    std::vector<double> embedding;  // [vocab][d_emb]
    std::vector<double> enc_w;      // [hidden][enc_in]
    std::vector<double> enc_b;      // [hidden]
    std::vector<double> proj_w;     // [vocab][hidden]
    std::vector<double> proj_b;     // [vocab]

    /// Uniform(-s, s) init with s = 1/sqrt(fan_in) per matrix, deterministic
    /// given seed. Throws ConfigError on non-positive dimensions.
    static ModelParams init(const ModelDims& dims, std::uint64_t seed);

    ModelParams zeros_like() const;

    std::size_t param_count() const;
    double& param_at(std::size_t i);
    double param_at(std::size_t i) const;

    bool all_finite() const;

    /// x += alpha * g over all parameters. Shapes must match.
    void axpy(double alpha, const ModelParams& g);
};

/// Per-position forward activations for one sentence. Rows are length-`hidden`
/// (hidden_states) or length-`vocab` (logits, probs).
struct ForwardResult {
    std::size_t length = 0;
    std::int32_t hidden = 0;
    std::int32_t vocab = 0;

    std::vector<double> hidden_states;  // [length][hidden]
    std::vector<double> logits;         // [length][vocab]
    std::vector<double> probs;          // [length][vocab]
    std::vector<double> lse;            // [length], log-sum-exp of each logits row

    std::span<const double> hidden_row(std::size_t i) const {
        return {hidden_states.data() + i * static_cast<std::size_t>(hidden),
                static_cast<std::size_t>(hidden)};
    }
    std::span<const double> logits_row(std::size_t i) const {
        return {logits.data() + i * static_cast<std::size_t>(vocab),
                static_cast<std::size_t>(vocab)};
    }
    std::span<const double> probs_row(std::size_t i) const {
        return {probs.data() + i * static_cast<std::size_t>(vocab),
                static_cast<std::size_t>(vocab)};
    }
};

/// Max-shifted softmax; `out` must have the same length as `logits`.
void stable_softmax(std::span<const double> logits, std::span<double> out);

/// h_i = tanh(enc(concat of window embeddings, PAD-padded at the edges)),
/// logits_i = W h_i + b, probs_i = stable softmax. Throws Error on an empty
/// sentence or an id outside [0, vocab).
ForwardResult forward(const ModelParams& params, std::span<const std::int32_t> ids);

struct CeTerms {
    double neglogp_sum = 0.0;  // sum over included positions of -log p[target]
    std::size_t positions = 0; // included (non-PAD-target) position count
};

/// Cross-entropy pieces for one sentence; positions whose target is pad_id
/// are excluded. Computed from logits via log-sum-exp, so it is finite even
/// when a probability underflows.
CeTerms ce_terms(const ForwardResult& result, std::span<const std::int32_t> targets,
                 std::int32_t pad_id);

/// Adds scale * (probs - onehot(target)) into dlogits for included positions.
/// dlogits is a [length][vocab] row-major buffer.
void ce_backward_into(const ForwardResult& result, std::span<const std::int32_t> targets,
                      std::int32_t pad_id, double scale, std::vector<double>& dlogits);

/// Backpropagates per-position dL/dlogits through projection, encoder and
/// embeddings, accumulating into `grads` (shape of params, see zeros_like).
void backward(const ModelParams& params, std::span<const std::int32_t> ids,
              const ForwardResult& result, const std::vector<double>& dlogits,
              ModelParams& grads);

/// Mean cross-entropy over non-PAD positions of one sentence, with the full
/// parameter gradient. Returns loss 0 / zero gradient when nothing is included.
double cross_entropy_loss(const ModelParams& params, std::span<const std::int32_t> ids,
                          std::span<const std::int32_t> targets, std::int32_t pad_id,
                          ModelParams* grads = nullptr);

}  // namespace ecopo
