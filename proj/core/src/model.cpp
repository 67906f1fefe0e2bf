#include "ecopo/model.hpp"

#include <cmath>
#include <limits>

#include "ecopo/error.hpp"
#include "ecopo/rng.hpp"

namespace ecopo {

namespace {

void fill_uniform(std::vector<double>& v, double s, Rng& rng) {
    for (double& x : v) {
        x = rng.uniform(-s, s);
    }
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed) {
    if (dims.vocab < 1 || dims.d_emb < 1 || dims.hidden < 1 || dims.window < 1) {
        throw ConfigError("model dimensions must be >= 1");
    }
    ModelParams p;
    p.dims = dims;
    p.init_seed = seed;
    p.embedding.resize(static_cast<std::size_t>(dims.vocab) * dims.d_emb);
    p.enc_w.resize(static_cast<std::size_t>(dims.hidden) * dims.enc_in());
    p.enc_b.resize(static_cast<std::size_t>(dims.hidden));
    p.proj_w.resize(static_cast<std::size_t>(dims.vocab) * dims.hidden);
    p.proj_b.resize(static_cast<std::size_t>(dims.vocab));

    Rng rng(seed);
    fill_uniform(p.embedding, 1.0 / std::sqrt(static_cast<double>(dims.d_emb)), rng);
    const double s_enc = 1.0 / std::sqrt(static_cast<double>(dims.enc_in()));
    fill_uniform(p.enc_w, s_enc, rng);
    fill_uniform(p.enc_b, s_enc, rng);
    const double s_proj = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
    fill_uniform(p.proj_w, s_proj, rng);
    fill_uniform(p.proj_b, s_proj, rng);
    return p;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z;
    z.dims = dims;
    z.init_seed = init_seed;
    z.embedding.assign(embedding.size(), 0.0);
    z.enc_w.assign(enc_w.size(), 0.0);
    z.enc_b.assign(enc_b.size(), 0.0);
    z.proj_w.assign(proj_w.size(), 0.0);
    z.proj_b.assign(proj_b.size(), 0.0);
    return z;
}

std::size_t ModelParams::param_count() const {
    return embedding.size() + enc_w.size() + enc_b.size() + proj_w.size() + proj_b.size();
}

double& ModelParams::param_at(std::size_t i) {
    if (i < embedding.size()) return embedding[i];
    i -= embedding.size();
    if (i < enc_w.size()) return enc_w[i];
    i -= enc_w.size();
    if (i < enc_b.size()) return enc_b[i];
    i -= enc_b.size();
    if (i < proj_w.size()) return proj_w[i];
    i -= proj_w.size();
    if (i < proj_b.size()) return proj_b[i];
    throw Error("parameter index out of range");
}

double ModelParams::param_at(std::size_t i) const {
    return const_cast<ModelParams*>(this)->param_at(i);
}

bool ModelParams::all_finite() const {
    auto ok = [](const std::vector<double>& v) {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    };
    return ok(embedding) && ok(enc_w) && ok(enc_b) && ok(proj_w) && ok(proj_b);
}

void ModelParams::axpy(double alpha, const ModelParams& g) {
    auto add = [alpha](std::vector<double>& x, const std::vector<double>& y) {
        if (x.size() != y.size()) throw Error("parameter shape mismatch in axpy");
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * y[i];
        }
    };
    add(embedding, g.embedding);
    add(enc_w, g.enc_w);
    add(enc_b, g.enc_b);
    add(proj_w, g.proj_w);
    add(proj_b, g.proj_b);
}

void stable_softmax(std::span<const double> logits, std::span<double> out) {
    double m = -std::numeric_limits<double>::infinity();
    for (double l : logits) {
        if (l > m) m = l;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - m);
        sum += out[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] *= inv;
    }
}

namespace {

// Gathers the PAD-padded window embeddings around position i into x.
void gather_window(const ModelParams& p, std::span<const std::int32_t> ids, std::size_t i,
                   double* x) {
    const auto d_emb = static_cast<std::size_t>(p.dims.d_emb);
    const std::int32_t w = p.dims.window;
    const auto n = static_cast<std::ptrdiff_t>(ids.size());
    for (std::int32_t o = -w; o <= w; ++o) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + o;
        const std::int32_t id = (j >= 0 && j < n) ? ids[static_cast<std::size_t>(j)] : 0;
        const double* src = p.embedding.data() + static_cast<std::size_t>(id) * d_emb;
        double* dst = x + static_cast<std::size_t>(o + w) * d_emb;
        for (std::size_t e = 0; e < d_emb; ++e) {
            dst[e] = src[e];
        }
    }
}

}  // namespace

ForwardResult forward(const ModelParams& params, std::span<const std::int32_t> ids) {
    if (ids.empty()) {
        throw Error("forward: empty sentence");
    }
    for (std::int32_t id : ids) {
        if (id < 0 || id >= params.dims.vocab) {
            throw Error("forward: character id out of range: " + std::to_string(id));
        }
    }
    const std::size_t n = ids.size();
    const auto hidden = static_cast<std::size_t>(params.dims.hidden);
    const auto vocab = static_cast<std::size_t>(params.dims.vocab);
    const auto enc_in = static_cast<std::size_t>(params.dims.enc_in());

    ForwardResult r;
    r.length = n;
    r.hidden = params.dims.hidden;
    r.vocab = params.dims.vocab;
    r.hidden_states.resize(n * hidden);
    r.logits.resize(n * vocab);
    r.probs.resize(n * vocab);
    r.lse.resize(n);

    std::vector<double> x(enc_in);
    for (std::size_t i = 0; i < n; ++i) {
        gather_window(params, ids, i, x.data());

        double* h = r.hidden_states.data() + i * hidden;
        for (std::size_t k = 0; k < hidden; ++k) {
            const double* wrow = params.enc_w.data() + k * enc_in;
            double z = params.enc_b[k];
            for (std::size_t j = 0; j < enc_in; ++j) {
                z += wrow[j] * x[j];
            }
            h[k] = std::tanh(z);
        }

        double* logits = r.logits.data() + i * vocab;
        for (std::size_t j = 0; j < vocab; ++j) {
            const double* wrow = params.proj_w.data() + j * hidden;
            double l = params.proj_b[j];
            for (std::size_t k = 0; k < hidden; ++k) {
                l += wrow[k] * h[k];
            }
            logits[j] = l;
        }

        // Max-shifted softmax, keeping the row's log-sum-exp for cheap
        // cross-entropy evaluation.
        double m = logits[0];
        for (std::size_t j = 1; j < vocab; ++j) {
            if (logits[j] > m) m = logits[j];
        }
        double* probs = r.probs.data() + i * vocab;
        double sum = 0.0;
        for (std::size_t j = 0; j < vocab; ++j) {
            probs[j] = std::exp(logits[j] - m);
            sum += probs[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < vocab; ++j) {
            probs[j] *= inv;
        }
        r.lse[i] = m + std::log(sum);
    }
    return r;
}

CeTerms ce_terms(const ForwardResult& result, std::span<const std::int32_t> targets,
                 std::int32_t pad_id) {
    if (targets.size() != result.length) {
        throw Error("ce_terms: target length mismatch");
    }
    CeTerms out;
    const auto vocab = static_cast<std::size_t>(result.vocab);
    for (std::size_t i = 0; i < result.length; ++i) {
        const std::int32_t t = targets[i];
        if (t == pad_id) continue;
        if (t < 0 || t >= result.vocab) {
            throw Error("ce_terms: target id out of range");
        }
        out.neglogp_sum += result.lse[i] - result.logits[i * vocab + static_cast<std::size_t>(t)];
        ++out.positions;
    }
    return out;
}

void ce_backward_into(const ForwardResult& result, std::span<const std::int32_t> targets,
                      std::int32_t pad_id, double scale, std::vector<double>& dlogits) {
    const auto vocab = static_cast<std::size_t>(result.vocab);
    if (dlogits.size() != result.length * vocab) {
        throw Error("ce_backward_into: dlogits shape mismatch");
    }
    for (std::size_t i = 0; i < result.length; ++i) {
        const std::int32_t t = targets[i];
        if (t == pad_id) continue;
        const double* p = result.probs.data() + i * vocab;
        double* d = dlogits.data() + i * vocab;
        for (std::size_t j = 0; j < vocab; ++j) {
            d[j] += scale * p[j];
        }
        d[static_cast<std::size_t>(t)] -= scale;
    }
}

void backward(const ModelParams& params, std::span<const std::int32_t> ids,
              const ForwardResult& result, const std::vector<double>& dlogits,
              ModelParams& grads) {
    const std::size_t n = result.length;
    const auto hidden = static_cast<std::size_t>(params.dims.hidden);
    const auto vocab = static_cast<std::size_t>(params.dims.vocab);
    const auto enc_in = static_cast<std::size_t>(params.dims.enc_in());
    const auto d_emb = static_cast<std::size_t>(params.dims.d_emb);
    const std::int32_t w = params.dims.window;
    if (ids.size() != n || dlogits.size() != n * vocab) {
        throw Error("backward: shape mismatch");
    }

    std::vector<double> x(enc_in);
    std::vector<double> dh(hidden);
    std::vector<double> dz(hidden);
    std::vector<double> dx(enc_in);

    for (std::size_t i = 0; i < n; ++i) {
        const double* dlog = dlogits.data() + i * vocab;
        const double* h = result.hidden_states.data() + i * hidden;

        // projection: dW[j] += dlog[j] * h, db[j] += dlog[j], dh = W^T dlog
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t j = 0; j < vocab; ++j) {
            const double g = dlog[j];
            if (g == 0.0) continue;
            grads.proj_b[j] += g;
            double* gw = grads.proj_w.data() + j * hidden;
            const double* wrow = params.proj_w.data() + j * hidden;
            for (std::size_t k = 0; k < hidden; ++k) {
                gw[k] += g * h[k];
                dh[k] += g * wrow[k];
            }
        }

        // tanh: dz = dh * (1 - h^2)
        for (std::size_t k = 0; k < hidden; ++k) {
            dz[k] = dh[k] * (1.0 - h[k] * h[k]);
        }

        // encoder: dEnc[k] += dz[k] * x, dbe[k] += dz[k], dx = Enc^T dz
        gather_window(params, ids, i, x.data());
        std::fill(dx.begin(), dx.end(), 0.0);
        for (std::size_t k = 0; k < hidden; ++k) {
            const double g = dz[k];
            grads.enc_b[k] += g;
            if (g == 0.0) continue;
            double* gw = grads.enc_w.data() + k * enc_in;
            const double* wrow = params.enc_w.data() + k * enc_in;
            for (std::size_t j = 0; j < enc_in; ++j) {
                gw[j] += g * x[j];
                dx[j] += g * wrow[j];
            }
        }

        // scatter dx into embedding rows of the window ids (PAD included)
        const auto len = static_cast<std::ptrdiff_t>(n);
        for (std::int32_t o = -w; o <= w; ++o) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + o;
            const std::int32_t id = (j >= 0 && j < len) ? ids[static_cast<std::size_t>(j)] : 0;
            double* ge = grads.embedding.data() + static_cast<std::size_t>(id) * d_emb;
            const double* src = dx.data() + static_cast<std::size_t>(o + w) * d_emb;
            for (std::size_t e = 0; e < d_emb; ++e) {
                ge[e] += src[e];
            }
        }
    }
}

double cross_entropy_loss(const ModelParams& params, std::span<const std::int32_t> ids,
                          std::span<const std::int32_t> targets, std::int32_t pad_id,
                          ModelParams* grads) {
    const ForwardResult result = forward(params, ids);
    const CeTerms terms = ce_terms(result, targets, pad_id);
    if (terms.positions == 0) {
        return 0.0;
    }
    const double loss = terms.neglogp_sum / static_cast<double>(terms.positions);
    if (grads != nullptr) {
        std::vector<double> dlogits(result.length * static_cast<std::size_t>(result.vocab), 0.0);
        ce_backward_into(result, targets, pad_id, 1.0 / static_cast<double>(terms.positions),
                         dlogits);
        backward(params, ids, result, dlogits, *grads);
    }
    return loss;
}

}  // namespace ecopo
