#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "formmi/errors.hpp"
#include "formmi/matrix.hpp"
#include "formmi/rng.hpp"

namespace formmi {

inline constexpr double kLn2 = 0.69314718055994530941723212145818;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Stable log2 softmax.
inline void log2_softmax(const double* logits, int n, double* out) {
    double m = logits[0];
    for (int i = 1; i < n; ++i) m = std::max(m, logits[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += std::exp(logits[i] - m);
    const double log_z = m + std::log(z);
    for (int i = 0; i < n; ++i) out[i] = (logits[i] - log_z) / kLn2;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> out(logits.size());
    log2_softmax(logits.data(), static_cast<int>(logits.size()), out.data());
    for (double& x : out) x = std::exp2(x);
    return out;
}

// Inverted dropout: identity in evaluation mode, mask-and-rescale in training.
inline std::vector<double> dropout(const std::vector<double>& v, double rate, Rng& rng, bool training) {
    if (!training || rate == 0.0) return v;
    if (rate < 0.0 || rate >= 1.0) throw config_error("dropout rate must be in [0,1)");
    std::vector<double> out(v.size());
    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = rng.uniform() < rate ? 0.0 : v[i] * scale;
    }
    return out;
}

struct LstmLayerParams {
    Matrix w_x;                // 4h x in, gate blocks [i f g o]
    Matrix w_h;                // 4h x h
    std::vector<double> bias;  // 4h
};

// Parameters of a phone-level LSTM LM. num_concepts > 0 means the model is
// concept-conditioned: init_proj maps a one-hot concept to layer 1's h0.
struct LstmParams {
    int vocab = 0;        // |alphabet| + 1 (eos)
    int embed_dim = 0;
    int hidden_dim = 0;
    int num_layers = 1;
    int num_concepts = 0;  // 0 = unconditioned

    Matrix embedding;  // vocab x embed_dim
    std::vector<LstmLayerParams> layers;
    Matrix init_proj;  // hidden x num_concepts
    Matrix out_w;      // vocab x hidden
    std::vector<double> out_b;

    static LstmParams create(int vocab, int embed_dim, int hidden_dim, int num_layers, int num_concepts) {
        LstmParams p;
        p.vocab = vocab;
        p.embed_dim = embed_dim;
        p.hidden_dim = hidden_dim;
        p.num_layers = num_layers;
        p.num_concepts = num_concepts;
        p.embedding = Matrix(vocab, embed_dim);
        p.layers.resize(static_cast<std::size_t>(num_layers));
        for (int l = 0; l < num_layers; ++l) {
            const int in = l == 0 ? embed_dim : hidden_dim;
            p.layers[static_cast<std::size_t>(l)].w_x = Matrix(4 * hidden_dim, in);
            p.layers[static_cast<std::size_t>(l)].w_h = Matrix(4 * hidden_dim, hidden_dim);
            p.layers[static_cast<std::size_t>(l)].bias.assign(static_cast<std::size_t>(4 * hidden_dim), 0.0);
        }
        if (num_concepts > 0) p.init_proj = Matrix(hidden_dim, num_concepts);
        p.out_w = Matrix(vocab, hidden_dim);
        p.out_b.assign(static_cast<std::size_t>(vocab), 0.0);
        return p;
    }

    bool conditional() const { return num_concepts > 0; }

    // init_proj draws come last so that a conditioned and an unconditioned
    // model seeded identically share the same init for every common tensor
    void init_random(Rng& rng, double scale = 0.1) {
        embedding.fill_normal(rng, 0.0, scale);
        for (auto& l : layers) {
            l.w_x.fill_normal(rng, 0.0, scale);
            l.w_h.fill_normal(rng, 0.0, scale);
            std::fill(l.bias.begin(), l.bias.end(), 0.0);
            // forget-gate bias starts at 1
            for (int i = hidden_dim; i < 2 * hidden_dim; ++i) l.bias[static_cast<std::size_t>(i)] = 1.0;
        }
        out_w.fill_normal(rng, 0.0, scale);
        std::fill(out_b.begin(), out_b.end(), 0.0);
        if (conditional()) init_proj.fill_normal(rng, 0.0, scale);
    }

    template <typename F>
    void for_each_tensor(F&& f) {
        f("embedding", embedding.data.data(), embedding.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string tag = "layer" + std::to_string(l);
            f(tag + ".w_x", layers[l].w_x.data.data(), layers[l].w_x.size());
            f(tag + ".w_h", layers[l].w_h.data.data(), layers[l].w_h.size());
            f(tag + ".bias", layers[l].bias.data(), layers[l].bias.size());
        }
        if (conditional()) f("init_proj", init_proj.data.data(), init_proj.size());
        f("out_w", out_w.data.data(), out_w.size());
        f("out_b", out_b.data(), out_b.size());
    }

    template <typename F>
    void for_each_tensor(F&& f) const {
        const_cast<LstmParams*>(this)->for_each_tensor([&](const std::string& name, double* data, std::size_t n) {
            f(name, static_cast<const double*>(data), n);
        });
    }

    std::size_t num_params() const {
        std::size_t n = 0;
        for_each_tensor([&](const std::string&, const double*, std::size_t k) { n += k; });
        return n;
    }

    LstmParams zeros_like() const {
        LstmParams g = create(vocab, embed_dim, hidden_dim, num_layers, num_concepts);
        return g;
    }

    void zero() {
        for_each_tensor([](const std::string&, double* data, std::size_t n) { std::fill(data, data + n, 0.0); });
    }
};

struct ForwardOptions {
    double dropout_rate = 0.0;
    bool training = false;
    Rng* rng = nullptr;
};

// Cached activations for exact backward through the whole word.
struct LstmCache {
    int T = 0;
    std::vector<int> inputs;
    std::vector<double> h0;  // layer-1 initial hidden state (empty = zero)
    bool training = false;
    double dropout_rate = 0.0;
    // per layer, one row per step
    std::vector<Matrix> x;       // post-dropout input to layer l
    std::vector<Matrix> gate_i, gate_f, gate_g, gate_o;
    std::vector<Matrix> cell, tanh_cell, hidden;
    std::vector<Matrix> mask;    // dropout mask applied to layer l's input

    const Matrix& top_hidden() const { return hidden.back(); }
};

// Runs the stacked LSTM over input ids. h0 seeds layer 1's hidden state
// (zero when empty); cell states and deeper layers always start at zero.
inline LstmCache lstm_forward(const LstmParams& p, const std::vector<int>& input_ids, const std::vector<double>& h0,
                              const ForwardOptions& opts = {}) {
    const int T = static_cast<int>(input_ids.size());
    const int H = p.hidden_dim;
    for (int id : input_ids) {
        if (id < 0 || id >= p.vocab) throw data_error("lstm_forward: input id " + std::to_string(id) + " out of range");
    }
    if (!h0.empty() && static_cast<int>(h0.size()) != H) throw data_error("lstm_forward: h0 size mismatch");
    const bool use_dropout = opts.training && opts.dropout_rate > 0.0;
    if (use_dropout && opts.rng == nullptr) throw config_error("lstm_forward: training dropout needs an rng");

    LstmCache cache;
    cache.T = T;
    cache.inputs = input_ids;
    cache.h0 = h0;
    cache.training = opts.training;
    cache.dropout_rate = use_dropout ? opts.dropout_rate : 0.0;
    const int L = p.num_layers;
    cache.x.resize(static_cast<std::size_t>(L));
    cache.gate_i.assign(static_cast<std::size_t>(L), Matrix(T, H));
    cache.gate_f.assign(static_cast<std::size_t>(L), Matrix(T, H));
    cache.gate_g.assign(static_cast<std::size_t>(L), Matrix(T, H));
    cache.gate_o.assign(static_cast<std::size_t>(L), Matrix(T, H));
    cache.cell.assign(static_cast<std::size_t>(L), Matrix(T, H));
    cache.tanh_cell.assign(static_cast<std::size_t>(L), Matrix(T, H));
    cache.hidden.assign(static_cast<std::size_t>(L), Matrix(T, H));
    if (use_dropout) cache.mask.resize(static_cast<std::size_t>(L));

    const double keep_scale = use_dropout ? 1.0 / (1.0 - opts.dropout_rate) : 1.0;

    for (int l = 0; l < L; ++l) {
        const int in_dim = l == 0 ? p.embed_dim : H;
        cache.x[static_cast<std::size_t>(l)] = Matrix(T, in_dim);
        if (use_dropout) cache.mask[static_cast<std::size_t>(l)] = Matrix(T, in_dim);
        const LstmLayerParams& lp = p.layers[static_cast<std::size_t>(l)];
        std::vector<double> h_prev(static_cast<std::size_t>(H), 0.0);
        std::vector<double> c_prev(static_cast<std::size_t>(H), 0.0);
        if (l == 0 && !h0.empty()) h_prev = h0;
        std::vector<double> gates(static_cast<std::size_t>(4 * H));

        for (int t = 0; t < T; ++t) {
            double* x_row = cache.x[static_cast<std::size_t>(l)].row(t);
            if (l == 0) {
                const double* e = p.embedding.row(input_ids[static_cast<std::size_t>(t)]);
                std::memcpy(x_row, e, sizeof(double) * static_cast<std::size_t>(in_dim));
            } else {
                std::memcpy(x_row, cache.hidden[static_cast<std::size_t>(l - 1)].row(t), sizeof(double) * static_cast<std::size_t>(in_dim));
            }
            if (use_dropout) {
                double* m_row = cache.mask[static_cast<std::size_t>(l)].row(t);
                for (int i = 0; i < in_dim; ++i) {
                    m_row[i] = opts.rng->uniform() < opts.dropout_rate ? 0.0 : keep_scale;
                    x_row[i] *= m_row[i];
                }
            }
            std::copy(lp.bias.begin(), lp.bias.end(), gates.begin());
            matvec_add(lp.w_x, x_row, gates.data());
            matvec_add(lp.w_h, h_prev.data(), gates.data());

            double* gi = cache.gate_i[static_cast<std::size_t>(l)].row(t);
            double* gf = cache.gate_f[static_cast<std::size_t>(l)].row(t);
            double* gg = cache.gate_g[static_cast<std::size_t>(l)].row(t);
            double* go = cache.gate_o[static_cast<std::size_t>(l)].row(t);
            double* c = cache.cell[static_cast<std::size_t>(l)].row(t);
            double* tc = cache.tanh_cell[static_cast<std::size_t>(l)].row(t);
            double* h = cache.hidden[static_cast<std::size_t>(l)].row(t);
            for (int i = 0; i < H; ++i) {
                gi[i] = sigmoid(gates[static_cast<std::size_t>(i)]);
                gf[i] = sigmoid(gates[static_cast<std::size_t>(H + i)]);
                gg[i] = std::tanh(gates[static_cast<std::size_t>(2 * H + i)]);
                go[i] = sigmoid(gates[static_cast<std::size_t>(3 * H + i)]);
                c[i] = gf[i] * c_prev[static_cast<std::size_t>(i)] + gi[i] * gg[i];
                tc[i] = std::tanh(c[i]);
                h[i] = go[i] * tc[i];
            }
            std::memcpy(h_prev.data(), h, sizeof(double) * static_cast<std::size_t>(H));
            std::memcpy(c_prev.data(), c, sizeof(double) * static_cast<std::size_t>(H));
        }
    }
    return cache;
}

// logits = W h + b over the |alphabet|+1 classes.
inline std::vector<double> next_phone_logits(const LstmParams& p, const double* h_t) {
    std::vector<double> logits(p.out_b.begin(), p.out_b.end());
    matvec_add(p.out_w, h_t, logits.data());
    return logits;
}

// Per-step log2 probabilities of the given targets. Cache rows line up with
// targets: step t predicts targets[t] from hidden state t.
inline std::vector<double> sequence_step_log2probs(const LstmParams& p, const LstmCache& cache, const std::vector<int>& targets) {
    if (static_cast<int>(targets.size()) != cache.T) throw data_error("targets/cache length mismatch");
    std::vector<double> out(targets.size());
    std::vector<double> log2p(static_cast<std::size_t>(p.vocab));
    for (int t = 0; t < cache.T; ++t) {
        auto logits = next_phone_logits(p, cache.top_hidden().row(t));
        log2_softmax(logits.data(), p.vocab, log2p.data());
        const int tgt = targets[static_cast<std::size_t>(t)];
        if (tgt < 0 || tgt >= p.vocab) throw data_error("target id out of range");
        out[static_cast<std::size_t>(t)] = log2p[static_cast<std::size_t>(tgt)];
    }
    return out;
}

// Exact reverse-mode gradients for the cached forward pass, driven by
// per-step logit gradients. Accumulates into `grads`. When h0_grad is given
// it receives dLoss/dh0 for layer 1 (init_proj accumulation is the caller's).
inline void lstm_backward(const LstmParams& p, const LstmCache& cache, const Matrix& dlogits, LstmParams& grads,
                          std::vector<double>* h0_grad = nullptr) {
    const int T = cache.T;
    const int H = p.hidden_dim;
    const int L = p.num_layers;

    // output layer
    Matrix d_hidden_top(T, H);
    for (int t = 0; t < T; ++t) {
        const double* dl = dlogits.row(t);
        outer_add(grads.out_w, dl, cache.top_hidden().row(t));
        for (int i = 0; i < p.vocab; ++i) grads.out_b[static_cast<std::size_t>(i)] += dl[i];
        matvec_t_add(p.out_w, dl, d_hidden_top.row(t));
    }

    Matrix d_input = d_hidden_top;  // gradient flowing into layer l's output
    std::vector<double> gates_grad(static_cast<std::size_t>(4 * H));
    std::vector<double> zero_h(static_cast<std::size_t>(H), 0.0);

    for (int l = L - 1; l >= 0; --l) {
        const LstmLayerParams& lp = p.layers[static_cast<std::size_t>(l)];
        LstmLayerParams& lg = grads.layers[static_cast<std::size_t>(l)];
        const int in_dim = l == 0 ? p.embed_dim : H;
        Matrix d_x(T, in_dim);
        std::vector<double> dh(static_cast<std::size_t>(H), 0.0);
        std::vector<double> dc(static_cast<std::size_t>(H), 0.0);

        for (int t = T - 1; t >= 0; --t) {
            const double* gi = cache.gate_i[static_cast<std::size_t>(l)].row(t);
            const double* gf = cache.gate_f[static_cast<std::size_t>(l)].row(t);
            const double* gg = cache.gate_g[static_cast<std::size_t>(l)].row(t);
            const double* go = cache.gate_o[static_cast<std::size_t>(l)].row(t);
            const double* tc = cache.tanh_cell[static_cast<std::size_t>(l)].row(t);
            const double* c_prev = t > 0 ? cache.cell[static_cast<std::size_t>(l)].row(t - 1) : zero_h.data();
            const double* h_prev;
            if (t > 0) {
                h_prev = cache.hidden[static_cast<std::size_t>(l)].row(t - 1);
            } else if (l == 0 && !cache.h0.empty()) {
                h_prev = cache.h0.data();
            } else {
                h_prev = zero_h.data();
            }

            for (int i = 0; i < H; ++i) dh[static_cast<std::size_t>(i)] += d_input(t, i);

            for (int i = 0; i < H; ++i) {
                const double dhi = dh[static_cast<std::size_t>(i)];
                const double dci = dc[static_cast<std::size_t>(i)] + dhi * go[i] * (1.0 - tc[i] * tc[i]);
                const double d_o = dhi * tc[i];
                const double d_i = dci * gg[i];
                const double d_g = dci * gi[i];
                const double d_f = dci * c_prev[i];
                gates_grad[static_cast<std::size_t>(i)] = d_i * gi[i] * (1.0 - gi[i]);
                gates_grad[static_cast<std::size_t>(H + i)] = d_f * gf[i] * (1.0 - gf[i]);
                gates_grad[static_cast<std::size_t>(2 * H + i)] = d_g * (1.0 - gg[i] * gg[i]);
                gates_grad[static_cast<std::size_t>(3 * H + i)] = d_o * go[i] * (1.0 - go[i]);
                dc[static_cast<std::size_t>(i)] = dci * gf[i];
            }

            const double* x_row = cache.x[static_cast<std::size_t>(l)].row(t);
            outer_add(lg.w_x, gates_grad.data(), x_row);
            outer_add(lg.w_h, gates_grad.data(), h_prev);
            for (int i = 0; i < 4 * H; ++i) lg.bias[static_cast<std::size_t>(i)] += gates_grad[static_cast<std::size_t>(i)];

            matvec_t_add(lp.w_x, gates_grad.data(), d_x.row(t));
            std::fill(dh.begin(), dh.end(), 0.0);
            matvec_t_add(lp.w_h, gates_grad.data(), dh.data());
        }

        // propagate through this layer's input dropout
        if (cache.dropout_rate > 0.0) {
            const Matrix& m = cache.mask[static_cast<std::size_t>(l)];
            for (int t = 0; t < T; ++t) {
                double* dx = d_x.row(t);
                const double* mr = m.row(t);
                for (int i = 0; i < in_dim; ++i) dx[i] *= mr[i];
            }
        }

        if (l == 0) {
            for (int t = 0; t < T; ++t) {
                const double* dx = d_x.row(t);
                double* e = grads.embedding.row(cache.inputs[static_cast<std::size_t>(t)]);
                for (int i = 0; i < in_dim; ++i) e[i] += dx[i];
            }
            // after the t==0 step, dh is dLoss/dh0 for layer 1
            if (h0_grad) *h0_grad = dh;
        } else {
            d_input = std::move(d_x);
        }
    }
}

}  // namespace formmi
