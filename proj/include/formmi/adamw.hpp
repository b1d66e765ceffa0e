#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "formmi/errors.hpp"
#include "formmi/lstm.hpp"

namespace formmi {

struct AdamWConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    // optional parameter-group scale for the concept projection's gradient
    // step (its decoupled decay always runs at the full rate)
    double init_proj_lr_scale = 1.0;
};

struct AdamWState {
    AdamWConfig cfg;
    long step = 0;
    std::vector<double> m;  // first moments, flat over tensor traversal order
    std::vector<double> v;  // second moments

    void init(std::size_t n) {
        step = 0;
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
};

// Bias-corrected AdamW with decoupled weight decay: the decay shrinks the
// parameter directly and never touches the moment estimates.
inline void adamw_update(double* params, const double* grads, double* m, double* v, std::size_t n, const AdamWConfig& cfg,
                         long step, const std::string& name) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    // the group scale throttles only the gradient step; the decoupled decay
    // keeps its full rate, so a noise-driven tensor still shrinks
    const double lr = name == "init_proj" ? cfg.learning_rate * cfg.init_proj_lr_scale : cfg.learning_rate;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        if (!std::isfinite(g)) throw numeric_error("non-finite gradient in " + name);
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        params[i] -= cfg.learning_rate * cfg.weight_decay * params[i];
    }
}

inline void adamw_step(LstmParams& params, const LstmParams& grads, AdamWState& state) {
    if (state.m.size() != params.num_params()) throw config_error("adamw state not initialized for this parameter set");
    ++state.step;
    struct TensorRef {
        std::string name;
        double* p;
        std::size_t n;
    };
    std::vector<TensorRef> param_tensors;
    params.for_each_tensor([&](const std::string& name, double* p, std::size_t n) { param_tensors.push_back({name, p, n}); });
    std::vector<const double*> grad_tensors;
    grads.for_each_tensor([&](const std::string& name, const double* g, std::size_t n) {
        const std::size_t k = grad_tensors.size();
        if (k >= param_tensors.size() || param_tensors[k].name != name || param_tensors[k].n != n) {
            throw config_error("gradient/parameter shape mismatch at tensor " + name);
        }
        grad_tensors.push_back(g);
    });
    std::size_t offset = 0;
    for (std::size_t k = 0; k < param_tensors.size(); ++k) {
        adamw_update(param_tensors[k].p, grad_tensors[k], state.m.data() + offset, state.v.data() + offset, param_tensors[k].n,
                     state.cfg, state.step, param_tensors[k].name);
        offset += param_tensors[k].n;
    }
}

}  // namespace formmi
