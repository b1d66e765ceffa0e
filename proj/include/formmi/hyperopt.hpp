#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "formmi/errors.hpp"
#include "formmi/matrix.hpp"
#include "formmi/model.hpp"
#include "formmi/rng.hpp"

namespace formmi {

// Hyperparameter cube (Appendix-A ranges): embedding and hidden sizes are
// log-uniform, layer count and dropout uniform. Integer dims round after the
// inverse transform.
struct SearchSpace {
    static constexpr int kDims = 4;

    // continuous value of dimension d at unit coordinate u
    static double continuous_value(int d, double u) {
        switch (d) {
            case 0: return std::exp(std::log(4.0) + u * (std::log(1024.0) - std::log(4.0)));
            case 1: return std::exp(std::log(32.0) + u * (std::log(1024.0) - std::log(32.0)));
            case 2: return 1.0 + u * 3.0;
            case 3: return 0.5 * u;
        }
        throw config_error("search space: bad dimension");
    }

    static ModelConfig apply(const std::array<double, kDims>& point, const ModelConfig& base) {
        ModelConfig cfg = base;
        cfg.embedding_dim = static_cast<int>(std::llround(continuous_value(0, point[0])));
        cfg.hidden_dim = static_cast<int>(std::llround(continuous_value(1, point[1])));
        cfg.layers = static_cast<int>(std::llround(continuous_value(2, point[2])));
        cfg.dropout = continuous_value(3, point[3]);
        cfg.validate();
        return cfg;
    }

    static std::array<double, kDims> random_point(Rng& rng) {
        std::array<double, kDims> p;
        for (double& x : p) x = rng.uniform();
        return p;
    }
};

struct Trial {
    std::array<double, SearchSpace::kDims> point{};
    double value = std::numeric_limits<double>::quiet_NaN();  // validation xent, lower is better
    bool ok = false;
    std::string error;
};

struct TrialHistory {
    std::vector<Trial> trials;

    std::vector<const Trial*> successful() const {
        std::vector<const Trial*> out;
        for (const auto& t : trials) {
            if (t.ok && std::isfinite(t.value)) out.push_back(&t);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Small dense Gaussian process with a Matern-5/2 kernel.

namespace detail_gp {

inline double matern52(double r, double ell) {
    const double s = std::sqrt(5.0) * r / ell;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

inline double dist(const std::array<double, SearchSpace::kDims>& a, const std::array<double, SearchSpace::kDims>& b) {
    double d2 = 0.0;
    for (int i = 0; i < SearchSpace::kDims; ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(d2);
}

// in-place Cholesky; returns false if the matrix is not positive definite
inline bool cholesky(Matrix& a) {
    const int n = a.rows;
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (d <= 0.0 || !std::isfinite(d)) return false;
        const double l = std::sqrt(d);
        a(j, j) = l;
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / l;
        }
    }
    return true;
}

inline void solve_lower(const Matrix& l, std::vector<double>& x) {
    const int n = l.rows;
    for (int i = 0; i < n; ++i) {
        double s = x[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) s -= l(i, k) * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = s / l(i, i);
    }
}

inline void solve_upper_t(const Matrix& l, std::vector<double>& x) {
    const int n = l.rows;
    for (int i = n - 1; i >= 0; --i) {
        double s = x[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = s / l(i, i);
    }
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488); }
inline double std_normal_pdf(double z) { return 0.3989422804014326779 * std::exp(-0.5 * z * z); }

}  // namespace detail_gp

struct GpModel {
    std::vector<std::array<double, SearchSpace::kDims>> x;
    std::vector<double> y_std;  // standardized observations
    double y_mean = 0.0;
    double y_sd = 1.0;
    double ell = 0.5;
    double sigma2 = 1.0;
    Matrix chol;                 // Cholesky factor of K
    std::vector<double> alpha;   // K^-1 y_std
    bool valid = false;

    static constexpr double kJitter = 1e-6;

    // Marginal-likelihood grid fit; returns an invalid model when every grid
    // point fails to factorize or the observations are degenerate.
    static GpModel fit(const std::vector<std::array<double, SearchSpace::kDims>>& x, const std::vector<double>& y) {
        GpModel gp;
        gp.x = x;
        const int n = static_cast<int>(x.size());
        if (n < 2) return gp;
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        var /= n;
        if (var <= 0.0 || !std::isfinite(var)) return gp;
        gp.y_mean = mean;
        gp.y_sd = std::sqrt(var);
        gp.y_std.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) gp.y_std[i] = (y[i] - mean) / gp.y_sd;

        double best_ll = -std::numeric_limits<double>::infinity();
        for (double ell : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
            for (double sigma2 : {0.25, 0.5, 1.0, 2.0, 4.0}) {
                Matrix k(n, n);
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < n; ++j) {
                        k(i, j) = sigma2 * detail_gp::matern52(detail_gp::dist(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)]), ell);
                    }
                    k(i, i) += kJitter;
                }
                if (!detail_gp::cholesky(k)) continue;
                std::vector<double> a = gp.y_std;
                detail_gp::solve_lower(k, a);
                double quad = 0.0, logdet = 0.0;
                for (int i = 0; i < n; ++i) {
                    quad += a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
                    logdet += std::log(k(i, i));
                }
                const double ll = -0.5 * quad - logdet - 0.5 * n * std::log(2.0 * 3.14159265358979323846);
                if (ll > best_ll) {
                    best_ll = ll;
                    detail_gp::solve_upper_t(k, a);
                    gp.ell = ell;
                    gp.sigma2 = sigma2;
                    gp.chol = k;
                    gp.alpha = a;
                    gp.valid = true;
                }
            }
        }
        return gp;
    }

    void predict(const std::array<double, SearchSpace::kDims>& p, double* mean_std, double* sd_std) const {
        const int n = static_cast<int>(x.size());
        std::vector<double> kstar(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) kstar[static_cast<std::size_t>(i)] = sigma2 * detail_gp::matern52(detail_gp::dist(p, x[static_cast<std::size_t>(i)]), ell);
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += kstar[static_cast<std::size_t>(i)] * alpha[static_cast<std::size_t>(i)];
        std::vector<double> v = kstar;
        detail_gp::solve_lower(chol, v);
        double reduction = 0.0;
        for (double t : v) reduction += t * t;
        const double var = std::max(0.0, sigma2 + kJitter - reduction);
        *mean_std = mu;
        *sd_std = std::sqrt(var);
    }

    double predict_mean(const std::array<double, SearchSpace::kDims>& p) const {
        double mu, sd;
        predict(p, &mu, &sd);
        return y_mean + y_sd * mu;
    }
};

struct Suggestion {
    std::array<double, SearchSpace::kDims> point{};
    bool fallback_random = false;
    std::string note;
};

inline constexpr int kInitialRandomSuggestions = 5;  // max(5, d+1) with d = 4

// First suggestions are jittered-stratified space fillers; afterwards a GP
// surrogate picks the expected-improvement maximizer over 1e4 random
// candidates, falling back to a random point when the fit or EI degenerates.
inline Suggestion suggest_point(const TrialHistory& history, Rng& rng) {
    Suggestion s;
    const auto done = history.successful();
    const std::size_t k = history.trials.size();
    if (k < kInitialRandomSuggestions) {
        for (int d = 0; d < SearchSpace::kDims; ++d) {
            s.point[static_cast<std::size_t>(d)] = (static_cast<double>(k) + rng.uniform()) / kInitialRandomSuggestions;
        }
        s.note = "space-filling";
        return s;
    }

    auto fresh_random = [&](const char* why) {
        Suggestion r;
        r.point = SearchSpace::random_point(rng);
        r.fallback_random = true;
        r.note = why;
        return r;
    };

    if (done.size() < 2) return fresh_random("too few successful trials");
    std::vector<std::array<double, SearchSpace::kDims>> xs;
    std::vector<double> ys;
    for (const Trial* t : done) {
        xs.push_back(t->point);
        ys.push_back(t->value);
    }
    const GpModel gp = GpModel::fit(xs, ys);
    if (!gp.valid) return fresh_random("gp fit failed");

    double f_best = std::numeric_limits<double>::infinity();
    for (double v : gp.y_std) f_best = std::min(f_best, v);

    double best_ei = 0.0;
    std::array<double, SearchSpace::kDims> best_point{};
    bool found = false;
    for (int c = 0; c < 10000; ++c) {
        const auto cand = SearchSpace::random_point(rng);
        double mu, sd;
        gp.predict(cand, &mu, &sd);
        double ei = 0.0;
        if (sd > 1e-12) {
            const double z = (f_best - mu) / sd;
            ei = sd * (z * detail_gp::std_normal_cdf(z) + detail_gp::std_normal_pdf(z));
        }
        if (ei > best_ei) {
            bool duplicate = false;
            for (const auto& seen : xs) {
                if (detail_gp::dist(cand, seen) < 1e-9) {
                    duplicate = true;
                    break;
                }
            }
            if (!duplicate) {
                best_ei = ei;
                best_point = cand;
                found = true;
            }
        }
    }
    if (!found || best_ei <= 1e-12) return fresh_random("degenerate expected improvement");
    s.point = best_point;
    return s;
}

inline Suggestion suggest(const TrialHistory& history, Rng& rng, const ModelConfig& base, ModelConfig* out_config) {
    Suggestion s = suggest_point(history, rng);
    *out_config = SearchSpace::apply(s.point, base);
    return s;
}

struct SearchOutcome {
    ModelConfig best_config;
    std::array<double, SearchSpace::kDims> best_point{};
    double best_value = std::numeric_limits<double>::quiet_NaN();
    TrialHistory history;
};

// Objective maps (config, trial index) to a validation cross-entropy; throws
// on trial failure. Injected for testability; the CLI passes model training.
using SearchObjective = std::function<double(const ModelConfig&, int trial_index)>;

inline SearchOutcome run_search_with_objective(const ModelConfig& base, int budget_trials, std::uint64_t master_seed,
                                               const SearchObjective& objective, TrialHistory resume = {},
                                               const std::function<void(const Trial&)>& on_trial = nullptr) {
    if (budget_trials < 1) throw config_error("hyperopt budget must be >= 1");
    SearchOutcome out;
    out.history = std::move(resume);
    Rng rng(derive_seed(master_seed, "hyperopt"));
    while (static_cast<int>(out.history.trials.size()) < budget_trials) {
        const int idx = static_cast<int>(out.history.trials.size());
        Trial trial;
        ModelConfig cfg = base;
        const Suggestion s = suggest(out.history, rng, base, &cfg);
        trial.point = s.point;
        try {
            trial.value = objective(cfg, idx);
            trial.ok = std::isfinite(trial.value);
            if (!trial.ok) trial.error = "non-finite objective";
        } catch (const std::exception& e) {
            trial.ok = false;
            trial.error = e.what();
        }
        out.history.trials.push_back(trial);
        if (on_trial) on_trial(trial);
    }
    bool any = false;
    for (const Trial& t : out.history.trials) {
        if (t.ok && (!any || t.value < out.best_value)) {
            any = true;
            out.best_value = t.value;
            out.best_point = t.point;
        }
    }
    if (!any) throw numeric_error("hyperopt: every trial failed");
    out.best_config = SearchSpace::apply(out.best_point, base);
    return out;
}

// Each trial trains seeds_per_config models and scores the configuration by
// the best validation cross-entropy among them.
inline SearchOutcome run_search(const Lexicon& lex, const FoldAssignment& folds, int fold_index, const ModelConfig& base,
                                int budget_trials, int seeds_per_config, std::uint64_t master_seed, int workers,
                                TrialHistory resume = {}, const std::function<void(const Trial&)>& on_trial = nullptr) {
    if (seeds_per_config < 1) throw config_error("seeds_per_config must be >= 1");
    TrainDataset ds = build_fold_dataset(lex, folds, fold_index);
    SearchObjective objective = [&](const ModelConfig& cfg, int trial_index) {
        std::vector<double> vals(static_cast<std::size_t>(seeds_per_config), std::numeric_limits<double>::quiet_NaN());
        std::vector<std::string> errors(static_cast<std::size_t>(seeds_per_config));
        parallel_for(seeds_per_config, workers, [&](int s) {
            try {
                const std::uint64_t seed = derive_seed(derive_seed(master_seed, "trial" + std::to_string(trial_index)),
                                                       static_cast<std::uint64_t>(s));
                TrainedModel m = train(lex, ds, cfg, folds.scheme, fold_index, seed);
                vals[static_cast<std::size_t>(s)] = m.validation_xent;
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(s)] = e.what();
            }
        });
        double best = std::numeric_limits<double>::infinity();
        bool any = false;
        for (double v : vals) {
            if (std::isfinite(v)) {
                any = true;
                best = std::min(best, v);
            }
        }
        if (!any) {
            std::string msg = "all seeds failed:";
            for (const auto& e : errors) {
                if (!e.empty()) msg += " " + e;
            }
            throw numeric_error(msg);
        }
        return best;
    };
    return run_search_with_objective(base, budget_trials, master_seed, objective, std::move(resume), on_trial);
}

}  // namespace formmi
