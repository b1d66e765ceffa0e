#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "formmi/hyperopt.hpp"
#include "formmi/synthetic.hpp"

using namespace formmi;

namespace {

// smooth 4-d quadratic on the unit cube, minimum 0 at x*
double quadratic(const std::array<double, 4>& p) {
    const std::array<double, 4> target = {0.62, 0.31, 0.55, 0.44};
    double f = 0.0;
    for (int d = 0; d < 4; ++d) f += (p[static_cast<std::size_t>(d)] - target[static_cast<std::size_t>(d)]) *
                                     (p[static_cast<std::size_t>(d)] - target[static_cast<std::size_t>(d)]);
    return f;
}

double run_gp_search(int budget, std::uint64_t seed) {
    TrialHistory hist;
    Rng rng(seed);
    ModelConfig base;
    for (int t = 0; t < budget; ++t) {
        ModelConfig cfg;
        Suggestion s = suggest(hist, rng, base, &cfg);
        Trial trial;
        trial.point = s.point;
        trial.value = quadratic(s.point);
        trial.ok = true;
        hist.trials.push_back(trial);
    }
    double best = 1e9;
    for (const auto& t : hist.trials) best = std::min(best, t.value);
    return best;
}

double run_random_search(int budget, std::uint64_t seed) {
    Rng rng(seed);
    double best = 1e9;
    for (int t = 0; t < budget; ++t) best = std::min(best, quadratic(SearchSpace::random_point(rng)));
    return best;
}

}  // namespace

TEST_CASE("empty history yields an in-bounds config; first five suggestions are stratified") {
    TrialHistory hist;
    Rng rng(1);
    ModelConfig base;
    for (int k = 0; k < 5; ++k) {
        ModelConfig cfg;
        Suggestion s = suggest(hist, rng, base, &cfg);
        REQUIRE(!s.fallback_random);
        for (int d = 0; d < 4; ++d) {
            REQUIRE(s.point[static_cast<std::size_t>(d)] >= static_cast<double>(k) / 5.0);
            REQUIRE(s.point[static_cast<std::size_t>(d)] < static_cast<double>(k + 1) / 5.0);
        }
        REQUIRE(cfg.embedding_dim >= 4);
        REQUIRE(cfg.embedding_dim <= 1024);
        REQUIRE(cfg.hidden_dim >= 32);
        REQUIRE(cfg.hidden_dim <= 1024);
        REQUIRE(cfg.layers >= 1);
        REQUIRE(cfg.layers <= 4);
        REQUIRE(cfg.dropout >= 0.0);
        REQUIRE(cfg.dropout <= 0.5);
        Trial t;
        t.point = s.point;
        t.value = quadratic(s.point);
        t.ok = true;
        hist.trials.push_back(t);
    }
}

TEST_CASE("suggested points stay in bounds after rounding, across many draws") {
    TrialHistory hist;
    Rng rng(2);
    ModelConfig base;
    for (int k = 0; k < 40; ++k) {
        ModelConfig cfg;
        Suggestion s = suggest(hist, rng, base, &cfg);
        REQUIRE_NOTHROW(cfg.validate());
        Trial t;
        t.point = s.point;
        t.value = quadratic(s.point);
        t.ok = true;
        hist.trials.push_back(t);
    }
}

TEST_CASE("log-uniform sampling of the size dimensions passes a KS check") {
    Rng rng(3);
    const int n = 4000;
    std::vector<double> logs;
    for (int i = 0; i < n; ++i) {
        logs.push_back(std::log(SearchSpace::continuous_value(0, rng.uniform())));
    }
    std::sort(logs.begin(), logs.end());
    const double lo = std::log(4.0), hi = std::log(1024.0);
    double ks = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double u = (logs[i] - lo) / (hi - lo);
        ks = std::max({ks, std::fabs(static_cast<double>(i + 1) / n - u), std::fabs(u - static_cast<double>(i) / n)});
    }
    REQUIRE(ks < 1.628 / std::sqrt(static_cast<double>(n)));  // alpha = 0.01
}

TEST_CASE("gp posterior mean interpolates noiseless observations within jitter tolerance") {
    std::vector<std::array<double, 4>> xs;
    std::vector<double> ys;
    Rng rng(4);
    for (int i = 0; i < 8; ++i) {
        auto p = SearchSpace::random_point(rng);
        xs.push_back(p);
        ys.push_back(quadratic(p));
    }
    const GpModel gp = GpModel::fit(xs, ys);
    REQUIRE(gp.valid);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        REQUIRE(gp.predict_mean(xs[i]) == Catch::Approx(ys[i]).margin(1e-4));
    }
}

TEST_CASE("all observations equal degenerates EI and triggers the random fallback") {
    TrialHistory hist;
    Rng fill(5);
    for (int i = 0; i < 6; ++i) {
        Trial t;
        t.point = SearchSpace::random_point(fill);
        t.value = 2.5;
        t.ok = true;
        hist.trials.push_back(t);
    }
    Rng rng(6);
    ModelConfig base;
    ModelConfig cfg;
    Suggestion s = suggest(hist, rng, base, &cfg);
    REQUIRE(s.fallback_random);
}

TEST_CASE("suggestions never duplicate history points beyond 1e-9") {
    TrialHistory hist;
    Rng rng(7);
    ModelConfig base;
    for (int k = 0; k < 25; ++k) {
        ModelConfig cfg;
        Suggestion s = suggest(hist, rng, base, &cfg);
        for (const auto& t : hist.trials) {
            REQUIRE(detail_gp::dist(s.point, t.point) >= 1e-9);
        }
        Trial t;
        t.point = s.point;
        t.value = quadratic(s.point);
        t.ok = true;
        hist.trials.push_back(t);
    }
}

TEST_CASE("gp search finds the quadratic optimum within 5% in 30 trials") {
    const double best = run_gp_search(30, 42);
    INFO("best f " << best);
    REQUIRE(best <= 0.05);
}

TEST_CASE("gp search beats the median random search in at least 70% of paired repetitions") {
    const int budget = 15;
    int wins = 0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        const double gp_best = run_gp_search(budget, derive_seed(100, static_cast<std::uint64_t>(r)));
        std::vector<double> random_bests;
        for (int j = 0; j < 11; ++j) {
            random_bests.push_back(run_random_search(budget, derive_seed(200 + static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(j))));
        }
        std::sort(random_bests.begin(), random_bests.end());
        if (gp_best < random_bests[5]) ++wins;
    }
    INFO("wins " << wins << "/" << reps);
    REQUIRE(wins >= 14);
}

TEST_CASE("run_search_with_objective: budget 1 returns that config; failures are recorded") {
    ModelConfig base;
    base.max_epochs = 1;
    const SearchOutcome one = run_search_with_objective(base, 1, 9, [](const ModelConfig&, int) { return 3.25; });
    REQUIRE(one.history.trials.size() == 1);
    REQUIRE(one.best_value == 3.25);

    const SearchOutcome mixed = run_search_with_objective(base, 4, 10, [](const ModelConfig&, int idx) -> double {
        if (idx % 2 == 0) throw data_error("injected failure");
        return 5.0 - idx;
    });
    REQUIRE(mixed.history.trials.size() == 4);
    REQUIRE(!mixed.history.trials[0].ok);
    REQUIRE(mixed.history.trials[0].error.find("injected failure") != std::string::npos);
    REQUIRE(mixed.best_value == 2.0);  // idx 3

    REQUIRE_THROWS_AS(run_search_with_objective(base, 2, 11, [](const ModelConfig&, int) -> double {
        throw data_error("always fails");
    }),
                      numeric_error);
}

TEST_CASE("run_search is deterministic under a fixed master seed") {
    StaircaseParams sp;
    sp.alphabet_size = 12;
    sp.num_concepts = 3;
    sp.num_families = 8;
    sp.languages_per_family = 4;
    sp.min_step = 3;
    sp.eos_hazard = 0.4;
    sp.planted = {{0, 0.8}};
    SyntheticSpec spec = make_staircase_spec(sp);
    Lexicon lex = reassign_families_to_macroareas(generate(spec, 3));
    FoldAssignment folds = make_folds(lex, FoldScheme::Macroarea, 0);
    ModelConfig base;
    base.batch_size = 16;
    base.max_epochs = 2;
    base.patience = 1;

    const SearchOutcome a = run_search(lex, folds, 0, base, 2, 1, 77, 2);
    const SearchOutcome b = run_search(lex, folds, 0, base, 2, 1, 77, 1);
    REQUIRE(a.history.trials.size() == 2);
    REQUIRE(a.best_value == b.best_value);
    for (std::size_t i = 0; i < 2; ++i) {
        REQUIRE(a.history.trials[i].value == b.history.trials[i].value);
        REQUIRE(a.history.trials[i].point == b.history.trials[i].point);
    }
    REQUIRE_NOTHROW(a.best_config.validate());
}
