#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "formmi/adamw.hpp"
#include "formmi/lstm.hpp"
#include "formmi/model.hpp"

using namespace formmi;

namespace {

TrainingWord make_word(const std::vector<int>& phones, int eos, int concept_id = 0) {
    WordEntry e;
    e.concept_id = concept_id;
    e.phones = phones;
    return make_training_word(e, eos, 1.0, "d");
}

double loss_bits(const LstmParams& p, const TrainingWord& w) {
    return detail_model::word_pass(p, w, {}, nullptr, 0.0);
}

// Central finite differences at eps=1e-5, the independent oracle for backward.
double max_grad_rel_error(LstmParams p, const TrainingWord& w, double eps = 1e-5) {
    LstmParams analytic = p.zeros_like();
    detail_model::word_pass(p, w, {}, &analytic, 1.0);

    struct TensorView {
        std::string name;
        double* data;
        std::size_t n;
    };
    std::vector<TensorView> tensors;
    p.for_each_tensor([&](const std::string& name, double* data, std::size_t n) { tensors.push_back({name, data, n}); });
    std::vector<TensorView> grad_tensors;
    analytic.for_each_tensor(
        [&](const std::string& name, double* data, std::size_t n) { grad_tensors.push_back({name, data, n}); });

    double worst = 0.0;
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        for (std::size_t i = 0; i < tensors[ti].n; ++i) {
            const double saved = tensors[ti].data[i];
            tensors[ti].data[i] = saved + eps;
            const double up = loss_bits(p, w);
            tensors[ti].data[i] = saved - eps;
            const double down = loss_bits(p, w);
            tensors[ti].data[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = grad_tensors[ti].data[i];
            // denominator floor above the finite difference's own roundoff
            const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-5});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("gradients match central finite differences (embedding, recurrent, init_proj)") {
    Rng rng(1234);
    for (int rep = 0; rep < 6; ++rep) {
        const int vocab = rng.uniform_int(4, 8);
        const int d = rng.uniform_int(3, 8);
        const int h = rng.uniform_int(3, 8);
        const int layers = rng.uniform_int(1, 2);
        const int concepts = rep % 2 == 0 ? rng.uniform_int(2, 4) : 0;
        LstmParams p = LstmParams::create(vocab, d, h, layers, concepts);
        p.init_random(rng, 0.4);
        const int len = rng.uniform_int(1, 6);
        std::vector<int> phones;
        for (int i = 0; i < len; ++i) phones.push_back(rng.uniform_int(0, vocab - 2));
        TrainingWord w = make_word(phones, vocab - 1, concepts > 0 ? rng.uniform_int(0, concepts - 1) : 0);
        const double err = max_grad_rel_error(p, w);
        INFO("rep " << rep << " vocab=" << vocab << " d=" << d << " h=" << h << " layers=" << layers
                    << " conditional=" << (concepts > 0) << " err=" << err);
        REQUIRE(err < 1e-4);
    }
}

TEST_CASE("zero parameters give all-zero hidden states") {
    LstmParams p = LstmParams::create(5, 3, 4, 2, 0);
    LstmCache cache = lstm_forward(p, {0, 1, 2}, {});
    for (const auto& layer_h : cache.hidden) {
        for (double v : layer_h.data) REQUIRE(v == 0.0);
    }
}

TEST_CASE("length-1 input yields exactly one hidden state") {
    LstmParams p = LstmParams::create(5, 3, 4, 1, 0);
    Rng rng(2);
    p.init_random(rng);
    LstmCache cache = lstm_forward(p, {3}, {});
    REQUIRE(cache.T == 1);
    REQUIRE(cache.top_hidden().rows == 1);
}

TEST_CASE("out-of-range input id is fatal") {
    LstmParams p = LstmParams::create(5, 3, 4, 1, 0);
    REQUIRE_THROWS_AS(lstm_forward(p, {5}, {}), data_error);
    REQUIRE_THROWS_AS(lstm_forward(p, {-1}, {}), data_error);
}

TEST_CASE("conditional h0 changes the prediction") {
    LstmParams p = LstmParams::create(5, 3, 4, 1, 3);
    Rng rng(3);
    p.init_random(rng, 0.5);
    TrainingWord w0 = make_word({0, 1}, 4, 0);
    TrainingWord w1 = make_word({0, 1}, 4, 1);
    REQUIRE(loss_bits(p, w0) != loss_bits(p, w1));
}

TEST_CASE("zeroed output layer gives the uniform distribution over 42 classes") {
    LstmParams p = LstmParams::create(42, 4, 5, 1, 0);
    Rng rng(4);
    p.init_random(rng);
    p.out_w.fill(0.0);
    std::fill(p.out_b.begin(), p.out_b.end(), 0.0);
    LstmCache cache = lstm_forward(p, {0, 7, 13}, {});
    auto logits = next_phone_logits(p, cache.top_hidden().row(2));
    auto probs = softmax(logits);
    for (double q : probs) REQUIRE(q == Catch::Approx(1.0 / 42.0).epsilon(1e-12));

    // uniform predictor cross-entropy is log2(42) bits/phone
    TrainingWord w = make_word({0, 7, 13}, 41);
    const double nll = loss_bits(p, w);
    REQUIRE(nll / w.steps() == Catch::Approx(5.392317422778760289).margin(1e-12));
    REQUIRE(w.steps() == 4);  // 3 phones + eos
}

TEST_CASE("softmax normalizes to 1 within 1e-12 and log-probs are finite") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> logits(17);
        for (double& x : logits) x = rng.uniform(-30.0, 30.0);
        auto probs = softmax(logits);
        double sum = 0.0;
        for (double q : probs) {
            REQUIRE(q > 0.0);
            REQUIRE(q < 1.0);
            sum += q;
        }
        REQUIRE(std::fabs(sum - 1.0) < 1e-12);
        std::vector<double> lp(logits.size());
        log2_softmax(logits.data(), static_cast<int>(logits.size()), lp.data());
        for (double v : lp) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("adamw: zero gradient and zero decay leave parameters unchanged") {
    double p[3] = {0.5, -1.25, 2.0};
    double g[3] = {0.0, 0.0, 0.0};
    double m[3] = {0.0, 0.0, 0.0};
    double v[3] = {0.0, 0.0, 0.0};
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    adamw_update(p, g, m, v, 3, cfg, 1, "t");
    REQUIRE(p[0] == 0.5);
    REQUIRE(p[1] == -1.25);
    REQUIRE(p[2] == 2.0);
}

TEST_CASE("adamw single step from zero moments matches the closed form") {
    double p = 1.0, g = 0.5, m = 0.0, v = 0.0;
    AdamWConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.weight_decay = 0.1;
    adamw_update(&p, &g, &m, &v, 1, cfg, 1, "t");
    // bias correction makes m_hat = g and v_hat = g^2 after one step
    const double step1 = 1.0 - 0.01 * (0.5 / (0.5 + 1e-8));
    const double expected = step1 - 0.01 * 0.1 * step1;
    REQUIRE(p == Catch::Approx(expected).margin(1e-15));
    REQUIRE(p == Catch::Approx(0.989).margin(1e-7));
}

TEST_CASE("adamw decoupled decay shrinks by (1 - lr*wd) under zero gradient") {
    double p = 2.0, g = 0.0, m = 0.0, v = 0.0;
    AdamWConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.5;
    adamw_update(&p, &g, &m, &v, 1, cfg, 1, "t");
    REQUIRE(p == Catch::Approx(2.0 * (1.0 - 0.1 * 0.5)).margin(1e-15));
}

TEST_CASE("adamw rejects non-finite gradients with the tensor name") {
    double p = 1.0, g = std::nan(""), m = 0.0, v = 0.0;
    AdamWConfig cfg;
    REQUIRE_THROWS_WITH(adamw_update(&p, &g, &m, &v, 1, cfg, 1, "layer0.w_x"), Catch::Matchers::ContainsSubstring("layer0.w_x"));
}

TEST_CASE("dropout: rate 0 and eval mode are the identity") {
    Rng rng(6);
    std::vector<double> v = {1.0, -2.0, 3.0};
    REQUIRE(dropout(v, 0.0, rng, true) == v);
    REQUIRE(dropout(v, 0.4, rng, false) == v);
}

TEST_CASE("dropout preserves expectation within 1% over 1e5 samples") {
    Rng rng(7);
    const double rate = 0.3;
    const int n = 100000;
    double sum = 0.0;
    const std::vector<double> one = {1.0};
    for (int i = 0; i < n; ++i) sum += dropout(one, rate, rng, true)[0];
    REQUIRE(std::fabs(sum / n - 1.0) < 0.01);
}
