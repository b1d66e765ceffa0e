#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "formmi/checkpoint.hpp"
#include "formmi/model.hpp"
#include "formmi/synthetic.hpp"

using namespace formmi;

namespace {

SyntheticSpec planted_spec(double strength = 0.9, int languages_per_family = 6) {
    StaircaseParams sp;
    sp.alphabet_size = 15;
    sp.num_concepts = 4;
    sp.num_families = 12;
    sp.languages_per_family = languages_per_family;
    sp.min_step = 3;
    sp.eos_hazard = 0.35;
    sp.planted = {{0, strength}, {1, strength}, {2, strength}, {3, strength}};
    sp.chain_seed = 5;
    return make_staircase_spec(sp);
}

ModelConfig small_config(bool conditional) {
    ModelConfig cfg;
    cfg.embedding_dim = 8;
    cfg.hidden_dim = 32;
    cfg.layers = 1;
    cfg.dropout = 0.0;
    cfg.conditional = conditional;
    cfg.batch_size = 16;
    cfg.max_epochs = 30;
    cfg.patience = 5;
    cfg.optimizer.learning_rate = 5e-3;
    return cfg;
}

bool params_equal(const LstmParams& a, const LstmParams& b) {
    bool equal = true;
    std::map<std::string, std::vector<double>> tensors;
    a.for_each_tensor([&](const std::string& name, const double* d, std::size_t n) {
        tensors[name] = std::vector<double>(d, d + n);
    });
    b.for_each_tensor([&](const std::string& name, const double* d, std::size_t n) {
        equal = equal && tensors.at(name) == std::vector<double>(d, d + n);
    });
    return equal;
}

}  // namespace

TEST_CASE("weighted loss equals the unweighted mean when all weights are 1") {
    Lexicon lex = generate(planted_spec(), 1);
    LstmParams p = LstmParams::create(lex.alphabet.num_classes(), 4, 6, 1, 0);
    Rng rng(3);
    p.init_random(rng, 0.3);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < 6; ++i) ids.push_back(lex.doculects[i].doculect_id);
    auto words = collect_words(lex, ids);  // default weight 1
    double plain = 0.0;
    for (const auto& w : words) plain += detail_model::word_pass(p, w, {}, nullptr, 0.0);
    plain /= static_cast<double>(words.size());
    REQUIRE(weighted_loss_bits(p, words) == Catch::Approx(plain).margin(1e-12));
}

TEST_CASE("replicating a family's words rescales weights and leaves the loss unchanged") {
    Lexicon lex = generate(planted_spec(), 2);
    LstmParams p = LstmParams::create(lex.alphabet.num_classes(), 4, 6, 1, 0);
    Rng rng(4);
    p.init_random(rng, 0.3);

    // two families, four doculects each
    std::vector<std::string> ids;
    for (const auto& d : lex.doculects) {
        if (d.family == "fam000" || d.family == "fam001") ids.push_back(d.doculect_id);
    }
    ids.resize(8);
    auto weights = family_weights(lex, ids);
    auto words = collect_words(lex, ids, &weights);

    // "replicate family fam000 twice": weights within it halve
    std::vector<TrainingWord> replicated;
    std::unordered_map<std::string, const Doculect*> by_id;
    for (const auto& d : lex.doculects) by_id[d.doculect_id] = &d;
    for (const auto& w : words) {
        TrainingWord copy = w;
        if (by_id.at(w.doculect_id)->family == "fam000") {
            copy.weight = w.weight / 2.0;
            replicated.push_back(copy);
            replicated.push_back(copy);
        } else {
            replicated.push_back(copy);
        }
    }
    REQUIRE(weighted_loss_bits(p, words) == Catch::Approx(weighted_loss_bits(p, replicated)).margin(1e-12));
}

TEST_CASE("training is deterministic per seed and the best checkpoint is the curve minimum") {
    Lexicon lex = generate(planted_spec(), 3);
    Lexicon reassigned = reassign_families_to_macroareas(lex);
    FoldAssignment folds = make_folds(reassigned, FoldScheme::Macroarea, 0);
    ModelConfig cfg = small_config(false);
    cfg.max_epochs = 6;

    TrainedModel m1 = train(reassigned, folds, 0, cfg, 7);
    TrainedModel m2 = train(reassigned, folds, 0, cfg, 7);
    REQUIRE(m1.validation_xent == m2.validation_xent);
    REQUIRE(params_equal(m1.params, m2.params));
    for (std::size_t e = 0; e < m1.training_curve.size(); ++e) {
        REQUIRE(m1.training_curve[e].train_loss_bits_per_word == m2.training_curve[e].train_loss_bits_per_word);
        REQUIRE(m1.training_curve[e].validation_xent_bits_per_phone == m2.training_curve[e].validation_xent_bits_per_phone);
    }

    TrainedModel m3 = train(reassigned, folds, 0, cfg, 8);
    REQUIRE(m1.validation_xent != m3.validation_xent);

    double curve_min = std::numeric_limits<double>::infinity();
    for (const auto& s : m1.training_curve) curve_min = std::min(curve_min, s.validation_xent_bits_per_phone);
    REQUIRE(m1.validation_xent == curve_min);
}

TEST_CASE("early stopping halts after `patience` epochs without improvement") {
    Lexicon lex = generate(planted_spec(), 4);
    Lexicon reassigned = reassign_families_to_macroareas(lex);
    FoldAssignment folds = make_folds(reassigned, FoldScheme::Macroarea, 0);
    ModelConfig cfg = small_config(false);
    cfg.max_epochs = 100;
    cfg.patience = 2;
    cfg.optimizer.learning_rate = 2e-2;  // reach the plateau quickly
    TrainedModel m = train(reassigned, folds, 0, cfg, 1);
    REQUIRE(m.training_curve.size() < 100);
    // the last `patience` epochs did not improve on the reported minimum
    const std::size_t n = m.training_curve.size();
    for (std::size_t e = n - cfg.patience; e < n; ++e) {
        REQUIRE(m.training_curve[e].validation_xent_bits_per_phone >= m.validation_xent);
    }
}

TEST_CASE("conditional model beats the unconditioned one by roughly the planted MI") {
    SyntheticSpec spec = planted_spec(0.9, 16);
    OracleMi oracle = true_mi_bruteforce(spec, 10);
    REQUIRE(oracle.mi_bits_per_phone > 0.05);

    Lexicon lex = reassign_families_to_macroareas(generate(spec, 5));
    FoldAssignment folds = make_folds(lex, FoldScheme::Macroarea, 0);
    ModelConfig base = small_config(false);
    base.max_epochs = 40;
    base.patience = 8;
    ModelConfig cond_cfg = base;
    cond_cfg.conditional = true;
    TrainedModel uncond = train(lex, folds, 0, base, 0);
    TrainedModel cond = train(lex, folds, 0, cond_cfg, 0);
    const double gap = uncond.validation_xent - cond.validation_xent;
    INFO("oracle mi/phone " << oracle.mi_bits_per_phone << ", validation gap " << gap);
    REQUIRE(cond.validation_xent < uncond.validation_xent);
    REQUIRE(gap > 0.3 * oracle.mi_bits_per_phone);
    REQUIRE(gap < 2.0 * oracle.mi_bits_per_phone);
}

TEST_CASE("shuffle_concept_ids preserves the histogram and is reproducible") {
    Lexicon lex = generate(planted_spec(), 6);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < 10; ++i) ids.push_back(lex.doculects[i].doculect_id);
    auto words = collect_words(lex, ids);
    auto shuffled = shuffle_concept_ids(words, 11);
    auto shuffled2 = shuffle_concept_ids(words, 11);

    std::map<int, int> before, after;
    for (const auto& w : words) ++before[w.concept_id];
    for (const auto& w : shuffled) ++after[w.concept_id];
    REQUIRE(before == after);
    bool moved = false;
    for (std::size_t i = 0; i < words.size(); ++i) {
        REQUIRE(shuffled[i].concept_id == shuffled2[i].concept_id);
        moved |= shuffled[i].concept_id != words[i].concept_id;
        REQUIRE(shuffled[i].inputs == words[i].inputs);
    }
    REQUIRE(moved);
}

TEST_CASE("seed ensemble trains pairs for seeds 0..n-1 deterministically") {
    Lexicon lex = reassign_families_to_macroareas(generate(planted_spec(), 7));
    FoldAssignment folds = make_folds(lex, FoldScheme::Macroarea, 0);
    ModelConfig cfg = small_config(false);
    cfg.max_epochs = 3;

    auto pairs = train_seed_ensemble(lex, folds, 0, cfg, 2, 2);
    REQUIRE(pairs.size() == 2);
    for (const auto& pair : pairs) {
        REQUIRE(pair.errors.empty());
        REQUIRE(pair.unconditioned.has_value());
        REQUIRE(pair.conditional.has_value());
        REQUIRE(pair.conditional->params.conditional());
        REQUIRE(!pair.unconditioned->params.conditional());
    }
    REQUIRE(pairs[0].unconditioned->validation_xent != pairs[1].unconditioned->validation_xent);

    auto rerun = train_seed_ensemble(lex, folds, 0, cfg, 2, 1);
    for (int s = 0; s < 2; ++s) {
        REQUIRE(pairs[static_cast<std::size_t>(s)].unconditioned->validation_xent ==
                rerun[static_cast<std::size_t>(s)].unconditioned->validation_xent);
        REQUIRE(pairs[static_cast<std::size_t>(s)].conditional->validation_xent ==
                rerun[static_cast<std::size_t>(s)].conditional->validation_xent);
    }

    auto single = train_seed_ensemble(lex, folds, 0, cfg, 1, 1);
    REQUIRE(single.size() == 1);
}

TEST_CASE("word_logprob equals the sum of per-step log probabilities and counts eos") {
    Lexicon lex = generate(planted_spec(), 8);
    LstmParams p = LstmParams::create(lex.alphabet.num_classes(), 4, 6, 1, 4);
    Rng rng(12);
    p.init_random(rng, 0.4);
    const auto& entry = lex.doculects[0].entries[0];
    TrainingWord w = make_training_word(entry, lex.alphabet.eos(), 1.0, "d");
    auto steps = word_step_log2probs(p, w, true);
    REQUIRE(static_cast<int>(steps.size()) == static_cast<int>(entry.phones.size()) + 1);
    double total = 0.0;
    for (double v : steps) total += v;
    WordScore score = word_logprob(p, w, true);
    REQUIRE(score.log2prob == Catch::Approx(total).margin(1e-12));
    REQUIRE(score.steps == static_cast<int>(steps.size()));
    REQUIRE(score.log2prob <= 0.0);
}

TEST_CASE("scoring a concept id beyond K is fatal") {
    LstmParams p = LstmParams::create(6, 4, 6, 1, 3);
    Rng rng(13);
    p.init_random(rng, 0.3);
    WordEntry e;
    e.concept_id = 7;
    e.phones = {0, 1};
    TrainingWord w = make_training_word(e, 5, 1.0, "d");
    REQUIRE_THROWS_AS(word_logprob(p, w, true), data_error);
}

TEST_CASE("model config range validation") {
    ModelConfig cfg = small_config(false);
    cfg.embedding_dim = 2;
    REQUIRE_THROWS_AS(cfg.validate(), config_error);
    cfg = small_config(false);
    cfg.hidden_dim = 2048;
    REQUIRE_THROWS_AS(cfg.validate(), config_error);
    cfg = small_config(false);
    cfg.dropout = 0.7;
    REQUIRE_THROWS_AS(cfg.validate(), config_error);
    cfg = small_config(false);
    cfg.layers = 5;
    REQUIRE_THROWS_AS(cfg.validate(), config_error);
    cfg = small_config(false);
    cfg.patience = 0;
    REQUIRE_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("checkpoints reload bit-exactly and preserve validation_xent") {
    Lexicon lex = reassign_families_to_macroareas(generate(planted_spec(), 9));
    FoldAssignment folds = make_folds(lex, FoldScheme::Macroarea, 0);
    ModelConfig cfg = small_config(true);
    cfg.max_epochs = 3;
    TrainedModel m = train(lex, folds, 0, cfg, 0);

    const std::string path = "/tmp/formmi_test_checkpoint.json";
    save_checkpoint(m, path);
    TrainedModel loaded = load_checkpoint(path);
    REQUIRE(loaded.validation_xent == m.validation_xent);
    REQUIRE(params_equal(loaded.params, m.params));
    REQUIRE(loaded.alphabet_hash == m.alphabet_hash);
    REQUIRE(loaded.concept_count == m.concept_count);
    REQUIRE(loaded.config.conditional == m.config.conditional);
    REQUIRE(loaded.training_curve.size() == m.training_curve.size());

    // reload reproduces the validation metric exactly
    TrainDataset ds = build_fold_dataset(lex, folds, 0);
    const double metric = weighted_xent_bits_per_phone(loaded.params, ds.validation);
    REQUIRE(metric == Catch::Approx(m.validation_xent).margin(1e-9));
}

TEST_CASE("training with dropout is deterministic and still learns") {
    Lexicon lex = reassign_families_to_macroareas(generate(planted_spec(), 10));
    FoldAssignment folds = make_folds(lex, FoldScheme::Macroarea, 0);
    ModelConfig cfg = small_config(false);
    cfg.dropout = 0.2;
    cfg.max_epochs = 4;
    TrainedModel a = train(lex, folds, 0, cfg, 3);
    TrainedModel b = train(lex, folds, 0, cfg, 3);
    REQUIRE(a.validation_xent == b.validation_xent);
    REQUIRE(params_equal(a.params, b.params));
    REQUIRE(std::isfinite(a.validation_xent));
}
