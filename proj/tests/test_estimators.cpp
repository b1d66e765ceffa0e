#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "formmi/estimators.hpp"
#include "formmi/synthetic.hpp"

using namespace formmi;

namespace {

struct Fixture {
    Lexicon lex;
    FoldAssignment folds;
    TrainedModel uncond;
    TrainedModel cond;

    static const Fixture& get() {
        static Fixture f = [] {
            StaircaseParams sp;
            sp.alphabet_size = 15;
            sp.num_concepts = 4;
            sp.num_families = 12;
            sp.languages_per_family = 16;
            sp.min_step = 3;
            sp.eos_hazard = 0.35;
            sp.planted = {{0, 0.9}, {1, 0.9}, {2, 0.9}, {3, 0.9}};
            sp.chain_seed = 5;
            SyntheticSpec spec = make_staircase_spec(sp);
            Fixture f;
            f.lex = reassign_families_to_macroareas(generate(spec, 5));
            f.folds = make_folds(f.lex, FoldScheme::Macroarea, 0);
            ModelConfig cfg;
            cfg.embedding_dim = 8;
            cfg.hidden_dim = 32;
            cfg.batch_size = 16;
            cfg.max_epochs = 40;
            cfg.patience = 8;
            cfg.optimizer.learning_rate = 5e-3;
            f.uncond = train(f.lex, f.folds, 0, cfg, 0);
            cfg.conditional = true;
            f.cond = train(f.lex, f.folds, 0, cfg, 0);
            return f;
        }();
        return f;
    }
};

PmiRecord rec(const std::string& lang, const std::string& fam, const std::string& area, double value) {
    PmiRecord r;
    r.doculect_id = lang;
    r.language = lang;
    r.family = fam;
    r.macroarea = area;
    r.concept_id = 0;
    r.pmi = value;
    r.word_xent_uncond = value;
    r.word_xent_cond = 0.0;
    r.phone_count = 4;
    return r;
}

}  // namespace

TEST_CASE("identical models give pmi exactly 0 for every record") {
    const Fixture& f = Fixture::get();
    const auto& test_ids = f.folds.folds[0].test_ids;
    auto records = score_heldout(f.uncond, f.uncond, f.lex, test_ids);
    REQUIRE(!records.empty());
    for (const auto& r : records) {
        REQUIRE(r.pmi == 0.0);
        REQUIRE(r.word_xent_uncond == r.word_xent_cond);
    }
    const double mi = mutual_information(hierarchical_mean(records, [](const PmiRecord& r) { return r.word_xent_uncond; }),
                                         hierarchical_mean(records, [](const PmiRecord& r) { return r.word_xent_cond; }));
    REQUIRE(mi == 0.0);
}

TEST_CASE("uniform unconditioned model gives word_xent log2(42) on a 41-symbol lexicon") {
    StaircaseParams sp;
    sp.alphabet_size = 41;
    sp.num_concepts = 2;
    sp.num_families = 4;
    sp.languages_per_family = 2;
    SyntheticSpec spec = make_staircase_spec(sp);
    Lexicon lex = reassign_families_to_macroareas(generate(spec, 1));

    TrainedModel uniform;
    uniform.params = LstmParams::create(lex.alphabet.num_classes(), 8, 32, 1, 0);
    Rng rng(3);
    uniform.params.init_random(rng);
    uniform.params.out_w.fill(0.0);
    std::fill(uniform.params.out_b.begin(), uniform.params.out_b.end(), 0.0);
    uniform.alphabet_hash = lex.alphabet.hash();
    uniform.fold_id = 0;
    uniform.fold_scheme = "macroarea";

    std::vector<std::string> ids;
    for (const auto& d : lex.doculects) ids.push_back(d.doculect_id);
    auto records = score_heldout(uniform, uniform, lex, ids);
    const double log2_42 = 5.392317422778760289;
    for (const auto& r : records) REQUIRE(r.word_xent_uncond == Catch::Approx(log2_42).margin(1e-9));

    EntropyEstimate est = estimate_entropy(uniform, lex, ids);
    REQUIRE(est.value == Catch::Approx(log2_42).margin(1e-9));
}

TEST_CASE("hierarchical mean: single word propagates to every level") {
    std::vector<PmiRecord> records = {rec("l", "f", "Africa", 2.5)};
    EntropyEstimate est = hierarchical_mean(records, [](const PmiRecord& r) { return r.pmi; });
    REQUIRE(est.value == 2.5);
    REQUIRE(est.per_macroarea.at("Africa") == 2.5);
    REQUIRE(est.per_family.at("Africa/f") == 2.5);
    REQUIRE(est.per_language.at("Africa/f/l") == 2.5);
    REQUIRE(est.n_words == 1);
}

TEST_CASE("hierarchical mean weighs families equally regardless of word counts") {
    std::vector<PmiRecord> records;
    for (int i = 0; i < 99; ++i) records.push_back(rec("l1", "f1", "Africa", 1.0));
    records.push_back(rec("l2", "f2", "Africa", 3.0));
    EntropyEstimate est = hierarchical_mean(records, [](const PmiRecord& r) { return r.pmi; });
    REQUIRE(est.value == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("hierarchical mean is invariant under whole-family duplication") {
    Rng rng(9);
    const char* areas[3] = {"Africa", "Eurasia", "Pacific"};
    std::vector<PmiRecord> records;
    for (int a = 0; a < 3; ++a) {
        for (int f = 0; f < 4; ++f) {
            for (int l = 0; l < 3; ++l) {
                for (int w = 0; w < 1 + (f % 3); ++w) {
                    const std::string fam = std::string(areas[a]) + "_f" + std::to_string(f);
                    records.push_back(rec(fam + "_l" + std::to_string(l), fam, areas[a], rng.normal()));
                }
            }
        }
    }
    EntropyEstimate base = hierarchical_mean(records, [](const PmiRecord& r) { return r.pmi; });

    // append a copy of every record of one family: language means are
    // unchanged, so nothing above them moves
    std::vector<PmiRecord> duplicated = records;
    for (const auto& r : records) {
        if (r.family == "Africa_f1") duplicated.push_back(r);
    }
    EntropyEstimate dup = hierarchical_mean(duplicated, [](const PmiRecord& r) { return r.pmi; });
    REQUIRE(dup.value == Catch::Approx(base.value).margin(1e-12));

    // duplicating a language inside a family with its mean unchanged also changes nothing
    std::vector<PmiRecord> lang_dup = records;
    for (const auto& r : records) {
        if (r.language == "Africa_f0_l0") {
            PmiRecord copy = r;
            lang_dup.push_back(copy);  // same language key, same values: language mean unchanged
        }
    }
    EntropyEstimate ld = hierarchical_mean(lang_dup, [](const PmiRecord& r) { return r.pmi; });
    REQUIRE(ld.value == Catch::Approx(base.value).margin(1e-12));
}

TEST_CASE("hierarchical value recomputes as area mean of family means of language means") {
    Rng rng(10);
    const char* areas[2] = {"Africa", "Eurasia"};
    std::vector<PmiRecord> records;
    for (int i = 0; i < 200; ++i) {
        const std::string area = areas[i % 2];
        const std::string fam = area + "_f" + std::to_string(i % 5);
        records.push_back(rec(fam + "_l" + std::to_string(i % 3), fam, area, rng.normal()));
    }
    EntropyEstimate est = hierarchical_mean(records, [](const PmiRecord& r) { return r.pmi; });

    std::map<std::string, std::map<std::string, std::map<std::string, std::pair<double, int>>>> tree;
    for (const auto& r : records) {
        auto& cell = tree[r.macroarea][r.family][r.language];
        cell.first += r.pmi;
        cell.second += 1;
    }
    double area_sum = 0.0;
    for (const auto& [area, fams] : tree) {
        double fam_sum = 0.0;
        for (const auto& [fam, langs] : fams) {
            double lang_sum = 0.0;
            for (const auto& [lang, cell] : langs) lang_sum += cell.first / cell.second;
            fam_sum += lang_sum / static_cast<double>(langs.size());
        }
        area_sum += fam_sum / static_cast<double>(fams.size());
    }
    REQUIRE(est.value == Catch::Approx(area_sum / 2.0).margin(1e-12));
}

TEST_CASE("mutual_information subtracts the two bounds and rejects mismatched hierarchies") {
    auto make_est = [](double value) {
        std::vector<PmiRecord> records = {rec("l", "f", "Africa", value)};
        return hierarchical_mean(records, [](const PmiRecord& r) { return r.pmi; });
    };
    EntropyEstimate hw = make_est(3.773);
    EntropyEstimate hwv = make_est(3.762);
    REQUIRE(mutual_information(hw, hwv) == Catch::Approx(0.011).margin(1e-12));

    std::vector<PmiRecord> other = {rec("x", "g", "Eurasia", 3.7)};
    EntropyEstimate mismatched = hierarchical_mean(other, [](const PmiRecord& r) { return r.pmi; });
    REQUIRE_THROWS_AS(mutual_information(hw, mismatched), data_error);
}

TEST_CASE("uncertainty coefficient is the MI fraction of form entropy") {
    REQUIRE(uncertainty_coefficient(0.012, 3.857) == Catch::Approx(0.00311).margin(2e-5));
    REQUIRE(uncertainty_coefficient(0.020, 3.774) == Catch::Approx(0.0053).margin(1e-4));
    REQUIRE(uncertainty_coefficient(0.0, 3.857) == 0.0);
    REQUIRE_THROWS_AS(uncertainty_coefficient(0.01, 0.0), numeric_error);
    REQUIRE_THROWS_AS(uncertainty_coefficient(0.01, -1.0), numeric_error);
}

TEST_CASE("token PMI decomposes word PMI exactly (chain rule)") {
    const Fixture& f = Fixture::get();
    const auto& test_ids = f.folds.folds[0].test_ids;
    auto words = score_heldout(f.uncond, f.cond, f.lex, test_ids);
    auto tokens = score_tokens(f.uncond, f.cond, f.lex, test_ids);

    std::map<std::pair<std::string, int>, double> token_sums;
    for (const auto& t : tokens) token_sums[{t.doculect_id, t.concept_id}] += t.pmi_token;
    REQUIRE(!token_sums.empty());
    for (const auto& w : words) {
        const double total = token_sums.at({w.doculect_id, w.concept_id});
        REQUIRE(w.pmi * w.phone_count == Catch::Approx(total).margin(1e-9));
    }
}

TEST_CASE("token records carry positions and symbols including <eos>") {
    const Fixture& f = Fixture::get();
    auto tokens = score_tokens(f.uncond, f.cond, f.lex, {f.folds.folds[0].test_ids[0]});
    REQUIRE(!tokens.empty());
    bool saw_eos = false;
    for (const auto& t : tokens) {
        REQUIRE(t.position >= 0);
        if (t.symbol == "<eos>") saw_eos = true;
    }
    REQUIRE(saw_eos);

    auto same = score_tokens(f.uncond, f.uncond, f.lex, {f.folds.folds[0].test_ids[0]});
    for (const auto& t : same) REQUIRE(t.pmi_token == 0.0);
}

TEST_CASE("alphabet and fold mismatches are fatal") {
    const Fixture& f = Fixture::get();
    TrainedModel wrong = f.cond;
    wrong.alphabet_hash ^= 1;
    REQUIRE_THROWS_AS(score_heldout(f.uncond, wrong, f.lex, f.folds.folds[0].test_ids), data_error);
    TrainedModel other_fold = f.cond;
    other_fold.fold_id = 2;
    REQUIRE_THROWS_AS(score_heldout(f.uncond, other_fold, f.lex, f.folds.folds[0].test_ids), data_error);
}

TEST_CASE("planted synthetic: hierarchical mean pmi within range of the oracle MI") {
    StaircaseParams sp;
    sp.alphabet_size = 15;
    sp.num_concepts = 4;
    sp.num_families = 12;
    sp.languages_per_family = 16;
    sp.min_step = 3;
    sp.eos_hazard = 0.35;
    sp.planted = {{0, 0.9}, {1, 0.9}, {2, 0.9}, {3, 0.9}};
    sp.chain_seed = 5;
    OracleMi oracle = true_mi_bruteforce(make_staircase_spec(sp), 10);

    const Fixture& f = Fixture::get();
    auto records = score_heldout(f.uncond, f.cond, f.lex, f.folds.folds[0].test_ids);
    const double mi = mutual_information(hierarchical_mean(records, [](const PmiRecord& r) { return r.word_xent_uncond; }),
                                         hierarchical_mean(records, [](const PmiRecord& r) { return r.word_xent_cond; }));
    INFO("estimated " << mi << " vs oracle " << oracle.mi_bits_per_phone);
    REQUIRE(mi > 0.25 * oracle.mi_bits_per_phone);
    REQUIRE(mi < 2.0 * oracle.mi_bits_per_phone);
}

TEST_CASE("records CSVs round-trip exactly") {
    const Fixture& f = Fixture::get();
    auto records = score_heldout(f.uncond, f.cond, f.lex, {f.folds.folds[0].test_ids[0], f.folds.folds[0].test_ids[1]});
    std::ostringstream out;
    write_pmi_records_csv(records, out);
    std::istringstream in(out.str());
    auto loaded = read_pmi_records_csv(in, build_meta_index(f.lex));
    REQUIRE(loaded.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        REQUIRE(loaded[i].doculect_id == records[i].doculect_id);
        REQUIRE(loaded[i].language == records[i].language);
        REQUIRE(loaded[i].pmi == records[i].pmi);
        REQUIRE(loaded[i].word_xent_uncond == records[i].word_xent_uncond);
        REQUIRE(loaded[i].phone_count == records[i].phone_count);
    }

    auto tokens = score_tokens(f.uncond, f.cond, f.lex, {f.folds.folds[0].test_ids[0]});
    std::ostringstream tout;
    write_token_pmi_records_csv(tokens, tout);
    std::istringstream tin(tout.str());
    auto tloaded = read_token_pmi_records_csv(tin, build_meta_index(f.lex));
    REQUIRE(tloaded.size() == tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        REQUIRE(tloaded[i].symbol == tokens[i].symbol);
        REQUIRE(tloaded[i].pmi_token == tokens[i].pmi_token);
        REQUIRE(tloaded[i].position == tokens[i].position);
    }
}
