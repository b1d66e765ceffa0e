#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "formmi/checkpoint.hpp"
#include "formmi/errors.hpp"
#include "formmi/estimators.hpp"
#include "formmi/folds.hpp"
#include "formmi/hash.hpp"
#include "formmi/lexicon.hpp"
#include "formmi/model.hpp"
#include "formmi/stats.hpp"
#include "formmi/version.hpp"

namespace formmi {

struct RunConfig {
    std::string input_tsv;
    std::string alphabet_path;
    std::string run_dir;
    bool drop_loans = true;
    std::vector<std::string> exclude_flags = {"pidgin_creole", "constructed"};
    std::string fold_scheme = "macroarea";
    std::uint64_t seed = 0;
    int n_seeds = 25;
    ModelConfig model;
    bool shuffled_concepts = false;  // control run: concept ids permuted before conditional training
    long n_permutations = 100000;
    double q_concept = 0.01;
    double q_language = 0.01;
    double q_pair = 0.01;
    std::size_t min_joint = 1000;
    bool analyze_concepts = true;
    bool analyze_languages = true;
    bool analyze_pairs = true;
    std::string ensemble_mode = "mean";  // "mean" averages PMI per word over seeds; "best" picks best-validation models
    int workers = 0;                     // execution parameter, not part of the config snapshot

    FilterPolicy filter_policy() const {
        FilterPolicy policy;
        policy.drop_loans = drop_loans;
        for (const auto& f : exclude_flags) {
            auto flag = status_flag_from_name(f);
            if (!flag) throw config_error("unknown status flag '" + f + "'");
            policy.exclude_flags.insert(*flag);
        }
        return policy;
    }

    void validate() const {
        if (input_tsv.empty()) throw config_error("config: input_tsv is required");
        if (alphabet_path.empty()) throw config_error("config: alphabet_path is required");
        if (run_dir.empty()) throw config_error("config: run_dir is required");
        if (n_seeds < 1) throw config_error("config: n_seeds must be >= 1");
        if (n_permutations < 1) throw config_error("config: n_permutations must be >= 1");
        if (ensemble_mode != "mean" && ensemble_mode != "best") throw config_error("config: ensemble_mode must be mean or best");
        fold_scheme_from_name(fold_scheme);
        model.validate();
        filter_policy();
    }
};

// The snapshot covers every result-affecting field; run_dir and workers are
// intentionally excluded so identical configs give identical snapshots.
inline nlohmann::json run_config_to_json(const RunConfig& c) {
    return nlohmann::json{{"input_tsv", c.input_tsv},
                          {"alphabet_path", c.alphabet_path},
                          {"drop_loans", c.drop_loans},
                          {"exclude_flags", c.exclude_flags},
                          {"fold_scheme", c.fold_scheme},
                          {"seed", c.seed},
                          {"n_seeds", c.n_seeds},
                          {"model", model_config_to_json(c.model)},
                          {"shuffled_concepts", c.shuffled_concepts},
                          {"n_permutations", c.n_permutations},
                          {"q_concept", c.q_concept},
                          {"q_language", c.q_language},
                          {"q_pair", c.q_pair},
                          {"min_joint", c.min_joint},
                          {"analyze_concepts", c.analyze_concepts},
                          {"analyze_languages", c.analyze_languages},
                          {"analyze_pairs", c.analyze_pairs},
                          {"ensemble_mode", c.ensemble_mode}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.input_tsv = j.value("input_tsv", "");
    c.alphabet_path = j.value("alphabet_path", "");
    c.run_dir = j.value("run_dir", "");
    c.drop_loans = j.value("drop_loans", true);
    if (j.contains("exclude_flags")) c.exclude_flags = j.at("exclude_flags").get<std::vector<std::string>>();
    c.fold_scheme = j.value("fold_scheme", "macroarea");
    c.seed = j.value("seed", std::uint64_t{0});
    c.n_seeds = j.value("n_seeds", 25);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    c.shuffled_concepts = j.value("shuffled_concepts", false);
    c.n_permutations = j.value("n_permutations", 100000L);
    c.q_concept = j.value("q_concept", 0.01);
    c.q_language = j.value("q_language", 0.01);
    c.q_pair = j.value("q_pair", 0.01);
    c.min_joint = j.value("min_joint", std::size_t{1000});
    c.analyze_concepts = j.value("analyze_concepts", true);
    c.analyze_languages = j.value("analyze_languages", true);
    c.analyze_pairs = j.value("analyze_pairs", true);
    c.ensemble_mode = j.value("ensemble_mode", "mean");
    c.workers = j.value("workers", 0);
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error("config parse error in " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

struct FoldSummary {
    int fold = 0;
    std::string train_label, validation_label, test_label;
    double hw = 0.0;
    double mi = 0.0;
    double u = 0.0;
    double p = 1.0;
    std::vector<double> mi_per_seed;
};

struct Table1 {
    std::vector<FoldSummary> rows;
    FoldSummary average;
};

inline nlohmann::json table1_to_json(const Table1& t) {
    auto row_json = [](const FoldSummary& r) {
        return nlohmann::json{{"fold", r.fold},           {"train", r.train_label}, {"validation", r.validation_label},
                              {"test", r.test_label},     {"hw", r.hw},             {"mi", r.mi},
                              {"u", r.u},                 {"p", r.p},               {"mi_per_seed", r.mi_per_seed}};
    };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) rows.push_back(row_json(r));
    return nlohmann::json{{"rows", rows}, {"average", row_json(t.average)}};
}

inline Table1 table1_from_json(const nlohmann::json& j) {
    auto row_from = [](const nlohmann::json& r) {
        FoldSummary s;
        s.fold = r.value("fold", -1);
        s.train_label = r.value("train", "");
        s.validation_label = r.value("validation", "");
        s.test_label = r.value("test", "");
        s.hw = r.value("hw", 0.0);
        s.mi = r.value("mi", 0.0);
        s.u = r.value("u", 0.0);
        s.p = r.value("p", 1.0);
        if (r.contains("mi_per_seed")) s.mi_per_seed = r.at("mi_per_seed").get<std::vector<double>>();
        return s;
    };
    Table1 t;
    for (const auto& r : j.at("rows")) t.rows.push_back(row_from(r));
    t.average = row_from(j.at("average"));
    return t;
}

struct PipelineResult {
    Table1 table1;
    std::vector<PmiRecord> records;
    std::vector<TokenPmiRecord> token_records;
    std::optional<AnalysisReport> concept_report;
    std::optional<AnalysisReport> language_report;
    std::optional<ConceptTokenReport> pair_report;
    std::vector<std::string> warnings;
};

namespace detail_pipeline {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << content;
    if (!out) throw data_error("failed writing " + path.string());
}

struct SeedScore {
    double hw = 0.0;
    double hwv = 0.0;
    double mi = 0.0;
    std::vector<PmiRecord> records;
    std::vector<TokenPmiRecord> tokens;
};

}  // namespace detail_pipeline

// Full reproduction pipeline: ingest -> folds -> seed-ensemble training ->
// held-out scoring -> significance analyses. Writes every artifact into
// run_dir and finishes with a manifest carrying content hashes.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    const fs::path run_dir(cfg.run_dir);
    fs::create_directories(run_dir);
    fs::create_directories(run_dir / "models");

    std::map<std::string, std::string> output_hashes;
    auto record_output = [&](const fs::path& p) { output_hashes[fs::relative(p, run_dir).string()] = hash_file_hex(p.string()); };

    nlohmann::json manifest;
    manifest["format"] = "formmi-run";
    manifest["version"] = kVersion;
    manifest["status"] = "incomplete";

    auto write_manifest = [&]() {
        nlohmann::json outputs = nlohmann::json::object();
        for (const auto& [rel, hash] : output_hashes) outputs[rel] = hash;
        manifest["outputs"] = outputs;
        detail_pipeline::write_text_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
    };

    try {
        // ingest
        std::ifstream alpha_in(cfg.alphabet_path);
        if (!alpha_in) throw data_error("cannot read alphabet file " + cfg.alphabet_path);
        const Alphabet alphabet = Alphabet::from_stream(alpha_in);
        std::ifstream tsv_in(cfg.input_tsv, std::ios::binary);
        if (!tsv_in) throw data_error("cannot read input " + cfg.input_tsv);
        ParseReport parse_report;
        Lexicon lex = parse_wordlists(tsv_in, alphabet, InputFormat::Tsv, &parse_report);
        FilterReport filter_report;
        lex = filter_lexicon(lex, cfg.filter_policy(), &filter_report);
        lex = reassign_families_to_macroareas(lex);
        const FoldScheme scheme = fold_scheme_from_name(cfg.fold_scheme);
        const FoldAssignment folds = make_folds(lex, scheme, cfg.seed);

        manifest["data_hash"] = hash_file_hex(cfg.input_tsv);
        manifest["alphabet_hash"] = hash_hex(alphabet.hash());
        manifest["config_snapshot"] = run_config_to_json(cfg);
        manifest["config_hash"] = hash_hex(fnv1a64(run_config_to_json(cfg).dump()));
        manifest["seeds"] = [&] {
            std::vector<std::uint64_t> seeds;
            for (int s = 0; s < cfg.n_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
            return seeds;
        }();
        manifest["ingest"] = {{"rows_total", parse_report.rows_total},
                              {"rows_rejected", parse_report.rows_rejected},
                              {"duplicates_dropped", parse_report.duplicates_dropped},
                              {"doculects_removed", filter_report.doculects_removed},
                              {"loan_entries_removed", filter_report.loan_entries_removed},
                              {"doculects", lex.doculects.size()},
                              {"concepts", lex.concepts.size()},
                              {"entries", lex.total_entries()}};

        {
            std::ostringstream lex_out;
            serialize_wordlists(lex, lex_out);
            detail_pipeline::write_text_file(run_dir / "lexicon.tsv", lex_out.str());
            record_output(run_dir / "lexicon.tsv");
            std::ostringstream alpha_out;
            for (const auto& s : alphabet.symbols()) alpha_out << s << '\n';
            detail_pipeline::write_text_file(run_dir / "alphabet.txt", alpha_out.str());
            record_output(run_dir / "alphabet.txt");
            nlohmann::json folds_json = nlohmann::json::array();
            for (std::size_t i = 0; i < folds.folds.size(); ++i) {
                const Fold& f = folds.folds[i];
                folds_json.push_back({{"fold", i},
                                      {"train", f.train_label},
                                      {"validation", f.validation_label},
                                      {"test", f.test_label},
                                      {"train_ids", f.train_ids},
                                      {"validation_ids", f.validation_ids},
                                      {"test_ids", f.test_ids}});
            }
            detail_pipeline::write_text_file(run_dir / "folds.json", folds_json.dump(2) + "\n");
            record_output(run_dir / "folds.json");
        }

        const int workers = cfg.workers > 0 ? cfg.workers : default_workers();
        const int n_folds = static_cast<int>(folds.folds.size());

        // one task per (fold, seed, conditional); deterministic result slots
        struct TrainSlot {
            std::optional<TrainedModel> model;
            std::string error;
        };
        std::vector<TrainSlot> slots(static_cast<std::size_t>(n_folds * cfg.n_seeds * 2));
        std::vector<TrainDataset> datasets;
        datasets.reserve(static_cast<std::size_t>(n_folds));
        for (int f = 0; f < n_folds; ++f) {
            TrainDataset ds = build_fold_dataset(lex, folds, f);
            if (cfg.shuffled_concepts) ds.train = shuffle_concept_ids(std::move(ds.train), derive_seed(cfg.seed, "shuffle"));
            datasets.push_back(std::move(ds));
        }

        parallel_for(n_folds * cfg.n_seeds * 2, workers, [&](int task) {
            const int f = task / (cfg.n_seeds * 2);
            const int rem = task % (cfg.n_seeds * 2);
            const int s = rem / 2;
            const bool conditional = (rem % 2) == 1;
            ModelConfig mc = cfg.model;
            mc.conditional = conditional;
            try {
                TrainedModel m = train(lex, datasets[static_cast<std::size_t>(f)], mc, scheme, f, static_cast<std::uint64_t>(s));
                slots[static_cast<std::size_t>(task)].model = std::move(m);
            } catch (const std::exception& e) {
                slots[static_cast<std::size_t>(task)].error = e.what();
            }
        });

        PipelineResult result;
        auto slot_of = [&](int f, int s, bool cond) -> TrainSlot& {
            return slots[static_cast<std::size_t>(f * cfg.n_seeds * 2 + s * 2 + (cond ? 1 : 0))];
        };
        for (int f = 0; f < n_folds; ++f) {
            for (int s = 0; s < cfg.n_seeds; ++s) {
                for (bool cond : {false, true}) {
                    TrainSlot& slot = slot_of(f, s, cond);
                    if (slot.model) {
                        const std::string name =
                            "models/f" + std::to_string(f) + "_s" + std::to_string(s) + (cond ? "_cond" : "_uncond") + ".json";
                        save_checkpoint(*slot.model, (run_dir / name).string());
                        record_output(run_dir / name);
                    } else {
                        result.warnings.push_back("fold " + std::to_string(f) + " seed " + std::to_string(s) +
                                                  (cond ? " conditional" : " unconditioned") + " failed: " + slot.error);
                    }
                }
            }
        }

        // scoring per (fold, seed)
        std::vector<std::vector<std::optional<detail_pipeline::SeedScore>>> scores(
            static_cast<std::size_t>(n_folds), std::vector<std::optional<detail_pipeline::SeedScore>>(static_cast<std::size_t>(cfg.n_seeds)));
        parallel_for(n_folds * cfg.n_seeds, workers, [&](int task) {
            const int f = task / cfg.n_seeds;
            const int s = task % cfg.n_seeds;
            TrainSlot& su = slot_of(f, s, false);
            TrainSlot& sc = slot_of(f, s, true);
            if (!su.model || !sc.model) return;
            detail_pipeline::SeedScore score;
            score.records = score_heldout(*su.model, *sc.model, lex, folds.folds[static_cast<std::size_t>(f)].test_ids);
            score.tokens = score_tokens(*su.model, *sc.model, lex, folds.folds[static_cast<std::size_t>(f)].test_ids);
            const EntropyEstimate hw = hierarchical_mean(score.records, [](const PmiRecord& r) { return r.word_xent_uncond; });
            const EntropyEstimate hwv = hierarchical_mean(score.records, [](const PmiRecord& r) { return r.word_xent_cond; });
            score.hw = hw.value;
            score.hwv = hwv.value;
            score.mi = mutual_information(hw, hwv);
            scores[static_cast<std::size_t>(f)][static_cast<std::size_t>(s)] = std::move(score);
        });

        // table1.json summary
        std::vector<double> pooled_mi;
        double hw_sum = 0.0, mi_sum = 0.0;
        int folds_with_scores = 0;
        for (int f = 0; f < n_folds; ++f) {
            FoldSummary row;
            row.fold = f;
            row.train_label = folds.folds[static_cast<std::size_t>(f)].train_label;
            row.validation_label = folds.folds[static_cast<std::size_t>(f)].validation_label;
            row.test_label = folds.folds[static_cast<std::size_t>(f)].test_label;
            double fold_hw = 0.0;
            for (int s = 0; s < cfg.n_seeds; ++s) {
                const auto& sc = scores[static_cast<std::size_t>(f)][static_cast<std::size_t>(s)];
                if (!sc) continue;
                row.mi_per_seed.push_back(sc->mi);
                fold_hw += sc->hw;
            }
            if (row.mi_per_seed.empty()) throw numeric_error("fold " + std::to_string(f) + ": every seed failed");
            row.hw = fold_hw / static_cast<double>(row.mi_per_seed.size());
            double fold_mi = 0.0;
            for (double v : row.mi_per_seed) fold_mi += v;
            row.mi = fold_mi / static_cast<double>(row.mi_per_seed.size());
            row.u = uncertainty_coefficient(row.mi, row.hw);
            Rng rng(derive_seed(cfg.seed, "overall:fold" + std::to_string(f)));
            row.p = sign_flip_test(row.mi_per_seed, cfg.n_permutations, rng).p_value;
            for (double v : row.mi_per_seed) pooled_mi.push_back(v);
            hw_sum += row.hw;
            mi_sum += row.mi;
            ++folds_with_scores;
            result.table1.rows.push_back(std::move(row));
        }
        result.table1.average.fold = -1;
        result.table1.average.train_label = "average";
        result.table1.average.hw = hw_sum / folds_with_scores;
        result.table1.average.mi = mi_sum / folds_with_scores;
        result.table1.average.u = uncertainty_coefficient(result.table1.average.mi, result.table1.average.hw);
        result.table1.average.mi_per_seed = pooled_mi;
        {
            Rng rng(derive_seed(cfg.seed, "overall:all"));
            result.table1.average.p = sign_flip_test(pooled_mi, cfg.n_permutations, rng).p_value;
        }
        detail_pipeline::write_text_file(run_dir / "table1.json", table1_to_json(result.table1).dump(2) + "\n");
        record_output(run_dir / "table1.json");

        // seed aggregation into final record sets
        if (cfg.ensemble_mode == "mean") {
            for (int f = 0; f < n_folds; ++f) {
                std::map<std::pair<std::string, int>, PmiRecord> acc;  // (doculect, concept)
                std::map<std::pair<std::string, int>, int> count;
                std::map<std::tuple<std::string, int, int>, TokenPmiRecord> tacc;
                std::map<std::tuple<std::string, int, int>, int> tcount;
                for (int s = 0; s < cfg.n_seeds; ++s) {
                    const auto& sc = scores[static_cast<std::size_t>(f)][static_cast<std::size_t>(s)];
                    if (!sc) continue;
                    for (const auto& r : sc->records) {
                        auto key = std::make_pair(r.doculect_id, r.concept_id);
                        auto [it, inserted] = acc.emplace(key, r);
                        if (!inserted) {
                            it->second.word_xent_uncond += r.word_xent_uncond;
                            it->second.word_xent_cond += r.word_xent_cond;
                        }
                        ++count[key];
                    }
                    for (const auto& t : sc->tokens) {
                        auto key = std::make_tuple(t.doculect_id, t.concept_id, t.position);
                        auto [it, inserted] = tacc.emplace(key, t);
                        if (!inserted) it->second.pmi_token += t.pmi_token;
                        ++tcount[key];
                    }
                }
                for (auto& [key, r] : acc) {
                    r.word_xent_uncond /= count[key];
                    r.word_xent_cond /= count[key];
                    r.pmi = r.word_xent_uncond - r.word_xent_cond;
                    result.records.push_back(r);
                }
                for (auto& [key, t] : tacc) {
                    t.pmi_token /= tcount[key];
                    result.token_records.push_back(t);
                }
            }
        } else {  // best: per fold, the best-validation model pair
            for (int f = 0; f < n_folds; ++f) {
                int best_u = -1, best_c = -1;
                for (int s = 0; s < cfg.n_seeds; ++s) {
                    const TrainSlot& su = slot_of(f, s, false);
                    const TrainSlot& sc = slot_of(f, s, true);
                    if (su.model && (best_u < 0 || su.model->validation_xent < slot_of(f, best_u, false).model->validation_xent)) {
                        best_u = s;
                    }
                    if (sc.model && (best_c < 0 || sc.model->validation_xent < slot_of(f, best_c, true).model->validation_xent)) {
                        best_c = s;
                    }
                }
                if (best_u < 0 || best_c < 0) continue;
                auto records = score_heldout(*slot_of(f, best_u, false).model, *slot_of(f, best_c, true).model, lex,
                                             folds.folds[static_cast<std::size_t>(f)].test_ids);
                auto tokens = score_tokens(*slot_of(f, best_u, false).model, *slot_of(f, best_c, true).model, lex,
                                           folds.folds[static_cast<std::size_t>(f)].test_ids);
                result.records.insert(result.records.end(), records.begin(), records.end());
                result.token_records.insert(result.token_records.end(), tokens.begin(), tokens.end());
            }
        }

        {
            std::ostringstream rec_out;
            write_pmi_records_csv(result.records, rec_out);
            detail_pipeline::write_text_file(run_dir / "pmi_records.csv", rec_out.str());
            record_output(run_dir / "pmi_records.csv");
            std::ostringstream tok_out;
            write_token_pmi_records_csv(result.token_records, tok_out);
            detail_pipeline::write_text_file(run_dir / "token_pmi_records.csv", tok_out.str());
            record_output(run_dir / "token_pmi_records.csv");
        }

        // analyses
        const MetaIndex meta = build_meta_index(lex);
        if (cfg.analyze_concepts) {
            result.concept_report = per_concept_analysis(result.records, lex.concepts, cfg.n_permutations, cfg.q_concept,
                                                         derive_seed(cfg.seed, "concept_analysis"), workers);
            std::ostringstream out;
            write_concept_report_csv(*result.concept_report, out);
            detail_pipeline::write_text_file(run_dir / "concept_report.csv", out.str());
            record_output(run_dir / "concept_report.csv");
        }
        if (cfg.analyze_languages) {
            result.language_report = per_language_analysis(result.records, cfg.n_permutations, cfg.q_language,
                                                           derive_seed(cfg.seed, "language_analysis"), &meta, workers);
            std::ostringstream out;
            write_language_report_csv(*result.language_report, out);
            detail_pipeline::write_text_file(run_dir / "language_report.csv", out.str());
            record_output(run_dir / "language_report.csv");
        }
        if (cfg.analyze_pairs) {
            result.pair_report = concept_token_analysis(result.token_records, lex.concepts, cfg.min_joint, cfg.n_permutations,
                                                        cfg.q_pair, derive_seed(cfg.seed, "pair_analysis"), workers);
            std::ostringstream out;
            write_pair_report_csv(*result.pair_report, out);
            detail_pipeline::write_text_file(run_dir / "pair_report.csv", out.str());
            record_output(run_dir / "pair_report.csv");
        }

        manifest["warnings"] = result.warnings;
        manifest["status"] = "complete";
        write_manifest();
        return result;
    } catch (...) {
        try {
            write_manifest();
        } catch (...) {
        }
        throw;
    }
}

// Verifies manifest hashes and renders the summary table.
// Significance markers: double dagger p<0.01, asterisk p<0.1.
inline std::string render_report(const std::string& run_dir_path) {
    namespace fs = std::filesystem;
    const fs::path run_dir(run_dir_path);
    std::ifstream mf(run_dir / "manifest.json");
    if (!mf) throw data_error("missing manifest.json in " + run_dir_path);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const std::exception& e) {
        throw data_error("manifest parse error: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "formmi-run") throw data_error("not a formmi run directory");

    const nlohmann::json outputs = manifest.value("outputs", nlohmann::json::object());
    for (const auto& [rel, hash] : outputs.items()) {
        const fs::path p = run_dir / rel;
        if (!fs::exists(p)) throw data_error("output listed in manifest is missing: " + rel);
        const std::string actual = hash_file_hex(p.string());
        if (actual != hash.get<std::string>()) {
            throw data_error("content hash mismatch for " + rel + " (manifest " + hash.get<std::string>() + ", actual " + actual + ")");
        }
    }

    std::ostringstream out;
    out << "formmi run " << run_dir_path << " (status: " << manifest.value("status", "?") << ")\n";
    if (manifest.contains("data_hash")) out << "data hash " << manifest["data_hash"].get<std::string>() << "\n";

    auto dagger = [](double p) {
        if (p < 0.01) return std::string(" \xE2\x80\xA1");  // double dagger
        if (p < 0.1) return std::string(" *");
        return std::string();
    };

    std::ifstream t1(run_dir / "table1.json");
    if (t1) {
        nlohmann::json j;
        t1 >> j;
        const Table1 table = table1_from_json(j);
        out << "\n";
        out << std::left << std::setw(22) << "Train" << std::setw(12) << "Validation" << std::setw(12) << "Test"
            << std::right << std::setw(8) << "H(W)" << std::setw(10) << "MI" << std::setw(10) << "U" << "\n";
        auto print_row = [&](const FoldSummary& r, const std::string& train_label) {
            std::ostringstream mi;
            mi << std::fixed << std::setprecision(3) << r.mi << dagger(r.p);
            std::ostringstream u;
            u << std::fixed << std::setprecision(3) << 100.0 * r.u << "%";
            out << std::left << std::setw(22) << train_label << std::setw(12) << r.validation_label << std::setw(12)
                << r.test_label << std::right << std::setw(8) << std::fixed << std::setprecision(3) << r.hw << std::setw(10)
                << mi.str() << std::setw(10) << u.str() << "\n";
        };
        for (const auto& r : table.rows) print_row(r, r.train_label);
        print_row(table.average, "Average");
        out << "\xE2\x80\xA1 p<0.01  * p<0.1\n";
    }

    auto count_significant = [&](const fs::path& p, int sig_col) -> std::pair<int, int> {
        std::ifstream in(p);
        if (!in) return {-1, -1};
        std::vector<std::string> row;
        if (!csv_read_row(in, row)) return {-1, -1};
        int total = 0, sig = 0;
        while (csv_read_row(in, row)) {
            if (row.size() <= static_cast<std::size_t>(sig_col)) continue;
            ++total;
            if (row[static_cast<std::size_t>(sig_col)] == "1") ++sig;
        }
        return {sig, total};
    };

    const auto [csig, ctotal] = count_significant(run_dir / "concept_report.csv", 5);
    if (ctotal >= 0) out << "\nconcepts with significant positive MI: " << csig << " of " << ctotal << "\n";
    const auto [lsig, ltotal] = count_significant(run_dir / "language_report.csv", 5);
    if (ltotal >= 0) out << "languages with significant positive MI: " << lsig << " of " << ltotal << "\n";
    const auto [psig, ptotal] = count_significant(run_dir / "pair_report.csv", 11);
    if (ptotal >= 0) out << "concept-token pairs significant in all macroareas: " << psig << " of " << ptotal << "\n";

    return out.str();
}

}  // namespace formmi
