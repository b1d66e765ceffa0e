// formmi: estimates cross-linguistic form-meaning mutual information from
// concept-aligned wordlists via phone-level LSTM language models, with
// genealogical/areal controls and permutation-based significance testing.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "formmi/checkpoint.hpp"
#include "formmi/errors.hpp"
#include "formmi/estimators.hpp"
#include "formmi/folds.hpp"
#include "formmi/hyperopt.hpp"
#include "formmi/lexicon.hpp"
#include "formmi/model.hpp"
#include "formmi/pipeline.hpp"
#include "formmi/stats.hpp"
#include "formmi/synthetic.hpp"
#include "formmi/version.hpp"

namespace fs = std::filesystem;
using namespace formmi;

namespace {

Alphabet load_alphabet(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read alphabet file " + path);
    return Alphabet::from_stream(in);
}

Lexicon load_lexicon(const std::string& input, const Alphabet& alphabet, ParseReport* report = nullptr) {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw data_error("cannot read input " + input);
    return parse_wordlists(in, alphabet, InputFormat::Tsv, report);
}

FilterPolicy make_policy(bool drop_loans, const std::string& exclude_flags_csv) {
    FilterPolicy policy;
    policy.drop_loans = drop_loans;
    std::stringstream ss(exclude_flags_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        auto f = status_flag_from_name(tok);
        if (!f) throw config_error("unknown status flag '" + tok + "'");
        policy.exclude_flags.insert(*f);
    }
    return policy;
}

SyntheticSpec load_synth_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read synthetic spec " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error("synthetic spec parse error: " + std::string(e.what()));
    }
    StaircaseParams sp;
    sp.alphabet_size = j.value("alphabet_size", 41);
    sp.num_concepts = j.value("concepts", 20);
    sp.num_families = j.value("families", 40);
    sp.languages_per_family = j.value("languages_per_family", 10);
    sp.eos_hazard = j.value("eos_hazard", 0.22);
    sp.min_step = j.value("min_step", 4);
    sp.branches = j.value("branches", 3);
    sp.chain_seed = j.value("chain_seed", std::uint64_t{0});
    for (const auto& p : j.value("planted", nlohmann::json::array())) {
        sp.planted.emplace_back(p.at("concept").get<int>(), p.at("strength").get<double>());
    }
    return make_staircase_spec(sp);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    out << content;
    if (!out) throw data_error("failed writing " + path);
}

int run_ingest(const std::string& input, const std::string& alphabet_path, bool drop_loans, const std::string& exclude_flags,
               const std::string& scheme, std::uint64_t seed, const std::string& out_dir) {
    const Alphabet alphabet = load_alphabet(alphabet_path);
    ParseReport report;
    Lexicon lex = load_lexicon(input, alphabet, &report);
    for (const auto& d : report.diagnostics) std::cerr << "ingest: " << d << "\n";
    FilterReport filter_report;
    lex = filter_lexicon(lex, make_policy(drop_loans, exclude_flags), &filter_report);
    lex = reassign_families_to_macroareas(lex);
    const FoldAssignment folds = make_folds(lex, fold_scheme_from_name(scheme), seed);

    fs::create_directories(out_dir);
    std::ostringstream lex_out;
    serialize_wordlists(lex, lex_out);
    write_file((fs::path(out_dir) / "lexicon.tsv").string(), lex_out.str());
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
    write_file((fs::path(out_dir) / "folds.json").string(), folds_json.dump(2) + "\n");

    std::set<std::string> iso_codes;
    for (const auto& d : lex.doculects) {
        if (!d.iso_code.empty()) iso_codes.insert(d.iso_code);
    }
    std::cout << "rows: " << report.rows_total << " (rejected " << report.rows_rejected << ", duplicates "
              << report.duplicates_dropped << ")\n"
              << "doculects: " << lex.doculects.size() << " (excluded " << filter_report.doculects_removed << ")\n"
              << "distinct iso codes: " << iso_codes.size() << "\n"
              << "loan entries dropped: " << filter_report.loan_entries_removed << "\n"
              << "concepts: " << lex.num_concepts() << "\n"
              << "entries: " << lex.total_entries() << "\n"
              << "fold scheme: " << scheme << " (" << folds.folds.size() << " folds)\n";
    return kExitOk;
}

int run_synth(const std::string& spec_path, std::uint64_t seed, const std::string& out_tsv, const std::string& alphabet_out) {
    const SyntheticSpec spec = load_synth_spec(spec_path);
    const Lexicon lex = generate(spec, seed);
    std::ostringstream out;
    serialize_wordlists(lex, out);
    write_file(out_tsv, out.str());
    if (!alphabet_out.empty()) {
        std::ostringstream alpha;
        for (const auto& s : lex.alphabet.symbols()) alpha << s << '\n';
        write_file(alphabet_out, alpha.str());
    }
    std::cout << "wrote " << lex.doculects.size() << " doculects x " << lex.num_concepts() << " concepts to " << out_tsv << "\n";
    return kExitOk;
}

int run_train(const std::string& input, const std::string& alphabet_path, bool drop_loans, const std::string& exclude_flags,
              const std::string& scheme, std::uint64_t seed, int fold_index, bool conditional, int n_seeds,
              const std::string& config_path, const std::string& run_dir, bool shuffled, int workers) {
    const Alphabet alphabet = load_alphabet(alphabet_path);
    Lexicon lex = load_lexicon(input, alphabet);
    lex = filter_lexicon(lex, make_policy(drop_loans, exclude_flags));
    lex = reassign_families_to_macroareas(lex);
    const FoldAssignment folds = make_folds(lex, fold_scheme_from_name(scheme), seed);

    ModelConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw config_error("cannot read model config " + config_path);
        nlohmann::json j;
        in >> j;
        cfg = model_config_from_json(j);
    }
    cfg.conditional = conditional;

    TrainDataset ds = build_fold_dataset(lex, folds, fold_index);
    if (shuffled) ds.train = shuffle_concept_ids(std::move(ds.train), derive_seed(seed, "shuffle"));

    fs::create_directories(run_dir);
    nlohmann::json manifest;
    manifest["format"] = "formmi-train";
    manifest["version"] = kVersion;
    manifest["fold_scheme"] = scheme;
    manifest["fold_index"] = fold_index;
    manifest["conditional"] = conditional;
    manifest["shuffled_concepts"] = shuffled;
    manifest["config"] = model_config_to_json(cfg);
    nlohmann::json models = nlohmann::json::array();

    std::vector<std::optional<TrainedModel>> trained(static_cast<std::size_t>(n_seeds));
    std::vector<std::string> errors(static_cast<std::size_t>(n_seeds));
    parallel_for(n_seeds, workers > 0 ? workers : default_workers(), [&](int s) {
        try {
            trained[static_cast<std::size_t>(s)] = train(lex, ds, cfg, folds.scheme, fold_index, static_cast<std::uint64_t>(s));
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(s)] = e.what();
        }
    });

    int failures = 0;
    for (int s = 0; s < n_seeds; ++s) {
        if (trained[static_cast<std::size_t>(s)]) {
            const std::string name = "model_f" + std::to_string(fold_index) + "_s" + std::to_string(s) +
                                     (conditional ? "_cond" : "_uncond") + ".json";
            save_checkpoint(*trained[static_cast<std::size_t>(s)], (fs::path(run_dir) / name).string());
            models.push_back({{"seed", s},
                              {"path", name},
                              {"validation_xent", trained[static_cast<std::size_t>(s)]->validation_xent},
                              {"epochs", trained[static_cast<std::size_t>(s)]->training_curve.size()}});
            std::cout << "seed " << s << ": validation " << format_double(trained[static_cast<std::size_t>(s)]->validation_xent)
                      << " bits/phone\n";
        } else {
            ++failures;
            models.push_back({{"seed", s}, {"error", errors[static_cast<std::size_t>(s)]}});
            std::cerr << "seed " << s << " failed: " << errors[static_cast<std::size_t>(s)] << "\n";
        }
    }
    manifest["models"] = models;
    write_file((fs::path(run_dir) / "train_manifest.json").string(), manifest.dump(2) + "\n");
    if (failures == n_seeds) throw numeric_error("all seeds failed");
    return kExitOk;
}

int run_analyze(const std::string& records_path, const std::string& token_records_path, const std::string& lexicon_path,
                const std::string& alphabet_path, const std::string& granularity, long n_perm, double q,
                std::size_t min_joint, std::uint64_t seed, const std::string& out_path, int workers) {
    const Alphabet alphabet = load_alphabet(alphabet_path);
    const Lexicon lex = load_lexicon(lexicon_path, alphabet);
    const MetaIndex meta = build_meta_index(lex);

    auto read_records = [&]() {
        if (records_path.empty()) throw config_error("--records is required for this granularity");
        std::ifstream in(records_path, std::ios::binary);
        if (!in) throw data_error("cannot read " + records_path);
        return read_pmi_records_csv(in, meta);
    };

    if (granularity == "overall") {
        auto records = read_records();
        Rng rng(derive_seed(seed, "overall_analysis"));
        const PermutationResult res = hierarchical_sign_flip_test(records, n_perm, rng);
        const EntropyEstimate hw = hierarchical_mean(records, [](const PmiRecord& r) { return r.word_xent_uncond; });
        std::cout << "records: " << res.unit_count << "\n"
                  << "H(W): " << format_double(hw.value) << " bits/phone\n"
                  << "MI: " << format_double(res.observed_mean) << " bits/phone\n"
                  << "U: " << format_double(100.0 * res.observed_mean / hw.value) << "%\n"
                  << "p (hierarchical sign-flip, " << n_perm << " permutations): " << format_double(res.p_value) << "\n";
        return kExitOk;
    }

    std::ostringstream out;
    if (granularity == "concept") {
        const AnalysisReport report = per_concept_analysis(read_records(), lex.concepts, n_perm, q,
                                                           derive_seed(seed, "concept_analysis"), workers);
        write_concept_report_csv(report, out);
    } else if (granularity == "language") {
        const AnalysisReport report =
            per_language_analysis(read_records(), n_perm, q, derive_seed(seed, "language_analysis"), &meta, workers);
        write_language_report_csv(report, out);
    } else if (granularity == "pair") {
        if (token_records_path.empty()) throw config_error("--token-records is required for pair granularity");
        std::ifstream in(token_records_path, std::ios::binary);
        if (!in) throw data_error("cannot read " + token_records_path);
        auto tokens = read_token_pmi_records_csv(in, meta);
        const ConceptTokenReport report =
            concept_token_analysis(tokens, lex.concepts, min_joint, n_perm, q, derive_seed(seed, "pair_analysis"), workers);
        write_pair_report_csv(report, out);
    } else {
        throw config_error("unknown granularity '" + granularity + "' (expected overall, concept, language, pair)");
    }
    if (out_path.empty()) {
        std::cout << out.str();
    } else {
        write_file(out_path, out.str());
        std::cout << "wrote " << out_path << "\n";
    }
    return kExitOk;
}

int run_hyperopt(const std::string& input, const std::string& alphabet_path, bool drop_loans, const std::string& exclude_flags,
                 const std::string& scheme, std::uint64_t seed, int fold_index, bool conditional, int budget,
                 int seeds_per_config, const std::string& history_path, int workers) {
    const Alphabet alphabet = load_alphabet(alphabet_path);
    Lexicon lex = load_lexicon(input, alphabet);
    lex = filter_lexicon(lex, make_policy(drop_loans, exclude_flags));
    lex = reassign_families_to_macroareas(lex);
    const FoldAssignment folds = make_folds(lex, fold_scheme_from_name(scheme), seed);

    ModelConfig base;
    base.conditional = conditional;

    TrialHistory resume;
    if (!history_path.empty() && fs::exists(history_path)) {
        std::ifstream in(history_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line);
            Trial t;
            const auto& pt = j.at("point");
            for (int d = 0; d < SearchSpace::kDims; ++d) t.point[static_cast<std::size_t>(d)] = pt[static_cast<std::size_t>(d)].get<double>();
            t.ok = j.value("ok", false);
            t.value = j.value("value", std::numeric_limits<double>::quiet_NaN());
            t.error = j.value("error", "");
            resume.trials.push_back(t);
        }
        std::cout << "resumed " << resume.trials.size() << " trials from " << history_path << "\n";
    }

    std::ofstream hist_out;
    if (!history_path.empty()) {
        hist_out.open(history_path, std::ios::app);
        if (!hist_out) throw data_error("cannot append to " + history_path);
    }
    auto on_trial = [&](const Trial& t) {
        std::cout << "trial " << "point=[" << format_double(t.point[0]) << "," << format_double(t.point[1]) << ","
                  << format_double(t.point[2]) << "," << format_double(t.point[3]) << "] "
                  << (t.ok ? "value=" + format_double(t.value) : "failed: " + t.error) << "\n";
        if (hist_out) {
            nlohmann::json j;
            j["point"] = t.point;
            j["ok"] = t.ok;
            if (t.ok) j["value"] = t.value;
            if (!t.error.empty()) j["error"] = t.error;
            hist_out << j.dump() << "\n";
            hist_out.flush();
        }
    };

    const SearchOutcome outcome = run_search(lex, folds, fold_index, base, budget, seeds_per_config, seed,
                                             workers > 0 ? workers : default_workers(), std::move(resume), on_trial);
    std::cout << "best validation xent: " << format_double(outcome.best_value) << " bits/phone\n"
              << "best config: " << model_config_to_json(outcome.best_config).dump() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"form-meaning mutual information estimation over concept-aligned wordlists"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    int workers = 0;
    app.add_option("--workers", workers, "worker threads for parallel sections (default: hardware)");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse, filter and partition a wordlist TSV");
    std::string in_input, in_alphabet, in_out_dir = "ingest_out", in_exclude = "pidgin_creole,constructed";
    std::string in_scheme = "macroarea";
    bool in_drop_loans = false;
    std::uint64_t in_seed = 0;
    ingest->add_option("--input", in_input, "wordlist TSV")->required();
    ingest->add_option("--alphabet", in_alphabet, "alphabet sidecar, one symbol per line")->required();
    ingest->add_flag("--drop-loans", in_drop_loans, "drop entries marked as loans");
    ingest->add_option("--exclude-flags", in_exclude, "comma-joined status flags to exclude");
    ingest->add_option("--fold-scheme", in_scheme, "macroarea or family");
    ingest->add_option("--seed", in_seed, "fold shuffling seed (family scheme)");
    ingest->add_option("--out-dir", in_out_dir, "output directory");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic lexicon with known MI");
    std::string sy_spec, sy_out = "synthetic.tsv", sy_alpha_out;
    std::uint64_t sy_seed = 0;
    synth->add_option("--spec", sy_spec, "synthetic spec JSON")->required();
    synth->add_option("--seed", sy_seed, "generation seed");
    synth->add_option("--out", sy_out, "output TSV path");
    synth->add_option("--alphabet-out", sy_alpha_out, "also write the alphabet sidecar here");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a seed ensemble on one fold");
    std::string tr_input, tr_alphabet, tr_config, tr_run_dir = "train_out", tr_exclude = "pidgin_creole,constructed";
    std::string tr_scheme = "macroarea";
    bool tr_drop_loans = false, tr_conditional = false, tr_shuffled = false;
    std::uint64_t tr_seed = 0;
    int tr_fold = 0, tr_seeds = 1;
    train_cmd->add_option("--input", tr_input, "wordlist TSV")->required();
    train_cmd->add_option("--alphabet", tr_alphabet, "alphabet sidecar")->required();
    train_cmd->add_flag("--drop-loans", tr_drop_loans, "drop entries marked as loans");
    train_cmd->add_option("--exclude-flags", tr_exclude, "comma-joined status flags to exclude");
    train_cmd->add_option("--fold-scheme", tr_scheme, "macroarea or family");
    train_cmd->add_option("--fold-index", tr_fold, "fold to train on");
    train_cmd->add_flag("--conditional", tr_conditional, "train the concept-conditioned model");
    train_cmd->add_flag("--shuffled-concepts", tr_shuffled, "shuffle concept ids (control run)");
    train_cmd->add_option("--seeds", tr_seeds, "number of seeds (0..N-1)");
    train_cmd->add_option("--seed", tr_seed, "fold seed");
    train_cmd->add_option("--config", tr_config, "model config JSON");
    train_cmd->add_option("--run-dir", tr_run_dir, "checkpoint output directory");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "run significance analyses over scored records");
    std::string an_records, an_tokens, an_lexicon, an_alphabet, an_granularity = "overall", an_out;
    long an_nperm = 100000;
    double an_q = 0.01;
    std::size_t an_min_joint = 1000;
    std::uint64_t an_seed = 0;
    analyze->add_option("--records", an_records, "pmi_records.csv");
    analyze->add_option("--token-records", an_tokens, "token_pmi_records.csv");
    analyze->add_option("--lexicon", an_lexicon, "normalized lexicon TSV (for metadata joins)")->required();
    analyze->add_option("--alphabet", an_alphabet, "alphabet sidecar")->required();
    analyze->add_option("--granularity", an_granularity, "overall, concept, language or pair");
    analyze->add_option("--n-perm", an_nperm, "permutations per test");
    analyze->add_option("--q", an_q, "BH false discovery rate");
    analyze->add_option("--min-joint", an_min_joint, "minimum joint count for concept-token pairs");
    analyze->add_option("--seed", an_seed, "permutation RNG seed");
    analyze->add_option("--out", an_out, "output CSV (stdout if omitted)");

    // hyperopt
    auto* hyper = app.add_subcommand("hyperopt", "Bayesian optimization of model hyperparameters");
    std::string hy_input, hy_alphabet, hy_history, hy_exclude = "pidgin_creole,constructed";
    std::string hy_scheme = "macroarea";
    bool hy_drop_loans = false, hy_conditional = false;
    std::uint64_t hy_seed = 0;
    int hy_fold = 0, hy_budget = 20, hy_seeds_per_config = 1;
    hyper->add_option("--input", hy_input, "wordlist TSV")->required();
    hyper->add_option("--alphabet", hy_alphabet, "alphabet sidecar")->required();
    hyper->add_flag("--drop-loans", hy_drop_loans, "drop entries marked as loans");
    hyper->add_option("--exclude-flags", hy_exclude, "comma-joined status flags to exclude");
    hyper->add_option("--fold-scheme", hy_scheme, "macroarea or family");
    hyper->add_option("--fold-index", hy_fold, "fold to optimize on");
    hyper->add_flag("--conditional", hy_conditional, "optimize the conditional model");
    hyper->add_option("--budget", hy_budget, "number of trials");
    hyper->add_option("--seeds-per-config", hy_seeds_per_config, "models trained per configuration");
    hyper->add_option("--seed", hy_seed, "master seed");
    hyper->add_option("--history", hy_history, "JSONL trial log (enables resume)");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "run the full reproduction pipeline");
    std::string pl_config, pl_input, pl_alphabet, pl_run_dir, pl_scheme, pl_mode;
    int pl_seeds = -1;
    long pl_nperm = -1;
    std::uint64_t pl_seed = 0;
    bool pl_seed_set = false;
    pipe->add_option("--config", pl_config, "run config JSON");
    pipe->add_option("--input", pl_input, "override: wordlist TSV");
    pipe->add_option("--alphabet", pl_alphabet, "override: alphabet sidecar");
    pipe->add_option("--run-dir", pl_run_dir, "override: run directory");
    pipe->add_option("--fold-scheme", pl_scheme, "override: macroarea or family");
    pipe->add_option("--seeds", pl_seeds, "override: seeds per fold");
    pipe->add_option("--n-perm", pl_nperm, "override: permutations per test");
    pipe->add_option("--ensemble-mode", pl_mode, "override: mean or best");
    auto* seed_opt = pipe->add_option("--seed", pl_seed, "override: master seed");
    pipe->callback([&]() { pl_seed_set = seed_opt->count() > 0; });

    // report
    auto* report = app.add_subcommand("report", "verify a run directory and print its summary");
    std::string rp_run_dir;
    report->add_option("--run-dir", rp_run_dir, "run directory")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "Welch's t-test between two runs' per-seed MI estimates");
    std::string cm_a, cm_b;
    compare->add_option("--run-a", cm_a, "first run directory (alternative: larger MI)")->required();
    compare->add_option("--run-b", cm_b, "second run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*ingest) {
            return run_ingest(in_input, in_alphabet, in_drop_loans, in_exclude, in_scheme, in_seed, in_out_dir);
        }
        if (*synth) {
            return run_synth(sy_spec, sy_seed, sy_out, sy_alpha_out);
        }
        if (*train_cmd) {
            return run_train(tr_input, tr_alphabet, tr_drop_loans, tr_exclude, tr_scheme, tr_seed, tr_fold, tr_conditional,
                             tr_seeds, tr_config, tr_run_dir, tr_shuffled, workers);
        }
        if (*analyze) {
            return run_analyze(an_records, an_tokens, an_lexicon, an_alphabet, an_granularity, an_nperm, an_q, an_min_joint,
                               an_seed, an_out, workers > 0 ? workers : default_workers());
        }
        if (*hyper) {
            return run_hyperopt(hy_input, hy_alphabet, hy_drop_loans, hy_exclude, hy_scheme, hy_seed, hy_fold, hy_conditional,
                                hy_budget, hy_seeds_per_config, hy_history, workers);
        }
        if (*pipe) {
            RunConfig cfg;
            if (!pl_config.empty()) cfg = load_run_config(pl_config);
            if (!pl_input.empty()) cfg.input_tsv = pl_input;
            if (!pl_alphabet.empty()) cfg.alphabet_path = pl_alphabet;
            if (!pl_run_dir.empty()) cfg.run_dir = pl_run_dir;
            if (!pl_scheme.empty()) cfg.fold_scheme = pl_scheme;
            if (pl_seeds > 0) cfg.n_seeds = pl_seeds;
            if (pl_nperm > 0) cfg.n_permutations = pl_nperm;
            if (!pl_mode.empty()) cfg.ensemble_mode = pl_mode;
            if (pl_seed_set) cfg.seed = pl_seed;
            if (workers > 0) cfg.workers = workers;
            const PipelineResult result = run_pipeline(cfg);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << render_report(cfg.run_dir);
            return kExitOk;
        }
        if (*report) {
            std::cout << render_report(rp_run_dir);
            return kExitOk;
        }
        if (*compare) {
            auto load_mis = [](const std::string& run_dir) {
                std::ifstream in(fs::path(run_dir) / "table1.json");
                if (!in) throw data_error("missing table1.json in " + run_dir);
                nlohmann::json j;
                in >> j;
                return table1_from_json(j).average.mi_per_seed;
            };
            const auto a = load_mis(cm_a);
            const auto b = load_mis(cm_b);
            const WelchResult w = welch_t_test(a, b);
            std::cout << "run A mean MI: " << format_double([&] {
                double s = 0;
                for (double v : a) s += v;
                return s / a.size();
            }()) << " (" << a.size() << " fold-seed estimates)\n"
                      << "run B mean MI: " << format_double([&] {
                double s = 0;
                for (double v : b) s += v;
                return s / b.size();
            }()) << " (" << b.size() << " fold-seed estimates)\n"
                      << "Welch t = " << format_double(w.t) << ", df = " << format_double(w.df)
                      << ", one-sided p (A > B) = " << format_double(w.p_one_sided) << "\n";
            return kExitOk;
        }
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
