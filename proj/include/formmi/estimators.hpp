#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "formmi/csv.hpp"
#include "formmi/errors.hpp"
#include "formmi/lexicon.hpp"
#include "formmi/model.hpp"

namespace formmi {

// Doculect metadata needed when grouping or reporting scored records.
struct DoculectMeta {
    std::string language;  // ISO code when present, else the doculect id
    std::string family;
    std::string macroarea;
    double latitude = 0.0;
    double longitude = 0.0;
};

using MetaIndex = std::unordered_map<std::string, DoculectMeta>;

inline MetaIndex build_meta_index(const Lexicon& lex) {
    MetaIndex meta;
    for (const auto& d : lex.doculects) {
        meta[d.doculect_id] = DoculectMeta{d.language_key(), d.family, macroarea_name(d.macroarea), d.latitude, d.longitude};
    }
    return meta;
}

// One held-out word's per-phone cross-entropies under both models.
// pmi is stored as exactly word_xent_uncond - word_xent_cond.
struct PmiRecord {
    std::string doculect_id;
    std::string language;
    std::string family;
    std::string macroarea;
    int concept_id = -1;
    double word_xent_uncond = 0.0;  // bits/phone
    double word_xent_cond = 0.0;    // bits/phone
    double pmi = 0.0;               // bits/phone
    int phone_count = 0;            // prediction steps, eos included
};

// One (word, position) record; pmi_token is in bits, not length-normalized.
struct TokenPmiRecord {
    std::string doculect_id;
    std::string language;
    std::string family;
    std::string macroarea;
    int concept_id = -1;
    int position = 0;
    std::string symbol;  // alphabet symbol or "<eos>"
    double pmi_token = 0.0;
};

struct EntropyEstimate {
    double value = std::numeric_limits<double>::quiet_NaN();  // bits/phone
    std::map<std::string, double> per_macroarea;
    std::map<std::string, double> per_family;     // key: area/family
    std::map<std::string, double> per_language;   // key: area/family/language
    std::size_t n_words = 0;
};

// Words average within a language, languages within a family, families
// within a macroarea, macroareas into the final value.
template <typename Record, typename Selector>
inline EntropyEstimate hierarchical_mean(const std::vector<Record>& records, Selector&& value_of) {
    EntropyEstimate est;
    est.n_words = records.size();
    if (records.empty()) return est;

    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
    };
    std::map<std::string, std::map<std::string, std::map<std::string, Acc>>> tree;  // area -> family -> language
    for (const auto& r : records) {
        Acc& a = tree[r.macroarea][r.family][r.language];
        a.sum += value_of(r);
        ++a.n;
    }
    double area_sum = 0.0;
    for (const auto& [area, families] : tree) {
        double family_sum = 0.0;
        for (const auto& [family, languages] : families) {
            double lang_sum = 0.0;
            for (const auto& [lang, acc] : languages) {
                const double lang_mean = acc.sum / static_cast<double>(acc.n);
                est.per_language[area + "/" + family + "/" + lang] = lang_mean;
                lang_sum += lang_mean;
            }
            const double family_mean = lang_sum / static_cast<double>(languages.size());
            est.per_family[area + "/" + family] = family_mean;
            family_sum += family_mean;
        }
        const double area_mean = family_sum / static_cast<double>(families.size());
        est.per_macroarea[area] = area_mean;
        area_sum += area_mean;
    }
    est.value = area_sum / static_cast<double>(tree.size());
    return est;
}

namespace detail_est {

inline void check_model_compatibility(const TrainedModel& uncond, const TrainedModel& cond, const Lexicon& lex) {
    if (uncond.alphabet_hash != lex.alphabet.hash() || cond.alphabet_hash != lex.alphabet.hash()) {
        throw data_error("alphabet hash mismatch between models and lexicon");
    }
    if (uncond.fold_id != cond.fold_id || uncond.fold_scheme != cond.fold_scheme) {
        throw data_error("models come from different folds (" + uncond.fold_scheme + "/" + std::to_string(uncond.fold_id) +
                         " vs " + cond.fold_scheme + "/" + std::to_string(cond.fold_id) + ")");
    }
}

struct HeldoutWord {
    TrainingWord word;
    const DoculectMeta* meta;
};

inline std::vector<HeldoutWord> heldout_words(const Lexicon& lex, const std::vector<std::string>& doculect_ids,
                                              const MetaIndex& meta) {
    std::unordered_map<std::string, const Doculect*> by_id;
    for (const auto& d : lex.doculects) by_id[d.doculect_id] = &d;
    std::vector<HeldoutWord> out;
    for (const auto& id : doculect_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw data_error("held-out doculect '" + id + "' not in lexicon");
        for (const auto& e : it->second->entries) {
            out.push_back(HeldoutWord{make_training_word(e, lex.alphabet.eos(), 1.0, id), &meta.at(id)});
        }
    }
    return out;
}

}  // namespace detail_est

inline std::vector<PmiRecord> score_heldout(const TrainedModel& uncond, const TrainedModel& cond, const Lexicon& lex,
                                            const std::vector<std::string>& heldout_ids) {
    detail_est::check_model_compatibility(uncond, cond, lex);
    const MetaIndex meta = build_meta_index(lex);
    std::vector<PmiRecord> records;
    for (const auto& hw : detail_est::heldout_words(lex, heldout_ids, meta)) {
        const auto su = word_step_log2probs(uncond.params, hw.word, uncond.params.conditional());
        const auto sc = word_step_log2probs(cond.params, hw.word, cond.params.conditional());
        double lu = 0.0, lc = 0.0;
        for (double v : su) lu += v;
        for (double v : sc) lc += v;
        const int steps = hw.word.steps();
        PmiRecord r;
        r.doculect_id = hw.word.doculect_id;
        r.language = hw.meta->language;
        r.family = hw.meta->family;
        r.macroarea = hw.meta->macroarea;
        r.concept_id = hw.word.concept_id;
        r.word_xent_uncond = -lu / steps;
        r.word_xent_cond = -lc / steps;
        r.pmi = r.word_xent_uncond - r.word_xent_cond;
        r.phone_count = steps;
        if (!std::isfinite(r.word_xent_uncond) || !std::isfinite(r.word_xent_cond)) {
            throw numeric_error("non-finite word cross-entropy for doculect " + r.doculect_id);
        }
        records.push_back(std::move(r));
    }
    return records;
}

inline std::vector<TokenPmiRecord> score_tokens(const TrainedModel& uncond, const TrainedModel& cond, const Lexicon& lex,
                                                const std::vector<std::string>& heldout_ids) {
    detail_est::check_model_compatibility(uncond, cond, lex);
    const MetaIndex meta = build_meta_index(lex);
    std::vector<TokenPmiRecord> records;
    for (const auto& hw : detail_est::heldout_words(lex, heldout_ids, meta)) {
        const auto su = word_step_log2probs(uncond.params, hw.word, uncond.params.conditional());
        const auto sc = word_step_log2probs(cond.params, hw.word, cond.params.conditional());
        for (std::size_t t = 0; t < su.size(); ++t) {
            TokenPmiRecord r;
            r.doculect_id = hw.word.doculect_id;
            r.language = hw.meta->language;
            r.family = hw.meta->family;
            r.macroarea = hw.meta->macroarea;
            r.concept_id = hw.word.concept_id;
            r.position = static_cast<int>(t);
            const int sym = hw.word.targets[t];
            r.symbol = sym == lex.alphabet.eos() ? "<eos>" : lex.alphabet.symbol(sym);
            r.pmi_token = sc[t] - su[t];
            records.push_back(std::move(r));
        }
    }
    return records;
}

inline EntropyEstimate estimate_entropy(const TrainedModel& model, const Lexicon& lex,
                                        const std::vector<std::string>& heldout_ids, bool use_concept = false) {
    if (model.alphabet_hash != lex.alphabet.hash()) throw data_error("alphabet hash mismatch");
    const MetaIndex meta = build_meta_index(lex);
    struct Val {
        std::string language, family, macroarea;
        double xent;
    };
    std::vector<Val> values;
    for (const auto& hw : detail_est::heldout_words(lex, heldout_ids, meta)) {
        const auto steps = word_step_log2probs(model.params, hw.word, use_concept && model.params.conditional());
        double total = 0.0;
        for (double v : steps) total += v;
        values.push_back(Val{hw.meta->language, hw.meta->family, hw.meta->macroarea, -total / hw.word.steps()});
    }
    return hierarchical_mean(values, [](const Val& v) { return v.xent; });
}

// MI = H(W) - H(W|V), the difference of the two cross-entropy upper bounds.
// May legitimately be negative (it is an estimate, not the true MI).
inline double mutual_information(const EntropyEstimate& hw, const EntropyEstimate& hwv) {
    if (hw.n_words != hwv.n_words || hw.per_language.size() != hwv.per_language.size()) {
        throw data_error("mutual_information: estimates computed on different held-out sets");
    }
    for (auto it = hw.per_language.begin(), jt = hwv.per_language.begin(); it != hw.per_language.end(); ++it, ++jt) {
        if (it->first != jt->first) throw data_error("mutual_information: estimates use different hierarchies");
    }
    return hw.value - hwv.value;
}

inline double uncertainty_coefficient(double mi, double hw) {
    if (!(hw > 0.0)) throw numeric_error("uncertainty_coefficient: H(W) must be positive");
    return mi / hw;
}

inline void write_pmi_records_csv(const std::vector<PmiRecord>& records, std::ostream& os) {
    csv_write_row(os, {"doculect_id", "family", "macroarea", "concept_id", "word_xent_uncond", "word_xent_cond", "pmi",
                       "phone_count"});
    for (const auto& r : records) {
        csv_write_row(os, {r.doculect_id, r.family, r.macroarea, std::to_string(r.concept_id), format_double(r.word_xent_uncond),
                           format_double(r.word_xent_cond), format_double(r.pmi), std::to_string(r.phone_count)});
    }
}

inline std::vector<PmiRecord> read_pmi_records_csv(std::istream& is, const MetaIndex& meta) {
    std::vector<std::string> row;
    if (!csv_read_row(is, row)) throw data_error("pmi records csv: empty file");
    const std::vector<std::string> expected = {"doculect_id", "family", "macroarea", "concept_id", "word_xent_uncond",
                                               "word_xent_cond", "pmi", "phone_count"};
    if (row != expected) throw data_error("pmi records csv: unexpected header");
    std::vector<PmiRecord> out;
    while (csv_read_row(is, row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != expected.size()) throw data_error("pmi records csv: bad row");
        PmiRecord r;
        r.doculect_id = row[0];
        r.family = row[1];
        r.macroarea = row[2];
        r.concept_id = static_cast<int>(parse_long_field(row[3], "concept_id"));
        r.word_xent_uncond = parse_double_field(row[4], "word_xent_uncond");
        r.word_xent_cond = parse_double_field(row[5], "word_xent_cond");
        r.pmi = parse_double_field(row[6], "pmi");
        r.phone_count = static_cast<int>(parse_long_field(row[7], "phone_count"));
        auto it = meta.find(r.doculect_id);
        r.language = it != meta.end() ? it->second.language : r.doculect_id;
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_token_pmi_records_csv(const std::vector<TokenPmiRecord>& records, std::ostream& os) {
    csv_write_row(os, {"doculect_id", "family", "macroarea", "concept_id", "position", "symbol", "pmi_token"});
    for (const auto& r : records) {
        csv_write_row(os, {r.doculect_id, r.family, r.macroarea, std::to_string(r.concept_id), std::to_string(r.position),
                           r.symbol, format_double(r.pmi_token)});
    }
}

inline std::vector<TokenPmiRecord> read_token_pmi_records_csv(std::istream& is, const MetaIndex& meta) {
    std::vector<std::string> row;
    if (!csv_read_row(is, row)) throw data_error("token pmi records csv: empty file");
    const std::vector<std::string> expected = {"doculect_id", "family", "macroarea", "concept_id", "position", "symbol",
                                               "pmi_token"};
    if (row != expected) throw data_error("token pmi records csv: unexpected header");
    std::vector<TokenPmiRecord> out;
    while (csv_read_row(is, row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != expected.size()) throw data_error("token pmi records csv: bad row");
        TokenPmiRecord r;
        r.doculect_id = row[0];
        r.family = row[1];
        r.macroarea = row[2];
        r.concept_id = static_cast<int>(parse_long_field(row[3], "concept_id"));
        r.position = static_cast<int>(parse_long_field(row[4], "position"));
        r.symbol = row[5];
        r.pmi_token = parse_double_field(row[6], "pmi_token");
        auto it = meta.find(r.doculect_id);
        r.language = it != meta.end() ? it->second.language : r.doculect_id;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace formmi
