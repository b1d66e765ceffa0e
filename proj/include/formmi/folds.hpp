#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "formmi/errors.hpp"
#include "formmi/lexicon.hpp"
#include "formmi/rng.hpp"

namespace formmi {

enum class FoldScheme { Macroarea, Family };

inline const char* fold_scheme_name(FoldScheme s) { return s == FoldScheme::Macroarea ? "macroarea" : "family"; }

inline FoldScheme fold_scheme_from_name(const std::string& s) {
    if (s == "macroarea") return FoldScheme::Macroarea;
    if (s == "family") return FoldScheme::Family;
    throw config_error("unknown fold scheme '" + s + "' (expected macroarea or family)");
}

struct Fold {
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    std::vector<std::string> test_ids;
    // human-readable role labels, e.g. "Pacific+Americas" / "Eurasia" / "Africa"
    std::string train_label;
    std::string validation_label;
    std::string test_label;
};

struct FoldAssignment {
    FoldScheme scheme = FoldScheme::Macroarea;
    std::vector<Fold> folds;
};

namespace detail {

// Cross-validation rotation: train on two macroareas, validate on a third,
// test on the last, covering each area as test exactly once.
struct MacroareaFoldRow {
    std::array<Macroarea, 2> train;
    Macroarea validation;
    Macroarea test;
};

inline const std::array<MacroareaFoldRow, 4>& macroarea_fold_rows() {
    static const std::array<MacroareaFoldRow, 4> rows = {{
        {{Macroarea::Pacific, Macroarea::Americas}, Macroarea::Eurasia, Macroarea::Africa},
        {{Macroarea::Eurasia, Macroarea::Africa}, Macroarea::Pacific, Macroarea::Americas},
        {{Macroarea::Africa, Macroarea::Pacific}, Macroarea::Americas, Macroarea::Eurasia},
        {{Macroarea::Americas, Macroarea::Eurasia}, Macroarea::Africa, Macroarea::Pacific},
    }};
    return rows;
}

}  // namespace detail

// scheme=macroarea requires reassign_families_to_macroareas to have run, so
// that no family spans two macroareas.
inline FoldAssignment make_folds(const Lexicon& lex, FoldScheme scheme, std::uint64_t seed) {
    FoldAssignment out;
    out.scheme = scheme;

    if (scheme == FoldScheme::Macroarea) {
        std::map<std::string, Macroarea> family_area;
        for (const auto& d : lex.doculects) {
            auto [it, inserted] = family_area.emplace(d.family, d.macroarea);
            if (!inserted && it->second != d.macroarea) {
                throw data_error("family '" + d.family + "' spans macroareas; run reassign_families_to_macroareas first");
            }
        }
        std::array<std::vector<std::string>, kNumMacroareas> by_area;
        for (const auto& d : lex.doculects) by_area[static_cast<std::size_t>(d.macroarea)].push_back(d.doculect_id);
        for (int a = 0; a < kNumMacroareas; ++a) {
            if (by_area[static_cast<std::size_t>(a)].empty()) {
                throw data_error(std::string("macroarea ") + macroarea_name(static_cast<Macroarea>(a)) + " has no doculects");
            }
            std::sort(by_area[static_cast<std::size_t>(a)].begin(), by_area[static_cast<std::size_t>(a)].end());
        }
        for (const auto& row : detail::macroarea_fold_rows()) {
            Fold f;
            for (Macroarea a : row.train) {
                const auto& ids = by_area[static_cast<std::size_t>(a)];
                f.train_ids.insert(f.train_ids.end(), ids.begin(), ids.end());
            }
            std::sort(f.train_ids.begin(), f.train_ids.end());
            f.validation_ids = by_area[static_cast<std::size_t>(row.validation)];
            f.test_ids = by_area[static_cast<std::size_t>(row.test)];
            f.train_label = std::string(macroarea_name(row.train[0])) + "+" + macroarea_name(row.train[1]);
            f.validation_label = macroarea_name(row.validation);
            f.test_label = macroarea_name(row.test);
            out.folds.push_back(std::move(f));
        }
        return out;
    }

    // family scheme: shuffle families, then balance doculect counts greedily
    std::map<std::string, std::vector<std::string>> by_family;
    for (const auto& d : lex.doculects) by_family[d.family].push_back(d.doculect_id);
    std::vector<std::string> families;
    families.reserve(by_family.size());
    for (const auto& [fam, ids] : by_family) families.push_back(fam);
    if (families.size() < 4) throw data_error("family fold scheme needs at least 4 families, got " + std::to_string(families.size()));

    Rng rng(derive_seed(seed, "family_folds"));
    rng.shuffle(families);

    std::array<std::vector<std::string>, 4> groups;
    std::array<std::size_t, 4> group_sizes{0, 0, 0, 0};
    for (const auto& fam : families) {
        int smallest = 0;
        for (int g = 1; g < 4; ++g) {
            if (group_sizes[static_cast<std::size_t>(g)] < group_sizes[static_cast<std::size_t>(smallest)]) smallest = g;
        }
        auto& ids = by_family.at(fam);
        groups[static_cast<std::size_t>(smallest)].insert(groups[static_cast<std::size_t>(smallest)].end(), ids.begin(), ids.end());
        group_sizes[static_cast<std::size_t>(smallest)] += ids.size();
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());

    for (int i = 0; i < 4; ++i) {
        Fold f;
        int test_g = i;
        int val_g = (i + 1) % 4;
        f.test_ids = groups[static_cast<std::size_t>(test_g)];
        f.validation_ids = groups[static_cast<std::size_t>(val_g)];
        for (int g = 0; g < 4; ++g) {
            if (g == test_g || g == val_g) continue;
            f.train_ids.insert(f.train_ids.end(), groups[static_cast<std::size_t>(g)].begin(), groups[static_cast<std::size_t>(g)].end());
        }
        std::sort(f.train_ids.begin(), f.train_ids.end());
        f.train_label = "groups";
        f.validation_label = "group " + std::to_string(val_g);
        f.test_label = "group " + std::to_string(test_g);
        out.folds.push_back(std::move(f));
    }
    return out;
}

// weight(d) = 1 / (doculects of d's family inside the train set); the weights
// of one family sum to 1 per fold.
inline std::unordered_map<std::string, double> family_weights(const Lexicon& lex, const std::vector<std::string>& train_ids) {
    std::unordered_map<std::string, const Doculect*> by_id;
    for (const auto& d : lex.doculects) by_id[d.doculect_id] = &d;
    std::unordered_map<std::string, int> family_size;
    for (const auto& id : train_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw data_error("family_weights: unknown doculect id '" + id + "'");
        ++family_size[it->second->family];
    }
    std::unordered_map<std::string, double> weights;
    weights.reserve(train_ids.size());
    for (const auto& id : train_ids) {
        weights[id] = 1.0 / family_size.at(by_id.at(id)->family);
    }
    return weights;
}

}  // namespace formmi
