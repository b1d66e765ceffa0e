#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "formmi/csv.hpp"
#include "formmi/errors.hpp"
#include "formmi/estimators.hpp"
#include "formmi/parallel.hpp"
#include "formmi/rng.hpp"

namespace formmi {

// ---------------------------------------------------------------------------
// Student-t tail via the regularized incomplete beta function (Lentz's
// continued fraction), needed for Welch's test with fractional df.

namespace detail_stats {

inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw numeric_error("incomplete beta did not converge");
}

}  // namespace detail_stats

inline double reg_incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw numeric_error("incomplete beta: x out of [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(ln_front) * detail_stats::betacf(a, b, x) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) + b * std::log1p(-x) + a * std::log(x)) *
                     detail_stats::betacf(b, a, 1.0 - x) / b;
}

// P(T > t) for Student's t with nu degrees of freedom.
inline double student_t_sf(double t, double nu) {
    const double x = nu / (nu + t * t);
    const double half_tail = 0.5 * reg_incomplete_beta(0.5 * nu, 0.5, x);
    return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p_one_sided = 1.0;  // alternative: mean(a) > mean(b)
};

inline WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw data_error("welch_t_test: each sample needs at least 2 values");
    auto mean_var = [](const std::vector<double>& v) {
        const double n = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= (n - 1.0);
        return std::pair<double, double>(mean, var);
    };
    const auto [ma, va] = mean_var(a);
    const auto [mb, vb] = mean_var(b);
    if (va <= 0.0 || vb <= 0.0) throw numeric_error("welch_t_test: degenerate (zero) variance");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double sa = va / na, sb = vb / nb;
    WelchResult r;
    r.t = (ma - mb) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    r.p_one_sided = student_t_sf(r.t, r.df);
    return r;
}

// ---------------------------------------------------------------------------
// Sign-flip permutation tests (one-sided, add-one estimator).

struct PermutationResult {
    double observed_mean = 0.0;
    long n_permutations = 0;
    double p_value = 1.0;
    std::size_t unit_count = 0;
};

inline PermutationResult sign_flip_test(const std::vector<double>& values, long n_perm, Rng& rng) {
    if (values.empty()) throw data_error("sign_flip_test: no values");
    if (n_perm < 1) throw config_error("sign_flip_test: n_perm must be >= 1");
    const double n = static_cast<double>(values.size());
    double observed = 0.0;
    for (double v : values) observed += v;
    observed /= n;
    long count = 0;
    for (long k = 0; k < n_perm; ++k) {
        double sum = 0.0;
        for (double v : values) sum += rng.coin() ? v : -v;
        if (sum / n >= observed) ++count;
    }
    PermutationResult r;
    r.observed_mean = observed;
    r.n_permutations = n_perm;
    r.p_value = static_cast<double>(1 + count) / static_cast<double>(n_perm + 1);
    r.unit_count = values.size();
    return r;
}

// Word-level signs are flipped independently and re-aggregated through the
// full words -> languages -> families -> macroareas hierarchy per permutation.
inline PermutationResult hierarchical_sign_flip_test(const std::vector<PmiRecord>& records, long n_perm, Rng& rng) {
    if (records.empty()) throw data_error("hierarchical_sign_flip_test: no records");
    if (n_perm < 1) throw config_error("n_perm must be >= 1");

    // index the hierarchy once
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<std::size_t>>>> tree;
    for (std::size_t i = 0; i < records.size(); ++i) {
        tree[records[i].macroarea][records[i].family][records[i].language].push_back(i);
    }
    struct LangSlot {
        std::vector<std::size_t> word_idx;
        int family = 0;
    };
    std::vector<LangSlot> langs;
    std::vector<int> family_area;
    const int n_areas = static_cast<int>(tree.size());
    int area_id = 0;
    for (const auto& [area_name, families] : tree) {
        for (const auto& [family_name, languages] : families) {
            const int fam_id = static_cast<int>(family_area.size());
            family_area.push_back(area_id);
            for (const auto& [lang_name, idx] : languages) {
                LangSlot slot;
                slot.word_idx = idx;
                slot.family = fam_id;
                langs.push_back(std::move(slot));
            }
        }
        ++area_id;
    }
    const int n_fams = static_cast<int>(family_area.size());
    std::vector<int> fam_lang_count(static_cast<std::size_t>(n_fams), 0);
    for (const auto& l : langs) ++fam_lang_count[static_cast<std::size_t>(l.family)];
    std::vector<int> area_fam_count(static_cast<std::size_t>(n_areas), 0);
    for (int f : family_area) ++area_fam_count[static_cast<std::size_t>(f)];

    std::vector<double> values(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) values[i] = records[i].pmi;

    std::vector<double> fam_sum(static_cast<std::size_t>(n_fams));
    std::vector<double> area_sum(static_cast<std::size_t>(n_areas));
    std::vector<char> flip(records.size());

    // flip[i] true keeps the sign, matching sign_flip_test's coin convention
    auto aggregate = [&](bool flipped) {
        std::fill(fam_sum.begin(), fam_sum.end(), 0.0);
        std::fill(area_sum.begin(), area_sum.end(), 0.0);
        for (const auto& slot : langs) {
            double s = 0.0;
            for (std::size_t i : slot.word_idx) s += flipped && !flip[i] ? -values[i] : values[i];
            fam_sum[static_cast<std::size_t>(slot.family)] += s / static_cast<double>(slot.word_idx.size());
        }
        for (int f = 0; f < n_fams; ++f) {
            area_sum[static_cast<std::size_t>(family_area[static_cast<std::size_t>(f)])] +=
                fam_sum[static_cast<std::size_t>(f)] / fam_lang_count[static_cast<std::size_t>(f)];
        }
        double total = 0.0;
        for (int a = 0; a < n_areas; ++a) total += area_sum[static_cast<std::size_t>(a)] / area_fam_count[static_cast<std::size_t>(a)];
        return total / static_cast<double>(n_areas);
    };

    const double observed = aggregate(false);
    long count = 0;
    for (long k = 0; k < n_perm; ++k) {
        for (std::size_t i = 0; i < flip.size(); ++i) flip[i] = rng.coin() ? 1 : 0;
        if (aggregate(true) >= observed) ++count;
    }
    PermutationResult r;
    r.observed_mean = observed;
    r.n_permutations = n_perm;
    r.p_value = static_cast<double>(1 + count) / static_cast<double>(n_perm + 1);
    r.unit_count = records.size();
    return r;
}

// ---------------------------------------------------------------------------
// Benjamini-Hochberg step-up FDR control.

struct BhResult {
    std::vector<bool> rejected;
    std::vector<double> adjusted;
};

inline BhResult benjamini_hochberg(const std::vector<double>& pvalues, double q) {
    if (!(q > 0.0 && q < 1.0)) throw config_error("benjamini_hochberg: q must be in (0,1)");
    const std::size_t m = pvalues.size();
    BhResult res;
    res.rejected.assign(m, false);
    res.adjusted.assign(m, 1.0);
    if (m == 0) return res;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
    double running = 1.0;
    for (std::size_t k = m; k > 0; --k) {
        const std::size_t idx = order[k - 1];
        const double adj = pvalues[idx] * static_cast<double>(m) / static_cast<double>(k);
        running = std::min(running, adj);
        res.adjusted[idx] = running;
    }
    for (std::size_t i = 0; i < m; ++i) res.rejected[i] = res.adjusted[i] <= q;
    return res;
}

// ---------------------------------------------------------------------------
// Report-producing analyses.

enum class Granularity { Overall, Concept, Language, ConceptToken };

inline const char* granularity_name(Granularity g) {
    switch (g) {
        case Granularity::Overall: return "overall";
        case Granularity::Concept: return "concept";
        case Granularity::Language: return "language";
        case Granularity::ConceptToken: return "concept_token";
    }
    return "?";
}

struct ReportRow {
    std::string key;
    double statistic = std::numeric_limits<double>::quiet_NaN();  // MI or mean PMI
    double u = std::numeric_limits<double>::quiet_NaN();
    double mean_len = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
    double p = std::numeric_limits<double>::quiet_NaN();
    double adj_p = std::numeric_limits<double>::quiet_NaN();
    bool significant = false;
    double latitude = std::numeric_limits<double>::quiet_NaN();
    double longitude = std::numeric_limits<double>::quiet_NaN();
};

struct AnalysisReport {
    Granularity granularity = Granularity::Overall;
    double q = 0.01;
    std::vector<ReportRow> rows;
};

// One hierarchical sign-flip test per concept set S_c, BH across concepts.
inline AnalysisReport per_concept_analysis(const std::vector<PmiRecord>& records, const std::vector<std::string>& concept_names,
                                           long n_perm, double q, std::uint64_t seed, int workers = 1) {
    std::map<int, std::vector<PmiRecord>> by_concept;
    for (const auto& r : records) by_concept[r.concept_id].push_back(r);

    AnalysisReport report;
    report.granularity = Granularity::Concept;
    report.q = q;
    report.rows.resize(concept_names.size());

    parallel_for(static_cast<int>(concept_names.size()), workers, [&](int c) {
        ReportRow row;
        row.key = concept_names[static_cast<std::size_t>(c)];
        auto it = by_concept.find(c);
        if (it != by_concept.end() && !it->second.empty()) {
            const auto& recs = it->second;
            Rng rng(derive_seed(seed, "concept:" + row.key));
            const PermutationResult res = hierarchical_sign_flip_test(recs, n_perm, rng);
            row.statistic = res.observed_mean;
            row.p = res.p_value;
            row.n = recs.size();
            const EntropyEstimate hw = hierarchical_mean(recs, [](const PmiRecord& r) { return r.word_xent_uncond; });
            if (hw.value > 0.0) row.u = res.observed_mean / hw.value;
            double len_sum = 0.0;
            for (const auto& r : recs) len_sum += r.phone_count - 1;
            row.mean_len = len_sum / static_cast<double>(recs.size());
        }
        report.rows[static_cast<std::size_t>(c)] = std::move(row);
    });

    std::vector<double> ps;
    std::vector<std::size_t> ps_rows;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        if (!std::isnan(report.rows[i].p)) {
            ps.push_back(report.rows[i].p);
            ps_rows.push_back(i);
        }
    }
    const BhResult bh = benjamini_hochberg(ps, q);
    for (std::size_t k = 0; k < ps_rows.size(); ++k) {
        report.rows[ps_rows[k]].adj_p = bh.adjusted[k];
        report.rows[ps_rows[k]].significant = bh.rejected[k];
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.key < b.key; });
    return report;
}

// Per-language test: the statistic is the plain mean word PMI of the
// language's records (word -> language aggregation only).
inline AnalysisReport per_language_analysis(const std::vector<PmiRecord>& records, long n_perm, double q, std::uint64_t seed,
                                            const MetaIndex* meta = nullptr, int workers = 1) {
    std::map<std::string, std::vector<const PmiRecord*>> by_language;
    for (const auto& r : records) by_language[r.language].push_back(&r);

    AnalysisReport report;
    report.granularity = Granularity::Language;
    report.q = q;
    report.rows.resize(by_language.size());
    std::vector<const std::pair<const std::string, std::vector<const PmiRecord*>>*> groups;
    groups.reserve(by_language.size());
    for (const auto& g : by_language) groups.push_back(&g);

    parallel_for(static_cast<int>(groups.size()), workers, [&](int gi) {
        const auto& [lang, recs] = *groups[static_cast<std::size_t>(gi)];
        ReportRow row;
        row.key = lang;
        std::vector<double> pmis;
        double xent_sum = 0.0;
        pmis.reserve(recs.size());
        for (const PmiRecord* r : recs) {
            pmis.push_back(r->pmi);
            xent_sum += r->word_xent_uncond;
        }
        Rng rng(derive_seed(seed, "language:" + lang));
        const PermutationResult res = sign_flip_test(pmis, n_perm, rng);
        row.statistic = res.observed_mean;
        row.p = res.p_value;
        row.n = recs.size();
        const double mean_xent = xent_sum / static_cast<double>(recs.size());
        if (mean_xent > 0.0) row.u = res.observed_mean / mean_xent;
        report.rows[static_cast<std::size_t>(gi)] = std::move(row);
    });

    std::vector<double> ps;
    for (const auto& row : report.rows) ps.push_back(row.p);
    const BhResult bh = benjamini_hochberg(ps, q);
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        report.rows[i].adj_p = bh.adjusted[i];
        report.rows[i].significant = bh.rejected[i];
    }

    if (meta) {
        std::unordered_map<std::string, std::pair<double, double>> coord_sum;
        std::unordered_map<std::string, int> coord_n;
        for (const auto& [doc_id, m] : *meta) {
            (void)doc_id;
            coord_sum[m.language].first += m.latitude;
            coord_sum[m.language].second += m.longitude;
            ++coord_n[m.language];
        }
        for (auto& row : report.rows) {
            auto it = coord_sum.find(row.key);
            if (it != coord_sum.end()) {
                row.latitude = it->second.first / coord_n[row.key];
                row.longitude = it->second.second / coord_n[row.key];
            }
        }
    }
    // groups map is sorted, rows already in key order
    return report;
}

struct PairSummary {
    std::string concept_name;
    std::string symbol;
    std::size_t n_joint = 0;
    // indexed by macroarea order Africa, Americas, Eurasia, Pacific
    std::array<double, 4> p{{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()}};
    std::array<double, 4> adj_p{{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                                 std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()}};
    std::array<bool, 4> significant{{false, false, false, false}};
    bool all_significant = false;
};

struct ConceptTokenReport {
    AnalysisReport tuples;  // one row per (concept, symbol, macroarea)
    std::vector<PairSummary> pairs;
    double q = 0.01;
};

// Pairs seen at least min_joint times are tested separately in each
// macroarea; BH runs over the whole family of (concept, symbol, area) tests.
inline ConceptTokenReport concept_token_analysis(const std::vector<TokenPmiRecord>& records,
                                                 const std::vector<std::string>& concept_names, std::size_t min_joint,
                                                 long n_perm, double q, std::uint64_t seed, int workers = 1) {
    std::map<std::pair<int, std::string>, std::vector<const TokenPmiRecord*>> by_pair;
    for (const auto& r : records) by_pair[{r.concept_id, r.symbol}].push_back(&r);

    struct Cell {
        std::string concept_name;
        std::string symbol;
        int area = 0;
        std::size_t pair_idx = 0;
        std::vector<PmiRecord> recs;  // reuse the hierarchical test's record type
    };
    std::vector<Cell> cells;
    ConceptTokenReport out;
    out.q = q;
    out.tuples.granularity = Granularity::ConceptToken;
    out.tuples.q = q;

    for (const auto& [key, recs] : by_pair) {
        if (recs.size() < min_joint) continue;
        PairSummary summary;
        summary.concept_name = concept_names[static_cast<std::size_t>(key.first)];
        summary.symbol = key.second;
        summary.n_joint = recs.size();
        const std::size_t pair_idx = out.pairs.size();
        for (int a = 0; a < kNumMacroareas; ++a) {
            Cell cell;
            cell.concept_name = summary.concept_name;
            cell.symbol = summary.symbol;
            cell.area = a;
            cell.pair_idx = pair_idx;
            const std::string area_name = macroarea_name(static_cast<Macroarea>(a));
            for (const TokenPmiRecord* r : recs) {
                if (r->macroarea != area_name) continue;
                PmiRecord pr;
                pr.doculect_id = r->doculect_id;
                pr.language = r->language;
                pr.family = r->family;
                pr.macroarea = r->macroarea;
                pr.concept_id = r->concept_id;
                pr.pmi = r->pmi_token;
                cell.recs.push_back(std::move(pr));
            }
            if (!cell.recs.empty()) cells.push_back(std::move(cell));
        }
        out.pairs.push_back(std::move(summary));
    }

    std::vector<PermutationResult> results(cells.size());
    parallel_for(static_cast<int>(cells.size()), workers, [&](int i) {
        const Cell& cell = cells[static_cast<std::size_t>(i)];
        Rng rng(derive_seed(seed, "pair:" + cell.concept_name + "|" + cell.symbol + "|" +
                                      macroarea_name(static_cast<Macroarea>(cell.area))));
        results[static_cast<std::size_t>(i)] = hierarchical_sign_flip_test(cell.recs, n_perm, rng);
    });

    std::vector<double> ps(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) ps[i] = results[i].p_value;
    const BhResult bh = benjamini_hochberg(ps, q);

    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Cell& cell = cells[i];
        PairSummary& summary = out.pairs[cell.pair_idx];
        summary.p[static_cast<std::size_t>(cell.area)] = results[i].p_value;
        summary.adj_p[static_cast<std::size_t>(cell.area)] = bh.adjusted[i];
        summary.significant[static_cast<std::size_t>(cell.area)] = bh.rejected[i];

        ReportRow row;
        row.key = cell.concept_name + "|" + cell.symbol + "|" + macroarea_name(static_cast<Macroarea>(cell.area));
        row.statistic = results[i].observed_mean;
        row.n = cell.recs.size();
        row.p = results[i].p_value;
        row.adj_p = bh.adjusted[i];
        row.significant = bh.rejected[i];
        out.tuples.rows.push_back(std::move(row));
    }
    for (auto& summary : out.pairs) {
        summary.all_significant = summary.significant[0] && summary.significant[1] && summary.significant[2] && summary.significant[3];
    }
    std::sort(out.tuples.rows.begin(), out.tuples.rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.key < b.key; });
    std::sort(out.pairs.begin(), out.pairs.end(), [](const PairSummary& a, const PairSummary& b) {
        return a.concept_name != b.concept_name ? a.concept_name < b.concept_name : a.symbol < b.symbol;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Report CSV emission.

inline void write_concept_report_csv(const AnalysisReport& report, std::ostream& os) {
    csv_write_row(os, {"concept", "U", "mean_len", "p", "adj_p", "significant"});
    for (const auto& r : report.rows) {
        csv_write_row(os, {r.key, format_double(r.u), format_double(r.mean_len), format_double(r.p), format_double(r.adj_p),
                           std::isnan(r.p) ? "" : (r.significant ? "1" : "0")});
    }
}

inline void write_language_report_csv(const AnalysisReport& report, std::ostream& os) {
    csv_write_row(os, {"language", "mean_pmi", "U", "p", "adj_p", "significant", "latitude", "longitude"});
    for (const auto& r : report.rows) {
        csv_write_row(os, {r.key, format_double(r.statistic), format_double(r.u), format_double(r.p), format_double(r.adj_p),
                           r.significant ? "1" : "0", format_double(r.latitude), format_double(r.longitude)});
    }
}

inline void write_pair_report_csv(const ConceptTokenReport& report, std::ostream& os) {
    csv_write_row(os, {"concept", "symbol", "n_joint", "p_africa", "p_americas", "p_eurasia", "p_pacific", "adj_p_africa",
                       "adj_p_americas", "adj_p_eurasia", "adj_p_pacific", "all_significant"});
    for (const auto& s : report.pairs) {
        csv_write_row(os, {s.concept_name, s.symbol, std::to_string(s.n_joint), format_double(s.p[0]), format_double(s.p[1]),
                           format_double(s.p[2]), format_double(s.p[3]), format_double(s.adj_p[0]), format_double(s.adj_p[1]),
                           format_double(s.adj_p[2]), format_double(s.adj_p[3]), s.all_significant ? "1" : "0"});
    }
}

}  // namespace formmi
