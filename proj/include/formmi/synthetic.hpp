#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "formmi/errors.hpp"
#include "formmi/lexicon.hpp"
#include "formmi/matrix.hpp"
#include "formmi/rng.hpp"

namespace formmi {

// First-order Markov word source: initial distribution over symbols, then
// per-symbol transitions to the next symbol or eos. Words are never empty.
struct MarkovChain {
    std::vector<double> init;  // size A
    Matrix trans;              // A x (A+1), last column = eos

    int alphabet_size() const { return static_cast<int>(init.size()); }

    void validate() const {
        const int a = alphabet_size();
        if (a == 0 || trans.rows != a || trans.cols != a + 1) throw data_error("markov chain: inconsistent shapes");
        double s = 0.0;
        for (double v : init) {
            if (v < 0.0) throw data_error("markov chain: negative init probability");
            s += v;
        }
        if (std::fabs(s - 1.0) > 1e-9) throw data_error("markov chain: init does not sum to 1");
        for (int r = 0; r < a; ++r) {
            double rs = 0.0;
            for (int c = 0; c <= a; ++c) {
                if (trans(r, c) < 0.0) throw data_error("markov chain: negative transition probability");
                rs += trans(r, c);
            }
            if (std::fabs(rs - 1.0) > 1e-9) throw data_error("markov chain: row " + std::to_string(r) + " does not sum to 1");
        }
    }
};

struct ChainStatistics {
    double expected_phones = 0.0;       // eos step not counted
    std::vector<double> symbol_visits;  // expected visits per word, per symbol
    double tail_mass = 0.0;             // probability mass still alive at the iteration cap
};

// Exact by forward mass propagation; terminating chains converge quickly.
inline ChainStatistics chain_statistics(const MarkovChain& chain, int max_steps = 100000) {
    const int a = chain.alphabet_size();
    ChainStatistics st;
    st.symbol_visits.assign(static_cast<std::size_t>(a), 0.0);
    std::vector<double> mass = chain.init;
    double alive = 1.0;
    for (int step = 0; step < max_steps && alive > 1e-15; ++step) {
        std::vector<double> next(static_cast<std::size_t>(a), 0.0);
        double next_alive = 0.0;
        for (int s = 0; s < a; ++s) {
            const double m = mass[static_cast<std::size_t>(s)];
            if (m <= 0.0) continue;
            st.symbol_visits[static_cast<std::size_t>(s)] += m;
            st.expected_phones += m;
            for (int t = 0; t < a; ++t) {
                const double q = chain.trans(s, t);
                if (q > 0.0) next[static_cast<std::size_t>(t)] += m * q;
            }
        }
        for (double v : next) next_alive += v;
        mass = std::move(next);
        alive = next_alive;
    }
    st.tail_mass = alive;
    return st;
}

// Synthetic lexicon description with exactly-known form-meaning MI.
struct SyntheticSpec {
    int alphabet_size = 0;
    int num_concepts = 0;
    int num_families = 0;
    int languages_per_family = 0;
    std::vector<MarkovChain> chains;    // one per concept, uniform concept prior
    std::vector<double> bias_strength;  // builder metadata, 0 = background
    double expected_length_cap = 50.0;

    void validate() const {
        if (alphabet_size < 1) throw data_error("synthetic spec: alphabet_size < 1");
        if (num_concepts < 1) throw data_error("synthetic spec: num_concepts < 1");
        if (num_families < 1 || languages_per_family < 1) throw data_error("synthetic spec: empty language layout");
        if (static_cast<int>(chains.size()) != num_concepts) throw data_error("synthetic spec: chains/concepts mismatch");
        for (const auto& c : chains) {
            c.validate();
            if (c.alphabet_size() != alphabet_size) throw data_error("synthetic spec: chain alphabet mismatch");
            const ChainStatistics st = chain_statistics(c);
            if (st.tail_mass > 1e-12 || st.expected_phones > expected_length_cap) {
                throw data_error("synthetic spec: non-terminating chain (expected length above cap)");
            }
        }
    }
};

// Staircase chains: symbol s continues only to {s+min_step .. s+min_step+
// branches-1}, so the support is a DAG, words are boundedly long, and exact
// enumeration stays cheap even with 41 symbols. Planted concepts reweight
// the branch and init probabilities toward a concept-specific random
// direction with the given strength; the eos hazard is shared so word-length
// statistics stay concept-independent.
struct StaircaseParams {
    int alphabet_size = 41;
    int num_concepts = 20;
    int num_families = 40;
    int languages_per_family = 10;
    std::vector<std::pair<int, double>> planted;  // (concept_id, strength in [0,1])
    double eos_hazard = 0.22;
    int min_step = 4;
    int branches = 3;
    // scales the planted strength on transition rows relative to the initial
    // distribution; 0 concentrates the whole bias in the first symbol
    double transition_bias_scale = 1.0;
    std::uint64_t chain_seed = 0;
};

inline SyntheticSpec make_staircase_spec(const StaircaseParams& sp) {
    if (sp.alphabet_size < sp.min_step + 1) throw config_error("staircase: alphabet too small for min_step");
    if (sp.eos_hazard <= 0.0 || sp.eos_hazard >= 1.0) throw config_error("staircase: eos_hazard must be in (0,1)");
    SyntheticSpec spec;
    spec.alphabet_size = sp.alphabet_size;
    spec.num_concepts = sp.num_concepts;
    spec.num_families = sp.num_families;
    spec.languages_per_family = sp.languages_per_family;
    spec.bias_strength.assign(static_cast<std::size_t>(sp.num_concepts), 0.0);
    for (const auto& [cid, strength] : sp.planted) {
        if (cid < 0 || cid >= sp.num_concepts) throw config_error("staircase: planted concept out of range");
        if (strength < 0.0 || strength > 1.0) throw config_error("staircase: strength out of [0,1]");
        spec.bias_strength[static_cast<std::size_t>(cid)] = strength;
    }

    const int a = sp.alphabet_size;
    Rng rng(derive_seed(sp.chain_seed, "staircase"));

    // background skeleton
    std::vector<double> init_w(static_cast<std::size_t>(a));
    double init_sum = 0.0;
    for (int s = 0; s < a; ++s) {
        init_w[static_cast<std::size_t>(s)] = (0.5 + rng.uniform()) * std::pow(0.85, s);
        init_sum += init_w[static_cast<std::size_t>(s)];
    }
    std::vector<std::vector<int>> targets(static_cast<std::size_t>(a));
    std::vector<std::vector<double>> branch_w(static_cast<std::size_t>(a));
    for (int s = 0; s < a; ++s) {
        for (int k = 0; k < sp.branches; ++k) {
            const int t = s + sp.min_step + k;
            if (t < a) targets[static_cast<std::size_t>(s)].push_back(t);
        }
        for (std::size_t k = 0; k < targets[static_cast<std::size_t>(s)].size(); ++k) {
            branch_w[static_cast<std::size_t>(s)].push_back(0.5 + rng.uniform());
        }
    }

    // concept-specific directions are sharp (ratios up to ~60x) so that
    // moderate strengths already carry a clearly measurable per-concept MI
    auto direction_weight = [](Rng& r) {
        const double u = r.uniform();
        return 0.05 + 3.0 * u * u * u;
    };

    auto build_chain = [&](int concept_id, double strength) {
        MarkovChain chain;
        chain.init.assign(static_cast<std::size_t>(a), 0.0);
        chain.trans = Matrix(a, a + 1);
        Rng dir_rng(derive_seed(sp.chain_seed, "bias" + std::to_string(concept_id)));
        std::vector<double> init_mix = init_w;
        if (strength > 0.0) {
            double mix_sum = 0.0;
            for (int s = 0; s < a; ++s) {
                const double alt = direction_weight(dir_rng) * std::pow(0.85, s);
                init_mix[static_cast<std::size_t>(s)] = (1.0 - strength) * init_w[static_cast<std::size_t>(s)] + strength * alt;
                mix_sum += init_mix[static_cast<std::size_t>(s)];
            }
            for (double& v : init_mix) v /= mix_sum;
        } else {
            for (double& v : init_mix) v /= init_sum;
        }
        chain.init = init_mix;

        const double trans_strength = strength * sp.transition_bias_scale;
        for (int s = 0; s < a; ++s) {
            const auto& ts = targets[static_cast<std::size_t>(s)];
            if (ts.empty()) {
                chain.trans(s, a) = 1.0;
                continue;
            }
            std::vector<double> w = branch_w[static_cast<std::size_t>(s)];
            if (trans_strength > 0.0) {
                for (double& x : w) x = (1.0 - trans_strength) * x + trans_strength * direction_weight(dir_rng);
            }
            double wsum = 0.0;
            for (double x : w) wsum += x;
            chain.trans(s, a) = sp.eos_hazard;
            for (std::size_t k = 0; k < ts.size(); ++k) {
                chain.trans(s, ts[k]) = (1.0 - sp.eos_hazard) * w[k] / wsum;
            }
        }
        return chain;
    };

    MarkovChain background = build_chain(-1, 0.0);
    for (int c = 0; c < sp.num_concepts; ++c) {
        const double strength = spec.bias_strength[static_cast<std::size_t>(c)];
        spec.chains.push_back(strength > 0.0 ? build_chain(c, strength) : background);
    }
    spec.validate();
    return spec;
}

namespace detail_synth {

inline std::vector<std::string> synthetic_symbols(int a) {
    std::vector<std::string> out;
    const auto& asjp = asjp_symbols();
    for (int i = 0; i < a; ++i) {
        if (i < static_cast<int>(asjp.size())) {
            out.push_back(asjp[static_cast<std::size_t>(i)]);
        } else {
            out.push_back("q" + std::to_string(i));
        }
    }
    return out;
}

inline int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail_synth

// Samples one word (phones only, no eos) from a chain.
inline std::vector<int> sample_word(const MarkovChain& chain, Rng& rng) {
    const int a = chain.alphabet_size();
    std::vector<int> phones;
    int s = detail_synth::sample_categorical(chain.init, rng);
    phones.push_back(s);
    for (int guard = 0; guard < 100000; ++guard) {
        const double u = rng.uniform();
        double acc = 0.0;
        int next = a;  // eos unless a transition fires first
        for (int t = 0; t <= a; ++t) {
            acc += chain.trans(s, t);
            if (u < acc) {
                next = t;
                break;
            }
        }
        if (next == a) return phones;
        phones.push_back(next);
        s = next;
    }
    throw numeric_error("sample_word: chain failed to terminate");
}

// Builds a full Lexicon: languages x concepts, one doculect per language,
// families spread round-robin over the four macroareas.
inline Lexicon generate(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Lexicon lex;
    lex.alphabet = Alphabet(detail_synth::synthetic_symbols(spec.alphabet_size));
    for (int c = 0; c < spec.num_concepts; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "c%03d", c);
        lex.concepts.push_back(buf);
    }
    Rng coord_rng(derive_seed(seed, "coords"));
    for (int f = 0; f < spec.num_families; ++f) {
        char fam_buf[24];
        std::snprintf(fam_buf, sizeof fam_buf, "fam%03d", f);
        const Macroarea area = static_cast<Macroarea>(f % kNumMacroareas);
        for (int l = 0; l < spec.languages_per_family; ++l) {
            char lang_buf[32];
            std::snprintf(lang_buf, sizeof lang_buf, "lang%03d_%02d", f, l);
            Doculect d;
            d.doculect_id = lang_buf;
            d.iso_code = lang_buf;
            d.family = fam_buf;
            d.macroarea = area;
            d.latitude = coord_rng.uniform(-60.0, 70.0);
            d.longitude = coord_rng.uniform(-180.0, 180.0);
            Rng word_rng(derive_seed(derive_seed(seed, "words"), d.doculect_id));
            for (int c = 0; c < spec.num_concepts; ++c) {
                WordEntry e;
                e.concept_id = c;
                e.phones = sample_word(spec.chains[static_cast<std::size_t>(c)], word_rng);
                d.entries.push_back(std::move(e));
            }
            lex.doculects.push_back(std::move(d));
        }
    }
    return lex;
}

struct OracleMi {
    double hw_bits_per_word = 0.0;   // H(W), direct summation over the support
    double hwv_bits_per_word = 0.0;  // H(W|V)
    double mi_bits_per_word = 0.0;   // H(W) - H(W|V)
    double expected_steps = 0.0;     // prediction steps per word, eos included
    double mi_bits_per_phone = 0.0;  // mi_bits_per_word / expected_steps
    double mi_bits_per_phone_word_norm = 0.0;  // E[pmi(w)/len(w)], the estimator's convention
    std::vector<double> concept_mi_bits_per_phone;  // KL(p(w|c) || p(w)) / E[steps|c]
    double min_support_mass = 0.0;
};

// Exact MI by enumerating every positive-probability string up to max_len.
// Fatal if any concept's enumerated mass leaves more than 1e-9 unaccounted.
inline OracleMi true_mi_bruteforce(const SyntheticSpec& spec, int max_len) {
    spec.validate();
    const int a = spec.alphabet_size;
    const int k = spec.num_concepts;
    const double prior = 1.0 / static_cast<double>(k);

    OracleMi out;
    out.concept_mi_bits_per_phone.assign(static_cast<std::size_t>(k), 0.0);
    std::vector<double> mass(static_cast<std::size_t>(k), 0.0);
    std::vector<double> concept_kl_bits(static_cast<std::size_t>(k), 0.0);   // sum q_c log2(q_c / pw)
    std::vector<double> concept_steps(static_cast<std::size_t>(k), 0.0);     // sum q_c * steps

    std::vector<double> path(static_cast<std::size_t>(k));
    // visit(s, depth, path): path[c] = p(prefix | c), prefix ends at symbol s
    auto visit = [&](auto&& self, int s, int depth) -> void {
        // the word can end here
        double hw_terms = 0.0;   // sum_c q_c * log2(q_c), exact when chains coincide
        double pw_sum = 0.0;
        std::vector<double> q(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) {
            q[static_cast<std::size_t>(c)] = path[static_cast<std::size_t>(c)] * spec.chains[static_cast<std::size_t>(c)].trans(s, a);
            pw_sum += q[static_cast<std::size_t>(c)];
        }
        const double pw = prior * pw_sum;
        const int steps = depth + 1;  // depth phones + eos
        if (pw > 0.0) {
            const double log2_pw = std::log2(pw);
            out.hw_bits_per_word -= pw * log2_pw;
            out.expected_steps += pw * steps;
            for (int c = 0; c < k; ++c) {
                const double qc = q[static_cast<std::size_t>(c)];
                if (qc > 0.0) {
                    const double log2_qc = std::log2(qc);
                    hw_terms += qc * log2_qc;
                    mass[static_cast<std::size_t>(c)] += qc;
                    concept_kl_bits[static_cast<std::size_t>(c)] += qc * (log2_qc - log2_pw);
                    concept_steps[static_cast<std::size_t>(c)] += qc * steps;
                    out.mi_bits_per_phone_word_norm += prior * qc * (log2_qc - log2_pw) / steps;
                }
            }
            out.hwv_bits_per_word -= prior * hw_terms;
        }
        if (depth >= max_len) return;
        for (int t = 0; t < a; ++t) {
            bool reachable = false;
            for (int c = 0; c < k; ++c) {
                const double step_p = spec.chains[static_cast<std::size_t>(c)].trans(s, t);
                if (path[static_cast<std::size_t>(c)] * step_p > 0.0) {
                    reachable = true;
                    break;
                }
            }
            if (!reachable) continue;
            std::vector<double> saved = path;
            for (int c = 0; c < k; ++c) path[static_cast<std::size_t>(c)] *= spec.chains[static_cast<std::size_t>(c)].trans(s, t);
            self(self, t, depth + 1);
            path = std::move(saved);
        }
    };

    for (int s = 0; s < a; ++s) {
        bool reachable = false;
        for (int c = 0; c < k; ++c) {
            path[static_cast<std::size_t>(c)] = spec.chains[static_cast<std::size_t>(c)].init[static_cast<std::size_t>(s)];
            reachable |= path[static_cast<std::size_t>(c)] > 0.0;
        }
        if (reachable) visit(visit, s, 1);
    }

    out.min_support_mass = 1.0;
    for (int c = 0; c < k; ++c) out.min_support_mass = std::min(out.min_support_mass, mass[static_cast<std::size_t>(c)]);
    if (out.min_support_mass < 1.0 - 1e-9) {
        throw numeric_error("true_mi_bruteforce: truncation mass " + std::to_string(1.0 - out.min_support_mass) +
                            " exceeds 1e-9; increase max_len");
    }
    out.mi_bits_per_word = out.hw_bits_per_word - out.hwv_bits_per_word;
    out.mi_bits_per_phone = out.mi_bits_per_word / out.expected_steps;
    for (int c = 0; c < k; ++c) {
        out.concept_mi_bits_per_phone[static_cast<std::size_t>(c)] =
            concept_kl_bits[static_cast<std::size_t>(c)] / concept_steps[static_cast<std::size_t>(c)];
    }
    return out;
}

}  // namespace formmi
