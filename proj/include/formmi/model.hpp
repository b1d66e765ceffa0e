#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "formmi/adamw.hpp"
#include "formmi/errors.hpp"
#include "formmi/folds.hpp"
#include "formmi/lexicon.hpp"
#include "formmi/lstm.hpp"
#include "formmi/parallel.hpp"
#include "formmi/rng.hpp"

namespace formmi {

struct ModelConfig {
    int embedding_dim = 64;
    int hidden_dim = 128;
    int layers = 1;
    double dropout = 0.0;
    bool conditional = false;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 5;
    double init_scale = 0.1;
    // the concept projection starts near zero so a conditioned model begins
    // functionally identical to its unconditioned twin
    double init_proj_scale = 0.01;
    AdamWConfig optimizer;

    void validate() const {
        if (embedding_dim < 4 || embedding_dim > 1024) throw config_error("embedding_dim out of range [4,1024]");
        if (hidden_dim < 32 || hidden_dim > 1024) throw config_error("hidden_dim out of range [32,1024]");
        if (layers < 1 || layers > 4) throw config_error("layers out of range [1,4]");
        if (dropout < 0.0 || dropout > 0.5) throw config_error("dropout out of range [0,0.5]");
        if (batch_size < 1) throw config_error("batch_size must be >= 1");
        if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
        if (patience < 1) throw config_error("patience must be >= 1");
    }
};

struct EpochStats {
    int epoch = 0;
    double train_loss_bits_per_word = 0.0;  // Eq.-9-style weighted mean
    double train_xent_bits_per_phone = 0.0;
    double validation_xent_bits_per_phone = 0.0;
};

struct TrainedModel {
    LstmParams params;
    ModelConfig config;
    std::string fold_scheme;
    int fold_id = -1;
    std::uint64_t seed = 0;
    double validation_xent = std::numeric_limits<double>::quiet_NaN();  // bits/phone, best epoch
    std::vector<EpochStats> training_curve;
    std::uint64_t alphabet_hash = 0;
    int concept_count = 0;
};

// One eos-terminated training/evaluation example. The eos embedding doubles
// as the sequence-start input, so inputs = [eos, phones...], targets =
// [phones..., eos].
struct TrainingWord {
    std::vector<int> inputs;
    std::vector<int> targets;
    int concept_id = -1;
    double weight = 1.0;
    std::string doculect_id;

    int steps() const { return static_cast<int>(targets.size()); }
};

inline TrainingWord make_training_word(const WordEntry& e, int eos, double weight, const std::string& doculect_id) {
    if (e.phones.empty()) throw data_error("empty word");
    TrainingWord w;
    w.concept_id = e.concept_id;
    w.weight = weight;
    w.doculect_id = doculect_id;
    w.inputs.reserve(e.phones.size() + 1);
    w.targets.reserve(e.phones.size() + 1);
    w.inputs.push_back(eos);
    for (int p : e.phones) {
        w.inputs.push_back(p);
        w.targets.push_back(p);
    }
    w.targets.push_back(eos);
    return w;
}

inline std::vector<TrainingWord> collect_words(const Lexicon& lex, const std::vector<std::string>& doculect_ids,
                                               const std::unordered_map<std::string, double>* weights = nullptr) {
    std::unordered_map<std::string, const Doculect*> by_id;
    for (const auto& d : lex.doculects) by_id[d.doculect_id] = &d;
    std::vector<TrainingWord> words;
    for (const auto& id : doculect_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw data_error("unknown doculect id '" + id + "'");
        const double w = weights ? weights->at(id) : 1.0;
        for (const auto& e : it->second->entries) {
            words.push_back(make_training_word(e, lex.alphabet.eos(), w, id));
        }
    }
    return words;
}

inline std::vector<double> concept_h0(const LstmParams& p, int concept_id) {
    if (!p.conditional()) return {};
    if (concept_id < 0 || concept_id >= p.num_concepts) {
        throw data_error("concept id " + std::to_string(concept_id) + " out of range [0," + std::to_string(p.num_concepts) + ")");
    }
    std::vector<double> h0(static_cast<std::size_t>(p.hidden_dim));
    for (int i = 0; i < p.hidden_dim; ++i) h0[static_cast<std::size_t>(i)] = p.init_proj(i, concept_id);
    return h0;
}

// Per-step log2 p(w_t | w_<t [, v]); evaluation mode.
inline std::vector<double> word_step_log2probs(const LstmParams& p, const TrainingWord& w, bool use_concept) {
    std::vector<double> h0 = use_concept ? concept_h0(p, w.concept_id) : std::vector<double>{};
    LstmCache cache = lstm_forward(p, w.inputs, h0);
    return sequence_step_log2probs(p, cache, w.targets);
}

struct WordScore {
    double log2prob = 0.0;  // sum over steps, <= 0
    int steps = 0;          // prediction steps, eos included
};

inline WordScore word_logprob(const LstmParams& p, const TrainingWord& w, bool use_concept) {
    if (use_concept && !p.conditional()) throw config_error("word_logprob: use_concept on an unconditioned model");
    WordScore s;
    for (double lp : word_step_log2probs(p, w, use_concept)) s.log2prob += lp;
    s.steps = w.steps();
    return s;
}

inline WordScore word_logprob(const TrainedModel& m, const TrainingWord& w, bool use_concept) {
    return word_logprob(m.params, w, use_concept);
}

// eos index is vocab-1 by construction (alphabet size + 1 classes).
inline WordScore word_logprob(const TrainedModel& m, const WordEntry& e, bool use_concept) {
    return word_logprob(m.params, make_training_word(e, m.params.vocab - 1, 1.0, ""), use_concept);
}

namespace detail_model {

// Forward + loss + backward for one word. Returns nll in bits; accumulates
// grad * scale into grads when grads != nullptr.
inline double word_pass(const LstmParams& p, const TrainingWord& w, const ForwardOptions& opts, LstmParams* grads,
                        double scale) {
    const bool use_concept = p.conditional();
    std::vector<double> h0 = use_concept ? concept_h0(p, w.concept_id) : std::vector<double>{};
    LstmCache cache = lstm_forward(p, w.inputs, h0, opts);

    const int T = cache.T;
    double nll_bits = 0.0;
    Matrix dlogits(grads ? T : 0, grads ? p.vocab : 0);
    std::vector<double> log2p(static_cast<std::size_t>(p.vocab));
    for (int t = 0; t < T; ++t) {
        auto logits = next_phone_logits(p, cache.top_hidden().row(t));
        log2_softmax(logits.data(), p.vocab, log2p.data());
        const int tgt = w.targets[static_cast<std::size_t>(t)];
        nll_bits -= log2p[static_cast<std::size_t>(tgt)];
        if (grads) {
            double* dl = dlogits.row(t);
            for (int i = 0; i < p.vocab; ++i) {
                const double prob = std::exp2(log2p[static_cast<std::size_t>(i)]);
                dl[i] = (prob - (i == tgt ? 1.0 : 0.0)) / kLn2 * scale;
            }
        }
    }
    if (grads) {
        std::vector<double> h0_grad;
        lstm_backward(p, cache, dlogits, *grads, use_concept ? &h0_grad : nullptr);
        if (use_concept) {
            for (int i = 0; i < p.hidden_dim; ++i) grads->init_proj(i, w.concept_id) += h0_grad[static_cast<std::size_t>(i)];
        }
    }
    return nll_bits;
}

}  // namespace detail_model

// Eq.-9-style weighted loss over a word set: (1/L) sum_n w_n * nll_n with
// L = sum_n w_n, in bits per word.
inline double weighted_loss_bits(const LstmParams& p, const std::vector<TrainingWord>& words) {
    double num = 0.0, den = 0.0;
    for (const auto& w : words) {
        num += w.weight * detail_model::word_pass(p, w, {}, nullptr, 0.0);
        den += w.weight;
    }
    if (den <= 0.0) throw data_error("weighted_loss_bits: empty word set");
    return num / den;
}

// Family-weighted cross-entropy in bits per phone (eos step counted).
inline double weighted_xent_bits_per_phone(const LstmParams& p, const std::vector<TrainingWord>& words) {
    double num = 0.0, den = 0.0;
    for (const auto& w : words) {
        num += w.weight * detail_model::word_pass(p, w, {}, nullptr, 0.0);
        den += w.weight * w.steps();
    }
    if (den <= 0.0) throw data_error("weighted_xent: empty word set");
    return num / den;
}

// Permutes the concept labels over the whole set; the concept-id multiset is
// preserved, the pairing with forms is randomized.
inline std::vector<TrainingWord> shuffle_concept_ids(std::vector<TrainingWord> words, std::uint64_t seed) {
    std::vector<int> ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(w.concept_id);
    Rng rng(derive_seed(seed, "shuffle_concept_ids"));
    rng.shuffle(ids);
    for (std::size_t i = 0; i < words.size(); ++i) words[i].concept_id = ids[i];
    return words;
}

struct TrainDataset {
    std::vector<TrainingWord> train;
    std::vector<TrainingWord> validation;
};

inline TrainDataset build_fold_dataset(const Lexicon& lex, const FoldAssignment& folds, int fold_index) {
    if (fold_index < 0 || fold_index >= static_cast<int>(folds.folds.size())) throw config_error("fold index out of range");
    const Fold& fold = folds.folds[static_cast<std::size_t>(fold_index)];
    if (fold.train_ids.empty() || fold.validation_ids.empty()) throw data_error("fold has empty train or validation set");
    auto train_weights = family_weights(lex, fold.train_ids);
    auto val_weights = family_weights(lex, fold.validation_ids);
    TrainDataset ds;
    ds.train = collect_words(lex, fold.train_ids, &train_weights);
    ds.validation = collect_words(lex, fold.validation_ids, &val_weights);
    if (ds.train.empty() || ds.validation.empty()) throw data_error("fold has no usable words");
    return ds;
}

// Trains one model on a fold's train split, early-stopping on the weighted
// validation cross-entropy; returns the best-validation checkpoint.
inline TrainedModel train(const Lexicon& lex, const TrainDataset& ds, const ModelConfig& cfg, FoldScheme scheme, int fold_index,
                          std::uint64_t seed) {
    cfg.validate();
    const int vocab = lex.alphabet.num_classes();
    const int concepts = cfg.conditional ? lex.num_concepts() : 0;

    // the seed stream deliberately ignores cfg.conditional: the two members
    // of a pair share init draws, batch order and dropout masks, so their
    // difference isolates the conditioning pathway
    const std::uint64_t base = derive_seed(seed, "fold" + std::to_string(fold_index));

    LstmParams params = LstmParams::create(vocab, cfg.embedding_dim, cfg.hidden_dim, cfg.layers, concepts);
    Rng init_rng(derive_seed(base, "init"));
    params.init_random(init_rng, cfg.init_scale);
    if (params.conditional() && cfg.init_scale > 0.0) {
        const double rescale = cfg.init_proj_scale / cfg.init_scale;
        for (double& v : params.init_proj.data) v *= rescale;
    }

    AdamWState opt;
    opt.cfg = cfg.optimizer;
    opt.init(params.num_params());
    LstmParams grads = params.zeros_like();

    TrainedModel best;
    best.config = cfg;
    best.fold_scheme = fold_scheme_name(scheme);
    best.fold_id = fold_index;
    best.seed = seed;
    best.alphabet_hash = lex.alphabet.hash();
    best.concept_count = lex.num_concepts();

    double best_val = std::numeric_limits<double>::infinity();
    int epochs_without_improvement = 0;
    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng epoch_rng(derive_seed(base, "epoch" + std::to_string(epoch)));
        epoch_rng.shuffle(order);
        ForwardOptions opts;
        opts.dropout_rate = cfg.dropout;
        opts.training = true;
        opts.rng = &epoch_rng;

        double epoch_num = 0.0, epoch_den_w = 0.0, epoch_den_steps = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end = std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
            double batch_weight = 0.0;
            for (std::size_t k = pos; k < batch_end; ++k) batch_weight += ds.train[order[k]].weight;
            if (batch_weight <= 0.0) batch_weight = 1.0;
            for (std::size_t k = pos; k < batch_end; ++k) {
                const TrainingWord& w = ds.train[order[k]];
                const double nll = detail_model::word_pass(params, w, opts, &grads, w.weight / batch_weight);
                epoch_num += w.weight * nll;
                epoch_den_w += w.weight;
                epoch_den_steps += w.weight * w.steps();
            }
            adamw_step(params, grads, opt);
            grads.zero();
            pos = batch_end;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss_bits_per_word = epoch_num / epoch_den_w;
        stats.train_xent_bits_per_phone = epoch_num / epoch_den_steps;
        stats.validation_xent_bits_per_phone = weighted_xent_bits_per_phone(params, ds.validation);
        best.training_curve.push_back(stats);

        if (!std::isfinite(stats.train_loss_bits_per_word) || !std::isfinite(stats.validation_xent_bits_per_phone)) {
            std::ostringstream dump;
            dump << "training diverged at epoch " << epoch << "; trajectory:";
            for (const auto& s : best.training_curve) {
                dump << " [" << s.epoch << "] train=" << s.train_loss_bits_per_word << " val=" << s.validation_xent_bits_per_phone;
            }
            throw numeric_error(dump.str());
        }

        if (stats.validation_xent_bits_per_phone < best_val) {
            best_val = stats.validation_xent_bits_per_phone;
            best.params = params;
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement >= cfg.patience) break;
        }
    }

    best.validation_xent = best_val;
    return best;
}

inline TrainedModel train(const Lexicon& lex, const FoldAssignment& folds, int fold_index, const ModelConfig& cfg,
                          std::uint64_t seed) {
    return train(lex, build_fold_dataset(lex, folds, fold_index), cfg, folds.scheme, fold_index, seed);
}

struct SeedPair {
    std::uint64_t seed = 0;
    std::optional<TrainedModel> unconditioned;
    std::optional<TrainedModel> conditional;
    std::vector<std::string> errors;
};

// Trains (unconditioned, conditional) pairs for seeds 0..n_seeds-1 on one
// fold. Individual failures are reported and do not stop the other seeds.
inline std::vector<SeedPair> train_seed_ensemble(const Lexicon& lex, const FoldAssignment& folds, int fold_index,
                                                 const ModelConfig& cfg, int n_seeds, int workers) {
    if (n_seeds < 1) throw config_error("n_seeds must be >= 1");
    TrainDataset ds = build_fold_dataset(lex, folds, fold_index);
    std::vector<SeedPair> pairs(static_cast<std::size_t>(n_seeds));
    for (int s = 0; s < n_seeds; ++s) pairs[static_cast<std::size_t>(s)].seed = static_cast<std::uint64_t>(s);
    std::vector<std::string> task_errors(static_cast<std::size_t>(2 * n_seeds));

    parallel_for(2 * n_seeds, workers, [&](int task) {
        const int s = task / 2;
        const bool cond = (task % 2) == 1;
        ModelConfig mc = cfg;
        mc.conditional = cond;
        SeedPair& pair = pairs[static_cast<std::size_t>(s)];
        try {
            TrainedModel m = train(lex, ds, mc, folds.scheme, fold_index, static_cast<std::uint64_t>(s));
            if (cond) pair.conditional = std::move(m);
            else pair.unconditioned = std::move(m);
        } catch (const std::exception& e) {
            task_errors[static_cast<std::size_t>(task)] = std::string(cond ? "conditional" : "unconditioned") + " seed " +
                                                          std::to_string(s) + " failed: " + e.what();
        }
    });
    for (int task = 0; task < 2 * n_seeds; ++task) {
        if (!task_errors[static_cast<std::size_t>(task)].empty()) {
            pairs[static_cast<std::size_t>(task / 2)].errors.push_back(task_errors[static_cast<std::size_t>(task)]);
        }
    }
    return pairs;
}

}  // namespace formmi
