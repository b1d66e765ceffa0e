#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "formmi/csv.hpp"
#include "formmi/errors.hpp"
#include "formmi/hash.hpp"

namespace formmi {

enum class Macroarea : int { Africa = 0, Americas = 1, Eurasia = 2, Pacific = 3 };

inline const char* macroarea_name(Macroarea m) {
    switch (m) {
        case Macroarea::Africa: return "Africa";
        case Macroarea::Americas: return "Americas";
        case Macroarea::Eurasia: return "Eurasia";
        case Macroarea::Pacific: return "Pacific";
    }
    return "?";
}

inline std::optional<Macroarea> macroarea_from_name(const std::string& s) {
    if (s == "Africa") return Macroarea::Africa;
    if (s == "Americas") return Macroarea::Americas;
    if (s == "Eurasia") return Macroarea::Eurasia;
    if (s == "Pacific") return Macroarea::Pacific;
    return std::nullopt;
}

inline constexpr int kNumMacroareas = 4;

// The 41 ASJP phonetic symbols (7 vowels, 34 consonants); eos is implicit.
inline const std::vector<std::string>& asjp_symbols() {
    static const std::vector<std::string> symbols = {"i", "e", "E", "3", "a", "u", "o", "p", "b", "f", "v", "m", "w", "8",
                                                     "t", "d", "s", "z", "c", "n", "r", "l", "S", "Z", "C", "j", "T", "5",
                                                     "y", "k", "g", "x", "N", "q", "G", "X", "7", "h", "L", "4", "!"};
    return symbols;
}

enum class StatusFlag : int { PidginCreole = 0, Constructed = 1 };

inline const char* status_flag_name(StatusFlag f) {
    return f == StatusFlag::PidginCreole ? "pidgin_creole" : "constructed";
}

inline std::optional<StatusFlag> status_flag_from_name(const std::string& s) {
    if (s == "pidgin_creole") return StatusFlag::PidginCreole;
    if (s == "constructed") return StatusFlag::Constructed;
    return std::nullopt;
}

// Phone inventory. The eos symbol is implicit, at index size().
class Alphabet {
public:
    Alphabet() = default;

    explicit Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
        std::unordered_set<std::string> seen;
        for (const auto& s : symbols_) {
            if (s.empty()) throw data_error("alphabet: empty symbol");
            if (!seen.insert(s).second) throw data_error("alphabet: duplicate symbol '" + s + "'");
        }
        if (symbols_.empty()) throw data_error("alphabet: no symbols");
        // longest-first candidate order for greedy tokenization
        by_length_ = symbols_;
        std::sort(by_length_.begin(), by_length_.end(), [](const std::string& a, const std::string& b) {
            if (a.size() != b.size()) return a.size() > b.size();
            return a < b;
        });
        for (int i = 0; i < static_cast<int>(symbols_.size()); ++i) index_[symbols_[static_cast<std::size_t>(i)]] = i;
    }

    static Alphabet from_stream(std::istream& in) {
        std::vector<std::string> symbols;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            symbols.push_back(line);
        }
        return Alphabet(std::move(symbols));
    }

    int size() const { return static_cast<int>(symbols_.size()); }
    int eos() const { return size(); }
    int num_classes() const { return size() + 1; }  // symbols + eos
    const std::string& symbol(int i) const { return symbols_[static_cast<std::size_t>(i)]; }
    const std::vector<std::string>& symbols() const { return symbols_; }

    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& s : symbols_) {
            h = fnv1a64(s, h);
            h = fnv1a64(std::string_view("\n"), h);
        }
        return h;
    }

    // Greedy longest-match tokenization. Returns indices, or nullopt with the
    // offending position if some prefix matches no declared symbol.
    std::optional<std::vector<int>> encode(const std::string& form, std::size_t* bad_pos = nullptr) const {
        std::vector<int> out;
        std::size_t pos = 0;
        while (pos < form.size()) {
            bool matched = false;
            for (const auto& sym : by_length_) {
                if (form.compare(pos, sym.size(), sym) == 0) {
                    out.push_back(index_.at(sym));
                    pos += sym.size();
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                if (bad_pos) *bad_pos = pos;
                return std::nullopt;
            }
        }
        return out;
    }

    std::string decode(const std::vector<int>& phones) const {
        std::string out;
        for (int p : phones) out += symbol(p);
        return out;
    }

    bool operator==(const Alphabet& o) const { return symbols_ == o.symbols_; }

private:
    std::vector<std::string> symbols_;
    std::vector<std::string> by_length_;
    std::unordered_map<std::string, int> index_;
};

struct WordEntry {
    int concept_id = -1;
    std::vector<int> phones;  // alphabet indices, eos not stored
    bool loan = false;

    bool operator==(const WordEntry& o) const {
        return concept_id == o.concept_id && phones == o.phones && loan == o.loan;
    }
};

struct Doculect {
    std::string doculect_id;
    std::string iso_code;  // may be empty
    std::string family;
    Macroarea macroarea = Macroarea::Africa;
    double latitude = 0.0;
    double longitude = 0.0;
    std::set<StatusFlag> status_flags;
    std::vector<WordEntry> entries;

    // Language key for hierarchical grouping: ISO code when present.
    const std::string& language_key() const { return iso_code.empty() ? doculect_id : iso_code; }

    bool operator==(const Doculect& o) const {
        return doculect_id == o.doculect_id && iso_code == o.iso_code && family == o.family &&
               macroarea == o.macroarea && latitude == o.latitude && longitude == o.longitude &&
               status_flags == o.status_flags && entries == o.entries;
    }
};

struct Lexicon {
    Alphabet alphabet;
    std::vector<std::string> concepts;  // index == concept_id
    std::vector<Doculect> doculects;

    int num_concepts() const { return static_cast<int>(concepts.size()); }

    const Doculect* find_doculect(const std::string& id) const {
        for (const auto& d : doculects) {
            if (d.doculect_id == id) return &d;
        }
        return nullptr;
    }

    std::size_t total_entries() const {
        std::size_t n = 0;
        for (const auto& d : doculects) n += d.entries.size();
        return n;
    }

    bool operator==(const Lexicon& o) const {
        return alphabet == o.alphabet && concepts == o.concepts && doculects == o.doculects;
    }
};

enum class InputFormat { Tsv };

struct ParseReport {
    std::size_t rows_total = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_rejected = 0;
    std::size_t duplicates_dropped = 0;
    std::vector<std::string> diagnostics;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

inline const std::vector<std::string>& tsv_header() {
    static const std::vector<std::string> h = {"doculect_id", "iso_code", "family",  "macroarea", "latitude",
                                               "longitude",   "status_flags", "concept", "form",      "loan"};
    return h;
}

}  // namespace detail

// Parses the artifact TSV (see README for the column contract). Rows whose
// form uses undeclared symbols are rejected with a diagnostic; duplicate
// (doculect, concept) rows keep the first occurrence.
inline Lexicon parse_wordlists(std::istream& raw, const Alphabet& alphabet, InputFormat format = InputFormat::Tsv,
                               ParseReport* report = nullptr) {
    if (format != InputFormat::Tsv) throw config_error("unsupported input format");
    ParseReport local;
    ParseReport& rep = report ? *report : local;

    std::string line;
    if (!std::getline(raw, line)) throw data_error("parse error at line 1: empty input, header expected");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::split_tabs(line) != detail::tsv_header()) {
        throw data_error("parse error at line 1: malformed header, expected "
                         "doculect_id\\tiso_code\\tfamily\\tmacroarea\\tlatitude\\tlongitude\\tstatus_flags\\tconcept\\tform\\tloan");
    }

    Lexicon lex;
    lex.alphabet = alphabet;
    std::map<std::string, int> concept_ids;  // name -> provisional id
    std::unordered_map<std::string, std::size_t> doc_index;
    std::unordered_map<std::string, std::unordered_set<std::string>> seen_concepts;  // doculect -> concept names

    struct RawEntry {
        std::string concept_name;
        std::vector<int> phones;
        bool loan;
    };
    std::vector<std::vector<RawEntry>> raw_entries;

    std::size_t line_no = 1;
    while (std::getline(raw, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++rep.rows_total;
        auto fields = detail::split_tabs(line);
        if (fields.size() != detail::tsv_header().size()) {
            throw data_error("parse error at line " + std::to_string(line_no) + ": expected 10 tab-separated fields, got " +
                             std::to_string(fields.size()));
        }
        const std::string& doc_id = fields[0];
        const std::string& iso = fields[1];
        const std::string& family = fields[2];
        auto area = macroarea_from_name(fields[3]);
        if (!area) throw data_error("parse error at line " + std::to_string(line_no) + ": unknown macroarea '" + fields[3] + "'");
        double lat, lon;
        try {
            lat = parse_double_field(fields[4], "latitude");
            lon = parse_double_field(fields[5], "longitude");
        } catch (const data_error& e) {
            throw data_error("parse error at line " + std::to_string(line_no) + ": " + e.what());
        }
        std::set<StatusFlag> flags;
        if (!fields[6].empty()) {
            std::stringstream fs(fields[6]);
            std::string tok;
            while (std::getline(fs, tok, ',')) {
                auto f = status_flag_from_name(tok);
                if (!f) throw data_error("parse error at line " + std::to_string(line_no) + ": unknown status flag '" + tok + "'");
                flags.insert(*f);
            }
        }
        const std::string& concept_name = fields[7];
        const std::string& form = fields[8];
        if (fields[9] != "0" && fields[9] != "1") {
            throw data_error("parse error at line " + std::to_string(line_no) + ": loan must be 0 or 1, got '" + fields[9] + "'");
        }
        bool loan = fields[9] == "1";

        if (concept_name.empty()) {
            throw data_error("parse error at line " + std::to_string(line_no) + ": empty concept");
        }

        std::size_t bad_pos = 0;
        auto phones = alphabet.encode(form, &bad_pos);
        if (!phones || phones->empty()) {
            ++rep.rows_rejected;
            if (!phones) {
                rep.diagnostics.push_back("line " + std::to_string(line_no) + ": rejected, undeclared symbol at byte " +
                                          std::to_string(bad_pos) + " of form '" + form + "'");
            } else {
                rep.diagnostics.push_back("line " + std::to_string(line_no) + ": rejected, empty form");
            }
            continue;
        }

        auto it = doc_index.find(doc_id);
        std::size_t di;
        if (it == doc_index.end()) {
            di = lex.doculects.size();
            doc_index[doc_id] = di;
            Doculect d;
            d.doculect_id = doc_id;
            d.iso_code = iso;
            d.family = family;
            d.macroarea = *area;
            d.latitude = lat;
            d.longitude = lon;
            d.status_flags = flags;
            lex.doculects.push_back(std::move(d));
            raw_entries.emplace_back();
        } else {
            di = it->second;
        }
        if (!seen_concepts[doc_id].insert(concept_name).second) {
            ++rep.duplicates_dropped;
            rep.diagnostics.push_back("line " + std::to_string(line_no) + ": duplicate (doculect, concept) = (" + doc_id +
                                      ", " + concept_name + "), first occurrence kept");
            continue;
        }
        concept_ids.emplace(concept_name, 0);
        raw_entries[di].push_back(RawEntry{concept_name, std::move(*phones), loan});
        ++rep.rows_kept;
    }

    if (concept_ids.empty()) throw data_error("no concepts found in input (K == 0)");

    // canonical concept ids: lexicographic order
    int next_id = 0;
    for (auto& [name, id] : concept_ids) id = next_id++;
    lex.concepts.resize(concept_ids.size());
    for (const auto& [name, id] : concept_ids) lex.concepts[static_cast<std::size_t>(id)] = name;

    for (std::size_t di = 0; di < lex.doculects.size(); ++di) {
        for (auto& re : raw_entries[di]) {
            WordEntry e;
            e.concept_id = concept_ids.at(re.concept_name);
            e.phones = std::move(re.phones);
            e.loan = re.loan;
            lex.doculects[di].entries.push_back(std::move(e));
        }
    }
    return lex;
}

// Canonical TSV form: doculects sorted by id, entries by concept_id,
// status flags in declaration order. parse(serialize(lex)) == normalize(lex).
inline void serialize_wordlists(const Lexicon& lex, std::ostream& out) {
    const auto& header = detail::tsv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << '\t';
        out << header[i];
    }
    out << '\n';

    std::vector<const Doculect*> docs;
    docs.reserve(lex.doculects.size());
    for (const auto& d : lex.doculects) docs.push_back(&d);
    std::sort(docs.begin(), docs.end(), [](const Doculect* a, const Doculect* b) { return a->doculect_id < b->doculect_id; });

    for (const Doculect* d : docs) {
        std::vector<const WordEntry*> entries;
        entries.reserve(d->entries.size());
        for (const auto& e : d->entries) entries.push_back(&e);
        std::sort(entries.begin(), entries.end(), [](const WordEntry* a, const WordEntry* b) { return a->concept_id < b->concept_id; });
        std::string flags;
        for (StatusFlag f : d->status_flags) {
            if (!flags.empty()) flags += ',';
            flags += status_flag_name(f);
        }
        for (const WordEntry* e : entries) {
            out << d->doculect_id << '\t' << d->iso_code << '\t' << d->family << '\t' << macroarea_name(d->macroarea) << '\t'
                << format_double(d->latitude) << '\t' << format_double(d->longitude) << '\t' << flags << '\t'
                << lex.concepts[static_cast<std::size_t>(e->concept_id)] << '\t' << lex.alphabet.decode(e->phones) << '\t'
                << (e->loan ? '1' : '0') << '\n';
        }
    }
}

inline Lexicon normalize(const Lexicon& lex) {
    std::ostringstream buf;
    serialize_wordlists(lex, buf);
    std::istringstream in(buf.str());
    return parse_wordlists(in, lex.alphabet);
}

struct FilterPolicy {
    std::set<StatusFlag> exclude_flags;
    bool drop_loans = false;
};

struct FilterReport {
    std::size_t doculects_removed = 0;
    std::size_t loan_entries_removed = 0;
};

inline Lexicon filter_lexicon(const Lexicon& lex, const FilterPolicy& policy, FilterReport* report = nullptr) {
    FilterReport local;
    FilterReport& rep = report ? *report : local;
    Lexicon out;
    out.alphabet = lex.alphabet;
    out.concepts = lex.concepts;
    for (const auto& d : lex.doculects) {
        bool excluded = false;
        for (StatusFlag f : d.status_flags) {
            if (policy.exclude_flags.count(f)) {
                excluded = true;
                break;
            }
        }
        if (excluded) {
            ++rep.doculects_removed;
            continue;
        }
        Doculect kept = d;
        if (policy.drop_loans) {
            kept.entries.clear();
            for (const auto& e : d.entries) {
                if (e.loan) {
                    ++rep.loan_entries_removed;
                } else {
                    kept.entries.push_back(e);
                }
            }
        }
        out.doculects.push_back(std::move(kept));
    }
    if (out.doculects.empty() || out.total_entries() == 0) {
        throw data_error("filter removed everything: " + std::to_string(rep.doculects_removed) + " doculects excluded, " +
                         std::to_string(rep.loan_entries_removed) + " loan entries dropped");
    }
    return out;
}

// Every family is assigned the single macroarea holding the plurality of its
// doculects; ties break by the fixed order Africa < Americas < Eurasia < Pacific.
inline Lexicon reassign_families_to_macroareas(const Lexicon& lex) {
    std::map<std::string, std::array<int, kNumMacroareas>> counts;
    for (const auto& d : lex.doculects) {
        auto& c = counts[d.family];
        ++c[static_cast<std::size_t>(d.macroarea)];
    }
    std::map<std::string, Macroarea> family_area;
    for (const auto& [family, c] : counts) {
        int best = 0;
        for (int a = 1; a < kNumMacroareas; ++a) {
            if (c[static_cast<std::size_t>(a)] > c[static_cast<std::size_t>(best)]) best = a;
        }
        family_area[family] = static_cast<Macroarea>(best);
    }
    Lexicon out = lex;
    for (auto& d : out.doculects) d.macroarea = family_area.at(d.family);
    return out;
}

}  // namespace formmi
