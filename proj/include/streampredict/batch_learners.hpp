#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <unordered_map>

#include "streampredict/event_model.hpp"
#include "streampredict/fdfa.hpp"

namespace streampredict {

struct NGramConfig {
    std::size_t window = 3;  // n; states remember the last n-1 activities

    std::size_t history() const { return window - 1; }
    void validate() const;
};

struct AlergiaConfig {
    double alpha = 0.5;

    void validate() const;
};

/// Access-string index kept alongside an n-gram automaton. New states are linked into
/// a trie of access strings so that every state is reachable from the root through
/// its own prefixes, with count-0 edges where the prefix path was never traversed.
class NGramIndex {
public:
    NGramIndex() = default;
    /// Rebuilds the index from the access annotations of an existing n-gram automaton.
    explicit NGramIndex(const Fdfa& a);

    std::optional<StateId> find(const Word& access) const;
    /// Returns the state for `access`, creating it and its trie path on demand.
    StateId ensure(Fdfa& a, const Word& access);

private:
    std::unordered_map<Word, StateId, WordHash> index_{{Word{}, kRoot}};
};

/// Last `k` symbols of w (w itself when shorter).
Word suffix(std::span<const Symbol> w, std::size_t k);

Fdfa build_fpt(const EventLog& log);
Fdfa build_ngram(const EventLog& log, NGramConfig cfg);
Fdfa fold_fpt_to_ngram(const Fdfa& fpt, NGramConfig cfg);
Fdfa build_bag(const EventLog& log);

double hoeffding_bound(std::uint64_t n1, std::uint64_t n2, double alpha);
/// Throws std::invalid_argument when either vector has total 0.
bool hoeffding_compatible(const FrequencyVector& f1, const FrequencyVector& f2, double alpha);

Fdfa alergia(const Fdfa& fpt, AlergiaConfig cfg);

/// Parses shorter and shorter suffixes of w from the root until a state with
/// nonzero total is reached; nullopt means abstain.
std::optional<Distribution> predict_with_backoff(const Fdfa& a, std::span<const Symbol> w);

}  // namespace streampredict
