#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "streampredict/event_model.hpp"

namespace streampredict {

struct StateId {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const StateId&) const = default;
};

inline constexpr StateId kRoot{0};

class EmptyStateError : public std::domain_error {
public:
    EmptyStateError() : std::domain_error("state has total frequency 0") {}
};

class FrequencyUnderflow : public std::logic_error {
public:
    FrequencyUnderflow() : std::logic_error("frequency count would become negative") {}
};

/// Dense counts over the extended alphabet, indexed by Symbol::index.
class FrequencyVector {
public:
    std::uint64_t count(Symbol s) const { return s.index < counts_.size() ? counts_[s.index] : 0; }
    std::uint64_t total() const { return total_; }

    void add(Symbol s, std::uint64_t k = 1);
    void remove(Symbol s, std::uint64_t k = 1);
    FrequencyVector& operator+=(const FrequencyVector& other);

    /// Nonzero (symbol, count) pairs in ascending symbol order.
    std::vector<std::pair<Symbol, std::uint64_t>> nonzero() const;
    std::size_t extent() const { return counts_.size(); }

    bool operator==(const FrequencyVector& other) const;

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

struct Transition {
    Symbol symbol;
    StateId target;

    bool operator==(const Transition&) const = default;
};

/// Frequency deterministic finite automaton: state 0 is the root.
/// One writer or many readers; never both.
class Fdfa {
public:
    Fdfa();

    StateId root() const { return kRoot; }
    std::size_t state_count() const { return states_.size(); }

    StateId add_state(Word access);

    const FrequencyVector& freq(StateId s) const { return states_.at(s.value).freq; }
    FrequencyVector& freq(StateId s) { return states_.at(s.value).freq; }
    const Word& access(StateId s) const { return states_.at(s.value).access; }

    std::optional<StateId> successor(StateId s, Symbol a) const;
    /// Defines δ(s,a) = t. Redefining to a different target throws (determinism).
    void set_transition(StateId s, Symbol a, StateId t);
    std::span<const Transition> transitions(StateId s) const { return states_.at(s.value).out; }
    std::size_t transition_count() const;

    bool valid(StateId s) const { return s.value < states_.size(); }

private:
    struct State {
        FrequencyVector freq;
        Word access;
        std::vector<Transition> out;  // sorted by symbol
    };
    std::vector<State> states_;
};

/// Exact probability f/total in lowest terms.
struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    bool operator==(const Ratio&) const = default;
};

class Distribution {
public:
    using Entry = std::pair<Symbol, double>;

    Distribution() = default;
    /// Entries with nonpositive mass are dropped; the rest are kept sorted by symbol.
    explicit Distribution(std::vector<Entry> entries);

    static Distribution dirac(Symbol s) { return Distribution({{s, 1.0}}); }
    static Distribution from_frequencies(const FrequencyVector& f);

    double prob(Symbol s) const;
    std::span<const Entry> entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    double sum() const;

    bool operator==(const Distribution&) const = default;

private:
    std::vector<Entry> entries_;
};

std::optional<StateId> extended_delta(const Fdfa& a, StateId s, std::span<const Symbol> w);

/// π(s); throws EmptyStateError if the state has total frequency 0.
Distribution distribution_of(const Fdfa& a, StateId s);
Ratio exact_probability(const Fdfa& a, StateId s, Symbol sym);

/// p(w) = π(δ̂(s₀,w)); nullopt when the parse is undefined.
std::optional<Distribution> predict(const Fdfa& a, std::span<const Symbol> w);

/// Most probable symbol, ties to the smallest index. Throws on an empty distribution.
Symbol argmax_symbol(const Distribution& d);

/// Which symbols count as a prediction outcome. Batch evaluation appends STOP to each
/// test sequence; a stream never carries STOP or INIT events.
enum class OutcomePolicy { kWithStop, kActivitiesOnly };

std::optional<Symbol> predicted_outcome(const Distribution& d, OutcomePolicy policy);

/// Plain-text adjacency dump, one `state` line per state followed by its edges.
void write_fdfa_text(std::ostream& os, const Fdfa& a, const Alphabet& alphabet);
/// Parses a dump produced by write_fdfa_text; throws std::runtime_error on malformed input.
Fdfa read_fdfa_text(std::istream& is, Alphabet& alphabet);

/// Checks determinism, valid targets and that every observed symbol has a transition.
std::vector<std::string> validate_fdfa(const Fdfa& a);

/// True iff both automata have the same access-labelled states, frequencies and edges.
bool same_labelled_automaton(const Fdfa& x, const Fdfa& y);

}  // namespace streampredict
