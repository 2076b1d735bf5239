#pragma once

#include <list>
#include <map>
#include <memory>
#include <unordered_map>

#include "streampredict/batch_learners.hpp"
#include "streampredict/predictor.hpp"

namespace streampredict {

/// Current state per active case; unmapped cases sit at the root.
/// With max_cases > 0 the least recently updated case is evicted beyond the cap.
class CaseTracker {
public:
    explicit CaseTracker(std::size_t max_cases = 0) : max_cases_(max_cases) {}

    std::optional<StateId> find(std::string_view case_id) const;
    StateId state_of(std::string_view case_id) const { return find(case_id).value_or(kRoot); }
    void assign(const std::string& case_id, StateId s);

    std::size_t size() const { return entries_.size(); }
    std::uint64_t evictions() const { return evictions_; }

private:
    struct Entry {
        StateId state;
        std::list<std::string>::iterator lru;
    };
    std::size_t max_cases_;
    std::unordered_map<std::string, Entry> entries_;
    std::list<std::string> recency_;  // front = most recent
    std::uint64_t evictions_ = 0;
};

/// Access-string index for subset states.
class BagIndex {
public:
    BagIndex() = default;
    explicit BagIndex(const Fdfa& a);
    StateId ensure(Fdfa& a, const Word& set);

private:
    std::map<Word, StateId> index_{{Word{}, kRoot}};
};

void ngram_stream_update(Fdfa& a, CaseTracker& t, NGramIndex& index, const Event& e, NGramConfig cfg);
void fpt_stream_update(Fdfa& a, CaseTracker& t, const Event& e);
void bag_stream_update(Fdfa& a, CaseTracker& t, BagIndex& index, const Event& e);

/// Distribution at s; on a zero-total state, n-gram backoff shortens access(s).
std::optional<Distribution> state_query(const Fdfa& a, StateId s, bool backoff);

/// Incremental equivalent of predict_with_backoff: the state reached after reading `a`
/// from s, re-parsing the longest parseable suffix of access(s)·a when δ(s,a) is undefined.
StateId backoff_step(const Fdfa& a, StateId s, Symbol sym);

enum class AutomatonKind { kPrefixTree, kNGram, kBag };

/// Automaton learned online, event by event.
class StreamingAutomaton final : public Predictor {
public:
    StreamingAutomaton(std::string name, AutomatonKind kind, NGramConfig ngram = {}, std::size_t max_cases = 0);
    /// Continues learning from an existing automaton (n-gram or bag index rebuilt from access strings).
    StreamingAutomaton(std::string name, AutomatonKind kind, Fdfa start, NGramConfig ngram = {},
                       std::size_t max_cases = 0);

    void update(const Event& e) override;
    std::optional<Distribution> query(std::string_view case_id) const override;
    std::optional<std::uint64_t> state_visits(std::string_view case_id) const override;
    bool tracks_visits() const override { return true; }
    std::optional<std::size_t> state_count() const override { return fdfa_.state_count(); }

    const Fdfa& automaton() const { return fdfa_; }
    CaseTracker& tracker() { return tracker_; }
    const CaseTracker& tracker() const { return tracker_; }
    AutomatonKind kind() const { return kind_; }

private:
    AutomatonKind kind_;
    NGramConfig ngram_;
    Fdfa fdfa_;
    CaseTracker tracker_;
    NGramIndex ngram_index_;
    BagIndex bag_index_;
};

/// Inference-only view of a batch-trained automaton. Cases are tracked incrementally;
/// with backoff enabled (n-grams) undefined transitions re-parse shorter suffixes,
/// otherwise the case is lost and every later query abstains.
class FrozenAutomaton final : public Predictor {
public:
    FrozenAutomaton(std::string name, std::shared_ptr<const Fdfa> automaton, bool backoff);

    void update(const Event& e) override;
    std::optional<Distribution> query(std::string_view case_id) const override;
    std::optional<std::uint64_t> state_visits(std::string_view case_id) const override;
    bool tracks_visits() const override { return true; }
    std::optional<std::size_t> state_count() const override { return fdfa_->state_count(); }

    const Fdfa& automaton() const { return *fdfa_; }
    /// nullopt when the case has fallen off the automaton.
    std::optional<StateId> current(std::string_view case_id) const;

private:
    std::shared_ptr<const Fdfa> fdfa_;
    bool backoff_;
    std::unordered_map<std::string, std::optional<StateId>> cases_;
};

}  // namespace streampredict
