#include "streampredict/streaming.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace streampredict {

double PredictorStats::mean_latency_ms() const {
    if (latency_ms.empty()) return 0.0;
    return std::accumulate(latency_ms.begin(), latency_ms.end(), 0.0) / static_cast<double>(latency_ms.size());
}

double PredictorStats::median_latency_ms() const {
    if (latency_ms.empty()) return 0.0;
    std::vector<double> v = latency_ms;
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    double upper = *mid;
    double lower = *std::max_element(v.begin(), mid);
    return (lower + upper) / 2.0;
}

std::optional<StateId> CaseTracker::find(std::string_view case_id) const {
    auto it = entries_.find(std::string(case_id));
    if (it == entries_.end()) return std::nullopt;
    return it->second.state;
}

void CaseTracker::assign(const std::string& case_id, StateId s) {
    auto it = entries_.find(case_id);
    if (it != entries_.end()) {
        it->second.state = s;
        recency_.splice(recency_.begin(), recency_, it->second.lru);
        return;
    }
    recency_.push_front(case_id);
    entries_.emplace(case_id, Entry{s, recency_.begin()});
    if (max_cases_ > 0 && entries_.size() > max_cases_) {
        entries_.erase(recency_.back());
        recency_.pop_back();
        ++evictions_;
    }
}

BagIndex::BagIndex(const Fdfa& a) {
    for (std::uint32_t i = 0; i < a.state_count(); ++i) index_[a.access(StateId{i})] = StateId{i};
}

StateId BagIndex::ensure(Fdfa& a, const Word& set) {
    auto [it, inserted] = index_.try_emplace(set, StateId{});
    if (inserted) it->second = a.add_state(set);
    return it->second;
}

namespace {

// Steps (1), (2) and (4) of the update protocol around a learner-specific successor.
template <typename MakeSuccessor>
void stream_update(Fdfa& a, CaseTracker& t, const Event& e, MakeSuccessor&& make_successor) {
    auto current = t.find(e.case_id);
    StateId s = current.value_or(a.root());
    if (!current) a.freq(s).add(kStop);
    a.freq(s).remove(kStop);
    a.freq(s).add(e.activity);
    auto next = a.successor(s, e.activity);
    if (!next) {
        next = make_successor(s);
        a.set_transition(s, e.activity, *next);
    }
    a.freq(*next).add(kStop);
    t.assign(e.case_id, *next);
}

}  // namespace

void ngram_stream_update(Fdfa& a, CaseTracker& t, NGramIndex& index, const Event& e, NGramConfig cfg) {
    stream_update(a, t, e, [&](StateId s) {
        Word u = a.access(s);
        u.push_back(e.activity);
        return index.ensure(a, suffix(u, cfg.history()));
    });
}

void fpt_stream_update(Fdfa& a, CaseTracker& t, const Event& e) {
    stream_update(a, t, e, [&](StateId s) {
        Word u = a.access(s);
        u.push_back(e.activity);
        return a.add_state(std::move(u));
    });
}

void bag_stream_update(Fdfa& a, CaseTracker& t, BagIndex& index, const Event& e) {
    stream_update(a, t, e, [&](StateId s) {
        Word set = a.access(s);
        auto pos = std::lower_bound(set.begin(), set.end(), e.activity);
        if (pos == set.end() || *pos != e.activity) set.insert(pos, e.activity);
        return index.ensure(a, set);
    });
}

std::optional<Distribution> state_query(const Fdfa& a, StateId s, bool backoff) {
    if (a.freq(s).total() > 0) return distribution_of(a, s);
    if (!backoff) return std::nullopt;
    const Word& access = a.access(s);
    for (std::size_t k = access.size(); k-- > 0;) {
        auto t = extended_delta(a, a.root(), std::span(access).subspan(access.size() - k));
        if (t && a.freq(*t).total() > 0) return distribution_of(a, *t);
    }
    return std::nullopt;
}

StateId backoff_step(const Fdfa& a, StateId s, Symbol sym) {
    if (auto next = a.successor(s, sym)) return *next;
    Word u = a.access(s);
    u.push_back(sym);
    for (std::size_t k = u.size(); k-- > 0;) {
        if (auto t = extended_delta(a, a.root(), std::span(u).subspan(u.size() - k))) return *t;
    }
    return a.root();
}

StreamingAutomaton::StreamingAutomaton(std::string name, AutomatonKind kind, NGramConfig ngram, std::size_t max_cases)
    : StreamingAutomaton(std::move(name), kind, Fdfa{}, ngram, max_cases) {}

StreamingAutomaton::StreamingAutomaton(std::string name, AutomatonKind kind, Fdfa start, NGramConfig ngram,
                                       std::size_t max_cases)
    : Predictor(std::move(name)), kind_(kind), ngram_(ngram), fdfa_(std::move(start)), tracker_(max_cases) {
    ngram_.validate();
    if (kind_ == AutomatonKind::kNGram) ngram_index_ = NGramIndex(fdfa_);
    if (kind_ == AutomatonKind::kBag) bag_index_ = BagIndex(fdfa_);
}

void StreamingAutomaton::update(const Event& e) {
    if (e.activity == kStop) throw std::invalid_argument("streaming models never receive STOP events");
    switch (kind_) {
        case AutomatonKind::kNGram:
            ngram_stream_update(fdfa_, tracker_, ngram_index_, e, ngram_);
            break;
        case AutomatonKind::kPrefixTree:
            fpt_stream_update(fdfa_, tracker_, e);
            break;
        case AutomatonKind::kBag:
            bag_stream_update(fdfa_, tracker_, bag_index_, e);
            break;
    }
}

std::optional<Distribution> StreamingAutomaton::query(std::string_view case_id) const {
    return state_query(fdfa_, tracker_.state_of(case_id), kind_ == AutomatonKind::kNGram);
}

std::optional<std::uint64_t> StreamingAutomaton::state_visits(std::string_view case_id) const {
    return fdfa_.freq(tracker_.state_of(case_id)).total();
}

FrozenAutomaton::FrozenAutomaton(std::string name, std::shared_ptr<const Fdfa> automaton, bool backoff)
    : Predictor(std::move(name)), fdfa_(std::move(automaton)), backoff_(backoff) {
    if (!fdfa_) throw std::invalid_argument("frozen predictor needs an automaton");
}

std::optional<StateId> FrozenAutomaton::current(std::string_view case_id) const {
    auto it = cases_.find(std::string(case_id));
    if (it == cases_.end()) return fdfa_->root();
    return it->second;
}

void FrozenAutomaton::update(const Event& e) {
    auto [it, inserted] = cases_.try_emplace(e.case_id, fdfa_->root());
    // batch automata carry no INIT transitions
    if (!it->second || e.activity == kInit) return;
    if (backoff_) {
        it->second = backoff_step(*fdfa_, *it->second, e.activity);
    } else {
        it->second = fdfa_->successor(*it->second, e.activity);
    }
}

std::optional<Distribution> FrozenAutomaton::query(std::string_view case_id) const {
    auto s = current(case_id);
    if (!s) return std::nullopt;
    return state_query(*fdfa_, *s, backoff_);
}

std::optional<std::uint64_t> FrozenAutomaton::state_visits(std::string_view case_id) const {
    auto s = current(case_id);
    if (!s) return std::nullopt;
    return fdfa_->freq(*s).total();
}

}  // namespace streampredict
