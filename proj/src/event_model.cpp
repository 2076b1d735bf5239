#include "streampredict/event_model.hpp"

#include <mutex>

namespace streampredict {

Alphabet::Alphabet(Sentinels sentinels) : sentinels_(std::move(sentinels)) {
    if (sentinels_.stop == sentinels_.init) {
        throw std::invalid_argument("stop and init sentinels must differ");
    }
    names_ = {sentinels_.stop, sentinels_.init};
}

Symbol Alphabet::intern(std::string_view surface) {
    if (surface == sentinels_.stop || surface == sentinels_.init) {
        throw ReservedSymbolError("activity name '" + std::string(surface) + "' collides with a reserved sentinel");
    }
    {
        std::shared_lock lock(mu_);
        if (auto it = index_.find(std::string(surface)); it != index_.end()) return it->second;
    }
    std::unique_lock lock(mu_);
    auto [it, inserted] = index_.try_emplace(std::string(surface), Symbol{static_cast<std::uint32_t>(names_.size())});
    if (inserted) names_.emplace_back(surface);
    return it->second;
}

Symbol Alphabet::resolve(std::string_view surface) {
    if (surface == sentinels_.stop) return kStop;
    if (surface == sentinels_.init) return kInit;
    return intern(surface);
}

std::optional<Symbol> Alphabet::find(std::string_view surface) const {
    if (surface == sentinels_.stop) return kStop;
    if (surface == sentinels_.init) return kInit;
    std::shared_lock lock(mu_);
    if (auto it = index_.find(std::string(surface)); it != index_.end()) return it->second;
    return std::nullopt;
}

std::string Alphabet::name(Symbol s) const {
    std::shared_lock lock(mu_);
    if (s.index >= names_.size()) return "#" + std::to_string(s.index);
    return names_[s.index];
}

std::size_t Alphabet::activity_count() const {
    std::shared_lock lock(mu_);
    return names_.size() - kFirstActivity;
}

void EventLog::add(Word sequence, std::uint64_t multiplicity) {
    if (multiplicity == 0) return;
    if (sequence.empty()) throw std::invalid_argument("the empty sequence cannot appear in an event log");
    entries_[std::move(sequence)] += multiplicity;
    cases_ += multiplicity;
}

std::uint64_t EventLog::multiplicity(const Word& w) const {
    auto it = entries_.find(w);
    return it == entries_.end() ? 0 : it->second;
}

std::uint64_t EventLog::event_count() const {
    std::uint64_t n = 0;
    for (const auto& [w, m] : entries_) n += w.size() * m;
    return n;
}

EventLog log_from_stream(std::span<const Event> stream) {
    std::unordered_map<std::string, Word> cases;
    for (const Event& e : stream) {
        if (e.case_id.empty()) throw std::invalid_argument("event with empty case id");
        cases[e.case_id].push_back(e.activity);
    }
    EventLog log;
    for (auto& [id, w] : cases) log.add(std::move(w));
    return log;
}

}  // namespace streampredict
