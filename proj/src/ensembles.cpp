#include "streampredict/ensembles.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace streampredict {

Ensemble::Ensemble(std::string name, std::vector<PredictorPtr> members, std::size_t min_members)
    : Predictor(std::move(name)), members_(std::move(members)) {
    if (members_.size() < min_members) {
        throw std::invalid_argument("ensemble '" + this->name() + "' needs at least " + std::to_string(min_members) +
                                    " members");
    }
    for (const auto& m : members_) {
        if (!m) throw std::invalid_argument("ensemble member is null");
    }
}

void Ensemble::update(const Event& e) {
    for (auto& m : members_) m->update(e);
}

SoftVote::SoftVote(std::string name, std::vector<PredictorPtr> members) : Ensemble(std::move(name), std::move(members)) {}

std::optional<Distribution> SoftVote::query(std::string_view case_id) const {
    std::map<Symbol, double> acc;
    std::size_t answering = 0;
    for (const auto& m : members_) {
        auto d = m->query(case_id);
        if (!d || d->empty()) continue;
        ++answering;
        for (const auto& [sym, p] : d->entries()) acc[sym] += p;
    }
    if (answering == 0) return std::nullopt;
    std::vector<Distribution::Entry> entries;
    entries.reserve(acc.size());
    for (const auto& [sym, p] : acc) entries.emplace_back(sym, p / static_cast<double>(answering));
    return Distribution(std::move(entries));
}

HardVote::HardVote(std::string name, std::vector<PredictorPtr> members, OutcomePolicy policy)
    : Ensemble(std::move(name), std::move(members)), policy_(policy) {}

std::optional<Distribution> HardVote::query(std::string_view case_id) const {
    std::map<Symbol, std::size_t> votes;
    for (const auto& m : members_) {
        auto d = m->query(case_id);
        if (!d) continue;
        if (auto vote = predicted_outcome(*d, policy_)) ++votes[*vote];
    }
    if (votes.empty()) return std::nullopt;
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return Distribution::dirac(best->first);
}

AdaptiveVote::AdaptiveVote(std::string name, std::vector<PredictorPtr> members, AdaptiveConfig cfg)
    : Ensemble(std::move(name), std::move(members)), cfg_(cfg), scores_(members_.size()) {
    if (cfg_.decay < 0.0 || cfg_.decay >= 1.0) throw std::invalid_argument("adaptive decay must lie in [0, 1)");
}

void AdaptiveVote::update(const Event& e) {
    if (is_activity(e.activity)) {
        for (std::size_t i = 0; i < members_.size(); ++i) {
            auto d = members_[i]->query(e.case_id);
            std::optional<Symbol> guess;
            if (d) guess = predicted_outcome(*d, cfg_.policy);
            const bool hit = guess && *guess == e.activity;
            auto& s = scores_[i];
            s.decayed = s.scored == 0 ? (hit ? 1.0 : 0.0) : cfg_.decay * s.decayed + (1.0 - cfg_.decay) * (hit ? 1.0 : 0.0);
            s.correct += hit ? 1 : 0;
            ++s.scored;
        }
    }
    Ensemble::update(e);
}

std::optional<double> AdaptiveVote::score(std::size_t member) const {
    const auto& s = scores_.at(member);
    if (s.scored == 0) return std::nullopt;
    if (cfg_.decay > 0.0) return s.decayed;
    return static_cast<double>(s.correct) / static_cast<double>(s.scored);
}

void AdaptiveVote::set_counts(std::size_t member, std::uint64_t correct, std::uint64_t scored) {
    if (correct > scored) throw std::invalid_argument("correct count exceeds scored count");
    auto& s = scores_.at(member);
    s.correct = correct;
    s.scored = scored;
    s.decayed = scored == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(scored);
}

std::optional<Distribution> AdaptiveVote::query(std::string_view case_id) const {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (auto s = score(i)) ranked.emplace_back(*s, i);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (const auto& [s, i] : ranked) {
        if (auto d = members_[i]->query(case_id)) return d;
    }
    return std::nullopt;
}

Fallback::Fallback(std::string name, PredictorPtr primary, PredictorPtr secondary, std::uint64_t min_visits)
    : Ensemble(std::move(name),
               [&] {
                   std::vector<PredictorPtr> v;
                   v.push_back(std::move(primary));
                   v.push_back(std::move(secondary));
                   return v;
               }()),
      min_visits_(min_visits) {
    if (!members_[0]->tracks_visits()) {
        throw std::invalid_argument("fallback primary '" + members_[0]->name() + "' does not expose visit counts");
    }
}

std::optional<Distribution> Fallback::query(std::string_view case_id) const {
    auto visits = members_[0]->state_visits(case_id);
    if (visits && *visits >= min_visits_) {
        if (auto d = members_[0]->query(case_id)) return d;
    }
    return members_[1]->query(case_id);
}

}  // namespace streampredict
