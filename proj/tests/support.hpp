#pragma once

#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "streampredict/batch_learners.hpp"
#include "streampredict/event_model.hpp"

namespace testing {

using namespace streampredict;

inline Symbol sym(char c) { return Symbol{kFirstActivity + static_cast<std::uint32_t>(c - 'a')}; }

inline Word word(std::string_view letters) {
    Word w;
    for (char c : letters) w.push_back(sym(c));
    return w;
}

// L = {a^5, aa^3, aaa^3, aab^1, aaaa^1, b^9, ba^1, bb^5, bba^1, bbb^1}, 30 cases.
inline EventLog reference_log() {
    EventLog log;
    log.add(word("a"), 5);
    log.add(word("aa"), 3);
    log.add(word("aaa"), 3);
    log.add(word("aab"), 1);
    log.add(word("aaaa"), 1);
    log.add(word("b"), 9);
    log.add(word("ba"), 1);
    log.add(word("bb"), 5);
    log.add(word("bba"), 1);
    log.add(word("bbb"), 1);
    return log;
}

inline StateId state_at(const Fdfa& a, std::string_view letters) {
    auto s = extended_delta(a, a.root(), word(letters));
    if (!s) throw std::runtime_error("no state for '" + std::string(letters) + "'");
    return *s;
}

struct RandomLogSpec {
    std::uint32_t max_alphabet = 4;
    std::uint32_t max_cases = 30;
    std::uint32_t max_length = 8;
};

inline EventLog random_log(std::mt19937_64& rng, RandomLogSpec spec = {}) {
    std::uniform_int_distribution<std::uint32_t> alpha(1, spec.max_alphabet);
    std::uniform_int_distribution<std::uint32_t> cases(1, spec.max_cases);
    std::uniform_int_distribution<std::uint32_t> length(1, spec.max_length);
    const std::uint32_t k = alpha(rng);
    std::uniform_int_distribution<std::uint32_t> letter(0, k - 1);
    EventLog log;
    const std::uint32_t n = cases(rng);
    for (std::uint32_t c = 0; c < n; ++c) {
        Word w;
        const std::uint32_t len = length(rng);
        for (std::uint32_t i = 0; i < len; ++i) w.push_back(Symbol{kFirstActivity + letter(rng)});
        log.add(std::move(w));
    }
    return log;
}

/// Random interleaving of the cases of `log`; per-case order is preserved.
inline std::vector<Event> interleave(const EventLog& log, std::mt19937_64& rng) {
    std::vector<std::pair<std::string, const Word*>> cases;
    for (const auto& [w, m] : log.entries()) {
        for (std::uint64_t i = 0; i < m; ++i) cases.emplace_back("c" + std::to_string(cases.size()), &w);
    }
    std::vector<std::size_t> slots;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        for (std::size_t i = 0; i < cases[c].second->size(); ++i) slots.push_back(c);
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    std::vector<std::size_t> pos(cases.size(), 0);
    std::vector<Event> out;
    out.reserve(slots.size());
    for (std::size_t c : slots) out.push_back(Event{cases[c].first, (*cases[c].second)[pos[c]++]});
    return out;
}

}  // namespace testing
