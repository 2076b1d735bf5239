#include "streampredict/fdfa.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace streampredict {

void FrequencyVector::add(Symbol s, std::uint64_t k) {
    if (s.index >= counts_.size()) counts_.resize(s.index + 1, 0);
    counts_[s.index] += k;
    total_ += k;
}

void FrequencyVector::remove(Symbol s, std::uint64_t k) {
    if (count(s) < k) throw FrequencyUnderflow();
    counts_[s.index] -= k;
    total_ -= k;
}

FrequencyVector& FrequencyVector::operator+=(const FrequencyVector& other) {
    if (other.counts_.size() > counts_.size()) counts_.resize(other.counts_.size(), 0);
    for (std::size_t i = 0; i < other.counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
    return *this;
}

std::vector<std::pair<Symbol, std::uint64_t>> FrequencyVector::nonzero() const {
    std::vector<std::pair<Symbol, std::uint64_t>> out;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        if (counts_[i] != 0) out.emplace_back(Symbol{static_cast<std::uint32_t>(i)}, counts_[i]);
    }
    return out;
}

bool FrequencyVector::operator==(const FrequencyVector& other) const {
    return total_ == other.total_ && nonzero() == other.nonzero();
}

Fdfa::Fdfa() { states_.push_back(State{}); }

StateId Fdfa::add_state(Word access) {
    StateId id{static_cast<std::uint32_t>(states_.size())};
    states_.push_back(State{FrequencyVector{}, std::move(access), {}});
    return id;
}

std::optional<StateId> Fdfa::successor(StateId s, Symbol a) const {
    const auto& out = states_.at(s.value).out;
    auto it = std::lower_bound(out.begin(), out.end(), a,
                               [](const Transition& t, Symbol x) { return t.symbol < x; });
    if (it != out.end() && it->symbol == a) return it->target;
    return std::nullopt;
}

void Fdfa::set_transition(StateId s, Symbol a, StateId t) {
    if (!valid(t)) throw std::out_of_range("transition target is not a state");
    if (a == kStop) throw std::invalid_argument("STOP has no transitions");
    auto& out = states_.at(s.value).out;
    auto it = std::lower_bound(out.begin(), out.end(), a,
                               [](const Transition& tr, Symbol x) { return tr.symbol < x; });
    if (it != out.end() && it->symbol == a) {
        if (it->target != t) throw std::logic_error("nondeterministic transition");
        return;
    }
    out.insert(it, Transition{a, t});
}

std::size_t Fdfa::transition_count() const {
    std::size_t n = 0;
    for (const auto& st : states_) n += st.out.size();
    return n;
}

Distribution::Distribution(std::vector<Entry> entries) {
    std::erase_if(entries, [](const Entry& e) { return !(e.second > 0.0); });
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) { return x.first < y.first; });
    entries_ = std::move(entries);
}

Distribution Distribution::from_frequencies(const FrequencyVector& f) {
    if (f.total() == 0) throw EmptyStateError();
    const double total = static_cast<double>(f.total());
    std::vector<Entry> entries;
    for (auto [sym, c] : f.nonzero()) entries.emplace_back(sym, static_cast<double>(c) / total);
    Distribution d;
    d.entries_ = std::move(entries);
    return d;
}

double Distribution::prob(Symbol s) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), s,
                               [](const Entry& e, Symbol x) { return e.first < x; });
    return (it != entries_.end() && it->first == s) ? it->second : 0.0;
}

double Distribution::sum() const {
    double total = 0.0;
    for (const auto& e : entries_) total += e.second;
    return total;
}

std::optional<StateId> extended_delta(const Fdfa& a, StateId s, std::span<const Symbol> w) {
    for (Symbol sym : w) {
        auto next = a.successor(s, sym);
        if (!next) return std::nullopt;
        s = *next;
    }
    return s;
}

Distribution distribution_of(const Fdfa& a, StateId s) { return Distribution::from_frequencies(a.freq(s)); }

Ratio exact_probability(const Fdfa& a, StateId s, Symbol sym) {
    const auto& f = a.freq(s);
    if (f.total() == 0) throw EmptyStateError();
    std::uint64_t num = f.count(sym);
    std::uint64_t den = f.total();
    std::uint64_t g = std::gcd(num, den);
    return {num / g, den / g};
}

std::optional<Distribution> predict(const Fdfa& a, std::span<const Symbol> w) {
    auto s = extended_delta(a, a.root(), w);
    if (!s) return std::nullopt;
    return distribution_of(a, *s);
}

Symbol argmax_symbol(const Distribution& d) {
    if (d.empty()) throw std::invalid_argument("argmax of an empty distribution");
    const auto entries = d.entries();
    const auto* best = &entries.front();
    for (const auto& e : entries) {
        if (e.second > best->second) best = &e;
    }
    return best->first;
}

std::optional<Symbol> predicted_outcome(const Distribution& d, OutcomePolicy policy) {
    std::optional<Symbol> best;
    double best_p = 0.0;
    for (const auto& [sym, p] : d.entries()) {
        if (policy == OutcomePolicy::kActivitiesOnly && !is_activity(sym)) continue;
        if (!best || p > best_p) {
            best = sym;
            best_p = p;
        }
    }
    return best;
}

namespace {

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

// Returns the index one past the JSON string or array starting at `pos`.
std::size_t scan_json(const std::string& line, std::size_t pos) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = pos; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
                if (depth == 0) return i + 1;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            if (--depth == 0) return i + 1;
        }
    }
    throw std::runtime_error("unterminated token");
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

std::uint64_t parse_u64(const std::string& text, std::size_t line_no) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        malformed(line_no, "expected a non-negative integer, got '" + text + "'");
    }
    return std::stoull(text);
}

}  // namespace

void write_fdfa_text(std::ostream& os, const Fdfa& a, const Alphabet& alphabet) {
    os << "fdfa states=" << a.state_count() << " transitions=" << a.transition_count() << '\n';
    for (std::uint32_t i = 0; i < a.state_count(); ++i) {
        StateId s{i};
        nlohmann::json access = nlohmann::json::array();
        for (Symbol sym : a.access(s)) access.push_back(alphabet.name(sym));
        const auto& f = a.freq(s);
        os << "state " << i << " access=" << access.dump() << " stop=" << f.count(kStop) << '\n';

        std::map<Symbol, std::optional<StateId>> edges;
        for (const auto& t : a.transitions(s)) edges[t.symbol] = t.target;
        for (auto [sym, c] : f.nonzero()) {
            if (sym != kStop) edges.try_emplace(sym, std::nullopt);
        }
        for (const auto& [sym, target] : edges) {
            os << "  " << quote(alphabet.name(sym)) << '(' << f.count(sym) << ") -> ";
            if (target) {
                os << target->value;
            } else {
                os << '-';
            }
            os << '\n';
        }
    }
}

Fdfa read_fdfa_text(std::istream& is, Alphabet& alphabet) {
    struct PendingEdge {
        std::uint32_t from;
        Symbol sym;
        std::uint64_t count;
        std::optional<std::uint32_t> to;
        std::size_t line_no;
    };
    struct PendingState {
        Word access;
        std::uint64_t stop = 0;
    };

    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> declared_states;
    std::vector<PendingState> states;
    std::vector<PendingEdge> edges;

    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("fdfa ", 0) == 0) {
            auto p = line.find("states=");
            if (p == std::string::npos) malformed(line_no, "header lacks states=");
            auto e = line.find(' ', p);
            declared_states = parse_u64(line.substr(p + 7, e == std::string::npos ? e : e - p - 7), line_no);
            continue;
        }
        if (line.rfind("state ", 0) == 0) {
            std::istringstream head(line.substr(6));
            std::string id_text;
            head >> id_text;
            if (parse_u64(id_text, line_no) != states.size()) malformed(line_no, "state ids must be dense and ascending");
            auto p = line.find("access=");
            if (p == std::string::npos) malformed(line_no, "missing access=");
            auto end = scan_json(line, p + 7);
            PendingState st;
            try {
                for (const auto& name : nlohmann::json::parse(line.substr(p + 7, end - p - 7))) {
                    st.access.push_back(alphabet.resolve(name.get<std::string>()));
                }
            } catch (const nlohmann::json::exception& ex) {
                malformed(line_no, std::string("bad access annotation: ") + ex.what());
            }
            auto rest = line.substr(end);
            auto sp = rest.find("stop=");
            if (sp == std::string::npos) malformed(line_no, "missing stop=");
            st.stop = parse_u64(rest.substr(sp + 5), line_no);
            states.push_back(std::move(st));
            continue;
        }
        auto first = line.find_first_not_of(' ');
        if (first != std::string::npos && line[first] == '"') {
            if (states.empty()) malformed(line_no, "edge before any state");
            auto end = scan_json(line, first);
            std::string name;
            try {
                name = nlohmann::json::parse(line.substr(first, end - first)).get<std::string>();
            } catch (const nlohmann::json::exception& ex) {
                malformed(line_no, std::string("bad activity name: ") + ex.what());
            }
            auto open = line.find('(', end);
            auto close = line.find(')', end);
            auto arrow = line.find("->", end);
            if (open != end || close == std::string::npos || arrow == std::string::npos || arrow < close) {
                malformed(line_no, "expected name(count) -> target");
            }
            PendingEdge edge{static_cast<std::uint32_t>(states.size() - 1), alphabet.resolve(name),
                             parse_u64(line.substr(open + 1, close - open - 1), line_no), std::nullopt, line_no};
            std::string target = line.substr(arrow + 2);
            target.erase(0, target.find_first_not_of(' '));
            target.erase(target.find_last_not_of(" \r") + 1);
            if (target != "-") edge.to = static_cast<std::uint32_t>(parse_u64(target, line_no));
            if (edge.sym == kStop) malformed(line_no, "STOP cannot label an edge");
            edges.push_back(edge);
            continue;
        }
        malformed(line_no, "unrecognized line");
    }

    if (states.empty()) throw std::runtime_error("dump contains no states");
    if (declared_states && *declared_states != states.size()) {
        throw std::runtime_error("header declares " + std::to_string(*declared_states) + " states, found " +
                                 std::to_string(states.size()));
    }
    if (!states.front().access.empty()) throw std::runtime_error("state 0 must be the root with empty access");

    Fdfa a;
    for (std::size_t i = 1; i < states.size(); ++i) a.add_state(states[i].access);
    for (std::size_t i = 0; i < states.size(); ++i) {
        a.freq(StateId{static_cast<std::uint32_t>(i)}).add(kStop, states[i].stop);
    }
    for (const auto& e : edges) {
        a.freq(StateId{e.from}).add(e.sym, e.count);
        if (e.to) {
            if (*e.to >= states.size()) malformed(e.line_no, "edge target out of range");
            try {
                a.set_transition(StateId{e.from}, e.sym, StateId{*e.to});
            } catch (const std::logic_error&) {
                malformed(e.line_no, "nondeterministic transition");
            }
        }
    }
    return a;
}

std::vector<std::string> validate_fdfa(const Fdfa& a) {
    std::vector<std::string> problems;
    for (std::uint32_t i = 0; i < a.state_count(); ++i) {
        StateId s{i};
        const auto out = a.transitions(s);
        for (std::size_t k = 0; k < out.size(); ++k) {
            if (!a.valid(out[k].target)) problems.push_back("state " + std::to_string(i) + ": edge to missing state");
            if (k > 0 && !(out[k - 1].symbol < out[k].symbol)) {
                problems.push_back("state " + std::to_string(i) + ": nondeterministic edges");
            }
        }
        for (auto [sym, c] : a.freq(s).nonzero()) {
            if (sym != kStop && !a.successor(s, sym)) {
                problems.push_back("state " + std::to_string(i) + ": symbol #" + std::to_string(sym.index) +
                                   " observed without a transition");
            }
        }
    }
    return problems;
}

bool same_labelled_automaton(const Fdfa& x, const Fdfa& y) {
    if (x.state_count() != y.state_count()) return false;
    using Edges = std::map<Symbol, Word>;
    auto canon = [](const Fdfa& a) {
        std::map<Word, std::pair<std::vector<std::pair<Symbol, std::uint64_t>>, Edges>> out;
        for (std::uint32_t i = 0; i < a.state_count(); ++i) {
            StateId s{i};
            Edges edges;
            for (const auto& t : a.transitions(s)) edges[t.symbol] = a.access(t.target);
            out[a.access(s)] = {a.freq(s).nonzero(), std::move(edges)};
        }
        return out;
    };
    auto cx = canon(x);
    return cx.size() == x.state_count() && cx == canon(y);
}

}  // namespace streampredict
