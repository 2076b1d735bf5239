#include "streampredict/batch_learners.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace streampredict {

void NGramConfig::validate() const {
    if (window < 1) throw std::invalid_argument("n-gram window must be at least 1");
}

void AlergiaConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alergia alpha must lie in (0, 1]");
}

NGramIndex::NGramIndex(const Fdfa& a) {
    for (std::uint32_t i = 0; i < a.state_count(); ++i) index_[a.access(StateId{i})] = StateId{i};
}

std::optional<StateId> NGramIndex::find(const Word& access) const {
    auto it = index_.find(access);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

StateId NGramIndex::ensure(Fdfa& a, const Word& access) {
    if (auto it = index_.find(access); it != index_.end()) return it->second;
    StateId parent = kRoot;
    Word prefix;
    prefix.reserve(access.size());
    for (Symbol sym : access) {
        prefix.push_back(sym);
        auto [it, inserted] = index_.try_emplace(prefix, StateId{});
        if (inserted) {
            it->second = a.add_state(prefix);
            a.set_transition(parent, sym, it->second);
        }
        parent = it->second;
    }
    return parent;
}

Word suffix(std::span<const Symbol> w, std::size_t k) {
    if (w.size() <= k) return Word(w.begin(), w.end());
    return Word(w.end() - static_cast<std::ptrdiff_t>(k), w.end());
}

Fdfa build_fpt(const EventLog& log) {
    Fdfa a;
    for (const auto& [w, m] : log.entries()) {
        StateId s = a.root();
        for (Symbol sym : w) {
            a.freq(s).add(sym, m);
            auto next = a.successor(s, sym);
            if (!next) {
                Word access = a.access(s);
                access.push_back(sym);
                next = a.add_state(std::move(access));
                a.set_transition(s, sym, *next);
            }
            s = *next;
        }
        a.freq(s).add(kStop, m);
    }
    return a;
}

Fdfa build_ngram(const EventLog& log, NGramConfig cfg) {
    cfg.validate();
    const std::size_t k = cfg.history();
    Fdfa a;
    NGramIndex index;
    Word u;
    for (const auto& [w, m] : log.entries()) {
        StateId s = a.root();
        u.clear();
        for (Symbol sym : w) {
            a.freq(s).add(sym, m);
            u.push_back(sym);
            if (u.size() > k) u.erase(u.begin());
            StateId t = index.ensure(a, u);
            a.set_transition(s, sym, t);
            s = t;
        }
        a.freq(s).add(kStop, m);
    }
    return a;
}

namespace {

void require_tree(const Fdfa& a) {
    std::vector<int> incoming(a.state_count(), 0);
    for (std::uint32_t i = 0; i < a.state_count(); ++i) {
        StateId s{i};
        for (const auto& t : a.transitions(s)) {
            Word expected = a.access(s);
            expected.push_back(t.symbol);
            if (a.access(t.target) != expected || ++incoming[t.target.value] > 1 || t.target == kRoot) {
                throw std::invalid_argument("input automaton is not a prefix tree");
            }
        }
    }
}

}  // namespace

Fdfa fold_fpt_to_ngram(const Fdfa& fpt, NGramConfig cfg) {
    cfg.validate();
    require_tree(fpt);
    const std::size_t k = cfg.history();
    Fdfa out;
    NGramIndex index;
    std::vector<StateId> cls(fpt.state_count());
    for (std::uint32_t i = 0; i < fpt.state_count(); ++i) {
        StateId s{i};
        cls[i] = index.ensure(out, suffix(fpt.access(s), k));
        out.freq(cls[i]) += fpt.freq(s);
    }
    for (std::uint32_t i = 0; i < fpt.state_count(); ++i) {
        for (const auto& t : fpt.transitions(StateId{i})) out.set_transition(cls[i], t.symbol, cls[t.target.value]);
    }
    return out;
}

Fdfa build_bag(const EventLog& log) {
    Fdfa a;
    std::map<Word, StateId> index{{Word{}, kRoot}};
    for (const auto& [w, m] : log.entries()) {
        StateId s = a.root();
        Word set;
        for (Symbol sym : w) {
            a.freq(s).add(sym, m);
            auto pos = std::lower_bound(set.begin(), set.end(), sym);
            if (pos == set.end() || *pos != sym) set.insert(pos, sym);
            auto [it, inserted] = index.try_emplace(set, StateId{});
            if (inserted) it->second = a.add_state(set);
            a.set_transition(s, sym, it->second);
            s = it->second;
        }
        a.freq(s).add(kStop, m);
    }
    return a;
}

double hoeffding_bound(std::uint64_t n1, std::uint64_t n2, double alpha) {
    return std::sqrt(std::log(2.0 / alpha) / 2.0) *
           (1.0 / std::sqrt(static_cast<double>(n1)) + 1.0 / std::sqrt(static_cast<double>(n2)));
}

bool hoeffding_compatible(const FrequencyVector& f1, const FrequencyVector& f2, double alpha) {
    const std::uint64_t n1 = f1.total();
    const std::uint64_t n2 = f2.total();
    if (n1 == 0 || n2 == 0) throw std::invalid_argument("Hoeffding test on a zero-total frequency vector");
    const double bound = hoeffding_bound(n1, n2, alpha);
    const std::size_t extent = std::max(f1.extent(), f2.extent());
    for (std::uint32_t i = 0; i < extent; ++i) {
        Symbol s{i};
        double diff = std::abs(static_cast<double>(f1.count(s)) / static_cast<double>(n1) -
                               static_cast<double>(f2.count(s)) / static_cast<double>(n2));
        if (!(diff < bound)) return false;
    }
    return true;
}

namespace {

class RedBlueMerger {
public:
    RedBlueMerger(const Fdfa& fpt, double alpha) : alpha_(alpha) {
        nodes_.resize(fpt.state_count());
        for (std::uint32_t i = 0; i < fpt.state_count(); ++i) {
            StateId s{i};
            nodes_[i].freq = fpt.freq(s);
            nodes_[i].access = fpt.access(s);
            for (const auto& t : fpt.transitions(s)) nodes_[i].children[t.symbol] = t.target.value;
        }
    }

    Fdfa run() {
        std::vector<std::uint32_t> red{0};
        std::vector<bool> is_red(nodes_.size(), false);
        is_red[0] = true;
        while (true) {
            auto blue = blue_states(red, is_red);
            if (blue.empty()) break;
            const Blue& q = blue.front();
            bool merged = false;
            for (std::uint32_t r : red) {
                if (compatible(r, q.node)) {
                    nodes_[q.parent].children[q.via] = r;
                    fold(r, q.node);
                    merged = true;
                    break;
                }
            }
            if (!merged) {
                red.push_back(q.node);
                is_red[q.node] = true;
            }
        }
        return compact();
    }

private:
    struct Node {
        FrequencyVector freq;
        Word access;
        std::map<Symbol, std::uint32_t> children;
        bool alive = true;
    };
    struct Blue {
        std::uint32_t node;
        std::uint32_t parent;
        Symbol via;
    };

    std::vector<Blue> blue_states(const std::vector<std::uint32_t>& red, const std::vector<bool>& is_red) const {
        std::vector<Blue> blue;
        for (std::uint32_t r : red) {
            for (const auto& [sym, child] : nodes_[r].children) {
                if (!is_red[child]) blue.push_back({child, r, sym});
            }
        }
        std::sort(blue.begin(), blue.end(), [this](const Blue& x, const Blue& y) {
            const Word& a = nodes_[x.node].access;
            const Word& b = nodes_[y.node].access;
            if (a.size() != b.size()) return a.size() < b.size();
            return a < b;
        });
        return blue;
    }

    // x may lie in the (cyclic) red part; y always descends the untouched blue subtree.
    bool compatible(std::uint32_t x, std::uint32_t y) const {
        const auto& fx = nodes_[x].freq;
        const auto& fy = nodes_[y].freq;
        if (fx.total() > 0 && fy.total() > 0 && !hoeffding_compatible(fx, fy, alpha_)) return false;
        for (const auto& [sym, yc] : nodes_[y].children) {
            auto it = nodes_[x].children.find(sym);
            if (it != nodes_[x].children.end() && !compatible(it->second, yc)) return false;
        }
        return true;
    }

    void fold(std::uint32_t r, std::uint32_t q) {
        nodes_[r].freq += nodes_[q].freq;
        for (const auto& [sym, qc] : nodes_[q].children) {
            auto it = nodes_[r].children.find(sym);
            if (it != nodes_[r].children.end()) {
                fold(it->second, qc);
            } else {
                nodes_[r].children[sym] = qc;
            }
        }
        nodes_[q].alive = false;
        nodes_[q].children.clear();
    }

    Fdfa compact() const {
        Fdfa out;
        std::vector<std::optional<StateId>> id(nodes_.size());
        std::vector<std::uint32_t> order{0};
        id[0] = kRoot;
        for (std::size_t head = 0; head < order.size(); ++head) {
            for (const auto& [sym, child] : nodes_[order[head]].children) {
                if (!id[child]) {
                    id[child] = out.add_state(nodes_[child].access);
                    order.push_back(child);
                }
            }
        }
        for (std::uint32_t n : order) {
            out.freq(*id[n]) = nodes_[n].freq;
            for (const auto& [sym, child] : nodes_[n].children) out.set_transition(*id[n], sym, *id[child]);
        }
        return out;
    }

    double alpha_;
    std::vector<Node> nodes_;
};

}  // namespace

Fdfa alergia(const Fdfa& fpt, AlergiaConfig cfg) {
    cfg.validate();
    require_tree(fpt);
    return RedBlueMerger(fpt, cfg.alpha).run();
}

std::optional<Distribution> predict_with_backoff(const Fdfa& a, std::span<const Symbol> w) {
    for (std::size_t k = w.size() + 1; k-- > 0;) {
        auto s = extended_delta(a, a.root(), w.subspan(w.size() - k));
        if (s && a.freq(*s).total() > 0) return distribution_of(a, *s);
    }
    return std::nullopt;
}

}  // namespace streampredict
