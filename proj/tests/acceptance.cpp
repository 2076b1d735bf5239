// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "streampredict/run_config.hpp"
#include "support.hpp"

using namespace streampredict;
using testing::reference_log;
using testing::state_at;
using testing::sym;
using testing::word;

namespace {

constexpr double kStreamingTolPp = 1.5;
constexpr double kBatchTolPp = 2.5;
constexpr double kStateTolFraction = 0.10;
constexpr double kAutomatonLatencyMs = 1.0;
constexpr double kSoftLatencyMs = 2.0;
constexpr double kGoldenSeconds = 1.0;
constexpr double kEquivalenceSeconds = 10.0;
constexpr int kRandomLogs = 1000;

struct Target {
    const char* model;
    double accuracy_pct;
};

constexpr Target kSepsisStreaming[] = {{"FPT", 42.84},     {"bag", 57.95},  {"3-gram", 57.76}, {"5-gram", 60.37},
                                       {"fallback", 60.40}, {"soft", 64.80}, {"hard", 63.68},   {"adaptive", 60.37}};
constexpr Target kSepsisBatch[] = {{"3-gram", 57.78}, {"5-gram", 61.81}, {"soft", 64.20}, {"FPT", 43.26}, {"bag", 56.61}};
constexpr double kSepsisBatch3gramStates = 127;
constexpr Target kBpi2013Streaming = {"3-gram", 67.17};

const std::filesystem::path kSource = STREAMPREDICT_SOURCE_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v, int decimals = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t mass(const Fdfa& a) {
    std::uint64_t m = 0;
    for (std::uint32_t i = 0; i < a.state_count(); ++i) m += a.freq(StateId{i}).total();
    return m;
}

bool counts(const Fdfa& a, std::string_view at, std::uint64_t stop, std::uint64_t ca, std::uint64_t cb) {
    const auto s = extended_delta(a, a.root(), word(at));
    return s && a.freq(*s).count(kStop) == stop && a.freq(*s).count(sym('a')) == ca && a.freq(*s).count(sym('b')) == cb;
}

Outcome golden() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto log = reference_log();
    const auto fpt = build_fpt(log);
    o.require(fpt.state_count() == 11, "prefix tree has 11 states");
    o.require(counts(fpt, "", 0, 13, 17) && counts(fpt, "a", 5, 8, 0) && counts(fpt, "aa", 3, 4, 1) &&
                  counts(fpt, "aaa", 3, 1, 0) && counts(fpt, "aaaa", 1, 0, 0) && counts(fpt, "aab", 1, 0, 0) &&
                  counts(fpt, "b", 9, 1, 7) && counts(fpt, "ba", 1, 0, 0) && counts(fpt, "bb", 5, 1, 1) &&
                  counts(fpt, "bba", 1, 0, 0) && counts(fpt, "bbb", 1, 0, 0),
              "prefix tree counts");

    const auto g = build_ngram(log, NGramConfig{3});
    o.require(g.state_count() == 7 && g.transition_count() == 10, "3-gram has 7 states and 10 edges");
    o.require(counts(g, "", 0, 13, 17) && counts(g, "a", 5, 8, 0) && counts(g, "aa", 7, 5, 1) && counts(g, "ab", 1, 0, 0) &&
                  counts(g, "b", 9, 1, 7) && counts(g, "ba", 2, 0, 0) && counts(g, "bb", 6, 1, 1),
              "3-gram counts");
    const auto ab = g.successor(state_at(g, "a"), sym('b'));
    o.require(ab && g.access(*ab) == word("ab") && g.freq(state_at(g, "a")).count(sym('b')) == 0, "zero-frequency edge a -b-> ab");
    o.require(g.successor(state_at(g, "aa"), sym('a')) == state_at(g, "aa") &&
                  g.successor(state_at(g, "bb"), sym('b')) == state_at(g, "bb"),
              "3-gram self loops");

    const auto aa = state_at(g, "aa");
    const auto bb = state_at(g, "bb");
    o.require(exact_probability(g, g.root(), sym('a')) == Ratio{13, 30} && exact_probability(g, g.root(), sym('b')) == Ratio{17, 30},
              "root {13/30, 17/30}");
    o.require(exact_probability(g, aa, kStop) == Ratio{7, 13} && exact_probability(g, aa, sym('a')) == Ratio{5, 13} &&
                  exact_probability(g, aa, sym('b')) == Ratio{1, 13},
              "aa {7/13, 5/13, 1/13}");
    o.require(exact_probability(g, bb, kStop) == Ratio{3, 4} && exact_probability(g, bb, sym('a')) == Ratio{1, 8} &&
                  exact_probability(g, bb, sym('b')) == Ratio{1, 8},
              "bb {3/4, 1/8, 1/8}");
    const double secs = seconds_since(t0);
    o.require(secs < kGoldenSeconds, "runtime under 1 s");
    o.note("11-state prefix tree, 7-state 3-gram, exact rationals, " + fmt(secs * 1000, 1) + " ms");
    return o;
}

Outcome worked_update() {
    Outcome o;
    StreamingAutomaton sa("3-gram", AutomatonKind::kNGram, build_ngram(reference_log(), NGramConfig{3}), NGramConfig{3});
    const auto& a = sa.automaton();
    const auto s = state_at(a, "a");
    sa.tracker().assign("123", s);
    sa.tracker().assign("453", state_at(a, "b"));
    sa.tracker().assign("721", state_at(a, "ab"));
    sa.update(Event{"123", sym('a')});
    const auto next = a.successor(s, sym('a'));
    const auto stop = a.freq(s).count(kStop);
    const auto fa = a.freq(s).count(sym('a'));
    const auto next_stop = next ? a.freq(*next).count(kStop) : 0;
    o.require(stop == 4, "f(s)(stop) = 4");
    o.require(fa == 9, "f(s)(a) = 9");
    o.require(next_stop == 8, "f(delta(s,a))(stop) = 8");
    o.note("f(s)(stop)=" + std::to_string(stop) + " f(s)(a)=" + std::to_string(fa) +
           " f(delta(s,a))(stop)=" + std::to_string(next_stop));
    return o;
}

Outcome streaming_batch_equivalence() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(424242);
    int mismatches = 0;
    for (int trial = 0; trial < kRandomLogs; ++trial) {
        const auto log = testing::random_log(rng);
        const auto events = testing::interleave(log, rng);
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 5);
        StreamingAutomaton g("g", AutomatonKind::kNGram, NGramConfig{n});
        StreamingAutomaton t("t", AutomatonKind::kPrefixTree);
        StreamingAutomaton b("b", AutomatonKind::kBag);
        for (const auto& e : events) {
            g.update(e);
            t.update(e);
            b.update(e);
        }
        if (!same_labelled_automaton(g.automaton(), build_ngram(log, NGramConfig{n}))) ++mismatches;
        if (!same_labelled_automaton(t.automaton(), build_fpt(log))) ++mismatches;
        if (!same_labelled_automaton(b.automaton(), build_bag(log))) ++mismatches;
    }
    const double secs = seconds_since(t0);
    o.require(mismatches == 0, std::to_string(mismatches) + " mismatching automata");
    o.require(secs < kEquivalenceSeconds, "runtime under 10 s");
    o.note(std::to_string(kRandomLogs) + " random logs x {n-gram, prefix tree, bag}, n in 1..5, " + fmt(secs, 2) + " s");
    return o;
}

Outcome ngram_fold() {
    Outcome o;
    std::mt19937_64 rng(777);
    int mismatches = 0;
    for (int trial = 0; trial < kRandomLogs; ++trial) {
        const auto log = testing::random_log(rng);
        const auto fpt = build_fpt(log);
        for (std::size_t n = 1; n <= 5; ++n) {
            if (!same_labelled_automaton(build_ngram(log, NGramConfig{n}), fold_fpt_to_ngram(fpt, NGramConfig{n}))) ++mismatches;
        }
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
    o.note(std::to_string(kRandomLogs * 5) + " (log, n) pairs");
    return o;
}

struct Loaded {
    RunConfig cfg;
    std::vector<Event> events;
};

std::optional<Loaded> load(const std::string& config, Outcome& o, const std::vector<std::string>& overrides = {}) {
    try {
        Loaded l{load_run_config(kSource / "configs" / config, overrides), {}};
        Alphabet alphabet(l.cfg.dataset.sentinels);
        l.events = load_event_stream(l.cfg.dataset, alphabet);
        return l;
    } catch (const std::exception& e) {
        o.require(false, std::string("cannot load ") + config + ": " + e.what());
        return std::nullopt;
    }
}

void compare(Outcome& o, const EvalReport& r, std::span<const Target> targets, double tol) {
    for (const auto& t : targets) {
        const auto* row = r.find(t.model);
        if (!row) {
            o.require(false, std::string(t.model) + " missing");
            continue;
        }
        const double got = 100.0 * row->accuracy;
        const bool ok = std::abs(got - t.accuracy_pct) <= tol;
        o.require(ok, std::string(t.model) + " " + fmt(got) + " vs " + fmt(t.accuracy_pct));
        if (ok) o.note(std::string(t.model) + " " + fmt(got) + " (" + fmt(t.accuracy_pct) + ")");
    }
}

EvalReport g_sepsis_streaming;

Outcome sepsis_streaming() {
    Outcome o;
    auto l = load("sepsis-stream.toml", o);
    if (!l) return o;
    o.require(l->events.size() == 15214, "15,214 events (got " + std::to_string(l->events.size()) + ")");
    g_sepsis_streaming = run_streaming(l->cfg, l->events).report;
    compare(o, g_sepsis_streaming, kSepsisStreaming, kStreamingTolPp);
    return o;
}

EvalReport g_sepsis_batch;

Outcome sepsis_batch() {
    Outcome o;
    auto l = load("sepsis-batch.toml", o);
    if (!l) return o;
    o.require(l->cfg.runs == 5, "5 seeded runs");
    g_sepsis_batch = run_batch(l->cfg, log_from_stream(l->events)).mean;
    compare(o, g_sepsis_batch, kSepsisBatch, kBatchTolPp);
    if (const auto* g = g_sepsis_batch.find("3-gram"); g && g->states) {
        const bool ok = std::abs(*g->states - kSepsisBatch3gramStates) <= kStateTolFraction * kSepsisBatch3gramStates;
        o.require(ok, "3-gram states " + fmt(*g->states, 1) + " vs 127");
        if (ok) o.note("3-gram states " + fmt(*g->states, 1) + " (127)");
    } else {
        o.require(false, "3-gram state count missing");
    }
    return o;
}

Outcome bpi2013() {
    Outcome o;
    auto l = load("bpi2013-stream.toml", o, {"models=3-gram"});
    if (!l) return o;
    const auto r = run_streaming(l->cfg, l->events).report;
    compare(o, r, std::span(&kBpi2013Streaming, 1), kStreamingTolPp);
    return o;
}

Outcome latency() {
    Outcome o;
    if (g_sepsis_streaming.models.empty()) {
        o.require(false, "no streaming results");
        return o;
    }
    for (const auto& m : g_sepsis_streaming.models) {
        double bound = 0;
        if (m.states) {
            bound = kAutomatonLatencyMs;
        } else if (m.model == "soft") {
            bound = kSoftLatencyMs;
        } else {
            continue;
        }
        o.require(m.mean_latency_ms < bound, m.model + " " + fmt(m.mean_latency_ms, 4) + " ms");
    }
    double worst = 0;
    for (const auto& m : g_sepsis_streaming.models) {
        if (m.states) worst = std::max(worst, m.mean_latency_ms);
    }
    if (const auto* soft = g_sepsis_streaming.find("soft")) {
        o.note("slowest automaton " + fmt(worst, 4) + " ms, soft voting " + fmt(soft->mean_latency_ms, 4) + " ms per event");
    }
    return o;
}

Outcome alergia_structure() {
    Outcome o;
    std::mt19937_64 rng(31337);
    int violations = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const auto log = testing::random_log(rng);
        const auto fpt = build_fpt(log);
        for (double alpha : {0.01, 0.3, 0.9}) {
            const auto merged = alergia(fpt, AlergiaConfig{alpha});
            if (!same_labelled_automaton(merged, alergia(fpt, AlergiaConfig{alpha}))) ++violations;
            if (merged.state_count() > fpt.state_count()) ++violations;
            if (mass(merged) != mass(fpt)) ++violations;
            if (!validate_fdfa(merged).empty()) ++violations;
        }
    }
    o.require(violations == 0, std::to_string(violations) + " property violations");

    EventLog sym_log;
    sym_log.add(word("ac"), 6);
    sym_log.add(word("acc"), 2);
    sym_log.add(word("bc"), 6);
    sym_log.add(word("bcc"), 2);
    const auto fpt = build_fpt(sym_log);
    const auto collapsed = alergia(fpt, AlergiaConfig{1e-9});
    o.require(collapsed.successor(collapsed.root(), sym('a')) == collapsed.successor(collapsed.root(), sym('b')) &&
                  collapsed.state_count() < fpt.state_count(),
              "symmetric subtrees collapse as alpha -> 0");
    o.note("determinism, mass conservation, state bound on 900 runs; symmetric collapse " +
           std::to_string(fpt.state_count()) + " -> " + std::to_string(collapsed.state_count()) + " states");
    if (const auto* a = g_sepsis_batch.find("Alergia")) {
        o.note("informative: Sepsis batch Alergia " + fmt(100.0 * a->accuracy) + "% with " + fmt(a->states.value_or(0), 1) +
               " states");
    }
    return o;
}

PredictorPtr fixed(std::optional<Distribution> d) {
    return std::make_unique<CallbackPredictor>("fixed", [](const Event&) {}, [d](std::string_view) { return d; });
}

template <typename... P>
std::vector<PredictorPtr> members(P&&... p) {
    std::vector<PredictorPtr> v;
    (v.push_back(std::forward<P>(p)), ...);
    return v;
}

Outcome ensemble_algebra() {
    Outcome o;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool soft_ok = true;
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + trial % 4;
        std::vector<double> expected(3, 0.0);
        std::vector<PredictorPtr> ms;
        for (int m = 0; m < k; ++m) {
            std::vector<double> p(3);
            double total = 0;
            for (double& x : p) total += (x = u(rng));
            std::vector<Distribution::Entry> entries;
            for (std::uint32_t s = 0; s < 3; ++s) {
                entries.emplace_back(Symbol{kFirstActivity + s}, p[s] / total);
                expected[s] += p[s] / total / k;
            }
            ms.push_back(fixed(Distribution(std::move(entries))));
        }
        ms.push_back(fixed(std::nullopt));
        SoftVote soft("soft", std::move(ms));
        const auto d = soft.query("x");
        for (std::uint32_t s = 0; s < 3; ++s) {
            if (!d || std::abs(d->prob(Symbol{kFirstActivity + s}) - expected[s]) > 1e-12) soft_ok = false;
        }
    }
    o.require(soft_ok, "soft vote is the mean of answering members");

    HardVote plural("hard", members(fixed(Distribution::dirac(sym('a'))), fixed(Distribution::dirac(sym('c'))),
                                    fixed(Distribution::dirac(sym('c')))),
                    OutcomePolicy::kWithStop);
    HardVote tied("hard", members(fixed(Distribution::dirac(sym('c'))), fixed(Distribution::dirac(sym('b')))),
                  OutcomePolicy::kWithStop);
    o.require(*plural.query("x") == Distribution::dirac(sym('c')), "hard vote plurality");
    o.require(*tied.query("x") == Distribution::dirac(sym('b')), "hard vote tie to smallest symbol");

    EventLog ten;
    ten.add(word("a"), 10);
    auto fpt = std::make_shared<const Fdfa>(build_fpt(ten));
    const auto secondary = Distribution::dirac(sym('b'));
    Fallback at("fb", std::make_unique<FrozenAutomaton>("fpt", fpt, false), fixed(secondary), 10);
    Fallback above("fb", std::make_unique<FrozenAutomaton>("fpt", fpt, false), fixed(secondary), 11);
    o.require(*at.query("x") == Distribution::dirac(sym('a')), "fallback uses primary at exactly min_visits");
    o.require(*above.query("x") == secondary, "fallback uses secondary below min_visits");

    bool transparent = true;
    for (int trial = 0; trial < 30; ++trial) {
        const auto log = testing::random_log(rng);
        const auto events = testing::interleave(log, rng);
        auto make = [] {
            return members(std::make_unique<StreamingAutomaton>("t", AutomatonKind::kPrefixTree),
                           std::make_unique<StreamingAutomaton>("b", AutomatonKind::kBag),
                           std::make_unique<StreamingAutomaton>("g", AutomatonKind::kNGram, NGramConfig{3}));
        };
        auto alone = make();
        SoftVote soft("soft", make());
        for (const auto& e : events) {
            for (auto& m : alone) m->update(e);
            soft.update(e);
            for (std::size_t i = 0; i < alone.size(); ++i) {
                const auto x = soft.member(i).query(e.case_id);
                const auto y = alone[i]->query(e.case_id);
                if (x.has_value() != y.has_value() || (x && !(*x == *y))) transparent = false;
            }
        }
    }
    o.require(transparent, "member updates are transparent");
    o.note("soft mean, hard plurality and tie-break, fallback boundary, member transparency");
    return o;
}

Outcome pipeline_runtime() {
    using namespace pipeline;
    Outcome o;

    constexpr std::int64_t kItems = 100'000;
    auto stream = DataStream::create("writer", StreamOptions{1024, false});
    std::vector<StreamReader> readers;
    for (int i = 0; i < 4; ++i) readers.push_back(stream->reader());
    std::atomic<int> bad{0};
    {
        std::vector<std::jthread> threads;
        for (auto& r : readers) {
            threads.emplace_back([&bad, reader = std::move(r)]() mutable {
                std::int64_t expected = 0;
                while (auto item = reader.next()) {
                    if (item->seq != static_cast<std::uint64_t>(expected) || item->get<std::int64_t>("v") != expected) ++bad;
                    ++expected;
                }
                if (expected != kItems) ++bad;
            });
        }
        for (std::int64_t i = 0; i < kItems; ++i) stream->append(DataItem({{"v", i}}));
        stream->close();
    }
    o.require(bad == 0, "FIFO prefix consistency under 4 concurrent readers");

    std::vector<DataItem> items;
    for (std::int64_t i = 0; i < 500; ++i) items.push_back(DataItem({{"v", i}}));
    auto tag = std::make_shared<MapTerm>("tag", [](const DataItem& item) {
        DataItem out = item;
        out.fields["tag"] = true;
        return std::vector<DataItem>{out};
    });
    auto negate = std::make_shared<MapTerm>("negate", [](const DataItem& item) {
        DataItem out = item;
        out.fields["v"] = -item.get<std::int64_t>("v");
        return std::vector<DataItem>{out};
    });
    auto left = std::make_shared<CollectSink>("left");
    auto right = std::make_shared<CollectSink>("right");
    auto handle = run_pipeline(std::make_shared<VectorSource>(items) * ((tag * left) | (negate * right)));
    handle.join();
    const auto lefts = left->items();
    const auto rights = right->items();
    bool isolated = lefts.size() == 500 && rights.size() == 500;
    for (std::size_t i = 0; isolated && i < 500; ++i) {
        const auto& l = lefts[i];
        const auto& r = rights[i];
        const auto v = static_cast<std::int64_t>(i);
        isolated = l.get<std::int64_t>("v") == v && r.get<std::int64_t>("v") == -v && !r.has("tag") && l.has("tag");
    }
    o.require(isolated, "parallel branch isolation");

    std::optional<Symbol> last;
    CallbackPredictor canary(
        "canary", [&](const Event& e) { last = e.activity; },
        [&](std::string_view) -> std::optional<Distribution> {
            if (!last) return std::nullopt;
            return Distribution::dirac(*last);
        });
    std::vector<Event> alternating;
    for (int i = 0; i < 100; ++i) alternating.push_back(Event{"1", sym(i % 2 == 0 ? 'a' : 'b')});
    const auto r = evaluate_events({&canary}, alternating, ScoringRules{OutcomePolicy::kWithStop, false, false}).report;
    o.require(r.models[0].predictions == 100 && r.models[0].correct == 0, "query-before-update canary");
    o.note("4 readers x 100k items, branch isolation, canary accuracy " + fmt(100.0 * r.models[0].accuracy) + "%");
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "reference-log goldens", golden},
        {2, "worked streaming update", worked_update},
        {3, "streaming/batch equivalence", streaming_batch_equivalence},
        {4, "n-gram construction = prefix-tree fold", ngram_fold},
        {5, "Sepsis streaming accuracy (+/-1.5 pp)", sepsis_streaming},
        {6, "Sepsis batch accuracy (+/-2.5 pp, states +/-10%)", sepsis_batch},
        {7, "BPI 2013 streaming 3-gram (+/-1.5 pp)", bpi2013},
        {8, "latency per event (automata < 1 ms, soft < 2 ms)", latency},
        {9, "Alergia structure", alergia_structure},
        {10, "ensemble algebra", ensemble_algebra},
        {11, "pipeline runtime", pipeline_runtime},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << c.id << "  " << c.title << "  ["
                  << fmt(seconds_since(t0), 2) << " s]  " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
