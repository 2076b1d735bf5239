#include "streampredict/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace streampredict {

void SplitSpec::validate() const {
    if (train < 0 || val < 0 || test < 0) throw std::invalid_argument("split fractions must be non-negative");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
}

LogSplit split_log(const EventLog& log, const SplitSpec& spec) {
    spec.validate();
    const std::uint64_t n = log.case_count();
    if (n < 3) throw std::invalid_argument("splitting needs at least 3 cases");
    std::vector<const Word*> cases;
    cases.reserve(n);
    for (const auto& [w, m] : log.entries()) {
        for (std::uint64_t i = 0; i < m; ++i) cases.push_back(&w);
    }
    std::mt19937_64 rng(spec.seed);
    std::shuffle(cases.begin(), cases.end(), rng);

    // The epsilon keeps 0.7 * 30 from flooring to 20.
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(n) + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val * static_cast<double>(n) + 1e-9));
    LogSplit out;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        EventLog& target = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
        target.add(*cases[i]);
    }
    return out;
}

const ModelReport* EvalReport::find(const std::string& name) const {
    for (const auto& m : models) {
        if (m.model == name) return &m;
    }
    return nullptr;
}

ModelReport summarize(const std::string& model, std::span<const Verdict> verdicts, std::optional<double> states) {
    ModelReport r;
    r.model = model;
    r.states = states;
    r.predictions = verdicts.size();
    r.rolling_accuracy.reserve(verdicts.size());
    PredictorStats stats;
    for (const auto& v : verdicts) {
        if (v.correct) ++r.correct;
        r.rolling_accuracy.push_back(static_cast<double>(r.correct) / static_cast<double>(r.rolling_accuracy.size() + 1));
        stats.record(v.latency_ms);
    }
    r.accuracy = r.predictions == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.predictions);
    r.mean_latency_ms = stats.mean_latency_ms();
    r.median_latency_ms = stats.median_latency_ms();
    return r;
}

namespace pipeline_terms {

using pipeline::DataItem;
using pipeline::Emitter;

DataItem event_item(const Event& e) {
    DataItem item;
    item.fields.emplace("case_id", e.case_id);
    item.fields.emplace("activity", static_cast<std::int64_t>(e.activity.index));
    return item;
}

Event item_event(const DataItem& item) {
    return Event{item.get<std::string>("case_id"), Symbol{static_cast<std::uint32_t>(item.get<std::int64_t>("activity"))}};
}

void AddStartSymbol::process(const DataItem& item, Emitter& out) {
    const auto& case_id = item.get<std::string>("case_id");
    const auto activity = item.get<std::int64_t>("activity");
    if (activity != kInit.index && seen_.insert(case_id).second) {
        DataItem init = item;
        init.fields["activity"] = static_cast<std::int64_t>(kInit.index);
        out.emit(std::move(init));
    }
    out.emit(item);
}

PredictorTerm::PredictorTerm(Predictor& model, OutcomePolicy policy)
    : FunctionTerm("predict:" + model.name()), model_(model), policy_(policy) {}

void PredictorTerm::process(const DataItem& item, Emitter& out) {
    const Event e = item_event(item);
    if (e.activity == kInit) {
        model_.update(e);
        return;
    }
    const auto start = std::chrono::steady_clock::now();
    auto d = model_.query(e.case_id);
    std::optional<Symbol> guess;
    if (d) guess = predicted_outcome(*d, policy_);
    if (e.activity != kStop) model_.update(e);
    const auto stop = std::chrono::steady_clock::now();

    DataItem verdict;
    verdict.ingested = item.ingested;
    verdict.fields.emplace("model", model_.name());
    verdict.fields.emplace("index", static_cast<std::int64_t>(++scored_));
    verdict.fields.emplace("actual", static_cast<std::int64_t>(e.activity.index));
    verdict.fields.emplace("predicted", guess ? pipeline::Value(static_cast<std::int64_t>(guess->index)) : pipeline::Value{});
    verdict.fields.emplace("correct", guess && *guess == e.activity);
    verdict.fields.emplace("latency_ms", std::chrono::duration<double, std::milli>(stop - start).count());
    out.emit(std::move(verdict));
}

void EvaluationTerm::process(const DataItem& item, Emitter& out) {
    ++seen_;
    if (item.get<bool>("correct")) ++correct_;
    DataItem next = item;
    next.fields["rolling_accuracy"] = static_cast<double>(correct_) / static_cast<double>(seen_);
    out.emit(std::move(next));
}

}  // namespace pipeline_terms

EvaluationRun evaluate_events(const std::vector<Predictor*>& models, std::span<const Event> stream, ScoringRules rules) {
    using namespace pipeline;
    namespace terms = pipeline_terms;

    std::vector<DataItem> items;
    items.reserve(stream.size());
    for (const Event& e : stream) items.push_back(terms::event_item(e));

    EvaluationRun run;
    if (models.empty()) return run;

    TermPtr upstream = std::make_shared<VectorSource>(std::move(items), "events");
    if (rules.inject_init) upstream = upstream * std::make_shared<terms::AddStartSymbol>();

    std::vector<std::shared_ptr<CollectSink>> sinks;
    TermPtr fan;
    for (Predictor* m : models) {
        if (!m) throw std::invalid_argument("null model");
        auto sink = std::make_shared<CollectSink>("collect:" + m->name());
        sinks.push_back(sink);
        TermPtr branch = std::make_shared<terms::PredictorTerm>(*m, rules.policy) *
                         std::make_shared<terms::EvaluationTerm>(m->name()) * sink;
        fan = fan ? (fan | branch) : branch;
    }
    auto handle = run_pipeline(upstream * fan);
    handle.join();

    for (std::size_t i = 0; i < models.size(); ++i) {
        std::vector<Verdict> verdicts;
        for (const auto& item : sinks[i]->items()) {
            Verdict v;
            v.index = static_cast<std::uint64_t>(item.get<std::int64_t>("index"));
            v.actual = Symbol{static_cast<std::uint32_t>(item.get<std::int64_t>("actual"))};
            if (const auto* p = std::get_if<std::int64_t>(&item.fields.at("predicted"))) {
                v.predicted = Symbol{static_cast<std::uint32_t>(*p)};
            }
            v.correct = item.get<bool>("correct");
            v.latency_ms = item.get<double>("latency_ms");
            verdicts.push_back(v);
        }
        std::optional<double> states;
        if (auto n = models[i]->state_count()) states = static_cast<double>(*n);
        run.report.models.push_back(summarize(models[i]->name(), verdicts, states));
        if (rules.keep_verdicts) run.verdicts.push_back(std::move(verdicts));
    }
    return run;
}

EvalReport evaluate_streaming(const std::vector<Predictor*>& models, std::span<const Event> stream) {
    return evaluate_events(models, stream, ScoringRules{OutcomePolicy::kActivitiesOnly, true, false}).report;
}

std::vector<Event> batch_test_events(const EventLog& test) {
    std::vector<Event> events;
    std::uint64_t n = 0;
    for (const auto& [w, m] : test.entries()) {
        for (std::uint64_t copy = 0; copy < m; ++copy) {
            std::string id = "test-" + std::to_string(n++);
            for (Symbol s : w) events.push_back(Event{id, s});
            events.push_back(Event{id, kStop});
        }
    }
    return events;
}

EvalReport evaluate_batch(const std::vector<Predictor*>& models, const EventLog& test) {
    const auto events = batch_test_events(test);
    return evaluate_events(models, events, ScoringRules{OutcomePolicy::kWithStop, false, false}).report;
}

ModelReport evaluate_batch(Predictor& model, const EventLog& test) { return evaluate_batch({&model}, test).models.front(); }

EvalReport aggregate_runs(const std::vector<EvalReport>& runs) {
    EvalReport out;
    if (runs.empty()) return out;
    for (const auto& first : runs.front().models) {
        std::vector<const ModelReport*> rows;
        for (const auto& run : runs) {
            const auto* row = run.find(first.model);
            if (!row) throw std::invalid_argument("model '" + first.model + "' missing from a run");
            rows.push_back(row);
        }
        ModelReport agg;
        agg.model = first.model;
        agg.runs = rows.size();
        double acc_sum = 0, lat_sum = 0, med_sum = 0, states_sum = 0;
        bool all_states = true;
        for (const auto* r : rows) {
            agg.predictions += r->predictions;
            agg.correct += r->correct;
            acc_sum += r->accuracy;
            lat_sum += r->mean_latency_ms;
            med_sum += r->median_latency_ms;
            if (r->states) {
                states_sum += *r->states;
            } else {
                all_states = false;
            }
        }
        const double k = static_cast<double>(rows.size());
        agg.accuracy = acc_sum / k;
        agg.mean_latency_ms = lat_sum / k;
        agg.median_latency_ms = med_sum / k;
        if (all_states) agg.states = states_sum / k;
        if (rows.size() > 1) {
            double ss = 0;
            for (const auto* r : rows) ss += (r->accuracy - agg.accuracy) * (r->accuracy - agg.accuracy);
            agg.accuracy_stddev = std::sqrt(ss / (k - 1));
        }
        out.models.push_back(std::move(agg));
    }
    return out;
}

namespace {

std::string fixed(double v, int decimals) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << v;
    return os.str();
}

std::string states_cell(const std::optional<double>& states) {
    if (!states) return "N/A";
    if (*states == std::floor(*states)) return fixed(*states, 0);
    return fixed(*states, 1);
}

}  // namespace

void write_table(std::ostream& os, const EvalReport& r, bool include_latency) {
    os << "model\taccuracy_pct\tstates\tmean_latency_ms\n";
    for (const auto& m : r.models) {
        os << m.model << '\t' << (m.predictions == 0 ? "N/A" : fixed(100.0 * m.accuracy, 2)) << '\t'
           << states_cell(m.states) << '\t' << (include_latency ? fixed(m.mean_latency_ms, 2) : "-") << '\n';
    }
}

void write_curve(std::ostream& os, const EvalReport& r) {
    os << "event_index,model,rolling_accuracy\n";
    for (const auto& m : r.models) {
        std::string name = m.model;
        if (name.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : name) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            name = quoted + "\"";
        }
        for (std::size_t i = 0; i < m.rolling_accuracy.size(); ++i) {
            os << (i + 1) << ',' << name << ',' << fixed(m.rolling_accuracy[i], 6) << '\n';
        }
    }
}

void emit_report(const EvalReport& r, const std::filesystem::path& out, ReportFormat format) {
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    std::ofstream os(out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + out.string() + "'");
    if (format == ReportFormat::kTable) {
        write_table(os, r);
    } else {
        write_curve(os, r);
    }
    if (!os) throw std::runtime_error("write failed for '" + out.string() + "'");
}

}  // namespace streampredict
