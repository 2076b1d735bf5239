#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "streampredict/batch_learners.hpp"
#include "streampredict/dataset.hpp"
#include "streampredict/run_config.hpp"
#include "streampredict/streaming.hpp"

namespace py = pybind11;
using namespace streampredict;

namespace {

using Sequences = std::vector<std::vector<std::string>>;
using Probabilities = std::map<std::string, double>;

std::shared_ptr<Alphabet> new_alphabet() { return std::make_shared<Alphabet>(); }

EventLog to_log(Alphabet& alphabet, const Sequences& sequences) {
    EventLog log;
    for (const auto& seq : sequences) {
        Word w;
        for (const auto& a : seq) w.push_back(alphabet.intern(a));
        log.add(std::move(w));
    }
    return log;
}

Probabilities to_dict(const Alphabet& alphabet, const Distribution& d) {
    Probabilities out;
    for (const auto& [s, p] : d.entries()) out[alphabet.name(s)] = p;
    return out;
}

// An automaton bundled with the alphabet that labels it.
struct Automaton {
    std::shared_ptr<Alphabet> alphabet;
    std::shared_ptr<const Fdfa> fdfa;

    std::optional<Probabilities> predict(const std::vector<std::string>& prefix, bool backoff) const {
        Word w;
        for (const auto& a : prefix) {
            auto s = alphabet->find(a);
            if (!s) {
                if (!backoff) return std::nullopt;
                s = Symbol{static_cast<std::uint32_t>(kFirstActivity + alphabet->activity_count())};
            }
            w.push_back(*s);
        }
        auto d = backoff ? predict_with_backoff(*fdfa, w) : streampredict::predict(*fdfa, w);
        if (!d) return std::nullopt;
        return to_dict(*alphabet, *d);
    }

    std::string to_text() const {
        std::ostringstream os;
        write_fdfa_text(os, *fdfa, *alphabet);
        return os.str();
    }
};

Automaton wrap(std::shared_ptr<Alphabet> alphabet, Fdfa a) {
    return Automaton{std::move(alphabet), std::make_shared<const Fdfa>(std::move(a))};
}

class StreamingModel {
public:
    StreamingModel(const std::string& kind, std::size_t n, std::size_t max_cases)
        : alphabet_(new_alphabet()), model_(kind, parse_kind(kind), NGramConfig{n}, max_cases) {}

    void update(const std::string& case_id, const std::string& activity) {
        model_.update(Event{case_id, alphabet_->intern(activity)});
    }

    std::optional<Probabilities> query(const std::string& case_id) const {
        auto d = model_.query(case_id);
        if (!d) return std::nullopt;
        return to_dict(*alphabet_, *d);
    }

    std::optional<std::string> predict(const std::string& case_id) const {
        auto d = model_.query(case_id);
        if (!d) return std::nullopt;
        auto s = predicted_outcome(*d, OutcomePolicy::kActivitiesOnly);
        if (!s) return std::nullopt;
        return alphabet_->name(*s);
    }

    Automaton snapshot() const { return wrap(alphabet_, model_.automaton()); }
    std::size_t state_count() const { return model_.automaton().state_count(); }

private:
    static AutomatonKind parse_kind(const std::string& kind) {
        if (kind == "fpt") return AutomatonKind::kPrefixTree;
        if (kind == "ngram") return AutomatonKind::kNGram;
        if (kind == "bag") return AutomatonKind::kBag;
        throw std::invalid_argument("unknown automaton kind '" + kind + "' (expected fpt, ngram or bag)");
    }

    std::shared_ptr<Alphabet> alphabet_;
    StreamingAutomaton model_;
};

py::dict report_row(const ModelReport& r) {
    py::dict row;
    row["model"] = r.model;
    row["accuracy"] = r.accuracy;
    row["accuracy_stddev"] = r.accuracy_stddev;
    row["predictions"] = r.predictions;
    row["correct"] = r.correct;
    row["states"] = r.states;
    row["mean_latency_ms"] = r.mean_latency_ms;
    row["runs"] = r.runs;
    return row;
}

py::list run(const std::filesystem::path& config, const std::vector<std::string>& overrides) {
    const auto cfg = load_run_config(config, overrides);
    EvalReport report;
    {
        py::gil_scoped_release release;
        Alphabet alphabet(cfg.dataset.sentinels);
        const auto events = load_event_stream(cfg.dataset, alphabet);
        report = cfg.mode == RunMode::kStreaming ? run_streaming(cfg, events).report : run_batch(cfg, log_from_stream(events)).mean;
    }
    py::list rows;
    for (const auto& m : report.models) rows.append(report_row(m));
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Next-activity prediction with frequency automata";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DatasetError>(m, "DatasetError", PyExc_ValueError);

    py::class_<Automaton>(m, "Automaton")
        .def_property_readonly("state_count", [](const Automaton& a) { return a.fdfa->state_count(); })
        .def_property_readonly("transition_count", [](const Automaton& a) { return a.fdfa->transition_count(); })
        .def("predict", &Automaton::predict, py::arg("prefix"), py::arg("backoff") = false,
             "Next-symbol distribution after `prefix`; None if the prefix leaves the automaton or hits an empty state.")
        .def("validate", [](const Automaton& a) { return validate_fdfa(*a.fdfa); })
        .def("to_text", &Automaton::to_text)
        .def("__repr__", [](const Automaton& a) {
            return "<Automaton states=" + std::to_string(a.fdfa->state_count()) +
                   " transitions=" + std::to_string(a.fdfa->transition_count()) + ">";
        });

    m.def(
        "build_fpt", [](const Sequences& log) {
            auto alphabet = new_alphabet();
            return wrap(alphabet, build_fpt(to_log(*alphabet, log)));
        },
        py::arg("log"));
    m.def(
        "build_ngram", [](const Sequences& log, std::size_t n) {
            auto alphabet = new_alphabet();
            return wrap(alphabet, build_ngram(to_log(*alphabet, log), NGramConfig{n}));
        },
        py::arg("log"), py::arg("n"));
    m.def(
        "build_bag", [](const Sequences& log) {
            auto alphabet = new_alphabet();
            return wrap(alphabet, build_bag(to_log(*alphabet, log)));
        },
        py::arg("log"));
    m.def(
        "build_alergia", [](const Sequences& log, double alpha) {
            auto alphabet = new_alphabet();
            return wrap(alphabet, alergia(build_fpt(to_log(*alphabet, log)), AlergiaConfig{alpha}));
        },
        py::arg("log"), py::arg("alpha") = 0.5);

    py::class_<StreamingModel>(m, "StreamingModel")
        .def(py::init<const std::string&, std::size_t, std::size_t>(), py::arg("kind"), py::arg("n") = 3,
             py::arg("max_cases") = 0)
        .def("update", &StreamingModel::update, py::arg("case_id"), py::arg("activity"))
        .def("query", &StreamingModel::query, py::arg("case_id"))
        .def("predict", &StreamingModel::predict, py::arg("case_id"))
        .def("snapshot", &StreamingModel::snapshot)
        .def_property_readonly("state_count", &StreamingModel::state_count);

    m.def("run", &run, py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
          "Runs a TOML experiment config and returns one row per model.");
}
