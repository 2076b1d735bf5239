#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "streampredict/event_model.hpp"
#include "streampredict/pipeline.hpp"
#include "streampredict/predictor.hpp"

namespace streampredict {

struct SplitSpec {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LogSplit {
    EventLog train;
    EventLog val;
    EventLog test;
};

/// Shuffles cases with a seeded RNG; train and val sizes are floored, test takes the rest.
LogSplit split_log(const EventLog& log, const SplitSpec& spec);

struct Verdict {
    std::uint64_t index = 0;  // 1-based prediction index
    Symbol actual;
    std::optional<Symbol> predicted;  // nullopt = abstained
    bool correct = false;
    double latency_ms = 0.0;
};

struct ModelReport {
    std::string model;
    std::uint64_t predictions = 0;
    std::uint64_t correct = 0;
    /// correct / predictions for a single run; mean over runs for aggregated reports.
    double accuracy = 0.0;
    std::optional<double> accuracy_stddev;
    std::optional<double> states;
    double mean_latency_ms = 0.0;
    double median_latency_ms = 0.0;
    std::vector<double> rolling_accuracy;
    std::size_t runs = 1;
};

struct EvalReport {
    std::vector<ModelReport> models;

    const ModelReport* find(const std::string& name) const;
};

/// Builds a per-model report from its verdict stream.
ModelReport summarize(const std::string& model, std::span<const Verdict> verdicts, std::optional<double> states);

/// Query-then-update scoring rules shared by both modes:
/// INIT events only update, STOP events only score, activities are scored then learned.
struct ScoringRules {
    OutcomePolicy policy = OutcomePolicy::kActivitiesOnly;
    bool inject_init = true;  // add INIT before each new case (streaming)
    bool keep_verdicts = false;
};

struct EvaluationRun {
    EvalReport report;
    /// Per-model verdicts, only filled when ScoringRules::keep_verdicts is set.
    std::vector<std::vector<Verdict>> verdicts;
};

/// Replays `stream` through every model concurrently (one pipeline branch per model).
EvaluationRun evaluate_events(const std::vector<Predictor*>& models, std::span<const Event> stream, ScoringRules rules);

/// Streaming protocol: INIT injected per case, STOP never scored, argmax over activities.
EvalReport evaluate_streaming(const std::vector<Predictor*>& models, std::span<const Event> stream);

/// Batch protocol on a held-out log: STOP appended to every sequence and scored.
ModelReport evaluate_batch(Predictor& model, const EventLog& test);
EvalReport evaluate_batch(const std::vector<Predictor*>& models, const EventLog& test);

/// Test cases of a log as events (case ids "test-<n>"), each sequence followed by STOP.
std::vector<Event> batch_test_events(const EventLog& test);

/// Mean over runs of each model's row; stddev over runs of the accuracy.
EvalReport aggregate_runs(const std::vector<EvalReport>& runs);

enum class ReportFormat { kTable, kCurve };

void emit_report(const EvalReport& r, const std::filesystem::path& out, ReportFormat format);
void write_table(std::ostream& os, const EvalReport& r, bool include_latency = true);
void write_curve(std::ostream& os, const EvalReport& r);

namespace pipeline_terms {

/// Emits an INIT item before the first item of every case.
class AddStartSymbol final : public pipeline::FunctionTerm {
public:
    AddStartSymbol() : FunctionTerm("add-start-symbol") {}
    void process(const pipeline::DataItem& item, pipeline::Emitter& out) override;

private:
    std::unordered_set<std::string> seen_;
};

/// Owns the query/update cycle of one predictor and emits one verdict item per scored event.
class PredictorTerm final : public pipeline::FunctionTerm {
public:
    PredictorTerm(Predictor& model, OutcomePolicy policy);
    void process(const pipeline::DataItem& item, pipeline::Emitter& out) override;

private:
    Predictor& model_;
    OutcomePolicy policy_;
    std::uint64_t scored_ = 0;
};

/// Appends the running accuracy to each verdict item.
class EvaluationTerm final : public pipeline::FunctionTerm {
public:
    explicit EvaluationTerm(std::string model) : FunctionTerm("evaluation:" + model) {}
    void process(const pipeline::DataItem& item, pipeline::Emitter& out) override;

private:
    std::uint64_t seen_ = 0;
    std::uint64_t correct_ = 0;
};

pipeline::DataItem event_item(const Event& e);
Event item_event(const pipeline::DataItem& item);

}  // namespace pipeline_terms

}  // namespace streampredict
