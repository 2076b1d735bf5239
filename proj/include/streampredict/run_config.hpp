#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "streampredict/dataset.hpp"
#include "streampredict/ensembles.hpp"
#include "streampredict/evaluation.hpp"
#include "streampredict/streaming.hpp"

namespace streampredict {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RunMode { kStreaming, kBatch };

enum class ModelType { kFpt, kBag, kNGram, kAlergia, kSoft, kHard, kAdaptive, kFallback };

struct ModelSpec {
    std::string name;
    ModelType type = ModelType::kFpt;
    std::size_t n = 3;             // ngram
    double alpha = 0.5;            // alergia
    std::uint64_t min_visits = 10;  // fallback
    double decay = 0.0;            // adaptive
    std::size_t max_cases = 0;     // streaming LRU cap
    std::vector<ModelSpec> members;  // ensembles; fallback = {primary, secondary}

    bool is_ensemble() const { return type >= ModelType::kSoft; }
};

/// "fpt", "bag", "ngram5" / "5-gram", "alergia" / "alergia0.5".
ModelSpec parse_model_shorthand(const std::string& token);

struct OutputSpec {
    std::filesystem::path dir = "results";
    std::string table = "table.tsv";
    std::string curve = "curve.csv";
    std::string summary = "summary.json";
    bool write_curve = true;
    bool dump_automata = false;
};

struct RunConfig {
    DatasetConfig dataset;
    RunMode mode = RunMode::kStreaming;
    std::uint64_t seed = 0;
    SplitSpec split;
    std::size_t runs = 5;
    std::vector<ModelSpec> models;
    OutputSpec outputs;

    void validate() const;
};

/// Parses TOML text. Relative dataset/output paths resolve against `base_dir`.
/// Overrides are dotted `key=value` pairs applied before validation; `models=a,b`
/// selects models by name or shorthand.
RunConfig parse_run_config(const std::string& toml_text, const std::filesystem::path& base_dir,
                           const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});

std::unique_ptr<Predictor> make_streaming_predictor(const ModelSpec& spec, OutcomePolicy policy);

/// Trains each distinct automaton once per training log and shares it among predictors.
class BatchModelFactory {
public:
    explicit BatchModelFactory(EventLog train) : train_(std::move(train)) {}
    std::unique_ptr<Predictor> make(const ModelSpec& spec);
    std::shared_ptr<const Fdfa> automaton(const ModelSpec& spec);

private:
    EventLog train_;
    std::shared_ptr<const Fdfa> fpt_;
    std::map<std::string, std::shared_ptr<const Fdfa>> cache_;
};

struct StreamingResult {
    EvalReport report;
    std::vector<std::unique_ptr<Predictor>> models;  // final model states
};

StreamingResult run_streaming(const RunConfig& cfg, std::span<const Event> stream);

struct BatchResult {
    EvalReport mean;
    std::vector<EvalReport> runs;
    std::vector<std::uint64_t> seeds;
};

BatchResult run_batch(const RunConfig& cfg, const EventLog& log);

}  // namespace streampredict
