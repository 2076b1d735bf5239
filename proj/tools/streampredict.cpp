#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "streampredict/run_config.hpp"

namespace sp = streampredict;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDataset = 3;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("streampredict");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("STREAMPREDICT_LOG")) {
        auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"
        if (level == spdlog::level::off && std::string_view(env) != "off") {
            spdlog::warn("ignoring STREAMPREDICT_LOG={}", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

json model_json(const sp::ModelReport& m) {
    json j{{"model", m.model},
           {"predictions", m.predictions},
           {"correct", m.correct},
           {"accuracy", m.accuracy},
           {"mean_latency_ms", m.mean_latency_ms},
           {"median_latency_ms", m.median_latency_ms},
           {"runs", m.runs}};
    j["accuracy_stddev"] = m.accuracy_stddev ? json(*m.accuracy_stddev) : json(nullptr);
    j["states"] = m.states ? json(*m.states) : json(nullptr);
    return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw std::runtime_error("cannot write '" + path.string() + "'");
}

void dump_automaton(const std::filesystem::path& dir, const std::string& model, const sp::Fdfa& a,
                    const sp::Alphabet& alphabet) {
    std::string file = model;
    for (char& c : file) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    std::ostringstream os;
    sp::write_fdfa_text(os, a, alphabet);
    write_file(dir / (file + ".fdfa"), os.str());
}

void log_table(const sp::EvalReport& r) {
    for (const auto& m : r.models) {
        spdlog::info("{:<12} {:6.2f}%  states={}  {:.4f} ms/event", m.model, 100.0 * m.accuracy,
                     m.states ? std::to_string(static_cast<long long>(*m.states)) : "-", m.mean_latency_ms);
    }
}

int cmd_run(const std::filesystem::path& config, std::vector<std::string> overrides, const std::string& mode,
            const std::optional<std::uint64_t>& seed, const std::string& out_dir) {
    if (!mode.empty()) overrides.push_back("mode=" + mode);
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    sp::RunConfig cfg = sp::load_run_config(config, overrides);
    if (!out_dir.empty()) cfg.outputs.dir = std::filesystem::absolute(out_dir);

    sp::Alphabet alphabet(cfg.dataset.sentinels);
    spdlog::info("loading {}", cfg.dataset.path.string());
    const auto events = sp::load_event_stream(cfg.dataset, alphabet);
    if (events.empty()) throw sp::DatasetError("dataset '" + cfg.dataset.path.string() + "' has no events");
    const auto log = sp::log_from_stream(events);
    spdlog::info("{} events, {} cases, {} activities", events.size(), log.case_count(), alphabet.activity_count());

    std::filesystem::create_directories(cfg.outputs.dir);
    json summary{{"config", std::filesystem::absolute(config).string()},
                 {"dataset", cfg.dataset.path.string()},
                 {"events", events.size()},
                 {"cases", log.case_count()},
                 {"activities", alphabet.activity_count()},
                 {"seed", cfg.seed}};
    sp::EvalReport table;

    if (cfg.mode == sp::RunMode::kStreaming) {
        summary["mode"] = "streaming";
        auto result = sp::run_streaming(cfg, events);
        table = result.report;
        if (cfg.outputs.dump_automata) {
            for (const auto& m : result.models) {
                if (const auto* a = dynamic_cast<const sp::StreamingAutomaton*>(m.get())) {
                    dump_automaton(cfg.outputs.dir, a->name(), a->automaton(), alphabet);
                }
            }
        }
    } else {
        summary["mode"] = "batch";
        auto result = sp::run_batch(cfg, log);
        table = result.mean;
        summary["split"] = {{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}};
        json runs = json::array();
        for (std::size_t i = 0; i < result.runs.size(); ++i) {
            json models = json::array();
            for (const auto& m : result.runs[i].models) models.push_back(model_json(m));
            runs.push_back({{"seed", result.seeds[i]}, {"models", models}});
        }
        summary["runs"] = runs;
        if (cfg.outputs.dump_automata) {
            sp::SplitSpec first = cfg.split;
            first.seed = cfg.seed;
            const auto parts = sp::split_log(log, first);
            sp::BatchModelFactory factory(parts.train);
            for (const auto& spec : cfg.models) {
                if (!spec.is_ensemble()) dump_automaton(cfg.outputs.dir, spec.name, *factory.automaton(spec), alphabet);
            }
        }
    }

    json models = json::array();
    for (const auto& m : table.models) models.push_back(model_json(m));
    summary["models"] = models;

    sp::emit_report(table, cfg.outputs.dir / cfg.outputs.table, sp::ReportFormat::kTable);
    if (cfg.outputs.write_curve) {
        sp::emit_report(table, cfg.outputs.dir / cfg.outputs.curve, sp::ReportFormat::kCurve);
    }
    write_file(cfg.outputs.dir / cfg.outputs.summary, summary.dump(2) + "\n");
    log_table(table);
    spdlog::info("wrote {}", (cfg.outputs.dir / cfg.outputs.table).string());
    return 0;
}

int cmd_inspect(const std::filesystem::path& dump) {
    std::ifstream in(dump, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open '" << dump.string() << "'\n";
        return kExitConfig;
    }
    sp::Alphabet alphabet;
    sp::Fdfa a;
    try {
        a = sp::read_fdfa_text(in, alphabet);
    } catch (const std::exception& e) {
        std::cerr << "corrupt dump: " << e.what() << '\n';
        return kExitConfig;
    }
    const auto problems = sp::validate_fdfa(a);
    std::uint64_t mass = 0, stops = 0, zero_edges = 0;
    for (std::uint32_t i = 0; i < a.state_count(); ++i) {
        const sp::StateId s{i};
        mass += a.freq(s).total();
        stops += a.freq(s).count(sp::kStop);
        for (const auto& t : a.transitions(s)) {
            if (a.freq(s).count(t.symbol) == 0) ++zero_edges;
        }
    }
    std::cout << "states\t" << a.state_count() << '\n'
              << "transitions\t" << a.transition_count() << '\n'
              << "activities\t" << alphabet.activity_count() << '\n'
              << "frequency_mass\t" << mass << '\n'
              << "stop_mass\t" << stops << '\n'
              << "zero_frequency_edges\t" << zero_edges << '\n'
              << "valid\t" << (problems.empty() ? "yes" : "no") << '\n';
    for (const auto& p : problems) std::cerr << "invariant violated: " << p << '\n';
    return problems.empty() ? 0 : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Next-activity prediction with frequency automata"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Evaluate the models of a run config");
    std::filesystem::path config;
    std::vector<std::string> overrides;
    std::string mode, out_dir;
    std::optional<std::uint64_t> seed;
    run->add_option("--config", config, "TOML run config")->required();
    run->add_option("--mode", mode, "batch or streaming")->check(CLI::IsMember({"batch", "streaming"}));
    run->add_option("--seed", seed, "base seed for batch splits");
    run->add_option("--out-dir", out_dir, "output directory");
    run->add_option("--override", overrides, "dotted key=value, repeatable; models=a,b selects models");

    auto* inspect = app.add_subcommand("inspect", "Summarize and validate an automaton dump");
    std::filesystem::path dump;
    inspect->add_option("dump", dump, "dump file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_run(config, overrides, mode, seed, out_dir);
        return cmd_inspect(dump);
    } catch (const sp::ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return kExitConfig;
    } catch (const sp::DatasetError& e) {
        spdlog::error("dataset: {}", e.what());
        return kExitDataset;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitFailure;
    }
}
