#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "streampredict/dataset.hpp"
#include "streampredict/evaluation.hpp"
#include "streampredict/run_config.hpp"
#include "streampredict/streaming.hpp"
#include "support.hpp"

using namespace streampredict;
using testing::sym;
using testing::word;

namespace {

std::int64_t epoch_ms(std::chrono::sys_days day, int h, int m, int s, int ms = 0) {
    using namespace std::chrono;
    return duration_cast<milliseconds>(day.time_since_epoch()).count() + ((h * 60 + m) * 60 + s) * 1000LL + ms;
}

std::vector<Event> load(const std::string& csv, DatasetConfig cfg = {}) {
    Alphabet alphabet(cfg.sentinels);
    std::istringstream in(csv);
    return load_event_stream(in, cfg, alphabet);
}

std::string dataset_error(const std::string& csv, DatasetConfig cfg = {}) {
    try {
        load(csv, cfg);
    } catch (const DatasetError& e) {
        return e.what();
    }
    return "";
}

EventLog log_of_size(std::uint64_t n) {
    EventLog log;
    for (std::uint64_t i = 0; i < n; ++i) log.add(Word(1 + i % 5, sym('a' + static_cast<char>(i % 3))));
    return log;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("streampredict-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_SUITE("timestamps") {
    TEST_CASE("ISO-8601 variants") {
        using namespace std::chrono;
        CHECK(parse_iso8601_ms("1970-01-01T00:00:00Z") == 0);
        CHECK(parse_iso8601_ms("1970-01-01") == 0);
        const auto day = sys_days{year{2014} / 10 / 22};
        CHECK(parse_iso8601_ms("2014-10-22T11:15:41.000+02:00") == epoch_ms(day, 9, 15, 41));
        CHECK(parse_iso8601_ms("2014-10-22 11:15:41.25") == epoch_ms(day, 11, 15, 41, 250));
        CHECK(parse_iso8601_ms("2014-10-22T11:15") == epoch_ms(day, 11, 15, 0));
        CHECK(parse_iso8601_ms("2014-10-22T11:15:41-0130") == epoch_ms(day, 12, 45, 41));
        CHECK(parse_iso8601_ms("2016-02-29T00:00:00Z").has_value());
        for (const char* bad : {"", "2014-13-01", "2015-02-29", "2014/10/22", "2014-10-22T", "2014-10-22T11:15:41+2",
                                "2014-10-22T11:15:41.Z", "yesterday"}) {
            CHECK_MESSAGE(!parse_iso8601_ms(bad).has_value(), bad);
        }
    }
}

TEST_SUITE("csv") {
    TEST_CASE("quoted fields, doubled quotes and CRLF") {
        std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",,x\n");
        std::vector<std::string> f;
        REQUIRE(read_csv_record(in, f));
        CHECK(f == std::vector<std::string>{"a", "b,c", "say \"hi\""});
        REQUIRE(read_csv_record(in, f));
        CHECK(f == std::vector<std::string>{"multi\nline", "", "x"});
        CHECK_FALSE(read_csv_record(in, f));
    }

    TEST_CASE("unterminated quote") {
        std::istringstream in("\"open,field\n");
        std::vector<std::string> f;
        CHECK_THROWS_AS(read_csv_record(in, f), DatasetError);
    }
}

TEST_SUITE("loading") {
    TEST_CASE("timestamp order is stable, file order is kept verbatim") {
        const std::string csv =
            "\xEF\xBB\xBF" "case_id,activity,timestamp\n"
            "1,register,2020-01-01T10:00:00Z\n"
            "1,triage,2020-01-01T12:00:00Z\n"
            "2,register,2020-01-01T11:00:00Z\n"
            "3,register,2020-01-01T12:00:00Z\n";
        auto by_time = load(csv);
        REQUIRE(by_time.size() == 4);
        CHECK(by_time[1].case_id == "2");
        CHECK(by_time[2].case_id == "1");
        CHECK(by_time[3].case_id == "3");
        DatasetConfig file_order;
        file_order.ordering = Ordering::kFileOrder;
        auto raw = load(csv, file_order);
        CHECK(raw[1].case_id == "1");
        CHECK(raw[2].case_id == "2");
    }

    TEST_CASE("custom columns") {
        DatasetConfig cfg;
        cfg.case_column = "patient";
        cfg.activity_column = "step";
        cfg.ordering = Ordering::kFileOrder;
        auto events = load("step,patient\nA,p1\nB,p2\n", cfg);
        REQUIRE(events.size() == 2);
        CHECK(events[1].case_id == "p2");
        CHECK(events[1].activity == Symbol{kFirstActivity + 1});
    }

    TEST_CASE("errors carry the data row") {
        const std::string header = "case_id,activity,timestamp\n";
        CHECK(dataset_error(header + "1,a,2020-01-01\n1,b,not-a-date\n").find("row 2") != std::string::npos);
        CHECK(dataset_error(header + "1,a\n").find("row 1") != std::string::npos);
        CHECK(dataset_error(header + "1,__stop__,2020-01-01\n").find("row 1") != std::string::npos);
        CHECK(dataset_error(header + ",a,2020-01-01\n").find("empty case id") != std::string::npos);
        CHECK(dataset_error("case,activity,timestamp\n").find("missing column 'case_id'") != std::string::npos);
        DatasetConfig cfg;
        cfg.path = "/nonexistent/log.csv";
        Alphabet alphabet;
        CHECK_THROWS_AS(load_event_stream(cfg, alphabet), DatasetError);
    }

    TEST_CASE("renamed sentinels let an activity use a default sentinel name") {
        DatasetConfig cfg;
        cfg.sentinels = Sentinels{"<end>", "<begin>"};
        auto events = load("case_id,activity,timestamp\n1,__stop__,2020-01-01\n", cfg);
        CHECK(is_activity(events[0].activity));
    }
}

TEST_SUITE("batch split") {
    TEST_CASE("sizes are floored for train and validation") {
        for (auto [n, train, val, test] : {std::tuple{30ULL, 21ULL, 4ULL, 5ULL}, std::tuple{1050ULL, 735ULL, 157ULL, 158ULL},
                                           std::tuple{3ULL, 2ULL, 0ULL, 1ULL}}) {
            auto parts = split_log(log_of_size(n), SplitSpec{});
            CHECK(parts.train.case_count() == train);
            CHECK(parts.val.case_count() == val);
            CHECK(parts.test.case_count() == test);
        }
    }

    TEST_CASE("the split partitions the multiset and depends only on the seed") {
        const auto log = log_of_size(200);
        SplitSpec spec;
        spec.seed = 42;
        auto a = split_log(log, spec);
        auto b = split_log(log, spec);
        CHECK(a.train == b.train);
        CHECK(a.test == b.test);
        for (const auto& [w, m] : log.entries()) {
            CHECK(a.train.multiplicity(w) + a.val.multiplicity(w) + a.test.multiplicity(w) == m);
        }
        spec.seed = 43;
        CHECK_FALSE(split_log(log, spec).train == a.train);
    }

    TEST_CASE("invalid splits") {
        CHECK_THROWS(split_log(log_of_size(2), SplitSpec{}));
        CHECK_THROWS(split_log(log_of_size(30), SplitSpec{0.5, 0.5, 0.5, 0}));
    }

    TEST_CASE("test cases become fresh event sequences ending in STOP") {
        EventLog test;
        test.add(word("ab"), 2);
        auto events = batch_test_events(test);
        REQUIRE(events.size() == 6);
        CHECK(events[2] == Event{"test-0", kStop});
        CHECK(events[3].case_id == "test-1");
    }
}

TEST_SUITE("evaluation") {
    TEST_CASE("streaming protocol on a hand-checked stream") {
        // Two cases of "ab" interleaved; a 2-gram learns a -> b after the first case.
        std::vector<Event> stream{{"1", sym('a')}, {"1", sym('b')}, {"2", sym('a')}, {"2", sym('b')}};
        StreamingAutomaton g("2-gram", AutomatonKind::kNGram, NGramConfig{2});
        auto run = evaluate_events({&g}, stream, ScoringRules{OutcomePolicy::kActivitiesOnly, true, true});
        const auto& v = run.verdicts[0];
        REQUIRE(v.size() == 4);
        // INIT-context has no activity mass yet: abstain on the very first event.
        CHECK_FALSE(v[0].predicted.has_value());
        // After "a" the 2-gram state for "a" is new: no activity to predict.
        CHECK_FALSE(v[1].predicted.has_value());
        // Case 2 starts from INIT, which has seen "a" once.
        CHECK(v[2].predicted == sym('a'));
        CHECK(v[3].predicted == sym('b'));
        const auto& row = run.report.models[0];
        CHECK(row.correct == 2);
        CHECK(row.accuracy == doctest::Approx(0.5));
        CHECK(row.rolling_accuracy == std::vector<double>{0.0, 0.0, 1.0 / 3.0, 0.5});
    }

    TEST_CASE("batch protocol scores STOP") {
        EventLog train;
        train.add(word("ab"), 3);
        auto fpt = std::make_shared<const Fdfa>(build_fpt(train));
        FrozenAutomaton t("fpt", fpt, false);
        EventLog test;
        test.add(word("ab"), 1);
        test.add(word("b"), 1);
        auto row = evaluate_batch(t, test);
        // ab$: a, b, $ correct; b$: b wrong (a), $ lost.
        CHECK(row.predictions == 5);
        CHECK(row.correct == 3);
        CHECK(row.states == 3.0);
    }

    TEST_CASE("same stream twice gives identical reports") {
        std::mt19937_64 rng(1);
        const auto events = testing::interleave(testing::random_log(rng, {4, 30, 8}), rng);
        auto once = [&] {
            StreamingAutomaton g("3-gram", AutomatonKind::kNGram, NGramConfig{3});
            StreamingAutomaton b("bag", AutomatonKind::kBag);
            auto r = evaluate_streaming({&g, &b}, events);
            std::ostringstream os;
            write_table(os, r, false);
            write_curve(os, r);
            return os.str();
        };
        CHECK(once() == once());
    }

    TEST_CASE("aggregation over runs") {
        EvalReport r1, r2;
        ModelReport m;
        m.model = "x";
        m.accuracy = 0.5;
        m.states = 10;
        r1.models.push_back(m);
        m.accuracy = 0.7;
        m.states = 13;
        r2.models.push_back(m);
        auto agg = aggregate_runs({r1, r2});
        CHECK(agg.models[0].accuracy == doctest::Approx(0.6));
        CHECK(*agg.models[0].accuracy_stddev == doctest::Approx(std::sqrt(0.02)));
        CHECK(*agg.models[0].states == doctest::Approx(11.5));
        CHECK(agg.models[0].runs == 2);
    }

    TEST_CASE("table and curve formats") {
        EvalReport r;
        ModelReport a;
        a.model = "3-gram";
        a.predictions = 3;
        a.correct = 2;
        a.accuracy = 2.0 / 3.0;
        a.states = 127;
        a.mean_latency_ms = 0.0456;
        a.rolling_accuracy = {1.0, 0.5, 2.0 / 3.0};
        ModelReport b;
        b.model = "soft,voting";
        b.states = 12.25;
        r.models = {a, b};
        std::ostringstream table, curve;
        write_table(table, r);
        write_curve(curve, r);
        CHECK(table.str() ==
              "model\taccuracy_pct\tstates\tmean_latency_ms\n"
              "3-gram\t66.67\t127\t0.05\n"
              "soft,voting\tN/A\t12.2\t0.00\n");
        CHECK(curve.str() ==
              "event_index,model,rolling_accuracy\n"
              "1,3-gram,1.000000\n2,3-gram,0.500000\n3,3-gram,0.666667\n");
    }
}

TEST_SUITE("run config") {
    const char* kConfig = R"(
mode = "streaming"
seed = 3

[dataset]
path = "log.csv"

[[models]]
name = "FPT"
type = "fpt"

[[models]]
name = "3-gram"
type = "ngram"
n = 3

[[models]]
name = "fb"
type = "fallback"
primary = "FPT"
secondary = { type = "ngram", n = 5 }
min_visits = 4

[[models]]
name = "soft"
type = "soft"
members = ["FPT", "3-gram", "bag"]
)";

    std::string config_error(const std::string& text, std::vector<std::string> overrides = {}) {
        try {
            parse_run_config(text, "/cfg", overrides);
        } catch (const ConfigError& e) {
            return e.what();
        }
        return "";
    }

    TEST_CASE("parses models, references and shorthands") {
        auto cfg = parse_run_config(kConfig, "/cfg");
        CHECK(cfg.mode == RunMode::kStreaming);
        CHECK(cfg.seed == 3);
        CHECK(cfg.dataset.path == std::filesystem::path("/cfg/log.csv"));
        REQUIRE(cfg.models.size() == 4);
        CHECK(cfg.models[1].n == 3);
        const auto& fb = cfg.models[2];
        CHECK(fb.type == ModelType::kFallback);
        CHECK(fb.min_visits == 4);
        CHECK(fb.members[0].type == ModelType::kFpt);
        CHECK(fb.members[1].n == 5);
        CHECK(fb.members[1].name == "5-gram");
        const auto& soft = cfg.models[3];
        REQUIRE(soft.members.size() == 3);
        CHECK(soft.members[2].type == ModelType::kBag);
    }

    TEST_CASE("overrides") {
        auto cfg = parse_run_config(kConfig, "/cfg", {"models=ngram5,soft", "seed=9", "split.runs=2", "dataset.ordering=file"});
        REQUIRE(cfg.models.size() == 2);
        CHECK(cfg.models[0].type == ModelType::kNGram);
        CHECK(cfg.models[0].n == 5);
        CHECK(cfg.models[1].name == "soft");
        CHECK(cfg.seed == 9);
        CHECK(cfg.runs == 2);
        CHECK(cfg.dataset.ordering == Ordering::kFileOrder);
        CHECK(parse_model_shorthand("alergia0.2").alpha == doctest::Approx(0.2));
        CHECK(parse_model_shorthand("7-gram").n == 7);
    }

    TEST_CASE("validation errors") {
        CHECK(config_error(kConfig, {"mode=batch"}).empty());
        CHECK(config_error(std::string(kConfig) + "[[models]]\nname = \"FPT\"\ntype = \"bag\"\n").find("duplicate") !=
              std::string::npos);
        CHECK(config_error(std::string(kConfig) + "[[models]]\nname = \"loop\"\ntype = \"soft\"\nmembers = [\"FPT\", \"loop\"]\n")
                  .find("tree") != std::string::npos);
        CHECK(config_error(std::string(kConfig) + "[[models]]\nname = \"ad\"\ntype = \"adaptive\"\nmembers = [\"FPT\", \"bag\"]\n",
                           {"mode=batch"})
                  .find("streaming runs only") != std::string::npos);
        CHECK(config_error(kConfig, {"models=alergia"}).find("no streaming update") != std::string::npos);
        CHECK(config_error(kConfig, {"models=lstm"}).find("unknown model") != std::string::npos);
        CHECK(config_error(kConfig, {"colour=blue"}).find("unknown key") != std::string::npos);
        CHECK(config_error(kConfig, {"mode=sideways"}).find("mode") != std::string::npos);
        CHECK(config_error("mode = \"batch\"\n[dataset]\npath = \"x.csv\"\n").find("no models") != std::string::npos);
        CHECK(config_error("mode = [").find("parse error") != std::string::npos);
        CHECK(config_error(kConfig, {"split.train=0.9"}).find("sum") == std::string::npos);
        CHECK(config_error(kConfig, {"mode=batch", "split.train=0.9"}).find("sum to 1") != std::string::npos);
    }

    TEST_CASE("batch factory shares automata between predictors") {
        BatchModelFactory factory(testing::reference_log());
        ModelSpec g;
        g.type = ModelType::kNGram;
        g.n = 3;
        CHECK(factory.automaton(g) == factory.automaton(g));
        CHECK(factory.automaton(g)->state_count() == 7);
        ModelSpec adaptive;
        adaptive.type = ModelType::kAdaptive;
        CHECK_THROWS_AS(factory.make(adaptive), ConfigError);
    }
}

#ifdef STREAMPREDICT_CLI
TEST_SUITE("command line") {
    int run_cli(const std::string& args) {
        const std::string cmd = std::string("STREAMPREDICT_LOG=off \"") + STREAMPREDICT_CLI + "\" " + args + " > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::filesystem::path small_project(const std::string& name) {
        auto dir = scratch_dir(name);
        std::ostringstream csv;
        csv << "case_id,activity,timestamp\n";
        std::mt19937_64 rng(17);
        EventLog log;
        while (log.case_count() < 20) log = testing::random_log(rng, {4, 30, 8});
        const auto events = testing::interleave(log, rng);
        int t = 0;
        for (const auto& e : events) {
            csv << e.case_id << ",act" << e.activity.index << ",2021-03-01T00:" << (t / 60 < 10 ? "0" : "") << t / 60 << ':'
                << (t % 60 < 10 ? "0" : "") << t % 60 << "Z\n";
            ++t;
        }
        write(dir / "log.csv", csv.str());
        write(dir / "stream.toml",
              "mode = \"streaming\"\n[dataset]\npath = \"log.csv\"\n[outputs]\ndir = \"out\"\ndump_automata = true\n"
              "[[models]]\nname = \"3-gram\"\ntype = \"ngram\"\nn = 3\n"
              "[[models]]\nname = \"bag\"\ntype = \"bag\"\n"
              "[[models]]\nname = \"soft\"\ntype = \"soft\"\nmembers = [\"3-gram\", \"bag\"]\n");
        return dir;
    }

    TEST_CASE("run writes table, curve and summary") {
        const auto dir = small_project("run");
        REQUIRE(run_cli("run --config " + (dir / "stream.toml").string()) == 0);
        CHECK(std::filesystem::exists(dir / "out" / "table.tsv"));
        CHECK(std::filesystem::exists(dir / "out" / "curve.csv"));
        CHECK(std::filesystem::exists(dir / "out" / "summary.json"));
        CHECK(run_cli("inspect " + (dir / "out" / "3-gram.fdfa").string()) == 0);

        REQUIRE(run_cli("run --config " + (dir / "stream.toml").string() + " --mode batch --seed 4 --out-dir " +
                        (dir / "batch").string() + " --override models=ngram2") == 0);
        const auto table = read(dir / "batch" / "table.tsv");
        CHECK(table.find("ngram2\t") != std::string::npos);
        CHECK(std::count(table.begin(), table.end(), '\n') == 2);
    }

    TEST_CASE("same config and seed give the same table apart from latency") {
        const auto dir = small_project("repeat");
        auto strip = [](const std::string& table) {
            std::istringstream in(table);
            std::string line, out;
            while (std::getline(in, line)) out += line.substr(0, line.rfind('\t')) + "\n";
            return out;
        };
        REQUIRE(run_cli("run --config " + (dir / "stream.toml").string() + " --mode batch --out-dir " + (dir / "a").string()) == 0);
        REQUIRE(run_cli("run --config " + (dir / "stream.toml").string() + " --mode batch --out-dir " + (dir / "b").string()) == 0);
        CHECK(strip(read(dir / "a" / "table.tsv")) == strip(read(dir / "b" / "table.tsv")));
        CHECK(read(dir / "a" / "curve.csv") == read(dir / "b" / "curve.csv"));
    }

    TEST_CASE("exit codes") {
        const auto dir = small_project("codes");
        CHECK(run_cli("run --config " + (dir / "stream.toml").string() + " --override dataset.path=missing.csv") == 3);
        CHECK(run_cli("run --config " + (dir / "stream.toml").string() + " --override models=alergia") == 2);
        CHECK(run_cli("run --config " + (dir / "nope.toml").string()) == 2);
        CHECK(run_cli("run") == 2);
        write(dir / "corrupt.fdfa", "fdfa states=2 transitions=1\nstate 0 access=[] stop=0\n");
        CHECK(run_cli("inspect " + (dir / "corrupt.fdfa").string()) == 2);
    }

    TEST_CASE("inspect reports the 3-gram of the reference log") {
        const auto dir = scratch_dir("inspect");
        Alphabet alphabet;
        alphabet.intern("a");
        alphabet.intern("b");
        {
            std::ofstream out(dir / "reference.fdfa");
            write_fdfa_text(out, build_ngram(testing::reference_log(), NGramConfig{3}), alphabet);
        }
        const std::string cmd = std::string("\"") + STREAMPREDICT_CLI + "\" inspect " + (dir / "reference.fdfa").string() + " > " +
                                (dir / "summary.txt").string();
        REQUIRE(std::system(cmd.c_str()) == 0);
        const auto summary = read(dir / "summary.txt");
        CHECK(summary.find("states\t7\n") != std::string::npos);
        CHECK(summary.find("zero_frequency_edges\t1\n") != std::string::npos);
        CHECK(summary.find("valid\tyes\n") != std::string::npos);
    }
}
#endif
