#include "streampredict/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace streampredict {

namespace {

const std::map<std::string, ModelType>& type_names() {
    static const std::map<std::string, ModelType> names{
        {"fpt", ModelType::kFpt},         {"bag", ModelType::kBag},   {"ngram", ModelType::kNGram},
        {"alergia", ModelType::kAlergia}, {"soft", ModelType::kSoft}, {"hard", ModelType::kHard},
        {"adaptive", ModelType::kAdaptive}, {"fallback", ModelType::kFallback}};
    return names;
}

std::string type_name(ModelType t) {
    for (const auto& [name, type] : type_names()) {
        if (type == t) return name;
    }
    return "?";
}

std::string default_name(const ModelSpec& m) {
    switch (m.type) {
        case ModelType::kNGram:
            return std::to_string(m.n) + "-gram";
        case ModelType::kFpt:
            return "FPT";
        case ModelType::kAlergia:
            return "Alergia";
        default:
            return type_name(m.type);
    }
}

}  // namespace

ModelSpec parse_model_shorthand(const std::string& token) {
    static const std::regex ngram(R"((?:ngram|n-gram)(\d+)|(\d+)-?gram)", std::regex::icase);
    static const std::regex alergia(R"(alergia([0-9.eE+-]*))", std::regex::icase);
    std::smatch m;
    ModelSpec spec;
    std::string lower = token;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (std::regex_match(token, m, ngram)) {
        spec.type = ModelType::kNGram;
        spec.n = std::stoul(m[1].matched ? m[1].str() : m[2].str());
        if (spec.n < 1) throw ConfigError("n-gram window must be at least 1 in '" + token + "'");
    } else if (std::regex_match(token, m, alergia)) {
        spec.type = ModelType::kAlergia;
        if (m[1].length() > 0) {
            try {
                spec.alpha = std::stod(m[1].str());
            } catch (const std::exception&) {
                throw ConfigError("bad alergia alpha in '" + token + "'");
            }
        }
    } else if (lower == "fpt") {
        spec.type = ModelType::kFpt;
    } else if (lower == "bag") {
        spec.type = ModelType::kBag;
    } else {
        throw ConfigError("unknown model '" + token + "'");
    }
    spec.name = token;
    return spec;
}

void RunConfig::validate() const {
    try {
        dataset.validate();
        if (mode == RunMode::kBatch) split.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (runs < 1) throw ConfigError("split.runs must be at least 1");
    if (models.empty()) throw ConfigError("no models configured");
    std::set<std::string> names;
    for (const auto& m : models) {
        if (!names.insert(m.name).second) throw ConfigError("duplicate model name '" + m.name + "'");
    }
    std::function<void(const ModelSpec&)> check = [&](const ModelSpec& m) {
        if (m.type == ModelType::kNGram && m.n < 1) throw ConfigError(m.name + ": n must be at least 1");
        if (m.type == ModelType::kAlergia && !(m.alpha > 0.0 && m.alpha <= 1.0)) {
            throw ConfigError(m.name + ": alpha must lie in (0, 1]");
        }
        if (m.type == ModelType::kAlergia && mode == RunMode::kStreaming) {
            throw ConfigError(m.name + ": alergia has no streaming update");
        }
        if (m.type == ModelType::kAdaptive && mode == RunMode::kBatch) {
            throw ConfigError(m.name + ": adaptive voting is defined for streaming runs only");
        }
        if (m.type == ModelType::kAdaptive && (m.decay < 0.0 || m.decay >= 1.0)) {
            throw ConfigError(m.name + ": decay must lie in [0, 1)");
        }
        if (m.type == ModelType::kFallback) {
            if (m.members.size() != 2) throw ConfigError(m.name + ": fallback needs a primary and a secondary");
            if (m.members[0].is_ensemble()) throw ConfigError(m.name + ": fallback primary must be an automaton");
        } else if (m.is_ensemble() && m.members.size() < 2) {
            throw ConfigError(m.name + ": an ensemble needs at least two members");
        }
        for (const auto& sub : m.members) check(sub);
    };
    for (const auto& m : models) check(m);
}

namespace {

std::string path_of(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

template <typename T>
T get_or(const toml::table& t, const std::string& key, T fallback, const std::string& where) {
    const toml::node* node = t.get(key);
    if (!node) return fallback;
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = node->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node->value<bool>()) return *v;
    } else if constexpr (std::is_integral_v<T>) {
        if (auto v = node->value<std::int64_t>(); v && *v >= 0) return static_cast<T>(*v);
    } else {
        if (auto v = node->value<std::string>()) return *v;
    }
    throw ConfigError("'" + path_of(where, key) + "' has the wrong type");
}

void reject_unknown(const toml::table& t, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [k, v] : t) {
        if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end()) {
            throw ConfigError("unknown key '" + path_of(where, std::string(k.str())) + "'");
        }
    }
}

class ModelResolver {
public:
    explicit ModelResolver(const toml::array* models) {
        if (!models) return;
        std::size_t i = 0;
        for (const auto& node : *models) {
            const auto* t = node.as_table();
            if (!t) throw ConfigError("models[" + std::to_string(i) + "] must be a table");
            auto name = get_or<std::string>(*t, "name", "", "models[" + std::to_string(i) + "]");
            if (name.empty()) throw ConfigError("models[" + std::to_string(i) + "] needs a name");
            if (!tables_.emplace(name, t).second) throw ConfigError("duplicate model name '" + name + "'");
            order_.push_back(name);
            ++i;
        }
    }

    const std::vector<std::string>& order() const { return order_; }
    bool has(const std::string& name) const { return tables_.contains(name); }

    ModelSpec resolve_named(const std::string& name) {
        if (std::find(stack_.begin(), stack_.end(), name) != stack_.end()) {
            throw ConfigError("model '" + name + "' refers to itself; ensemble specs must form a tree");
        }
        auto it = tables_.find(name);
        if (it == tables_.end()) return parse_model_shorthand(name);
        stack_.push_back(name);
        ModelSpec spec = from_table(*it->second, "models." + name);
        stack_.pop_back();
        return spec;
    }

private:
    ModelSpec member(const toml::node& node, const std::string& where) {
        if (auto s = node.value<std::string>()) return resolve_named(*s);
        if (const auto* t = node.as_table()) return from_table(*t, where);
        throw ConfigError("'" + where + "' must be a model name or an inline table");
    }

    ModelSpec from_table(const toml::table& t, const std::string& where) {
        reject_unknown(t, {"name", "type", "n", "alpha", "min_visits", "decay", "max_cases", "members", "primary", "secondary"},
                       where);
        ModelSpec spec;
        const auto type = get_or<std::string>(t, "type", "", where);
        auto it = type_names().find(type);
        if (it == type_names().end()) throw ConfigError("'" + where + ".type' must be one of fpt, bag, ngram, alergia, soft, hard, adaptive, fallback");
        spec.type = it->second;
        spec.n = get_or<std::size_t>(t, "n", 3, where);
        spec.alpha = get_or<double>(t, "alpha", 0.5, where);
        spec.min_visits = get_or<std::uint64_t>(t, "min_visits", 10, where);
        spec.decay = get_or<double>(t, "decay", 0.0, where);
        spec.max_cases = get_or<std::size_t>(t, "max_cases", 0, where);
        if (spec.type == ModelType::kFallback) {
            const auto* p = t.get("primary");
            const auto* s = t.get("secondary");
            if (!p || !s) throw ConfigError("'" + where + "' needs primary and secondary");
            spec.members.push_back(member(*p, where + ".primary"));
            spec.members.push_back(member(*s, where + ".secondary"));
        } else if (spec.is_ensemble()) {
            const auto* arr = t.get_as<toml::array>("members");
            if (!arr) throw ConfigError("'" + where + ".members' must be an array");
            for (std::size_t i = 0; i < arr->size(); ++i) {
                spec.members.push_back(member(*arr->get(i), where + ".members[" + std::to_string(i) + "]"));
            }
        }
        spec.name = get_or<std::string>(t, "name", "", where);
        if (spec.name.empty()) spec.name = default_name(spec);
        return spec;
    }

    std::map<std::string, const toml::table*> tables_;
    std::vector<std::string> order_;
    std::vector<std::string> stack_;
};

void apply_override(toml::table& root, const std::string& key, const std::string& text) {
    toml::table* t = &root;
    std::size_t start = 0;
    while (true) {
        auto dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("bad override key '" + key + "'");
        if (dot == std::string::npos) {
            try {
                auto parsed = toml::parse("v = " + text);
                t->insert_or_assign(part, *parsed.get("v"));
            } catch (const toml::parse_error&) {
                t->insert_or_assign(part, text);
            }
            return;
        }
        auto* next = t->get_as<toml::table>(part);
        if (!next) {
            t->insert_or_assign(part, toml::table{});
            next = t->get_as<toml::table>(part);
        }
        t = next;
        start = dot + 1;
    }
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(const std::string& toml_text, const std::filesystem::path& base_dir,
                           const std::vector<std::string>& overrides) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(os.str());
    }
    std::optional<std::string> model_selection;
    for (const auto& o : overrides) {
        auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
        std::string key = o.substr(0, eq);
        std::string value = o.substr(eq + 1);
        if (key == "models") {
            model_selection = value;
        } else {
            apply_override(root, key, value);
        }
    }

    reject_unknown(root, {"mode", "seed", "dataset", "split", "outputs", "models"}, "");
    RunConfig cfg;
    const auto mode = get_or<std::string>(root, "mode", "streaming", "");
    if (mode == "streaming") {
        cfg.mode = RunMode::kStreaming;
    } else if (mode == "batch") {
        cfg.mode = RunMode::kBatch;
    } else {
        throw ConfigError("mode must be 'streaming' or 'batch'");
    }
    cfg.seed = get_or<std::uint64_t>(root, "seed", 0, "");

    const auto* ds = root.get_as<toml::table>("dataset");
    if (!ds) throw ConfigError("missing [dataset] table");
    reject_unknown(*ds, {"path", "case_column", "activity_column", "timestamp_column", "ordering", "stop_sentinel", "init_sentinel"},
                   "dataset");
    const auto ds_path = get_or<std::string>(*ds, "path", "", "dataset");
    if (ds_path.empty()) throw ConfigError("dataset.path is required");
    cfg.dataset.path = resolve_path(base_dir, ds_path);
    cfg.dataset.case_column = get_or<std::string>(*ds, "case_column", "case_id", "dataset");
    cfg.dataset.activity_column = get_or<std::string>(*ds, "activity_column", "activity", "dataset");
    cfg.dataset.timestamp_column = get_or<std::string>(*ds, "timestamp_column", "timestamp", "dataset");
    const auto ordering = get_or<std::string>(*ds, "ordering", "timestamp", "dataset");
    if (ordering == "timestamp") {
        cfg.dataset.ordering = Ordering::kTimestamp;
    } else if (ordering == "file") {
        cfg.dataset.ordering = Ordering::kFileOrder;
    } else {
        throw ConfigError("dataset.ordering must be 'timestamp' or 'file'");
    }
    cfg.dataset.sentinels.stop = get_or<std::string>(*ds, "stop_sentinel", "__stop__", "dataset");
    cfg.dataset.sentinels.init = get_or<std::string>(*ds, "init_sentinel", "__init__", "dataset");
    if (cfg.dataset.sentinels.stop == cfg.dataset.sentinels.init) throw ConfigError("stop and init sentinels must differ");

    if (const auto* sp = root.get_as<toml::table>("split")) {
        reject_unknown(*sp, {"train", "val", "test", "runs"}, "split");
        cfg.split.train = get_or<double>(*sp, "train", 0.70, "split");
        cfg.split.val = get_or<double>(*sp, "val", 0.15, "split");
        cfg.split.test = get_or<double>(*sp, "test", 0.15, "split");
        cfg.runs = get_or<std::size_t>(*sp, "runs", 5, "split");
    }
    cfg.split.seed = cfg.seed;

    if (const auto* out = root.get_as<toml::table>("outputs")) {
        reject_unknown(*out, {"dir", "table", "curve", "summary", "write_curve", "dump_automata"}, "outputs");
        cfg.outputs.dir = resolve_path(base_dir, get_or<std::string>(*out, "dir", "results", "outputs"));
        cfg.outputs.table = get_or<std::string>(*out, "table", cfg.outputs.table, "outputs");
        cfg.outputs.curve = get_or<std::string>(*out, "curve", cfg.outputs.curve, "outputs");
        cfg.outputs.summary = get_or<std::string>(*out, "summary", cfg.outputs.summary, "outputs");
        cfg.outputs.write_curve = get_or<bool>(*out, "write_curve", true, "outputs");
        cfg.outputs.dump_automata = get_or<bool>(*out, "dump_automata", false, "outputs");
    } else {
        cfg.outputs.dir = resolve_path(base_dir, "results");
    }

    const toml::node* models_node = root.get("models");
    if (models_node && !models_node->is_array()) throw ConfigError("'models' must be an array of tables");
    ModelResolver resolver(models_node ? models_node->as_array() : nullptr);
    if (model_selection) {
        std::stringstream ss(*model_selection);
        std::string token;
        while (std::getline(ss, token, ',')) {
            token.erase(0, token.find_first_not_of(' '));
            token.erase(token.find_last_not_of(' ') + 1);
            if (!token.empty()) cfg.models.push_back(resolver.resolve_named(token));
        }
    } else {
        for (const auto& name : resolver.order()) cfg.models.push_back(resolver.resolve_named(name));
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config '" + file.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), file.has_parent_path() ? file.parent_path() : std::filesystem::path("."), overrides);
}

std::unique_ptr<Predictor> make_streaming_predictor(const ModelSpec& spec, OutcomePolicy policy) {
    auto members = [&] {
        std::vector<PredictorPtr> out;
        for (const auto& m : spec.members) out.push_back(make_streaming_predictor(m, policy));
        return out;
    };
    switch (spec.type) {
        case ModelType::kFpt:
            return std::make_unique<StreamingAutomaton>(spec.name, AutomatonKind::kPrefixTree, NGramConfig{}, spec.max_cases);
        case ModelType::kBag:
            return std::make_unique<StreamingAutomaton>(spec.name, AutomatonKind::kBag, NGramConfig{}, spec.max_cases);
        case ModelType::kNGram:
            return std::make_unique<StreamingAutomaton>(spec.name, AutomatonKind::kNGram, NGramConfig{spec.n}, spec.max_cases);
        case ModelType::kAlergia:
            throw ConfigError(spec.name + ": alergia has no streaming update");
        case ModelType::kSoft:
            return std::make_unique<SoftVote>(spec.name, members());
        case ModelType::kHard:
            return std::make_unique<HardVote>(spec.name, members(), policy);
        case ModelType::kAdaptive:
            return std::make_unique<AdaptiveVote>(spec.name, members(), AdaptiveConfig{spec.decay, policy});
        case ModelType::kFallback: {
            auto m = members();
            return std::make_unique<Fallback>(spec.name, std::move(m[0]), std::move(m[1]), spec.min_visits);
        }
    }
    throw ConfigError("unknown model type");
}

std::shared_ptr<const Fdfa> BatchModelFactory::automaton(const ModelSpec& spec) {
    std::string key;
    switch (spec.type) {
        case ModelType::kFpt:
            key = "fpt";
            break;
        case ModelType::kBag:
            key = "bag";
            break;
        case ModelType::kNGram:
            key = "ngram:" + std::to_string(spec.n);
            break;
        case ModelType::kAlergia: {
            std::ostringstream os;
            os << "alergia:" << spec.alpha;
            key = os.str();
            break;
        }
        default:
            throw ConfigError(spec.name + " is not an automaton");
    }
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    if (!fpt_ && (spec.type == ModelType::kFpt || spec.type == ModelType::kAlergia)) {
        fpt_ = std::make_shared<const Fdfa>(build_fpt(train_));
    }
    std::shared_ptr<const Fdfa> a;
    switch (spec.type) {
        case ModelType::kFpt:
            a = fpt_;
            break;
        case ModelType::kBag:
            a = std::make_shared<const Fdfa>(build_bag(train_));
            break;
        case ModelType::kNGram:
            a = std::make_shared<const Fdfa>(build_ngram(train_, NGramConfig{spec.n}));
            break;
        default:
            a = std::make_shared<const Fdfa>(alergia(*fpt_, AlergiaConfig{spec.alpha}));
            break;
    }
    cache_.emplace(key, a);
    return a;
}

std::unique_ptr<Predictor> BatchModelFactory::make(const ModelSpec& spec) {
    auto members = [&] {
        std::vector<PredictorPtr> out;
        for (const auto& m : spec.members) out.push_back(make(m));
        return out;
    };
    switch (spec.type) {
        case ModelType::kFpt:
        case ModelType::kBag:
        case ModelType::kAlergia:
            return std::make_unique<FrozenAutomaton>(spec.name, automaton(spec), false);
        case ModelType::kNGram:
            return std::make_unique<FrozenAutomaton>(spec.name, automaton(spec), true);
        case ModelType::kSoft:
            return std::make_unique<SoftVote>(spec.name, members());
        case ModelType::kHard:
            return std::make_unique<HardVote>(spec.name, members(), OutcomePolicy::kWithStop);
        case ModelType::kAdaptive:
            throw ConfigError(spec.name + ": adaptive voting is defined for streaming runs only");
        case ModelType::kFallback: {
            auto m = members();
            return std::make_unique<Fallback>(spec.name, std::move(m[0]), std::move(m[1]), spec.min_visits);
        }
    }
    throw ConfigError("unknown model type");
}

StreamingResult run_streaming(const RunConfig& cfg, std::span<const Event> stream) {
    StreamingResult result;
    std::vector<Predictor*> ptrs;
    for (const auto& spec : cfg.models) {
        result.models.push_back(make_streaming_predictor(spec, OutcomePolicy::kActivitiesOnly));
        ptrs.push_back(result.models.back().get());
    }
    result.report = evaluate_streaming(ptrs, stream);
    return result;
}

BatchResult run_batch(const RunConfig& cfg, const EventLog& log) {
    BatchResult result;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        SplitSpec split = cfg.split;
        split.seed = cfg.seed + r;
        auto parts = split_log(log, split);
        BatchModelFactory factory(parts.train);
        std::vector<std::unique_ptr<Predictor>> models;
        std::vector<Predictor*> ptrs;
        for (const auto& spec : cfg.models) {
            models.push_back(factory.make(spec));
            ptrs.push_back(models.back().get());
        }
        result.runs.push_back(evaluate_batch(ptrs, parts.test));
        result.seeds.push_back(split.seed);
    }
    result.mean = aggregate_runs(result.runs);
    return result;
}

}  // namespace streampredict
