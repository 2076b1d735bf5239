#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streampredict/event_model.hpp"
#include "streampredict/fdfa.hpp"

namespace streampredict {

/// Contract shared by automata, ensembles and external plug-ins.
/// update() consumes exactly one event; query() has no side effects. nullopt = abstain.
class Predictor {
public:
    explicit Predictor(std::string name) : name_(std::move(name)) {}
    virtual ~Predictor() = default;

    Predictor(const Predictor&) = delete;
    Predictor& operator=(const Predictor&) = delete;

    virtual void update(const Event& e) = 0;
    virtual std::optional<Distribution> query(std::string_view case_id) const = 0;

    /// Total frequency at the case's current state, for predictors backed by an automaton.
    virtual std::optional<std::uint64_t> state_visits(std::string_view) const { return std::nullopt; }
    virtual bool tracks_visits() const { return false; }
    virtual std::optional<std::size_t> state_count() const { return std::nullopt; }

    const std::string& name() const { return name_; }

private:
    std::string name_;
};

/// Adapter for externally implemented models (plug-in seam).
class CallbackPredictor final : public Predictor {
public:
    using UpdateFn = std::function<void(const Event&)>;
    using QueryFn = std::function<std::optional<Distribution>(std::string_view)>;

    CallbackPredictor(std::string name, UpdateFn update, QueryFn query)
        : Predictor(std::move(name)), update_(std::move(update)), query_(std::move(query)) {}

    void update(const Event& e) override { update_(e); }
    std::optional<Distribution> query(std::string_view case_id) const override { return query_(case_id); }

private:
    UpdateFn update_;
    QueryFn query_;
};

struct PredictorStats {
    std::uint64_t updates = 0;
    std::uint64_t queries = 0;
    std::vector<double> latency_ms;

    void record(double ms) { latency_ms.push_back(ms); }
    double mean_latency_ms() const;
    double median_latency_ms() const;
};

}  // namespace streampredict
