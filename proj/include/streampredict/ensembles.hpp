#pragma once

#include <memory>
#include <vector>

#include "streampredict/predictor.hpp"

namespace streampredict {

using PredictorPtr = std::unique_ptr<Predictor>;

/// Members receive every update; subclasses differ in how queries are answered.
class Ensemble : public Predictor {
public:
    Ensemble(std::string name, std::vector<PredictorPtr> members, std::size_t min_members = 2);

    void update(const Event& e) override;

    std::size_t size() const { return members_.size(); }
    const Predictor& member(std::size_t i) const { return *members_.at(i); }

protected:
    std::vector<PredictorPtr> members_;
};

/// Arithmetic mean of the non-abstaining members' distributions.
class SoftVote final : public Ensemble {
public:
    SoftVote(std::string name, std::vector<PredictorPtr> members);
    std::optional<Distribution> query(std::string_view case_id) const override;
};

/// Plurality over member outcomes, returned as a Dirac distribution; ties go to the
/// smallest symbol index.
class HardVote final : public Ensemble {
public:
    HardVote(std::string name, std::vector<PredictorPtr> members, OutcomePolicy policy);
    std::optional<Distribution> query(std::string_view case_id) const override;

private:
    OutcomePolicy policy_;
};

struct AdaptiveConfig {
    /// 0 selects the running mean; otherwise score <- decay*score + (1-decay)*hit.
    double decay = 0.0;
    OutcomePolicy policy = OutcomePolicy::kActivitiesOnly;
};

/// Answers from the member with the best running accuracy (ties: earliest member).
class AdaptiveVote final : public Ensemble {
public:
    AdaptiveVote(std::string name, std::vector<PredictorPtr> members, AdaptiveConfig cfg = {});

    void update(const Event& e) override;
    std::optional<Distribution> query(std::string_view case_id) const override;

    /// nullopt until the member has been scored once.
    std::optional<double> score(std::size_t member) const;
    /// Sets the running-mean bookkeeping directly (used to seed scores).
    void set_counts(std::size_t member, std::uint64_t correct, std::uint64_t scored);

private:
    struct Score {
        std::uint64_t correct = 0;
        std::uint64_t scored = 0;
        double decayed = 0.0;
    };
    AdaptiveConfig cfg_;
    std::vector<Score> scores_;
};

/// Primary answers when its current state has at least `min_visits` total frequency
/// and it does not abstain; the secondary answers otherwise.
class Fallback final : public Ensemble {
public:
    Fallback(std::string name, PredictorPtr primary, PredictorPtr secondary, std::uint64_t min_visits = 10);
    std::optional<Distribution> query(std::string_view case_id) const override;

    std::uint64_t min_visits() const { return min_visits_; }

private:
    std::uint64_t min_visits_;
};

}  // namespace streampredict
