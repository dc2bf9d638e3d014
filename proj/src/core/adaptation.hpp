#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "meta_learner.hpp"
#include "preference_net.hpp"
#include "sim_world.hpp"
#include "user_oracle.hpp"

namespace mpl {

struct RuntimeConfig {
    double online_lr = 0.7;
    std::size_t window = 16;      // most recent labeled samples per update
    double label_step = 0.1;      // label = H_hat + label_step * Ins
    int converge_steps = 10;      // consecutive satisfied steps
    int step_cap = 600;
    int phase_gap = 3;            // satisfied steps that do not split a phase
    bool record_trace = true;

    void validate() const;
};

/// A "box" of human intervention: [start_step, end_step] inclusive.
struct InterventionPhase {
    int start_step = 0;
    int end_step = 0;
    int instruction_count = 0;

    int duration() const { return end_step - start_step + 1; }
    friend bool operator==(const InterventionPhase &, const InterventionPhase &) = default;
};

struct TraceStep {
    int step = 0;
    Situation situation = Situation::FF;
    PreferenceVector h_hat;
    PreferenceVector measured;
    Instruction ins;
};

struct EpisodeReport {
    std::uint64_t user_id = 0;
    PreferenceType ptype = PreferenceType::Medium;
    std::vector<InterventionPhase> phases;
    int total_steps = 0;
    bool converged = false;
    double final_loss = 0.0;
    std::vector<TraceStep> trace;
    std::vector<Instruction> instructions;  // one per step, kept even without a trace

    int total_intervention_steps() const;
    double mean_phase_duration() const;
};

/// Maximal runs of nonzero instructions; runs separated by at most `gap`
/// satisfied steps are merged into one phase. Step indices are positions in the list.
std::vector<InterventionPhase> detect_phases(const std::vector<Instruction> &instructions, int gap);
std::vector<InterventionPhase> detect_phases(const std::vector<TraceStep> &trace, int gap);

/// Online fine-tuning state shared by headless episodes and live sessions:
/// instructions become labels H_hat + step*Ins, the buffer grows only on
/// nonzero instructions, and each update is one SGD step on the buffer tail.
class OnlineAdapter {
public:
    OnlineAdapter(ModelParams params, const RuntimeConfig &cfg);

    const ModelParams &params() const { return params_; }
    PreferenceVector predict(const FeatureVector &features) const { return forward(params_, features); }

    static PreferenceVector make_label(const PreferenceVector &h_hat, const Instruction &ins, double step);

    /// Returns true when the model was updated (nonzero instruction).
    bool apply(const FeatureVector &features, const PreferenceVector &h_hat, const Instruction &ins);

    std::size_t buffer_size() const { return buffer_.size(); }

private:
    ModelParams params_;
    RuntimeConfig cfg_;
    std::vector<LabeledSample> buffer_;
};

struct EpisodeResult {
    ModelParams params;
    EpisodeReport report;
};

EpisodeResult run_episode(const ModelParams &model, const UserProfile &user, const Scenario &scenario,
                          const RuntimeConfig &cfg, std::uint64_t seed);

struct MetricsRow {
    std::uint64_t user_id = 0;
    PreferenceType ptype = PreferenceType::Medium;
    std::uint64_t seed = 0;
    std::string algo;
    int n_phases = 0;
    double mean_phase_duration = 0.0;
    int total_intervention_steps = 0;
    bool converged = false;
    double final_loss = 0.0;
};

struct Aggregate {
    std::size_t episodes = 0;
    std::size_t phases = 0;
    double mean_duration = 0.0;  // pooled over phases
    double std_duration = 0.0;
    double mean_phase_count = 0.0;  // per episode
    double std_phase_count = 0.0;
};

struct SuiteResult {
    std::vector<MetricsRow> rows;
    Aggregate overall;
    std::array<Aggregate, kPreferenceTypeCount> by_type{};
};

/// Every (user, seed) episode starts from a fresh copy of `model`. Rows are
/// ordered user-major then seed; `threads` > 1 runs episodes concurrently.
SuiteResult evaluate_suite(const Checkpoint &model, const std::vector<UserProfile> &users, const Scenario &scenario,
                           const RuntimeConfig &cfg, const std::vector<std::uint64_t> &seeds, unsigned threads = 1);

/// Pooled mean phase duration over rows (sum of intervention steps / sum of phases).
double pooled_mean_duration(const std::vector<MetricsRow> &rows);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow &row);
void write_metrics_csv(const std::vector<MetricsRow> &rows, const std::string &path);

nlohmann::ordered_json trace_step_to_json(const TraceStep &t);

}  // namespace mpl
