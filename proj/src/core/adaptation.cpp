#include "adaptation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "error.hpp"

namespace mpl {

void RuntimeConfig::validate() const {
    if (!(online_lr >= 0.0)) throw Error(ErrorCode::InvalidArgument, "online learning rate must be non-negative");
    if (window < 1) throw Error(ErrorCode::InvalidArgument, "update window must be at least 1");
    if (converge_steps < 1 || step_cap < 1) throw Error(ErrorCode::InvalidArgument, "step counts must be positive");
    if (phase_gap < 0) throw Error(ErrorCode::InvalidArgument, "phase gap must be non-negative");
}

int EpisodeReport::total_intervention_steps() const {
    int total = 0;
    for (const auto &p : phases) total += p.duration();
    return total;
}

double EpisodeReport::mean_phase_duration() const {
    return phases.empty() ? 0.0 : static_cast<double>(total_intervention_steps()) / static_cast<double>(phases.size());
}

std::vector<InterventionPhase> detect_phases(const std::vector<Instruction> &instructions, int gap) {
    std::vector<InterventionPhase> phases;
    for (int t = 0; t < static_cast<int>(instructions.size()); ++t) {
        if (instructions[static_cast<std::size_t>(t)].is_zero()) continue;
        if (!phases.empty() && t - phases.back().end_step - 1 <= gap) {
            phases.back().end_step = t;
            ++phases.back().instruction_count;
        } else {
            phases.push_back({t, t, 1});
        }
    }
    return phases;
}

std::vector<InterventionPhase> detect_phases(const std::vector<TraceStep> &trace, int gap) {
    std::vector<Instruction> ins;
    ins.reserve(trace.size());
    for (const auto &t : trace) ins.push_back(t.ins);
    auto phases = detect_phases(ins, gap);
    // Map list positions back to recorded step numbers.
    for (auto &p : phases) {
        p.start_step = trace[static_cast<std::size_t>(p.start_step)].step;
        p.end_step = trace[static_cast<std::size_t>(p.end_step)].step;
    }
    return phases;
}

OnlineAdapter::OnlineAdapter(ModelParams params, const RuntimeConfig &cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
}

PreferenceVector OnlineAdapter::make_label(const PreferenceVector &h_hat, const Instruction &ins, double step) {
    PreferenceVector label;
    for (std::size_t b = 0; b < kBehaviorCount; ++b) label[b] = std::clamp(h_hat[b] + step * ins[b], 0.0, 1.0);
    return label;
}

bool OnlineAdapter::apply(const FeatureVector &features, const PreferenceVector &h_hat, const Instruction &ins) {
    for (int c : ins.v)
        if (c < -1 || c > 1) throw Error(ErrorCode::InvalidInstruction, "invalid instruction");
    if (ins.is_zero()) return false;
    buffer_.push_back({features, make_label(h_hat, ins, cfg_.label_step)});
    const std::size_t n = std::min(cfg_.window, buffer_.size());
    params_ = sgd_step(params_, std::span<const LabeledSample>(buffer_).last(n), cfg_.online_lr);
    return true;
}

EpisodeResult run_episode(const ModelParams &model, const UserProfile &user, const Scenario &scenario,
                          const RuntimeConfig &cfg, std::uint64_t seed) {
    cfg.validate();
    FlockWorld world(scenario, seed);
    OnlineAdapter adapter(model, cfg);
    EpisodeReport report;
    report.user_id = user.id;
    report.ptype = user.ptype;

    int satisfied_streak = 0;
    for (int t = 0; t < cfg.step_cap; ++t) {
        const SituationContext ctx = world.situation();
        const FeatureVector features = make_features(world.measured(), ctx, scenario.thresholds);
        const PreferenceVector h_hat = adapter.predict(features);
        world.advance(h_hat);
        // The user critiques the commanded behavior; R is kept for the trace.
        const Instruction ins = instruct(user, ctx, h_hat);
        if (cfg.record_trace) report.trace.push_back({t, ctx.situation(), h_hat, world.measured(), ins});
        report.instructions.push_back(ins);
        report.total_steps = t + 1;
        if (adapter.apply(features, h_hat, ins)) {
            satisfied_streak = 0;
        } else if (++satisfied_streak >= cfg.converge_steps) {
            report.converged = true;
            break;
        }
    }

    report.phases = detect_phases(report.instructions, cfg.phase_gap);
    const SituationContext ctx = world.situation();
    report.final_loss = loss(adapter.predict(make_features(world.measured(), ctx, scenario.thresholds)),
                             user.target(ctx.situation()));
    return {adapter.params(), std::move(report)};
}

namespace {

Aggregate aggregate(const std::vector<const MetricsRow *> &rows, const std::vector<const EpisodeReport *> &reports) {
    Aggregate a;
    a.episodes = rows.size();
    if (rows.empty()) return a;
    std::vector<double> durations;
    for (const auto *r : reports)
        for (const auto &p : r->phases) durations.push_back(p.duration());
    a.phases = durations.size();
    if (!durations.empty()) {
        for (double d : durations) a.mean_duration += d;
        a.mean_duration /= static_cast<double>(durations.size());
        for (double d : durations) a.std_duration += (d - a.mean_duration) * (d - a.mean_duration);
        a.std_duration = std::sqrt(a.std_duration / static_cast<double>(durations.size()));
    }
    for (const auto *r : rows) a.mean_phase_count += r->n_phases;
    a.mean_phase_count /= static_cast<double>(rows.size());
    for (const auto *r : rows) a.std_phase_count += (r->n_phases - a.mean_phase_count) * (r->n_phases - a.mean_phase_count);
    a.std_phase_count = std::sqrt(a.std_phase_count / static_cast<double>(rows.size()));
    return a;
}

}  // namespace

SuiteResult evaluate_suite(const Checkpoint &model, const std::vector<UserProfile> &users, const Scenario &scenario,
                           const RuntimeConfig &cfg, const std::vector<std::uint64_t> &seeds, unsigned threads) {
    if (users.empty()) throw Error(ErrorCode::InvalidArgument, "empty user list");
    if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "no seeds given");
    RuntimeConfig episode_cfg = cfg;
    episode_cfg.record_trace = false;
    episode_cfg.validate();

    const std::size_t total = users.size() * seeds.size();
    std::vector<EpisodeReport> reports(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < total; k = next++) {
            const auto &user = users[k / seeds.size()];
            reports[k] = run_episode(model.params, user, scenario, episode_cfg, seeds[k % seeds.size()]).report;
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(total)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    SuiteResult result;
    result.rows.reserve(total);
    for (std::size_t k = 0; k < total; ++k) {
        const auto &r = reports[k];
        result.rows.push_back({r.user_id, r.ptype, seeds[k % seeds.size()], model.trained_with,
                               static_cast<int>(r.phases.size()), r.mean_phase_duration(),
                               r.total_intervention_steps(), r.converged, r.final_loss});
    }
    std::vector<const MetricsRow *> all_rows;
    std::vector<const EpisodeReport *> all_reports;
    std::array<std::vector<const MetricsRow *>, kPreferenceTypeCount> type_rows;
    std::array<std::vector<const EpisodeReport *>, kPreferenceTypeCount> type_reports;
    for (std::size_t k = 0; k < total; ++k) {
        const auto t = static_cast<std::size_t>(reports[k].ptype);
        all_rows.push_back(&result.rows[k]);
        all_reports.push_back(&reports[k]);
        type_rows[t].push_back(&result.rows[k]);
        type_reports[t].push_back(&reports[k]);
    }
    result.overall = aggregate(all_rows, all_reports);
    for (std::size_t t = 0; t < kPreferenceTypeCount; ++t) result.by_type[t] = aggregate(type_rows[t], type_reports[t]);
    return result;
}

double pooled_mean_duration(const std::vector<MetricsRow> &rows) {
    long steps = 0;
    long phases = 0;
    for (const auto &r : rows) {
        steps += r.total_intervention_steps;
        phases += r.n_phases;
    }
    return phases == 0 ? 0.0 : static_cast<double>(steps) / static_cast<double>(phases);
}

std::string metrics_csv_header() {
    return "user_id,ptype,seed,algo,n_phases,mean_phase_duration,total_intervention_steps,converged,final_loss";
}

std::string metrics_csv_row(const MetricsRow &r) {
    return fmt::format("{},{},{},{},{},{:.6f},{},{},{:.9f}", r.user_id, preference_type_name(r.ptype), r.seed, r.algo,
                       r.n_phases, r.mean_phase_duration, r.total_intervention_steps, r.converged ? 1 : 0,
                       r.final_loss);
}

void write_metrics_csv(const std::vector<MetricsRow> &rows, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write metrics '" + path + "'");
    out << metrics_csv_header() << '\n';
    for (const auto &r : rows) out << metrics_csv_row(r) << '\n';
    if (!out) throw Error(ErrorCode::Io, "failed writing metrics '" + path + "'");
}

nlohmann::ordered_json trace_step_to_json(const TraceStep &t) {
    auto pref = [](const PreferenceVector &p) {
        nlohmann::ordered_json j;
        for (std::size_t b = 0; b < kBehaviorCount; ++b) j[std::string(kBehaviorNames[b])] = p[b];
        return j;
    };
    nlohmann::ordered_json ins;
    for (std::size_t b = 0; b < kBehaviorCount; ++b) ins[std::string(kBehaviorNames[b])] = t.ins[b];
    nlohmann::ordered_json j;
    j["step"] = t.step;
    j["situation"] = situation_name(t.situation);
    j["H_hat"] = pref(t.h_hat);
    j["R"] = pref(t.measured);
    j["ins"] = std::move(ins);
    return j;
}

}  // namespace mpl
