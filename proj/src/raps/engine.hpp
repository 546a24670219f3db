#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raps/cluster.hpp"
#include "raps/power.hpp"
#include "raps/scheduler.hpp"
#include "raps/workload.hpp"

namespace raps {

enum class Mode { Replay, Reschedule };

const char* mode_name(Mode mode);

struct SimConfig {
  double delta_s = 1.0;
  Mode mode = Mode::Reschedule;
  Policy scheduler = Policy::Fcfs;
  std::optional<double> horizon_s;
  CarbonIntensity carbon_intensity{0.0};
  double starvation_cap_s = 1e8;
  /// Load-fraction reference for efficiency stages without their own
  /// rating; defaults to the cluster's summed peak power.
  std::optional<double> rated_power_w;

  /// Keys: mode, scheduler, delta_s, horizon_s, carbon_intensity (number,
  /// [[time_s, g], ...] or {"csv": path}), starvation_cap_s, rated_power_w.
  /// Relative CSV paths resolve against `base_dir`.
  static SimConfig from_json_text(std::string_view text, const std::string& base_dir = "");
  void validate() const;
};

struct StepReport {
  double clock_s = 0.0;  // start of the step
  double it_power_w = 0.0;
  double facility_power_w = 0.0;
  double loss_w = 0.0;
  double pue_overhead_w = 0.0;
  std::vector<std::string> jobs_started;
  std::vector<std::string> jobs_finished;
  double util_fraction = 0.0;
  std::size_t running_jobs = 0;
  std::size_t queued_jobs = 0;
};

struct JobOutcome {
  std::string job_id;
  double submit_time_s = 0.0;
  std::optional<double> start_time_s;
  std::optional<double> end_time_s;
  std::vector<std::string> nodes;
};

struct SimSummary {
  std::string scheduler;
  std::string mode;
  double delta_s = 1.0;
  std::optional<double> horizon_s;
  std::int64_t steps = 0;
  std::int64_t jobs_total = 0;
  std::int64_t jobs_unfinished = 0;
  bool horizon_reached = false;
  double pue = 1.0;
  MetricsSummary metrics;
};

struct SimResult {
  SimSummary summary;
  std::vector<StepReport> history;
  std::vector<JobOutcome> jobs;  // submit order
};

/// Time-stepped simulation of one workload on one cluster. A step is, in
/// order: admit arrivals, schedule, progress/complete running jobs, compute
/// power, accumulate metrics, advance the clock. Resources freed in a step
/// become schedulable in the next one, and a job finishing mid-step is
/// charged for the whole step.
class Engine {
 public:
  Engine(const ClusterConfig& cluster, std::vector<JobRecord> jobs, SimConfig config);

  /// Full step using the configured policy.
  StepReport step();

  // Phases, for callers that make their own dispatch decisions.
  void admit_arrivals();
  /// Commits one start decision at the current clock. Capacity failures
  /// surface as SchedulerViolation; the engine is unchanged on error.
  void dispatch(const ScheduleDecision& decision);
  StepReport advance();

  bool drained() const { return pending_ == jobs_.size() && queue_.empty() && running_.empty(); }
  bool horizon_reached() const;
  bool finished() const { return drained() || horizon_reached(); }

  double clock_s() const { return clock_s_; }
  const SimConfig& config() const { return config_; }
  const ClusterConfig& cluster() const { return cluster_; }
  const ResourceLedger& ledger() const { return ledger_; }
  const MetricsAccumulator& metrics() const { return metrics_; }
  const std::vector<JobRecord>& jobs() const { return jobs_; }
  const std::vector<JobOutcome>& outcomes() const { return outcomes_; }
  std::vector<const JobRecord*> queue() const;
  std::vector<RunningJob> running() const;
  std::size_t running_count() const { return running_.size(); }
  std::size_t queued_count() const { return queue_.size(); }
  std::size_t pending_count() const { return jobs_.size() - pending_; }
  double rated_power_w() const { return rated_power_w_; }
  /// Facility power with every node at peak draw.
  double rated_facility_power_w() const;

  /// Snapshot of summary + everything recorded so far.
  SimResult result(const std::vector<StepReport>& history) const;

 private:
  struct Running {
    std::size_t job = 0;
    double start_s = 0.0;
    std::int64_t steps_done = 0;
    std::int64_t steps_total = 0;
  };

  std::size_t job_index(const std::string& job_id) const;

  ClusterConfig cluster_;
  std::vector<JobRecord> jobs_;
  SimConfig config_;
  double rated_power_w_ = 0.0;

  ResourceLedger ledger_;
  MetricsAccumulator metrics_;
  std::map<std::string, std::size_t> index_;
  std::size_t pending_ = 0;              // jobs_[pending_..] not yet submitted
  std::vector<std::size_t> queue_;       // submit order
  std::map<std::string, Running> running_;
  std::vector<JobOutcome> outcomes_;
  std::vector<std::string> started_this_step_;
  std::map<std::string, double> reservations_;  // EASY: earliest reservation seen
  double clock_s_ = 0.0;
  std::int64_t step_count_ = 0;
};

/// Runs to drain or horizon (an empty workload runs to the horizon). Throws StarvationGuard when the clock passes
/// the configured cap, or immediately when the queue can provably never
/// make progress (idle cluster, no future arrivals, no start decision).
SimResult run(const ClusterConfig& cluster, std::vector<JobRecord> jobs, const SimConfig& config);

std::string summary_json(const SimSummary& summary);
std::string history_csv(const std::vector<StepReport>& history);
std::string jobs_csv(const std::vector<JobOutcome>& jobs);

inline constexpr std::string_view kHistoryHeader =
    "time_s,it_power_w,facility_power_w,loss_w,util_fraction,running_jobs,queued_jobs";
inline constexpr std::string_view kJobsHeader =
    "job_id,submit_time_s,start_time_s,end_time_s,wait_s,run_s,slowdown,nodes";

}  // namespace raps
