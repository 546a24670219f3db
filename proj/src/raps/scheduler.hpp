#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raps/cluster.hpp"
#include "raps/workload.hpp"

namespace raps {

enum class Policy { Replay, Fcfs, Easy, External };

Policy parse_policy(std::string_view name);
const char* policy_name(Policy policy);

struct ScheduleDecision {
  std::string job_id;
  std::vector<Placement> placements;

  friend bool operator==(const ScheduleDecision&, const ScheduleDecision&) = default;
};

/// A job holding resources, with the time its resources return to the pool.
struct RunningJob {
  const JobRecord* job = nullptr;
  const Allocation* allocation = nullptr;
  double predicted_end_s = 0.0;
};

struct SchedulerInput {
  const ClusterConfig* cluster = nullptr;
  std::span<const ResourceVector> free;
  std::span<const JobRecord* const> queue;  // submit order
  std::span<const RunningJob> running;
  double clock_s = 0.0;
  double delta_s = 1.0;
};

struct Reservation {
  std::string job_id;
  double start_s = std::numeric_limits<double>::infinity();
};

struct ScheduleResult {
  std::vector<ScheduleDecision> decisions;
  std::optional<Reservation> reservation;  // EASY head-job reservation, if any
};

/// Steps a job occupies: walltime rounded up to whole deltas (at least one).
std::int64_t steps_for(double walltime_s, double delta_s);

/// First `node_count` nodes, in config order, each able to hold `requested`.
std::optional<std::vector<Placement>> first_fit(std::span<const ResourceVector> free,
                                                const JobRecord& job);

ScheduleResult fcfs(const SchedulerInput& in);
ScheduleResult easy_backfill(const SchedulerInput& in);
/// Starts every queued job whose recorded start is at or before the clock,
/// on its recorded nodes when present, else first-fit. Throws
/// SchedulerViolation when a job without recorded nodes cannot be placed.
ScheduleResult replay(const SchedulerInput& in);

ScheduleResult schedule(Policy policy, const SchedulerInput& in);

}  // namespace raps
