#include "raps/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "raps/error.hpp"

namespace raps {

Policy parse_policy(std::string_view name) {
  if (name == "replay") return Policy::Replay;
  if (name == "fcfs") return Policy::Fcfs;
  if (name == "easy") return Policy::Easy;
  if (name == "external") return Policy::External;
  throw Error(ErrorCode::Config, "scheduler: unknown policy '" + std::string(name) +
                                     "' (expected replay, fcfs or easy)");
}

const char* policy_name(Policy policy) {
  switch (policy) {
    case Policy::Replay: return "replay";
    case Policy::Fcfs: return "fcfs";
    case Policy::Easy: return "easy";
    case Policy::External: return "external";
  }
  return "unknown";
}

std::int64_t steps_for(double walltime_s, double delta_s) {
  const double ratio = walltime_s / delta_s;
  auto steps = static_cast<std::int64_t>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
  return std::max<std::int64_t>(steps, 1);
}

std::optional<std::vector<Placement>> first_fit(std::span<const ResourceVector> free,
                                                const JobRecord& job) {
  std::vector<Placement> out;
  for (std::size_t n = 0; n < free.size() && out.size() < static_cast<std::size_t>(job.node_count);
       ++n) {
    if (fits(free[n], job.requested)) out.push_back({n, job.requested});
  }
  if (out.size() < static_cast<std::size_t>(job.node_count)) return std::nullopt;
  return out;
}

namespace {

void take(std::vector<ResourceVector>& free, const std::vector<Placement>& placements) {
  for (const Placement& p : placements) free[p.node] -= p.share;
}

struct Holding {
  double end_s;
  std::vector<Placement> placements;
};

// Free resources at `time_s` assuming every holding with end <= time_s has
// released.
std::vector<ResourceVector> projected_free(const std::vector<ResourceVector>& now,
                                           const std::vector<Holding>& holdings, double time_s) {
  std::vector<ResourceVector> out = now;
  for (const Holding& h : holdings) {
    if (h.end_s <= time_s) {
      for (const Placement& p : h.placements) out[p.node] += p.share;
    }
  }
  return out;
}

// Earliest release time at which `job` fits; infinity if it never does.
double reservation_time(const std::vector<ResourceVector>& now,
                        const std::vector<Holding>& holdings, const JobRecord& job,
                        double clock_s) {
  if (first_fit(now, job)) return clock_s;
  std::vector<double> ends;
  for (const Holding& h : holdings) ends.push_back(h.end_s);
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  for (double t : ends) {
    if (first_fit(projected_free(now, holdings, t), job)) return t;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

ScheduleResult fcfs(const SchedulerInput& in) {
  ScheduleResult result;
  std::vector<ResourceVector> free(in.free.begin(), in.free.end());
  for (const JobRecord* job : in.queue) {
    auto placement = first_fit(free, *job);
    if (!placement) break;
    take(free, *placement);
    result.decisions.push_back({job->job_id, std::move(*placement)});
  }
  return result;
}

ScheduleResult easy_backfill(const SchedulerInput& in) {
  ScheduleResult result;
  std::vector<ResourceVector> free(in.free.begin(), in.free.end());
  std::vector<Holding> holdings;
  for (const RunningJob& r : in.running) {
    holdings.push_back({r.predicted_end_s, r.allocation->placements});
  }

  std::size_t head = 0;
  for (; head < in.queue.size(); ++head) {
    const JobRecord& job = *in.queue[head];
    auto placement = first_fit(free, job);
    if (!placement) break;
    take(free, *placement);
    holdings.push_back(
        {in.clock_s + static_cast<double>(steps_for(job.walltime_s, in.delta_s)) * in.delta_s,
         *placement});
    result.decisions.push_back({job.job_id, std::move(*placement)});
  }
  if (head == in.queue.size()) return result;

  const JobRecord& blocked = *in.queue[head];
  const double shadow = reservation_time(free, holdings, blocked, in.clock_s);
  result.reservation = Reservation{blocked.job_id, shadow};

  for (std::size_t i = head + 1; i < in.queue.size(); ++i) {
    const JobRecord& job = *in.queue[i];
    auto placement = first_fit(free, job);
    if (!placement) continue;
    const double end =
        in.clock_s + static_cast<double>(steps_for(job.walltime_s, in.delta_s)) * in.delta_s;
    if (std::isfinite(shadow)) {
      std::vector<Holding> trial = holdings;
      trial.push_back({end, *placement});
      std::vector<ResourceVector> after = free;
      take(after, *placement);
      if (!first_fit(projected_free(after, trial, shadow), blocked)) continue;
    }
    take(free, *placement);
    holdings.push_back({end, *placement});
    result.decisions.push_back({job.job_id, std::move(*placement)});
  }
  return result;
}

ScheduleResult replay(const SchedulerInput& in) {
  ScheduleResult result;
  std::vector<ResourceVector> free(in.free.begin(), in.free.end());
  for (const JobRecord* job : in.queue) {
    if (!job->trace_start_time_s) {
      throw Error(ErrorCode::Config,
                  "replay mode requires trace_start_time_s for job " + job->job_id);
    }
    if (*job->trace_start_time_s > in.clock_s + 1e-9 * std::max(1.0, in.clock_s)) continue;
    std::vector<Placement> placements;
    if (!job->trace_nodes.empty()) {
      for (const std::string& id : job->trace_nodes) {
        placements.push_back({in.cluster->index_of(id), job->requested});
      }
    } else {
      auto ff = first_fit(free, *job);
      if (!ff) {
        throw Error(ErrorCode::SchedulerViolation,
                    "replay: job " + job->job_id + " does not fit at its recorded start time");
      }
      placements = std::move(*ff);
    }
    for (const Placement& p : placements) free[p.node] -= p.share;
    result.decisions.push_back({job->job_id, std::move(placements)});
  }
  return result;
}

ScheduleResult schedule(Policy policy, const SchedulerInput& in) {
  switch (policy) {
    case Policy::Replay: return replay(in);
    case Policy::Fcfs: return fcfs(in);
    case Policy::Easy: return easy_backfill(in);
    case Policy::External: return {};
  }
  return {};
}

}  // namespace raps
