#include "raps/engine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "raps/error.hpp"
#include "raps/json_util.hpp"

namespace raps {

using detail::json;

const char* mode_name(Mode mode) { return mode == Mode::Replay ? "replay" : "reschedule"; }

SimConfig SimConfig::from_json_text(std::string_view text, const std::string& base_dir) {
  const json doc = detail::parse_json(text, "sim config");
  const std::string ctx = "sim";
  SimConfig c;
  const auto mode = detail::optional<std::string>(doc, "mode", "reschedule", ctx);
  if (mode == "replay") {
    c.mode = Mode::Replay;
  } else if (mode == "reschedule") {
    c.mode = Mode::Reschedule;
  } else {
    throw Error(ErrorCode::Config, "sim.mode: expected replay or reschedule, got " + mode);
  }
  const auto sched = detail::optional<std::string>(
      doc, "scheduler", c.mode == Mode::Replay ? "replay" : "fcfs", ctx);
  c.scheduler = parse_policy(sched);
  c.delta_s = detail::optional<double>(doc, "delta_s", c.delta_s, ctx);
  if (doc.contains("horizon_s") && !doc["horizon_s"].is_null()) {
    c.horizon_s = detail::require<double>(doc, "horizon_s", ctx);
  }
  c.starvation_cap_s = detail::optional<double>(doc, "starvation_cap_s", c.starvation_cap_s, ctx);
  if (doc.contains("rated_power_w") && !doc["rated_power_w"].is_null()) {
    c.rated_power_w = detail::require<double>(doc, "rated_power_w", ctx);
  }
  if (doc.contains("carbon_intensity") && !doc["carbon_intensity"].is_null()) {
    const json& ci = doc["carbon_intensity"];
    if (ci.is_number()) {
      c.carbon_intensity = CarbonIntensity(ci.get<double>());
      if (ci.get<double>() < 0.0) {
        throw Error(ErrorCode::Config, "sim.carbon_intensity: must be >= 0");
      }
    } else if (ci.is_array()) {
      c.carbon_intensity = CarbonIntensity(
          detail::require<std::vector<std::pair<double, double>>>(doc, "carbon_intensity", ctx));
    } else if (ci.is_object() && ci.contains("csv")) {
      std::filesystem::path p = detail::require<std::string>(ci, "csv", ctx + ".carbon_intensity");
      if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
      c.carbon_intensity = CarbonIntensity::load_csv(p);
    } else {
      throw Error(ErrorCode::Config, "sim.carbon_intensity: expected number, list or {csv}");
    }
  }
  c.validate();
  return c;
}

void SimConfig::validate() const {
  if (!(delta_s > 0.0) || !std::isfinite(delta_s)) {
    throw Error(ErrorCode::Config, "sim.delta_s: must be > 0");
  }
  if (horizon_s && !(*horizon_s > 0.0)) throw Error(ErrorCode::Config, "sim.horizon_s: must be > 0");
  if (!(starvation_cap_s > 0.0)) throw Error(ErrorCode::Config, "sim.starvation_cap_s: must be > 0");
  if (rated_power_w && !(*rated_power_w > 0.0)) {
    throw Error(ErrorCode::Config, "sim.rated_power_w: must be > 0");
  }
  if (mode == Mode::Replay && scheduler != Policy::Replay) {
    throw Error(ErrorCode::Config, "sim.scheduler: replay mode uses the replay scheduler");
  }
  if (mode == Mode::Reschedule && scheduler == Policy::Replay) {
    throw Error(ErrorCode::Config, "sim.scheduler: reschedule mode needs fcfs or easy");
  }
}

Engine::Engine(const ClusterConfig& cluster, std::vector<JobRecord> jobs, SimConfig config)
    : cluster_(cluster), jobs_(std::move(jobs)), config_(std::move(config)), ledger_(cluster_) {
  config_.validate();
  rated_power_w_ = config_.rated_power_w.value_or(cluster_.rated_it_power_w());

  std::stable_sort(jobs_.begin(), jobs_.end(), [](const JobRecord& a, const JobRecord& b) {
    if (a.submit_time_s != b.submit_time_s) return a.submit_time_s < b.submit_time_s;
    return a.job_id < b.job_id;
  });
  for (std::size_t i = 0; i < jobs_.size(); ++i) {
    JobRecord& job = jobs_[i];
    if (!index_.emplace(job.job_id, i).second) {
      throw Error(ErrorCode::Config, "workload: duplicate job_id " + job.job_id);
    }
    if (!(job.walltime_s > 0.0)) {
      throw Error(ErrorCode::Config, "workload: job " + job.job_id + " walltime_s must be > 0");
    }
    if (job.node_count < 1) {
      throw Error(ErrorCode::Config, "workload: job " + job.job_id + " node_count must be >= 1");
    }
    for (const std::string& id : job.trace_nodes) {
      if (!cluster_.contains(id)) {
        throw Error(ErrorCode::Config,
                    "workload: job " + job.job_id + " trace_nodes names unknown node " + id);
      }
    }
    if (config_.mode == Mode::Replay && !job.trace_start_time_s) {
      throw Error(ErrorCode::Config,
                  "replay mode requires trace_start_time_s for job " + job.job_id);
    }
    if (job.series.cpu_util.empty()) job.series.cpu_util.push_back(1.0);
    job.series = resample(job.series, config_.delta_s);
    outcomes_.push_back({job.job_id, job.submit_time_s, std::nullopt, std::nullopt, {}});
  }
}

bool Engine::horizon_reached() const {
  return config_.horizon_s && clock_s_ >= *config_.horizon_s - 1e-9 * config_.delta_s;
}

double Engine::rated_facility_power_w() const {
  return power_breakdown(cluster_.rated_it_power_w(), cluster_.efficiency_chain(), rated_power_w_,
                         cluster_.pue())
      .facility_w;
}

std::size_t Engine::job_index(const std::string& job_id) const {
  auto it = index_.find(job_id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownJob, "unknown job " + job_id);
  return it->second;
}

std::vector<const JobRecord*> Engine::queue() const {
  std::vector<const JobRecord*> out;
  out.reserve(queue_.size());
  for (std::size_t i : queue_) out.push_back(&jobs_[i]);
  return out;
}

std::vector<RunningJob> Engine::running() const {
  std::vector<RunningJob> out;
  for (const auto& [id, r] : running_) {
    const double end =
        r.start_s + static_cast<double>(r.steps_total) * config_.delta_s;
    out.push_back({&jobs_[r.job], &ledger_.allocations().at(id), end});
  }
  return out;
}

void Engine::admit_arrivals() {
  const double eps = 1e-9 * std::max(1.0, clock_s_);
  while (pending_ < jobs_.size() && jobs_[pending_].submit_time_s <= clock_s_ + eps) {
    queue_.push_back(pending_++);
  }
}

void Engine::dispatch(const ScheduleDecision& decision) {
  const std::size_t idx = job_index(decision.job_id);
  auto qpos = std::find(queue_.begin(), queue_.end(), idx);
  if (qpos == queue_.end()) {
    throw Error(ErrorCode::SchedulerViolation, "job " + decision.job_id + " is not queued");
  }
  const JobRecord& job = jobs_[idx];
  if (decision.placements.size() != static_cast<std::size_t>(job.node_count)) {
    throw Error(ErrorCode::SchedulerViolation,
                "job " + job.job_id + " placed on the wrong number of nodes");
  }
  for (const Placement& p : decision.placements) {
    if (p.share != job.requested) {
      throw Error(ErrorCode::SchedulerViolation,
                  "job " + job.job_id + " placement differs from its request");
    }
  }
  if (config_.mode == Mode::Replay) {
    const double start = *job.trace_start_time_s;
    if (clock_s_ + 1e-9 * std::max(1.0, clock_s_) < start || clock_s_ - start >= config_.delta_s) {
      throw Error(ErrorCode::SchedulerViolation,
                  "replay: job " + job.job_id + " must start at its recorded time");
    }
  }
  if (auto it = reservations_.find(job.job_id); it != reservations_.end()) {
    if (clock_s_ > it->second + 1e-9 * std::max(1.0, clock_s_)) {
      throw Error(ErrorCode::SchedulerViolation,
                  "easy: job " + job.job_id + " started after its reservation");
    }
    reservations_.erase(it);
  }
  try {
    ledger_.allocate(job.job_id, decision.placements, clock_s_);
  } catch (const Error& e) {
    throw Error(ErrorCode::SchedulerViolation, e.what());
  }
  queue_.erase(qpos);
  running_.emplace(job.job_id,
                   Running{idx, clock_s_, 0, steps_for(job.walltime_s, config_.delta_s)});
  JobOutcome& out = outcomes_[idx];
  out.start_time_s = clock_s_;
  for (const Placement& p : decision.placements) out.nodes.push_back(cluster_.node(p.node).node_id);
  started_this_step_.push_back(job.job_id);
}

StepReport Engine::step() {
  admit_arrivals();
  if (config_.scheduler != Policy::External) {
    const auto queued = queue();
    const auto live = running();
    SchedulerInput in{&cluster_, ledger_.free(), queued, live, clock_s_, config_.delta_s};
    ScheduleResult decided = schedule(config_.scheduler, in);
    for (const ScheduleDecision& d : decided.decisions) dispatch(d);
    if (decided.reservation && std::isfinite(decided.reservation->start_s)) {
      auto [it, inserted] =
          reservations_.emplace(decided.reservation->job_id, decided.reservation->start_s);
      if (!inserted) it->second = std::min(it->second, decided.reservation->start_s);
    }
  }
  return advance();
}

StepReport Engine::advance() {
  const double delta = config_.delta_s;
  const bool use_measured = config_.mode == Mode::Replay;
  const std::size_t n_nodes = cluster_.size();

  std::vector<std::vector<TenantLoad>> modeled(n_nodes);
  std::vector<double> measured(n_nodes, 0.0);
  std::vector<bool> has_measured(n_nodes, false);
  double gflops = 0.0;
  for (const auto& [id, r] : running_) {
    const JobRecord& job = jobs_[r.job];
    const auto k = static_cast<std::size_t>(r.steps_done);
    const Allocation& alloc = ledger_.allocations().at(id);
    if (job.gflops_estimate) gflops += *job.gflops_estimate;
    if (use_measured && job.series.measured_power_w && !job.series.measured_power_w->empty()) {
      const double per_node = held(*job.series.measured_power_w, k, 0.0) /
                              static_cast<double>(alloc.placements.size());
      for (const Placement& p : alloc.placements) {
        measured[p.node] += per_node;
        has_measured[p.node] = true;
      }
      continue;
    }
    const double cpu = held(job.series.cpu_util, k, 1.0);
    const double gpu = held(job.series.gpu_util, k, 1.0);
    for (const Placement& p : alloc.placements) modeled[p.node].push_back({p.share, cpu, gpu});
  }

  double it_power = 0.0;
  for (std::size_t n = 0; n < n_nodes; ++n) {
    const Node& node = cluster_.node(n);
    // Measured job power already includes the node's idle draw.
    it_power += has_measured[n] ? measured[n] + node_dynamic_power(node, modeled[n])
                                : node_power(node, modeled[n]);
  }
  const PowerBreakdown power =
      power_breakdown(it_power, cluster_.efficiency_chain(), rated_power_w_, cluster_.pue());

  StepReport report;
  report.clock_s = clock_s_;
  report.it_power_w = power.it_w;
  report.facility_power_w = power.facility_w;
  report.loss_w = power.loss_w;
  report.pue_overhead_w = power.pue_overhead_w;
  report.jobs_started = std::move(started_this_step_);
  started_this_step_.clear();
  report.running_jobs = running_.size();
  const std::size_t busy = ledger_.busy_nodes();
  report.util_fraction = static_cast<double>(busy) / static_cast<double>(n_nodes);

  const double end_clock = clock_s_ + delta;
  for (auto it = running_.begin(); it != running_.end();) {
    Running& r = it->second;
    if (++r.steps_done < r.steps_total) {
      ++it;
      continue;
    }
    ledger_.release(it->first);
    JobOutcome& out = outcomes_[r.job];
    out.end_time_s = end_clock;
    metrics_.add_finished_job(*out.start_time_s - out.submit_time_s, end_clock - *out.start_time_s);
    report.jobs_finished.push_back(it->first);
    it = running_.erase(it);
  }
  report.queued_jobs = queue_.size();

  metrics_.add_step(power, delta, config_.carbon_intensity.at(clock_s_), busy, n_nodes, gflops);
  if (!ledger_.consistent()) {
    throw Error(ErrorCode::CapacityViolation, "node capacity exceeded at t=" + format_double(clock_s_));
  }
  ++step_count_;
  clock_s_ = static_cast<double>(step_count_) * delta;
  return report;
}

SimResult Engine::result(const std::vector<StepReport>& history) const {
  SimResult out;
  SimSummary& s = out.summary;
  s.scheduler = policy_name(config_.scheduler);
  s.mode = mode_name(config_.mode);
  s.delta_s = config_.delta_s;
  s.horizon_s = config_.horizon_s;
  s.steps = step_count_;
  s.jobs_total = static_cast<std::int64_t>(jobs_.size());
  s.jobs_unfinished = s.jobs_total - metrics_.jobs_finished();
  s.horizon_reached = !drained() && horizon_reached();
  s.pue = cluster_.pue();
  if (clock_s_ > 0.0) {
    s.metrics = finalize_metrics(metrics_, clock_s_);
  }
  out.history = history;
  out.jobs = outcomes_;
  return out;
}

SimResult run(const ClusterConfig& cluster, std::vector<JobRecord> jobs, const SimConfig& config) {
  if (jobs.empty() && !config.horizon_s) {
    throw Error(ErrorCode::Config, "workload is empty and no horizon_s is set");
  }
  // An empty workload runs to the horizon so the idle draw is still recorded.
  const bool idle_run = jobs.empty();
  Engine engine(cluster, std::move(jobs), config);
  std::vector<StepReport> history;
  const bool policy_driven = config.scheduler == Policy::Fcfs || config.scheduler == Policy::Easy;
  while (idle_run ? !engine.horizon_reached() : !engine.finished()) {
    if (engine.clock_s() > config.starvation_cap_s) {
      throw Error(ErrorCode::StarvationGuard,
                  "clock passed " + format_double(config.starvation_cap_s) +
                      " s with jobs still queued; a request may exceed every node");
    }
    history.push_back(engine.step());
    const StepReport& last = history.back();
    if (policy_driven && last.jobs_started.empty() && last.running_jobs == 0 &&
        engine.pending_count() == 0 && engine.queued_count() > 0) {
      throw Error(ErrorCode::StarvationGuard,
                  "job " + engine.queue().front()->job_id +
                      " can never start: its request exceeds the cluster");
    }
  }
  return engine.result(history);
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string summary_json(const SimSummary& s) {
  nlohmann::ordered_json j;
  const MetricsSummary& m = s.metrics;
  j["scheduler"] = s.scheduler;
  j["mode"] = s.mode;
  j["delta_s"] = s.delta_s;
  j["horizon_s"] = optional_number(s.horizon_s);
  j["steps"] = s.steps;
  j["makespan_s"] = m.makespan_s;
  j["jobs_total"] = s.jobs_total;
  j["jobs_finished"] = m.jobs_finished;
  j["jobs_unfinished"] = s.jobs_unfinished;
  j["horizon_reached"] = s.horizon_reached;
  j["throughput_jobs_per_s"] = optional_number(m.throughput_jobs_per_s);
  j["mean_slowdown"] = optional_number(m.mean_slowdown);
  j["mean_wait_s"] = optional_number(m.mean_wait_s);
  j["it_energy_kwh"] = m.it_energy_kwh;
  j["loss_energy_kwh"] = m.loss_energy_kwh;
  j["pue_overhead_energy_kwh"] = m.pue_overhead_energy_kwh;
  j["facility_energy_kwh"] = m.facility_energy_kwh;
  j["carbon_g"] = m.carbon_g;
  j["gflops_per_watt"] = optional_number(m.gflops_per_watt);
  j["conversion_efficiency"] = optional_number(m.conversion_efficiency);
  j["pue"] = s.pue;
  j["utilization"] = optional_number(m.utilization);
  j["mean_it_power_w"] = optional_number(m.mean_it_power_w);
  j["mean_facility_power_w"] = optional_number(m.mean_facility_power_w);
  j["peak_facility_power_w"] = m.peak_facility_power_w;
  return j.dump(2) + "\n";
}

std::string history_csv(const std::vector<StepReport>& history) {
  std::string out(kHistoryHeader);
  out += '\n';
  for (const StepReport& r : history) {
    out += format_double(r.clock_s) + ',' + format_double(r.it_power_w) + ',' +
           format_double(r.facility_power_w) + ',' + format_double(r.loss_w) + ',' +
           format_double(r.util_fraction) + ',' + std::to_string(r.running_jobs) + ',' +
           std::to_string(r.queued_jobs) + '\n';
  }
  return out;
}

std::string jobs_csv(const std::vector<JobOutcome>& jobs) {
  std::string out(kJobsHeader);
  out += '\n';
  for (const JobOutcome& j : jobs) {
    std::string nodes;
    for (std::size_t i = 0; i < j.nodes.size(); ++i) {
      if (i) nodes += ';';
      nodes += j.nodes[i];
    }
    out += j.job_id + ',' + format_double(j.submit_time_s) + ',';
    out += j.start_time_s ? format_double(*j.start_time_s) : "";
    out += ',';
    out += j.end_time_s ? format_double(*j.end_time_s) : "";
    out += ',';
    if (j.start_time_s) out += format_double(*j.start_time_s - j.submit_time_s);
    out += ',';
    if (j.end_time_s) {
      const double wait = *j.start_time_s - j.submit_time_s;
      const double ran = *j.end_time_s - *j.start_time_s;
      out += format_double(ran) + ',' + format_double(slowdown(wait, ran));
    } else {
      out += ',';
    }
    out += ',' + nodes + '\n';
  }
  return out;
}

}  // namespace raps
