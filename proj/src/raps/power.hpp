#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "raps/cluster.hpp"

namespace raps {

inline constexpr double kJoulesPerKwh = 3.6e6;

/// One job's share of a node and its utilization during the current step.
struct TenantLoad {
  ResourceVector share;
  double cpu_util = 0.0;
  double gpu_util = 0.0;
};

/// Linear idle-to-max model. CPU draw scales with the core-weighted
/// utilization of all tenants; each allocated GPU draws its idle power plus a
/// utilization-proportional share of its dynamic range. Unallocated GPUs are
/// powered down.
double node_power(const Node& node, std::span<const TenantLoad> tenants);

/// Dynamic part only (node_power minus idle_power_w).
double node_dynamic_power(const Node& node, std::span<const TenantLoad> tenants);

inline double slowdown(double wait_s, double run_s) { return (wait_s + run_s) / run_s; }

/// gCO2/kWh, constant or a piecewise-constant step function of time.
class CarbonIntensity {
 public:
  CarbonIntensity() = default;
  explicit CarbonIntensity(double constant) : points_{{0.0, constant}} {}
  explicit CarbonIntensity(std::vector<std::pair<double, double>> points);

  /// CSV with header `time_s,gco2_per_kwh`.
  static CarbonIntensity load_csv(const std::filesystem::path& path);

  /// Value of the last point at or before `time_s`; the first value before it.
  double at(double time_s) const;
  const std::vector<std::pair<double, double>>& points() const { return points_; }
  bool is_constant() const { return points_.size() == 1; }

 private:
  std::vector<std::pair<double, double>> points_{{0.0, 0.0}};
};

/// Instantaneous power breakdown for one step.
struct PowerBreakdown {
  double it_w = 0.0;
  double chain_input_w = 0.0;
  double loss_w = 0.0;          // conversion losses: chain_input - it
  double pue_overhead_w = 0.0;  // facility - chain_input
  double facility_w = 0.0;
};

PowerBreakdown power_breakdown(double it_power_w, const EfficiencyChain& chain,
                               double rated_power_w, double pue);

class MetricsAccumulator {
 public:
  void add_step(const PowerBreakdown& p, double delta_s, double carbon_gco2_per_kwh,
                std::size_t busy_nodes, std::size_t total_nodes, double gflops);
  void add_finished_job(double wait_s, double run_s);

  double it_energy_j() const { return it_energy_j_; }
  double loss_energy_j() const { return loss_energy_j_; }
  double pue_overhead_energy_j() const { return pue_overhead_energy_j_; }
  double facility_energy_j() const { return facility_energy_j_; }
  double chain_input_energy_j() const { return chain_input_energy_j_; }
  /// Sum of facility energy (J) times intensity (gCO2/kWh), divided out once
  /// at read time so exact products stay exact.
  double carbon_g() const { return carbon_joule_weighted_ / kJoulesPerKwh; }
  std::int64_t jobs_finished() const { return jobs_finished_; }
  double slowdown_sum() const { return slowdown_sum_; }
  double wait_sum_s() const { return wait_sum_s_; }
  double gflop_total() const { return gflop_total_; }
  double busy_node_seconds() const { return busy_node_seconds_; }
  double total_node_seconds() const { return total_node_seconds_; }
  double peak_facility_w() const { return peak_facility_w_; }
  std::int64_t steps() const { return steps_; }

  /// Directly seeds totals; intended for tests and offline recomputation.
  void set_totals(double it_energy_j, double facility_energy_j, double carbon_g);

 private:
  double it_energy_j_ = 0.0;
  double loss_energy_j_ = 0.0;
  double pue_overhead_energy_j_ = 0.0;
  double facility_energy_j_ = 0.0;
  double chain_input_energy_j_ = 0.0;
  double carbon_joule_weighted_ = 0.0;
  std::int64_t jobs_finished_ = 0;
  double slowdown_sum_ = 0.0;
  double wait_sum_s_ = 0.0;
  double gflop_total_ = 0.0;
  double busy_node_seconds_ = 0.0;
  double total_node_seconds_ = 0.0;
  double peak_facility_w_ = 0.0;
  std::int64_t steps_ = 0;
};

/// Derived metrics. Ratios whose denominator is zero are absent.
struct MetricsSummary {
  double makespan_s = 0.0;
  std::int64_t jobs_finished = 0;
  std::optional<double> throughput_jobs_per_s;
  std::optional<double> mean_slowdown;
  std::optional<double> mean_wait_s;
  double it_energy_kwh = 0.0;
  double loss_energy_kwh = 0.0;
  double pue_overhead_energy_kwh = 0.0;
  double facility_energy_kwh = 0.0;
  double carbon_g = 0.0;
  std::optional<double> gflops_per_watt;
  std::optional<double> conversion_efficiency;
  std::optional<double> utilization;
  std::optional<double> mean_it_power_w;
  std::optional<double> mean_facility_power_w;
  double peak_facility_power_w = 0.0;
};

/// Throws InvalidArgument when makespan_s <= 0.
MetricsSummary finalize_metrics(const MetricsAccumulator& acc, double makespan_s);

}  // namespace raps
