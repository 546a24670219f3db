#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raps/cluster.hpp"

namespace raps {

struct UtilizationSeries {
  double quanta_s = 1.0;
  std::vector<double> cpu_util;
  std::vector<double> gpu_util;
  std::optional<std::vector<double>> measured_power_w;

  friend bool operator==(const UtilizationSeries&, const UtilizationSeries&) = default;
};

struct JobRecord {
  std::string job_id;
  double submit_time_s = 0.0;
  ResourceVector requested;  // per node
  std::int64_t node_count = 1;
  double walltime_s = 0.0;
  std::optional<double> trace_start_time_s;
  std::vector<std::string> trace_nodes;
  UtilizationSeries series;
  std::optional<double> gflops_estimate;

  friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

/// Value at `index` with the last sample held past the end; `fallback` for
/// an empty list.
inline double held(const std::vector<double>& values, std::size_t index, double fallback) {
  if (values.empty()) return fallback;
  return values[index < values.size() ? index : values.size() - 1];
}

/// Piecewise-constant hold when refining, block mean when coarsening,
/// identity otherwise. Only integer ratios between the two intervals are
/// accepted (NonIntegerRatio). Sum(u_i * quanta) is conserved; a trailing
/// partial block is averaged over the full block width.
std::vector<double> resample_values(const std::vector<double>& values, double quanta_s,
                                    double target_delta_s);

UtilizationSeries resample(const UtilizationSeries& series, double target_delta_s);

/// Brings every non-empty channel of `series` to a common length by holding
/// each channel's last value.
void align_channels(UtilizationSeries& series);

// ---------------------------------------------------------------------------
// Canonical trace files

inline constexpr std::string_view kJobTableHeader =
    "job_id,submit_time_s,node_count,cores,gpus,memory_mb,walltime_s,trace_start_time_s,"
    "trace_nodes,gflops_estimate";
inline constexpr std::string_view kTelemetryHeader = "job_id,quanta_s,kind,values";

struct TraceFiles {
  std::filesystem::path job_table;
  std::vector<std::filesystem::path> telemetry;
};

/// `dir/jobs.csv` plus every `*.csv` under `dir/telemetry/`, in name order.
TraceFiles discover_trace(const std::filesystem::path& dir);

/// Loads the canonical job table and telemetry into JobRecords sorted by
/// (submit_time_s, job_id). Channels sampled at a common quanta are kept at
/// it; when a job's channels differ, each is resampled to `delta_s`.
/// Telemetry for an unknown job is reported through log_warning and skipped.
std::vector<JobRecord> parse_trace(const TraceFiles& files, double delta_s);
std::vector<JobRecord> parse_trace_dir(const std::filesystem::path& dir, double delta_s);

/// Writes `jobs.csv` and `telemetry/<job_id>.csv`. Doubles use shortest
/// round-trip formatting so parse_trace recovers identical values.
void write_trace(const std::vector<JobRecord>& jobs, const std::filesystem::path& dir);

std::string format_double(double value);

// ---------------------------------------------------------------------------
// Synthetic workloads

struct SynthParams {
  std::int64_t job_count = 1;
  double arrival_rate_per_s = 0.1;
  double runtime_log_mean = 5.0;
  double runtime_log_sigma = 1.0;
  std::int64_t max_cores = 1;
  std::int64_t max_gpus = 0;
  std::int64_t max_node_count = 1;
  std::int64_t memory_mb_per_core = 0;
  double cpu_util_min = 0.5;
  double cpu_util_max = 1.0;
  double gpu_util_min = 0.5;
  double gpu_util_max = 1.0;
  double gflops_per_core = 0.0;
  double quanta_s = 10.0;
  double start_time_s = 0.0;
  std::uint64_t seed = 0;

  static SynthParams from_json_text(std::string_view text);
  std::string to_json_text() const;
  void validate() const;
};

std::vector<JobRecord> generate_synthetic(const SynthParams& params);

}  // namespace raps
