#include "raps/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "raps/error.hpp"
#include "raps/json_util.hpp"
#include "raps/log.hpp"

namespace raps {

namespace {

// n such that numerator / denominator == n (to 1e-9 relative), else nullopt.
std::optional<std::int64_t> integer_ratio(double numerator, double denominator) {
  const double r = numerator / denominator;
  const double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, r)) return std::nullopt;
  return static_cast<std::int64_t>(n);
}

}  // namespace

std::vector<double> resample_values(const std::vector<double>& values, double quanta_s,
                                    double target_delta_s) {
  if (!(quanta_s > 0.0) || !(target_delta_s > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "resample: intervals must be > 0");
  }
  if (values.empty()) return {};

  if (quanta_s >= target_delta_s) {
    const auto n = integer_ratio(quanta_s, target_delta_s);
    if (!n) {
      throw Error(ErrorCode::NonIntegerRatio,
                  "resample: quanta " + format_double(quanta_s) + " s is not an integer multiple of " +
                      format_double(target_delta_s) + " s");
    }
    if (*n == 1) return values;
    std::vector<double> out;
    out.reserve(values.size() * static_cast<std::size_t>(*n));
    for (double v : values) out.insert(out.end(), static_cast<std::size_t>(*n), v);
    return out;
  }

  const auto n = integer_ratio(target_delta_s, quanta_s);
  if (!n) {
    throw Error(ErrorCode::NonIntegerRatio,
                "resample: delta " + format_double(target_delta_s) +
                    " s is not an integer multiple of " + format_double(quanta_s) + " s");
  }
  const auto width = static_cast<std::size_t>(*n);
  std::vector<double> out;
  out.reserve((values.size() + width - 1) / width);
  for (std::size_t begin = 0; begin < values.size(); begin += width) {
    const std::size_t end = std::min(begin + width, values.size());
    if (end - begin == width) {
      // Mean shifted by the first sample: a constant block maps back to its
      // value bit-for-bit.
      const double base = values[begin];
      double dev = 0.0;
      for (std::size_t i = begin; i < end; ++i) dev += values[i] - base;
      out.push_back(base + dev / static_cast<double>(width));
    } else {
      double sum = 0.0;
      for (std::size_t i = begin; i < end; ++i) sum += values[i];
      out.push_back(sum / static_cast<double>(width));
    }
  }
  return out;
}

UtilizationSeries resample(const UtilizationSeries& series, double target_delta_s) {
  UtilizationSeries out;
  out.quanta_s = target_delta_s;
  out.cpu_util = resample_values(series.cpu_util, series.quanta_s, target_delta_s);
  out.gpu_util = resample_values(series.gpu_util, series.quanta_s, target_delta_s);
  if (series.measured_power_w) {
    out.measured_power_w =
        resample_values(*series.measured_power_w, series.quanta_s, target_delta_s);
  }
  return out;
}

void align_channels(UtilizationSeries& series) {
  std::size_t len = std::max(series.cpu_util.size(), series.gpu_util.size());
  if (series.measured_power_w) len = std::max(len, series.measured_power_w->size());
  auto pad = [len](std::vector<double>& v) {
    if (!v.empty() && v.size() < len) v.resize(len, v.back());
  };
  pad(series.cpu_util);
  pad(series.gpu_util);
  if (series.measured_power_w) pad(*series.measured_power_w);
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// CSV reading

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

class CsvTable {
 public:
  CsvTable(const std::filesystem::path& path, std::string_view expected_header)
      : name_(path.filename().string()) {
    const std::string text = detail::read_file(path);
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      if (!have_header) {
        auto cols = split(line, ',');
        for (std::size_t i = 0; i < cols.size(); ++i) columns_.emplace(std::string(cols[i]), i);
        have_header = true;
        continue;
      }
      auto cells = split(line, ',');
      rows_.push_back({lineno, {cells.begin(), cells.end()}});
    }
    if (!have_header) throw Error(ErrorCode::Schema, name_ + ": empty file, expected header");
    std::set<std::string> expected;
    for (auto col : split(expected_header, ',')) expected.emplace(col);
    for (const auto& col : expected) {
      if (!columns_.count(col)) throw Error(ErrorCode::Schema, name_ + ": missing column " + col);
    }
    for (const auto& [col, idx] : columns_) {
      if (!expected.count(col)) throw Error(ErrorCode::Schema, name_ + ": unexpected column " + col);
    }
  }

  struct Row {
    std::size_t lineno;
    std::vector<std::string> cells;
  };

  const std::vector<Row>& rows() const { return rows_; }

  std::string_view cell(const Row& row, const std::string& column) const {
    const std::size_t idx = columns_.at(column);
    if (idx >= row.cells.size()) return {};
    return row.cells[idx];
  }

  std::string where(const Row& row, const std::string& column) const {
    return name_ + ":" + std::to_string(row.lineno) + ": " + column;
  }

  std::string required(const Row& row, const std::string& column) const {
    auto v = cell(row, column);
    if (v.empty()) throw Error(ErrorCode::Schema, where(row, column) + " is empty");
    return std::string(v);
  }

  double number(const Row& row, const std::string& column) const {
    return parse_number(required(row, column), where(row, column));
  }

  std::optional<double> optional_number(const Row& row, const std::string& column) const {
    auto v = cell(row, column);
    if (v.empty()) return std::nullopt;
    return parse_number(v, where(row, column));
  }

  std::int64_t integer(const Row& row, const std::string& column) const {
    const std::string v = required(row, column);
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw Error(ErrorCode::Schema, where(row, column) + ": not an integer: " + v);
    }
    return out;
  }

  static double parse_number(std::string_view v, const std::string& where) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
      throw Error(ErrorCode::Schema, where + ": not a number: " + std::string(v));
    }
    return out;
  }

 private:
  std::string name_;
  std::map<std::string, std::size_t> columns_;
  std::vector<Row> rows_;
};

struct Channel {
  double quanta_s = 0.0;
  std::vector<double> values;
};

struct JobTelemetry {
  std::optional<Channel> cpu, gpu, power;
};

}  // namespace

TraceFiles discover_trace(const std::filesystem::path& dir) {
  TraceFiles files;
  files.job_table = dir / "jobs.csv";
  if (!std::filesystem::exists(files.job_table)) {
    throw Error(ErrorCode::Io, "trace directory " + dir.string() + " has no jobs.csv");
  }
  const auto tdir = dir / "telemetry";
  if (std::filesystem::is_directory(tdir)) {
    for (const auto& entry : std::filesystem::directory_iterator(tdir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") {
        files.telemetry.push_back(entry.path());
      }
    }
    std::sort(files.telemetry.begin(), files.telemetry.end());
  }
  return files;
}

std::vector<JobRecord> parse_trace(const TraceFiles& files, double delta_s) {
  if (!(delta_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta_s must be > 0");

  CsvTable table(files.job_table, kJobTableHeader);
  std::vector<JobRecord> jobs;
  std::map<std::string, std::size_t> by_id;
  for (const auto& row : table.rows()) {
    JobRecord job;
    job.job_id = table.required(row, "job_id");
    job.submit_time_s = table.number(row, "submit_time_s");
    job.node_count = table.integer(row, "node_count");
    job.requested.cores = table.integer(row, "cores");
    job.requested.gpus = table.integer(row, "gpus");
    job.requested.memory_mb = table.integer(row, "memory_mb");
    job.walltime_s = table.number(row, "walltime_s");
    job.trace_start_time_s = table.optional_number(row, "trace_start_time_s");
    job.gflops_estimate = table.optional_number(row, "gflops_estimate");
    if (auto nodes = table.cell(row, "trace_nodes"); !nodes.empty()) {
      for (auto id : split(nodes, ';')) {
        if (!id.empty()) job.trace_nodes.emplace_back(id);
      }
    }

    if (job.submit_time_s < 0.0) {
      throw Error(ErrorCode::Range, table.where(row, "submit_time_s") + " must be >= 0");
    }
    if (!(job.walltime_s > 0.0)) {
      throw Error(ErrorCode::Range, table.where(row, "walltime_s") + " must be > 0");
    }
    if (job.node_count < 1) {
      throw Error(ErrorCode::Range, table.where(row, "node_count") + " must be >= 1");
    }
    if (!job.requested.non_negative()) {
      throw Error(ErrorCode::Range, table.where(row, "cores") + ": resources must be >= 0");
    }
    if (job.trace_start_time_s && *job.trace_start_time_s < job.submit_time_s) {
      throw Error(ErrorCode::Range,
                  table.where(row, "trace_start_time_s") + " precedes submit_time_s");
    }
    if (!job.trace_nodes.empty() &&
        job.trace_nodes.size() != static_cast<std::size_t>(job.node_count)) {
      throw Error(ErrorCode::Schema,
                  table.where(row, "trace_nodes") + " lists a different count than node_count");
    }
    if (!by_id.emplace(job.job_id, jobs.size()).second) {
      throw Error(ErrorCode::Schema, table.where(row, "job_id") + ": duplicate " + job.job_id);
    }
    jobs.push_back(std::move(job));
  }

  std::vector<JobTelemetry> telemetry(jobs.size());
  for (const auto& path : files.telemetry) {
    CsvTable tt(path, kTelemetryHeader);
    for (const auto& row : tt.rows()) {
      const std::string id = tt.required(row, "job_id");
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        log_warning(tt.where(row, "job_id") + ": telemetry for unknown job " + id + " skipped");
        continue;
      }
      Channel ch;
      ch.quanta_s = tt.number(row, "quanta_s");
      if (!(ch.quanta_s > 0.0)) throw Error(ErrorCode::Range, tt.where(row, "quanta_s") + " must be > 0");
      const std::string kind = tt.required(row, "kind");
      for (auto v : split(tt.cell(row, "values"), ';')) {
        if (v.empty()) continue;
        ch.values.push_back(CsvTable::parse_number(v, tt.where(row, "values")));
      }

      JobTelemetry& slot = telemetry[it->second];
      std::optional<Channel>* target = nullptr;
      if (kind == "cpu_util") {
        target = &slot.cpu;
      } else if (kind == "gpu_util") {
        target = &slot.gpu;
      } else if (kind == "power_w") {
        target = &slot.power;
      } else {
        throw Error(ErrorCode::Schema, tt.where(row, "kind") + ": unknown kind " + kind);
      }
      for (double v : ch.values) {
        const bool ok = kind == "power_w" ? v >= 0.0 : (v >= 0.0 && v <= 1.0);
        if (!ok) {
          throw Error(ErrorCode::Range, tt.where(row, "values") + ": " + kind + " value " +
                                            format_double(v) + " out of range for job " + id);
        }
      }
      if (*target) {
        throw Error(ErrorCode::Schema, tt.where(row, "kind") + ": duplicate " + kind +
                                           " series for job " + id);
      }
      *target = std::move(ch);
    }
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const JobTelemetry& t = telemetry[i];
    std::vector<const Channel*> present;
    for (const auto* ch : {&t.cpu, &t.gpu, &t.power}) {
      if (*ch && !(*ch)->values.empty()) present.push_back(&**ch);
    }
    bool common = true;
    for (const Channel* ch : present) {
      common = common && integer_ratio(ch->quanta_s, present.front()->quanta_s) == 1 &&
               integer_ratio(present.front()->quanta_s, ch->quanta_s) == 1;
    }
    const double quanta = present.empty() ? delta_s : (common ? present.front()->quanta_s : delta_s);
    auto channel = [&](const std::optional<Channel>& ch) -> std::vector<double> {
      if (!ch || ch->values.empty()) return {};
      return common ? ch->values : resample_values(ch->values, ch->quanta_s, delta_s);
    };

    UtilizationSeries& s = jobs[i].series;
    s.quanta_s = quanta;
    s.cpu_util = channel(t.cpu);
    s.gpu_util = channel(t.gpu);
    if (t.power && !t.power->values.empty()) s.measured_power_w = channel(t.power);
    // No CPU telemetry: the job is taken to keep its cores fully busy.
    if (s.cpu_util.empty()) s.cpu_util.push_back(1.0);
    align_channels(s);
  }

  std::sort(jobs.begin(), jobs.end(), [](const JobRecord& a, const JobRecord& b) {
    if (a.submit_time_s != b.submit_time_s) return a.submit_time_s < b.submit_time_s;
    return a.job_id < b.job_id;
  });
  return jobs;
}

std::vector<JobRecord> parse_trace_dir(const std::filesystem::path& dir, double delta_s) {
  return parse_trace(discover_trace(dir), delta_s);
}

namespace {

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += format_double(values[i]);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace

void write_trace(const std::vector<JobRecord>& jobs, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "telemetry", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + (dir / "telemetry").string());

  std::string table(kJobTableHeader);
  table += '\n';
  for (const JobRecord& j : jobs) {
    std::string nodes;
    for (std::size_t i = 0; i < j.trace_nodes.size(); ++i) {
      if (i) nodes += ';';
      nodes += j.trace_nodes[i];
    }
    table += j.job_id + ',' + format_double(j.submit_time_s) + ',' + std::to_string(j.node_count) +
             ',' + std::to_string(j.requested.cores) + ',' + std::to_string(j.requested.gpus) + ',' +
             std::to_string(j.requested.memory_mb) + ',' + format_double(j.walltime_s) + ',' +
             (j.trace_start_time_s ? format_double(*j.trace_start_time_s) : "") + ',' + nodes +
             ',' + (j.gflops_estimate ? format_double(*j.gflops_estimate) : "") + '\n';

    std::string tel(kTelemetryHeader);
    tel += '\n';
    const std::string q = format_double(j.series.quanta_s);
    if (!j.series.cpu_util.empty()) tel += j.job_id + ',' + q + ",cpu_util," + join(j.series.cpu_util) + '\n';
    if (!j.series.gpu_util.empty()) tel += j.job_id + ',' + q + ",gpu_util," + join(j.series.gpu_util) + '\n';
    if (j.series.measured_power_w) {
      tel += j.job_id + ',' + q + ",power_w," + join(*j.series.measured_power_w) + '\n';
    }
    write_text(dir / "telemetry" / (j.job_id + ".csv"), tel);
  }
  write_text(dir / "jobs.csv", table);
}

// ---------------------------------------------------------------------------
// Synthetic workloads

SynthParams SynthParams::from_json_text(std::string_view text) {
  const auto doc = detail::parse_json(text, "synth params");
  const std::string ctx = "synth";
  SynthParams p;
  p.job_count = detail::require<std::int64_t>(doc, "job_count", ctx);
  p.arrival_rate_per_s = detail::require<double>(doc, "arrival_rate_per_s", ctx);
  p.runtime_log_mean = detail::require<double>(doc, "runtime_log_mean", ctx);
  p.runtime_log_sigma = detail::require<double>(doc, "runtime_log_sigma", ctx);
  p.max_cores = detail::optional<std::int64_t>(doc, "max_cores", p.max_cores, ctx);
  p.max_gpus = detail::optional<std::int64_t>(doc, "max_gpus", p.max_gpus, ctx);
  p.max_node_count = detail::optional<std::int64_t>(doc, "max_node_count", p.max_node_count, ctx);
  p.memory_mb_per_core =
      detail::optional<std::int64_t>(doc, "memory_mb_per_core", p.memory_mb_per_core, ctx);
  p.cpu_util_min = detail::optional<double>(doc, "cpu_util_min", p.cpu_util_min, ctx);
  p.cpu_util_max = detail::optional<double>(doc, "cpu_util_max", p.cpu_util_max, ctx);
  p.gpu_util_min = detail::optional<double>(doc, "gpu_util_min", p.gpu_util_min, ctx);
  p.gpu_util_max = detail::optional<double>(doc, "gpu_util_max", p.gpu_util_max, ctx);
  p.gflops_per_core = detail::optional<double>(doc, "gflops_per_core", p.gflops_per_core, ctx);
  p.quanta_s = detail::optional<double>(doc, "quanta_s", p.quanta_s, ctx);
  p.start_time_s = detail::optional<double>(doc, "start_time_s", p.start_time_s, ctx);
  p.seed = detail::optional<std::uint64_t>(doc, "seed", p.seed, ctx);
  p.validate();
  return p;
}

std::string SynthParams::to_json_text() const {
  nlohmann::ordered_json j;
  j["job_count"] = job_count;
  j["arrival_rate_per_s"] = arrival_rate_per_s;
  j["runtime_log_mean"] = runtime_log_mean;
  j["runtime_log_sigma"] = runtime_log_sigma;
  j["max_cores"] = max_cores;
  j["max_gpus"] = max_gpus;
  j["max_node_count"] = max_node_count;
  j["memory_mb_per_core"] = memory_mb_per_core;
  j["cpu_util_min"] = cpu_util_min;
  j["cpu_util_max"] = cpu_util_max;
  j["gpu_util_min"] = gpu_util_min;
  j["gpu_util_max"] = gpu_util_max;
  j["gflops_per_core"] = gflops_per_core;
  j["quanta_s"] = quanta_s;
  j["start_time_s"] = start_time_s;
  j["seed"] = seed;
  return j.dump(2);
}

void SynthParams::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::Config, "synth." + field + ": " + why);
  };
  if (job_count < 1) bad("job_count", "must be >= 1");
  if (!(arrival_rate_per_s > 0.0) || !std::isfinite(arrival_rate_per_s)) {
    bad("arrival_rate_per_s", "must be > 0");
  }
  if (!std::isfinite(runtime_log_mean)) bad("runtime_log_mean", "must be finite");
  if (!(runtime_log_sigma >= 0.0) || !std::isfinite(runtime_log_sigma)) {
    bad("runtime_log_sigma", "must be >= 0");
  }
  if (max_cores < 0) bad("max_cores", "must be >= 0");
  if (max_gpus < 0) bad("max_gpus", "must be >= 0");
  if (max_cores == 0 && max_gpus == 0) bad("max_cores", "jobs would request nothing");
  if (max_node_count < 1) bad("max_node_count", "must be >= 1");
  if (memory_mb_per_core < 0) bad("memory_mb_per_core", "must be >= 0");
  if (!(0.0 <= cpu_util_min && cpu_util_min <= cpu_util_max && cpu_util_max <= 1.0)) {
    bad("cpu_util_min", "need 0 <= cpu_util_min <= cpu_util_max <= 1");
  }
  if (!(0.0 <= gpu_util_min && gpu_util_min <= gpu_util_max && gpu_util_max <= 1.0)) {
    bad("gpu_util_min", "need 0 <= gpu_util_min <= gpu_util_max <= 1");
  }
  if (!(gflops_per_core >= 0.0)) bad("gflops_per_core", "must be >= 0");
  if (!(quanta_s > 0.0)) bad("quanta_s", "must be > 0");
  if (!(start_time_s >= 0.0)) bad("start_time_s", "must be >= 0");
}

std::vector<JobRecord> generate_synthetic(const SynthParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::exponential_distribution<double> gap(params.arrival_rate_per_s);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> cores(params.max_cores > 0 ? 1 : 0, params.max_cores);
  std::uniform_int_distribution<std::int64_t> gpus(0, params.max_gpus);
  std::uniform_int_distribution<std::int64_t> nodes(1, params.max_node_count);
  std::uniform_real_distribution<double> cpu_level(params.cpu_util_min, params.cpu_util_max);
  std::uniform_real_distribution<double> gpu_level(params.gpu_util_min, params.gpu_util_max);

  const std::size_t width = std::max<std::size_t>(6, std::to_string(params.job_count).size());
  std::vector<JobRecord> jobs;
  jobs.reserve(static_cast<std::size_t>(params.job_count));
  double clock = params.start_time_s;
  for (std::int64_t i = 0; i < params.job_count; ++i) {
    // Fixed draw order per job keeps the stream stable when fields change.
    clock += gap(rng);
    const double z = normal(rng);
    JobRecord job;
    std::string id = std::to_string(i + 1);
    job.job_id = "syn" + std::string(width - id.size(), '0') + id;
    job.submit_time_s = clock;
    job.walltime_s = std::exp(params.runtime_log_mean + params.runtime_log_sigma * z);
    job.requested.cores = cores(rng);
    job.requested.gpus = gpus(rng);
    if (job.requested.cores == 0 && job.requested.gpus == 0) job.requested.gpus = 1;
    job.requested.memory_mb = job.requested.cores * params.memory_mb_per_core;
    job.node_count = nodes(rng);
    const double cpu = cpu_level(rng);
    const double gpu = gpu_level(rng);

    job.series.quanta_s = params.quanta_s;
    job.series.cpu_util = {cpu};
    if (job.requested.gpus > 0) job.series.gpu_util = {gpu};
    if (params.gflops_per_core > 0.0) {
      job.gflops_estimate = params.gflops_per_core * cpu *
                            static_cast<double>(job.requested.cores * job.node_count);
    }
    jobs.push_back(std::move(job));
  }
  return jobs;
}

}  // namespace raps
