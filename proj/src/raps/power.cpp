#include "raps/power.hpp"

#include <algorithm>
#include <sstream>

#include "raps/error.hpp"
#include "raps/json_util.hpp"

namespace raps {

double node_dynamic_power(const Node& node, std::span<const TenantLoad> tenants) {
  double core_load = 0.0;
  double gpu_power = 0.0;
  std::int64_t gpus_held = 0;
  for (const TenantLoad& t : tenants) {
    if (node.capacity.cores > 0) {
      core_load += t.cpu_util * static_cast<double>(t.share.cores) /
                   static_cast<double>(node.capacity.cores);
    }
    gpu_power += static_cast<double>(t.share.gpus) *
                 (node.gpu_idle_power_w + (node.gpu_max_power_w - node.gpu_idle_power_w) * t.gpu_util);
    gpus_held += t.share.gpus;
  }
  core_load = std::min(core_load, 1.0);
  const double gpu_cap = static_cast<double>(std::min(gpus_held, node.capacity.gpus)) *
                         node.gpu_max_power_w;
  return (node.max_power_w - node.idle_power_w) * core_load + std::min(gpu_power, gpu_cap);
}

double node_power(const Node& node, std::span<const TenantLoad> tenants) {
  return node.idle_power_w + node_dynamic_power(node, tenants);
}

CarbonIntensity::CarbonIntensity(std::vector<std::pair<double, double>> points)
    : points_(std::move(points)) {
  if (points_.empty()) throw Error(ErrorCode::Config, "carbon intensity: no points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].second >= 0.0)) {
      throw Error(ErrorCode::Config, "carbon intensity: gco2_per_kwh must be >= 0");
    }
    if (i > 0 && !(points_[i].first > points_[i - 1].first)) {
      throw Error(ErrorCode::Config, "carbon intensity: time_s must be strictly increasing");
    }
  }
}

CarbonIntensity CarbonIntensity::load_csv(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  std::vector<std::pair<double, double>> points;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "time_s,gco2_per_kwh") {
        throw Error(ErrorCode::Schema,
                    path.filename().string() + ": header must be time_s,gco2_per_kwh");
      }
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      points.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Schema, path.filename().string() + ": bad row: " + line);
    }
  }
  return CarbonIntensity(std::move(points));
}

double CarbonIntensity::at(double time_s) const {
  auto it = std::upper_bound(
      points_.begin(), points_.end(), time_s,
      [](double t, const std::pair<double, double>& p) { return t < p.first; });
  if (it == points_.begin()) return points_.front().second;
  return std::prev(it)->second;
}

PowerBreakdown power_breakdown(double it_power_w, const EfficiencyChain& chain,
                               double rated_power_w, double pue) {
  PowerBreakdown p;
  p.it_w = it_power_w;
  const ChainOutput c = apply_chain(it_power_w, chain, rated_power_w);
  p.chain_input_w = c.input_power_w;
  p.loss_w = c.loss_w;
  p.facility_w = facility_power(c.input_power_w, pue);
  p.pue_overhead_w = p.facility_w - p.chain_input_w;
  return p;
}

void MetricsAccumulator::add_step(const PowerBreakdown& p, double delta_s,
                                  double carbon_gco2_per_kwh, std::size_t busy_nodes,
                                  std::size_t total_nodes, double gflops) {
  it_energy_j_ += p.it_w * delta_s;
  loss_energy_j_ += p.loss_w * delta_s;
  pue_overhead_energy_j_ += p.pue_overhead_w * delta_s;
  chain_input_energy_j_ += p.chain_input_w * delta_s;
  const double facility_j = p.facility_w * delta_s;
  facility_energy_j_ += facility_j;
  carbon_joule_weighted_ += facility_j * carbon_gco2_per_kwh;
  gflop_total_ += gflops * delta_s;
  busy_node_seconds_ += static_cast<double>(busy_nodes) * delta_s;
  total_node_seconds_ += static_cast<double>(total_nodes) * delta_s;
  peak_facility_w_ = std::max(peak_facility_w_, p.facility_w);
  ++steps_;
}

void MetricsAccumulator::add_finished_job(double wait_s, double run_s) {
  ++jobs_finished_;
  slowdown_sum_ += slowdown(wait_s, run_s);
  wait_sum_s_ += wait_s;
}

void MetricsAccumulator::set_totals(double it_energy_j, double facility_energy_j,
                                    double carbon_g) {
  it_energy_j_ = it_energy_j;
  facility_energy_j_ = facility_energy_j;
  chain_input_energy_j_ = facility_energy_j;
  carbon_joule_weighted_ = carbon_g * kJoulesPerKwh;
}

MetricsSummary finalize_metrics(const MetricsAccumulator& acc, double makespan_s) {
  if (!(makespan_s > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "finalize_metrics: makespan must be > 0");
  }
  MetricsSummary s;
  s.makespan_s = makespan_s;
  s.jobs_finished = acc.jobs_finished();
  if (acc.jobs_finished() > 0) {
    const auto n = static_cast<double>(acc.jobs_finished());
    s.throughput_jobs_per_s = n / makespan_s;
    s.mean_slowdown = acc.slowdown_sum() / n;
    s.mean_wait_s = acc.wait_sum_s() / n;
  }
  s.it_energy_kwh = acc.it_energy_j() / kJoulesPerKwh;
  s.loss_energy_kwh = acc.loss_energy_j() / kJoulesPerKwh;
  s.pue_overhead_energy_kwh = acc.pue_overhead_energy_j() / kJoulesPerKwh;
  s.facility_energy_kwh = acc.facility_energy_j() / kJoulesPerKwh;
  s.carbon_g = acc.carbon_g();
  if (acc.it_energy_j() > 0.0) s.gflops_per_watt = acc.gflop_total() / acc.it_energy_j();
  if (acc.chain_input_energy_j() > 0.0) {
    s.conversion_efficiency = acc.it_energy_j() / acc.chain_input_energy_j();
  }
  if (acc.total_node_seconds() > 0.0) {
    s.utilization = acc.busy_node_seconds() / acc.total_node_seconds();
  }
  if (acc.steps() > 0) {
    s.mean_it_power_w = acc.it_energy_j() / makespan_s;
    s.mean_facility_power_w = acc.facility_energy_j() / makespan_s;
  }
  s.peak_facility_power_w = acc.peak_facility_w();
  return s;
}

}  // namespace raps
