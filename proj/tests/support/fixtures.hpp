#pragma once

#include <string>
#include <vector>

#include "raps/cluster.hpp"
#include "raps/workload.hpp"
#include "files.hpp"
#include "timeline_oracle.hpp"

namespace fixtures {

inline raps::Node node(const std::string& id, std::int64_t cores, std::int64_t gpus = 0,
                       double idle = 100.0, double max = 300.0) {
  raps::Node n;
  n.node_id = id;
  n.capacity = {cores, gpus, 1000};
  n.idle_power_w = idle;
  n.max_power_w = max;
  n.gpu_idle_power_w = gpus > 0 ? 20.0 : 0.0;
  n.gpu_max_power_w = gpus > 0 ? 200.0 : 0.0;
  return n;
}

inline raps::ClusterConfig cluster(std::vector<raps::Node> nodes, double pue = 1.0,
                                   raps::EfficiencyChain chain = {}) {
  return raps::ClusterConfig(std::move(nodes), {}, std::move(chain), pue);
}

inline raps::ClusterConfig uniform_cluster(int nodes, std::int64_t cores = 4) {
  std::vector<raps::Node> out;
  for (int i = 0; i < nodes; ++i) out.push_back(node("n" + std::to_string(i), cores));
  return cluster(std::move(out));
}

inline raps::JobRecord job(const std::string& id, double submit, double walltime,
                           std::int64_t node_count = 1, std::int64_t cores = 4,
                           std::int64_t gpus = 0) {
  raps::JobRecord j;
  j.job_id = id;
  j.submit_time_s = submit;
  j.walltime_s = walltime;
  j.node_count = node_count;
  j.requested = {cores, gpus, 0};
  j.series.quanta_s = 1.0;
  j.series.cpu_util = {1.0};
  return j;
}

inline raps::ClusterConfig to_cluster(const oracle::Instance& inst) {
  std::vector<raps::Node> nodes;
  for (std::size_t i = 0; i < inst.capacity.size(); ++i) {
    nodes.push_back(node("n" + std::to_string(i), inst.capacity[i].cores, inst.capacity[i].gpus));
  }
  return cluster(std::move(nodes));
}

inline std::vector<raps::JobRecord> to_jobs(const oracle::Instance& inst) {
  std::vector<raps::JobRecord> out;
  for (const auto& j : inst.jobs) {
    out.push_back(job(j.id, j.submit, j.walltime, j.nodes, j.req.cores, j.req.gpus));
  }
  return out;
}

}  // namespace fixtures
