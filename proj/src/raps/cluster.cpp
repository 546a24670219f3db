#include "raps/cluster.hpp"

#include <algorithm>
#include <set>

#include "raps/error.hpp"
#include "raps/json_util.hpp"

namespace raps {

using detail::json;

ClusterConfig::ClusterConfig(std::vector<Node> nodes, std::vector<Partition> partitions,
                             EfficiencyChain chain, double pue)
    : nodes_(std::move(nodes)),
      partitions_(std::move(partitions)),
      chain_(std::move(chain)),
      pue_(pue) {
  if (nodes_.empty()) throw Error(ErrorCode::Config, "nodes: cluster has no nodes");
  if (!(pue_ >= 1.0)) throw Error(ErrorCode::Config, "pue: must be >= 1");

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const std::string where = "nodes[" + n.node_id + "]";
    if (n.node_id.empty()) throw Error(ErrorCode::Config, "nodes.node_id: empty identifier");
    if (!index_.emplace(n.node_id, i).second) {
      throw Error(ErrorCode::Config, where + ".node_id: duplicate node");
    }
    if (!n.capacity.non_negative()) {
      throw Error(ErrorCode::Config, where + ".capacity: negative resource");
    }
    if (n.capacity.cores == 0 && n.capacity.gpus == 0 && n.capacity.memory_mb == 0) {
      throw Error(ErrorCode::Config, where + ".capacity: node has no resources");
    }
    if (n.idle_power_w < 0.0 || n.max_power_w < n.idle_power_w) {
      throw Error(ErrorCode::Config, where + ".max_power_w: must be >= idle_power_w >= 0");
    }
    if (n.gpu_idle_power_w < 0.0 || n.gpu_max_power_w < n.gpu_idle_power_w) {
      throw Error(ErrorCode::Config,
                  where + ".gpu_max_power_w: must be >= gpu_idle_power_w >= 0");
    }
  }

  std::set<std::string> seen;
  for (const Partition& p : partitions_) {
    if (p.node_ids.empty()) {
      throw Error(ErrorCode::Config, "partitions[" + p.name + "].node_ids: empty");
    }
    for (const std::string& id : p.node_ids) {
      auto it = index_.find(id);
      if (it == index_.end()) {
        throw Error(ErrorCode::Config,
                    "partitions[" + p.name + "].node_ids: unknown node " + id);
      }
      if (!seen.insert(id).second) {
        throw Error(ErrorCode::Config, "partitions: node " + id + " in two partitions");
      }
      Node& n = nodes_[it->second];
      if (!n.partition.empty() && n.partition != p.name) {
        throw Error(ErrorCode::Config, "nodes[" + id + "].partition: disagrees with partitions[" +
                                           p.name + "]");
      }
      n.partition = p.name;
    }
  }
}

std::size_t ClusterConfig::index_of(const std::string& node_id) const {
  auto it = index_.find(node_id);
  if (it == index_.end()) throw Error(ErrorCode::Config, "unknown node " + node_id);
  return it->second;
}

ResourceVector ClusterConfig::total_capacity() const {
  ResourceVector total;
  for (const Node& n : nodes_) total += n.capacity;
  return total;
}

double ClusterConfig::total_idle_power_w() const {
  double total = 0.0;
  for (const Node& n : nodes_) total += n.idle_power_w;
  return total;
}

double ClusterConfig::rated_it_power_w() const {
  double total = 0.0;
  for (const Node& n : nodes_) total += n.peak_power_w();
  return total;
}

namespace {

ResourceVector parse_resources(const json& j, const std::string& ctx) {
  ResourceVector r;
  r.cores = detail::optional<std::int64_t>(j, "cores", 0, ctx);
  r.gpus = detail::optional<std::int64_t>(j, "gpus", 0, ctx);
  r.memory_mb = detail::optional<std::int64_t>(j, "memory_mb", 0, ctx);
  return r;
}

EfficiencyChain parse_chain(const json& j) {
  EfficiencyChain chain;
  if (j.is_null()) return chain;
  const json& stages = j.is_array() ? j : j.value("stages", json::array());
  if (!stages.is_array()) throw Error(ErrorCode::Config, "efficiency_chain.stages: not a list");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const json& s = stages[i];
    const std::string ctx = "efficiency_chain.stages[" + std::to_string(i) + "]";
    EfficiencyStage stage;
    stage.name = detail::optional<std::string>(s, "name", "stage" + std::to_string(i), ctx);
    if (s.contains("efficiency")) {
      stage.curve = EfficiencyCurve::constant(detail::require<double>(s, "efficiency", ctx));
    } else {
      auto pts = detail::require<std::vector<std::pair<double, double>>>(s, "curve", ctx);
      stage.curve = EfficiencyCurve(std::move(pts));
    }
    if (s.contains("rated_power_w")) {
      const double rated = detail::require<double>(s, "rated_power_w", ctx);
      if (!(rated > 0.0)) throw Error(ErrorCode::Config, ctx + ".rated_power_w: must be > 0");
      stage.rated_power_w = rated;
    }
    chain.stages.push_back(std::move(stage));
  }
  return chain;
}

}  // namespace

ClusterConfig ClusterConfig::from_json_text(std::string_view text) {
  const json doc = detail::parse_json(text, "cluster");
  if (!doc.is_object()) throw Error(ErrorCode::Config, "cluster: expected a JSON object");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw Error(ErrorCode::Config, "cluster.nodes: missing list");
  }

  std::vector<Node> nodes;
  for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
    const json& jn = doc["nodes"][i];
    const std::string ctx = "nodes[" + std::to_string(i) + "]";
    Node proto;
    proto.node_id = detail::require<std::string>(jn, "node_id", ctx);
    proto.partition = detail::optional<std::string>(jn, "partition", "", ctx);
    if (!jn.contains("capacity")) throw Error(ErrorCode::Config, ctx + ".capacity: missing field");
    proto.capacity = parse_resources(jn["capacity"], ctx + ".capacity");
    proto.idle_power_w = detail::require<double>(jn, "idle_power_w", ctx);
    proto.max_power_w = detail::require<double>(jn, "max_power_w", ctx);
    proto.gpu_idle_power_w = detail::optional<double>(jn, "gpu_idle_power_w", 0.0, ctx);
    proto.gpu_max_power_w = detail::optional<double>(jn, "gpu_max_power_w", 0.0, ctx);

    // "count": N expands one entry into N identical nodes named <node_id>-<k>.
    const auto count = detail::optional<std::int64_t>(jn, "count", 0, ctx);
    if (count < 0) throw Error(ErrorCode::Config, ctx + ".count: must be >= 0");
    if (count == 0) {
      nodes.push_back(std::move(proto));
    } else {
      for (std::int64_t k = 0; k < count; ++k) {
        Node n = proto;
        n.node_id = proto.node_id + "-" + std::to_string(k);
        nodes.push_back(std::move(n));
      }
    }
  }

  std::vector<Partition> partitions;
  if (doc.contains("partitions")) {
    if (!doc["partitions"].is_array()) throw Error(ErrorCode::Config, "partitions: not a list");
    for (std::size_t i = 0; i < doc["partitions"].size(); ++i) {
      const json& jp = doc["partitions"][i];
      const std::string ctx = "partitions[" + std::to_string(i) + "]";
      Partition p;
      p.name = detail::require<std::string>(jp, "name", ctx);
      p.node_ids = detail::require<std::vector<std::string>>(jp, "node_ids", ctx);
      partitions.push_back(std::move(p));
    }
  } else {
    // Derive partitions from the per-node field, in order of first appearance.
    std::map<std::string, std::size_t> slot;
    for (const Node& n : nodes) {
      const std::string name = n.partition.empty() ? "default" : n.partition;
      auto [it, inserted] = slot.emplace(name, partitions.size());
      if (inserted) partitions.push_back({name, {}});
      partitions[it->second].node_ids.push_back(n.node_id);
    }
    for (Node& n : nodes) {
      if (n.partition.empty()) n.partition = "default";
    }
  }

  const double pue = detail::optional<double>(doc, "pue", 1.0, "cluster");
  EfficiencyChain chain = parse_chain(doc.value("efficiency_chain", json()));
  return ClusterConfig(std::move(nodes), std::move(partitions), std::move(chain), pue);
}

ClusterConfig ClusterConfig::load(const std::filesystem::path& path) {
  return from_json_text(detail::read_file(path));
}

ResourceLedger::ResourceLedger(const ClusterConfig& cluster) {
  for (const Node& n : cluster.nodes()) capacity_.push_back(n.capacity);
  free_ = capacity_;
  tenants_.assign(capacity_.size(), 0);
}

ResourceLedger::ResourceLedger(std::vector<ResourceVector> capacities)
    : capacity_(std::move(capacities)), free_(capacity_), tenants_(capacity_.size(), 0) {}

void ResourceLedger::allocate(const std::string& job_id, std::vector<Placement> placements,
                              double start_time_s) {
  if (allocations_.count(job_id) != 0) {
    throw Error(ErrorCode::DuplicateJob, "job " + job_id + " is already allocated");
  }
  if (placements.empty()) {
    throw Error(ErrorCode::CapacityViolation, "job " + job_id + " has no placements");
  }
  std::sort(placements.begin(), placements.end(),
            [](const Placement& a, const Placement& b) { return a.node < b.node; });
  for (std::size_t i = 0; i < placements.size(); ++i) {
    const Placement& p = placements[i];
    if (p.node >= free_.size()) {
      throw Error(ErrorCode::CapacityViolation, "job " + job_id + " placed on unknown node");
    }
    if (i > 0 && placements[i - 1].node == p.node) {
      throw Error(ErrorCode::CapacityViolation, "job " + job_id + " placed twice on one node");
    }
    if (!p.share.non_negative() || !fits(free_[p.node], p.share)) {
      throw Error(ErrorCode::CapacityViolation,
                  "job " + job_id + " exceeds free resources on node index " +
                      std::to_string(p.node));
    }
  }
  for (const Placement& p : placements) {
    free_[p.node] -= p.share;
    ++tenants_[p.node];
  }
  allocations_.emplace(job_id, Allocation{job_id, std::move(placements), start_time_s});
}

Allocation ResourceLedger::release(const std::string& job_id) {
  auto it = allocations_.find(job_id);
  if (it == allocations_.end()) {
    throw Error(ErrorCode::UnknownJob, "job " + job_id + " is not allocated");
  }
  Allocation alloc = std::move(it->second);
  allocations_.erase(it);
  for (const Placement& p : alloc.placements) {
    free_[p.node] += p.share;
    --tenants_[p.node];
  }
  return alloc;
}

std::size_t ResourceLedger::busy_nodes() const {
  std::size_t busy = 0;
  for (std::size_t t : tenants_) busy += t > 0 ? 1 : 0;
  return busy;
}

bool ResourceLedger::consistent() const {
  std::vector<ResourceVector> used(capacity_.size());
  for (const auto& [id, alloc] : allocations_) {
    for (const Placement& p : alloc.placements) used[p.node] += p.share;
  }
  for (std::size_t n = 0; n < capacity_.size(); ++n) {
    if (!fits(capacity_[n], used[n])) return false;
    if (used[n] + free_[n] != capacity_[n]) return false;
    if (!free_[n].non_negative()) return false;
  }
  return true;
}

}  // namespace raps
