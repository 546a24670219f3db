#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "raps/efficiency.hpp"

namespace raps {

/// Per-node resource dimensions. Multi-tenancy is accounted in whole cores,
/// whole GPUs and MB of memory.
struct ResourceVector {
  std::int64_t cores = 0;
  std::int64_t gpus = 0;
  std::int64_t memory_mb = 0;

  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;

  ResourceVector& operator+=(const ResourceVector& o) {
    cores += o.cores;
    gpus += o.gpus;
    memory_mb += o.memory_mb;
    return *this;
  }
  ResourceVector& operator-=(const ResourceVector& o) {
    cores -= o.cores;
    gpus -= o.gpus;
    memory_mb -= o.memory_mb;
    return *this;
  }
  friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) { return a += b; }
  friend ResourceVector operator-(ResourceVector a, const ResourceVector& b) { return a -= b; }

  bool non_negative() const { return cores >= 0 && gpus >= 0 && memory_mb >= 0; }
};

/// True iff `request` is componentwise <= `node_free`.
inline bool fits(const ResourceVector& node_free, const ResourceVector& request) {
  return request.cores <= node_free.cores && request.gpus <= node_free.gpus &&
         request.memory_mb <= node_free.memory_mb;
}

struct Node {
  std::string node_id;
  std::string partition;
  ResourceVector capacity;
  double idle_power_w = 0.0;
  double max_power_w = 0.0;
  double gpu_idle_power_w = 0.0;  // per GPU
  double gpu_max_power_w = 0.0;   // per GPU

  /// Draw with every core and GPU saturated.
  double peak_power_w() const {
    return max_power_w + static_cast<double>(capacity.gpus) * gpu_max_power_w;
  }
  double floor_power_w() const { return idle_power_w; }
};

struct Partition {
  std::string name;
  std::vector<std::string> node_ids;
};

class ClusterConfig {
 public:
  ClusterConfig(std::vector<Node> nodes, std::vector<Partition> partitions,
                EfficiencyChain chain, double pue);

  static ClusterConfig from_json_text(std::string_view text);
  static ClusterConfig load(const std::filesystem::path& path);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Partition>& partitions() const { return partitions_; }
  const EfficiencyChain& efficiency_chain() const { return chain_; }
  double pue() const { return pue_; }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t index) const { return nodes_.at(index); }
  /// Index of `node_id` in config order; throws Config if unknown.
  std::size_t index_of(const std::string& node_id) const;
  bool contains(const std::string& node_id) const { return index_.count(node_id) != 0; }

  ResourceVector total_capacity() const;
  double total_idle_power_w() const;
  /// Sum of node peak power; the default rated power for efficiency curves.
  double rated_it_power_w() const;

 private:
  std::vector<Node> nodes_;
  std::vector<Partition> partitions_;
  EfficiencyChain chain_;
  double pue_ = 1.0;
  std::map<std::string, std::size_t> index_;
};

/// Share of one node granted to a job.
struct Placement {
  std::size_t node = 0;
  ResourceVector share;

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct Allocation {
  std::string job_id;
  std::vector<Placement> placements;  // sorted by node index, non-empty
  double start_time_s = 0.0;
};

/// Free-resource bookkeeping for every node plus the live allocations that
/// consumed it. Several allocations may hold disjoint shares of one node.
class ResourceLedger {
 public:
  explicit ResourceLedger(const ClusterConfig& cluster);
  explicit ResourceLedger(std::vector<ResourceVector> capacities);

  const std::vector<ResourceVector>& free() const { return free_; }
  const ResourceVector& free(std::size_t node) const { return free_.at(node); }
  const ResourceVector& capacity(std::size_t node) const { return capacity_.at(node); }
  std::size_t node_count() const { return capacity_.size(); }

  /// Throws DuplicateJob or CapacityViolation; on error the ledger is unchanged.
  void allocate(const std::string& job_id, std::vector<Placement> placements,
                double start_time_s);
  /// Returns the released allocation; throws UnknownJob.
  Allocation release(const std::string& job_id);

  bool holds(const std::string& job_id) const { return allocations_.count(job_id) != 0; }
  const std::map<std::string, Allocation>& allocations() const { return allocations_; }
  std::size_t tenants(std::size_t node) const { return tenants_.at(node); }
  std::size_t busy_nodes() const;

  /// Recomputes per-node usage from the live allocations and checks
  /// usage + free == capacity and usage <= capacity on every node.
  bool consistent() const;

 private:
  std::vector<ResourceVector> capacity_;
  std::vector<ResourceVector> free_;
  std::vector<std::size_t> tenants_;
  std::map<std::string, Allocation> allocations_;
};

}  // namespace raps
