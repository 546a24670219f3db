#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raps/cluster.hpp"
#include "raps/engine.hpp"
#include "raps/workload.hpp"

namespace raps {

struct RewardWeights {
  double w_throughput = 1.0;
  double w_energy = 0.1;
  double w_carbon = 0.1;
  // Unset normalizers resolve per scenario: energy to rated facility power
  // times delta, carbon to that energy at the t=0 intensity.
  std::optional<double> energy_norm_j;
  std::optional<double> carbon_norm_g;
};

struct EnvOptions {
  std::size_t queue_slots = 8;
  RewardWeights weights;
  double invalid_penalty = 0.1;
  /// When false, a successful dispatch returns without advancing the clock
  /// so several jobs can start at one instant; no-op and invalid actions
  /// always advance.
  bool dispatch_advances = true;
};

/// Everything needed to build a fresh episode: cluster, workload source,
/// simulation settings and environment options.
struct Scenario {
  std::shared_ptr<const ClusterConfig> cluster;
  std::optional<SynthParams> synth;
  std::vector<JobRecord> trace_jobs;  // used when synth is unset
  SimConfig sim;
  EnvOptions env;

  /// Keys: cluster (path or object), workload ({synth: {...}} |
  /// {synth_params: path} | {trace: dir}), sim, env. Relative paths resolve
  /// against `base_dir`.
  static Scenario from_json_text(std::string_view text, const std::filesystem::path& base_dir);
  static Scenario load(const std::filesystem::path& path);
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
  double it_power_w = 0.0;
  std::int64_t jobs_finished_total = 0;
  double energy_kwh = 0.0;
  double carbon_g = 0.0;
  bool invalid_action = false;
  bool advanced = false;
  double clock_s = 0.0;
};

/// Episodic reset/step wrapper around one Engine. The observation holds
/// five features for each of the first K queued jobs followed by six
/// system-level features; actions 0..K-1 dispatch a queue slot (first-fit),
/// action K is a no-op.
class Environment {
 public:
  explicit Environment(Scenario scenario);

  std::vector<double> reset(std::optional<std::uint64_t> seed);
  StepResult step(std::int64_t action);

  std::size_t queue_slots() const { return scenario_.env.queue_slots; }
  std::size_t observation_size() const { return 5 * queue_slots() + 6; }
  std::size_t action_count() const { return queue_slots() + 1; }
  const RewardWeights& weights() const { return weights_; }
  const Scenario& scenario() const { return scenario_; }
  bool active() const { return engine_ != nullptr && !done_; }
  bool started() const { return engine_ != nullptr; }
  const Engine* engine() const { return engine_.get(); }

  std::vector<double> observe() const;

 private:
  Scenario scenario_;
  RewardWeights weights_;
  std::unique_ptr<Engine> engine_;
  double time_norm_s_ = 86400.0;
  double last_it_power_w_ = 0.0;
  bool done_ = false;
};

/// One protocol session: newline-delimited JSON requests in, one JSON reply
/// line out per request. Owns its Environment exclusively.
class Session {
 public:
  Session(Scenario scenario, std::filesystem::path base_dir);

  /// Never throws; failures become {"ok":false,"error":...} replies.
  std::string handle(std::string_view line);
  std::string spec_json() const;
  bool closed() const { return closed_; }

 private:
  std::unique_ptr<Environment> env_;
  std::filesystem::path base_dir_;
  bool closed_ = false;
};

}  // namespace raps
