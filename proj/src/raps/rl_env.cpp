#include "raps/rl_env.hpp"

#include <algorithm>
#include <cmath>

#include "raps/error.hpp"
#include "raps/json_util.hpp"
#include "raps/scheduler.hpp"

namespace raps {

using detail::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

}  // namespace

Scenario Scenario::from_json_text(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = detail::parse_json(text, "scenario");
  if (!doc.is_object()) throw Error(ErrorCode::Config, "scenario: expected a JSON object");
  Scenario sc;

  if (!doc.contains("cluster")) throw Error(ErrorCode::Config, "scenario.cluster: missing field");
  const json& cl = doc["cluster"];
  if (cl.is_string()) {
    sc.cluster = std::make_shared<ClusterConfig>(
        ClusterConfig::load(resolve(base_dir, cl.get<std::string>())));
  } else {
    sc.cluster = std::make_shared<ClusterConfig>(ClusterConfig::from_json_text(cl.dump()));
  }

  json sim = doc.value("sim", json::object());
  if (!sim.is_object()) throw Error(ErrorCode::Config, "scenario.sim: expected an object");
  sim["mode"] = "reschedule";
  sim["scheduler"] = "external";
  sc.sim = SimConfig::from_json_text(sim.dump(), base_dir.string());
  if (!sc.sim.horizon_s) sc.sim.horizon_s = 86400.0;

  if (!doc.contains("workload")) throw Error(ErrorCode::Config, "scenario.workload: missing field");
  const json& wl = doc["workload"];
  if (wl.contains("synth")) {
    sc.synth = SynthParams::from_json_text(wl["synth"].dump());
  } else if (wl.contains("synth_params")) {
    const auto path = resolve(base_dir, detail::require<std::string>(wl, "synth_params", "workload"));
    sc.synth = SynthParams::from_json_text(detail::read_file(path));
  } else if (wl.contains("trace")) {
    const auto dir = resolve(base_dir, detail::require<std::string>(wl, "trace", "workload"));
    sc.trace_jobs = parse_trace_dir(dir, sc.sim.delta_s);
  } else {
    throw Error(ErrorCode::Config, "scenario.workload: expected synth, synth_params or trace");
  }

  const json env = doc.value("env", json::object());
  const std::string ctx = "env";
  sc.env.queue_slots = detail::optional<std::size_t>(env, "queue_slots", sc.env.queue_slots, ctx);
  if (sc.env.queue_slots < 1) throw Error(ErrorCode::Config, "env.queue_slots: must be >= 1");
  sc.env.invalid_penalty =
      detail::optional<double>(env, "invalid_penalty", sc.env.invalid_penalty, ctx);
  sc.env.dispatch_advances =
      detail::optional<bool>(env, "dispatch_advances", sc.env.dispatch_advances, ctx);
  const json w = env.value("weights", json::object());
  RewardWeights& rw = sc.env.weights;
  rw.w_throughput = detail::optional<double>(w, "w_throughput", rw.w_throughput, "env.weights");
  rw.w_energy = detail::optional<double>(w, "w_energy", rw.w_energy, "env.weights");
  rw.w_carbon = detail::optional<double>(w, "w_carbon", rw.w_carbon, "env.weights");
  if (w.contains("energy_norm_j") && !w["energy_norm_j"].is_null()) {
    rw.energy_norm_j = detail::require<double>(w, "energy_norm_j", "env.weights");
  }
  if (w.contains("carbon_norm_g") && !w["carbon_norm_g"].is_null()) {
    rw.carbon_norm_g = detail::require<double>(w, "carbon_norm_g", "env.weights");
  }
  if (rw.w_throughput < 0.0 || rw.w_energy < 0.0 || rw.w_carbon < 0.0) {
    throw Error(ErrorCode::Config, "env.weights: weights must be >= 0");
  }
  if (!(rw.w_throughput > 0.0 || rw.w_energy > 0.0 || rw.w_carbon > 0.0)) {
    throw Error(ErrorCode::Config, "env.weights: at least one weight must be > 0");
  }
  if ((rw.energy_norm_j && !(*rw.energy_norm_j > 0.0)) ||
      (rw.carbon_norm_g && !(*rw.carbon_norm_g > 0.0))) {
    throw Error(ErrorCode::Config, "env.weights: normalizers must be > 0");
  }
  if (!(sc.env.invalid_penalty >= 0.0)) {
    throw Error(ErrorCode::Config, "env.invalid_penalty: must be >= 0");
  }
  return sc;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  return from_json_text(detail::read_file(path), path.parent_path());
}

Environment::Environment(Scenario scenario) : scenario_(std::move(scenario)) {
  weights_ = scenario_.env.weights;
  time_norm_s_ = scenario_.sim.horizon_s.value_or(86400.0);
  const ClusterConfig& cl = *scenario_.cluster;
  const double rated_it = scenario_.sim.rated_power_w.value_or(cl.rated_it_power_w());
  const double rated_facility =
      power_breakdown(cl.rated_it_power_w(), cl.efficiency_chain(), rated_it, cl.pue()).facility_w;
  if (!weights_.energy_norm_j) {
    weights_.energy_norm_j = std::max(rated_facility * scenario_.sim.delta_s, 1e-12);
  }
  if (!weights_.carbon_norm_g) {
    const double g = *weights_.energy_norm_j / kJoulesPerKwh * scenario_.sim.carbon_intensity.at(0.0);
    weights_.carbon_norm_g = g > 0.0 ? g : 1.0;
  }
}

std::vector<double> Environment::reset(std::optional<std::uint64_t> seed) {
  std::vector<JobRecord> jobs;
  if (scenario_.synth) {
    SynthParams p = *scenario_.synth;
    if (seed) p.seed = *seed;
    jobs = generate_synthetic(p);
  } else {
    jobs = scenario_.trace_jobs;
  }
  engine_ = std::make_unique<Engine>(*scenario_.cluster, std::move(jobs), scenario_.sim);
  engine_->admit_arrivals();
  last_it_power_w_ = scenario_.cluster->total_idle_power_w();
  done_ = engine_->finished();
  return observe();
}

std::vector<double> Environment::observe() const {
  std::vector<double> obs(observation_size(), 0.0);
  if (!engine_) return obs;
  const ClusterConfig& cl = *scenario_.cluster;
  const ResourceVector total = cl.total_capacity();
  const double n_nodes = static_cast<double>(cl.size());
  auto frac = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };

  const auto queue = engine_->queue();
  const std::size_t k = queue_slots();
  for (std::size_t i = 0; i < k && i < queue.size(); ++i) {
    const JobRecord& j = *queue[i];
    const double nodes = static_cast<double>(j.node_count);
    double* slot = &obs[5 * i];
    slot[0] = (engine_->clock_s() - j.submit_time_s) / time_norm_s_;
    slot[1] = frac(static_cast<double>(j.requested.cores) * nodes, static_cast<double>(total.cores));
    slot[2] = frac(static_cast<double>(j.requested.gpus) * nodes, static_cast<double>(total.gpus));
    slot[3] = nodes / n_nodes;
    slot[4] = j.walltime_s / time_norm_s_;
  }

  ResourceVector free;
  for (const ResourceVector& f : engine_->ledger().free()) free += f;
  double* sys = &obs[5 * k];
  sys[0] = frac(static_cast<double>(free.cores), static_cast<double>(total.cores));
  sys[1] = frac(static_cast<double>(free.gpus), static_cast<double>(total.gpus));
  sys[2] = (n_nodes - static_cast<double>(engine_->ledger().busy_nodes())) / n_nodes;
  sys[3] = frac(last_it_power_w_, engine_->rated_power_w());
  sys[4] = static_cast<double>(queue.size()) / static_cast<double>(k);
  sys[5] = static_cast<double>(engine_->running_count()) / n_nodes;
  return obs;
}

StepResult Environment::step(std::int64_t action) {
  if (!engine_) throw Error(ErrorCode::SessionState, "step called before reset");
  if (done_) throw Error(ErrorCode::SessionState, "episode is done; call reset");
  const auto k = static_cast<std::int64_t>(queue_slots());
  if (action < 0 || action > k) {
    throw Error(ErrorCode::InvalidArgument,
                "action must lie in [0, " + std::to_string(k) + "]");
  }

  StepResult out;
  bool dispatched = false;
  if (action < k) {
    const auto queue = engine_->queue();
    const auto slot = static_cast<std::size_t>(action);
    std::optional<std::vector<Placement>> placement;
    if (slot < queue.size()) placement = first_fit(engine_->ledger().free(), *queue[slot]);
    if (placement) {
      engine_->dispatch({queue[slot]->job_id, std::move(*placement)});
      dispatched = true;
    } else {
      out.invalid_action = true;
    }
  }

  const bool advance = !dispatched || scenario_.env.dispatch_advances;
  double reward = 0.0;
  if (advance) {
    const StepReport report = engine_->advance();
    engine_->admit_arrivals();
    last_it_power_w_ = report.it_power_w;
    const double energy_j = report.facility_power_w * scenario_.sim.delta_s;
    const double carbon_g =
        energy_j * scenario_.sim.carbon_intensity.at(report.clock_s) / kJoulesPerKwh;
    reward += weights_.w_throughput * static_cast<double>(report.jobs_finished.size());
    reward -= weights_.w_energy * (energy_j / *weights_.energy_norm_j);
    reward -= weights_.w_carbon * (carbon_g / *weights_.carbon_norm_g);
  }
  if (out.invalid_action) reward -= scenario_.env.invalid_penalty;

  done_ = engine_->finished();
  out.advanced = advance;
  out.reward = reward;
  out.done = done_;
  out.truncated = done_ && !engine_->drained();
  out.it_power_w = last_it_power_w_;
  out.jobs_finished_total = engine_->metrics().jobs_finished();
  out.energy_kwh = engine_->metrics().facility_energy_j() / kJoulesPerKwh;
  out.carbon_g = engine_->metrics().carbon_g();
  out.clock_s = engine_->clock_s();
  out.observation = observe();
  return out;
}

// ---------------------------------------------------------------------------
// Protocol

Session::Session(Scenario scenario, std::filesystem::path base_dir)
    : env_(std::make_unique<Environment>(std::move(scenario))), base_dir_(std::move(base_dir)) {}

std::string Session::spec_json() const {
  json w;
  const RewardWeights& rw = env_->weights();
  w["w_throughput"] = rw.w_throughput;
  w["w_energy"] = rw.w_energy;
  w["w_carbon"] = rw.w_carbon;
  w["energy_norm_j"] = *rw.energy_norm_j;
  w["carbon_norm_g"] = *rw.carbon_norm_g;
  nlohmann::ordered_json j;
  j["ok"] = true;
  j["K"] = env_->queue_slots();
  j["obs_len"] = env_->observation_size();
  j["action_count"] = env_->action_count();
  j["weights"] = w;
  j["invalid_penalty"] = env_->scenario().env.invalid_penalty;
  j["delta_s"] = env_->scenario().sim.delta_s;
  j["horizon_s"] = *env_->scenario().sim.horizon_s;
  return j.dump();
}

namespace {

std::string error_reply(const std::string& code, const std::string& message) {
  nlohmann::ordered_json j;
  j["ok"] = false;
  j["error"] = code;
  j["message"] = message;
  return j.dump();
}

}  // namespace

std::string Session::handle(std::string_view line) {
  try {
    if (closed_) throw Error(ErrorCode::SessionState, "session is closed");
    json req;
    try {
      req = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Protocol, std::string("malformed JSON: ") + e.what());
    }
    if (!req.is_object() || !req.contains("cmd") || !req["cmd"].is_string()) {
      throw Error(ErrorCode::Protocol, "request needs a string field 'cmd'");
    }
    const std::string cmd = req["cmd"].get<std::string>();

    if (cmd == "reset") {
      std::optional<std::uint64_t> seed;
      if (req.contains("seed") && !req["seed"].is_null()) {
        if (!req["seed"].is_number_integer() || req["seed"].get<std::int64_t>() < 0) {
          throw Error(ErrorCode::Protocol, "seed must be a non-negative integer");
        }
        seed = req["seed"].get<std::uint64_t>();
      }
      if (req.contains("scenario") && !req["scenario"].is_null()) {
        const json& s = req["scenario"];
        Scenario sc = s.is_string() ? Scenario::load(resolve(base_dir_, s.get<std::string>()))
                                    : Scenario::from_json_text(s.dump(), base_dir_);
        env_ = std::make_unique<Environment>(std::move(sc));
      }
      nlohmann::ordered_json j;
      j["ok"] = true;
      j["obs"] = env_->reset(seed);
      j["info"] = json::object();
      return j.dump();
    }
    if (cmd == "step") {
      if (!env_->started()) throw Error(ErrorCode::SessionState, "step called before reset");
      if (!req.contains("action")) throw Error(ErrorCode::Protocol, "step needs 'action'");
      if (!req["action"].is_number_integer()) {
        throw Error(ErrorCode::Protocol, "action must be an integer");
      }
      const StepResult r = env_->step(req["action"].get<std::int64_t>());
      if (!std::isfinite(r.reward)) throw Error(ErrorCode::Protocol, "non-finite reward");
      nlohmann::ordered_json info;
      info["it_power_w"] = r.it_power_w;
      info["jobs_finished_total"] = r.jobs_finished_total;
      info["energy_kwh"] = r.energy_kwh;
      info["carbon_g"] = r.carbon_g;
      info["invalid_action"] = r.invalid_action;
      info["truncated"] = r.truncated;
      info["clock_s"] = r.clock_s;
      nlohmann::ordered_json j;
      j["ok"] = true;
      j["obs"] = r.observation;
      j["reward"] = r.reward;
      j["done"] = r.done;
      j["truncated"] = r.truncated;
      j["info"] = info;
      return j.dump();
    }
    if (cmd == "spec") return spec_json();
    if (cmd == "close") {
      closed_ = true;
      return R"({"ok":true})";
    }
    throw Error(ErrorCode::Protocol, "unknown cmd '" + cmd + "'");
  } catch (const Error& e) {
    const ErrorCode code = e.code() == ErrorCode::InvalidArgument ? ErrorCode::Protocol : e.code();
    return error_reply(error_code_name(code), e.what());
  } catch (const std::exception& e) {
    return error_reply("InternalError", e.what());
  }
}

}  // namespace raps
