// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "raps/engine.hpp"
#include "raps/error.hpp"
#include "raps/rl_env.hpp"
#include "support/fixtures.hpp"

namespace {

const std::string kData = RAPS_DATA_DIR;
const std::string kCli = RAPS_CLI_PATH;

// easy / fcfs mean slowdown on synth_50.json (seed 7) over tx_mini.json,
// recorded from the first oracle-verified build.
constexpr double kGoldenSlowdownRatio = 0.43194671930436135;

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail << what;
    ok = ok && cond;
  }
};

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

Check replay_fidelity() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cluster = raps::ClusterConfig::load(kData + "/clusters/tx_mini.json");
  const auto jobs = raps::parse_trace_dir(kData + "/sample_trace", 1.0);
  raps::SimConfig cfg;
  cfg.mode = raps::Mode::Replay;
  cfg.scheduler = raps::Policy::Replay;
  const auto r = raps::run(cluster, jobs, cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::map<std::string, const raps::JobRecord*> by_id;
  for (const auto& j : jobs) by_id[j.job_id] = &j;
  double worst = 0.0;
  for (const auto& s : r.history) {
    std::map<std::string, double> node_w;
    for (const auto& o : r.jobs) {
      if (!o.start_time_s || *o.start_time_s > s.clock_s) continue;
      if (o.end_time_s && *o.end_time_s <= s.clock_s) continue;
      const auto& j = *by_id.at(o.job_id);
      const auto& series = *j.series.measured_power_w;
      const auto k = static_cast<std::size_t>(std::floor((s.clock_s - *o.start_time_s) / j.series.quanta_s + 1e-9));
      const double w = series[std::min(k, series.size() - 1)];
      for (const auto& n : o.nodes) node_w[n] += w / static_cast<double>(o.nodes.size());
    }
    double expected = 0.0;
    for (const auto& n : cluster.nodes()) expected += node_w.count(n.node_id) ? node_w[n.node_id] : n.idle_power_w;
    worst = std::max(worst, std::abs(s.it_power_w - expected) / expected);
  }
  for (const auto& j : jobs) {
    for (const auto& o : r.jobs) {
      if (o.job_id == j.job_id) c.expect(o.start_time_s == j.trace_start_time_s, j.job_id + " off its recorded start; ");
    }
  }
  c.expect(r.summary.jobs_unfinished == 0, "unfinished jobs; ");
  c.expect(worst <= 1e-6, "power mismatch; ");
  c.expect(wall < 1.0, "too slow; ");
  c.detail << r.history.size() << " steps, max rel err " << worst << ", wall " << wall << " s";
  return c;
}

Check energy_identity() {
  Check c;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    raps::EfficiencyChain chain;
    chain.stages.push_back({"vr", raps::EfficiencyCurve({{0.0, 0.8 + 0.15 * u(rng)}, {0.5, 0.9 + 0.1 * u(rng)}}), {}});
    chain.stages.push_back({"rect", raps::EfficiencyCurve::constant(0.9 + 0.1 * u(rng)), 2000.0 * (1 + u(rng))});
    const auto inst = oracle::random_instance(10000 + trial, 10, 4);
    const auto base = fixtures::to_cluster(inst);
    const raps::ClusterConfig cluster(base.nodes(), {}, chain, 1.0 + 0.6 * u(rng));
    auto jobs = fixtures::to_jobs(inst);
    for (auto& j : jobs) {
      j.series.cpu_util = {u(rng), u(rng), u(rng), u(rng)};
      j.series.gpu_util = {u(rng), u(rng)};
    }
    raps::SimConfig cfg;
    cfg.scheduler = trial % 2 ? raps::Policy::Easy : raps::Policy::Fcfs;
    cfg.delta_s = trial % 3 == 0 ? 0.5 : 1.0;
    cfg.carbon_intensity = raps::CarbonIntensity(100.0 + 400.0 * u(rng));
    const auto r = raps::run(cluster, jobs, cfg);
    double it = 0, loss = 0, pue = 0, fac = 0;
    for (const auto& s : r.history) {
      it += s.it_power_w * cfg.delta_s;
      loss += s.loss_w * cfg.delta_s;
      pue += s.pue_overhead_w * cfg.delta_s;
      fac += s.facility_power_w * cfg.delta_s;
    }
    const auto& m = r.summary.metrics;
    const double sum = m.it_energy_kwh + m.loss_energy_kwh + m.pue_overhead_energy_kwh;
    worst = std::max(worst, std::abs(sum - m.facility_energy_kwh) / m.facility_energy_kwh);
    c.expect(rel_close(sum, m.facility_energy_kwh, 1e-9), "identity broken; ");
    c.expect(rel_close(m.it_energy_kwh * 3.6e6, it, 1e-9), "it step-sum; ");
    c.expect(rel_close(m.loss_energy_kwh * 3.6e6, loss, 1e-9), "loss step-sum; ");
    c.expect(rel_close(m.pue_overhead_energy_kwh * 3.6e6, pue, 1e-9), "pue step-sum; ");
    c.expect(rel_close(m.facility_energy_kwh * 3.6e6, fac, 1e-9), "facility step-sum; ");
  }
  auto chain_of = [](std::vector<double> etas) {
    raps::EfficiencyChain ch;
    for (double e : etas) ch.stages.push_back({"s", raps::EfficiencyCurve::constant(e), {}});
    return ch;
  };
  c.expect(raps::apply_chain(1000.0, chain_of({1.0}), 1.0).input_power_w == 1000.0, "eta=1 spot; ");
  c.expect(raps::apply_chain(1000.0, chain_of({0.95}), 1.0).input_power_w == 1000.0 / 0.95, "eta=0.95 spot; ");
  c.expect(raps::apply_chain(1000.0, chain_of({0.98, 0.95}), 1.0).input_power_w == 1000.0 / (0.98 * 0.95),
           "two-stage spot; ");
  c.detail << "100 scenarios, max rel err " << worst << ", 3 exact spot checks";
  return c;
}

std::map<std::string, double> engine_starts(const oracle::Instance& inst, raps::Policy policy) {
  raps::SimConfig cfg;
  cfg.scheduler = policy;
  const auto r = raps::run(fixtures::to_cluster(inst), fixtures::to_jobs(inst), cfg);
  std::map<std::string, double> out;
  for (const auto& o : r.jobs) out[o.job_id] = o.start_time_s.value_or(-1.0);
  return out;
}

Check scheduler_oracle() {
  Check c;
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto inst = oracle::random_instance(seed, 6, 3);
    for (bool easy : {false, true}) {
      const auto want = oracle::simulate(inst, easy);
      const auto got = engine_starts(inst, easy ? raps::Policy::Easy : raps::Policy::Fcfs);
      for (std::size_t j = 0; j < inst.jobs.size(); ++j) {
        if (got.at(inst.jobs[j].id) != want[j]) {
          if (mismatches == 0) c.detail << "seed " << seed << (easy ? " easy" : " fcfs") << " differs; ";
          ++mismatches;
        }
      }
    }
  }
  c.expect(mismatches == 0, "");
  for (int c_wall : {80, 120}) {
    oracle::Instance inst;
    inst.capacity = {{4, 0}, {4, 0}, {4, 0}};
    inst.jobs = {{"A", 0, 100, 2, {4, 0}}, {"B", 0, 50, 3, {4, 0}}, {"C", 0, c_wall, 1, {4, 0}}};
    const auto starts = engine_starts(inst, raps::Policy::Easy);
    if (c_wall == 80) {
      c.expect(starts.at("C") == 0.0, "C not backfilled at walltime 80; ");
    } else {
      c.expect(starts.at("C") > 0.0, "C backfilled at walltime 120; ");
    }
    c.expect(starts.at("B") == 100.0, "B reservation moved; ");
  }
  c.detail << "2000 schedules, " << mismatches << " mismatched starts; EASY example checked";
  return c;
}

Check slowdown_improvement() {
  Check c;
  const auto cluster = raps::ClusterConfig::load(kData + "/clusters/tx_mini.json");
  const auto params = raps::SynthParams::from_json_text(fixtures::read_file(kData + "/synth_50.json"));
  c.expect(params.seed == 7 && params.job_count == 50, "unexpected synth_50 params; ");
  raps::SimConfig cfg;
  cfg.scheduler = raps::Policy::Fcfs;
  const double fcfs = *raps::run(cluster, raps::generate_synthetic(params), cfg).summary.metrics.mean_slowdown;
  cfg.scheduler = raps::Policy::Easy;
  const double easy = *raps::run(cluster, raps::generate_synthetic(params), cfg).summary.metrics.mean_slowdown;
  const double ratio = easy / fcfs;
  c.expect(easy < fcfs, "easy not better; ");
  c.expect(rel_close(ratio, kGoldenSlowdownRatio, 1e-9), "ratio drifted from golden; ");
  c.detail.precision(17);
  c.detail << "fcfs " << fcfs << ", easy " << easy << ", ratio " << ratio;
  return c;
}

int run_cli(const std::string& args) { return std::system((kCli + " " + args + " > /dev/null 2>&1").c_str()); }

Check determinism() {
  Check c;
  fixtures::TempDir a, b;
  const std::string args = "simulate --cluster " + kData + "/clusters/tx_mini.json --synth-params " + kData +
                           "/synth_50.json --scheduler easy --seed 7 --carbon " + kData + "/carbon_day.csv --output ";
  c.expect(run_cli(args + a.path().string()) == 0 && run_cli(args + b.path().string()) == 0, "simulate failed; ");
  for (const char* f : {"summary.json", "power_history.csv", "jobs.csv"}) {
    const auto x = fixtures::read_file(a / f);
    c.expect(!x.empty() && x == fixtures::read_file(b / f), std::string(f) + " differs; ");
  }

  auto rollout = [] {
    raps::Session s(raps::Scenario::load(kData + "/scenarios/env_20.json"), kData + "/scenarios");
    std::string out = s.handle(R"({"cmd":"reset","seed":1})");
    for (int i = 0; i < 1000; ++i) {
      const std::string reply = s.handle(R"({"cmd":"step","action":)" + std::to_string((i * 7) % 9) + "}");
      out += reply;
      if (reply.find("\"done\":true") != std::string::npos) out += s.handle(R"({"cmd":"reset","seed":2})");
    }
    return out;
  };
  const auto t1 = rollout();
  c.expect(t1 == rollout() && t1.find("\"ok\":false") == std::string::npos, "rollout differs; ");

  raps::Environment env(raps::Scenario::load(kData + "/scenarios/env_20.json"));
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<std::int64_t> pick(0, static_cast<std::int64_t>(env.action_count()) - 1);
  env.reset(0);
  int violations = 0, non_finite = 0, episodes = 1;
  for (int i = 0; i < 10000; ++i) {
    raps::StepResult r;
    try {
      r = env.step(pick(rng));
    } catch (const raps::Error&) {
      ++violations;
      env.reset(static_cast<std::uint64_t>(episodes++));
      continue;
    }
    if (!std::isfinite(r.reward)) ++non_finite;
    if (!env.engine()->ledger().consistent()) ++violations;
    if (r.done) env.reset(static_cast<std::uint64_t>(episodes++));
  }
  c.expect(violations == 0 && non_finite == 0, "random rollout violations; ");
  c.detail << "simulate x2 identical, 1000-step rollout identical, 10000 random steps over " << episodes
           << " episodes: " << violations << " violations, " << non_finite << " non-finite rewards";
  return c;
}

Check metric_formulas() {
  Check c;
  c.expect(raps::slowdown(100.0, 50.0) == 3.0, "slowdown; ");
  raps::MetricsAccumulator acc;
  raps::PowerBreakdown p;
  p.it_w = p.chain_input_w = p.facility_w = 12000.0;
  acc.add_step(p, 600.0, 400.0, 1, 1, 0.0);
  acc.add_finished_job(100.0, 50.0);
  const auto s = raps::finalize_metrics(acc, 600.0);
  c.expect(s.facility_energy_kwh == 2.0, "energy; ");
  c.expect(s.carbon_g == 800.0, "carbon; ");
  c.expect(s.mean_slowdown && *s.mean_slowdown == 3.0, "mean slowdown; ");
  c.detail << "slowdown " << raps::slowdown(100.0, 50.0) << ", " << s.facility_energy_kwh << " kWh, " << s.carbon_g
           << " g";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"replay-fidelity", replay_fidelity},
      {"energy-bookkeeping", energy_identity},
      {"scheduler-oracle-equivalence", scheduler_oracle},
      {"slowdown-improvement", slowdown_improvement},
      {"determinism", determinism},
      {"metric-formulas", metric_formulas},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail << "exception: " << e.what();
    }
    std::cout << (c.ok ? "PASS " : "FAIL ") << name << ": " << c.detail.str() << std::endl;
    failed += c.ok ? 0 : 1;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
