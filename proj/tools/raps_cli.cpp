// raps: command-line front end. Talks to the simulator exclusively through
// the C API in raps/raps.h.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "raps/raps.h"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitScheduling = 3;

int exit_code_for(raps_status status) {
  switch (status) {
    case RAPS_OK: return kExitOk;
    case RAPS_ERR_SCHEDULER_VIOLATION:
    case RAPS_ERR_STARVATION_GUARD:
    case RAPS_ERR_CAPACITY_VIOLATION: return kExitScheduling;
    case RAPS_ERR_INTERNAL: return kExitFailure;
    default: return kExitConfig;
  }
}

struct CliError {
  int code;
};

void check(raps_status status, const std::string& what) {
  if (status == RAPS_OK) return;
  std::cerr << "raps: " << what << ": " << raps_status_name(status) << ": " << raps_last_error()
            << '\n';
  throw CliError{exit_code_for(status)};
}

[[noreturn]] void fail(int code, const std::string& message) {
  std::cerr << "raps: " << message << '\n';
  throw CliError{code};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ClusterPtr = std::unique_ptr<raps_cluster, Deleter<raps_cluster, raps_cluster_free>>;
using WorkloadPtr = std::unique_ptr<raps_workload, Deleter<raps_workload, raps_workload_free>>;
using ResultPtr = std::unique_ptr<raps_result, Deleter<raps_result, raps_result_free>>;
using SessionPtr = std::unique_ptr<raps_session, Deleter<raps_session, raps_session_free>>;

std::string take_string(char* s) {
  std::string out(s ? s : "");
  raps_string_free(s);
  return out;
}

std::string read_text(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(kExitConfig, "cannot read " + what + " " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string sha256(const fs::path& path) {
  char hex[65];
  check(raps_file_sha256(path.string().c_str(), hex), "checksum " + path.string());
  return hex;
}

void write_manifest(const fs::path& dir, const std::string& command, const ojson& args,
                    const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs) {
  ojson m;
  m["tool"] = "raps";
  m["version"] = raps_version();
  m["command"] = command;
  m["args"] = args;
  ojson in = ojson::object();
  for (const auto& p : inputs) in[p.generic_string()] = sha256(p);
  m["inputs"] = in;
  ojson out = ojson::object();
  for (const auto& name : outputs) out[name] = sha256(dir / name);
  m["outputs"] = out;
  std::ofstream f(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  f << m.dump(2) << '\n';
  if (!f) fail(kExitFailure, "cannot write " + (dir / "manifest.json").string());
}

std::vector<fs::path> trace_inputs(const fs::path& dir) {
  std::vector<fs::path> files{dir / "jobs.csv"};
  std::vector<fs::path> telemetry;
  if (fs::is_directory(dir / "telemetry")) {
    for (const auto& e : fs::directory_iterator(dir / "telemetry")) {
      if (e.is_regular_file() && e.path().extension() == ".csv") telemetry.push_back(e.path());
    }
  }
  std::sort(telemetry.begin(), telemetry.end());
  files.insert(files.end(), telemetry.begin(), telemetry.end());
  return files;
}

// ---------------------------------------------------------------------------

struct SimulateFlags {
  std::string cluster;
  std::string trace;
  std::string synth_params;
  std::string mode = "reschedule";
  std::string scheduler;
  double delta = 1.0;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
  std::string carbon;
  std::optional<double> starvation_cap;
  std::string output;
};

int cmd_simulate(const SimulateFlags& f) {
  ClusterPtr cluster;
  {
    raps_cluster* raw = nullptr;
    check(raps_cluster_load(f.cluster.c_str(), &raw), "cluster " + f.cluster);
    cluster.reset(raw);
  }

  WorkloadPtr workload;
  std::vector<fs::path> inputs{f.cluster};
  {
    raps_workload* raw = nullptr;
    if (!f.trace.empty()) {
      check(raps_workload_load_trace(f.trace.c_str(), f.delta, &raw), "trace " + f.trace);
      const auto files = trace_inputs(f.trace);
      inputs.insert(inputs.end(), files.begin(), files.end());
    } else {
      const std::string params = read_text(f.synth_params, "synth params");
      check(raps_workload_synth(params.c_str(), f.seed ? 1 : 0, f.seed.value_or(0), &raw),
            "synth params " + f.synth_params);
      inputs.emplace_back(f.synth_params);
    }
    workload.reset(raw);
  }

  ojson config;
  config["mode"] = f.mode;
  if (!f.scheduler.empty()) config["scheduler"] = f.scheduler;
  config["delta_s"] = f.delta;
  if (f.horizon) config["horizon_s"] = *f.horizon;
  if (f.starvation_cap) config["starvation_cap_s"] = *f.starvation_cap;
  if (!f.carbon.empty()) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(f.carbon.data(), f.carbon.data() + f.carbon.size(), value);
    if (ec == std::errc() && ptr == f.carbon.data() + f.carbon.size()) {
      config["carbon_intensity"] = value;
    } else {
      config["carbon_intensity"] = {{"csv", f.carbon}};
      inputs.emplace_back(f.carbon);
    }
  }

  ResultPtr result;
  {
    raps_result* raw = nullptr;
    check(raps_simulate(cluster.get(), workload.get(), config.dump().c_str(), nullptr, &raw),
          "simulate");
    result.reset(raw);
  }
  check(raps_result_write(result.get(), f.output.c_str()), "write " + f.output);

  ojson args;
  args["cluster"] = f.cluster;
  args["trace"] = f.trace.empty() ? ojson(nullptr) : ojson(f.trace);
  args["synth_params"] = f.synth_params.empty() ? ojson(nullptr) : ojson(f.synth_params);
  args["seed"] = f.seed ? ojson(*f.seed) : ojson(nullptr);
  args["config"] = config;
  args["output"] = f.output;
  write_manifest(f.output, "simulate", args, inputs,
                 {"summary.json", "power_history.csv", "jobs.csv"});

  const std::string summary = take_string([&] {
    char* s = nullptr;
    check(raps_result_summary_json(result.get(), &s), "summary");
    return s;
  }());
  std::cout << summary;
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& params_path, std::optional<std::uint64_t> seed,
              const std::string& output) {
  const std::string params = read_text(params_path, "synth params");
  raps_workload* raw = nullptr;
  check(raps_workload_synth(params.c_str(), seed ? 1 : 0, seed.value_or(0), &raw),
        "synth params " + params_path);
  WorkloadPtr workload(raw);
  check(raps_workload_write_trace(workload.get(), output.c_str()), "write " + output);

  ojson args;
  args["params"] = params_path;
  args["seed"] = seed ? ojson(*seed) : ojson(nullptr);
  args["output"] = output;
  std::vector<std::string> outputs;
  for (const auto& p : trace_inputs(output)) outputs.push_back(fs::relative(p, output).generic_string());
  write_manifest(output, "synth", args, {params_path}, outputs);
  std::cerr << "raps: wrote " << raps_workload_size(workload.get()) << " jobs to " << output << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

SessionPtr open_session(const std::string& scenario) {
  raps_session* raw = nullptr;
  check(raps_session_create(scenario.c_str(), &raw), "scenario " + scenario);
  return SessionPtr(raw);
}

std::string reply_for(raps_session* session, const std::string& line) {
  char* reply = nullptr;
  if (raps_session_handle(session, line.c_str(), &reply) != RAPS_OK) {
    ojson err;
    err["ok"] = false;
    err["error"] = "InternalError";
    err["message"] = raps_last_error();
    return err.dump();
  }
  return take_string(reply);
}

void serve_connection(int fd, std::string scenario) {
  SessionPtr session;
  try {
    session = open_session(scenario);
  } catch (const CliError&) {
    ::close(fd);
    return;
  }
  std::string buffer;
  char chunk[4096];
  bool open = true;
  while (open) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::string reply = reply_for(session.get(), line) + "\n";
      std::size_t sent = 0;
      while (sent < reply.size()) {
        const ssize_t w = ::send(fd, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
        if (w <= 0) {
          open = false;
          break;
        }
        sent += static_cast<std::size_t>(w);
      }
      if (!open || raps_session_closed(session.get())) {
        open = false;
        break;
      }
    }
  }
  ::close(fd);
}

int cmd_serve_env(const std::string& scenario, bool use_stdio, std::optional<int> port,
                  const std::string& host) {
  SessionPtr session = open_session(scenario);
  {
    char* spec = nullptr;
    check(raps_session_spec_json(session.get(), &spec), "spec");
    std::cerr << take_string(spec) << std::endl;
  }

  if (use_stdio) {
    std::string line;
    while (std::getline(std::cin, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::cout << reply_for(session.get(), line) << '\n' << std::flush;
      if (raps_session_closed(session.get())) break;
    }
    return kExitOk;
  }

  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) fail(kExitFailure, "socket() failed");
  const int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(*port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    fail(kExitConfig, "invalid --host " + host);
  }
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listener, 16) != 0) {
    ::close(listener);
    fail(kExitFailure, "cannot bind " + host + ":" + std::to_string(*port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  const int bound = ntohs(addr.sin_port);
  std::cerr << "raps: env listening on " << host << ":" << bound << std::endl;
  std::cout << bound << std::endl;

  while (true) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) continue;
    std::thread(serve_connection, fd, scenario).detach();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"raps - cluster power, scheduling and RL environment simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(raps_version()));

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Replay or reschedule a workload");
  simulate->add_option("--cluster", sim.cluster, "Cluster config JSON")->required();
  auto* trace_opt = simulate->add_option("--trace", sim.trace, "Trace directory (jobs.csv + telemetry/)");
  auto* synth_opt = simulate->add_option("--synth-params", sim.synth_params, "Synthetic workload params JSON");
  trace_opt->excludes(synth_opt);
  simulate->add_option("--mode", sim.mode, "replay or reschedule")
      ->check(CLI::IsMember({"replay", "reschedule"}));
  simulate->add_option("--scheduler", sim.scheduler, "replay, fcfs or easy")
      ->check(CLI::IsMember({"replay", "fcfs", "easy"}));
  simulate->add_option("--delta", sim.delta, "Time step in seconds")->check(CLI::PositiveNumber);
  simulate->add_option("--horizon", sim.horizon, "Stop after this many simulated seconds");
  simulate->add_option("--seed", sim.seed, "Seed override for synthetic workloads");
  simulate->add_option("--carbon", sim.carbon, "Carbon intensity: gCO2/kWh or time_s,gco2_per_kwh CSV");
  simulate->add_option("--starvation-cap", sim.starvation_cap, "Clock cap in seconds");
  simulate->add_option("--output", sim.output, "Output directory")->required();

  std::string synth_params, synth_output;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trace directory");
  synth->add_option("--params", synth_params, "Synthetic workload params JSON")->required();
  synth->add_option("--seed", synth_seed, "Seed override");
  synth->add_option("--output", synth_output, "Output trace directory")->required();

  std::string scenario, host = "127.0.0.1";
  bool use_stdio = false;
  std::optional<int> port;
  auto* serve = app.add_subcommand("serve-env", "Serve the RL environment protocol");
  serve->add_option("--scenario", scenario, "Scenario JSON")->required();
  auto* stdio_flag = serve->add_flag("--stdio", use_stdio, "Newline-delimited JSON over stdin/stdout");
  auto* port_opt = serve->add_option("--port", port, "TCP port (0 picks a free one)")
                       ->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "TCP bind address");
  stdio_flag->excludes(port_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) {
      if (sim.trace.empty() && sim.synth_params.empty()) {
        fail(kExitConfig, "simulate needs --trace or --synth-params");
      }
      return cmd_simulate(sim);
    }
    if (*synth) return cmd_synth(synth_params, synth_seed, synth_output);
    if (*serve) {
      if (!use_stdio && !port) fail(kExitConfig, "serve-env needs --stdio or --port");
      return cmd_serve_env(scenario, use_stdio, port, host);
    }
  } catch (const CliError& e) {
    return e.code;
  }
  return kExitFailure;
}
