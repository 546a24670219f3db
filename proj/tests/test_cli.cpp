#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <fcntl.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "support/files.hpp"

extern char** environ;

using fixtures::TempDir;
using fixtures::read_file;
using fixtures::write_file;
using nlohmann::json;

namespace {

const std::string kData = RAPS_DATA_DIR;
const std::string kCli = RAPS_CLI_PATH;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run(const std::string& args, const std::string& stdin_text = "") {
  TempDir io;
  write_file(io / "in", stdin_text);
  const std::string cmd = kCli + " " + args + " < " + (io / "in").string() + " > " + (io / "out").string() +
                          " 2> " + (io / "err").string();
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = read_file(io / "out");
  o.err = read_file(io / "err");
  return o;
}

std::string cluster() { return kData + "/clusters/tx_mini.json"; }

}  // namespace

TEST(Cli, ReplayWritesOutputs) {
  TempDir out;
  const auto o = run("simulate --cluster " + cluster() + " --trace " + kData + "/sample_trace --mode replay --output " +
                     out.path().string());
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* f : {"summary.json", "power_history.csv", "jobs.csv", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  }
  const auto summary = json::parse(read_file(out / "summary.json"));
  EXPECT_EQ(summary["scheduler"], "replay");
  EXPECT_EQ(summary["jobs_finished"], 10);
  EXPECT_EQ(o.out, read_file(out / "summary.json"));

  const auto manifest = json::parse(read_file(out / "manifest.json"));
  EXPECT_EQ(manifest["outputs"]["summary.json"].get<std::string>().size(), 64u);
  EXPECT_TRUE(manifest.contains("inputs"));
  EXPECT_TRUE(manifest.contains("command"));
}

TEST(Cli, RescheduleWithEasy) {
  TempDir out;
  const auto o = run("simulate --cluster " + cluster() + " --synth-params " + kData +
                     "/synth_50.json --mode reschedule --scheduler easy --carbon 400 --output " + out.path().string());
  ASSERT_EQ(o.code, 0) << o.err;
  const auto summary = json::parse(read_file(out / "summary.json"));
  EXPECT_EQ(summary["scheduler"], "easy");
  EXPECT_EQ(summary["mode"], "reschedule");
  EXPECT_GT(summary["carbon_g"].get<double>(), 0.0);
}

TEST(Cli, SimulateByteIdenticalAcrossRuns) {
  TempDir a, b;
  const std::string args = "simulate --cluster " + cluster() + " --synth-params " + kData +
                           "/synth_50.json --scheduler easy --seed 7 --carbon " + kData + "/carbon_day.csv --output ";
  ASSERT_EQ(run(args + a.path().string()).code, 0);
  ASSERT_EQ(run(args + b.path().string()).code, 0);
  for (const char* f : {"summary.json", "power_history.csv", "jobs.csv"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  const auto ma = json::parse(read_file(a / "manifest.json"));
  const auto mb = json::parse(read_file(b / "manifest.json"));
  EXPECT_EQ(ma["outputs"], mb["outputs"]);
  EXPECT_EQ(ma["inputs"], mb["inputs"]);
}

TEST(Cli, MissingColumnExitsTwo) {
  TempDir trace, out;
  write_file(trace / "jobs.csv",
             "job_id,submit_time_s,node_count,cores,gpus,memory_mb,trace_start_time_s,trace_nodes,gflops_estimate\n"
             "j1,0,1,4,0,100,0,c-0,\n");
  const auto o = run("simulate --cluster " + cluster() + " --trace " + trace.path().string() +
                     " --mode replay --output " + out.path().string());
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("walltime_s"), std::string::npos) << o.err;
}

TEST(Cli, BadConfigFieldNamed) {
  TempDir dir, out;
  write_file(dir / "c.json", R"({"nodes":[{"node_id":"n","capacity":{"cores":4,"gpus":0,"memory_mb":1},"max_power_w":10}]})");
  const auto o = run("simulate --cluster " + (dir / "c.json").string() + " --synth-params " + kData +
                     "/synth_20.json --output " + out.path().string());
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("idle_power_w"), std::string::npos) << o.err;
  EXPECT_EQ(run("simulate --cluster " + cluster() + " --output " + out.path().string()).code, 2);
  EXPECT_EQ(run("simulate --cluster " + cluster() + " --synth-params " + kData + "/synth_20.json --scheduler sjf --output " +
                out.path().string())
                .code,
            2);
}

TEST(Cli, UnschedulableExitsThree) {
  TempDir trace, out;
  write_file(trace / "jobs.csv",
             "job_id,submit_time_s,node_count,cores,gpus,memory_mb,walltime_s,trace_start_time_s,trace_nodes,"
             "gflops_estimate\nhuge,0,1,400,0,100,10,,,\n");
  const auto o = run("simulate --cluster " + cluster() + " --trace " + trace.path().string() + " --scheduler fcfs --output " +
                     out.path().string());
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find("StarvationGuard"), std::string::npos) << o.err;
}

TEST(Cli, SynthDeterministicAndRoundTrips) {
  TempDir a, b, out;
  const std::string args = "synth --params " + kData + "/synth_50.json --seed 7 --output ";
  ASSERT_EQ(run(args + a.path().string()).code, 0);
  ASSERT_EQ(run(args + b.path().string()).code, 0);
  EXPECT_EQ(read_file(a / "jobs.csv"), read_file(b / "jobs.csv"));
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a / "telemetry")) {
    EXPECT_EQ(read_file(e.path()), read_file(b / "telemetry" / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 50u);

  // The generated directory feeds straight back into simulate, and matches
  // simulating from the params directly.
  TempDir direct;
  ASSERT_EQ(run("simulate --cluster " + cluster() + " --trace " + a.path().string() + " --output " + out.path().string())
                .code,
            0);
  ASSERT_EQ(run("simulate --cluster " + cluster() + " --synth-params " + kData + "/synth_50.json --seed 7 --output " +
                direct.path().string())
                .code,
            0);
  EXPECT_EQ(read_file(out / "jobs.csv"), read_file(direct / "jobs.csv"));
}

TEST(Cli, SynthRejectsZeroJobs) {
  TempDir dir;
  write_file(dir / "p.json", R"({"job_count":0,"arrival_rate_per_s":1,"runtime_log_mean":1,"runtime_log_sigma":1})");
  const auto o = run("synth --params " + (dir / "p.json").string() + " --output " + (dir / "w").string());
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("job_count"), std::string::npos);
}

TEST(Cli, ServeEnvStdio) {
  const auto o = run("serve-env --stdio --scenario " + kData + "/scenarios/env_20.json",
                     "{\"cmd\":\"reset\",\"seed\":1}\n{\"cmd\":\"step\",\"action\":8}\nnot json\n{\"cmd\":\"close\"}\n");
  ASSERT_EQ(o.code, 0) << o.err;
  std::vector<json> replies;
  std::istringstream lines(o.out);
  for (std::string line; std::getline(lines, line);) replies.push_back(json::parse(line));
  ASSERT_EQ(replies.size(), 4u);
  EXPECT_EQ(replies[0]["ok"], true);
  EXPECT_EQ(replies[0]["obs"].size(), 46u);
  EXPECT_EQ(replies[1]["ok"], true);
  EXPECT_EQ(replies[2]["error"], "ProtocolError");
  EXPECT_EQ(replies[3]["ok"], true);
  EXPECT_EQ(json::parse(o.err.substr(0, o.err.find('\n')))["obs_len"], 46);
}

TEST(Cli, ServeEnvBadScenarioExitsTwo) {
  EXPECT_EQ(run("serve-env --stdio --scenario /nonexistent/s.json").code, 2);
}

TEST(Cli, ServeEnvTcpPortZero) {
  int out_pipe[2];
  ASSERT_EQ(::pipe(out_pipe), 0);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
  const std::string scenario = kData + "/scenarios/env_20.json";
  std::vector<std::string> argv_s = {kCli, "serve-env", "--port", "0", "--scenario", scenario};
  std::vector<char*> argv;
  for (auto& s : argv_s) argv.push_back(s.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  ASSERT_EQ(posix_spawn(&pid, kCli.c_str(), &actions, nullptr, argv.data(), environ), 0);
  posix_spawn_file_actions_destroy(&actions);
  ::close(out_pipe[1]);

  std::string port_line;
  char c;
  while (::read(out_pipe[0], &c, 1) == 1 && c != '\n') port_line += c;
  ::close(out_pipe[0]);
  const int port = std::stoi(port_line);
  EXPECT_GT(port, 0);

  auto request = [&](int fd, const std::string& line) {
    const std::string msg = line + "\n";
    EXPECT_EQ(::send(fd, msg.data(), msg.size(), 0), static_cast<ssize_t>(msg.size()));
    std::string reply;
    while (::recv(fd, &c, 1, 0) == 1 && c != '\n') reply += c;
    return json::parse(reply);
  };
  auto connect_once = [&] {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    EXPECT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
    return fd;
  };

  // Two concurrent connections get independent sessions.
  const int a = connect_once();
  const int b = connect_once();
  EXPECT_EQ(request(a, R"({"cmd":"reset","seed":1})")["ok"], true);
  EXPECT_EQ(request(b, R"({"cmd":"step","action":0})")["error"], "SessionStateError");
  const auto step = request(a, R"({"cmd":"step","action":8})");
  EXPECT_EQ(step["ok"], true);
  EXPECT_EQ(request(b, R"({"cmd":"reset","seed":1})")["obs"].size(), 46u);
  EXPECT_EQ(request(a, R"({"cmd":"close"})")["ok"], true);
  ::close(a);
  ::close(b);

  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
}
