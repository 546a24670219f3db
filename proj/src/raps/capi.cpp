#include "raps/raps.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <openssl/evp.h>

#include "raps/cluster.hpp"
#include "raps/engine.hpp"
#include "raps/error.hpp"
#include "raps/log.hpp"
#include "raps/rl_env.hpp"
#include "raps/workload.hpp"

struct raps_cluster {
  raps::ClusterConfig config;
};

struct raps_workload {
  std::vector<raps::JobRecord> jobs;
};

struct raps_result {
  raps::SimResult result;
};

struct raps_session {
  raps::Session session;
};

namespace {

thread_local std::string t_last_error;

raps_status to_status(raps::ErrorCode code) {
  using raps::ErrorCode;
  switch (code) {
    case ErrorCode::Config: return RAPS_ERR_CONFIG;
    case ErrorCode::Schema: return RAPS_ERR_SCHEMA;
    case ErrorCode::Range: return RAPS_ERR_RANGE;
    case ErrorCode::NonIntegerRatio: return RAPS_ERR_NON_INTEGER_RATIO;
    case ErrorCode::CapacityViolation: return RAPS_ERR_CAPACITY_VIOLATION;
    case ErrorCode::DuplicateJob: return RAPS_ERR_DUPLICATE_JOB;
    case ErrorCode::UnknownJob: return RAPS_ERR_UNKNOWN_JOB;
    case ErrorCode::SchedulerViolation: return RAPS_ERR_SCHEDULER_VIOLATION;
    case ErrorCode::StarvationGuard: return RAPS_ERR_STARVATION_GUARD;
    case ErrorCode::SessionState: return RAPS_ERR_SESSION_STATE;
    case ErrorCode::Protocol: return RAPS_ERR_PROTOCOL;
    case ErrorCode::Io: return RAPS_ERR_IO;
    case ErrorCode::InvalidArgument: return RAPS_ERR_INVALID_ARGUMENT;
  }
  return RAPS_ERR_INTERNAL;
}

// Runs `fn`, translating exceptions into a status and thread-local message.
template <typename Fn>
raps_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return RAPS_OK;
  } catch (const raps::Error& e) {
    t_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
  } catch (const std::exception& e) {
    t_last_error = e.what();
  } catch (...) {
    t_last_error = "unknown exception";
  }
  return RAPS_ERR_INTERNAL;
}

template <typename T>
void require_arg(const T* ptr, const char* name) {
  if (ptr == nullptr) {
    throw raps::Error(raps::ErrorCode::InvalidArgument, std::string(name) + " is NULL");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* raps_version(void) { return RAPS_VERSION_STRING; }

const char* raps_status_name(raps_status status) {
  switch (status) {
    case RAPS_OK: return "OK";
    case RAPS_ERR_CONFIG: return "ConfigError";
    case RAPS_ERR_SCHEMA: return "SchemaError";
    case RAPS_ERR_RANGE: return "RangeError";
    case RAPS_ERR_NON_INTEGER_RATIO: return "NonIntegerRatio";
    case RAPS_ERR_CAPACITY_VIOLATION: return "CapacityViolation";
    case RAPS_ERR_DUPLICATE_JOB: return "DuplicateJob";
    case RAPS_ERR_UNKNOWN_JOB: return "UnknownJob";
    case RAPS_ERR_SCHEDULER_VIOLATION: return "SchedulerViolation";
    case RAPS_ERR_STARVATION_GUARD: return "StarvationGuard";
    case RAPS_ERR_SESSION_STATE: return "SessionStateError";
    case RAPS_ERR_PROTOCOL: return "ProtocolError";
    case RAPS_ERR_IO: return "IoError";
    case RAPS_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case RAPS_ERR_INTERNAL: return "InternalError";
  }
  return "Unknown";
}

const char* raps_last_error(void) { return t_last_error.c_str(); }

void raps_string_free(char* str) { std::free(str); }

void raps_set_log_callback(raps_log_fn fn, void* user) {
  if (fn == nullptr) {
    raps::set_log_sink(nullptr);
    return;
  }
  raps::set_log_sink([fn, user](raps::LogLevel level, const std::string& msg) {
    fn(static_cast<int>(level), msg.c_str(), user);
  });
}

raps_status raps_cluster_load(const char* path, raps_cluster** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new raps_cluster{raps::ClusterConfig::load(path)};
  });
}

raps_status raps_cluster_from_json(const char* json, raps_cluster** out) {
  return guarded([&] {
    require_arg(json, "json");
    require_arg(out, "out");
    *out = new raps_cluster{raps::ClusterConfig::from_json_text(json)};
  });
}

size_t raps_cluster_node_count(const raps_cluster* cluster) {
  return cluster ? cluster->config.size() : 0;
}

void raps_cluster_free(raps_cluster* cluster) { delete cluster; }

raps_status raps_workload_load_trace(const char* dir, double delta_s, raps_workload** out) {
  return guarded([&] {
    require_arg(dir, "dir");
    require_arg(out, "out");
    *out = new raps_workload{raps::parse_trace_dir(dir, delta_s)};
  });
}

raps_status raps_workload_synth(const char* params_json, int has_seed, uint64_t seed,
                                raps_workload** out) {
  return guarded([&] {
    require_arg(params_json, "params_json");
    require_arg(out, "out");
    raps::SynthParams params = raps::SynthParams::from_json_text(params_json);
    if (has_seed) params.seed = seed;
    *out = new raps_workload{raps::generate_synthetic(params)};
  });
}

raps_status raps_workload_write_trace(const raps_workload* workload, const char* dir) {
  return guarded([&] {
    require_arg(workload, "workload");
    require_arg(dir, "dir");
    raps::write_trace(workload->jobs, dir);
  });
}

size_t raps_workload_size(const raps_workload* workload) {
  return workload ? workload->jobs.size() : 0;
}

void raps_workload_free(raps_workload* workload) { delete workload; }

raps_status raps_simulate(const raps_cluster* cluster, const raps_workload* workload,
                          const char* config_json, const char* base_dir, raps_result** out) {
  return guarded([&] {
    require_arg(cluster, "cluster");
    require_arg(workload, "workload");
    require_arg(out, "out");
    const raps::SimConfig config = raps::SimConfig::from_json_text(
        config_json ? config_json : "{}", base_dir ? base_dir : "");
    *out = new raps_result{raps::run(cluster->config, workload->jobs, config)};
  });
}

raps_status raps_result_summary_json(const raps_result* result, char** out) {
  return guarded([&] {
    require_arg(result, "result");
    require_arg(out, "out");
    *out = dup_string(raps::summary_json(result->result.summary));
  });
}

raps_status raps_result_history_csv(const raps_result* result, char** out) {
  return guarded([&] {
    require_arg(result, "result");
    require_arg(out, "out");
    *out = dup_string(raps::history_csv(result->result.history));
  });
}

raps_status raps_result_jobs_csv(const raps_result* result, char** out) {
  return guarded([&] {
    require_arg(result, "result");
    require_arg(out, "out");
    *out = dup_string(raps::jobs_csv(result->result.jobs));
  });
}

raps_status raps_result_write(const raps_result* result, const char* dir) {
  return guarded([&] {
    require_arg(result, "result");
    require_arg(dir, "dir");
    const std::filesystem::path root(dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw raps::Error(raps::ErrorCode::Io, "cannot create " + root.string());
    auto write = [&](const char* name, const std::string& text) {
      std::ofstream f(root / name, std::ios::binary | std::ios::trunc);
      if (!(f << text)) throw raps::Error(raps::ErrorCode::Io, "cannot write " + (root / name).string());
    };
    write("summary.json", raps::summary_json(result->result.summary));
    write("power_history.csv", raps::history_csv(result->result.history));
    write("jobs.csv", raps::jobs_csv(result->result.jobs));
  });
}

void raps_result_free(raps_result* result) { delete result; }

raps_status raps_session_create(const char* scenario_path, raps_session** out) {
  return guarded([&] {
    require_arg(scenario_path, "scenario_path");
    require_arg(out, "out");
    const std::filesystem::path path(scenario_path);
    *out = new raps_session{raps::Session(raps::Scenario::load(path), path.parent_path())};
  });
}

raps_status raps_session_create_from_json(const char* scenario_json, const char* base_dir,
                                          raps_session** out) {
  return guarded([&] {
    require_arg(scenario_json, "scenario_json");
    require_arg(out, "out");
    const std::filesystem::path base = base_dir ? base_dir : ".";
    *out = new raps_session{
        raps::Session(raps::Scenario::from_json_text(scenario_json, base), base)};
  });
}

raps_status raps_session_handle(raps_session* session, const char* line, char** reply) {
  return guarded([&] {
    require_arg(session, "session");
    require_arg(line, "line");
    require_arg(reply, "reply");
    *reply = dup_string(session->session.handle(line));
  });
}

raps_status raps_session_spec_json(const raps_session* session, char** out) {
  return guarded([&] {
    require_arg(session, "session");
    require_arg(out, "out");
    *out = dup_string(session->session.spec_json());
  });
}

int raps_session_closed(const raps_session* session) {
  return session ? (session->session.closed() ? 1 : 0) : 1;
}

void raps_session_free(raps_session* session) { delete session; }

raps_status raps_file_sha256(const char* path, char out[65]) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw raps::Error(raps::ErrorCode::Io, std::string("cannot open ") + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
      throw raps::Error(raps::ErrorCode::Io, "sha256 init failed");
    }
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    for (unsigned int i = 0; i < len && i < 32; ++i) {
      out[2 * i] = kHex[digest[i] >> 4];
      out[2 * i + 1] = kHex[digest[i] & 0xF];
    }
    out[64] = '\0';
  });
}

}  // extern "C"
