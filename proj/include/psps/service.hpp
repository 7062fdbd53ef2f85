#pragma once

#include <memory>
#include <string>

#include "psps/solver.hpp"

namespace psps {

struct ServiceConfig {
  std::string data_dir = "psps-data";
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  int workers = 1;
  int threads = 1;  // per job
  std::string static_dir;  // web UI assets; empty disables static serving
  SolverOptions options;

  /// Applies PSPS_DATA_DIR, PSPS_PORT and PSPS_WORKERS over the defaults.
  static ServiceConfig from_env();
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  /// Throws EnvironmentError when the address cannot be bound.
  int start();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace psps
