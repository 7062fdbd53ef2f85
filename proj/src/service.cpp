#include "psps/service.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "httplib.h"
#include "psps/case_io.hpp"
#include "psps/engine.hpp"
#include "psps/error.hpp"
#include "psps/reports.hpp"

namespace fs = std::filesystem;

namespace psps {

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw EnvironmentError("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

double unix_now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// Lenient number checks for JSON job parameters.
double unit_param(const Json& params, const char* key, double fallback) {
  if (!params.contains(key) || params[key].is_null()) return fallback;
  const Json& v = params[key];
  if (!v.is_number()) throw SchemaError(std::string(key) + " must be a number");
  const double x = v.get<double>();
  if (!(x >= 0.0 && x <= 1.0)) throw SchemaError(std::string(key) + " must lie in [0, 1]");
  return x;
}

std::optional<double> optional_unit_param(const Json& params, const char* key) {
  if (!params.contains(key) || params[key].is_null()) return std::nullopt;
  return unit_param(params, key, 0.0);
}

std::vector<double> grid_param(const Json& params, const char* key) {
  if (!params.contains(key)) throw SchemaError(std::string(key) + " grid is required");
  const Json& v = params[key];
  std::vector<double> grid;
  if (v.is_string()) {
    grid = parse_range(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) throw SchemaError(std::string(key) + " grid must hold numbers");
      grid.push_back(e.get<double>());
    }
  } else if (v.is_number()) {
    grid.push_back(v.get<double>());
  } else {
    throw SchemaError(std::string(key) + " grid must be a list, a number or a start:stop:step string");
  }
  if (grid.empty()) throw SchemaError(std::string(key) + " grid is empty");
  for (double x : grid) {
    if (!(x >= 0.0 && x <= 1.0)) throw SchemaError(std::string(key) + " grid value outside [0, 1]");
  }
  return grid;
}

ContingencyChoice contingency_param(const Json& params) {
  ContingencyChoice c;
  if (!params.contains("contingencies") || params["contingencies"].is_null()) return c;
  const Json& v = params["contingencies"];
  if (v.is_string()) {
    if (v.get<std::string>() != "non-bridge") throw SchemaError("contingencies must be \"non-bridge\" or a list");
    return c;
  }
  c.policy = "explicit";
  c.scenarios = contingencies_from_json(v);
  return c;
}

void reject_unknown(const Json& params, std::initializer_list<const char*> allowed) {
  for (auto it = params.begin(); it != params.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) known = known || it.key() == a;
    if (!known) throw SchemaError("unknown parameter '" + it.key() + "'");
  }
}

struct CaseEntry {
  std::string id;
  std::string name;
  Network network;
  Json meta;
};

struct Job {
  std::string id;
  std::string kind;
  std::string case_id;
  Json params;        // normalized
  std::string result_key;
  std::string state = "queued";
  double progress = 0.0;
  bool cached = false;
  bool cancel_requested = false;
  std::optional<Json> error;
  double submitted_at = 0.0;
  std::optional<double> started_at;
  std::optional<double> finished_at;

  // prepared request
  SolveSpec solve;
  EvaluateSpec evaluate;
  ShutoffPlan plan;
  SweepSpec sweep;

  bool finished() const { return state == "done" || state == "failed" || state == "infeasible"; }

  Json to_json() const {
    Json j = {{"id", id},
              {"kind", kind},
              {"case_id", case_id},
              {"params", params},
              {"state", state},
              {"progress", progress},
              {"cached", cached},
              {"result_ref", finished() && state != "failed" ? Json("/api/jobs/" + id + "/result") : Json()},
              {"error", error ? *error : Json()},
              {"timings",
               {{"submitted_at", submitted_at},
                {"started_at", started_at ? Json(*started_at) : Json()},
                {"finished_at", finished_at ? Json(*finished_at) : Json()}}}};
    return j;
  }
};

struct Cancelled {};

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  if (const char* v = std::getenv("PSPS_DATA_DIR"); v && *v) c.data_dir = v;
  try {
    if (const char* v = std::getenv("PSPS_PORT"); v && *v) c.port = std::stoi(v);
    if (const char* v = std::getenv("PSPS_WORKERS"); v && *v) c.workers = std::max(1, std::stoi(v));
  } catch (const std::exception&) {
    throw InputError("PSPS_PORT and PSPS_WORKERS must be integers");
  }
  return c;
}

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread listener;
  std::vector<std::thread> workers;

  std::mutex mutex;
  std::condition_variable wake;
  std::condition_variable stopped_cv;
  bool stopping = false;
  bool stopped = false;
  std::deque<std::string> queue;
  std::map<std::string, CaseEntry> cases;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::mt19937_64 id_rng{std::random_device{}()};

  explicit Impl(ServiceConfig c) : config(std::move(c)) {}

  fs::path dir(const char* sub) const { return fs::path(config.data_dir) / sub; }

  // ---- persistence ----

  void load_store() {
    for (const char* sub : {"cases", "results", "jobs"}) fs::create_directories(dir(sub));
    for (const auto& entry : fs::directory_iterator(dir("cases"))) {
      if (entry.path().extension() != ".json" || entry.path().stem().extension() == ".meta") continue;
      const std::string id = entry.path().stem().string();
      try {
        const Json meta = Json::parse(read_text_file((dir("cases") / (id + ".meta.json")).string()));
        CaseEntry c{id, meta.value("name", id),
                    network_from_json(Json::parse(read_text_file(entry.path().string()))), meta};
        cases.emplace(id, std::move(c));
      } catch (const std::exception&) {
        continue;  // skip unreadable entries
      }
    }
    for (const auto& entry : fs::directory_iterator(dir("jobs"))) {
      if (entry.path().extension() != ".json") continue;
      try {
        const Json j = Json::parse(read_text_file(entry.path().string()));
        auto job = std::make_shared<Job>();
        job->id = j.at("id").get<std::string>();
        job->kind = j.at("kind").get<std::string>();
        job->case_id = j.at("case_id").get<std::string>();
        job->params = j.at("params");
        job->result_key = j.value("result_key", "");
        job->state = j.at("state").get<std::string>();
        job->progress = 1.0;
        job->cached = j.value("cached", false);
        if (!j["error"].is_null()) job->error = j["error"];
        job->submitted_at = j["timings"].value("submitted_at", 0.0);
        if (j["timings"]["started_at"].is_number()) job->started_at = j["timings"]["started_at"].get<double>();
        if (j["timings"]["finished_at"].is_number()) job->finished_at = j["timings"]["finished_at"].get<double>();
        if (job->finished()) jobs.emplace(job->id, job);
      } catch (const std::exception&) {
      }
    }
  }

  void persist_job(const Job& job) {
    Json j = job.to_json();
    j["result_key"] = job.result_key;
    write_file_atomic((dir("jobs") / (job.id + ".json")).string(), j.dump());
  }

  fs::path result_path(const std::string& key) const { return dir("results") / (key + ".json"); }

  // ---- cases ----

  Json add_case(const Json& body) {
    Json doc = body;
    std::string name;
    if (body.is_object() && body.contains("network")) {
      doc = body["network"];
      if (body.contains("name")) {
        if (!body["name"].is_string()) throw SchemaError("name must be a string");
        name = body["name"].get<std::string>();
      }
    }
    const Network net = network_from_json(doc);
    const std::string canonical = network_to_json(net).dump();
    const std::string id = sha256_hex(canonical).substr(0, 16);
    std::lock_guard lock(mutex);
    if (auto it = cases.find(id); it != cases.end()) return it->second.meta;
    if (name.empty()) name = id;
    Json meta = {{"id", id},
                 {"name", name},
                 {"buses", net.buses.size()},
                 {"lines", net.lines.size()},
                 {"generators", net.generators.size()},
                 {"loads", net.loads.size()},
                 {"total_demand", total_demand(net)}};
    write_file_atomic((dir("cases") / (id + ".json")).string(), canonical);
    write_file_atomic((dir("cases") / (id + ".meta.json")).string(), meta.dump());
    cases.emplace(id, CaseEntry{id, name, net, meta});
    return meta;
  }

  // ---- jobs ----

  std::string new_job_id() {
    static const char* hex = "0123456789abcdef";
    std::string id;
    std::uint64_t bits = id_rng();
    for (int i = 0; i < 16; ++i, bits >>= 4) id += hex[bits & 15];
    return id;
  }

  // Validates the request and fills the prepared specs; throws SchemaError
  // and InputError for 400 responses.
  void prepare(Job& job, const Network& net, const Json& params) {
    if (!params.is_object()) throw SchemaError("params must be an object");
    SolverOptions options = config.options;
    if (params.contains("time_limit") && !params["time_limit"].is_null()) {
      if (!params["time_limit"].is_number() || !(params["time_limit"].get<double>() > 0.0)) {
        throw SchemaError("time_limit must be a positive number");
      }
      options.time_limit = params["time_limit"].get<double>();
    }
    if (params.contains("scenario_generation") && !params["scenario_generation"].is_null()) {
      if (!params["scenario_generation"].is_boolean()) throw SchemaError("scenario_generation must be a boolean");
      options.scenario_generation = params["scenario_generation"].get<bool>();
    }
    const ContingencyChoice choice = contingency_param(params);
    const ContingencySet resolved = choice.resolve(net);
    const std::optional<double> flex = optional_unit_param(params, "pflex");
    Json normalized = {{"pflex", flex ? Json(*flex) : Json()},
                       {"contingencies", choice.policy == "non-bridge"
                                             ? Json("non-bridge")
                                             : contingencies_to_json(resolved)},
                       {"time_limit", options.time_limit ? Json(*options.time_limit) : Json()}};

    if (job.kind == "solve_ops" || job.kind == "solve_scops") {
      const bool scops = job.kind == "solve_scops";
      if (scops) {
        reject_unknown(params, {"alpha", "beta", "pflex", "contingencies", "time_limit", "scenario_generation"});
      } else {
        reject_unknown(params, {"alpha", "pflex", "contingencies", "time_limit"});
      }
      job.solve.problem = scops ? Problem::Scops : Problem::Ops;
      job.solve.params.alpha = unit_param(params, "alpha", 1.0);
      job.solve.params.beta = scops ? unit_param(params, "beta", 0.0) : 0.0;
      job.solve.params.flex_override = flex;
      job.solve.contingencies = choice;
      job.solve.options = options;
      job.solve.threads = config.threads;
      normalized["alpha"] = job.solve.params.alpha;
      if (scops) normalized["beta"] = job.solve.params.beta;
    } else if (job.kind == "evaluate") {
      reject_unknown(params, {"plan", "pflex", "contingencies", "time_limit"});
      if (!params.contains("plan")) throw SchemaError("evaluate needs a plan");
      job.plan = plan_from_json(params["plan"], net);
      job.evaluate.contingencies = choice;
      job.evaluate.flex = flex;
      job.evaluate.options = options;
      job.evaluate.threads = config.threads;
      normalized["plan"] = plan_to_json(net, job.plan);
    } else if (job.kind == "sweep") {
      reject_unknown(params, {"alpha", "beta", "pflex", "contingencies", "time_limit", "scenario_generation"});
      job.sweep.alpha_grid = grid_param(params, "alpha");
      job.sweep.beta_grid = grid_param(params, "beta");
      job.sweep.flex = flex;
      job.sweep.contingencies = choice;
      job.sweep.options = options;
      job.sweep.threads = config.threads;
      normalized["alpha"] = job.sweep.alpha_grid;
      normalized["beta"] = job.sweep.beta_grid;
    } else {
      throw SchemaError("unknown job kind '" + job.kind + "'");
    }
    job.params = normalized;
    const Json key = {{"kind", job.kind},
                      {"case", job.case_id},
                      {"params", normalized},
                      {"solver",
                       {{"backend", options.backend == SolverOptions::Backend::Internal ? "internal" : "external"},
                        {"command", options.external_command},
                        {"mip_rel_gap", options.mip_rel_gap},
                        {"seed", options.seed},
                        {"scenario_generation", options.scenario_generation}}}};
    job.result_key = sha256_hex(key.dump());
  }

  static std::string state_for(const Json& result) {
    return result.value("status", "") == "infeasible" ? "infeasible" : "done";
  }

  Json submit(const Json& body) {
    if (!body.is_object()) throw HttpError{400, "invalid_request", "body must be a JSON object"};
    if (!body.contains("kind") || !body["kind"].is_string()) {
      throw HttpError{400, "invalid_request", "kind is required"};
    }
    if (!body.contains("case_id") || !body["case_id"].is_string()) {
      throw HttpError{400, "invalid_request", "case_id is required"};
    }
    auto job = std::make_shared<Job>();
    job->kind = body["kind"].get<std::string>();
    job->case_id = body["case_id"].get<std::string>();
    Network net;
    {
      std::lock_guard lock(mutex);
      const auto it = cases.find(job->case_id);
      if (it == cases.end()) throw HttpError{404, "not_found", "unknown case '" + job->case_id + "'"};
      net = it->second.network;
    }
    try {
      prepare(*job, net, body.value("params", Json::object()));
    } catch (const InputError& e) {
      throw HttpError{400, "invalid_params", e.what()};
    }
    std::lock_guard lock(mutex);
    job->id = new_job_id();
    job->submitted_at = unix_now();
    const fs::path cached = result_path(job->result_key);
    if (fs::exists(cached)) {
      job->cached = true;
      job->state = state_for(Json::parse(read_text_file(cached.string())));
      job->progress = 1.0;
      job->started_at = job->finished_at = job->submitted_at;
      persist_job(*job);
    } else {
      queue.push_back(job->id);
      wake.notify_one();
    }
    jobs.emplace(job->id, job);
    return job->to_json();
  }

  Json run_job(Job& job, const Network& net) {
    if (job.kind == "evaluate") return evaluate_document(net, job.plan, job.evaluate);
    if (job.kind == "sweep") {
      return sweep_document(net, job.sweep, [this, &job](std::size_t done, std::size_t total) {
        std::lock_guard lock(mutex);
        if (job.cancel_requested) throw Cancelled{};
        job.progress = static_cast<double>(done) / static_cast<double>(total);
      });
    }
    return solve_document(net, job.solve);
  }

  void worker_loop() {
    for (;;) {
      std::shared_ptr<Job> job;
      Network net;
      {
        std::unique_lock lock(mutex);
        wake.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = jobs.at(queue.front());
        queue.pop_front();
        if (job->finished()) continue;  // cancelled while queued
        job->state = "running";
        job->started_at = unix_now();
        net = cases.at(job->case_id).network;
      }
      std::optional<Json> result;
      std::optional<Json> error;
      try {
        result = run_job(*job, net);
      } catch (const Cancelled&) {
      } catch (const InputError& e) {
        error = Json{{"code", "invalid_input"}, {"message", e.what()}};
      } catch (const std::exception& e) {
        error = Json{{"code", "internal_error"}, {"message", e.what()}};
      }
      std::lock_guard lock(mutex);
      job->finished_at = unix_now();
      job->progress = 1.0;
      if (job->cancel_requested) {
        job->state = "failed";
        job->error = Json{{"code", "cancelled"}, {"message", "job was cancelled"}};
      } else if (error) {
        job->state = "failed";
        job->error = error;
      } else {
        job->state = state_for(*result);
        // results cut off by a limit are not reused
        const std::string status = result->value("status", "");
        const bool decided = status != "time_limit" && status != "node_limit";
        const fs::path path = decided ? result_path(job->result_key)
                                      : dir("results") / (job->id + ".json");
        if (!decided) job->result_key = job->id;
        write_file_atomic(path.string(), result->dump(2) + "\n");
      }
      persist_job(*job);
    }
  }

  std::shared_ptr<Job> find_job(const std::string& id) {
    const auto it = jobs.find(id);
    if (it == jobs.end()) throw HttpError{404, "not_found", "unknown job '" + id + "'"};
    return it->second;
  }

  Json cancel(const std::string& id) {
    std::lock_guard lock(mutex);
    auto job = find_job(id);
    if (job->state == "queued") {
      job->state = "failed";
      job->progress = 1.0;
      job->finished_at = unix_now();
      job->error = Json{{"code", "cancelled"}, {"message", "job was cancelled"}};
      persist_job(*job);
    } else if (job->state == "running") {
      job->cancel_requested = true;
    }
    return job->to_json();
  }

  // ---- HTTP ----

  static void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, const HttpError& e) {
    send_json(res, e.status, {{"code", e.code}, {"message", e.message}});
  }

  template <typename F>
  static httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_error(res, e);
      } catch (const Json::parse_error& e) {
        send_error(res, {400, "invalid_json", e.what()});
      } catch (const InputError& e) {
        send_error(res, {400, "invalid_request", e.what()});
      } catch (const std::exception& e) {
        send_error(res, {500, "internal_error", e.what()});
      }
    };
  }

  void routes() {
    server.Post("/api/cases", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const Json meta = add_case(Json::parse(req.body));
      send_json(res, 201, meta);
    }));
    server.Get("/api/cases", wrap([this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      std::lock_guard lock(mutex);
      for (const auto& [id, c] : cases) list.push_back(c.meta);
      send_json(res, 200, list);
    }));
    server.Get(R"(/api/cases/([A-Za-z0-9]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      const auto it = cases.find(req.matches[1]);
      if (it == cases.end()) throw HttpError{404, "not_found", "unknown case '" + std::string(req.matches[1]) + "'"};
      Json body = it->second.meta;
      body["network"] = network_to_json(it->second.network);
      send_json(res, 200, body);
    }));
    server.Post("/api/jobs", wrap([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 202, submit(Json::parse(req.body)));
    }));
    server.Get(R"(/api/jobs)", wrap([this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      std::lock_guard lock(mutex);
      for (const auto& [id, job] : jobs) list.push_back(job->to_json());
      send_json(res, 200, list);
    }));
    server.Get(R"(/api/jobs/([A-Za-z0-9]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      send_json(res, 200, find_job(req.matches[1])->to_json());
    }));
    server.Get(R"(/api/jobs/([A-Za-z0-9]+)/result)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 std::string path;
                 {
                   std::lock_guard lock(mutex);
                   auto job = find_job(req.matches[1]);
                   if (job->state == "failed") {
                     throw HttpError{409, "job_failed",
                                     job->error ? job->error->value("message", "job failed") : "job failed"};
                   }
                   if (!job->finished()) throw HttpError{409, "not_ready", "job is " + job->state};
                   if (!safe_id(job->result_key)) throw HttpError{500, "internal_error", "bad result key"};
                   path = result_path(job->result_key).string();
                 }
                 res.status = 200;
                 res.set_content(read_text_file(path), "application/json");
               }));
    server.Delete(R"(/api/jobs/([A-Za-z0-9]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, cancel(req.matches[1]));
    }));
    if (!config.static_dir.empty()) {
      if (!server.set_mount_point("/", config.static_dir)) {
        throw EnvironmentError("static directory '" + config.static_dir + "' does not exist");
      }
    }
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

int Service::start() {
  Impl& s = *impl_;
  s.load_store();
  s.routes();
  int port = s.config.port;
  if (port == 0) {
    port = s.server.bind_to_any_port(s.config.host);
    if (port < 0) throw EnvironmentError("cannot bind " + s.config.host);
  } else if (!s.server.bind_to_port(s.config.host, port)) {
    throw EnvironmentError("cannot bind " + s.config.host + ":" + std::to_string(port));
  }
  for (int i = 0; i < std::max(1, s.config.workers); ++i) s.workers.emplace_back([&s] { s.worker_loop(); });
  s.listener = std::thread([&s] { s.server.listen_after_bind(); });
  s.server.wait_until_ready();
  return port;
}

void Service::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [&] { return impl_->stopped; });
}

void Service::stop() {
  if (!impl_) return;
  Impl& s = *impl_;
  {
    std::lock_guard lock(s.mutex);
    if (s.stopped) return;
    s.stopping = true;
  }
  s.wake.notify_all();
  s.server.stop();
  if (s.listener.joinable()) s.listener.join();
  for (auto& w : s.workers) {
    if (w.joinable()) w.join();
  }
  std::lock_guard lock(s.mutex);
  s.stopped = true;
  s.stopped_cv.notify_all();
}

}  // namespace psps
