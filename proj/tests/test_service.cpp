#include <filesystem>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"

#include "psps/case_io.hpp"
#include "psps/cli.hpp"
#include "psps/json_fwd.hpp"
#include "psps/service.hpp"

using namespace psps;
namespace fs = std::filesystem;

namespace {

const std::string kData = std::string(PSPS_SOURCE_DIR) + "/data/";

struct Reply {
  int status = 0;
  Json body;
  std::string raw;
};

Reply call(httplib::Client& c, const std::string& method, const std::string& path, const Json& body = nullptr) {
  httplib::Result r = method == "GET"      ? c.Get(path)
                      : method == "DELETE" ? c.Delete(path)
                                           : c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  Reply out{r->status, Json(), r->body};
  if (!r->body.empty() && r->get_header_value("Content-Type") == "application/json") out.body = Json::parse(r->body);
  return out;
}

Json wait_finished(httplib::Client& c, const std::string& id) {
  for (int i = 0; i < 3000; ++i) {
    const Reply r = call(c, "GET", "/api/jobs/" + id);
    REQUIRE(r.status == 200);
    const std::string state = r.body["state"];
    if (state == "done" || state == "failed" || state == "infeasible") return r.body;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  FAIL("job did not finish");
  return nullptr;
}

}  // namespace

TEST_CASE("service job lifecycle") {
  const fs::path dir = fs::temp_directory_path() / ("psps-service-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const fs::path assets = dir / "assets";
  fs::create_directories(assets);
  write_file_atomic((assets / "index.html").string(), "<html></html>");

  ServiceConfig config;
  config.data_dir = (dir / "store").string();
  config.port = 0;
  config.workers = 1;
  config.static_dir = assets.string();

  std::string case_id, job_id;
  {
    Service service(config);
    const int port = service.start();
    httplib::Client c("127.0.0.1", port);

    Reply r = call(c, "POST", "/api/cases", Json::parse(read_text_file(kData + "tri3.json")));
    REQUIRE(r.status == 201);
    case_id = r.body["id"];
    CHECK(r.body["lines"] == 3);
    CHECK(call(c, "POST", "/api/cases", Json::parse(read_text_file(kData + "tri3.json"))).body["id"] == case_id);
    CHECK(call(c, "GET", "/api/cases").body.size() == 1);
    CHECK(call(c, "GET", "/api/cases/" + case_id).body["network"]["buses"].size() == 3);
    CHECK(call(c, "GET", "/api/cases/ffff").status == 404);
    CHECK(call(c, "POST", "/api/cases", Json{{"buses", 1}}).status == 400);

    // schema and lookup errors
    Reply bad = call(c, "POST", "/api/jobs", {{"kind", "solve_scops"}, {"case_id", case_id}, {"params", {{"alpha", 1.5}}}});
    CHECK(bad.status == 400);
    CHECK(bad.body.contains("code"));
    CHECK(bad.body.contains("message"));
    CHECK(call(c, "POST", "/api/jobs", {{"kind", "solve_ops"}, {"case_id", case_id}, {"params", {{"beta", 0.1}}}})
              .status == 400);
    CHECK(call(c, "POST", "/api/jobs", {{"kind", "dance"}, {"case_id", case_id}}).status == 400);
    CHECK(call(c, "POST", "/api/jobs", {{"kind", "solve_ops"}, {"case_id", "nope"}}).status == 404);
    CHECK(call(c, "GET", "/api/jobs/nope").status == 404);
    CHECK(call(c, "GET", "/api/jobs/nope/result").status == 404);

    // a long sweep occupies the only worker so the next job stays queued
    Reply slow = call(c, "POST", "/api/jobs",
                      {{"kind", "sweep"}, {"case_id", case_id}, {"params", {{"alpha", "0:1:0.01"}, {"beta", "0:1:0.01"}}}});
    REQUIRE(slow.status == 202);
    Reply job = call(c, "POST", "/api/jobs",
                     {{"kind", "solve_scops"}, {"case_id", case_id}, {"params", {{"alpha", 1.0}, {"beta", 0.7}}}});
    REQUIRE(job.status == 202);
    job_id = job.body["id"];
    const std::string state = call(c, "GET", "/api/jobs/" + job_id).body["state"];
    CHECK((state == "queued" || state == "running"));
    CHECK(call(c, "GET", "/api/jobs/" + job_id + "/result").status == 409);

    CHECK(call(c, "DELETE", "/api/jobs/" + std::string(slow.body["id"])).status == 200);
    const Json cancelled = wait_finished(c, slow.body["id"]);
    CHECK(cancelled["state"] == "failed");
    CHECK(cancelled["error"]["code"] == "cancelled");

    const Json done = wait_finished(c, job_id);
    CHECK(done["state"] == "done");
    CHECK(done["progress"] == 1.0);
    const Reply result = call(c, "GET", "/api/jobs/" + job_id + "/result");
    REQUIRE(result.status == 200);
    CHECK(result.body["summary"]["active_risk"].get<double>() == doctest::Approx(1.1 / 1.2));

    // identical to the CLI document, byte for byte
    std::ostringstream out, err;
    const std::string cli_path = (dir / "cli.json").string();
    REQUIRE(run_cli({"solve", "--problem", "scops", "--case", kData + "tri3.json", "--alpha", "1", "--beta", "0.7",
                     "--out", cli_path},
                    out, err) == 0);
    CHECK(result.raw == read_text_file(cli_path));

    // cached resubmission
    const Reply again = call(c, "POST", "/api/jobs",
                             {{"kind", "solve_scops"}, {"case_id", case_id}, {"params", {{"beta", 0.7}}}});
    CHECK(again.body["cached"] == true);
    CHECK(again.body["state"] == "done");
    CHECK(call(c, "GET", "/api/jobs/" + std::string(again.body["id"]) + "/result").raw == result.raw);

    // infeasible models finish as infeasible, with a payload
    r = call(c, "POST", "/api/cases", Json::parse(read_text_file(kData + "tri3-smallgen.json")));
    const Json inf = call(c, "POST", "/api/jobs", {{"kind", "solve_ops"}, {"case_id", r.body["id"]}}).body;
    CHECK(wait_finished(c, inf["id"])["state"] == "infeasible");
    const Reply payload = call(c, "GET", "/api/jobs/" + std::string(inf["id"]) + "/result");
    CHECK(payload.status == 200);
    CHECK(payload.body["status"] == "infeasible");
    CHECK(payload.body.contains("message"));

    // evaluate and a small sweep
    const Json eval = call(c, "POST", "/api/jobs",
                           {{"kind", "evaluate"},
                            {"case_id", case_id},
                            {"params", {{"plan", result.body["plan"]}, {"pflex", 1.0}}}})
                          .body;
    CHECK(wait_finished(c, eval["id"])["state"] == "done");
    const Json evaluation = call(c, "GET", "/api/jobs/" + std::string(eval["id"]) + "/result").body;
    CHECK(evaluation["evaluation"]["worst_case"]["gamma"].get<double>() <= 0.7 + 1e-6);

    const Json sweep = call(c, "POST", "/api/jobs",
                            {{"kind", "sweep"},
                             {"case_id", case_id},
                             {"params", {{"alpha", {1.0}}, {"beta", {0.0, 0.7, 1.0}}, {"pflex", 1.0}}}})
                           .body;
    CHECK(wait_finished(c, sweep["id"])["state"] == "done");
    const Json grid = call(c, "GET", "/api/jobs/" + std::string(sweep["id"]) + "/result").body;
    CHECK(grid["cells"][0].size() == 3);
    CHECK(grid["cells"][0][1]["active_risk"].get<double>() == doctest::Approx(1.1 / 1.2));

    const auto page = c.Get("/index.html");
    REQUIRE(page);
    CHECK(page->status == 200);
    service.stop();
  }

  // results survive a restart
  {
    Service service(config);
    httplib::Client c("127.0.0.1", service.start());
    CHECK(call(c, "GET", "/api/cases").body.size() == 2);
    CHECK(call(c, "GET", "/api/jobs/" + job_id).body["state"] == "done");
    CHECK(call(c, "GET", "/api/jobs/" + job_id + "/result").status == 200);
  }
  fs::remove_all(dir);
}
