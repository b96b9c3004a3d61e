#include <seqoed/http.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <thread>

using namespace seqoed;
namespace fs = std::filesystem;

namespace {

std::string init_csv()
{
    return format_measurements(fixtures::stage("init"));
}

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("seqoed_service_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        service_ = std::make_unique<Service>(dir_);
    }

    void TearDown() override
    {
        service_.reset();
        fs::remove_all(dir_);
    }

    Response call(std::string method, std::string path, std::string body = {}, std::string type = "application/json",
                  std::map<std::string, std::string> query = {}, std::string if_match = {})
    {
        return service_->handle({std::move(method), std::move(path), std::move(body), std::move(type),
                                 std::move(query), std::move(if_match)});
    }

    json call_json(std::string method, std::string path, std::string body = {}, int expected = 200)
    {
        const Response r = call(std::move(method), std::move(path), std::move(body));
        EXPECT_EQ(r.status, expected) << r.body;
        return json::parse(r.body);
    }

    /// Create a campaign from the initial design with fewer multistarts to keep tests quick.
    void create(const std::string& id)
    {
        const json req = {{"id", id}, {"config", {{"multistarts", 4}}}, {"initial_csv", init_csv()}};
        call_json("POST", "/campaigns", req.dump(), 201);
    }

    std::string hash(const std::string& id) { return call_json("GET", "/campaigns/" + id)["state_hash"]; }

    fs::path dir_;
    std::unique_ptr<Service> service_;
};

} // namespace

TEST_F(ServiceTest, Health)
{
    EXPECT_EQ(call_json("GET", "/health")["status"], "ok");
}

TEST_F(ServiceTest, CreateAndGet)
{
    create("c1");
    const json st = call_json("GET", "/campaigns/c1");
    EXPECT_EQ(st["state"]["status"], "ready_to_propose");
    EXPECT_EQ(st["state"]["records"].size(), 6u);
    EXPECT_EQ(st["config"]["multistarts"], 4);
    EXPECT_EQ(call_json("GET", "/campaigns")["campaigns"], json::array({"c1"}));
    EXPECT_EQ(call("POST", "/campaigns", json{{"id", "c1"}, {"initial_csv", init_csv()}}.dump()).status, 409);
}

TEST_F(ServiceTest, NotFoundAndBadRequests)
{
    EXPECT_EQ(call("GET", "/campaigns/nope").status, 404);
    EXPECT_EQ(call("GET", "/jobs/job-99").status, 404);
    EXPECT_EQ(call("DELETE", "/campaigns").status, 404);
    EXPECT_EQ(call("GET", "/campaigns/..%2Fetc").status, 400);
    EXPECT_EQ(call("POST", "/campaigns", "{").status, 400);
    EXPECT_EQ(call("POST", "/campaigns", json{{"id", "x"}}.dump()).status, 400);
    EXPECT_EQ(call("POST", "/campaigns", json{{"id", "x"}, {"initial_design", {{1.5, 1e5}}}}.dump()).status, 400);
    EXPECT_EQ(call("POST", "/campaigns", "garbage", "text/csv", {{"id", "x"}}).status, 400);
    const Response r = call("POST", "/campaigns", json{{"id", "x"}, {"config", {{"max_batch", 0}}},
                                                       {"initial_csv", init_csv()}}
                                                      .dump());
    EXPECT_EQ(r.status, 400);
    EXPECT_NE(json::parse(r.body)["error"].get<std::string>().find("max_batch"), std::string::npos);
}

TEST_F(ServiceTest, CsvCreateAndExport)
{
    const Response r = call("POST", "/campaigns", init_csv(), "text/csv", {{"id", "fromcsv"}});
    ASSERT_EQ(r.status, 201) << r.body;
    const Response e = call("GET", "/campaigns/fromcsv/measurements.csv");
    EXPECT_EQ(e.status, 200);
    EXPECT_EQ(e.content_type, "text/csv");
    const auto exported = parse_measurements(e.body);
    const auto original = fixtures::stage("init");
    ASSERT_EQ(exported.size(), original.size());
    for (std::size_t i = 0; i < exported.size(); ++i)
        EXPECT_EQ(exported[i].values(), original[i].values());
}

TEST_F(ServiceTest, ProposeRecordCycle)
{
    create("c2");
    const std::string h0 = hash("c2");

    // Measurements are rejected while the campaign is ready to propose.
    EXPECT_EQ(call("POST", "/campaigns/c2/measurements", "[]").status, 409);

    const json job = call_json("POST", "/campaigns/c2/propose", "", 202);
    EXPECT_EQ(job["state_hash"], h0);
    service_->wait_idle();
    const json done = call_json("GET", "/jobs/" + job["job_id"].get<std::string>());
    ASSERT_EQ(done["status"], "succeeded") << done.dump();
    const json batch = done["result"]["batch"];
    ASSERT_GE(batch.size(), 1u);
    ASSERT_LE(batch.size(), 3u);
    EXPECT_GE(done["result"]["report"]["min_sensitivity"].get<double>(), -5e-5);

    const json st = call_json("GET", "/campaigns/c2");
    EXPECT_EQ(st["state"]["status"], "awaiting_measurements");
    EXPECT_EQ(call("POST", "/campaigns/c2/propose").status, 409);

    // Out-of-range vapor fraction is refused and leaves the state alone.
    const std::string h1 = hash("c2");
    json bad = json::array();
    for (const auto& b : batch)
        bad.push_back({{"l", b["l"]}, {"P", b["P"]}, {"v", 1.2}, {"T", 380.0}});
    EXPECT_EQ(call("POST", "/campaigns/c2/measurements", bad.dump()).status, 400);
    EXPECT_EQ(hash("c2"), h1);

    // Wrong count.
    EXPECT_EQ(call("POST", "/campaigns/c2/measurements", json::array().dump()).status, 400);

    // Stale If-Match.
    json good = json::array();
    for (const auto& b : batch) {
        const auto y = vle::bubble_point({b["l"].get<double>(), b["P"].get<double>()}, vle::theta_tot());
        good.push_back({{"v", y.v}, {"T", y.T}});
    }
    EXPECT_EQ(call("POST", "/campaigns/c2/measurements", good.dump(), "application/json", {}, h0).status, 409);
    EXPECT_EQ(hash("c2"), h1);

    const Response ok = call("POST", "/campaigns/c2/measurements", good.dump(), "application/json", {}, h1);
    ASSERT_EQ(ok.status, 200) << ok.body;
    const json after = json::parse(ok.body);
    EXPECT_EQ(after["state"]["status"], "ready_to_propose");
    EXPECT_EQ(after["state"]["records"].size(), 6u + batch.size());
    // Planned inputs default to the proposal when l and P are omitted.
    EXPECT_EQ(after["state"]["records"][6]["actual"][0], batch[0]["l"]);
}

TEST_F(ServiceTest, MetricsAndCurves)
{
    create("c3");
    EXPECT_EQ(call("GET", "/campaigns/c3/curves").status, 409); // no estimate yet
    const json m = call_json("GET", "/campaigns/c3/metrics", "");
    EXPECT_TRUE(m.contains("sigma_lin"));
    const Response bad = call("GET", "/campaigns/c3/metrics", "", "", {{"normalization", "weird"}});
    EXPECT_EQ(bad.status, 400);

    const Response job = call("GET", "/campaigns/c3/metrics", "", "",
                              {{"sampling", "1"}, {"n_sam", "4"}, {"grid_l", "5"}, {"grid_P", "2"}});
    ASSERT_EQ(job.status, 202) << job.body;
    const Response again = call("GET", "/campaigns/c3/metrics", "", "",
                                {{"sampling", "1"}, {"n_sam", "4"}, {"grid_l", "5"}, {"grid_P", "2"}});
    EXPECT_EQ(json::parse(again.body)["job_id"], json::parse(job.body)["job_id"]); // cached
    service_->wait_idle();
    const json done = call_json("GET", "/jobs/" + json::parse(job.body)["job_id"].get<std::string>());
    ASSERT_EQ(done["status"], "succeeded") << done.dump();
    EXPECT_TRUE(done["result"].contains("sigma_sam"));
}

TEST_F(ServiceTest, PredictionCurves)
{
    const Response r = call("GET", "/prediction-curves", "", "", {{"pressures", "100000"}, {"points", "11"}});
    ASSERT_EQ(r.status, 200) << r.body;
    const json j = json::parse(r.body);
    ASSERT_EQ(j["curves"].size(), 1u);
    const auto T = j["curves"][0]["T"].get<std::vector<double>>();
    ASSERT_EQ(T.size(), 11u);
    EXPECT_NEAR(T.back(), 369.78, 0.01);
    EXPECT_EQ(call("GET", "/prediction-curves", "", "", {{"pressures", "-1"}}).status, 400);
    EXPECT_EQ(call("GET", "/prediction-curves", "", "", {{"theta", "1,2"}}).status, 400);
}

TEST_F(ServiceTest, RejectedCallsNeverChangeState)
{
    // Random call sequences: every 4xx answer leaves the stored state untouched.
    create("p");
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> pick(0, 6);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    int accepted = 0, rejected = 0;
    for (int step = 0; step < 30; ++step) {
        const std::string before = hash("p");
        const json st = call_json("GET", "/campaigns/p");
        const auto pending = st["state"]["pending"];
        Response r;
        switch (pick(rng)) {
        case 0:
        case 1:
            r = call("POST", "/campaigns/p/propose");
            service_->wait_idle();
            break;
        case 2: {
            json m = json::array();
            for (const auto& p : pending) {
                const auto y = vle::bubble_point({p[0].get<double>(), p[1].get<double>()}, vle::theta_tot());
                m.push_back({{"v", y.v}, {"T", y.T}});
            }
            r = call("POST", "/campaigns/p/measurements", m.dump());
            break;
        }
        case 3: {
            json m = json::array();
            for (std::size_t i = 0; i < pending.size(); ++i)
                m.push_back({{"v", u(rng)}, {"T", 380.0}, {"l", u(rng)}});
            r = call("POST", "/campaigns/p/measurements", m.dump());
            break;
        }
        case 4:
            r = call("POST", "/campaigns/p/measurements", "not json");
            break;
        case 5:
            r = call("POST", "/campaigns/p/propose", "", "application/json", {}, "0000000000000000");
            break;
        default:
            r = call("POST", "/campaigns/p/measurements", "[]", "application/json", {}, before);
            break;
        }
        EXPECT_NE(r.status, 500) << r.body;
        if (r.status >= 400) {
            ++rejected;
            EXPECT_EQ(hash("p"), before) << "step " << step << ": " << r.body;
        } else {
            ++accepted;
        }
        if (is_terminal(status_from_string(call_json("GET", "/campaigns/p")["state"]["status"].get<std::string>())))
            break;
    }
    EXPECT_GT(accepted, 0);
    EXPECT_GT(rejected, 0);
}

TEST_F(ServiceTest, HttpServerSmoke)
{
    httplib::Server server;
    bind_routes(server, *service_);
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto health = client.Get("/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

    auto created = client.Post("/campaigns?id=web", init_csv(), "text/csv");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    const std::string etag = created->get_header_value("ETag");
    EXPECT_EQ(etag.size(), 18u);

    auto missing = client.Get("/campaigns/none");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);

    httplib::Headers stale{{"If-Match", "\"0000000000000000\""}};
    auto conflict = client.Post("/campaigns/web/propose", stale, "", "application/json");
    ASSERT_TRUE(conflict);
    EXPECT_EQ(conflict->status, 409);

    auto curves = client.Get("/prediction-curves?pressures=100000,300000&points=5");
    ASSERT_TRUE(curves);
    EXPECT_EQ(json::parse(curves->body)["curves"].size(), 2u);

    server.stop();
    t.join();
}
