#pragma once

// Campaign service: routing, persistence, per-campaign serialization and
// background jobs. Transport-independent; see http.hpp for the HTTP binding.

#include "campaign.hpp"
#include "io.hpp"
#include "report.hpp"
#include "vle.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

namespace seqoed {

struct Request {
    std::string method;
    std::string path;
    std::string body;
    std::string content_type;
    std::map<std::string, std::string> query;
    std::string if_match; // optional state hash for optimistic locking
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::string etag;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

/// FNV-1a over the serialized state, as 16 hex digits.
inline std::string state_hash(const CampaignState& s)
{
    const std::string text = to_json(s).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Directory used by the service when none is given: $SEQOED_DATA_DIR or ./campaigns.
inline std::filesystem::path default_data_dir()
{
    const char* env = std::getenv("SEQOED_DATA_DIR");
    return env && *env ? std::filesystem::path(env) : std::filesystem::path("campaigns");
}

/// Physical bounds of the binary VLE: fractions in [0, 1], positive P and T.
inline void check_vle_measurements(const std::vector<Measurement>& m)
{
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& x = m[i].actual;
        const auto& y = m[i].y;
        const std::string at = " in measurement " + std::to_string(i);
        if (x.size() != 2 || y.size() != 2)
            throw DomainError("expected (l, P) and (v, T)" + at);
        if (!(x[0] >= 0.0 && x[0] <= 1.0))
            throw DomainError("liquid fraction l outside [0, 1]" + at);
        if (!(y[0] >= 0.0 && y[0] <= 1.0))
            throw DomainError("vapor fraction v outside [0, 1]" + at);
        if (!(x[1] > 0.0))
            throw DomainError("pressure must be positive" + at);
        if (!(y[1] > 0.0))
            throw DomainError("temperature must be positive" + at);
    }
}

class Service {
public:
    enum class JobStatus { queued, running, succeeded, failed };

    struct Job {
        std::string id;
        std::string kind;
        std::string campaign;
        JobStatus status = JobStatus::queued;
        json result;
        std::string error;
    };

    explicit Service(std::filesystem::path data_dir = default_data_dir(), int workers = 1)
        : dir_(std::move(data_dir))
    {
        std::filesystem::create_directories(dir_);
        for (int i = 0; i < std::max(1, workers); ++i)
            workers_.emplace_back([this] { work(); });
    }

    ~Service()
    {
        {
            std::lock_guard lock(queue_mutex_);
            stopping_ = true;
        }
        queue_cv_.notify_all();
        for (auto& t : workers_)
            t.join();
    }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    const std::filesystem::path& data_dir() const { return dir_; }

    /// Block until no job is queued or running.
    void wait_idle()
    {
        std::unique_lock lock(queue_mutex_);
        idle_cv_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
    }

    Response handle(const Request& req)
    {
        try {
            return route(req);
        } catch (const NotFoundError& e) {
            return error(404, e.what());
        } catch (const ConflictError& e) {
            return error(409, e.what());
        } catch (const StateError& e) {
            return error(409, e.what());
        } catch (const ParseError& e) {
            return error(400, e.what());
        } catch (const DomainError& e) {
            return error(400, e.what());
        } catch (const json::exception& e) {
            return error(400, std::string("invalid JSON: ") + e.what());
        } catch (const std::exception& e) {
            return internal_error(e.what());
        }
    }

    static std::string to_string(JobStatus s)
    {
        switch (s) {
        case JobStatus::queued:
            return "queued";
        case JobStatus::running:
            return "running";
        case JobStatus::succeeded:
            return "succeeded";
        case JobStatus::failed:
            return "failed";
        }
        return "failed";
    }

private:
    struct Slot {
        std::mutex mutex;
        bool busy = false; // a state-changing job is queued or running
    };

    std::filesystem::path dir_;
    vle::VleModel model_;

    std::mutex slots_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;

    std::mutex jobs_mutex_;
    std::map<std::string, Job> jobs_;
    std::map<std::string, std::string> job_cache_; // request key -> job id
    std::uint64_t next_job_ = 1;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable idle_cv_;
    std::deque<std::function<void()>> queue_;
    int active_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> workers_;

    std::atomic<std::uint64_t> next_diag_{1};
    std::atomic<std::uint64_t> next_campaign_{1};

    static Response json_response(int status, const json& body, std::string etag = {})
    {
        return {status, body.dump(2) + "\n", "application/json", std::move(etag)};
    }

    static Response error(int status, const std::string& message)
    {
        return json_response(status, {{"error", message}, {"status", status}});
    }

    Response internal_error(const std::string& message)
    {
        char id[32];
        std::snprintf(id, sizeof id, "diag-%06llu", static_cast<unsigned long long>(next_diag_++));
        std::cerr << "[" << id << "] " << message << "\n";
        return json_response(500, {{"error", message}, {"status", 500}, {"diagnostic_id", id}});
    }

    static std::vector<std::string> split_path(const std::string& path)
    {
        std::vector<std::string> out;
        std::string cur;
        for (char c : path) {
            if (c == '/') {
                if (!cur.empty())
                    out.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty())
            out.push_back(cur);
        return out;
    }

    static void check_id(const std::string& id)
    {
        static const std::regex valid("[A-Za-z0-9_-]{1,64}");
        if (!std::regex_match(id, valid))
            throw DomainError("campaign id must match [A-Za-z0-9_-]{1,64}");
    }

    static std::string query(const Request& r, const std::string& key, std::string fallback = {})
    {
        const auto it = r.query.find(key);
        return it == r.query.end() ? fallback : it->second;
    }

    static double query_double(const Request& r, const std::string& key, double fallback)
    {
        const auto s = query(r, key);
        if (s.empty())
            return fallback;
        return detail::parse_number(s, 0, 0);
    }

    static bool query_flag(const Request& r, const std::string& key)
    {
        const auto s = query(r, key);
        return s == "1" || s == "true" || s == "yes";
    }

    static std::vector<double> query_list(const Request& r, const std::string& key)
    {
        std::vector<double> out;
        const auto s = query(r, key);
        if (s.empty())
            return out;
        for (const auto& cell : detail::split_csv_line(s))
            out.push_back(detail::parse_number(cell, 0, 0));
        return out;
    }

    std::filesystem::path file_of(const std::string& id) const { return dir_ / (id + ".json"); }

    std::shared_ptr<Slot> slot(const std::string& id)
    {
        std::lock_guard lock(slots_mutex_);
        auto& s = slots_[id];
        if (!s)
            s = std::make_shared<Slot>();
        return s;
    }

    CampaignDocument load(const std::string& id) const
    {
        check_id(id);
        const auto path = file_of(id);
        if (!std::filesystem::exists(path))
            throw NotFoundError("unknown campaign '" + id + "'");
        return load_campaign(path);
    }

    void save(const CampaignDocument& d) const { save_campaign(file_of(d.state.id), d); }

    static Response state_response(int status, const CampaignDocument& d)
    {
        const std::string h = state_hash(d.state);
        json body = to_json(d);
        body["state_hash"] = h;
        return json_response(status, body, h);
    }

    static void check_if_match(const Request& req, const CampaignDocument& d)
    {
        if (!req.if_match.empty() && req.if_match != state_hash(d.state))
            throw ConflictError("campaign '" + d.state.id + "' changed since it was read (state hash mismatch)");
    }

    Response route(const Request& req)
    {
        const auto seg = split_path(req.path);
        const auto& m = req.method;
        if (seg.size() == 1 && seg[0] == "health" && m == "GET")
            return json_response(200, {{"status", "ok"}});
        if (seg.size() == 1 && seg[0] == "prediction-curves" && m == "GET")
            return curves(req, vle::theta_tot().to_vector());
        if (seg.size() == 2 && seg[0] == "jobs" && m == "GET")
            return get_job(seg[1]);
        if (!seg.empty() && seg[0] == "campaigns") {
            if (seg.size() == 1 && m == "GET")
                return list_campaigns();
            if (seg.size() == 1 && m == "POST")
                return create_campaign(req);
            if (seg.size() == 2 && m == "GET")
                return state_response(200, load(seg[1]));
            if (seg.size() == 3) {
                const auto& id = seg[1];
                const auto& what = seg[2];
                if (what == "measurements" && m == "POST")
                    return post_measurements(req, id);
                if (what == "measurements.csv" && m == "GET")
                    return export_csv(id);
                if (what == "propose" && m == "POST")
                    return post_propose(req, id);
                if (what == "metrics" && m == "GET")
                    return get_metrics(req, id);
                if (what == "curves" && m == "GET") {
                    const auto d = load(id);
                    if (!d.state.theta)
                        throw ConflictError("campaign '" + id + "' has no estimate yet");
                    return curves(req, *d.state.theta);
                }
            }
        }
        throw NotFoundError("no route for " + m + " " + req.path);
    }

    Response list_campaigns() const
    {
        std::vector<std::string> ids;
        for (const auto& e : std::filesystem::directory_iterator(dir_))
            if (e.path().extension() == ".json" && e.path().filename().string().front() != '.')
                ids.push_back(e.path().stem().string());
        std::sort(ids.begin(), ids.end());
        return json_response(200, {{"campaigns", ids}});
    }

    static std::vector<Measurement> measurements_from_request(const Request& req, const UnweightedDesign& pending)
    {
        std::vector<Measurement> out;
        if (req.content_type.find("csv") != std::string::npos)
            return to_measurements(parse_measurements(req.body));
        const json j = json::parse(req.body);
        const json& list = j.is_array() ? j : j.at("measurements");
        if (!list.is_array())
            throw DomainError("measurements must be an array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& e = list[i];
            const Point planned = i < pending.size() ? pending[i] : make_point({0.0, 0.0});
            const double l = e.contains("l") ? e.at("l").get<double>() : planned[0];
            const double P = e.contains("P") ? e.at("P").get<double>() : planned[1];
            Vector y(2);
            y << e.at("v").get<double>(), e.at("T").get<double>();
            out.push_back({make_point({l, P}), y});
        }
        return out;
    }

    Response create_campaign(const Request& req)
    {
        std::string id;
        CampaignConfig config = case_study_config();
        CampaignState state;
        if (req.content_type.find("csv") != std::string::npos) {
            id = query(req, "id");
            if (id.empty())
                id = fresh_id();
            check_id(id);
            const auto records = parse_measurements(req.body);
            check_vle_measurements(to_measurements(records));
            state = new_campaign(id, to_experiments(records));
        } else {
            const json j = req.body.empty() ? json::object() : json::parse(req.body);
            id = j.value("id", std::string());
            if (id.empty())
                id = fresh_id();
            check_id(id);
            if (j.contains("config"))
                config = config_from_json(j.at("config"));
            if (j.contains("initial_csv")) {
                const auto records = parse_measurements(j.at("initial_csv").get<std::string>());
                check_vle_measurements(to_measurements(records));
                state = new_campaign(id, to_experiments(records));
            } else if (j.contains("initial_design")) {
                const auto pts = points_from_json(j.at("initial_design"));
                for (const auto& p : pts)
                    if (p.size() != 2 || !(p[0] >= 0.0 && p[0] <= 1.0) || !(p[1] > 0.0))
                        throw DomainError("initial design points must be (l in [0, 1], P > 0)");
                state = new_campaign(id, pts);
            } else {
                throw DomainError("request needs 'initial_design' or 'initial_csv'");
            }
        }
        config.validate(state.records.size() + state.pending.size());
        auto s = slot(id);
        std::lock_guard lock(s->mutex);
        if (std::filesystem::exists(file_of(id)))
            throw ConflictError("campaign '" + id + "' already exists");
        const CampaignDocument d{config, state};
        save(d);
        return state_response(201, d);
    }

    std::string fresh_id()
    {
        while (true) {
            const std::string id = "campaign-" + std::to_string(next_campaign_++);
            if (!std::filesystem::exists(file_of(id)))
                return id;
        }
    }

    Response post_measurements(const Request& req, const std::string& id)
    {
        check_id(id);
        auto s = slot(id);
        std::lock_guard lock(s->mutex);
        if (s->busy)
            throw ConflictError("campaign '" + id + "' has a step in progress");
        CampaignDocument d = load(id);
        check_if_match(req, d);
        const auto m = measurements_from_request(req, d.state.pending);
        check_vle_measurements(m);
        d.state = record_measurements(d.state, m);
        save(d);
        return state_response(200, d);
    }

    Response export_csv(const std::string& id)
    {
        const auto d = load(id);
        Response r;
        r.body = format_measurements(from_experiments(d.state.records, d.config.noise_sigmas));
        r.content_type = "text/csv";
        r.etag = state_hash(d.state);
        return r;
    }

    Response post_propose(const Request& req, const std::string& id)
    {
        check_id(id);
        auto s = slot(id);
        std::string hash;
        {
            std::lock_guard lock(s->mutex);
            if (s->busy)
                throw ConflictError("campaign '" + id + "' has a step in progress");
            const CampaignDocument d = load(id);
            check_if_match(req, d);
            if (d.state.status != CampaignStatus::ready_to_propose)
                throw ConflictError("campaign '" + id + "' cannot propose (status " + seqoed::to_string(d.state.status) +
                                    ")");
            s->busy = true;
            hash = state_hash(d.state);
        }
        const std::string jid = enqueue("propose", id, [this, id, s] {
            try {
                std::lock_guard lock(s->mutex);
                CampaignDocument d = load(id);
                d.state = propose(d.state, d.config, model_);
                save(d);
                s->busy = false;
                const auto& it = d.state.history.back();
                json batch = json::array();
                for (std::size_t i = 0; i < it.batch.size(); ++i)
                    batch.push_back({{"l", it.batch[i][0]}, {"P", it.batch[i][1]}, {"distance", it.distances[i]}});
                return json{{"campaign", id},
                            {"status", seqoed::to_string(d.state.status)},
                            {"theta", to_std(it.theta)},
                            {"batch", batch},
                            {"report",
                             {{"min_sensitivity", it.report.min_sensitivity},
                              {"epsilon", it.report.epsilon},
                              {"criterion_value", it.report.criterion_value},
                              {"iterations", it.report.iterations},
                              {"design", to_json(it.report.design)}}},
                            {"state_hash", state_hash(d.state)}};
            } catch (...) {
                std::lock_guard lock(s->mutex);
                s->busy = false;
                throw;
            }
        });
        return json_response(202, {{"job_id", jid}, {"status", "queued"}, {"state_hash", hash}});
    }

    Response get_metrics(const Request& req, const std::string& id)
    {
        const CampaignDocument d = load(id);
        AssessOptions opt;
        opt.normalization = normalization_from_string(query(req, "normalization", "per_experiment"));
        opt.grid_l = static_cast<int>(query_double(req, "grid_l", 201));
        opt.grid_P = static_cast<int>(query_double(req, "grid_P", 21));
        opt.sampling = query_flag(req, "sampling");
        opt.n_sam = static_cast<int>(query_double(req, "n_sam", d.config.n_sam));
        opt.seed = static_cast<std::uint64_t>(query_double(req, "seed", static_cast<double>(d.config.seed)));
        if (opt.grid_l < 2 || opt.grid_P < 1)
            throw DomainError("evaluation grid too small");
        if (opt.sampling && opt.n_sam < 2)
            throw DomainError("n_sam must be at least 2");
        if (d.state.records.empty())
            throw ConflictError("campaign '" + id + "' has no measurements");
        if (!opt.sampling)
            return json_response(200, to_json(assess_campaign(d.state, d.config, model_, opt)));

        const std::string key = id + "|" + state_hash(d.state) + "|" + seqoed::to_string(opt.normalization) + "|" +
                                std::to_string(opt.grid_l) + "|" + std::to_string(opt.grid_P) + "|" +
                                std::to_string(opt.n_sam) + "|" + std::to_string(opt.seed);
        {
            std::lock_guard lock(jobs_mutex_);
            const auto it = job_cache_.find(key);
            if (it != job_cache_.end() && jobs_.at(it->second).status != JobStatus::failed)
                return json_response(202, job_json(jobs_.at(it->second)));
        }
        const std::string jid = enqueue("assess", id, [this, d, opt] {
            return to_json(assess_campaign(d.state, d.config, model_, opt));
        });
        std::lock_guard lock(jobs_mutex_);
        job_cache_[key] = jid;
        return json_response(202, job_json(jobs_.at(jid)));
    }

    Response curves(const Request& req, const Vector& theta)
    {
        std::vector<double> pressures = query_list(req, "pressures");
        if (pressures.empty())
            pressures = {1e5, 2e5, 3e5};
        const int points = static_cast<int>(query_double(req, "points", 101));
        Vector th = theta;
        const auto custom = query_list(req, "theta");
        if (!custom.empty())
            th = vle::ParamVector::from_vector(from_std(custom)).to_vector();
        return json_response(200, {{"theta", to_std(th)}, {"curves", to_json(prediction_curves(model_, th, pressures, points))}});
    }

    json job_json(const Job& j) const
    {
        json out = {{"job_id", j.id}, {"kind", j.kind}, {"campaign", j.campaign}, {"status", to_string(j.status)}};
        if (j.status == JobStatus::succeeded)
            out["result"] = j.result;
        if (j.status == JobStatus::failed)
            out["error"] = j.error;
        return out;
    }

    Response get_job(const std::string& jid)
    {
        std::lock_guard lock(jobs_mutex_);
        const auto it = jobs_.find(jid);
        if (it == jobs_.end())
            throw NotFoundError("unknown job '" + jid + "'");
        return json_response(200, job_json(it->second));
    }

    std::string enqueue(std::string kind, std::string campaign, std::function<json()> task)
    {
        std::string jid;
        {
            std::lock_guard lock(jobs_mutex_);
            jid = "job-" + std::to_string(next_job_++);
            jobs_[jid] = Job{jid, std::move(kind), std::move(campaign), JobStatus::queued, {}, {}};
        }
        {
            std::lock_guard lock(queue_mutex_);
            queue_.push_back([this, jid, task = std::move(task)] {
                set_status(jid, JobStatus::running);
                try {
                    json result = task();
                    std::lock_guard lock(jobs_mutex_);
                    jobs_[jid].result = std::move(result);
                    jobs_[jid].status = JobStatus::succeeded;
                } catch (const std::exception& e) {
                    std::lock_guard lock(jobs_mutex_);
                    jobs_[jid].error = e.what();
                    jobs_[jid].status = JobStatus::failed;
                }
            });
        }
        queue_cv_.notify_one();
        return jid;
    }

    void set_status(const std::string& jid, JobStatus s)
    {
        std::lock_guard lock(jobs_mutex_);
        jobs_[jid].status = s;
    }

    void work()
    {
        while (true) {
            std::function<void()> task;
            {
                std::unique_lock lock(queue_mutex_);
                queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
                if (queue_.empty())
                    return;
                task = std::move(queue_.front());
                queue_.pop_front();
                ++active_;
            }
            task();
            {
                std::lock_guard lock(queue_mutex_);
                --active_;
            }
            idle_cv_.notify_all();
        }
    }
};

} // namespace seqoed
