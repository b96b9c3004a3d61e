// seqoed: command line front end for sequential experimental design campaigns.

#include <seqoed/http.hpp>
#include <seqoed/report.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace seqoed;

std::string error_kind(const std::exception& e)
{
    if (dynamic_cast<const ParseError*>(&e))
        return "parse";
    if (dynamic_cast<const MigrationError*>(&e))
        return "migration";
    if (dynamic_cast<const DomainError*>(&e))
        return "domain";
    if (dynamic_cast<const StateError*>(&e))
        return "state";
    if (dynamic_cast<const EstimationError*>(&e))
        return "estimation";
    if (dynamic_cast<const SingularityError*>(&e))
        return "singular";
    if (dynamic_cast<const ConvergenceError*>(&e))
        return "convergence";
    if (dynamic_cast<const InfeasibleError*>(&e))
        return "infeasible";
    return "error";
}

std::string one_line(std::string s)
{
    for (auto& c : s)
        if (c == '\n' || c == '\r')
            c = ' ';
    return s;
}

/// Initial design CSV: either the measurement schema or a bare "l,P" table of planned points.
CampaignState initial_state(const std::string& id, const std::string& path)
{
    const std::string text = read_file(path);
    const auto first = text.substr(0, text.find_first_of("\r\n"));
    if (first == "l,P") {
        UnweightedDesign pts;
        std::istringstream in(text);
        std::string line;
        std::getline(in, line);
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            const auto cells = detail::split_csv_line(line);
            if (cells.size() != 2)
                throw ParseError("expected 2 cells", row);
            const double l = detail::parse_number(cells[0], row, 1);
            const double P = detail::parse_number(cells[1], row, 2);
            if (l < 0.0 || l > 1.0)
                throw ParseError("mole fraction outside [0, 1]", row, 1);
            pts.push_back(make_point({l, P}));
        }
        return new_campaign(id, pts);
    }
    const auto records = parse_measurements(text);
    check_vle_measurements(to_measurements(records));
    return new_campaign(id, to_experiments(records));
}

void print_batch(const IterationRecord& it, CampaignStatus status)
{
    std::printf("iteration %d  status %s  min_sensitivity %.3e  epsilon %.1e\n", it.iteration,
                seqoed::to_string(status).c_str(), it.report.min_sensitivity, it.report.epsilon);
    std::printf("theta");
    for (Eigen::Index i = 0; i < it.theta.size(); ++i)
        std::printf(" %.6f", it.theta[i]);
    std::printf("\n%-4s %10s %12s %10s\n", "#", "l", "P", "distance");
    for (std::size_t i = 0; i < it.batch.size(); ++i)
        std::printf("%-4zu %10.4f %12.1f %10.4f\n", i + 1, it.batch[i][0], it.batch[i][1], it.distances[i]);
}

void print_metrics(const DesignMetrics& m)
{
    std::printf("%-6s size %2zu  rho_v %.4e  rho_T %.4e  sigma_lin_v %.4e  sigma_lin_T %.4e", m.name.c_str(),
                m.size, m.rmse[0], m.rmse[1], m.lin.sigma[0], m.lin.sigma[1]);
    if (m.sam)
        std::printf("  sigma_sam_v %.4e  sigma_sam_T %.4e", m.sam->sigma[0], m.sam->sigma[1]);
    std::printf("\n");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sequential locally optimal experimental design"};
    app.require_subcommand(1);

    auto* campaign = app.add_subcommand("campaign", "Create and advance a campaign");
    campaign->require_subcommand(1);

    std::string config_path, initial_path, id, output = "campaign.json";
    auto* cnew = campaign->add_subcommand("new", "Create a campaign document");
    cnew->add_option("--config", config_path, "Campaign configuration (JSON)")->check(CLI::ExistingFile);
    cnew->add_option("--initial-design", initial_path, "Initial design CSV")->required()->check(CLI::ExistingFile);
    cnew->add_option("--id", id, "Campaign id");
    cnew->add_option("-o,--output", output, "Campaign file to write");

    std::string campaign_path;
    auto* cprop = campaign->add_subcommand("propose", "Estimate and propose the next batch");
    cprop->add_option("campaign", campaign_path)->required()->check(CLI::ExistingFile);

    std::string measurements_path;
    auto* crec = campaign->add_subcommand("record", "Append measurements of the pending batch");
    crec->add_option("campaign", campaign_path)->required()->check(CLI::ExistingFile);
    crec->add_option("--measurements", measurements_path, "Measurement CSV")->required()->check(CLI::ExistingFile);

    std::string truth_path;
    std::uint64_t seed = 1;
    auto* csim = campaign->add_subcommand("run-sim", "Run the whole campaign against a simulated truth");
    csim->add_option("campaign", campaign_path)->required()->check(CLI::ExistingFile);
    csim->add_option("--truth", truth_path, "True parameters (JSON)")->required()->check(CLI::ExistingFile);
    csim->add_option("--seed", seed, "Noise seed");

    auto* cexp = campaign->add_subcommand("export", "Write the measurements as CSV");
    cexp->add_option("campaign", campaign_path)->required()->check(CLI::ExistingFile);

    bool sampling = false, reconciled = false;
    int n_sam = 1000;
    std::string curves_dir, normalization = "per_experiment";
    auto* assess = app.add_subcommand("assess", "Prediction error and uncertainty of a campaign");
    assess->add_option("campaign", campaign_path)->required()->check(CLI::ExistingFile);
    assess->add_flag("--sampling", sampling, "Also compute sampling-based uncertainties");
    assess->add_option("--n-sam", n_sam, "Number of samples")->check(CLI::Range(2, 1000000));
    assess->add_option("--seed", seed, "Sampling seed");
    assess->add_option("--curves-dir", curves_dir, "Directory for sigma curve CSVs");
    assess->add_option("--normalization", normalization, "total or per_experiment");

    std::string stage;
    auto* replay = app.add_subcommand("replay-paper", "Assess the bundled case-study designs");
    replay->add_option("--stage", stage, "init|fed1|fed2|fed3|oed1|oed2|oed3|tot")
        ->check(CLI::IsMember({"init", "fed1", "fed2", "fed3", "oed1", "oed2", "oed3", "tot"}));
    replay->add_flag("--reconciled", reconciled, "Use the reconciled input assignment for uncertainties");
    replay->add_flag("--sampling", sampling, "Also compute sampling-based uncertainties");
    replay->add_option("--n-sam", n_sam, "Number of samples")->check(CLI::Range(2, 1000000));
    replay->add_option("--seed", seed, "Sampling seed");
    replay->add_option("--normalization", normalization, "total or per_experiment");

    std::string host = "127.0.0.1", data_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--host", host);
    serve->add_option("--port", port)->check(CLI::Range(1, 65535));
    serve->add_option("--data-dir", data_dir, "Campaign directory (default $SEQOED_DATA_DIR or ./campaigns)");

    CLI11_PARSE(app, argc, argv);

    try {
        const vle::VleModel model;
        if (cnew->parsed()) {
            CampaignConfig config = case_study_config();
            if (!config_path.empty())
                config = config_from_json(json::parse(read_file(config_path)));
            if (id.empty())
                id = std::filesystem::path(output).stem().string();
            CampaignState state = initial_state(id, initial_path);
            config.validate(state.records.size() + state.pending.size());
            save_campaign(output, {config, state});
            std::printf("created %s (%zu measured, %zu pending) status %s\n", output.c_str(), state.records.size(),
                        state.pending.size(), seqoed::to_string(state.status).c_str());
        } else if (cprop->parsed()) {
            CampaignDocument d = load_campaign(campaign_path);
            d.state = propose(d.state, d.config, model);
            save_campaign(campaign_path, d);
            print_batch(d.state.history.back(), d.state.status);
        } else if (crec->parsed()) {
            CampaignDocument d = load_campaign(campaign_path);
            const auto m = to_measurements(load_measurements(measurements_path));
            check_vle_measurements(m);
            d.state = record_measurements(d.state, m);
            save_campaign(campaign_path, d);
            std::printf("recorded %zu measurements, %zu total, status %s\n", m.size(), d.state.records.size(),
                        seqoed::to_string(d.state.status).c_str());
        } else if (csim->parsed()) {
            CampaignDocument d = load_campaign(campaign_path);
            const Vector truth = params_from_json(json::parse(read_file(truth_path)));
            SimulatedSource source(model, truth, d.config.noise(), seed);
            d.state = run_campaign(d.state, d.config, source, model, [&](const CampaignState& s) {
                save_campaign(campaign_path, {d.config, s});
            });
            save_campaign(campaign_path, d);
            for (const auto& it : d.state.history)
                print_batch(it, d.state.status);
            std::printf("terminated: %s after %d iterations with %zu experiments\n",
                        seqoed::to_string(d.state.status).c_str(), d.state.iteration, d.state.records.size());
        } else if (cexp->parsed()) {
            const CampaignDocument d = load_campaign(campaign_path);
            std::fputs(format_measurements(from_experiments(d.state.records, d.config.noise_sigmas)).c_str(), stdout);
        } else if (assess->parsed()) {
            const CampaignDocument d = load_campaign(campaign_path);
            AssessOptions opt;
            opt.normalization = normalization_from_string(normalization);
            opt.sampling = sampling;
            opt.n_sam = n_sam;
            opt.seed = seed;
            const DesignMetrics m = assess_campaign(d.state, d.config, model, opt);
            print_metrics(m);
            if (!curves_dir.empty()) {
                std::filesystem::create_directories(curves_dir);
                atomic_write(std::filesystem::path(curves_dir) / "sigma_lin.csv", curve_csv(m.lin));
                if (m.sam)
                    atomic_write(std::filesystem::path(curves_dir) / "sigma_sam.csv", curve_csv(*m.sam));
            }
        } else if (replay->parsed()) {
            ReplayOptions opt;
            opt.reconciled = reconciled;
            opt.assess.normalization = normalization_from_string(normalization);
            opt.assess.sampling = sampling;
            opt.assess.n_sam = n_sam;
            opt.assess.seed = seed;
            const std::vector<std::string> stages =
                stage.empty() ? fixtures::stage_names() : std::vector<std::string>{stage};
            for (const auto& s : stages)
                print_metrics(replay_stage(s, opt));
        } else if (serve->parsed()) {
            Service service(data_dir.empty() ? default_data_dir() : std::filesystem::path(data_dir));
            httplib::Server server;
            bind_routes(server, service);
            std::printf("listening on http://%s:%d (data %s)\n", host.c_str(), port,
                        service.data_dir().string().c_str());
            std::fflush(stdout);
            if (!server.listen(host, port))
                throw Error("cannot listen on " + host + ":" + std::to_string(port));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s: %s\n", error_kind(e).c_str(), one_line(e.what()).c_str());
        return 1;
    }
    return 0;
}
