#pragma once

// Measurement CSV, campaign/config JSON documents and bundled fixtures.

#include "campaign.hpp"
#include "core.hpp"
#include "estimation.hpp"
#include "fixtures.hpp"
#include "solver.hpp"
#include "vle.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace seqoed {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Schema version of a stored document is not supported.
class MigrationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Measurement CSV

inline constexpr std::string_view kMeasurementHeader =
    "design_label,l_planned,l_actual,P_planned,P_actual,v,T,sigma_v,sigma_T";

struct MeasurementRecord {
    std::string design_label;
    double l_planned = 0.0;
    double l_actual = 0.0;
    double P_planned = 0.0;
    double P_actual = 0.0;
    double v = 0.0;
    double T = 0.0;
    double sigma_v = 0.0;
    double sigma_T = 0.0;

    /// Cell text as read, reused on export so that unchanged values round-trip byte for byte.
    std::array<std::string, 8> text{};

    std::array<double, 8> values() const { return {l_planned, l_actual, P_planned, P_actual, v, T, sigma_v, sigma_T}; }
};

namespace detail {

inline std::string format_double(double v)
{
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc())
        throw Error("could not format number");
    return std::string(buf.data(), ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

inline double parse_number(const std::string& s, std::size_t row, std::size_t col)
{
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t'))
        ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t'))
        --e;
    if (b < e && *b == '+')
        ++b;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (b == e || ec != std::errc() || ptr != e)
        throw ParseError("non-numeric cell '" + s + "'", row, col);
    if (!std::isfinite(v))
        throw ParseError("non-finite cell '" + s + "'", row, col);
    return v;
}

} // namespace detail

/// Parse the measurement CSV (header row mandatory, comma separated, dot decimal).
/// Rows are reported 1-based with the header as row 1.
inline std::vector<MeasurementRecord> parse_measurements(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || (line.empty() && in.eof()))
        throw ParseError("measurement file is empty", 1);
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
        line.erase(0, 3);
    if (line != kMeasurementHeader)
        throw ParseError("header mismatch: expected '" + std::string(kMeasurementHeader) + "'", 1);
    std::vector<MeasurementRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 9)
            throw ParseError("expected 9 cells, found " + std::to_string(cells.size()), row);
        MeasurementRecord r;
        r.design_label = cells[0];
        std::array<double, 8> v{};
        for (std::size_t c = 0; c < 8; ++c) {
            v[c] = detail::parse_number(cells[c + 1], row, c + 2);
            r.text[c] = cells[c + 1];
        }
        r.l_planned = v[0];
        r.l_actual = v[1];
        r.P_planned = v[2];
        r.P_actual = v[3];
        r.v = v[4];
        r.T = v[5];
        r.sigma_v = v[6];
        r.sigma_T = v[7];
        for (std::size_t c : {0u, 1u, 4u})
            if (v[c] < 0.0 || v[c] > 1.0)
                throw ParseError("mole fraction outside [0, 1]", row, c + 2);
        out.push_back(std::move(r));
    }
    if (out.empty())
        throw ParseError("measurement file has no data rows", 1);
    return out;
}

inline std::string format_measurements(const std::vector<MeasurementRecord>& records)
{
    std::string out(kMeasurementHeader);
    out += '\n';
    for (const auto& r : records) {
        out += r.design_label;
        const auto v = r.values();
        for (std::size_t c = 0; c < 8; ++c) {
            out += ',';
            double parsed = 0.0;
            const auto& t = r.text[c];
            const bool reuse = !t.empty() && std::from_chars(t.data(), t.data() + t.size(), parsed).ec == std::errc() &&
                               parsed == v[c];
            out += reuse ? t : detail::format_double(v[c]);
        }
        out += '\n';
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Write via a temporary file in the same directory and rename over the target.
inline void atomic_write(const std::filesystem::path& path, std::string_view content)
{
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    const auto tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
            throw Error("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot replace '" + path.string() + "': " + ec.message());
    }
}

inline std::vector<MeasurementRecord> load_measurements(const std::filesystem::path& path)
{
    return parse_measurements(read_file(path));
}

inline Dataset to_dataset(const std::vector<MeasurementRecord>& records)
{
    Dataset d;
    d.reserve(records.size());
    for (const auto& r : records) {
        Vector y(2);
        y << r.v, r.T;
        d.push_back({make_point({r.l_actual, r.P_actual}), y, make_point({r.l_planned, r.P_planned})});
    }
    return d;
}

inline std::vector<ExperimentRecord> to_experiments(const std::vector<MeasurementRecord>& records, int batch = 0)
{
    std::vector<ExperimentRecord> out;
    for (const auto& r : records) {
        Vector y(2);
        y << r.v, r.T;
        out.push_back({r.design_label, make_point({r.l_planned, r.P_planned}), make_point({r.l_actual, r.P_actual}),
                       y, batch});
    }
    return out;
}

inline std::vector<Measurement> to_measurements(const std::vector<MeasurementRecord>& records)
{
    std::vector<Measurement> out;
    for (const auto& r : records) {
        Vector y(2);
        y << r.v, r.T;
        out.push_back({make_point({r.l_actual, r.P_actual}), y});
    }
    return out;
}

inline std::vector<MeasurementRecord> from_experiments(const std::vector<ExperimentRecord>& records,
                                                       const Vector& sigmas)
{
    std::vector<MeasurementRecord> out;
    for (const auto& e : records) {
        MeasurementRecord r;
        r.design_label = e.label;
        r.l_planned = e.planned[0];
        r.P_planned = e.planned[1];
        r.l_actual = e.actual[0];
        r.P_actual = e.actual[1];
        r.v = e.y[0];
        r.T = e.y[1];
        r.sigma_v = sigmas.size() > 0 ? sigmas[0] : 0.0;
        r.sigma_T = sigmas.size() > 1 ? sigmas[1] : 0.0;
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fixtures

namespace fixtures {

inline const std::vector<MeasurementRecord>& measurements()
{
    static const std::vector<MeasurementRecord> records = parse_measurements(kMeasurementsCsv);
    return records;
}

/// Records of a design stage (init, fed0-fed3, oed0-oed3, tot).
inline std::vector<MeasurementRecord> stage(std::string_view name)
{
    const auto& all = measurements();
    std::vector<MeasurementRecord> out;
    for (auto i : stage_rows(name))
        out.push_back(all.at(i));
    return out;
}

/// Actual inputs of a stage, optionally under the reconciled input assignment.
inline UnweightedDesign stage_inputs(std::string_view name, bool reconciled = false)
{
    std::vector<Point> inputs;
    for (const auto& r : measurements())
        inputs.push_back(make_point({r.l_actual, r.P_actual}));
    if (reconciled)
        for (auto [a, b] : reconciled_input_swaps())
            std::swap(inputs.at(a), inputs.at(b));
    UnweightedDesign out;
    for (auto i : stage_rows(name))
        out.push_back(inputs.at(i));
    return out;
}

inline std::array<vle::AntoineParams, 2> antoine()
{
    const json j = json::parse(kAntoineJson);
    std::array<vle::AntoineParams, 2> out;
    for (std::size_t i = 0; i < 2; ++i)
        out[i] = {j.at(i).at("component").get<std::string>(), j.at(i).at("A").get<double>(),
                  j.at(i).at("B").get<double>(), j.at(i).at("C").get<double>()};
    return out;
}

} // namespace fixtures

inline std::array<vle::AntoineParams, 2> load_antoine(const std::filesystem::path& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid Antoine JSON: ") + e.what());
    }
    if (!j.is_array() || j.size() != 2)
        throw ParseError("Antoine JSON must be an array of two components");
    std::array<vle::AntoineParams, 2> out;
    try {
        for (std::size_t i = 0; i < 2; ++i)
            out[i] = {j.at(i).at("component").get<std::string>(), j.at(i).at("A").get<double>(),
                      j.at(i).at("B").get<double>(), j.at(i).at("C").get<double>()};
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid Antoine JSON: ") + e.what());
    }
    for (const auto& a : out)
        if (!(a.B > 0.0))
            throw DomainError("Antoine parameter B must be positive for " + a.component);
    return out;
}

// ---------------------------------------------------------------------------
// JSON conversions

inline json to_json_vec(const Vector& v) { return json(to_std(v)); }

inline Vector vec_from_json(const json& j) { return from_std(j.get<std::vector<double>>()); }

inline json to_json_points(const std::vector<Point>& pts)
{
    json a = json::array();
    for (const auto& p : pts)
        a.push_back(to_json_vec(p));
    return a;
}

inline std::vector<Point> points_from_json(const json& j)
{
    std::vector<Point> out;
    for (const auto& e : j)
        out.push_back(vec_from_json(e));
    return out;
}

inline json to_json(const WeightedDesign& xi)
{
    json a = json::array();
    for (std::size_t i = 0; i < xi.size(); ++i)
        a.push_back({{"weight", xi.weights[i]}, {"x", to_std(xi.points[i])}});
    return a;
}

inline WeightedDesign weighted_from_json(const json& j)
{
    WeightedDesign xi;
    for (const auto& e : j) {
        xi.weights.push_back(e.at("weight").get<double>());
        xi.points.push_back(vec_from_json(e.at("x")));
    }
    return xi;
}

inline json to_json(const SolveReport& r)
{
    return {{"design", to_json(r.design)},
            {"support", r.support},
            {"discretization", r.discretization},
            {"added", r.added},
            {"values", r.values},
            {"iterations", r.iterations},
            {"inner_iterations", r.inner_iterations},
            {"min_sensitivity", r.min_sensitivity},
            {"argmin_sensitivity", r.argmin_sensitivity},
            {"criterion_value", r.criterion_value},
            {"epsilon", r.epsilon}};
}

inline SolveReport solve_report_from_json(const json& j)
{
    SolveReport r;
    r.design = weighted_from_json(j.at("design"));
    r.support = j.at("support").get<std::vector<std::size_t>>();
    r.discretization = j.at("discretization").get<std::vector<std::size_t>>();
    r.added = j.at("added").get<std::vector<std::size_t>>();
    r.values = j.at("values").get<std::vector<double>>();
    r.iterations = j.at("iterations").get<int>();
    r.inner_iterations = j.at("inner_iterations").get<int>();
    r.min_sensitivity = j.at("min_sensitivity").get<double>();
    r.argmin_sensitivity = j.at("argmin_sensitivity").get<std::size_t>();
    r.criterion_value = j.at("criterion_value").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    return r;
}

inline DesignSpace design_space_from_json(const json& j)
{
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "oed")
            return oed_grid();
        if (name == "fed")
            return fed_grid();
        throw DomainError("unknown design space '" + name + "'");
    }
    DesignSpace s;
    s.name = j.value("name", std::string("custom"));
    if (j.contains("axes")) {
        std::vector<std::vector<double>> axes;
        for (const auto& a : j.at("axes"))
            axes.push_back(a.get<std::vector<double>>());
        s.points = DesignSpace::grid(s.name, axes).points;
    } else {
        s.points = points_from_json(j.at("points"));
    }
    return s;
}

inline json to_json(const DesignSpace& s) { return {{"name", s.name}, {"points", to_json_points(s.points)}}; }

inline json to_json(const CampaignConfig& c)
{
    json j = {{"alpha", c.alpha},
              {"epsilon", c.epsilon},
              {"min_weight", c.min_weight},
              {"max_batch", c.max_batch},
              {"max_experiments", c.max_experiments},
              {"delta", c.delta},
              {"criterion", to_string(c.criterion)},
              {"design_space", to_json(c.space)},
              {"noise_sigmas", to_std(c.noise_sigmas)},
              {"seed", c.seed},
              {"multistarts", c.multistarts},
              {"n_sam", c.n_sam}};
    if (!c.bounds.empty())
        j["bounds"] = {{"lower", to_std(c.bounds.lower)}, {"upper", to_std(c.bounds.upper)}};
    return j;
}

/// Settings of the case study: α = 0.5, ε = 5e−5, w̲⁺ = 0.95, n̄⁺ = 3, n̄ = 27,
/// δ = 0.1, D-criterion on the 10 × 10 grid.
inline CampaignConfig case_study_config()
{
    CampaignConfig c;
    c.space = oed_grid();
    c.noise_sigmas = vle::case_study_noise().sigmas();
    const auto box = vle::default_param_box();
    c.bounds = {box.lower, box.upper};
    return c;
}

/// Missing keys keep their case-study defaults.
inline CampaignConfig config_from_json(const json& j)
{
    CampaignConfig c = case_study_config();
    try {
        c.alpha = j.value("alpha", c.alpha);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.min_weight = j.value("min_weight", c.min_weight);
        if (j.contains("max_batch")) {
            const auto v = j.at("max_batch").get<long long>();
            if (v < 1)
                throw DomainError("max_batch must be at least 1");
            c.max_batch = static_cast<std::size_t>(v);
        }
        if (j.contains("max_experiments")) {
            const auto v = j.at("max_experiments").get<long long>();
            if (v < 1)
                throw DomainError("max_experiments must be at least 1");
            c.max_experiments = static_cast<std::size_t>(v);
        }
        c.delta = j.value("delta", c.delta);
        if (j.contains("criterion"))
            c.criterion = criterion_from_string(j.at("criterion").get<std::string>());
        if (j.contains("design_space"))
            c.space = design_space_from_json(j.at("design_space"));
        if (j.contains("noise_sigmas"))
            c.noise_sigmas = vec_from_json(j.at("noise_sigmas"));
        if (j.contains("bounds"))
            c.bounds = {vec_from_json(j.at("bounds").at("lower")), vec_from_json(j.at("bounds").at("upper"))};
        c.seed = j.value("seed", c.seed);
        c.multistarts = j.value("multistarts", c.multistarts);
        c.n_sam = j.value("n_sam", c.n_sam);
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid campaign configuration: ") + e.what());
    }
    c.validate();
    return c;
}

inline json to_json(const ExperimentRecord& r)
{
    return {{"label", r.label},
            {"planned", to_std(r.planned)},
            {"actual", to_std(r.actual)},
            {"y", to_std(r.y)},
            {"batch", r.batch}};
}

inline ExperimentRecord experiment_from_json(const json& j)
{
    return {j.at("label").get<std::string>(), vec_from_json(j.at("planned")), vec_from_json(j.at("actual")),
            vec_from_json(j.at("y")), j.at("batch").get<int>()};
}

inline json to_json(const IterationRecord& r)
{
    return {{"iteration", r.iteration},
            {"theta", to_std(r.theta)},
            {"sse", r.sse},
            {"start_index", r.start_index},
            {"report", to_json(r.report)},
            {"survivors", to_json_points(r.survivors)},
            {"batch", to_json_points(r.batch)},
            {"batch_value", r.batch_value},
            {"exhaustive", r.exhaustive},
            {"distances", r.distances}};
}

inline IterationRecord iteration_from_json(const json& j)
{
    IterationRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.theta = vec_from_json(j.at("theta"));
    r.sse = j.at("sse").get<double>();
    r.start_index = j.at("start_index").get<int>();
    r.report = solve_report_from_json(j.at("report"));
    r.survivors = points_from_json(j.at("survivors"));
    r.batch = points_from_json(j.at("batch"));
    r.batch_value = j.at("batch_value").is_null() ? kInf : j.at("batch_value").get<double>();
    r.exhaustive = j.at("exhaustive").get<bool>();
    r.distances = j.at("distances").get<std::vector<double>>();
    return r;
}

inline json to_json(const CampaignState& s)
{
    json records = json::array();
    for (const auto& r : s.records)
        records.push_back(to_json(r));
    json history = json::array();
    for (const auto& h : s.history)
        history.push_back(to_json(h));
    return {{"id", s.id},
            {"iteration", s.iteration},
            {"status", to_string(s.status)},
            {"records", records},
            {"pending", to_json_points(s.pending)},
            {"theta", s.theta ? json(to_std(*s.theta)) : json(nullptr)},
            {"history", history}};
}

inline CampaignState state_from_json(const json& j)
{
    CampaignState s;
    s.id = j.at("id").get<std::string>();
    s.iteration = j.at("iteration").get<int>();
    s.status = status_from_string(j.at("status").get<std::string>());
    for (const auto& r : j.at("records"))
        s.records.push_back(experiment_from_json(r));
    s.pending = points_from_json(j.at("pending"));
    if (!j.at("theta").is_null())
        s.theta = vec_from_json(j.at("theta"));
    for (const auto& h : j.at("history"))
        s.history.push_back(iteration_from_json(h));
    return s;
}

/// A stored campaign: configuration plus state.
struct CampaignDocument {
    CampaignConfig config;
    CampaignState state;
};

inline json to_json(const CampaignDocument& d)
{
    return {{"schema_version", kSchemaVersion}, {"config", to_json(d.config)}, {"state", to_json(d.state)}};
}

inline CampaignDocument document_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("schema_version"))
        throw ParseError("campaign document lacks schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
        throw MigrationError("unsupported campaign schema_version " + std::to_string(version) + " (expected " +
                             std::to_string(kSchemaVersion) + ")");
    try {
        CampaignDocument d{config_from_json(j.at("config")), state_from_json(j.at("state"))};
        return d;
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid campaign document: ") + e.what());
    }
}

inline std::string serialize(const CampaignDocument& d) { return to_json(d).dump(2) + "\n"; }

inline CampaignDocument parse_campaign(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid campaign JSON: ") + e.what());
    }
    return document_from_json(j);
}

inline void save_campaign(const std::filesystem::path& path, const CampaignDocument& d)
{
    atomic_write(path, serialize(d));
}

inline CampaignDocument load_campaign(const std::filesystem::path& path) { return parse_campaign(read_file(path)); }

/// Parameter vector from {"a12":…, "a21":…, "b12":…, "b21":…, "c12":…} or a plain array.
inline Vector params_from_json(const json& j)
{
    try {
        if (j.is_array())
            return vle::ParamVector::from_vector(vec_from_json(j)).to_vector();
        return vle::ParamVector{j.at("a12").get<double>(), j.at("a21").get<double>(), j.at("b12").get<double>(),
                                j.at("b21").get<double>(), j.at("c12").get<double>()}
            .to_vector();
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid parameter JSON: ") + e.what());
    }
}

inline json params_to_json(const Vector& t)
{
    return {{"a12", t[0]}, {"a21", t[1]}, {"b12", t[2]}, {"b21", t[3]}, {"c12", t[4]}};
}

} // namespace seqoed
