#include "bsdei/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace bsdei {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + " " + what);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) fail_field(path + "." + it.key(), "is not a recognized setting");
    }
}

const json& section(const json& obj, const char* key, const std::string& path) {
    const json& v = obj.at(key);
    if (!v.is_object()) fail_field(path + "." + key, "must be an object");
    return v;
}

double get_double(const json& obj, const char* key, const std::string& path, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail_field(path + "." + key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail_field(path + "." + key, "must be finite");
    return x;
}

std::size_t get_count(const json& obj, const char* key, const std::string& path,
                      std::size_t fallback, std::size_t min_value) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        fail_field(path + "." + key, "must be an integer");
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
        fail_field(path + "." + key, "must be nonnegative");
    const auto x = v.get<std::uint64_t>();
    if (x < min_value)
        fail_field(path + "." + key, "must be >= " + std::to_string(min_value));
    return static_cast<std::size_t>(x);
}

std::string get_string(const json& obj, const char* key, const std::string& path,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) fail_field(path + "." + key, "must be a string");
    return v.get<std::string>();
}

std::vector<double> get_number_list(const json& v, const std::string& path) {
    if (!v.is_array()) fail_field(path, "must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) {
        if (!e.is_number()) fail_field(path, "must be an array of numbers");
        const double x = e.get<double>();
        if (!std::isfinite(x)) fail_field(path, "must contain only finite numbers");
        out.push_back(x);
    }
    return out;
}

MeasureFamily::AxisSpec make_axis(const std::string& law, double a, double b,
                                  const std::string& path, const char* law_key) {
    MeasureFamily::AxisSpec axis;
    if (law == "uniform")
        axis.law = MeasureFamily::Law::Uniform;
    else if (law == "gaussian")
        axis.law = MeasureFamily::Law::Gaussian;
    else
        fail_field(path + "." + law_key, "must be \"uniform\" or \"gaussian\"");
    axis.a = a;
    axis.b = b;
    if (axis.law == MeasureFamily::Law::Uniform && !(axis.a < axis.b))
        fail_field(path, "needs a < b for a uniform law");
    if (axis.law == MeasureFamily::Law::Gaussian && !(axis.b > 0.0))
        fail_field(path + ".b", "must be a positive standard deviation");
    return axis;
}

MeasureFamily::AxisSpec parse_axis(const json& obj, const std::string& path) {
    check_keys(obj, path, {"law", "a", "b"});
    return make_axis(get_string(obj, "law", path, "uniform"), get_double(obj, "a", path, 0.0),
                     get_double(obj, "b", path, 1.0), path, "law");
}

void parse_measure(const json& obj, RunConfig& cfg) {
    const std::string path = "measure";
    check_keys(obj, path, {"family", "a", "b", "axes", "mode", "atoms", "points", "weights"});
    const bool has_points = obj.contains("points") || obj.contains("weights");
    const bool has_family = obj.contains("family") || obj.contains("axes");
    if (has_points && has_family)
        fail_field(path, "must give either a family or explicit points, not both");

    if (has_points) {
        if (!obj.contains("points") || !obj.contains("weights"))
            fail_field(path, "explicit measures need both points and weights");
        const json& pts = obj.at("points");
        if (!pts.is_array() || pts.empty())
            fail_field(path + ".points", "must be a nonempty array of points");
        std::vector<Point> points;
        points.reserve(pts.size());
        for (const json& row : pts) points.push_back(get_number_list(row, path + ".points"));
        std::vector<double> weights = get_number_list(obj.at("weights"), path + ".weights");
        try {
            cfg.measure_explicit.emplace(std::move(points), std::move(weights));
        } catch (const std::exception& e) {
            fail_field(path, std::string("is invalid: ") + e.what());
        }
        cfg.measure_family.reset();
        return;
    }

    MeasureFamily family;
    if (obj.contains("axes")) {
        const json& axes = obj.at("axes");
        if (!axes.is_array() || axes.empty())
            fail_field(path + ".axes", "must be a nonempty array");
        for (std::size_t i = 0; i < axes.size(); ++i) {
            if (!axes[i].is_object()) fail_field(path + ".axes", "entries must be objects");
            family.axes.push_back(parse_axis(axes[i], path + ".axes[" + std::to_string(i) + "]"));
        }
    } else {
        // Single-axis shorthand: the law sits under "family" at the top level.
        family.axes.push_back(make_axis(get_string(obj, "family", path, "uniform"),
                                        get_double(obj, "a", path, 0.0),
                                        get_double(obj, "b", path, 1.0), path, "family"));
    }
    const std::string mode = get_string(obj, "mode", path, "quantile");
    if (mode == "quantile")
        family.mode = MeasureFamily::Mode::Quantile;
    else if (mode == "sample")
        family.mode = MeasureFamily::Mode::Sample;
    else
        fail_field(path + ".mode", "must be \"quantile\" or \"sample\"");
    if (family.mode == MeasureFamily::Mode::Quantile && family.dim() != 1)
        fail_field(path + ".mode", "quantile quantization requires one axis");
    cfg.measure_family = std::move(family);
    cfg.measure_atoms = get_count(obj, "atoms", path, cfg.measure_atoms, 1);
    cfg.measure_explicit.reset();
}

void parse_driver(const json& obj, RunConfig& cfg) {
    const std::string path = "driver";
    check_keys(obj, path, {"family", "alpha", "beta", "kappa", "scale", "lipschitz"});
    const std::string family = get_string(obj, "family", path, "zero");
    if (family == "zero")
        cfg.driver = DriverSpec::zero();
    else if (family == "linear")
        cfg.driver = DriverSpec::linear(get_double(obj, "alpha", path, 0.0),
                                        get_double(obj, "beta", path, 0.0));
    else if (family == "attraction")
        cfg.driver = DriverSpec::attraction(get_double(obj, "kappa", path, 0.0));
    else if (family == "bounded-smooth")
        cfg.driver = DriverSpec::bounded_smooth(get_double(obj, "scale", path, 0.0));
    else
        fail_field(path + ".family",
                   "must be one of \"zero\", \"linear\", \"attraction\", \"bounded-smooth\"");
    if (obj.contains("lipschitz")) {
        const double l = get_double(obj, "lipschitz", path, cfg.driver.lipschitz);
        if (!(l >= 0.0)) fail_field(path + ".lipschitz", "must be nonnegative");
        cfg.driver.lipschitz = l;
    }
}

void parse_terminal(const json& obj, RunConfig& cfg) {
    const std::string path = "terminal";
    check_keys(obj, path, {"family", "sigma", "coeffs", "l2"});
    const std::string family = get_string(obj, "family", path, "identity");
    if (family == "identity") {
        cfg.terminal = TerminalField::identity();
    } else if (family == "affine-terminal") {
        const double sigma = get_double(obj, "sigma", path, 1.0);
        cfg.terminal = TerminalField::affine_terminal(sigma);
    } else if (family == "deterministic-map") {
        if (!obj.contains("coeffs"))
            fail_field(path + ".coeffs", "is required for a deterministic map");
        std::vector<double> coeffs = get_number_list(obj.at("coeffs"), path + ".coeffs");
        if (coeffs.empty()) fail_field(path + ".coeffs", "must be nonempty");
        cfg.terminal = TerminalField::deterministic_map(std::move(coeffs));
    } else {
        fail_field(path + ".family",
                   "must be one of \"identity\", \"affine-terminal\", \"deterministic-map\"");
    }
    if (obj.contains("l2")) {
        const double l2 = get_double(obj, "l2", path, cfg.terminal.l2);
        if (!(l2 > 0.0)) fail_field(path + ".l2", "must be positive");
        cfg.terminal.l2 = l2;
    }
}

void parse_solver(const json& obj, RunConfig& cfg) {
    const std::string path = "solver";
    check_keys(obj, path, {"tolerance", "max_iterations", "basis_degree", "ridge"});
    cfg.solver.tolerance = get_double(obj, "tolerance", path, cfg.solver.tolerance);
    if (!(cfg.solver.tolerance > 0.0)) fail_field(path + ".tolerance", "must be positive");
    cfg.solver.max_iterations = get_count(obj, "max_iterations", path, cfg.solver.max_iterations, 1);
    cfg.solver.basis_degree =
        static_cast<int>(get_count(obj, "basis_degree", path, cfg.solver.basis_degree, 0));
    cfg.solver.ridge = get_double(obj, "ridge", path, cfg.solver.ridge);
    if (!(cfg.solver.ridge >= 0.0)) fail_field(path + ".ridge", "must be nonnegative");
}

std::size_t measure_dim(const RunConfig& cfg) {
    if (cfg.measure_explicit) return cfg.measure_explicit->dim();
    if (cfg.measure_family) return cfg.measure_family->dim();
    return 0;
}

void parse_study(const json& obj, RunConfig& cfg) {
    const std::string path = "study";
    check_keys(obj, path, {"atom_counts", "reference_atoms", "probes"});
    cfg.study_reference_atoms =
        get_count(obj, "reference_atoms", path, cfg.study_reference_atoms, 1);
    if (obj.contains("atom_counts")) {
        const std::vector<double> raw = get_number_list(obj.at("atom_counts"), path + ".atom_counts");
        if (raw.empty()) fail_field(path + ".atom_counts", "must be nonempty");
        cfg.study_atom_counts.clear();
        for (double x : raw) {
            if (x < 1.0 || x != std::floor(x))
                fail_field(path + ".atom_counts", "must contain positive integers");
            cfg.study_atom_counts.push_back(static_cast<std::size_t>(x));
        }
    }
    for (std::size_t i = 0; i + 1 < cfg.study_atom_counts.size(); ++i)
        if (cfg.study_atom_counts[i] >= cfg.study_atom_counts[i + 1])
            fail_field(path + ".atom_counts", "must be strictly increasing");
    for (std::size_t n : cfg.study_atom_counts)
        if (n > cfg.study_reference_atoms)
            fail_field(path + ".atom_counts", "must not exceed reference_atoms");
    if (obj.contains("probes")) {
        const json& probes = obj.at("probes");
        if (!probes.is_array()) fail_field(path + ".probes", "must be an array of points");
        cfg.study_probes.clear();
        for (const json& row : probes) {
            Point u = get_number_list(row, path + ".probes");
            if (u.size() != measure_dim(cfg))
                fail_field(path + ".probes", "entries must match the measure dimension");
            cfg.study_probes.push_back(std::move(u));
        }
    }
}

void parse_verify(const json& obj, RunConfig& cfg) {
    const std::string path = "verify";
    check_keys(obj, path,
               {"lipschitz_trials", "stability_u1", "stability_u2", "stability_deltas",
                "uniqueness_y_threshold", "uniqueness_z_threshold"});
    cfg.lipschitz_trials = get_count(obj, "lipschitz_trials", path, cfg.lipschitz_trials, 1);
    if (obj.contains("stability_u1")) {
        cfg.stability_u1 = get_number_list(obj.at("stability_u1"), path + ".stability_u1");
        if (!cfg.stability_u1.empty() && cfg.stability_u1.size() != measure_dim(cfg))
            fail_field(path + ".stability_u1", "must match the measure dimension");
    }
    if (obj.contains("stability_u2")) {
        cfg.stability_u2 = get_number_list(obj.at("stability_u2"), path + ".stability_u2");
        if (!cfg.stability_u2.empty() && cfg.stability_u2.size() != measure_dim(cfg))
            fail_field(path + ".stability_u2", "must match the measure dimension");
    }
    if (obj.contains("stability_deltas")) {
        cfg.stability_deltas = get_number_list(obj.at("stability_deltas"), path + ".stability_deltas");
        for (double d : cfg.stability_deltas)
            if (!(d > 0.0)) fail_field(path + ".stability_deltas", "must contain positive gaps");
    }
    cfg.uniqueness_y_threshold =
        get_double(obj, "uniqueness_y_threshold", path, cfg.uniqueness_y_threshold);
    cfg.uniqueness_z_threshold =
        get_double(obj, "uniqueness_z_threshold", path, cfg.uniqueness_z_threshold);
    if (!(cfg.uniqueness_y_threshold > 0.0))
        fail_field(path + ".uniqueness_y_threshold", "must be positive");
    if (!(cfg.uniqueness_z_threshold > 0.0))
        fail_field(path + ".uniqueness_z_threshold", "must be positive");
}

const char* law_name(MeasureFamily::Law law) {
    return law == MeasureFamily::Law::Uniform ? "uniform" : "gaussian";
}

const char* driver_name(DriverSpec::Family family) {
    switch (family) {
        case DriverSpec::Family::Zero: return "zero";
        case DriverSpec::Family::Linear: return "linear";
        case DriverSpec::Family::Attraction: return "attraction";
        case DriverSpec::Family::BoundedSmooth: return "bounded-smooth";
    }
    return "zero";
}

const char* terminal_name(TerminalField::Family family) {
    switch (family) {
        case TerminalField::Family::Identity: return "identity";
        case TerminalField::Family::AffineTerminal: return "affine-terminal";
        case TerminalField::Family::DeterministicMap: return "deterministic-map";
    }
    return "identity";
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// The probe and stability base point fall back to the family's center
// (uniform midpoint / Gaussian mean) or the first explicit atom.
Point default_point(const RunConfig& cfg) {
    if (cfg.measure_family) {
        Point u;
        for (const auto& axis : cfg.measure_family->axes)
            u.push_back(axis.law == MeasureFamily::Law::Uniform ? 0.5 * (axis.a + axis.b) : axis.a);
        return u;
    }
    if (cfg.measure_explicit) return cfg.measure_explicit->atom(0);
    throw std::invalid_argument("config: measure is not configured");
}

void require_stream(const std::ofstream& os, const fs::path& where) {
    if (!os) throw std::runtime_error("cannot write " + where.string());
}

void write_text(const fs::path& where, const std::string& text) {
    std::ofstream os(where, std::ios::binary);
    require_stream(os, where);
    os << text;
    os.flush();
    require_stream(os, where);
}

std::string metadata_line(const RunConfig& cfg) {
    return "# config_hash=" + cfg.config_hash() + ", seed=" + std::to_string(cfg.seed) + "\n";
}

json run_metadata(const RunConfig& cfg) {
    json j;
    j["config_hash"] = cfg.config_hash();
    j["seed"] = cfg.seed;
    return j;
}

json report_json(const PicardReport& report) {
    json j;
    j["converged"] = report.converged;
    j["tolerance"] = report.tolerance;
    j["iterations"] = report.iterations();
    j["effective_iterations"] = report.effective_iterations();
    j["residual_y"] = report.residual_y;
    j["residual_z"] = report.residual_z;
    return j;
}

std::string solution_csv(const RunConfig& cfg, const SolutionField& field) {
    std::string out = metadata_line(cfg);
    out += "k,j,m";
    for (std::size_t c = 0; c < field.dim; ++c) out += ",y_" + std::to_string(c + 1);
    for (std::size_t r = 0; r < field.dim; ++r)
        for (std::size_t c = 0; c < field.dim; ++c)
            out += ",z_" + std::to_string(r + 1) + "_" + std::to_string(c + 1);
    out += "\n";
    for (std::size_t k = 0; k < field.particles; ++k)
        for (std::size_t j = 0; j < field.nodes; ++j)
            for (std::size_t m = 0; m < field.paths; ++m) {
                out += std::to_string(k) + "," + std::to_string(j) + "," + std::to_string(m);
                for (double v : field.y_at(k, j, m)) out += "," + format_double(v);
                for (double v : field.z_at(k, j, m)) out += "," + format_double(v);
                out += "\n";
            }
    return out;
}

std::string flow_csv(const RunConfig& cfg, const SolutionField& field) {
    const MeasureFlow flow = measure_flow(field);
    std::string out = metadata_line(cfg);
    out += "j,t,gamma2_sq,gamma2\n";
    const std::size_t last = field.nodes - 1;
    for (std::size_t j = 0; j < field.nodes; ++j) {
        double acc = 0.0;
        for (std::size_t m = 0; m < field.paths; ++m)
            acc += detail::w2_sq_fast(flow.block(j, m), flow.weights(), flow.block(last, m),
                                      flow.weights(), field.dim);
        acc /= static_cast<double>(field.paths);
        out += std::to_string(j) + "," + format_double(field.grid.node(j)) + "," +
               format_double(acc) + "," + format_double(std::sqrt(acc)) + "\n";
    }
    return out;
}

}  // namespace

RunConfig RunConfig::parse_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");
    check_keys(doc, "config",
               {"schema_version", "seed", "grid", "paths", "measure", "driver", "terminal",
                "solver", "study", "verify", "output_dir"});
    if (!doc.contains("schema_version"))
        throw std::invalid_argument("config: schema_version is required");
    if (!doc.at("schema_version").is_number_integer() ||
        doc.at("schema_version").get<long long>() != kSchemaVersion)
        fail_field("schema_version", "must equal " + std::to_string(kSchemaVersion));

    RunConfig cfg;
    cfg.measure_family = MeasureFamily::uniform(0.0, 1.0);
    cfg.seed = get_count(doc, "seed", "config", cfg.seed, 0);
    cfg.paths = get_count(doc, "paths", "config", cfg.paths, 1);
    if (doc.contains("grid")) {
        const json& grid = section(doc, "grid", "config");
        check_keys(grid, "grid", {"horizon", "steps"});
        cfg.horizon = get_double(grid, "horizon", "grid", cfg.horizon);
        if (!(cfg.horizon > 0.0)) fail_field("grid.horizon", "must be positive");
        cfg.steps = get_count(grid, "steps", "grid", cfg.steps, 1);
    }
    if (doc.contains("measure")) parse_measure(section(doc, "measure", "config"), cfg);
    if (doc.contains("driver")) parse_driver(section(doc, "driver", "config"), cfg);
    if (doc.contains("terminal")) parse_terminal(section(doc, "terminal", "config"), cfg);
    if (doc.contains("solver")) parse_solver(section(doc, "solver", "config"), cfg);
    if (doc.contains("study")) parse_study(section(doc, "study", "config"), cfg);
    if (doc.contains("verify")) parse_verify(section(doc, "verify", "config"), cfg);
    cfg.output_dir = get_string(doc, "output_dir", "config", cfg.output_dir);
    return cfg;
}

RunConfig RunConfig::parse_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::invalid_argument("config: cannot read " + path.string());
    std::ostringstream buffer;
    buffer << is.rdbuf();
    return parse_json_text(buffer.str());
}

std::string RunConfig::canonical() const {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["seed"] = seed;
    j["grid"]["horizon"] = horizon;
    j["grid"]["steps"] = steps;
    j["paths"] = paths;

    json m;
    if (measure_explicit) {
        m["points"] = measure_explicit->atoms();
        m["weights"] = measure_explicit->weights();
    } else if (measure_family) {
        json axes = json::array();
        for (const auto& axis : measure_family->axes)
            axes.push_back({{"law", law_name(axis.law)}, {"a", axis.a}, {"b", axis.b}});
        m["axes"] = std::move(axes);
        m["mode"] = measure_family->mode == MeasureFamily::Mode::Quantile ? "quantile" : "sample";
        m["atoms"] = measure_atoms;
    }
    j["measure"] = std::move(m);

    j["driver"] = {{"family", driver_name(driver.family)}, {"alpha", driver.alpha},
                   {"beta", driver.beta},                  {"kappa", driver.kappa},
                   {"scale", driver.scale},                {"lipschitz", driver.lipschitz}};
    j["terminal"] = {{"family", terminal_name(terminal.family)},
                     {"sigma", terminal.sigma},
                     {"coeffs", terminal.coeffs},
                     {"l2", terminal.l2}};
    j["solver"] = {{"tolerance", solver.tolerance},
                   {"max_iterations", solver.max_iterations},
                   {"basis_degree", solver.basis_degree},
                   {"ridge", solver.ridge}};
    j["study"] = {{"atom_counts", study_atom_counts},
                  {"reference_atoms", study_reference_atoms},
                  {"probes", study_probes}};
    j["verify"] = {{"lipschitz_trials", lipschitz_trials},
                   {"stability_u1", stability_u1},
                   {"stability_u2", stability_u2},
                   {"stability_deltas", stability_deltas},
                   {"uniqueness_y_threshold", uniqueness_y_threshold},
                   {"uniqueness_z_threshold", uniqueness_z_threshold}};
    return j.dump();
}

std::string RunConfig::config_hash() const {
    const std::string text = canonical();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DiscreteMeasure RunConfig::initial_measure() const {
    if (measure_explicit) return *measure_explicit;
    if (measure_family) return quantize(*measure_family, measure_atoms, seed);
    throw std::invalid_argument("config: measure is not configured");
}

int run_solve(const RunConfig& config, const fs::path& out_dir) {
    const DiscreteMeasure mu0 = config.initial_measure();
    const TimeGrid grid(config.horizon, config.steps);
    const BrownianEnsemble ensemble(grid, config.paths, mu0.dim(), config.seed);

    const PicardOutcome outcome =
        picard_iterate(mu0, config.terminal, config.driver, ensemble, config.solver);

    const std::string solution = solution_csv(config, outcome.field);
    const std::string flow = flow_csv(config, outcome.field);
    json picard = run_metadata(config);
    picard["picard"] = report_json(outcome.report);

    fs::create_directories(out_dir);
    write_text(out_dir / "solution.csv", solution);
    write_text(out_dir / "flow.csv", flow);
    write_text(out_dir / "picard.json", picard.dump(2) + "\n");
    return outcome.report.converged ? 0 : 1;
}

int run_verify(const RunConfig& config, const fs::path& out_dir) {
    const DiscreteMeasure mu0 = config.initial_measure();
    const TimeGrid grid(config.horizon, config.steps);
    const BrownianEnsemble ensemble(grid, config.paths, mu0.dim(), config.seed);
    const std::size_t d = mu0.dim();

    const LipschitzReport lipschitz =
        check_driver_lipschitz(config.driver, config.lipschitz_trials, config.seed);

    const UniquenessReport uniqueness =
        uniqueness_probe(mu0, config.terminal, config.driver, ensemble, config.solver);
    const bool uniqueness_pass = uniqueness.conclusive &&
                                 uniqueness.y_rms <= config.uniqueness_y_threshold &&
                                 uniqueness.z_rms <= config.uniqueness_z_threshold;

    // Stability sweep: perturb the base point along the first axis by each
    // delta, keeping the measure fixed, so the right side is exactly delta^2.
    const Point u1 = config.stability_u1.empty() ? default_point(config) : config.stability_u1;
    constexpr double kDegenerateLeftTol = 1e-8;
    json stability_records = json::array();
    bool stability_pass = true;
    double prev_left = std::numeric_limits<double>::infinity();
    const auto record_json = [](const StabilityRecord& rec) {
        json r;
        r["conclusive"] = rec.conclusive;
        r["left_y"] = rec.left_y;
        r["left_z"] = rec.left_z;
        r["left"] = rec.left;
        r["u_gap_sq"] = rec.u_gap_sq;
        r["flow_gap"] = rec.flow_gap;
        r["right"] = rec.right;
        r["ratio"] = rec.ratio;
        return r;
    };
    const auto record_ok = [&](const StabilityRecord& rec) {
        if (!rec.conclusive || !std::isfinite(rec.left)) return false;
        return rec.right > 0.0 ? std::isfinite(rec.ratio) : rec.left <= kDegenerateLeftTol;
    };
    for (double delta : config.stability_deltas) {
        Point u2 = u1;
        u2[0] += delta;
        const StabilityRecord rec =
            check_stability(ensemble, config.solver, config.driver, config.terminal, u1, u2, mu0, mu0);
        json r = record_json(rec);
        r["delta"] = delta;
        stability_records.push_back(std::move(r));
        stability_pass = stability_pass && record_ok(rec);
        if (rec.left > prev_left) stability_pass = false;  // gaps must shrink with delta
        prev_left = rec.left;
    }
    json stability = json::object();
    stability["records"] = std::move(stability_records);
    if (!config.stability_u2.empty()) {
        const StabilityRecord rec = check_stability(ensemble, config.solver, config.driver,
                                                    config.terminal, u1, config.stability_u2, mu0, mu0);
        stability["pair"] = record_json(rec);
        stability_pass = stability_pass && record_ok(rec);
    }
    stability["pass"] = stability_pass;
    (void)d;

    const bool all_pass = lipschitz.pass && uniqueness_pass && stability_pass;

    json doc = run_metadata(config);
    doc["lipschitz"] = {{"pass", lipschitz.pass},
                        {"trials", lipschitz.trials},
                        {"violations", lipschitz.violations},
                        {"worst_ratio", lipschitz.worst_ratio}};
    doc["uniqueness"] = {{"pass", uniqueness_pass},
                         {"conclusive", uniqueness.conclusive},
                         {"y_rms", uniqueness.y_rms},
                         {"z_rms", uniqueness.z_rms},
                         {"y_threshold", config.uniqueness_y_threshold},
                         {"z_threshold", config.uniqueness_z_threshold}};
    doc["stability"] = std::move(stability);
    doc["pass"] = all_pass;

    fs::create_directories(out_dir);
    write_text(out_dir / "verify.json", doc.dump(2) + "\n");
    return all_pass ? 0 : 1;
}

int run_study(const RunConfig& config, const fs::path& out_dir) {
    if (!config.measure_family)
        throw std::invalid_argument("config: study requires measure to be a family");
    const TimeGrid grid(config.horizon, config.steps);
    const BrownianEnsemble ensemble(grid, config.paths, config.measure_family->dim(), config.seed);

    const std::vector<Point> probes =
        config.study_probes.empty() ? std::vector<Point>{default_point(config)} : config.study_probes;

    const StudyResult study =
        convergence_study(*config.measure_family, config.study_atom_counts,
                          config.study_reference_atoms, config.driver, config.terminal, ensemble,
                          config.solver, probes);

    std::string csv = metadata_line(config);
    csv += "n,converged,terminal_gap_sq,max_node_flow_gap_sq,y_gap_sq,z_gap\n";
    for (const ConvergenceRecord& rec : study.records)
        csv += std::to_string(rec.atoms) + "," + (rec.converged ? "1" : "0") + "," +
               format_double(rec.terminal_gap_sq) + "," + format_double(rec.max_node_flow_gap_sq) +
               "," + format_double(rec.y_gap_sq) + "," + format_double(rec.z_gap) + "\n";
    if (!study.all_converged) csv += "# warning: partial results, at least one solve did not converge\n";

    fs::create_directories(out_dir);
    write_text(out_dir / "convergence.csv", csv);
    return (study.all_converged && study.premise_monotone && study.trend_ok) ? 0 : 1;
}

}  // namespace bsdei
