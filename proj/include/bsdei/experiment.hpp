#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bsdei/analysis.hpp"
#include "bsdei/driver.hpp"
#include "bsdei/measure.hpp"
#include "bsdei/solver.hpp"
#include "bsdei/stochastic.hpp"

namespace bsdei {

// Fully validated run configuration, parsed from the JSON config document.
// Field names in error messages follow the document paths (e.g. "solver.ridge").
struct RunConfig {
    static constexpr int kSchemaVersion = 1;

    std::uint64_t seed = 1;
    double horizon = 1.0;
    std::size_t steps = 64;
    std::size_t paths = 2048;

    // Initial measure: either a family to quantize or explicit atoms.
    std::optional<MeasureFamily> measure_family;
    std::size_t measure_atoms = 8;
    std::optional<DiscreteMeasure> measure_explicit;

    DriverSpec driver = DriverSpec::zero();
    TerminalField terminal = TerminalField::identity();
    SolverConfig solver;

    // study
    std::vector<std::size_t> study_atom_counts = {8, 16, 32, 64};
    std::size_t study_reference_atoms = 128;
    std::vector<Point> study_probes;

    // verify
    std::size_t lipschitz_trials = 1000;
    Point stability_u1, stability_u2;
    std::vector<double> stability_deltas = {0.2, 0.1, 0.05};
    double uniqueness_y_threshold = 1e-3;
    double uniqueness_z_threshold = 5e-3;

    std::string output_dir = "out";

    // Parses and validates; throws std::invalid_argument naming the offending
    // field.  The input must carry schema_version = 1.
    static RunConfig parse_file(const std::filesystem::path& path);
    static RunConfig parse_json_text(const std::string& text);

    // Canonical serialized form of the effective settings (excludes the output
    // directory and any execution hints) and its FNV-1a hash; the hash is
    // stamped into every artifact.
    std::string canonical() const;
    std::string config_hash() const;

    DiscreteMeasure initial_measure() const;
};

// Subcommand drivers.  Each validates, runs, and only then writes artifacts
// into `out_dir` (created if missing).  Return value is the process exit code:
// 0 on success (and, for solve, convergence; for verify, all checks passing;
// for study, premise + trend holding), nonzero otherwise.
int run_solve(const RunConfig& config, const std::filesystem::path& out_dir);
int run_verify(const RunConfig& config, const std::filesystem::path& out_dir);
int run_study(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace bsdei
