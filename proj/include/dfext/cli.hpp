#pragma once
// Batch commands behind the dfext executable.  Every command reads a JSON run
// configuration, writes its artifacts into an output directory and returns an
// exit code: 0 pass, 1 invariant failure, 2 configuration error.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dfext::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kPass = 0, kInvariantFailure = 1, kConfigError = 2 };

/// Command-line flags that override configuration entries.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> quad_order;         // outer Gauss order per axis
    std::optional<std::string> simplex;    // flat | curvilinear
    std::optional<std::string> mode;       // l1 | w11
};

/// Validated run configuration.  Recognised keys:
///   domain          domain descriptor (required except for counterexample)
///   field           field descriptor (required except for counterexample)
///   mode            "l1" (default) or "w11"
///   mollify         radius of the mollifier applied to the field (0 = none)
///   extension       extension options (simplex, outer_order, simplex_degree, ...)
///   cover           {"interior_level", "exterior_level", "samples"}
///   grid            {"lo": [...], "hi": [...], "points": [...]}
///   norms           {"max_level"}: exterior depth of the extend summary norms
///   seed            random seed (mandatory when Monte Carlo is enabled)
///   verify          per-suite options
///   counterexample  {"gamma", "side", "n", "alpha", "p", "control_p", "s_min", "flux_points"}
struct RunConfig {
    nlohmann::json json;  // canonical form with overrides applied

    static RunConfig parse(const nlohmann::json& j, const Overrides& ov = {});
    static RunConfig load(const std::filesystem::path& path, const Overrides& ov = {});

    /// FNV-1a hash of the canonical JSON text.
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

struct CommandResult {
    int exit_code = kPass;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<std::filesystem::path> files;
};

/// Interior and exterior cover CSV dumps plus the invariant report.
CommandResult cmd_cover(const RunConfig& cfg, const std::filesystem::path& out);
/// extend.csv with columns x, y[, z], u1..un, region and extend_summary.json.
/// Grid points closer to the boundary than the finest cube level are written
/// as nan and counted as unresolved.
CommandResult cmd_extend(const RunConfig& cfg, const std::filesystem::path& out);
/// Suites: l1-core, w11-identities, cusp.  Writes verify_<suite>.json.
CommandResult cmd_verify(const std::string& suite, const RunConfig& cfg, const std::filesystem::path& out);

struct CounterexampleArgs {
    double gamma = 0.5;
    std::string side = "plus";
    int n = 2;
    std::optional<double> p;          // default: inside the window
    std::optional<double> alpha;      // default: centre of the window for p
    std::optional<double> control_p;  // default: an out-of-window p with a convergent integral
    double s_min = 1e-4;
    int flux_points = 25;

    static CounterexampleArgs from_json(const nlohmann::json& j);
};
/// Exponent window, flux table, lower-bound growth fit and control case.  Writes counterexample.json.
CommandResult cmd_counterexample(const CounterexampleArgs& args, const std::filesystem::path& out,
                                 const std::string& config_hash = "");

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace dfext::cli
