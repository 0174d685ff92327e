#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlheat/classify.hpp"
#include "nlheat/conditions.hpp"
#include "nlheat/flow.hpp"
#include "nlheat/threshold.hpp"

namespace nlheat {

/// Flat dotted key -> raw value, as read from a config file and flags.
using RawConfig = std::map<std::string, std::string>;

/// Reads `key = value` lines; '#' starts a comment, blank lines are skipped.
/// Throws ConfigError on a missing file, a line without '=', or a key given
/// twice.
RawConfig read_config_file(const std::filesystem::path& path);

/// Parses "KEY=VALUE" into `raw`, replacing any earlier value.
void apply_override(RawConfig& raw, const std::string& assignment);

/// Run-level choices that are not part of the problem or the solvers.
struct RunSettings {
    std::string u0 = "e1";        ///< e1, random or file:PATH
    double u0_scale = 1.0;
    std::string u0_norm = "l2";   ///< the shape is normalized in this norm (l2, h1, none)
    std::string direction = "e1"; ///< ray direction, always normalized to |v|_H1 = 1
    double T_end = 1.0;           ///< simulate horizon
    int trace_stride = 1;
    int snapshot_stride = 0;      ///< simulate field dumps every k steps, 0 for none
    double steady_gate = 1e-8;    ///< residual gate for a successful steady run
    double oracle_t_end = 0.05;
    double oracle_dt = 1e-4;
    int oracle_n_sub = 200;
};

/// Everything a subcommand needs, fully resolved.
struct RunConfig {
    std::string preset;
    ProblemSpec spec;
    StepperConfig stepper;
    ClassifierConfig classifier;
    ThresholdConfig threshold;
    SamplePlan verify;
    RunSettings run;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";
    /// Every known key with its resolved value, in key order.
    std::vector<std::pair<std::string, std::string>> echo;
};

/// Validates `raw` against the known keys, injects defaults (problem keys
/// default to the preset's values) and builds the typed configuration.
/// Throws ConfigError naming the offending key.
RunConfig resolve_config(const RawConfig& raw);

/// File values, then --preset, --set, --seed and --out in that order.
RunConfig parse_config(const std::optional<std::filesystem::path>& file, const std::optional<std::string>& preset,
                       const std::vector<std::string>& sets, const std::optional<std::uint64_t>& seed,
                       const std::optional<std::filesystem::path>& out);

/// Known keys in order, for help output.
std::vector<std::string> config_keys();

/// Initial datum from cfg.run (u0, u0_scale, u0_norm) on cfg.spec.domain.
GridFunction make_initial_datum(const RunConfig& cfg);
/// Ray direction from cfg.run.direction with |v|_H1 = 1.
GridFunction make_direction(const RunConfig& cfg);

}  // namespace nlheat
