#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nlheat/config.hpp"

namespace nlheat {

const char* software_version();

struct StageStatus {
    std::string name;
    std::string status;  ///< "ok", or "error: <message>"
};

struct FileEntry {
    std::string path;  ///< relative to the output directory
    std::uintmax_t bytes = 0;
    std::string sha256;
};

struct RunManifest {
    std::string subcommand;
    std::string version;
    std::vector<std::pair<std::string, std::string>> config;
    double wall_clock_s = 0.0;
    std::vector<StageStatus> stages;
    /// Subcommand-specific results (verdict, s_star, residual_l2, ...).
    std::vector<std::pair<std::string, std::string>> results;
    std::vector<FileEntry> files;
    int exit_code = 0;
    std::string error;
};

const std::vector<std::string>& subcommand_names();

/// Runs one subcommand, writes its outputs and manifest.txt into
/// cfg.output_dir and returns the manifest. Errors are caught, recorded as a
/// failed stage and mapped to exit codes 1 (config), 2 (method) and 3
/// (numeric); outputs written before the failure stay in place.
RunManifest run_subcommand(const RunConfig& cfg, const std::string& name);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Flat key=value text: config.<key>, version, wall_clock_s, stage.<name>,
/// result.<key>, file.<path>.sha256 / .bytes, exit_code.
void write_manifest(std::ostream& os, const RunManifest& m);

}  // namespace nlheat
