// Command-line front end: one subcommand per invocation.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "nlheat/config.hpp"
#include "nlheat/errors.hpp"
#include "nlheat/runner.hpp"

namespace {

struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> preset;
    std::vector<std::string> sets;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "Config file of KEY = VALUE lines")->check(CLI::ExistingFile);
    sub->add_option("--preset", f.preset, "Problem preset: example1, example2, cubic, heat");
    sub->add_option("--set", f.sets, "Override a config key, KEY=VALUE (repeatable)")->take_all();
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--seed", f.seed, "Seed for random fields and the M-hat restarts");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal semilinear heat flow: simulation, classification, threshold and steady states"};
    app.set_version_flag("--version", nlheat::software_version());
    Flags flags;
    bool list_keys = false;
    app.add_flag("--list-keys", list_keys, "Print the known config keys and exit");
    for (const std::string& name : nlheat::subcommand_names()) add_flags(app.add_subcommand(name), flags);
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
        if (!list_keys && app.get_subcommands().empty()) throw CLI::RequiredError("A subcommand");
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(nlheat::ErrorKind::Config);
    }
    if (list_keys) {
        for (const std::string& k : nlheat::config_keys()) std::cout << k << '\n';
        return 0;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    nlheat::RunConfig cfg;
    try {
        std::optional<std::filesystem::path> file, out;
        if (flags.config) file = *flags.config;
        if (flags.out) out = *flags.out;
        cfg = nlheat::parse_config(file, flags.preset, flags.sets, flags.seed, out);
    } catch (const nlheat::Error& e) {
        std::cerr << "nlheat: config error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    }

    const nlheat::RunManifest m = nlheat::run_subcommand(cfg, name);
    for (const auto& [k, v] : m.results) std::cout << k << '=' << v << '\n';
    std::cout << "manifest=" << (cfg.output_dir / "manifest.txt").string() << '\n';
    if (m.exit_code != 0) std::cerr << "nlheat: " << name << " failed: " << m.error << '\n';
    return m.exit_code;
}
