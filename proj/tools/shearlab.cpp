#include "shearlab/runner.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace shearlab;
    CLI::App app{"Shear-flow diffusion experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::vector<std::string> overrides;
    std::string out_dir;
    unsigned threads = 0;
    std::string config_path, manifest_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--set", overrides, "Override a config value, section.key=value")->take_all();
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--threads", threads, "Worker threads (0 = all cores)");
    };

    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
        add_common(sub);
    }
    auto* replay = app.add_subcommand("replay", "Re-run from a manifest.json");
    replay->add_option("manifest", manifest_path, "manifest.json from an earlier run")->required()->check(CLI::ExistingFile);
    add_common(replay);

    CLI11_PARSE(app, argc, argv);

    try {
        RunRequest req;
        if (replay->parsed()) {
            req = request_from_manifest(manifest_path);
        } else {
            req.subcommand = app.get_subcommands().front()->get_name();
            req.config = Config::load(config_path);
        }
        for (const auto& o : overrides) {
            req.config.set_override(o);
            req.overrides.push_back(o);
        }
        req.out_dir = out_dir;
        req.threads = threads;
        return run(req);
    } catch (const Error& e) {
        std::cerr << "shearlab: " << e.what() << "\n";
        return e.code();
    }
}
