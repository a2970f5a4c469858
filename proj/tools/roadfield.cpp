#include <roadfield/cli_io.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"road-field principal eigenvalues and dynamics"};
    app.set_version_flag("--version", std::string(ROADFIELD_VERSION_STRING));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    bool quiet = false;
    for (const auto& name : roadfield::subcommand_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides outputs.directory)");
        sub->add_flag("--quiet", quiet, "suppress the text summary");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    roadfield::RunConfig config;
    try {
        config = roadfield::load_config(config_path);
    } catch (const roadfield::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    return roadfield::run_subcommand(name, config, {out_dir, quiet});
}
