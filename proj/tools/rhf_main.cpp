#include "rhf/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Reduced Hartree-Fock dielectric response of insulating crystals"};
    app.set_version_flag("--version", std::string("rhf ") + rhf::kVersion);
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    for (const std::string& name : rhf::command_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "config file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
        sub->add_option("--override", overrides, "section.key=value, repeatable");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    rhf::RunConfig cfg;
    try {
        if (!out_dir.empty()) overrides.push_back("output.directory=" + out_dir);
        cfg = rhf::parse_config(config_path, overrides);
    } catch (const rhf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << "[rhf] " << rhf::kVersion << " " << command << " config_hash " << rhf::config_hash(cfg) << " threads "
              << rhf::thread_count() << "\n";
    return rhf::run_command(command, cfg, std::cerr);
}
