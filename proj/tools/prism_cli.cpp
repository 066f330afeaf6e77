#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "prism/error.hpp"
#include "prism/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"prism: political-bias embeddings, diversified retrieval and evaluation"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    bool allow_mixed = false;
    bool quiet = false;

    for (const auto& name : prism::subcommands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " stage");
        sub->add_option("--config", config_path, "pipeline configuration (JSON)")->required();
        sub->add_option("--seed", seed, "override the top-level seed");
        sub->add_option("--out-dir", out_dir, "artifact directory")->capture_default_str();
        sub->add_flag("--quiet", quiet, "suppress progress output");
        if (name == "evaluate")
            sub->add_flag("--allow-mixed", allow_mixed, "accept inputs produced by different configurations");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();

    prism::PipelineConfig config;
    try {
        config = prism::load_config(config_path);
        if (seed) config.seed = *seed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return prism::exit_code_for(e);
    }
    std::ostream null_stream(nullptr);
    return prism::run_subcommand(name, config, out_dir, {allow_mixed}, quiet ? null_stream : std::clog,
                                 std::cerr);
}
