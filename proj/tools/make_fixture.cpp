// Writes the planted-topic corpus used by the end-to-end tests.
#include <iostream>

#include <CLI11.hpp>

#include "prism/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"write the planted-topic fixture corpus"};
    std::string out = "planted_600.jsonl";
    prism::PlantedOptions opts;
    app.add_option("-o,--out", out, "output path")->capture_default_str();
    app.add_option("--seed", opts.seed, "fixture seed")->capture_default_str();
    app.add_option("--topics", opts.topics, "number of planted topics")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    try {
        const auto planted = prism::make_planted_corpus(opts);
        prism::save_corpus(out, planted.corpus);
        std::cout << planted.corpus.size() << " articles -> " << out << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
