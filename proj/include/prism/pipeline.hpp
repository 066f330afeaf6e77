#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prism/corpus.hpp"
#include "prism/encoder.hpp"

namespace prism {

// Every tunable of the pipeline. Defaults follow the reference
// hyperparameter table where it gives a value.
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    std::filesystem::path corpus_path;
    Scale scale = Scale::FivePoint;

    std::string encoder_provider = "mock";  // mock | file | remote
    std::size_t encoder_dim = 256;
    std::filesystem::path encoder_table;
    RemoteEndpoint encoder_endpoint;

    std::size_t clusters = 3000;
    double tau = 1.0;
    std::size_t min_cluster_size = 50;
    std::size_t max_iters = 100;

    std::string generator = "mock";  // mock | file
    std::size_t sample_size = 50;
    std::filesystem::path exchange_dir;

    double lambda_importance = 0.8;
    std::size_t m = 10;

    std::string scorer = "bilinear";  // bilinear | remote
    std::size_t negatives_per_article = 2;
    double learning_rate = 1e-6;
    std::size_t batch_size = 4;
    std::size_t epochs = 1;
    RemoteEndpoint scorer_endpoint{"127.0.0.1", 0, "/score", 30.0};

    std::size_t retrieval_k = 10;
    double lambda_retrieval = 0.5;
    double mu = 0.5;
    std::vector<double> mu_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t queries = 30;

    std::size_t classifier_epochs = 200;
    double classifier_learning_rate = 0.5;
    std::size_t classifier_batch = 16;
    double classifier_l2 = 0.0;
    double test_fraction = 0.1;
    std::filesystem::path predictions_path;

    // Explicit per-stage seeds; stages not listed derive theirs from `seed`.
    std::map<std::string, std::uint64_t> seeds;
};

// Parses the JSON configuration. Unknown keys are rejected, every field is
// validated, relative paths are resolved against base_dir.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
void validate(const PipelineConfig& config);
// Canonical JSON echo (sorted keys, resolved paths).
std::string config_to_json(const PipelineConfig& config);
// 16 hex digits over the canonical echo.
std::string config_hash(const PipelineConfig& config);
std::uint64_t stage_seed(const PipelineConfig& config, std::string_view stage);

const std::vector<std::string>& subcommands();

// Artifact names inside the output directory.
namespace artifacts {
inline constexpr const char* corpus = "corpus.jsonl";
inline constexpr const char* vectors = "corpus_vectors.tsv";
inline constexpr const char* clusters = "clusters.jsonl";
inline constexpr const char* topics = "topics.jsonl";
inline constexpr const char* index = "index_vectors.tsv";
inline constexpr const char* pairs = "weak_pairs.jsonl";
inline constexpr const char* checkpoint = "scorer.ckpt";
inline constexpr const char* embeddings = "embeddings.tsv";
inline constexpr const char* retrieval = "retrieval.jsonl";
inline constexpr const char* report = "report.json";
inline constexpr const char* frontier = "frontier.tsv";
}  // namespace artifacts

struct RunOptions {
    bool allow_mixed = false;
};

// Runs one stage; throws the library errors.
void run_stage(std::string_view name, const PipelineConfig& config,
               const std::filesystem::path& out_dir, const RunOptions& options, std::ostream& log);

// Exit status of a stage: 0 ok, 2 missing input, 3 validation, 4 provider,
// 1 anything else. Errors are reported on `err`.
int run_subcommand(std::string_view name, const PipelineConfig& config,
                   const std::filesystem::path& out_dir, const RunOptions& options,
                   std::ostream& log, std::ostream& err);

int exit_code_for(const std::exception& e);

}  // namespace prism
