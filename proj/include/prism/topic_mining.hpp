#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "prism/corpus.hpp"
#include "prism/encoder.hpp"

namespace prism {

struct KMeansOptions {
    std::size_t k = 3000;
    std::uint64_t seed = 0;
    std::size_t max_iters = 100;
    // Worker threads for the assignment step. Results do not depend on it.
    std::size_t workers = 1;
};

struct ClusterAssignment {
    std::size_t k = 0;
    // ids[i] is the article behind labels[i]; empty when clustering bare vectors.
    std::vector<std::string> ids;
    std::vector<std::size_t> labels;
    std::vector<Vector> centroids;
    std::size_t iterations = 0;
    bool converged = false;
    // Sum of squared distances to the assigned centroid after every update.
    std::vector<double> objective_history;
};

// Lloyd's algorithm, k-means++ seeding, Euclidean distance.
ClusterAssignment kmeans(const std::vector<Vector>& vectors, const KMeansOptions& options);
ClusterAssignment kmeans(const std::vector<Vector>& vectors, std::size_t k, std::uint64_t seed,
                         std::size_t max_iters = 100);

double kmeans_objective(const std::vector<Vector>& vectors, const ClusterAssignment& assignment);

// Population variance of the ratings.
double bias_dispersion(const std::vector<int>& ratings);

struct ControversialCluster {
    std::size_t cluster_index = 0;
    std::vector<std::string> member_ids;  // sorted
    double dispersion = 0.0;

    std::size_t size() const { return member_ids.size(); }
};

// Clusters with dispersion > tau and at least p members, by dispersion
// descending then cluster index ascending.
std::vector<ControversialCluster> filter_controversial(const ClusterAssignment& assignment,
                                                       const Corpus& corpus, double tau,
                                                       std::size_t p);

struct Topic {
    int topic_id = 0;
    std::string summary;
    std::string left_indicator;
    std::string right_indicator;
    std::size_t source_cluster = 0;
};

struct SampledText {
    std::string id;
    std::string text;
    int rating = 0;
    BiasClass bias = BiasClass::Center;
};

struct GenerationRequest {
    std::size_t cluster_index = 0;
    std::string prompt;
    std::vector<SampledText> samples;
};

// Produces the "Topic: / Left Indicator: / Right Indicator:" reply for one
// cluster sample.
class IndicatorGenerator {
public:
    virtual ~IndicatorGenerator() = default;
    virtual std::string name() const = 0;
    // False when generate() must not be called from several threads at once.
    virtual bool concurrent() const { return true; }
    virtual std::string generate(const GenerationRequest& request) const = 0;
};

// Deterministic stand-in for an LLM. The topic is the most frequent
// non-stopword token in the sample; each indicator is the topic word plus the
// token whose count in that side's articles most exceeds its count in the
// other side's (ties to the lexicographically smallest).
class MockIndicatorGenerator final : public IndicatorGenerator {
public:
    std::string name() const override { return "mock"; }
    std::string generate(const GenerationRequest& request) const override;
};

// Offline LLM exchange: writes <dir>/<cluster>.prompt and reads the reply
// from <dir>/<cluster>.reply. A missing reply raises MissingInputError.
class FileExchangeGenerator final : public IndicatorGenerator {
public:
    explicit FileExchangeGenerator(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::string name() const override { return "file"; }
    std::string generate(const GenerationRequest& request) const override;

    std::filesystem::path prompt_path(std::size_t cluster) const;
    std::filesystem::path reply_path(std::size_t cluster) const;

private:
    std::filesystem::path dir_;
};

// Sample labels are written with the corpus scale's rating names.
std::string build_indicator_prompt(const std::vector<SampledText>& samples, Scale scale);

struct ParsedReply {
    std::string topic;
    std::string left_indicator;
    std::string right_indicator;
};
ParsedReply parse_indicator_reply(const std::string& reply);

std::vector<SampledText> sample_cluster(const ControversialCluster& cluster, const Corpus& corpus,
                                        std::size_t sample_size, std::uint64_t seed);

Topic extract_topic(const ControversialCluster& cluster, const Corpus& corpus,
                    std::size_t sample_size, std::uint64_t seed,
                    const IndicatorGenerator& generator, int topic_id = 0);

// JSONL stores. A leading {"_meta": ...} record is allowed and returned via meta_json.
void write_topics(std::ostream& out, const std::vector<Topic>& topics,
                  std::string_view meta_json = {});
std::vector<Topic> read_topics(std::istream& in, std::string* meta_json = nullptr);
void save_topics(const std::string& path, const std::vector<Topic>& topics,
                 std::string_view meta_json = {});
std::vector<Topic> load_topics(const std::string& path, std::string* meta_json = nullptr);

void write_clusters(std::ostream& out, const std::vector<ControversialCluster>& clusters,
                    std::string_view meta_json = {});
std::vector<ControversialCluster> read_clusters(std::istream& in, std::string* meta_json = nullptr);
void save_clusters(const std::string& path, const std::vector<ControversialCluster>& clusters,
                   std::string_view meta_json = {});
std::vector<ControversialCluster> load_clusters(const std::string& path,
                                                std::string* meta_json = nullptr);

}  // namespace prism
