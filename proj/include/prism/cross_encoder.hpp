#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "prism/corpus.hpp"
#include "prism/encoder.hpp"
#include "prism/topic_mining.hpp"

namespace prism {

enum class Side { LeftIndicator, RightIndicator };
enum class Origin { InCluster, OutOfCluster };

std::string_view to_string(Side side);
std::string_view to_string(Origin origin);

struct WeakPair {
    std::string article_id;
    int topic_id = 0;
    Side side = Side::LeftIndicator;
    double label = 0.0;
    Origin origin = Origin::InCluster;
};

// 1 when the pair is in-cluster and the article's class matches the
// indicator side; 0 otherwise (Center articles and out-of-cluster topics
// are always 0).
double weak_label(BiasClass bias, Side side, Origin origin);

// For every article of a controversial cluster: its two in-cluster pairs,
// then two zero-labelled pairs for each of `negatives_per_article` distinct
// out-of-cluster topics drawn without replacement (clamped to the number of
// other topics). Articles outside the clusters produce nothing.
std::vector<WeakPair> generate_weak_labels(const Corpus& corpus,
                                           const std::vector<ControversialCluster>& clusters,
                                           const std::vector<Topic>& topics,
                                           std::size_t negatives_per_article, std::uint64_t seed);

void write_weak_pairs(std::ostream& out, const std::vector<WeakPair>& pairs,
                      std::string_view meta_json = {});
std::vector<WeakPair> read_weak_pairs(std::istream& in, std::string* meta_json = nullptr);
void save_weak_pairs(const std::string& path, const std::vector<WeakPair>& pairs,
                     std::string_view meta_json = {});
std::vector<WeakPair> load_weak_pairs(const std::string& path, std::string* meta_json = nullptr);

// f(a, b) in the open interval (0, 1).
class AlignmentScorer {
public:
    virtual ~AlignmentScorer() = default;
    virtual std::string name() const = 0;
    virtual double score(std::string_view article_text, std::string_view indicator_text) const = 0;
};

// Logistic sigmoid kept strictly inside (0, 1): saturated values are pinned
// to the nearest representable doubles short of the bounds.
double open_sigmoid(double z);

// Reference scorer over frozen encoder embeddings:
//   f(a, b) = sigmoid(phi(a)^T W phi(b) + u . phi(a) + v . phi(b) + c)
class BilinearScorer final : public AlignmentScorer {
public:
    // All parameters start at zero, so every pair scores exactly 0.5.
    explicit BilinearScorer(std::size_t dim,
                            std::shared_ptr<const EncoderProvider> provider = nullptr);

    std::string name() const override { return "bilinear"; }
    double score(std::string_view article_text, std::string_view indicator_text) const override;

    double logit(std::span<const double> a, std::span<const double> b) const;
    double score_vectors(std::span<const double> a, std::span<const double> b) const;

    std::size_t dim() const { return dim_; }
    const std::shared_ptr<const EncoderProvider>& provider() const { return provider_; }
    void set_provider(std::shared_ptr<const EncoderProvider> provider);

    // Flat parameter layout: W row-major, then u, v, c.
    std::size_t parameter_count() const { return dim_ * dim_ + 2 * dim_ + 1; }
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> params);

    double w(std::size_t i, std::size_t j) const { return W_[i * dim_ + j]; }
    double& w(std::size_t i, std::size_t j) { return W_[i * dim_ + j]; }
    std::vector<double>& u() { return u_; }
    std::vector<double>& v() { return v_; }
    double& c() { return c_; }
    const std::vector<double>& u() const { return u_; }
    const std::vector<double>& v() const { return v_; }
    double c() const { return c_; }

    // Row-major W.
    std::span<double> weights() { return W_; }
    std::span<const double> weights() const { return W_; }

private:
    std::size_t dim_;
    std::vector<double> W_;
    std::vector<double> u_;
    std::vector<double> v_;
    double c_ = 0.0;
    std::shared_ptr<const EncoderProvider> provider_;
};

// Gradient of (f(a, b) - label)^2 in the flat parameter layout.
std::vector<double> pair_gradient(const BilinearScorer& scorer, std::span<const double> a,
                                  std::span<const double> b, double label);
double pair_loss(const BilinearScorer& scorer, std::span<const double> a,
                 std::span<const double> b, double label);

// Max relative error between pair_gradient and central differences over every
// parameter. The relative error of a component is |g - g_fd| / max(|g|, |g_fd|, 1e-6).
double gradient_check(const BilinearScorer& scorer, std::span<const double> a,
                      std::span<const double> b, double label, double epsilon);
// Resolves the pair's texts through the corpus/topics and the scorer's provider.
double gradient_check(const BilinearScorer& scorer, const WeakPair& pair, const Corpus& corpus,
                      const std::vector<Topic>& topics, double epsilon);

struct TrainConfig {
    double learning_rate = 1e-6;
    std::size_t batch_size = 4;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    std::size_t negatives_per_article = 2;
};

// Labelled (article vector, indicator vector) examples, vectors stored once.
struct TrainingSet {
    struct Example {
        std::size_t article = 0;
        std::size_t indicator = 0;
        double label = 0.0;
    };
    std::vector<Vector> vectors;
    std::vector<Example> examples;
};

struct TrainResult {
    BilinearScorer scorer;
    double initial_loss = 0.0;
    // Mean squared error over the whole set after each epoch.
    std::vector<double> loss_history;
};

double mean_loss(const BilinearScorer& scorer, const TrainingSet& set);

// Mini-batch gradient descent on the mean squared error: seeded shuffle per
// epoch, plain steps of size learning_rate.
TrainResult train(const BilinearScorer& scorer, const TrainingSet& set, const TrainConfig& config);

// Encodes the pairs' article texts and indicator texts with the scorer's provider.
TrainingSet make_training_set(const std::vector<WeakPair>& pairs, const std::vector<Topic>& topics,
                              const Corpus& corpus, const EncoderProvider& provider);

TrainResult train(const BilinearScorer& scorer, const std::vector<WeakPair>& pairs,
                  const std::vector<Topic>& topics, const Corpus& corpus,
                  const TrainConfig& config);

// Checkpoint: "dim=<D>" header, D lines of W rows, then u, v and c.
void write_checkpoint(std::ostream& out, const BilinearScorer& scorer,
                      std::string_view extra_header = {});
BilinearScorer read_checkpoint(std::istream& in, std::string* extra_header = nullptr);
void save_checkpoint(const std::string& path, const BilinearScorer& scorer,
                     std::string_view extra_header = {});
BilinearScorer load_checkpoint(const std::string& path, std::string* extra_header = nullptr);

// External cross-encoder: POSTs {"pairs": [[a, b], ...]} and expects
// {"scores": [...]} with every score strictly inside (0, 1).
class RemoteScorer final : public AlignmentScorer {
public:
    explicit RemoteScorer(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string name() const override { return "remote"; }
    double score(std::string_view article_text, std::string_view indicator_text) const override;
    std::vector<double> score_batch(
        const std::vector<std::pair<std::string, std::string>>& pairs) const;

private:
    RemoteEndpoint endpoint_;
};

}  // namespace prism
