#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "prism/encoder.hpp"
#include "prism/topic_mining.hpp"

namespace prism {

// Topics in embedding-dimension order with their encoded summary (t),
// left indicator (l) and right indicator (r).
struct TopicIndex {
    std::vector<Topic> topics;
    std::vector<Vector> topic_vecs;
    std::vector<Vector> left_vecs;
    std::vector<Vector> right_vecs;

    std::size_t size() const { return topics.size(); }
    std::size_t dim() const { return topic_vecs.empty() ? 0 : topic_vecs.front().size(); }
};

struct ImportanceConfig {
    double lambda_importance = 0.8;
    std::size_t m = 10;
};

void validate(const ImportanceConfig& config, const TopicIndex& index);

TopicIndex build_index(const std::vector<Topic>& topics, const EncoderProvider& provider);

// Rebuilds an index from a topic store plus an embedding table holding
// "t:<id>", "l:<id>" and "r:<id>" rows.
TopicIndex index_from_table(const std::vector<Topic>& topics, const EmbeddingTable& table);
EmbeddingTable index_to_table(const TopicIndex& index);

// lambda * (x . t_i) + (1 - lambda) * |x . r_i - x . l_i|
double importance_score(std::span<const double> x, const TopicIndex& index, std::size_t i,
                        double lambda_importance);

// The m best positions, highest score first, ties to the lower position.
std::vector<std::size_t> top_m_topics(std::span<const double> x, const TopicIndex& index,
                                      const ImportanceConfig& config);

}  // namespace prism
