#include "prism/topic_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "prism/error.hpp"

namespace prism {

void validate(const ImportanceConfig& config, const TopicIndex& index) {
    if (!(config.lambda_importance >= 0.0 && config.lambda_importance <= 1.0))
        throw PreconditionError("lambda_importance must lie in [0, 1]");
    if (config.m < 1) throw PreconditionError("m must be >= 1");
    if (config.m > index.size())
        throw PreconditionError("m=" + std::to_string(config.m) + " exceeds the " +
                                std::to_string(index.size()) + " indexed topics");
}

TopicIndex build_index(const std::vector<Topic>& topics, const EncoderProvider& provider) {
    if (topics.empty()) throw PreconditionError("cannot index an empty topic list");
    TopicIndex index;
    index.topics = topics;
    for (const auto& t : topics) {
        index.topic_vecs.push_back(provider.encode(t.summary));
        index.left_vecs.push_back(provider.encode(t.left_indicator));
        index.right_vecs.push_back(provider.encode(t.right_indicator));
    }
    return index;
}

TopicIndex index_from_table(const std::vector<Topic>& topics, const EmbeddingTable& table) {
    if (topics.empty()) throw PreconditionError("cannot index an empty topic list");
    std::unordered_map<std::string, const Vector*> rows;
    for (std::size_t i = 0; i < table.ids.size(); ++i) rows.emplace(table.ids[i], &table.vectors[i]);
    auto get = [&](char kind, int id) {
        const std::string key = std::string(1, kind) + ":" + std::to_string(id);
        const auto it = rows.find(key);
        if (it == rows.end()) throw LookupError("index table lacks row '" + key + "'");
        return *it->second;
    };
    TopicIndex index;
    index.topics = topics;
    for (const auto& t : topics) {
        index.topic_vecs.push_back(get('t', t.topic_id));
        index.left_vecs.push_back(get('l', t.topic_id));
        index.right_vecs.push_back(get('r', t.topic_id));
    }
    return index;
}

EmbeddingTable index_to_table(const TopicIndex& index) {
    EmbeddingTable table;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const std::string id = std::to_string(index.topics[i].topic_id);
        table.add("t:" + id, index.topic_vecs[i]);
        table.add("l:" + id, index.left_vecs[i]);
        table.add("r:" + id, index.right_vecs[i]);
    }
    return table;
}

double importance_score(std::span<const double> x, const TopicIndex& index, std::size_t i,
                        double lambda_importance) {
    if (i >= index.size()) throw PreconditionError("topic position out of range");
    if (x.size() != index.dim())
        throw PreconditionError("article vector has dim " + std::to_string(x.size()) +
                                ", index has " + std::to_string(index.dim()));
    const double relevance = dot(x, index.topic_vecs[i]);
    const double divergence = std::abs(dot(x, index.right_vecs[i]) - dot(x, index.left_vecs[i]));
    return lambda_importance * relevance + (1.0 - lambda_importance) * divergence;
}

std::vector<std::size_t> top_m_topics(std::span<const double> x, const TopicIndex& index,
                                      const ImportanceConfig& config) {
    validate(config, index);
    const std::size_t n = index.size();
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i)
        scores[i] = importance_score(x, index, i, config.lambda_importance);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.m),
                      order.end(), better);
    order.resize(config.m);
    return order;
}

}  // namespace prism
