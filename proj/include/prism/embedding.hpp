#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "prism/corpus.hpp"
#include "prism/cross_encoder.hpp"
#include "prism/topic_index.hpp"

namespace prism {

// Sparse political-bias embedding over the topic dimensions. Positive values
// lean right, negative lean left; absent positions are exactly zero.
struct BiasEmbedding {
    std::string article_id;
    std::size_t dims = 0;
    std::map<std::size_t, double> entries;

    std::size_t nonzeros() const;
};

// e_i = f(a, right_i) - f(a, left_i) for the top-m topics of the article.
BiasEmbedding embed_article(const Article& article, const TopicIndex& index,
                            const AlignmentScorer& scorer, const ImportanceConfig& config,
                            const EncoderProvider& provider);

// Same assembly from a precomputed article vector, scoring against the
// index's cached indicator vectors.
BiasEmbedding embed_vector(const std::string& article_id, std::span<const double> x,
                           const TopicIndex& index, const BilinearScorer& scorer,
                           const ImportanceConfig& config);

double dot(const BiasEmbedding& a, const BiasEmbedding& b);

std::vector<double> densify(const BiasEmbedding& e);
// Keeps the nonzero coordinates.
BiasEmbedding sparsify(const std::string& article_id, std::span<const double> dense);

// "dims=<|M|> m=<m>[ extra]" header, then "<id>\t<pos>:<value>,..." with six
// decimals; exact zeros are not written.
struct EmbeddingFile {
    std::size_t dims = 0;
    std::size_t m = 0;
    std::string extra_header;
    std::vector<BiasEmbedding> embeddings;
};

void write_embeddings(std::ostream& out, const EmbeddingFile& file);
EmbeddingFile read_embeddings(std::istream& in);
void save_embeddings(const std::string& path, const EmbeddingFile& file);
EmbeddingFile load_embeddings(const std::string& path);

}  // namespace prism
