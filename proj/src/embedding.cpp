#include "prism/embedding.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "detail.hpp"
#include "prism/error.hpp"

namespace prism {

std::size_t BiasEmbedding::nonzeros() const {
    std::size_t n = 0;
    for (const auto& [pos, v] : entries) n += v != 0.0;
    return n;
}

BiasEmbedding embed_article(const Article& article, const TopicIndex& index,
                            const AlignmentScorer& scorer, const ImportanceConfig& config,
                            const EncoderProvider& provider) {
    if (provider.dim() != index.dim())
        throw PreconditionError("encoder and topic index dimensions differ");
    const Vector x = provider.keyed_by_id() ? provider.encode_id(article.id)
                                            : provider.encode(article.text);
    BiasEmbedding e{article.id, index.size(), {}};
    for (std::size_t i : top_m_topics(x, index, config)) {
        const Topic& t = index.topics[i];
        try {
            const double right = scorer.score(article.text, t.right_indicator);
            const double left = scorer.score(article.text, t.left_indicator);
            e.entries[i] = right - left;
        } catch (const ProviderError& err) {
            throw ProviderError(std::string(err.what()) + " (topic position " + std::to_string(i) +
                                    ", article '" + article.id + "')",
                                err.retriable());
        }
    }
    return e;
}

BiasEmbedding embed_vector(const std::string& article_id, std::span<const double> x,
                           const TopicIndex& index, const BilinearScorer& scorer,
                           const ImportanceConfig& config) {
    if (scorer.dim() != index.dim())
        throw PreconditionError("scorer and topic index dimensions differ");
    BiasEmbedding e{article_id, index.size(), {}};
    for (std::size_t i : top_m_topics(x, index, config))
        e.entries[i] = scorer.score_vectors(x, index.right_vecs[i]) -
                       scorer.score_vectors(x, index.left_vecs[i]);
    return e;
}

double dot(const BiasEmbedding& a, const BiasEmbedding& b) {
    if (a.dims != b.dims)
        throw PreconditionError("bias embeddings differ in dimension count");
    double s = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            s += ia->second * ib->second;
            ++ia;
            ++ib;
        }
    }
    return s;
}

std::vector<double> densify(const BiasEmbedding& e) {
    std::vector<double> out(e.dims, 0.0);
    for (const auto& [pos, v] : e.entries) out.at(pos) = v;
    return out;
}

BiasEmbedding sparsify(const std::string& article_id, std::span<const double> dense) {
    BiasEmbedding e{article_id, dense.size(), {}};
    for (std::size_t i = 0; i < dense.size(); ++i)
        if (dense[i] != 0.0) e.entries.emplace(i, dense[i]);
    return e;
}

void write_embeddings(std::ostream& out, const EmbeddingFile& file) {
    out << "dims=" << file.dims << " m=" << file.m;
    if (!file.extra_header.empty()) out << ' ' << file.extra_header;
    out << '\n';
    for (const auto& e : file.embeddings) {
        out << e.article_id << '\t';
        bool first = true;
        for (const auto& [pos, v] : e.entries) {
            if (v == 0.0) continue;
            if (!first) out << ',';
            first = false;
            out << pos << ':' << detail::format_fixed(v, 6);
        }
        out << '\n';
    }
}

EmbeddingFile read_embeddings(std::istream& in) {
    EmbeddingFile file;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("embedding file is empty", 1);
    {
        unsigned long long dims = 0, m = 0;
        int consumed = 0;
        if (std::sscanf(line.c_str(), "dims=%llu m=%llu%n", &dims, &m, &consumed) != 2)
            throw ParseError("header must read 'dims=<D> m=<m>'", 1);
        file.dims = dims;
        file.m = m;
        std::string_view rest(line);
        rest.remove_prefix(static_cast<std::size_t>(consumed));
        while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
        file.extra_header = std::string(rest);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) throw ParseError("expected '<id>\\t<entries>'", line_no);
        BiasEmbedding e{line.substr(0, tab), file.dims, {}};
        std::string_view rest(line);
        rest.remove_prefix(tab + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const auto item = rest.substr(0, comma);
            const auto colon = item.find(':');
            double pos_d = 0.0;
            double v = 0.0;
            if (colon == std::string_view::npos || !detail::parse_double(item.substr(0, colon), pos_d) ||
                !detail::parse_double(item.substr(colon + 1), v))
                throw ParseError("bad embedding entry '" + std::string(item) + "'", line_no);
            if (pos_d < 0 || pos_d >= static_cast<double>(file.dims))
                throw ParseError("embedding position out of range", line_no);
            e.entries[static_cast<std::size_t>(pos_d)] = v;
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        file.embeddings.push_back(std::move(e));
    }
    return file;
}

void save_embeddings(const std::string& path, const EmbeddingFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_embeddings(out, file);
}

EmbeddingFile load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    return read_embeddings(in);
}

}  // namespace prism
