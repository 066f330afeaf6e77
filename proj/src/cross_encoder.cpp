#include "prism/cross_encoder.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "prism/error.hpp"
#include "prism/random.hpp"
#include "prism/text.hpp"

namespace prism {

using nlohmann::json;

std::string_view to_string(Side side) {
    return side == Side::LeftIndicator ? "left" : "right";
}

std::string_view to_string(Origin origin) {
    return origin == Origin::InCluster ? "in_cluster" : "out_of_cluster";
}

double weak_label(BiasClass bias, Side side, Origin origin) {
    if (origin == Origin::OutOfCluster) return 0.0;
    if (bias == BiasClass::Left && side == Side::LeftIndicator) return 1.0;
    if (bias == BiasClass::Right && side == Side::RightIndicator) return 1.0;
    return 0.0;
}

std::vector<WeakPair> generate_weak_labels(const Corpus& corpus,
                                           const std::vector<ControversialCluster>& clusters,
                                           const std::vector<Topic>& topics,
                                           std::size_t negatives_per_article, std::uint64_t seed) {
    std::unordered_map<std::size_t, const Topic*> topic_of_cluster;
    for (const auto& t : topics) {
        if (!topic_of_cluster.emplace(t.source_cluster, &t).second)
            throw ValidationError("cluster " + std::to_string(t.source_cluster) +
                                  " has more than one topic");
    }
    std::unordered_map<std::string_view, std::size_t> cluster_of;
    for (const auto& c : clusters) {
        if (!topic_of_cluster.contains(c.cluster_index))
            throw ValidationError("cluster " + std::to_string(c.cluster_index) + " has no topic");
        for (const auto& id : c.member_ids) cluster_of.emplace(id, c.cluster_index);
    }
    if (topic_of_cluster.size() != clusters.size())
        throw ValidationError("topics and controversial clusters do not correspond one-to-one");

    Rng rng(seed);
    std::vector<WeakPair> pairs;
    std::vector<const Topic*> others;
    for (const auto& a : corpus.articles) {
        const auto it = cluster_of.find(a.id);
        if (it == cluster_of.end()) continue;
        const BiasClass bias = rating_to_class(a.rating, corpus.scale);
        const Topic& own = *topic_of_cluster.at(it->second);
        for (Side side : {Side::LeftIndicator, Side::RightIndicator})
            pairs.push_back({a.id, own.topic_id, side, weak_label(bias, side, Origin::InCluster),
                             Origin::InCluster});

        others.clear();
        for (const auto& t : topics)
            if (t.source_cluster != own.source_cluster) others.push_back(&t);
        const std::size_t take = std::min(negatives_per_article, others.size());
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(others.size() - i));
            std::swap(others[i], others[j]);
            for (Side side : {Side::LeftIndicator, Side::RightIndicator})
                pairs.push_back({a.id, others[i]->topic_id, side,
                                 weak_label(bias, side, Origin::OutOfCluster),
                                 Origin::OutOfCluster});
        }
    }
    return pairs;
}

// --- weak pair files -------------------------------------------------------

void write_weak_pairs(std::ostream& out, const std::vector<WeakPair>& pairs,
                      std::string_view meta_json) {
    if (!meta_json.empty()) out << "{\"_meta\":" << meta_json << "}\n";
    for (const auto& p : pairs) {
        json rec = {{"article_id", p.article_id},
                    {"topic_id", p.topic_id},
                    {"side", to_string(p.side)},
                    {"label", p.label},
                    {"origin", to_string(p.origin)}};
        out << rec.dump() << '\n';
    }
}

std::vector<WeakPair> read_weak_pairs(std::istream& in, std::string* meta_json) {
    std::vector<WeakPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const json rec = json::parse(line);
            if (first && rec.contains("_meta")) {
                if (meta_json) *meta_json = rec["_meta"].dump();
                first = false;
                continue;
            }
            first = false;
            WeakPair p;
            p.article_id = rec.at("article_id").get<std::string>();
            p.topic_id = rec.at("topic_id").get<int>();
            const auto side = rec.at("side").get<std::string>();
            const auto origin = rec.at("origin").get<std::string>();
            if (side != "left" && side != "right") throw ParseError("bad side '" + side + "'", line_no);
            if (origin != "in_cluster" && origin != "out_of_cluster")
                throw ParseError("bad origin '" + origin + "'", line_no);
            p.side = side == "left" ? Side::LeftIndicator : Side::RightIndicator;
            p.origin = origin == "in_cluster" ? Origin::InCluster : Origin::OutOfCluster;
            p.label = rec.at("label").get<double>();
            if (p.label != 0.0 && p.label != 1.0) throw ParseError("label must be 0 or 1", line_no);
            pairs.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad weak pair record: ") + e.what(), line_no);
        }
    }
    return pairs;
}

void save_weak_pairs(const std::string& path, const std::vector<WeakPair>& pairs,
                     std::string_view meta_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_weak_pairs(out, pairs, meta_json);
}

std::vector<WeakPair> load_weak_pairs(const std::string& path, std::string* meta_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    return read_weak_pairs(in, meta_json);
}

// --- bilinear scorer -------------------------------------------------------

double open_sigmoid(double z) {
    static const double kHigh = std::nextafter(1.0, 0.0);
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(s, DBL_MIN, kHigh);
}

BilinearScorer::BilinearScorer(std::size_t dim, std::shared_ptr<const EncoderProvider> provider)
    : dim_(dim), W_(dim * dim, 0.0), u_(dim, 0.0), v_(dim, 0.0), provider_(std::move(provider)) {
    if (dim == 0) throw PreconditionError("scorer dimension must be positive");
    if (provider_ && provider_->dim() != dim)
        throw PreconditionError("scorer dim does not match the encoder dim");
}

void BilinearScorer::set_provider(std::shared_ptr<const EncoderProvider> provider) {
    if (provider && provider->dim() != dim_)
        throw PreconditionError("scorer dim does not match the encoder dim");
    provider_ = std::move(provider);
}

double BilinearScorer::logit(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != dim_ || b.size() != dim_)
        throw PreconditionError("scorer input has the wrong dimension");
    double z = c_;
    for (std::size_t i = 0; i < dim_; ++i) {
        if (a[i] == 0.0) continue;
        const double* row = &W_[i * dim_];
        double wb = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) wb += row[j] * b[j];
        z += a[i] * (wb + u_[i]);
    }
    for (std::size_t j = 0; j < dim_; ++j) z += v_[j] * b[j];
    return z;
}

double BilinearScorer::score_vectors(std::span<const double> a, std::span<const double> b) const {
    return open_sigmoid(logit(a, b));
}

double BilinearScorer::score(std::string_view article_text, std::string_view indicator_text) const {
    if (!provider_) throw PreconditionError("bilinear scorer has no encoder attached");
    if (text::trim(article_text).empty() || text::trim(indicator_text).empty())
        throw PreconditionError("cannot score empty text");
    return score_vectors(provider_->encode(article_text), provider_->encode(indicator_text));
}

std::vector<double> BilinearScorer::parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    p.insert(p.end(), W_.begin(), W_.end());
    p.insert(p.end(), u_.begin(), u_.end());
    p.insert(p.end(), v_.begin(), v_.end());
    p.push_back(c_);
    return p;
}

void BilinearScorer::set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw PreconditionError("wrong parameter count");
    const std::size_t dd = dim_ * dim_;
    std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(dd), W_.begin());
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(dd),
              p.begin() + static_cast<std::ptrdiff_t>(dd + dim_), u_.begin());
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(dd + dim_),
              p.begin() + static_cast<std::ptrdiff_t>(dd + 2 * dim_), v_.begin());
    c_ = p.back();
}

double pair_loss(const BilinearScorer& scorer, std::span<const double> a,
                 std::span<const double> b, double label) {
    const double e = scorer.score_vectors(a, b) - label;
    return e * e;
}

namespace {

// d(loss)/d(logit) for the squared error through the sigmoid.
double logit_gradient(double s, double label) { return 2.0 * (s - label) * s * (1.0 - s); }

}  // namespace

std::vector<double> pair_gradient(const BilinearScorer& scorer, std::span<const double> a,
                                  std::span<const double> b, double label) {
    const std::size_t d = scorer.dim();
    const double g = logit_gradient(scorer.score_vectors(a, b), label);
    std::vector<double> grad(scorer.parameter_count(), 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) grad[i * d + j] = g * a[i] * b[j];
    for (std::size_t i = 0; i < d; ++i) {
        grad[d * d + i] = g * a[i];
        grad[d * d + d + i] = g * b[i];
    }
    grad.back() = g;
    return grad;
}

double gradient_check(const BilinearScorer& scorer, std::span<const double> a,
                      std::span<const double> b, double label, double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
        throw PreconditionError("gradient check epsilon must lie in [1e-7, 1e-3]");
    const auto analytic = pair_gradient(scorer, a, b, label);
    BilinearScorer probe = scorer;
    auto params = probe.parameters();
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = params[k];
        params[k] = saved + epsilon;
        probe.set_parameters(params);
        const double up = pair_loss(probe, a, b, label);
        params[k] = saved - epsilon;
        probe.set_parameters(params);
        const double down = pair_loss(probe, a, b, label);
        params[k] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
    }
    return worst;
}

namespace {

const Topic& find_topic(const std::vector<Topic>& topics, int topic_id) {
    for (const auto& t : topics)
        if (t.topic_id == topic_id) return t;
    throw LookupError("no topic with id " + std::to_string(topic_id));
}

const Article& find_article(const Corpus& corpus, std::string_view id) {
    for (const auto& a : corpus.articles)
        if (a.id == id) return a;
    throw LookupError("no article with id '" + std::string(id) + "'");
}

}  // namespace

double gradient_check(const BilinearScorer& scorer, const WeakPair& pair, const Corpus& corpus,
                      const std::vector<Topic>& topics, double epsilon) {
    if (!scorer.provider()) throw PreconditionError("bilinear scorer has no encoder attached");
    const Topic& t = find_topic(topics, pair.topic_id);
    const Article& a = find_article(corpus, pair.article_id);
    const auto av = scorer.provider()->encode(a.text);
    const auto bv = scorer.provider()->encode(pair.side == Side::LeftIndicator ? t.left_indicator
                                                                               : t.right_indicator);
    return gradient_check(scorer, av, bv, pair.label, epsilon);
}

// --- training --------------------------------------------------------------

namespace {

struct SparseVec {
    std::vector<std::size_t> idx;
    std::vector<double> val;
};

SparseVec sparsify(const Vector& v) {
    SparseVec s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) {
            s.idx.push_back(i);
            s.val.push_back(v[i]);
        }
    }
    return s;
}

// Same value as BilinearScorer::logit but touching only nonzero coordinates.
double sparse_logit(const BilinearScorer& s, const SparseVec& a, const SparseVec& b) {
    const auto W = s.weights();
    const std::size_t d = s.dim();
    double z = s.c();
    for (std::size_t p = 0; p < a.idx.size(); ++p) {
        const std::size_t i = a.idx[p];
        double wb = 0.0;
        for (std::size_t q = 0; q < b.idx.size(); ++q) wb += W[i * d + b.idx[q]] * b.val[q];
        z += a.val[p] * (wb + s.u()[i]);
    }
    for (std::size_t q = 0; q < b.idx.size(); ++q) z += s.v()[b.idx[q]] * b.val[q];
    return z;
}

double sparse_mean_loss(const BilinearScorer& s, const std::vector<SparseVec>& vecs,
                        const TrainingSet& set) {
    double total = 0.0;
    for (const auto& ex : set.examples) {
        const double e = open_sigmoid(sparse_logit(s, vecs[ex.article], vecs[ex.indicator])) - ex.label;
        total += e * e;
    }
    return total / static_cast<double>(set.examples.size());
}

}  // namespace

double mean_loss(const BilinearScorer& scorer, const TrainingSet& set) {
    if (set.examples.empty()) throw PreconditionError("empty training set");
    std::vector<SparseVec> vecs;
    vecs.reserve(set.vectors.size());
    for (const auto& v : set.vectors) vecs.push_back(sparsify(v));
    return sparse_mean_loss(scorer, vecs, set);
}

TrainResult train(const BilinearScorer& scorer, const TrainingSet& set, const TrainConfig& config) {
    if (set.examples.empty()) throw PreconditionError("cannot train on an empty pair list");
    if (!(config.learning_rate > 0.0)) throw PreconditionError("learning rate must be positive");
    if (config.batch_size < 1) throw PreconditionError("batch size must be positive");
    for (const auto& v : set.vectors)
        if (v.size() != scorer.dim()) throw PreconditionError("training vector has the wrong dimension");
    for (const auto& ex : set.examples)
        if (ex.article >= set.vectors.size() || ex.indicator >= set.vectors.size())
            throw PreconditionError("training example refers to a missing vector");

    TrainResult result{scorer, 0.0, {}};
    BilinearScorer& s = result.scorer;
    std::vector<SparseVec> vecs;
    vecs.reserve(set.vectors.size());
    for (const auto& v : set.vectors) vecs.push_back(sparsify(v));
    result.initial_loss = sparse_mean_loss(s, vecs, set);

    const std::size_t d = s.dim();
    const std::size_t n = set.examples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> batch_g;
    Rng rng(config.seed);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            // Gradients are taken at the pre-step parameters for the whole batch.
            batch_g.clear();
            for (std::size_t k = start; k < end; ++k) {
                const auto& ex = set.examples[order[k]];
                const double sig = open_sigmoid(sparse_logit(s, vecs[ex.article], vecs[ex.indicator]));
                const double g = logit_gradient(sig, ex.label);
                if (!std::isfinite(g)) throw TrainingError("non-finite gradient", step);
                batch_g.push_back(g);
            }
            const double scale = config.learning_rate / static_cast<double>(end - start);
            auto W = s.weights();
            bool finite = true;
            for (std::size_t k = start; k < end; ++k) {
                const auto& ex = set.examples[order[k]];
                const SparseVec& a = vecs[ex.article];
                const SparseVec& b = vecs[ex.indicator];
                const double g = scale * batch_g[k - start];
                for (std::size_t p = 0; p < a.idx.size(); ++p) {
                    const std::size_t i = a.idx[p];
                    const double ga = g * a.val[p];
                    for (std::size_t q = 0; q < b.idx.size(); ++q) {
                        double& w = W[i * d + b.idx[q]];
                        w -= ga * b.val[q];
                        finite = finite && std::isfinite(w);
                    }
                    s.u()[i] -= ga;
                    finite = finite && std::isfinite(s.u()[i]);
                }
                for (std::size_t q = 0; q < b.idx.size(); ++q) {
                    s.v()[b.idx[q]] -= g * b.val[q];
                    finite = finite && std::isfinite(s.v()[b.idx[q]]);
                }
                s.c() -= g;
                finite = finite && std::isfinite(s.c());
            }
            if (!finite) throw TrainingError("parameter overflow", step);
            ++step;
        }
        const double loss = sparse_mean_loss(s, vecs, set);
        if (!std::isfinite(loss)) throw TrainingError("non-finite loss", step);
        result.loss_history.push_back(loss);
    }
    return result;
}

TrainingSet make_training_set(const std::vector<WeakPair>& pairs, const std::vector<Topic>& topics,
                              const Corpus& corpus, const EncoderProvider& provider) {
    TrainingSet set;
    std::unordered_map<std::string, std::size_t> slot;
    auto intern = [&](const std::string& key, auto&& make) {
        const auto it = slot.find(key);
        if (it != slot.end()) return it->second;
        set.vectors.push_back(make());
        slot.emplace(key, set.vectors.size() - 1);
        return set.vectors.size() - 1;
    };
    std::unordered_map<std::string_view, const Article*> articles;
    for (const auto& a : corpus.articles) articles.emplace(a.id, &a);
    std::unordered_map<int, const Topic*> by_id;
    for (const auto& t : topics) by_id.emplace(t.topic_id, &t);

    const bool by_key = provider.keyed_by_id();
    for (const auto& p : pairs) {
        const auto ai = articles.find(p.article_id);
        if (ai == articles.end()) throw LookupError("weak pair names unknown article '" + p.article_id + "'");
        const auto ti = by_id.find(p.topic_id);
        if (ti == by_id.end())
            throw LookupError("weak pair names unknown topic " + std::to_string(p.topic_id));
        const Article& a = *ai->second;
        const Topic& t = *ti->second;
        const std::size_t av = intern("a:" + a.id, [&] {
            return by_key ? provider.encode_id(a.id) : provider.encode(a.text);
        });
        const bool left = p.side == Side::LeftIndicator;
        const std::string key = std::string(left ? "l:" : "r:") + std::to_string(t.topic_id);
        const std::size_t bv = intern(key, [&] {
            return by_key ? provider.encode_id(key)
                          : provider.encode(left ? t.left_indicator : t.right_indicator);
        });
        set.examples.push_back({av, bv, p.label});
    }
    return set;
}

TrainResult train(const BilinearScorer& scorer, const std::vector<WeakPair>& pairs,
                  const std::vector<Topic>& topics, const Corpus& corpus,
                  const TrainConfig& config) {
    if (pairs.empty()) throw PreconditionError("cannot train on an empty pair list");
    if (!scorer.provider()) throw PreconditionError("bilinear scorer has no encoder attached");
    return train(scorer, make_training_set(pairs, topics, corpus, *scorer.provider()), config);
}

// --- checkpoints -----------------------------------------------------------

namespace {

void write_row(std::ostream& out, std::span<const double> row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) out << ',';
        out << detail::format_double(row[j]);
    }
    out << '\n';
}

std::vector<double> read_row(std::istream& in, std::size_t expect, std::size_t& line_no) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("checkpoint ended early", line_no + 1);
    ++line_no;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        double x = 0.0;
        if (!detail::parse_double(rest.substr(0, comma), x))
            throw ParseError("bad number in checkpoint", line_no);
        row.push_back(x);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    if (row.size() != expect)
        throw ParseError("checkpoint row has " + std::to_string(row.size()) + " values, expected " +
                             std::to_string(expect),
                         line_no);
    return row;
}

}  // namespace

void write_checkpoint(std::ostream& out, const BilinearScorer& scorer,
                      std::string_view extra_header) {
    const std::size_t d = scorer.dim();
    out << "dim=" << d;
    if (!extra_header.empty()) out << ' ' << extra_header;
    out << '\n';
    const auto W = scorer.weights();
    for (std::size_t i = 0; i < d; ++i) write_row(out, W.subspan(i * d, d));
    write_row(out, scorer.u());
    write_row(out, scorer.v());
    out << detail::format_double(scorer.c()) << '\n';
}

BilinearScorer read_checkpoint(std::istream& in, std::string* extra_header) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("dim=", 0) != 0)
        throw ParseError("checkpoint must start with dim=<D>", 1);
    const auto space = header.find(' ');
    const std::string dim_str = header.substr(4, space == std::string::npos ? std::string::npos : space - 4);
    double dim_d = 0.0;
    if (!detail::parse_double(dim_str, dim_d) || dim_d < 1 || dim_d != std::floor(dim_d))
        throw ParseError("bad checkpoint dimension '" + dim_str + "'", 1);
    if (extra_header) *extra_header = space == std::string::npos ? "" : header.substr(space + 1);
    const auto d = static_cast<std::size_t>(dim_d);
    BilinearScorer s(d);
    std::size_t line_no = 1;
    auto W = s.weights();
    for (std::size_t i = 0; i < d; ++i) {
        const auto row = read_row(in, d, line_no);
        std::copy(row.begin(), row.end(), W.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    s.u() = read_row(in, d, line_no);
    s.v() = read_row(in, d, line_no);
    s.c() = read_row(in, 1, line_no).front();
    return s;
}

void save_checkpoint(const std::string& path, const BilinearScorer& scorer,
                     std::string_view extra_header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_checkpoint(out, scorer, extra_header);
}

BilinearScorer load_checkpoint(const std::string& path, std::string* extra_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    return read_checkpoint(in, extra_header);
}

// --- remote ----------------------------------------------------------------

std::vector<double> RemoteScorer::score_batch(
    const std::vector<std::pair<std::string, std::string>>& pairs) const {
    json body = {{"pairs", json::array()}};
    for (const auto& [a, b] : pairs) body["pairs"].push_back({a, b});
    const auto reply = detail::post_json(endpoint_.host, endpoint_.port, endpoint_.path, body,
                                         endpoint_.timeout_seconds);
    if (!reply.is_object() || !reply.contains("scores") || !reply["scores"].is_array() ||
        reply["scores"].size() != pairs.size())
        throw ProviderError("scorer reply lacks one score per pair", false);
    std::vector<double> out;
    for (const auto& x : reply["scores"]) {
        if (!x.is_number()) throw ProviderError("scorer returned a non-numeric score", false);
        const double s = x.get<double>();
        if (!(s > 0.0 && s < 1.0)) throw ProviderError("scorer returned a score outside (0, 1)", false);
        out.push_back(s);
    }
    return out;
}

double RemoteScorer::score(std::string_view article_text, std::string_view indicator_text) const {
    if (text::trim(article_text).empty() || text::trim(indicator_text).empty())
        throw PreconditionError("cannot score empty text");
    return score_batch({{std::string(article_text), std::string(indicator_text)}}).front();
}

}  // namespace prism
