#include "prism/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "prism/cross_encoder.hpp"
#include "prism/embedding.hpp"
#include "prism/error.hpp"
#include "prism/eval.hpp"
#include "prism/random.hpp"
#include "prism/retrieval.hpp"
#include "prism/topic_index.hpp"
#include "prism/topic_mining.hpp"

#ifndef PRISM_COMMIT
#define PRISM_COMMIT "unknown"
#endif

namespace prism {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kStageSeeds = {"encoder", "mining",   "generation", "labels",
                                              "training", "queries", "split",      "classifier"};

// Reads one JSON object section, remembering which keys were consumed so the
// rest can be reported as unknown.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ValidationError("config section '" + name_ + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError("config key '" + where(key) + "' has the wrong type");
        }
    }

    void get_path(const char* key, fs::path& out, const fs::path& base) {
        std::string s;
        get(key, s);
        if (!s.empty()) {
            fs::path p(s);
            out = fs::absolute(p.is_absolute() ? p : base / p).lexically_normal();
        }
    }

    std::optional<Section> sub(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return Section(j_.at(key), where(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ValidationError("unknown config key '" + where(key.c_str()) + "'");
    }

private:
    std::string where(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

void read_endpoint(Section& s, RemoteEndpoint& e) {
    s.get("host", e.host);
    s.get("port", e.port);
    s.get("path", e.path);
    s.get("timeout_seconds", e.timeout_seconds);
}

json endpoint_json(const RemoteEndpoint& e) {
    return {{"host", e.host}, {"port", e.port}, {"path", e.path}, {"timeout_seconds", e.timeout_seconds}};
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("invalid config: " + what);
}

}  // namespace

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig c;
    Section root(j, "");
    root.get("seed", c.seed);
    root.get("workers", c.workers);
    if (auto s = root.sub("corpus")) {
        s->get_path("path", c.corpus_path, base_dir);
        std::string scale = std::string(to_string(c.scale));
        s->get("scale", scale);
        try {
            c.scale = parse_scale(scale);
        } catch (const Error& e) {
            throw ValidationError(e.what());
        }
        s->finish();
    }
    if (auto s = root.sub("encoder")) {
        s->get("provider", c.encoder_provider);
        s->get("dim", c.encoder_dim);
        s->get_path("table", c.encoder_table, base_dir);
        read_endpoint(*s, c.encoder_endpoint);
        s->finish();
    }
    if (auto s = root.sub("mining")) {
        s->get("k", c.clusters);
        s->get("tau", c.tau);
        s->get("p", c.min_cluster_size);
        s->get("max_iters", c.max_iters);
        s->finish();
    }
    if (auto s = root.sub("generation")) {
        s->get("provider", c.generator);
        s->get("sample_size", c.sample_size);
        s->get_path("exchange_dir", c.exchange_dir, base_dir);
        s->finish();
    }
    if (auto s = root.sub("index")) {
        s->get("lambda_importance", c.lambda_importance);
        s->get("m", c.m);
        s->finish();
    }
    if (auto s = root.sub("scorer")) {
        s->get("provider", c.scorer);
        s->get("negatives_per_article", c.negatives_per_article);
        s->get("learning_rate", c.learning_rate);
        s->get("batch_size", c.batch_size);
        s->get("epochs", c.epochs);
        read_endpoint(*s, c.scorer_endpoint);
        s->finish();
    }
    if (auto s = root.sub("retrieval")) {
        s->get("k", c.retrieval_k);
        s->get("lambda", c.lambda_retrieval);
        s->get("mu", c.mu);
        s->get("mu_values", c.mu_values);
        s->get("queries", c.queries);
        s->finish();
    }
    if (auto s = root.sub("classifier")) {
        s->get("epochs", c.classifier_epochs);
        s->get("learning_rate", c.classifier_learning_rate);
        s->get("batch_size", c.classifier_batch);
        s->get("l2", c.classifier_l2);
        s->get("test_fraction", c.test_fraction);
        s->get_path("predictions", c.predictions_path, base_dir);
        s->finish();
    }
    if (auto s = root.sub("seeds")) {
        for (const auto& name : kStageSeeds) {
            if (!j.at("seeds").contains(name)) continue;
            std::uint64_t x = 0;
            s->get(name.c_str(), x);
            c.seeds[name] = x;
        }
        s->finish();
    }
    root.finish();
    validate(c);
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

void validate(const PipelineConfig& c) {
    require(c.workers >= 1, "workers must be >= 1");
    require(!c.corpus_path.empty(), "corpus.path is required");
    require(c.encoder_provider == "mock" || c.encoder_provider == "file" ||
                c.encoder_provider == "remote",
            "encoder.provider must be mock, file or remote");
    require(c.encoder_dim >= 8, "encoder.dim must be >= 8");
    require(c.encoder_provider != "file" || !c.encoder_table.empty(),
            "encoder.table is required for the file provider");
    require(c.encoder_provider != "remote" || c.encoder_endpoint.port > 0,
            "encoder.port is required for the remote provider");
    require(c.clusters >= 1, "mining.k must be >= 1");
    require(c.tau >= 0.0, "mining.tau must be >= 0");
    require(c.min_cluster_size >= 1, "mining.p must be >= 1");
    require(c.max_iters >= 1, "mining.max_iters must be >= 1");
    require(c.generator == "mock" || c.generator == "file", "generation.provider must be mock or file");
    require(c.generator != "file" || !c.exchange_dir.empty(),
            "generation.exchange_dir is required for the file provider");
    require(c.sample_size >= 1, "generation.sample_size must be >= 1");
    require(c.lambda_importance >= 0.0 && c.lambda_importance <= 1.0,
            "index.lambda_importance must lie in [0, 1]");
    require(c.m >= 1, "index.m must be >= 1");
    require(c.scorer == "bilinear" || c.scorer == "remote", "scorer.provider must be bilinear or remote");
    require(c.scorer != "remote" || c.scorer_endpoint.port > 0,
            "scorer.port is required for the remote provider");
    require(c.learning_rate > 0.0, "scorer.learning_rate must be > 0");
    require(c.batch_size >= 1, "scorer.batch_size must be >= 1");
    require(c.retrieval_k >= 1, "retrieval.k must be >= 1");
    require(c.lambda_retrieval >= 0.0 && c.lambda_retrieval <= 1.0, "retrieval.lambda must lie in [0, 1]");
    require(c.mu > 0.0 && c.mu < 1.0, "retrieval.mu must lie in (0, 1)");
    require(!c.mu_values.empty(), "retrieval.mu_values must not be empty");
    for (double mu : c.mu_values) require(mu > 0.0 && mu < 1.0, "retrieval.mu_values must lie in (0, 1)");
    require(c.queries >= 1, "retrieval.queries must be >= 1");
    require(c.classifier_learning_rate > 0.0, "classifier.learning_rate must be > 0");
    require(c.classifier_batch >= 1, "classifier.batch_size must be >= 1");
    require(c.classifier_l2 >= 0.0, "classifier.l2 must be >= 0");
    require(c.test_fraction > 0.0 && c.test_fraction < 1.0, "classifier.test_fraction must lie in (0, 1)");
}

std::string config_to_json(const PipelineConfig& c) {
    json seeds = json::object();
    for (const auto& [k, v] : c.seeds) seeds[k] = v;
    json j = {
        {"seed", c.seed},
        {"workers", c.workers},
        {"corpus", {{"path", c.corpus_path.generic_string()}, {"scale", std::string(to_string(c.scale))}}},
        {"encoder", endpoint_json(c.encoder_endpoint)},
        {"mining", {{"k", c.clusters}, {"tau", c.tau}, {"p", c.min_cluster_size}, {"max_iters", c.max_iters}}},
        {"generation", {{"provider", c.generator}, {"sample_size", c.sample_size},
                        {"exchange_dir", c.exchange_dir.generic_string()}}},
        {"index", {{"lambda_importance", c.lambda_importance}, {"m", c.m}}},
        {"scorer", endpoint_json(c.scorer_endpoint)},
        {"retrieval", {{"k", c.retrieval_k}, {"lambda", c.lambda_retrieval}, {"mu", c.mu},
                       {"mu_values", c.mu_values}, {"queries", c.queries}}},
        {"classifier", {{"epochs", c.classifier_epochs}, {"learning_rate", c.classifier_learning_rate},
                        {"batch_size", c.classifier_batch}, {"l2", c.classifier_l2},
                        {"test_fraction", c.test_fraction},
                        {"predictions", c.predictions_path.generic_string()}}},
        {"seeds", seeds},
    };
    j["encoder"]["provider"] = c.encoder_provider;
    j["encoder"]["dim"] = c.encoder_dim;
    j["encoder"]["table"] = c.encoder_table.generic_string();
    j["scorer"]["provider"] = c.scorer;
    j["scorer"]["negatives_per_article"] = c.negatives_per_article;
    j["scorer"]["learning_rate"] = c.learning_rate;
    j["scorer"]["batch_size"] = c.batch_size;
    j["scorer"]["epochs"] = c.epochs;
    return j.dump();
}

std::string config_hash(const PipelineConfig& config) {
    // workers never changes results, so it stays out of the hash
    PipelineConfig c = config;
    c.workers = 1;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(hash_bytes(config_to_json(c), 0x5052495300000000ULL)));
    return buf;
}

std::uint64_t stage_seed(const PipelineConfig& config, std::string_view stage) {
    if (auto it = config.seeds.find(std::string(stage)); it != config.seeds.end()) return it->second;
    return mix64(config.seed ^ hash_bytes(stage));
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {
        "ingest", "embed-corpus", "mine-topics", "build-index", "gen-labels",
        "train-scorer", "embed", "retrieve", "evaluate", "sweep"};
    return names;
}

namespace {

struct Ctx {
    const PipelineConfig& config;
    fs::path out;
    RunOptions options;
    std::ostream& log;
    std::string hash;

    std::string path(const char* name) const { return (out / name).string(); }

    std::string meta(std::string_view stage) const {
        json m = {{"config_hash", hash}, {"stage", std::string(stage)}};
        return m.dump();
    }
};

std::unique_ptr<EncoderProvider> make_encoder(const PipelineConfig& c) {
    if (c.encoder_provider == "mock") return mock_encoder(c.encoder_dim, stage_seed(c, "encoder"));
    if (c.encoder_provider == "file") return file_encoder(c.encoder_table.string());
    return std::make_unique<RemoteEncoder>(c.encoder_endpoint, c.encoder_dim);
}

Corpus read_stage_corpus(const Ctx& ctx) {
    return load_corpus(ctx.path(artifacts::corpus), ctx.config.scale);
}

std::string hash_from_meta(const std::string& meta_json) {
    if (meta_json.empty()) return {};
    const json m = json::parse(meta_json);
    return m.value("config_hash", std::string());
}

std::string hash_from_header(std::string_view extra) {
    std::istringstream ss{std::string(extra)};
    std::string tok;
    while (ss >> tok)
        if (tok.rfind("config=", 0) == 0) return tok.substr(7);
    return {};
}

std::string hex_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    std::stringstream ss;
    ss << in.rdbuf();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_bytes(ss.str())));
    return buf;
}

// Vectors of the corpus articles, in corpus order.
std::vector<Vector> corpus_vectors(const Corpus& corpus, const EmbeddingTable& table) {
    std::vector<Vector> out;
    out.reserve(corpus.size());
    for (const auto& a : corpus.articles) {
        const Vector* v = table.find(a.id);
        if (!v) throw LookupError("article '" + a.id + "' has no vector in " + artifacts::vectors);
        out.push_back(*v);
    }
    return out;
}

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw MissingInputError(path);
}

void stage_ingest(const Ctx& ctx) {
    Corpus corpus = load_corpus(ctx.config.corpus_path.string(), ctx.config.scale);
    save_corpus(ctx.path(artifacts::corpus), corpus, ctx.meta("ingest"));
    ctx.log << "ingest: " << corpus.size() << " articles\n";
}

void stage_embed_corpus(const Ctx& ctx) {
    const Corpus corpus = read_stage_corpus(ctx);
    const auto enc = make_encoder(ctx.config);
    EmbeddingTable table;
    table.dim = enc->dim();
    table.header["config"] = ctx.hash;
    table.header["encoder"] = enc->name();
    if (enc->keyed_by_id()) {
        for (const auto& a : corpus.articles) table.add(a.id, enc->encode_id(a.id));
    } else {
        constexpr std::size_t kBatch = 64;
        for (std::size_t start = 0; start < corpus.size(); start += kBatch) {
            std::vector<std::string> texts;
            const std::size_t end = std::min(corpus.size(), start + kBatch);
            for (std::size_t i = start; i < end; ++i) texts.push_back(corpus.articles[i].text);
            auto vecs = enc->encode_batch(texts);
            for (std::size_t i = start; i < end; ++i)
                table.add(corpus.articles[i].id, std::move(vecs[i - start]));
        }
    }
    save_embedding_table(ctx.path(artifacts::vectors), table);
    ctx.log << "embed-corpus: " << table.ids.size() << " vectors of dim " << table.dim << "\n";
}

void stage_mine_topics(const Ctx& ctx) {
    const auto& c = ctx.config;
    const Corpus corpus = read_stage_corpus(ctx);
    const EmbeddingTable table = load_embedding_table(ctx.path(artifacts::vectors));
    KMeansOptions opts;
    opts.k = c.clusters;
    opts.seed = stage_seed(c, "mining");
    opts.max_iters = c.max_iters;
    opts.workers = c.workers;
    ClusterAssignment assignment = kmeans(corpus_vectors(corpus, table), opts);
    for (const auto& a : corpus.articles) assignment.ids.push_back(a.id);
    const auto clusters = filter_controversial(assignment, corpus, c.tau, c.min_cluster_size);
    ctx.log << "mine-topics: " << assignment.iterations << " k-means iterations, "
            << clusters.size() << " of " << c.clusters << " clusters pass the filter\n";
    save_clusters(ctx.path(artifacts::clusters), clusters, ctx.meta("mine-topics"));

    std::unique_ptr<IndicatorGenerator> gen;
    if (c.generator == "file")
        gen = std::make_unique<FileExchangeGenerator>(c.exchange_dir);
    else
        gen = std::make_unique<MockIndicatorGenerator>();
    const std::uint64_t seed = stage_seed(c, "generation");
    std::vector<Topic> topics;
    std::optional<MissingInputError> missing;
    std::size_t missing_count = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        try {
            topics.push_back(extract_topic(clusters[i], corpus, c.sample_size, seed, *gen,
                                           static_cast<int>(i)));
        } catch (const MissingInputError& e) {
            // keep going so every prompt of the batch gets written
            if (!missing) missing.emplace(e);
            ++missing_count;
        }
    }
    if (missing) {
        ctx.log << "mine-topics: " << missing_count << " replies missing in "
                << c.exchange_dir.string() << "\n";
        throw *missing;
    }
    save_topics(ctx.path(artifacts::topics), topics, ctx.meta("mine-topics"));
}

void stage_build_index(const Ctx& ctx) {
    const auto topics = load_topics(ctx.path(artifacts::topics));
    TopicIndex index;
    if (ctx.config.encoder_provider == "file")
        index = index_from_table(topics, load_embedding_table(ctx.config.encoder_table.string()));
    else
        index = build_index(topics, *make_encoder(ctx.config));
    EmbeddingTable table = index_to_table(index);
    table.header["config"] = ctx.hash;
    save_embedding_table(ctx.path(artifacts::index), table);
    ctx.log << "build-index: " << index.size() << " topics\n";
}

void stage_gen_labels(const Ctx& ctx) {
    const Corpus corpus = read_stage_corpus(ctx);
    const auto clusters = load_clusters(ctx.path(artifacts::clusters));
    const auto topics = load_topics(ctx.path(artifacts::topics));
    const auto pairs = generate_weak_labels(corpus, clusters, topics,
                                            ctx.config.negatives_per_article,
                                            stage_seed(ctx.config, "labels"));
    save_weak_pairs(ctx.path(artifacts::pairs), pairs, ctx.meta("gen-labels"));
    ctx.log << "gen-labels: " << pairs.size() << " weak pairs\n";
}

void stage_train_scorer(const Ctx& ctx) {
    const auto& c = ctx.config;
    if (c.scorer != "bilinear")
        throw ValidationError("train-scorer needs scorer.provider = bilinear (got '" + c.scorer + "')");
    const Corpus corpus = read_stage_corpus(ctx);
    const auto topics = load_topics(ctx.path(artifacts::topics));
    const auto pairs = load_weak_pairs(ctx.path(artifacts::pairs));
    EmbeddingTable merged = load_embedding_table(ctx.path(artifacts::vectors));
    const EmbeddingTable index = load_embedding_table(ctx.path(artifacts::index));
    if (index.dim != merged.dim) throw ValidationError("index and corpus vectors differ in dimension");
    for (std::size_t i = 0; i < index.ids.size(); ++i) merged.add(index.ids[i], index.vectors[i]);
    const FileEncoder provider(std::move(merged));
    const TrainingSet set = make_training_set(pairs, topics, corpus, provider);
    TrainConfig tc;
    tc.learning_rate = c.learning_rate;
    tc.batch_size = c.batch_size;
    tc.epochs = c.epochs;
    tc.seed = stage_seed(c, "training");
    tc.negatives_per_article = c.negatives_per_article;
    const TrainResult r = train(BilinearScorer(provider.dim()), set, tc);
    save_checkpoint(ctx.path(artifacts::checkpoint), r.scorer, "config=" + ctx.hash);
    ctx.log << "train-scorer: " << set.examples.size() << " examples, loss "
            << detail::format_fixed(r.initial_loss, 6) << " -> "
            << detail::format_fixed(r.loss_history.empty() ? r.initial_loss : r.loss_history.back(), 6)
            << "\n";
}

void stage_embed(const Ctx& ctx) {
    const auto& c = ctx.config;
    const Corpus corpus = read_stage_corpus(ctx);
    const auto topics = load_topics(ctx.path(artifacts::topics));
    const TopicIndex index = index_from_table(topics, load_embedding_table(ctx.path(artifacts::index)));
    EmbeddingTable vectors = load_embedding_table(ctx.path(artifacts::vectors));
    const ImportanceConfig ic{c.lambda_importance, c.m};
    validate(ic, index);

    EmbeddingFile file;
    file.dims = index.size();
    file.m = c.m;
    file.extra_header = "config=" + ctx.hash;
    if (c.scorer == "bilinear") {
        const BilinearScorer scorer = load_checkpoint(ctx.path(artifacts::checkpoint));
        const auto xs = corpus_vectors(corpus, vectors);
        for (std::size_t i = 0; i < corpus.size(); ++i)
            file.embeddings.push_back(embed_vector(corpus.articles[i].id, xs[i], index, scorer, ic));
    } else {
        const RemoteScorer scorer(c.scorer_endpoint);
        const FileEncoder provider(std::move(vectors));
        for (const auto& a : corpus.articles)
            file.embeddings.push_back(embed_article(a, index, scorer, ic, provider));
    }
    save_embeddings(ctx.path(artifacts::embeddings), file);
    ctx.log << "embed: " << file.embeddings.size() << " embeddings over " << file.dims << " topics\n";
}

struct RetrievalSetup {
    std::vector<DualSpaceItem> pool;
    std::vector<std::string> query_ids;
    std::vector<Vector> queries;
};

// Query articles are a seeded sample of the corpus; the rest, in corpus
// order, form the pool.
RetrievalSetup retrieval_setup(const Ctx& ctx) {
    const auto& c = ctx.config;
    const Corpus corpus = read_stage_corpus(ctx);
    const EmbeddingTable table = load_embedding_table(ctx.path(artifacts::vectors));
    const EmbeddingFile emb = load_embeddings(ctx.path(artifacts::embeddings));
    if (c.queries >= corpus.size())
        throw ValidationError("retrieval.queries must be smaller than the corpus");
    std::map<std::string, const BiasEmbedding*> by_id;
    for (const auto& e : emb.embeddings) by_id[e.article_id] = &e;

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(stage_seed(c, "queries"));
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<bool> is_query(corpus.size(), false);
    std::vector<std::size_t> query_idx(order.begin(), order.begin() + static_cast<long>(c.queries));
    std::sort(query_idx.begin(), query_idx.end());
    for (std::size_t i : query_idx) is_query[i] = true;

    const auto xs = corpus_vectors(corpus, table);
    RetrievalSetup s;
    for (std::size_t i : query_idx) {
        s.query_ids.push_back(corpus.articles[i].id);
        s.queries.push_back(xs[i]);
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (is_query[i]) continue;
        const auto& a = corpus.articles[i];
        auto it = by_id.find(a.id);
        if (it == by_id.end()) throw LookupError("article '" + a.id + "' has no bias embedding");
        s.pool.push_back(DualSpaceItem{a.id, xs[i], densify(*it->second), a.rating});
    }
    if (s.pool.size() < c.retrieval_k)
        throw ValidationError("retrieval pool smaller than retrieval.k");
    return s;
}

void stage_retrieve(const Ctx& ctx) {
    const auto& c = ctx.config;
    const auto setup = retrieval_setup(ctx);
    const RetrievalConfig rc{c.retrieval_k, c.lambda_retrieval, c.mu};
    std::ofstream out(ctx.path(artifacts::retrieval), std::ios::binary);
    if (!out) throw Error("cannot write " + ctx.path(artifacts::retrieval));
    out << "{\"_meta\":" << ctx.meta("retrieve") << "}\n";
    for (std::size_t q = 0; q < setup.queries.size(); ++q) {
        const auto r = greedy_dkmips(setup.pool, setup.queries[q], rc);
        json rec = {{"query_id", setup.query_ids[q]},
                    {"ids", r.ids},
                    {"sim", r.sim},
                    {"div", r.div},
                    {"f", r.f},
                    {"config", {{"k", rc.k}, {"lambda", rc.lambda_retrieval}, {"mu", rc.mu}}}};
        out << rec.dump() << '\n';
    }
    ctx.log << "retrieve: " << setup.queries.size() << " queries over a pool of "
            << setup.pool.size() << "\n";
}

void stage_sweep(const Ctx& ctx) {
    const auto& c = ctx.config;
    const auto setup = retrieval_setup(ctx);
    const RetrievalConfig rc{c.retrieval_k, c.lambda_retrieval, c.mu};
    const auto rows = frontier_sweep(setup.pool, setup.queries, c.mu_values, rc, c.workers);
    std::ofstream out(ctx.path(artifacts::frontier), std::ios::binary);
    if (!out) throw Error("cannot write " + ctx.path(artifacts::frontier));
    write_frontier(out, rows,
                   "# config=" + ctx.hash + " k=" + std::to_string(rc.k) +
                       " lambda=" + detail::format_double(rc.lambda_retrieval) +
                       " queries=" + std::to_string(setup.queries.size()) +
                       " pool=" + std::to_string(setup.pool.size()));
    ctx.log << "sweep: " << rows.size() << " mu values\n";
}

json report_json(const ClassificationReport& r) {
    return {{"classes", r.classes},
            {"accuracy", r.accuracy},
            {"precision_macro", r.precision_macro},
            {"recall_macro", r.recall_macro},
            {"f1_macro", r.f1_macro},
            {"f1_micro", r.f1_micro},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"support", r.support},
            {"confusion", r.confusion},
            {"undefined_precision", r.undefined_precision},
            {"undefined_recall", r.undefined_recall}};
}

// "<id>\t<label>" lines.
std::map<std::string, int> load_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    std::map<std::string, int> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        double v = 0.0;
        if (tab == std::string::npos || !detail::parse_double(std::string_view(line).substr(tab + 1), v) ||
            v != static_cast<int>(v))
            throw ParseError("expected '<id>\\t<integer label>'", line_no);
        out[line.substr(0, tab)] = static_cast<int>(v);
    }
    return out;
}

void stage_evaluate(const Ctx& ctx) {
    const auto& c = ctx.config;
    std::string corpus_meta;
    const Corpus corpus = load_corpus(ctx.path(artifacts::corpus), c.scale, &corpus_meta);
    const EmbeddingTable table = load_embedding_table(ctx.path(artifacts::vectors));
    const EmbeddingFile emb = load_embeddings(ctx.path(artifacts::embeddings));

    // provenance check across the inputs
    std::map<std::string, std::string> input_hashes = {
        {artifacts::corpus, hash_from_meta(corpus_meta)},
        {artifacts::vectors, table.header.count("config") ? table.header.at("config") : ""},
        {artifacts::embeddings, hash_from_header(emb.extra_header)}};
    std::set<std::string> distinct;
    for (const auto& [name, h] : input_hashes) distinct.insert(h);
    if (distinct.size() > 1 && !ctx.options.allow_mixed) {
        std::string detail;
        for (const auto& [name, h] : input_hashes)
            detail += " " + name + "=" + (h.empty() ? "<none>" : h);
        throw ValidationError("inputs come from different configurations:" + detail +
                              " (pass --allow-mixed to evaluate anyway)");
    }

    std::map<std::string, const BiasEmbedding*> by_id;
    for (const auto& e : emb.embeddings) by_id[e.article_id] = &e;
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < corpus.size(); ++i) position[corpus.articles[i].id] = i;
    const auto xs = corpus_vectors(corpus, table);

    const auto parts = split_corpus(corpus, {1.0 - c.test_fraction, c.test_fraction}, stage_seed(c, "split"));
    if (parts[1].empty()) throw ValidationError("test split is empty; raise classifier.test_fraction");

    ClassifierConfig cc;
    cc.epochs = c.classifier_epochs;
    cc.learning_rate = c.classifier_learning_rate;
    cc.batch = c.classifier_batch;
    cc.l2 = c.classifier_l2;
    cc.seed = stage_seed(c, "classifier");

    auto features = [&](const Corpus& part, bool prism) {
        std::vector<std::vector<double>> X;
        for (const auto& a : part.articles) {
            if (prism) {
                auto it = by_id.find(a.id);
                if (it == by_id.end()) throw LookupError("article '" + a.id + "' has no bias embedding");
                X.push_back(densify(*it->second));
            } else {
                X.push_back(xs[position.at(a.id)]);
            }
        }
        return X;
    };
    auto labels = [&](const Corpus& part, bool native) {
        std::vector<int> y;
        for (const auto& a : part.articles)
            y.push_back(native ? a.rating : static_cast<int>(rating_to_class(a.rating, c.scale)));
        return y;
    };

    json runs = json::array();
    for (const bool native : {false, true}) {
        const auto ytr = labels(parts[0], native);
        const auto yte = labels(parts[1], native);
        std::vector<int> all_classes = ytr;
        all_classes.insert(all_classes.end(), yte.begin(), yte.end());
        for (const bool prism : {true, false}) {
            const auto clf = train_classifier(features(parts[0], prism), ytr, cc);
            const auto pred = clf.predict_all(features(parts[1], prism));
            json run = report_json(compute_metrics(pred, yte, all_classes));
            run["labels"] = native ? "native" : "three_class";
            run["features"] = prism ? "prism" : "encoder";
            run["train_loss"] = clf.final_loss;
            runs.push_back(std::move(run));
        }
    }

    json report = {
        {"config_hash", ctx.hash},
        {"input_hashes", input_hashes},
        {"commit", PRISM_COMMIT},
        {"corpus", {{"path", c.corpus_path.generic_string()},
                    {"articles", corpus.size()},
                    {"digest", hex_digest(ctx.path(artifacts::corpus))}}},
        {"config", json::parse(config_to_json(c))},
        {"split", {{"train", parts[0].size()}, {"test", parts[1].size()}}},
        {"runs", runs},
    };
    if (!c.predictions_path.empty()) {
        const auto preds = load_predictions(c.predictions_path.string());
        std::vector<int> p, g;
        for (const auto& a : parts[1].articles) {
            auto it = preds.find(a.id);
            if (it == preds.end()) throw LookupError("predictions file lacks test article '" + a.id + "'");
            p.push_back(it->second);
            g.push_back(a.rating);
        }
        json ext = report_json(compute_metrics(p, g));
        ext["labels"] = "native";
        ext["features"] = "external";
        report["external"] = ext;
    }
    std::ofstream out(ctx.path(artifacts::report), std::ios::binary);
    if (!out) throw Error("cannot write " + ctx.path(artifacts::report));
    out << report.dump(2) << '\n';
    for (const auto& run : runs)
        ctx.log << "evaluate: " << run["labels"].get<std::string>() << "/"
                << run["features"].get<std::string>() << " f1_macro "
                << detail::format_fixed(run["f1_macro"].get<double>(), 4) << "\n";
}

}  // namespace

void run_stage(std::string_view name, const PipelineConfig& config, const fs::path& out_dir,
               const RunOptions& options, std::ostream& log) {
    validate(config);
    fs::create_directories(out_dir);
    Ctx ctx{config, out_dir, options, log, config_hash(config)};
    log << "[" << name << "] config=" << ctx.hash << " seed=" << config.seed;
    for (const auto& s : kStageSeeds) log << " " << s << "=" << stage_seed(config, s);
    log << "\n";
    if (name == "ingest") {
        stage_ingest(ctx);
        return;
    }
    // declared inputs per stage, checked up front so the missing path is named
    static const std::map<std::string, std::vector<const char*>, std::less<>> inputs = {
        {"embed-corpus", {artifacts::corpus}},
        {"mine-topics", {artifacts::corpus, artifacts::vectors}},
        {"build-index", {artifacts::topics}},
        {"gen-labels", {artifacts::corpus, artifacts::clusters, artifacts::topics}},
        {"train-scorer", {artifacts::corpus, artifacts::topics, artifacts::pairs, artifacts::vectors, artifacts::index}},
        {"embed", {artifacts::corpus, artifacts::topics, artifacts::index, artifacts::vectors}},
        {"retrieve", {artifacts::corpus, artifacts::vectors, artifacts::embeddings}},
        {"evaluate", {artifacts::corpus, artifacts::vectors, artifacts::embeddings}},
        {"sweep", {artifacts::corpus, artifacts::vectors, artifacts::embeddings}},
    };
    auto it = inputs.find(name);
    if (it == inputs.end()) throw ValidationError("unknown subcommand '" + std::string(name) + "'");
    for (const char* f : it->second) require_file(ctx.path(f));
    if (name == "embed" && config.scorer == "bilinear") require_file(ctx.path(artifacts::checkpoint));

    if (name == "embed-corpus") stage_embed_corpus(ctx);
    else if (name == "mine-topics") stage_mine_topics(ctx);
    else if (name == "build-index") stage_build_index(ctx);
    else if (name == "gen-labels") stage_gen_labels(ctx);
    else if (name == "train-scorer") stage_train_scorer(ctx);
    else if (name == "embed") stage_embed(ctx);
    else if (name == "retrieve") stage_retrieve(ctx);
    else if (name == "evaluate") stage_evaluate(ctx);
    else if (name == "sweep") stage_sweep(ctx);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const MissingInputError*>(&e)) return 2;
    if (dynamic_cast<const ProviderError*>(&e)) return 4;
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const PreconditionError*>(&e) ||
        dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ExtractionError*>(&e) ||
        dynamic_cast<const LookupError*>(&e))
        return 3;
    return 1;
}

int run_subcommand(std::string_view name, const PipelineConfig& config, const fs::path& out_dir,
                   const RunOptions& options, std::ostream& log, std::ostream& err) {
    try {
        run_stage(name, config, out_dir, options, log);
        return 0;
    } catch (const MissingInputError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

}  // namespace prism
