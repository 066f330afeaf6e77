// Python bindings for the prism library.
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "prism/cross_encoder.hpp"
#include "prism/embedding.hpp"
#include "prism/error.hpp"
#include "prism/eval.hpp"
#include "prism/pipeline.hpp"
#include "prism/retrieval.hpp"
#include "prism/synthetic.hpp"
#include "prism/topic_index.hpp"
#include "prism/topic_mining.hpp"

namespace py = pybind11;
using namespace prism;

namespace {

BiasClass parse_class(const std::string& s) {
    if (s == "left") return BiasClass::Left;
    if (s == "center") return BiasClass::Center;
    if (s == "right") return BiasClass::Right;
    throw PreconditionError("bias class must be left, center or right");
}

py::dict result_dict(const RetrievalResult& r) {
    py::dict d;
    d["indices"] = r.indices;
    d["ids"] = r.ids;
    d["step_gains"] = r.step_gains;
    d["sim"] = r.sim;
    d["div"] = r.div;
    d["f"] = r.f;
    return d;
}

py::dict report_dict(const ClassificationReport& r) {
    py::dict d;
    d["classes"] = r.classes;
    d["accuracy"] = r.accuracy;
    d["precision_macro"] = r.precision_macro;
    d["recall_macro"] = r.recall_macro;
    d["f1_macro"] = r.f1_macro;
    d["f1_micro"] = r.f1_micro;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f1"] = r.f1;
    d["support"] = r.support;
    d["confusion"] = r.confusion;
    d["undefined_precision"] = r.undefined_precision;
    d["undefined_recall"] = r.undefined_recall;
    return d;
}

TopicIndex make_index(const std::vector<Vector>& topic_vecs, const std::vector<Vector>& left_vecs,
                      const std::vector<Vector>& right_vecs) {
    if (topic_vecs.size() != left_vecs.size() || topic_vecs.size() != right_vecs.size())
        throw PreconditionError("topic, left and right vector lists differ in length");
    TopicIndex index;
    for (std::size_t i = 0; i < topic_vecs.size(); ++i)
        index.topics.push_back({static_cast<int>(i), "", "", "", i});
    index.topic_vecs = topic_vecs;
    index.left_vecs = left_vecs;
    index.right_vecs = right_vecs;
    return index;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Interpretable political-bias embeddings: core routines.";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<LookupError>(m, "LookupError", base.ptr());
    py::register_exception<ProviderError>(m, "ProviderError", base.ptr());
    py::register_exception<ExtractionError>(m, "ExtractionError", base.ptr());
    py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
    py::register_exception<MissingInputError>(m, "MissingInputError", base.ptr());

    // topic mining
    m.def("bias_dispersion", &bias_dispersion, py::arg("ratings"));
    m.def(
        "kmeans",
        [](const std::vector<Vector>& vectors, std::size_t k, std::uint64_t seed, std::size_t max_iters,
           std::size_t workers) {
            ClusterAssignment a;
            {
                py::gil_scoped_release release;
                a = kmeans(vectors, KMeansOptions{k, seed, max_iters, workers});
            }
            py::dict d;
            d["labels"] = a.labels;
            d["centroids"] = a.centroids;
            d["iterations"] = a.iterations;
            d["converged"] = a.converged;
            d["objective_history"] = a.objective_history;
            return d;
        },
        py::arg("vectors"), py::arg("k"), py::arg("seed") = 0, py::arg("max_iters") = 100,
        py::arg("workers") = 1);

    // encoder
    py::class_<MockEncoder>(m, "MockEncoder")
        .def(py::init<std::size_t, std::uint64_t>(), py::arg("dim"), py::arg("seed") = 0)
        .def_property_readonly("dim", &MockEncoder::dim)
        .def("encode", [](const MockEncoder& e, const std::string& text) { return e.encode(text); });

    // topic index
    py::class_<TopicIndex>(m, "TopicIndex")
        .def(py::init(&make_index), py::arg("topic_vecs"), py::arg("left_vecs"), py::arg("right_vecs"))
        .def_property_readonly("size", &TopicIndex::size)
        .def_property_readonly("dim", &TopicIndex::dim);
    m.def(
        "importance_score",
        [](const Vector& x, const TopicIndex& index, std::size_t i, double lambda) {
            return importance_score(x, index, i, lambda);
        },
        py::arg("x"), py::arg("index"), py::arg("i"), py::arg("lambda_importance") = 0.8);
    m.def(
        "top_m_topics",
        [](const Vector& x, const TopicIndex& index, double lambda, std::size_t top) {
            return top_m_topics(x, index, ImportanceConfig{lambda, top});
        },
        py::arg("x"), py::arg("index"), py::arg("lambda_importance") = 0.8, py::arg("m") = 10);

    // cross encoder
    m.def(
        "weak_label",
        [](const std::string& bias, const std::string& side, const std::string& origin) {
            if (side != "left" && side != "right") throw PreconditionError("side must be left or right");
            if (origin != "in_cluster" && origin != "out_of_cluster")
                throw PreconditionError("origin must be in_cluster or out_of_cluster");
            return weak_label(parse_class(bias), side == "left" ? Side::LeftIndicator : Side::RightIndicator,
                              origin == "in_cluster" ? Origin::InCluster : Origin::OutOfCluster);
        },
        py::arg("bias"), py::arg("side"), py::arg("origin"));

    py::class_<BilinearScorer>(m, "BilinearScorer")
        .def(py::init([](std::size_t dim) { return BilinearScorer(dim); }), py::arg("dim"))
        .def_property_readonly("dim", &BilinearScorer::dim)
        .def_property_readonly("parameter_count", &BilinearScorer::parameter_count)
        .def("parameters", &BilinearScorer::parameters)
        .def("set_parameters",
             [](BilinearScorer& s, const std::vector<double>& p) { s.set_parameters(p); })
        .def("score_vectors",
             [](const BilinearScorer& s, const Vector& a, const Vector& b) { return s.score_vectors(a, b); })
        .def("logit", [](const BilinearScorer& s, const Vector& a, const Vector& b) { return s.logit(a, b); })
        .def("gradient",
             [](const BilinearScorer& s, const Vector& a, const Vector& b, double label) {
                 return pair_gradient(s, a, b, label);
             })
        .def("gradient_check",
             [](const BilinearScorer& s, const Vector& a, const Vector& b, double label, double eps) {
                 return gradient_check(s, a, b, label, eps);
             },
             py::arg("a"), py::arg("b"), py::arg("label"), py::arg("epsilon") = 1e-5);

    m.def(
        "train_scorer",
        [](std::size_t dim, const std::vector<Vector>& vectors,
           const std::vector<std::tuple<std::size_t, std::size_t, double>>& examples, double learning_rate,
           std::size_t batch_size, std::size_t epochs, std::uint64_t seed) {
            TrainingSet set;
            set.vectors = vectors;
            for (const auto& [a, b, y] : examples) set.examples.push_back({a, b, y});
            TrainConfig cfg;
            cfg.learning_rate = learning_rate;
            cfg.batch_size = batch_size;
            cfg.epochs = epochs;
            cfg.seed = seed;
            auto r = train(BilinearScorer(dim), set, cfg);
            return py::make_tuple(r.scorer, r.initial_loss, r.loss_history);
        },
        py::arg("dim"), py::arg("vectors"), py::arg("examples"), py::arg("learning_rate"),
        py::arg("batch_size") = 4, py::arg("epochs") = 1, py::arg("seed") = 0);

    // embedding
    m.def(
        "embed_vector",
        [](const Vector& x, const TopicIndex& index, const BilinearScorer& scorer, double lambda,
           std::size_t top) {
            return embed_vector("", x, index, scorer, ImportanceConfig{lambda, top}).entries;
        },
        py::arg("x"), py::arg("index"), py::arg("scorer"), py::arg("lambda_importance") = 0.8,
        py::arg("m") = 10);

    // retrieval
    py::class_<DualSpaceItem>(m, "DualSpaceItem")
        .def(py::init([](std::string id, Vector rel, std::vector<double> dv, int rating) {
                 return DualSpaceItem{std::move(id), std::move(rel), std::move(dv), rating};
             }),
             py::arg("id"), py::arg("rel_vec"), py::arg("div_vec"), py::arg("rating") = 0)
        .def_readonly("id", &DualSpaceItem::id)
        .def_readonly("rel_vec", &DualSpaceItem::rel_vec)
        .def_readonly("div_vec", &DualSpaceItem::div_vec)
        .def_readonly("rating", &DualSpaceItem::rating);
    m.def("sim", [](const std::vector<DualSpaceItem>& s, const Vector& q) { return sim(s, q); },
          py::arg("items"), py::arg("query"));
    m.def("div", [](const std::vector<DualSpaceItem>& s) { return div(s); }, py::arg("items"));
    m.def(
        "objective_f",
        [](const std::vector<DualSpaceItem>& s, const Vector& q, double lambda, double mu) {
            return objective_f(s, q, RetrievalConfig{s.size(), lambda, mu});
        },
        py::arg("items"), py::arg("query"), py::arg("lambda_retrieval") = 0.5, py::arg("mu") = 0.5);
    m.def(
        "greedy_dkmips",
        [](const std::vector<DualSpaceItem>& pool, const Vector& q, std::size_t k, double lambda, double mu) {
            return result_dict(greedy_dkmips(pool, q, RetrievalConfig{k, lambda, mu}));
        },
        py::arg("pool"), py::arg("query"), py::arg("k"), py::arg("lambda_retrieval") = 0.5, py::arg("mu") = 0.5);
    m.def(
        "brute_force_dkmips",
        [](const std::vector<DualSpaceItem>& pool, const Vector& q, std::size_t k, double lambda, double mu) {
            return result_dict(brute_force_dkmips(pool, q, RetrievalConfig{k, lambda, mu}));
        },
        py::arg("pool"), py::arg("query"), py::arg("k"), py::arg("lambda_retrieval") = 0.5, py::arg("mu") = 0.5);

    // eval
    py::class_<LinearClassifier>(m, "LinearClassifier")
        .def_readonly("classes", &LinearClassifier::classes)
        .def_readonly("weights", &LinearClassifier::weights)
        .def_readonly("biases", &LinearClassifier::biases)
        .def_readonly("final_loss", &LinearClassifier::final_loss)
        .def("predict", [](const LinearClassifier& c, const std::vector<double>& x) { return c.predict(x); })
        .def("predict_all", &LinearClassifier::predict_all);
    m.def(
        "train_classifier",
        [](const std::vector<std::vector<double>>& X, const std::vector<int>& y, std::size_t epochs,
           double learning_rate, std::size_t batch, double l2, std::uint64_t seed) {
            return train_classifier(X, y, ClassifierConfig{epochs, learning_rate, batch, l2, seed});
        },
        py::arg("X"), py::arg("y"), py::arg("epochs") = 200, py::arg("learning_rate") = 0.5,
        py::arg("batch") = 16, py::arg("l2") = 0.0, py::arg("seed") = 0);
    m.def(
        "compute_metrics",
        [](const std::vector<int>& pred, const std::vector<int>& gold, const std::vector<int>& classes) {
            return report_dict(compute_metrics(pred, gold, classes));
        },
        py::arg("pred"), py::arg("gold"), py::arg("classes") = std::vector<int>{});
    m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
          py::arg("x"), py::arg("y"));

    // fixture
    m.def(
        "planted_corpus",
        [](std::size_t topics, std::uint64_t seed) {
            PlantedOptions o;
            o.topics = topics;
            o.seed = seed;
            const auto p = make_planted_corpus(o);
            py::list out;
            for (std::size_t i = 0; i < p.corpus.size(); ++i) {
                const auto& a = p.corpus.articles[i];
                py::dict d;
                d["id"] = a.id;
                d["text"] = a.text;
                d["rating"] = a.rating;
                d["topic"] = p.topic_of[i];
                out.append(d);
            }
            return out;
        },
        py::arg("topics") = 6, py::arg("seed") = 7);
    m.def("planted_topic_tokens", &planted_topic_tokens);

    // pipeline
    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def_readwrite("seed", &PipelineConfig::seed)
        .def_readwrite("workers", &PipelineConfig::workers)
        .def_readonly("corpus_path", &PipelineConfig::corpus_path)
        .def("to_json", &config_to_json)
        .def("hash", &config_hash);
    m.def("load_config", [](const std::string& path) { return load_config(path); }, py::arg("path"));
    m.def("subcommands", &subcommands);
    m.def(
        "run_stage",
        [](const std::string& name, const PipelineConfig& config, const std::string& out_dir, bool allow_mixed) {
            std::ostringstream log, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_subcommand(name, config, out_dir, RunOptions{allow_mixed}, log, err);
            }
            return py::make_tuple(code, log.str(), err.str());
        },
        py::arg("name"), py::arg("config"), py::arg("out_dir"), py::arg("allow_mixed") = false);
}
