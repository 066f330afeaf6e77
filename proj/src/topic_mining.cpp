#include "prism/topic_mining.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "prism/error.hpp"
#include "prism/random.hpp"
#include "prism/text.hpp"

namespace prism {

using nlohmann::json;

namespace {

double squared_distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::size_t nearest(const Vector& x, const std::vector<Vector>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(x, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<Vector> seed_plus_plus(const std::vector<Vector>& xs, std::size_t k, Rng& rng) {
    const std::size_t n = xs.size();
    std::vector<Vector> centers;
    std::vector<bool> chosen(n, false);
    std::size_t first = static_cast<std::size_t>(rng.below(n));
    centers.push_back(xs[first]);
    chosen[first] = true;

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(xs[i], centers[0]);

    while (centers.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                cum += d2[i];
                pick = i;
                if (cum > r) break;
            }
        } else {
            // Every point coincides with a center; take any unused index.
            std::vector<std::size_t> unused;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) unused.push_back(i);
            pick = unused[static_cast<std::size_t>(rng.below(unused.size()))];
        }
        centers.push_back(xs[pick]);
        chosen[pick] = true;
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(xs[i], centers.back()));
    }
    return centers;
}

void assign_all(const std::vector<Vector>& xs, const std::vector<Vector>& centroids,
                std::vector<std::size_t>& labels, std::size_t workers) {
    const std::size_t n = xs.size();
    workers = std::clamp<std::size_t>(workers, 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) labels[i] = nearest(xs[i], centroids);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) labels[i] = nearest(xs[i], centroids);
        });
    }
}

}  // namespace

ClusterAssignment kmeans(const std::vector<Vector>& xs, const KMeansOptions& opt) {
    if (xs.empty()) throw PreconditionError("kmeans needs at least one vector");
    if (opt.k < 1) throw PreconditionError("kmeans needs k >= 1");
    if (opt.k > xs.size())
        throw PreconditionError("kmeans k=" + std::to_string(opt.k) + " exceeds " +
                                std::to_string(xs.size()) + " vectors");
    if (opt.max_iters < 1) throw PreconditionError("kmeans needs max_iters >= 1");
    const std::size_t dim = xs.front().size();
    for (const auto& x : xs)
        if (x.size() != dim) throw PreconditionError("kmeans vectors differ in dimension");

    const std::size_t n = xs.size();
    const std::size_t k = opt.k;
    Rng rng(opt.seed);

    ClusterAssignment out;
    out.k = k;
    out.centroids = seed_plus_plus(xs, k, rng);
    out.labels.assign(n, k);  // k marks "unassigned"

    std::vector<std::size_t> labels(n);
    for (std::size_t iter = 0; iter < opt.max_iters; ++iter) {
        assign_all(xs, out.centroids, labels, opt.workers);

        // Repair empty clusters with the point farthest from its centroid,
        // taken only from clusters that can spare a member.
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t l : labels) ++counts[l];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[labels[i]] < 2) continue;
                const double d = squared_distance(xs[i], out.centroids[labels[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far == n) break;
            --counts[labels[far]];
            labels[far] = c;
            counts[c] = 1;
            out.centroids[c] = xs[far];
        }

        if (labels == out.labels) {
            out.converged = true;
            break;
        }
        out.labels = labels;

        std::vector<Vector> sums(k, Vector(dim, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[labels[i]];
            for (std::size_t j = 0; j < dim; ++j) s[j] += xs[i][j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // keep the previous centroid
            for (std::size_t j = 0; j < dim; ++j)
                out.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
        }
        ++out.iterations;
        out.objective_history.push_back(kmeans_objective(xs, out));
    }
    return out;
}

ClusterAssignment kmeans(const std::vector<Vector>& vectors, std::size_t k, std::uint64_t seed,
                         std::size_t max_iters) {
    KMeansOptions opt;
    opt.k = k;
    opt.seed = seed;
    opt.max_iters = max_iters;
    return kmeans(vectors, opt);
}

double kmeans_objective(const std::vector<Vector>& xs, const ClusterAssignment& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += squared_distance(xs[i], a.centroids[a.labels[i]]);
    return s;
}

double bias_dispersion(const std::vector<int>& ratings) {
    if (ratings.empty()) throw PreconditionError("bias dispersion of an empty cluster");
    const double n = static_cast<double>(ratings.size());
    double mean = 0.0;
    for (int r : ratings) mean += r;
    mean /= n;
    double ss = 0.0;
    for (int r : ratings) ss += (r - mean) * (r - mean);
    return ss / n;
}

std::vector<ControversialCluster> filter_controversial(const ClusterAssignment& assignment,
                                                       const Corpus& corpus, double tau,
                                                       std::size_t p) {
    if (!(tau >= 0.0)) throw PreconditionError("tau must be >= 0");
    if (p < 1) throw PreconditionError("p must be >= 1");
    if (assignment.ids.size() != assignment.labels.size())
        throw PreconditionError("cluster assignment carries no article ids");

    std::unordered_map<std::string_view, int> rating_of;
    for (const auto& a : corpus.articles) rating_of.emplace(a.id, a.rating);

    std::vector<std::vector<std::string>> members(assignment.k);
    for (std::size_t i = 0; i < assignment.ids.size(); ++i) {
        if (!rating_of.contains(assignment.ids[i]))
            throw ValidationError("clustered article '" + assignment.ids[i] + "' not in corpus");
        members.at(assignment.labels[i]).push_back(assignment.ids[i]);
    }

    std::vector<ControversialCluster> kept;
    for (std::size_t c = 0; c < members.size(); ++c) {
        if (members[c].size() < p || members[c].empty()) continue;
        std::vector<int> ratings;
        ratings.reserve(members[c].size());
        for (const auto& id : members[c]) ratings.push_back(rating_of.at(id));
        const double disp = bias_dispersion(ratings);
        if (!(disp > tau)) continue;
        std::sort(members[c].begin(), members[c].end());
        kept.push_back({c, std::move(members[c]), disp});
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.dispersion != b.dispersion) return a.dispersion > b.dispersion;
        return a.cluster_index < b.cluster_index;
    });
    return kept;
}

// --- prompt / reply --------------------------------------------------------

std::string build_indicator_prompt(const std::vector<SampledText>& samples, Scale scale) {
    std::string p =
        "Please summarize the following texts into a common topic, which the VAST MAJORITY of "
        "the texts debate on, and can reflect the bias of the texts, which different biases "
        "(left, center, right) hold different views on this topic.\n\n"
        "Note that there are multiple sides to the topic. Please summarize the topic in a "
        "neutral tone. Please return the topic and the bias indicators, without any other words "
        "or sentences. Please summarize the topic in fewer than 10 words.\n\n"
        "Give me the results in the following format: Topic: <Topic>\n\n"
        "Left Indicator: <Some key points that Left or Lean Left have>\n\n"
        "Right Indicator: <Some key points that Right or Lean Right have>\n\n";
    for (const auto& s : samples) {
        p += "Text: ";
        p += s.text;
        p += "\n\nBias: ";
        p += rating_label(s.rating, scale);
        p += "\n\n";
    }
    return p;
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Strips markdown decoration an LLM tends to add around labels and values.
std::string_view strip_decoration(std::string_view s) {
    s = text::trim(s);
    while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '-'))
        s = text::trim(s.substr(1));
    while (!s.empty() && s.back() == '*') s = text::trim(s.substr(0, s.size() - 1));
    if (s.size() >= 2 && s.front() == '<' && s.back() == '>') s = text::trim(s.substr(1, s.size() - 2));
    return s;
}

}  // namespace

ParsedReply parse_indicator_reply(const std::string& reply) {
    static constexpr std::string_view kLabels[] = {"topic", "left indicator", "right indicator"};
    std::string values[3];
    bool seen[3] = {false, false, false};
    int current = -1;

    std::istringstream in(reply);
    std::string raw;
    while (std::getline(in, raw)) {
        std::string_view line = strip_decoration(raw);
        const std::string low = lower(line);
        int label = -1;
        std::size_t colon = std::string::npos;
        for (int l = 0; l < 3; ++l) {
            if (low.rfind(kLabels[l], 0) != 0) continue;
            std::size_t pos = kLabels[l].size();
            while (pos < low.size() && low[pos] == '*') ++pos;
            if (pos < low.size() && low[pos] == ':') {
                label = l;
                colon = pos;
                break;
            }
        }
        if (label >= 0) {
            current = label;
            seen[label] = true;
            values[label] = std::string(strip_decoration(line.substr(colon + 1)));
        } else if (current >= 0 && !text::trim(line).empty()) {
            if (!values[current].empty()) values[current] += ' ';
            values[current] += std::string(text::trim(line));
        }
    }
    for (int l = 0; l < 3; ++l) {
        if (!seen[l])
            throw ExtractionError("generator reply lacks a '" + std::string(kLabels[l]) + ":' line",
                                  reply);
        if (values[l].empty())
            throw ExtractionError("generator reply has an empty '" + std::string(kLabels[l]) + "'",
                                  reply);
    }
    return {values[0], values[1], values[2]};
}

// --- generators ------------------------------------------------------------

namespace {

// Highest count wins; ties go to the lexicographically smallest token.
std::string most_frequent(const std::map<std::string, std::size_t>& counts) {
    std::string best;
    std::size_t best_n = 0;
    for (const auto& [tok, n] : counts) {
        if (n > best_n) {
            best_n = n;
            best = tok;
        }
    }
    return best;
}

}  // namespace

std::string MockIndicatorGenerator::generate(const GenerationRequest& request) const {
    if (request.samples.empty()) throw ProviderError("mock generator got no sample texts", false);
    std::map<std::string, std::size_t> all;
    std::map<std::string, std::size_t> side_counts[2];
    for (const auto& s : request.samples) {
        const int side = s.bias == BiasClass::Left ? 0 : s.bias == BiasClass::Right ? 1 : -1;
        for (auto& tok : text::tokenize(s.text)) {
            if (text::is_stopword(tok)) continue;
            ++all[tok];
            if (side >= 0) ++side_counts[side][tok];
        }
    }
    const std::string topic = most_frequent(all);
    if (topic.empty()) throw ProviderError("mock generator found no content tokens", false);

    std::string indicator[2];
    for (int side = 0; side < 2; ++side) {
        // count surplus over the other side; a stray article does not erase a clear marker
        std::map<std::string, std::size_t> surplus;
        for (const auto& [tok, n] : side_counts[side]) {
            auto it = side_counts[1 - side].find(tok);
            const std::size_t other = it == side_counts[1 - side].end() ? 0 : it->second;
            if (tok != topic && n > other) surplus[tok] = n - other;
        }
        const std::string word = most_frequent(surplus);
        indicator[side] = topic + " " +
                          (word.empty() ? std::string(side == 0 ? "left" : "right") + " unspecified"
                                        : word);
    }
    return "Topic: " + topic + "\nLeft Indicator: " + indicator[0] +
           "\nRight Indicator: " + indicator[1] + "\n";
}

std::filesystem::path FileExchangeGenerator::prompt_path(std::size_t cluster) const {
    return dir_ / (std::to_string(cluster) + ".prompt");
}

std::filesystem::path FileExchangeGenerator::reply_path(std::size_t cluster) const {
    return dir_ / (std::to_string(cluster) + ".reply");
}

std::string FileExchangeGenerator::generate(const GenerationRequest& request) const {
    std::filesystem::create_directories(dir_);
    {
        std::ofstream out(prompt_path(request.cluster_index), std::ios::binary);
        if (!out) throw ProviderError("cannot write " + prompt_path(request.cluster_index).string(),
                                      false);
        out << request.prompt;
    }
    const auto reply = reply_path(request.cluster_index);
    std::ifstream in(reply, std::ios::binary);
    if (!in) throw MissingInputError(reply.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- extraction ------------------------------------------------------------

std::vector<SampledText> sample_cluster(const ControversialCluster& cluster, const Corpus& corpus,
                                        std::size_t sample_size, std::uint64_t seed) {
    if (sample_size < 1) throw PreconditionError("sample_size must be >= 1");
    std::unordered_map<std::string_view, const Article*> by_id;
    for (const auto& a : corpus.articles) by_id.emplace(a.id, &a);

    std::vector<std::string> ids = cluster.member_ids;
    const std::size_t take = std::min(sample_size, ids.size());
    Rng rng(seed ^ mix64(cluster.cluster_index));
    for (std::size_t i = 0; i < take; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(ids.size() - i));
        std::swap(ids[i], ids[j]);
    }
    std::vector<SampledText> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const auto it = by_id.find(ids[i]);
        if (it == by_id.end())
            throw ValidationError("cluster member '" + ids[i] + "' not in corpus");
        const Article& a = *it->second;
        out.push_back({a.id, a.text, a.rating, rating_to_class(a.rating, corpus.scale)});
    }
    return out;
}

Topic extract_topic(const ControversialCluster& cluster, const Corpus& corpus,
                    std::size_t sample_size, std::uint64_t seed,
                    const IndicatorGenerator& generator, int topic_id) {
    GenerationRequest req;
    req.cluster_index = cluster.cluster_index;
    req.samples = sample_cluster(cluster, corpus, sample_size, seed);
    req.prompt = build_indicator_prompt(req.samples, corpus.scale);
    const std::string reply = generator.generate(req);
    const ParsedReply parsed = parse_indicator_reply(reply);
    if (parsed.topic == parsed.left_indicator || parsed.topic == parsed.right_indicator)
        throw ExtractionError("topic summary repeats an indicator", reply);
    return {topic_id, parsed.topic, parsed.left_indicator, parsed.right_indicator,
            cluster.cluster_index};
}

// --- stores ----------------------------------------------------------------

namespace {

template <typename Fn>
void read_jsonl(std::istream& in, std::string* meta_json, const char* what, Fn&& on_record) {
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed ") + what + " record: " + e.what(), line_no);
        }
        if (first && rec.is_object() && rec.contains("_meta")) {
            if (meta_json) *meta_json = rec["_meta"].dump();
            first = false;
            continue;
        }
        first = false;
        try {
            on_record(rec);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad ") + what + " record: " + e.what(), line_no);
        }
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    return in;
}

}  // namespace

void write_topics(std::ostream& out, const std::vector<Topic>& topics, std::string_view meta_json) {
    if (!meta_json.empty()) out << "{\"_meta\":" << meta_json << "}\n";
    for (const auto& t : topics) {
        json rec = {{"topic_id", t.topic_id},
                    {"summary", t.summary},
                    {"left_indicator", t.left_indicator},
                    {"right_indicator", t.right_indicator},
                    {"source_cluster", t.source_cluster}};
        out << rec.dump() << '\n';
    }
}

std::vector<Topic> read_topics(std::istream& in, std::string* meta_json) {
    std::vector<Topic> topics;
    read_jsonl(in, meta_json, "topic", [&](const json& rec) {
        Topic t;
        t.topic_id = rec.at("topic_id").get<int>();
        t.summary = rec.at("summary").get<std::string>();
        t.left_indicator = rec.at("left_indicator").get<std::string>();
        t.right_indicator = rec.at("right_indicator").get<std::string>();
        t.source_cluster = rec.at("source_cluster").get<std::size_t>();
        topics.push_back(std::move(t));
    });
    return topics;
}

void save_topics(const std::string& path, const std::vector<Topic>& topics,
                 std::string_view meta_json) {
    auto out = open_out(path);
    write_topics(out, topics, meta_json);
}

std::vector<Topic> load_topics(const std::string& path, std::string* meta_json) {
    auto in = open_in(path);
    return read_topics(in, meta_json);
}

void write_clusters(std::ostream& out, const std::vector<ControversialCluster>& clusters,
                    std::string_view meta_json) {
    if (!meta_json.empty()) out << "{\"_meta\":" << meta_json << "}\n";
    for (const auto& c : clusters) {
        json rec = {{"cluster_index", c.cluster_index},
                    {"dispersion", c.dispersion},
                    {"member_ids", c.member_ids}};
        out << rec.dump() << '\n';
    }
}

std::vector<ControversialCluster> read_clusters(std::istream& in, std::string* meta_json) {
    std::vector<ControversialCluster> clusters;
    read_jsonl(in, meta_json, "cluster", [&](const json& rec) {
        ControversialCluster c;
        c.cluster_index = rec.at("cluster_index").get<std::size_t>();
        c.dispersion = rec.at("dispersion").get<double>();
        c.member_ids = rec.at("member_ids").get<std::vector<std::string>>();
        clusters.push_back(std::move(c));
    });
    return clusters;
}

void save_clusters(const std::string& path, const std::vector<ControversialCluster>& clusters,
                   std::string_view meta_json) {
    auto out = open_out(path);
    write_clusters(out, clusters, meta_json);
}

std::vector<ControversialCluster> load_clusters(const std::string& path, std::string* meta_json) {
    auto in = open_in(path);
    return read_clusters(in, meta_json);
}

}  // namespace prism
