#include "prism/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "detail.hpp"
#include "prism/error.hpp"
#include "prism/random.hpp"
#include "prism/text.hpp"

namespace prism {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw PreconditionError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw PreconditionError("cosine of a zero vector");
    return dot(a, b) / (na * nb);
}

void normalize(std::span<double> v) {
    const double n = norm(v);
    if (n == 0.0 || !std::isfinite(n)) throw PreconditionError("cannot normalise a zero vector");
    for (double& x : v) x /= n;
}

std::vector<Vector> EncoderProvider::encode_batch(std::span<const std::string> texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(encode(t));
    return out;
}

Vector EncoderProvider::encode_id(std::string_view id) const {
    throw ProviderError("encoder '" + name() + "' cannot look up id '" + std::string(id) + "'",
                        false);
}

// --- mock ------------------------------------------------------------------

MockEncoder::MockEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 8) throw PreconditionError("mock encoder needs dim >= 8");
}

std::string MockEncoder::name() const {
    return "mock-" + std::to_string(dim_) + "-" + std::to_string(seed_);
}

std::size_t MockEncoder::bucket(std::string_view token) const {
    return static_cast<std::size_t>(hash_bytes(token, seed_) % dim_);
}

double MockEncoder::sign(std::string_view token) const {
    return (hash_bytes(token, ~seed_) >> 63) ? -1.0 : 1.0;
}

Vector MockEncoder::encode(std::string_view text) const {
    if (text::trim(text).empty()) throw PreconditionError("cannot encode empty text");
    const auto tokens = text::tokenize(text);
    if (tokens.empty())
        throw PreconditionError("text has no tokens: '" + std::string(text) + "'");
    Vector v(dim_, 0.0);
    for (const auto& t : tokens) v[bucket(t)] += sign(t);
    if (norm(v) == 0.0) {
        // every bucket cancelled; fall back to one bucket keyed by the sorted token bag
        auto bag = tokens;
        std::sort(bag.begin(), bag.end());
        std::string joined;
        for (const auto& t : bag) joined += t + ' ';
        v[bucket(joined)] = 1.0;
    }
    normalize(v);
    return v;
}

std::unique_ptr<EncoderProvider> mock_encoder(std::size_t dim, std::uint64_t seed) {
    return std::make_unique<MockEncoder>(dim, seed);
}

// --- embedding table -------------------------------------------------------

void EmbeddingTable::add(std::string id, Vector v) {
    if (dim == 0) dim = v.size();
    if (v.size() != dim)
        throw ValidationError("vector for '" + id + "' has dim " + std::to_string(v.size()) +
                              ", table has " + std::to_string(dim));
    ids.push_back(std::move(id));
    vectors.push_back(std::move(v));
}

const Vector* EmbeddingTable::find(std::string_view id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == id) return &vectors[i];
    return nullptr;
}

namespace {

std::map<std::string, std::string> parse_header(const std::string& line, std::size_t line_no) {
    std::map<std::string, std::string> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        if (pos >= line.size()) break;
        std::size_t end = line.find(' ', pos);
        if (end == std::string::npos) end = line.size();
        const std::string item = line.substr(pos, end - pos);
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError("bad header field '" + item + "'", line_no);
        fields[item.substr(0, eq)] = item.substr(eq + 1);
        pos = end;
    }
    return fields;
}

}  // namespace

EmbeddingTable read_embedding_table(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("embedding table is empty", 1);
    ++line_no;
    table.header = parse_header(line, line_no);
    const auto it = table.header.find("dim");
    std::size_t dim = 0;
    if (it == table.header.end() || std::sscanf(it->second.c_str(), "%zu", &dim) != 1 || dim == 0)
        throw ParseError("header must start with dim=<D>", line_no);
    table.dim = dim;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            throw ParseError("expected '<id>\\t<values>'", line_no);
        Vector v;
        std::string_view rest(line);
        rest.remove_prefix(tab + 1);
        while (true) {
            const auto comma = rest.find(',');
            double x = 0.0;
            if (!detail::parse_double(rest.substr(0, comma), x))
                throw ParseError("bad number in embedding row", line_no);
            v.push_back(x);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (v.size() != dim)
            throw ParseError("row has " + std::to_string(v.size()) + " values, header says dim=" +
                                 std::to_string(dim),
                             line_no);
        table.ids.push_back(line.substr(0, tab));
        table.vectors.push_back(std::move(v));
    }
    return table;
}

EmbeddingTable load_embedding_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    return read_embedding_table(in);
}

void write_embedding_table(std::ostream& out, const EmbeddingTable& table) {
    out << "dim=" << table.dim;
    for (const auto& [k, v] : table.header)
        if (k != "dim") out << ' ' << k << '=' << v;
    out << '\n';
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        out << table.ids[i] << '\t';
        const auto& v = table.vectors[i];
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (j) out << ',';
            out << detail::format_double(v[j]);
        }
        out << '\n';
    }
}

void save_embedding_table(const std::string& path, const EmbeddingTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_embedding_table(out, table);
}

// --- file ------------------------------------------------------------------

FileEncoder::FileEncoder(EmbeddingTable table) : table_(std::move(table)) {
    for (std::size_t i = 0; i < table_.ids.size(); ++i) {
        if (!index_.emplace(table_.ids[i], i).second)
            throw ValidationError("duplicate id '" + table_.ids[i] + "' in embedding table");
        normalize(table_.vectors[i]);
    }
}

Vector FileEncoder::encode(std::string_view) const {
    throw ProviderError("file encoder serves precomputed vectors by id only", false);
}

Vector FileEncoder::encode_id(std::string_view id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw LookupError("id '" + std::string(id) + "' not in embedding table");
    return table_.vectors[it->second];
}

std::unique_ptr<EncoderProvider> file_encoder(const std::string& path) {
    return std::make_unique<FileEncoder>(load_embedding_table(path));
}

// --- remote ----------------------------------------------------------------

RemoteEncoder::RemoteEncoder(RemoteEndpoint endpoint, std::size_t dim)
    : endpoint_(std::move(endpoint)), dim_(dim) {
    if (dim == 0) throw PreconditionError("remote encoder needs a positive dim");
}

Vector RemoteEncoder::encode(std::string_view text) const {
    const std::string t(text);
    return encode_batch(std::span<const std::string>(&t, 1)).front();
}

std::vector<Vector> RemoteEncoder::encode_batch(std::span<const std::string> texts) const {
    for (const auto& t : texts)
        if (text::trim(t).empty()) throw PreconditionError("cannot encode empty text");
    nlohmann::json body = {{"texts", nlohmann::json::array()}};
    for (const auto& t : texts) body["texts"].push_back(t);
    const auto reply =
        detail::post_json(endpoint_.host, endpoint_.port, endpoint_.path, body,
                          endpoint_.timeout_seconds);
    if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array() ||
        reply["vectors"].size() != texts.size())
        throw ProviderError("encoder reply lacks one vector per text", false);
    std::vector<Vector> out;
    for (const auto& row : reply["vectors"]) {
        if (!row.is_array() || row.size() != dim_)
            throw ProviderError("encoder returned a vector of the wrong dimension", false);
        Vector v;
        for (const auto& x : row) {
            if (!x.is_number()) throw ProviderError("encoder returned a non-numeric value", false);
            v.push_back(x.get<double>());
        }
        try {
            normalize(v);
        } catch (const PreconditionError&) {
            throw ProviderError("encoder returned a zero vector", false);
        }
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace prism
