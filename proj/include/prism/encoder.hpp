#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prism {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
double cosine(std::span<const double> a, std::span<const double> b);
// Scales v to unit length; throws PreconditionError on a zero vector.
void normalize(std::span<double> v);

// Semantic text encoder. Every implementation returns unit-norm vectors of
// length dim() and is safe to call concurrently.
class EncoderProvider {
public:
    virtual ~EncoderProvider() = default;

    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;

    virtual Vector encode(std::string_view text) const = 0;
    virtual std::vector<Vector> encode_batch(std::span<const std::string> texts) const;

    // Providers backed by precomputed tables are addressed by id instead of text.
    virtual bool keyed_by_id() const { return false; }
    virtual Vector encode_id(std::string_view id) const;
};

// Hashed bag-of-tokens projection. Each token lands in one of dim buckets with
// a +-1 sign, both taken from a seeded 64-bit hash; counts are L2-normalised.
// If the signed counts cancel everywhere, the sorted token bag is hashed into a
// single bucket instead.
class MockEncoder final : public EncoderProvider {
public:
    MockEncoder(std::size_t dim, std::uint64_t seed);

    std::string name() const override;
    std::size_t dim() const override { return dim_; }
    Vector encode(std::string_view text) const override;

    std::size_t bucket(std::string_view token) const;
    double sign(std::string_view token) const;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

std::unique_ptr<EncoderProvider> mock_encoder(std::size_t dim, std::uint64_t seed);

// id -> vector table. On disk: a header "dim=<D>" (further key=value pairs
// such as config=<hash> may follow on the same line) then "<id>\t<v1>,...,<vD>".
struct EmbeddingTable {
    std::size_t dim = 0;
    std::vector<std::string> ids;
    std::vector<Vector> vectors;
    std::map<std::string, std::string> header;

    void add(std::string id, Vector v);
    const Vector* find(std::string_view id) const;
};

EmbeddingTable read_embedding_table(std::istream& in);
EmbeddingTable load_embedding_table(const std::string& path);
void write_embedding_table(std::ostream& out, const EmbeddingTable& table);
void save_embedding_table(const std::string& path, const EmbeddingTable& table);

// Serves precomputed vectors by id; text encoding is not available.
class FileEncoder final : public EncoderProvider {
public:
    explicit FileEncoder(EmbeddingTable table);

    std::string name() const override { return "file"; }
    std::size_t dim() const override { return table_.dim; }
    Vector encode(std::string_view text) const override;
    bool keyed_by_id() const override { return true; }
    Vector encode_id(std::string_view id) const override;

private:
    EmbeddingTable table_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

std::unique_ptr<EncoderProvider> file_encoder(const std::string& path);

struct RemoteEndpoint {
    std::string host = "127.0.0.1";
    int port = 0;
    std::string path = "/encode";
    double timeout_seconds = 30.0;
};

// POSTs {"texts": [...]} and expects {"vectors": [[...], ...]} back.
class RemoteEncoder final : public EncoderProvider {
public:
    RemoteEncoder(RemoteEndpoint endpoint, std::size_t dim);

    std::string name() const override { return "remote"; }
    std::size_t dim() const override { return dim_; }
    Vector encode(std::string_view text) const override;
    std::vector<Vector> encode_batch(std::span<const std::string> texts) const override;

private:
    RemoteEndpoint endpoint_;
    std::size_t dim_;
};

}  // namespace prism
