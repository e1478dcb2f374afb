#pragma once

#include <memory>
#include <string>
#include <vector>

namespace repro {

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual int dim() const = 0;
    virtual std::string model_id() const = 0;
};

// Deterministic offline embedder: tokens are hashed into a fixed number of
// buckets, counted, and the vector is L2-normalized. Same text, same vector,
// on every platform.
class HashedEmbedder : public Embedder {
public:
    explicit HashedEmbedder(int dimension = 64) : dim_(dimension) {}
    std::vector<double> embed(const std::string& text) override;
    int dim() const override { return dim_; }
    std::string model_id() const override { return "hashed-" + std::to_string(dim_); }

private:
    int dim_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace repro
