#include "repro/embed.hpp"

#include <cctype>
#include <cmath>

#include "repro/hash.hpp"

namespace repro {

std::vector<double> HashedEmbedder::embed(const std::string& text) {
    std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
    std::string token;
    auto flush = [&]() {
        if (token.empty()) return;
        std::uint64_t h = fnv1a64(token);
        v[h % static_cast<std::uint64_t>(dim_)] += 1.0;
        // A second rotated bucket reduces collisions between short texts.
        v[(h >> 17) % static_cast<std::uint64_t>(dim_)] += 0.5;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty() || a.size() != b.size()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace repro
