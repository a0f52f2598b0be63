#include "dvconv/common.hpp"

#include <algorithm>
#include <cmath>

namespace dvconv {

std::vector<int32_t> Rng::sample_without_replacement(int32_t n, int32_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<int32_t> pool(static_cast<size_t>(n));
    for (int32_t i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
    for (int32_t i = 0; i < k; ++i) {
        const int64_t j = i + uniform_int(n - i);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    pool.resize(static_cast<size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
}

uint64_t substream(uint64_t seed, std::string_view name, uint64_t index) {
    // FNV-1a over the name, then splitmix64 to decorrelate.
    uint64_t h = 1469598103934665603ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    uint64_t z = seed ^ h ^ (index * 0x9e3779b97f4a7c15ull);
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace dvconv
