#include "unica/rng.hpp"

namespace unica {
namespace {

std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = mix(seed);
    for (unsigned char c : tag) h = mix(h ^ c);
    return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return mix(mix(seed) ^ mix(index + 1)); }

}  // namespace unica
