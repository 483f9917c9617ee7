#ifndef QRATE_RNG_HPP
#define QRATE_RNG_HPP

#include <cmath>
#include <cstdint>

namespace qrate {

// Counter-based generator: every draw is a pure function of
// (seed, rep, jump index, substream). No state is shared between
// replications, so parallel schedules cannot change the stream.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t keyed(std::uint64_t seed, std::uint64_t rep, std::uint64_t counter) {
    std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
    h = mix64(h ^ (rep * 0xd6e8feb86659fd93ULL));
    return mix64(h ^ (counter * 0xa0761d6478bd642fULL));
}

// Uniform on (0,1]; never returns 0 so -log(u) stays finite.
inline double uniform01(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace rng

// Per-replication draw stream for one simulated path.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t rep) : seed_(seed), rep_(rep) {}

    double next_uniform() { return rng::uniform01(rng::keyed(seed_, rep_, counter_++)); }

    double next_exponential(double rate) { return -std::log(next_uniform()) / rate; }

private:
    std::uint64_t seed_;
    std::uint64_t rep_;
    std::uint64_t counter_ = 0;
};

}  // namespace qrate

#endif
