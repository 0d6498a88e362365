#pragma once

#include <concepts>
#include <cstdint>
#include <random>

namespace ldfactor {

/// Anything that hands out uniform variates on the open interval (0, 1).
template <class U>
concept UniformSource = requires(U& u) {
  { u.uniform() } -> std::convertible_to<double>;
};

/// SplitMix64 finalizer. Used only to turn structured stream keys into
/// well-mixed engine seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Labels for the disjoint sub-streams a single Monte Carlo item consumes.
enum class StreamLabel : std::uint64_t {
  loadings = 1,
  factors = 2,
  idio = 3,
  light = 4,
  path_factor = 5,
  path_idio = 6,
  strata = 7,
};

/// A deterministic random stream keyed by (seed, block, label).
///
/// Streams with different keys are seeded independently through SplitMix64,
/// so the draws of one label never depend on how many draws another label
/// consumed.
class Stream {
 public:
  using engine_type = std::mt19937_64;

  Stream(std::uint64_t seed, std::uint64_t block, StreamLabel label)
      : engine_(mix64(mix64(mix64(seed) ^ block) ^
                      static_cast<std::uint64_t>(label))) {}

  explicit Stream(std::uint64_t seed) : Stream(seed, 0, StreamLabel::idio) {}

  /// Uniform on (0, 1) with 53 random bits; never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  engine_type& engine() noexcept { return engine_; }

 private:
  engine_type engine_;
};

static_assert(UniformSource<Stream>);

/// The three independent sources consumed by one draw of the static factor
/// model.
struct SubStreams {
  Stream loadings;
  Stream factors;
  Stream idio;

  SubStreams(std::uint64_t seed, std::uint64_t block)
      : loadings(seed, block, StreamLabel::loadings),
        factors(seed, block, StreamLabel::factors),
        idio(seed, block, StreamLabel::idio) {}
};

}  // namespace ldfactor
