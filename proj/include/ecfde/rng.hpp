#pragma once

#include <cstdint>
#include <random>

namespace ecfde {

//! Reproducible random stream identified by (seed, stream_id).
//!
//! The engine is std::mt19937_64, whose output sequence is fixed by the
//! standard; it is keyed through std::seed_seq, also fully specified. Only raw
//! 64-bit draws are used (no std distributions, whose algorithms vary between
//! standard libraries), so a path is identical on every platform.
class RngStream
{
public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed)
    , stream_id_(stream_id)
  {
    std::seed_seq seq{ static_cast<std::uint32_t>(seed),
                       static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream_id),
                       static_cast<std::uint32_t>(stream_id >> 32),
                       0x9e3779b9u };
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }

  //! Uniform draw on the open interval (0, 1), 53-bit resolution.
  double uniform()
  {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  //! Fair coin.
  int bit() { return static_cast<int>(engine_() >> 63); }

private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

//! SplitMix64 finalizer, used to derive per-cell seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

} // namespace ecfde
