#pragma once

#include <array>
#include <cstdint>

namespace dysuse {

// Philox4x64-10 counter-based generator (Salmon et al., Random123).
// Every draw is a pure function of (key, counter), so simulations can be
// scheduled on any number of workers and still reproduce bit-identically.
// Output matches numpy.random.Philox for the same key/counter.
struct Philox4x64 {
  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ull;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ull;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

  static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> ctr,
                                            std::array<std::uint64_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 p0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
      const unsigned __int128 p1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
      const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
      const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
      const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
      const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// A keyed stream of random values indexed by a 4-word counter. Streams with
// different (seed, stream) keys are statistically independent; the per-draw
// counter is chosen by the caller (e.g. tag/timestamp/node ids), which makes
// lazily sampled randomness independent of evaluation order.
class RandomStream {
 public:
  RandomStream() : key_{0, 0} {}
  RandomStream(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

  std::uint64_t raw(std::uint64_t c0, std::uint64_t c1 = 0, std::uint64_t c2 = 0,
                    std::uint64_t c3 = 0) const {
    return Philox4x64::block({c0, c1, c2, c3}, key_)[0];
  }

  // Uniform double in [0, 1): top 53 bits, same convention as numpy.
  double u01(std::uint64_t c0, std::uint64_t c1 = 0, std::uint64_t c2 = 0,
             std::uint64_t c3 = 0) const {
    return static_cast<double>(raw(c0, c1, c2, c3) >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) via the 128-bit multiply reduction.
  std::uint64_t uniform_int(std::uint64_t n, std::uint64_t c0, std::uint64_t c1 = 0,
                            std::uint64_t c2 = 0, std::uint64_t c3 = 0) const {
    const unsigned __int128 m = static_cast<unsigned __int128>(raw(c0, c1, c2, c3)) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t seed() const { return key_[0]; }
  std::uint64_t stream() const { return key_[1]; }

 private:
  std::array<std::uint64_t, 2> key_;
};

// Sequential view over a RandomStream for code that wants an ordinary
// draw-after-draw generator (graph construction, parameter init).
class SeqRng {
 public:
  explicit SeqRng(RandomStream s, std::uint64_t tag = 0) : s_(s), tag_(tag) {}
  SeqRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag = 0)
      : s_(seed, stream), tag_(tag) {}

  std::uint64_t next_raw() { return s_.raw(tag_, ctr_++); }
  double next_u01() { return static_cast<double>(next_raw() >> 11) * 0x1.0p-53; }
  std::uint64_t next_int(std::uint64_t n) {
    const unsigned __int128 m = static_cast<unsigned __int128>(next_raw()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }
  // Uniform in [lo, hi).
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

 private:
  RandomStream s_;
  std::uint64_t tag_;
  std::uint64_t ctr_ = 0;
};

// Counter-space tags keeping the independent uses of one stream disjoint.
namespace rng_tag {
inline constexpr std::uint64_t kLtThreshold = 1;
inline constexpr std::uint64_t kIcAttempt = 2;
inline constexpr std::uint64_t kIcAttemptOnce = 3;
inline constexpr std::uint64_t kTrTrigger = 4;
inline constexpr std::uint64_t kTrTriggerOnce = 5;
inline constexpr std::uint64_t kGraphGen = 6;
inline constexpr std::uint64_t kPerturb = 7;
inline constexpr std::uint64_t kSeedSets = 8;
inline constexpr std::uint64_t kParamInit = 9;
inline constexpr std::uint64_t kInfluenceRep = 10;
inline constexpr std::uint64_t kShuffle = 11;
}  // namespace rng_tag

}  // namespace dysuse
