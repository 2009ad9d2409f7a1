#pragma once
// Counter-based random number generation.
//
// Every random value is a pure function of (seed, stream, counter), produced
// by chaining the splitmix64 finalizer.  Because there is no hidden mutable
// state shared between consumers, parallel code can hand out disjoint streams
// (one per Monte Carlo replication, one per bootstrap draw) and the results
// are bit-identical regardless of thread count or scheduling.
//
// Normal variates use the inverse CDF (Acklam's rational approximation plus
// one Newton refinement step with the exact erfc-based CDF), accurate to
// ~1e-15 over the open unit interval.

#include <cmath>
#include <cstdint>

namespace ddd {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stateless hash of the full (seed, stream, counter) triple.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream + 0x9e3779b97f4a7c15ULL));
  h = splitmix64(h ^ (counter + 0xd1b54a32d192ed03ULL));
  return h;
}

// Standard normal quantile function.  Acklam's approximation refined by one
// Newton step against the exact CDF Phi(x) = erfc(-x/sqrt(2))/2.
inline double inverse_normal_cdf(double u) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (u < plow) {
    double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - plow) {
    double q = u - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Newton refinement: Phi(x) - u has derivative phi(x).
  const double inv_sqrt2pi = 0.3989422804014327;
  double err = 0.5 * std::erfc(-x / 1.4142135623730951) - u;
  x -= err / (inv_sqrt2pi * std::exp(-0.5 * x * x));
  return x;
}

// A sequential view over one (seed, stream) pair.  Cheap to construct; the
// counter advances per draw.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() { return counter_hash(seed_, stream_, counter_++); }

  // Uniform on the open interval (0, 1): safe to feed the normal quantile.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return inverse_normal_cdf(uniform()); }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_, stream_, counter_ = 0;
};

}  // namespace ddd
