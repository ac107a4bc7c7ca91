#pragma once
// Small shared utilities: error types, hashing, deterministic sampling,
// number formatting for the CSV outputs.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinlab {

// Exit-code-relevant error taxonomy: precondition violations map to exit 2,
// numerical failures (quadrature non-convergence, factorization trouble,
// regime violations detected mid-run) map to exit 3.
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }
inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 scale(const Vec3& a, double c) { return {a[0] * c, a[1] * c, a[2] * c}; }

// <xi> = sqrt(1 + |xi|^2)
inline double bracket(const Vec3& xi) { return std::sqrt(1.0 + norm2(xi)); }
inline double bracket_sq(double s) { return std::sqrt(1.0 + s * s); }

// FNV-1a, used for grid/config provenance hashes and file checksums.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), seed);
}
inline std::uint64_t fnv1a(const std::vector<double>& v, std::uint64_t seed = 0xcbf29ce484222325ull) {
    return fnv1a(v.data(), v.size() * sizeof(double), seed);
}

// Halton low-discrepancy sequence with a seed-derived index offset.  Used by
// the bound audits so that samples cover the argument box evenly and rerunning
// with the same seed reproduces them bit-for-bit.
class Halton {
  public:
    explicit Halton(unsigned dim, std::uint64_t seed)
        : dim_(dim), index_(1 + (seed % 65521) * 7) {}

    std::vector<double> next() {
        static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
        if (dim_ > 10) throw PreconditionError("Halton: dimension > 10");
        std::vector<double> pt(dim_);
        for (unsigned d = 0; d < dim_; ++d) pt[d] = radical_inverse(index_, primes[d]);
        ++index_;
        return pt;
    }

  private:
    static double radical_inverse(std::uint64_t i, int base) {
        double f = 1.0, r = 0.0;
        while (i > 0) {
            f /= base;
            r += f * static_cast<double>(i % base);
            i /= base;
        }
        return r;
    }
    unsigned dim_;
    std::uint64_t index_;
};

// Deterministic RNG wrapper (mt19937_64 with explicit uniform/normal transforms
// so the stream does not depend on library distribution internals).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() {  // in (0,1)
        return (static_cast<double>(eng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double normal() {  // Box-Muller, one value per call (cache the pair)
        if (have_) {
            have_ = false;
            return cached_;
        }
        double u1 = uniform(), u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        cached_ = r * std::sin(6.283185307179586477 * u2);
        have_ = true;
        return r * std::cos(6.283185307179586477 * u2);
    }
    std::uint64_t raw() { return eng_(); }

  private:
    std::mt19937_64 eng_;
    bool have_ = false;
    double cached_ = 0.0;
};

// 17 significant digits: round-trips any double exactly.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace kinlab
