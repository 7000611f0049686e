/*
 *  Copyright 2026 The crucial-loss Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crucial {

/// Principal branch of the Lambert W function, W0(x) * exp(W0(x)) = x.
///
/// Inputs up to 1e-15 below -1/e are treated as the branch point. Uses a
/// branch-aware initial guess followed by Halley refinement.
inline double lambert_w0(double x)
{
    constexpr double inv_e = 1.0 / std::numbers::e;
    if (std::isnan(x))
        throw std::domain_error("lambert_w0: NaN argument");
    if (x < -inv_e - 1e-15)
        throw std::domain_error("lambert_w0: argument below -1/e");
    if (x <= -inv_e)
        return -1.0;
    if (x == 0.0)
        return 0.0;
    if (std::isinf(x))
        return x;

    double w;
    if (x < -0.25) {
        // series around the branch point in p = sqrt(2(ex + 1))
        const double p = std::sqrt(2.0 * (std::numbers::e * x + 1.0));
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
    } else if (x < 3.0) {
        w = std::log1p(x);
        w *= 1.0 - std::log1p(w) / (2.0 + w);
    } else {
        const double l1 = std::log(x);
        const double l2 = std::log(l1);
        w = l1 - l2 + l2 / l1;
    }

    for (int iter = 0; iter < 8; ++iter) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        const double wp1 = w + 1.0;
        if (wp1 <= 0.0)
            break;
        const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        const double step = f / denom;
        w -= step;
        if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w)))
            break;
    }
    return w < -1.0 ? -1.0 : w;
}

/// Complementary error function.
inline double erfc(double x) { return std::erfc(x); }

/// Population statistics of a loss list (divisor N).
struct LossStats
{
    double mean = 0.0;
    double std_dev = 0.0;
    /// Third standardized central moment; 0 when std_dev == 0.
    double skewness = 0.0;
    std::size_t count = 0;
};

inline LossStats loss_stats(std::span<const double> losses)
{
    if (losses.empty())
        throw std::invalid_argument("loss_stats: empty loss list");

    const double n = static_cast<double>(losses.size());
    double sum = 0.0;
    for (double l : losses) {
        if (!std::isfinite(l))
            throw std::invalid_argument("loss_stats: non-finite loss");
        sum += l;
    }
    const double mean = sum / n;

    double m2 = 0.0;
    double m3 = 0.0;
    for (double l : losses) {
        const double d = l - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;

    LossStats s;
    s.mean = mean;
    s.std_dev = std::sqrt(m2);
    s.count = losses.size();
    // Rounding leaves a tiny m2 on lists whose entries are all equal; treat
    // anything at that level as a point mass.
    const double scale = std::max(std::abs(mean), 1e-300);
    if (s.std_dev > 1e-12 * scale && s.std_dev > 0.0)
        s.skewness = m3 / (s.std_dev * s.std_dev * s.std_dev);
    else
        s.std_dev = 0.0;
    return s;
}

/// 64-bit FNV-1a; fixed so derived seeds are stable across platforms.
constexpr std::uint64_t fnv1a64(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Sub-seed for a named component of a run.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view component)
{
    return splitmix64(seed ^ splitmix64(fnv1a64(component)));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Seeded random source built on mt19937_64.
///
/// The engine is bit-specified by the standard; the uniform and normal
/// transforms are defined here so streams match across standard libraries.
class SeededRng
{
public:
    enum class Algorithm { Mt19937_64 };

    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }
    static constexpr Algorithm algorithm() { return Algorithm::Mt19937_64; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound)
    {
        if (bound == 0)
            throw std::invalid_argument("SeededRng::below: zero bound");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
                                    - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 == 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Independent stream derived from this generator's seed.
    SeededRng fork(std::string_view component) const { return SeededRng(derive_seed(seed_, component)); }
    SeededRng fork(std::uint64_t stream) const { return SeededRng(derive_seed(seed_, stream)); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace crucial
