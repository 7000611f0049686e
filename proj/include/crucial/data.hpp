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

#include "crucial/loss.hpp"
#include "crucial/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace crucial::data {

/// One series, stored time-major: values[t * dims + j].
struct TimeSeriesSample
{
    std::int64_t id = 0;
    std::vector<double> values;
    std::size_t dims = 1;
    /// Class index or real-valued target; empty when unlabeled.
    std::optional<double> label;

    std::size_t length() const { return dims == 0 ? 0 : values.size() / dims; }

    /// First t observations, all dimensions.
    std::span<const double> prefix(std::size_t t) const
    {
        return std::span<const double>(values).first(t * dims);
    }
};

struct Dataset
{
    std::vector<TimeSeriesSample> samples;
    std::size_t dims = 1;
    /// Indices whose labels were flipped by the generator's label noise.
    std::vector<std::size_t> flipped;

    std::size_t size() const { return samples.size(); }

    std::size_t min_length() const
    {
        if (samples.empty())
            return 0;
        std::size_t m = samples.front().length();
        for (const auto& s : samples)
            m = std::min(m, s.length());
        return m;
    }
};

struct SineOptions
{
    /// Frequency range in cycles per time step.
    double freq_min = 0.02;
    double freq_max = 0.1;
    double amplitude = 1.0;
};

/// Noisy sinusoids with random phase and frequency; the label is the next
/// observation x_{T+1} (noise included).
inline Dataset gen_sine_regression(std::size_t n, std::size_t length, double noise_sd, SeededRng rng,
                                   const SineOptions& opt = {})
{
    if (n < 1 || length < 1)
        throw std::invalid_argument("gen_sine_regression: n and T must be >= 1");
    Dataset ds;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double freq = rng.uniform(opt.freq_min, opt.freq_max);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        TimeSeriesSample s;
        s.id = static_cast<std::int64_t>(i);
        s.values.resize(length);
        for (std::size_t t = 0; t <= length; ++t) {
            const double clean = opt.amplitude * std::sin(2.0 * std::numbers::pi * freq * t + phase);
            const double noisy = noise_sd > 0.0 ? clean + noise_sd * rng.normal() : clean;
            if (t < length)
                s.values[t] = noisy;
            else
                s.label = noisy;
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

struct DriftOptions
{
    /// Half the gap between the class means.
    double separation = 1.0;
    double ar_coefficient = 0.5;
    double innovation_sd = 0.5;
};

/// Two-class AR(1) series around class means +-separation that both move by
/// drift_rate per step. A label_noise fraction of labels is flipped.
inline Dataset gen_drift_classification(std::size_t n, std::size_t length, double drift_rate,
                                        double label_noise, SeededRng rng, const DriftOptions& opt = {})
{
    if (n < 1 || length < 1)
        throw std::invalid_argument("gen_drift_classification: n and T must be >= 1");
    if (!(drift_rate >= 0.0))
        throw std::invalid_argument("gen_drift_classification: drift_rate must be >= 0");
    if (!(label_noise >= 0.0 && label_noise < 0.5))
        throw std::invalid_argument("gen_drift_classification: label_noise must be in [0, 0.5)");

    Dataset ds;
    ds.samples.reserve(n);
    const double rho = opt.ar_coefficient;
    const double stationary_sd = opt.innovation_sd / std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
        TimeSeriesSample s;
        s.id = static_cast<std::int64_t>(i);
        const int cls = static_cast<int>(rng.below(2));
        s.label = cls;
        s.values.resize(length);
        const double offset = cls == 1 ? opt.separation : -opt.separation;
        double z = stationary_sd * rng.normal();
        for (std::size_t t = 0; t < length; ++t) {
            if (t > 0)
                z = rho * z + opt.innovation_sd * rng.normal();
            s.values[t] = drift_rate * static_cast<double>(t) + offset + z;
        }
        ds.samples.push_back(std::move(s));
    }

    const auto flips = static_cast<std::size_t>(std::floor(label_noise * static_cast<double>(n)));
    if (flips > 0) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i)
            order[i] = i;
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.below(i + 1)]);
        ds.flipped.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(flips));
        std::sort(ds.flipped.begin(), ds.flipped.end());
        for (std::size_t idx : ds.flipped)
            ds.samples[idx].label = 1.0 - *ds.samples[idx].label;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV: header `id,label,v1,...,vT` (univariate) or `id,label,v1_d1,...,v1_dD,
// v2_d1,...` (multivariate, time-major). Empty label cell means unlabeled.

struct CsvSchema
{
    enum class Label { Any, Class, Real, None };
    Label label = Label::Any;
    /// Required series length, if any.
    std::optional<std::size_t> length;
};

struct RowDiagnostic
{
    /// 1-based line number in the file (the header is line 1).
    std::size_t line = 0;
    std::string message;
};

struct CsvLoadResult
{
    Dataset data;
    std::vector<RowDiagnostic> rejected;
};

class CsvError : public std::runtime_error
{
public:
    CsvError(const std::string& what, std::vector<RowDiagnostic> rows = {})
        : std::runtime_error(what), rows_(std::move(rows))
    {
    }
    const std::vector<RowDiagnostic>& rows() const { return rows_; }

private:
    std::vector<RowDiagnostic> rows_;
};

namespace detail {

inline std::vector<std::string> split_commas(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

inline std::optional<double> parse_real(const std::string& text)
{
    if (text.empty())
        return std::nullopt;
    double v = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (*begin == '+')
        ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        return std::nullopt;
    return v;
}

/// Parses the header and returns (length, dims).
inline std::pair<std::size_t, std::size_t> parse_header(const std::vector<std::string>& cells)
{
    if (cells.size() < 4 || cells[0] != "id" || cells[1] != "label")
        throw CsvError("header must start with `id,label` followed by at least two value columns");
    const std::size_t columns = cells.size() - 2;
    std::size_t dims = 1;
    if (cells[2].find("_d") != std::string::npos) {
        dims = 0;
        while (dims + 2 < cells.size() && cells[2 + dims] == "v1_d" + std::to_string(dims + 1))
            ++dims;
        if (dims == 0 || columns % dims != 0)
            throw CsvError("malformed multivariate header");
    }
    const std::size_t length = columns / dims;
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t j = 0; j < dims; ++j) {
            const std::string expected = dims == 1 ? "v" + std::to_string(t + 1)
                                                   : "v" + std::to_string(t + 1) + "_d" + std::to_string(j + 1);
            if (cells[2 + t * dims + j] != expected)
                throw CsvError("header column " + std::to_string(3 + t * dims + j) + " is `"
                               + cells[2 + t * dims + j] + "`, expected `" + expected + "`");
        }
    }
    if (length < 2)
        throw CsvError("series must have at least two observations");
    return {length, dims};
}

} // namespace detail

inline std::string csv_header(std::size_t length, std::size_t dims)
{
    std::string h = "id,label";
    for (std::size_t t = 0; t < length; ++t)
        for (std::size_t j = 0; j < dims; ++j) {
            h += ",v" + std::to_string(t + 1);
            if (dims > 1)
                h += "_d" + std::to_string(j + 1);
        }
    return h;
}

/// Parses CSV text. Malformed rows are skipped and listed in `rejected`;
/// a bad header throws.
inline CsvLoadResult parse_csv(std::istream& in, const CsvSchema& schema = {})
{
    CsvLoadResult result;
    std::string line;
    if (!std::getline(in, line))
        throw CsvError("empty file: missing header");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    const auto [length, dims] = detail::parse_header(detail::split_commas(line));
    if (schema.length && *schema.length != length)
        throw CsvError("header has " + std::to_string(length) + " observations, schema requires "
                       + std::to_string(*schema.length));
    result.data.dims = dims;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto reject = [&](std::string msg) { result.rejected.push_back({line_no, std::move(msg)}); };

        const auto cells = detail::split_commas(line);
        if (cells.size() != 2 + length * dims) {
            reject("expected " + std::to_string(2 + length * dims) + " cells, found "
                   + std::to_string(cells.size()));
            continue;
        }
        TimeSeriesSample s;
        s.dims = dims;
        const auto id = detail::parse_real(cells[0]);
        if (!id || *id != std::floor(*id)) {
            reject("id `" + cells[0] + "` is not an integer");
            continue;
        }
        s.id = static_cast<std::int64_t>(*id);

        if (!cells[1].empty()) {
            const auto label = detail::parse_real(cells[1]);
            if (!label || !std::isfinite(*label)) {
                reject("label `" + cells[1] + "` is not a finite number");
                continue;
            }
            if (schema.label == CsvSchema::Label::Class && (*label != std::floor(*label) || *label < 0)) {
                reject("label `" + cells[1] + "` is not a class index");
                continue;
            }
            if (schema.label == CsvSchema::Label::None) {
                reject("unexpected label");
                continue;
            }
            s.label = *label;
        } else if (schema.label == CsvSchema::Label::Class || schema.label == CsvSchema::Label::Real) {
            reject("missing label");
            continue;
        }

        s.values.reserve(length * dims);
        bool ok = true;
        for (std::size_t c = 2; c < cells.size(); ++c) {
            const auto v = detail::parse_real(cells[c]);
            if (!v) {
                reject("column " + std::to_string(c + 1) + ": `" + cells[c] + "` is not numeric");
                ok = false;
                break;
            }
            if (!std::isfinite(*v)) {
                reject("column " + std::to_string(c + 1) + ": missing or non-finite value");
                ok = false;
                break;
            }
            s.values.push_back(*v);
        }
        if (ok)
            result.data.samples.push_back(std::move(s));
    }
    return result;
}

/// Loads a dataset file. With `strict`, any rejected row raises a CsvError
/// listing every rejected line.
inline CsvLoadResult load_csv(const std::string& path, const CsvSchema& schema = {}, bool strict = true)
{
    std::ifstream in(path);
    if (!in)
        throw CsvError("cannot open " + path);
    auto result = parse_csv(in, schema);
    if (strict && !result.rejected.empty()) {
        std::string msg = path + ": " + std::to_string(result.rejected.size()) + " malformed row(s)";
        for (const auto& r : result.rejected)
            msg += "\n  row " + std::to_string(r.line) + ": " + r.message;
        throw CsvError(msg, result.rejected);
    }
    return result;
}

inline void write_csv(std::ostream& os, const Dataset& ds)
{
    const std::size_t length = ds.min_length();
    for (const auto& s : ds.samples)
        if (s.length() != length || s.dims != ds.dims)
            throw std::invalid_argument("write_csv: all series must share length and dimension");
    os << csv_header(length, ds.dims) << '\n';
    for (const auto& s : ds.samples) {
        os << s.id << ',';
        if (s.label)
            os << format_real(*s.label);
        for (double v : s.values)
            os << ',' << format_real(v);
        os << '\n';
    }
}

inline void save_csv(const std::string& path, const Dataset& ds)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    write_csv(out, ds);
}

/// Prefix view D_t = {X_{i,1:t}} over a shared source dataset.
class PrefixDataset
{
public:
    PrefixDataset(std::shared_ptr<const Dataset> source, std::size_t t) : source_(std::move(source)), t_(t) {}

    std::size_t t() const { return t_; }
    std::size_t size() const { return source_->size(); }
    const Dataset& source() const { return *source_; }
    std::span<const double> values(std::size_t i) const { return source_->samples[i].prefix(t_); }
    const std::optional<double>& label(std::size_t i) const { return source_->samples[i].label; }

private:
    std::shared_ptr<const Dataset> source_;
    std::size_t t_;
};

inline std::vector<PrefixDataset> make_prefixes(std::shared_ptr<const Dataset> source,
                                                std::span<const std::size_t> cuts)
{
    if (!source)
        throw std::invalid_argument("make_prefixes: null dataset");
    if (cuts.empty())
        throw std::invalid_argument("make_prefixes: no cut points");
    const std::size_t shortest = source->min_length();
    std::vector<PrefixDataset> out;
    for (std::size_t k = 0; k < cuts.size(); ++k) {
        if (cuts[k] == 0)
            throw std::invalid_argument("make_prefixes: cut points must be >= 1");
        if (k > 0 && cuts[k] <= cuts[k - 1])
            throw std::invalid_argument("make_prefixes: cut points must be strictly increasing");
        if (cuts[k] > shortest)
            throw std::invalid_argument("make_prefixes: cut " + std::to_string(cuts[k])
                                        + " exceeds shortest series length " + std::to_string(shortest));
        out.emplace_back(source, cuts[k]);
    }
    return out;
}

/// Model input from the last `window` steps of a prefix, zero-padded in front.
inline std::vector<double> window_features(std::span<const double> values, std::size_t dims, std::size_t window)
{
    const std::size_t steps = values.size() / dims;
    std::vector<double> out(window * dims, 0.0);
    const std::size_t take = std::min(window, steps);
    std::copy(values.end() - static_cast<std::ptrdiff_t>(take * dims), values.end(),
              out.end() - static_cast<std::ptrdiff_t>(take * dims));
    return out;
}

} // namespace crucial::data
