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

#include "crucial/data.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <numeric>
#include <sstream>

using namespace crucial;
using namespace crucial::data;

namespace {

double dft_peak_frequency(std::span<const double> x)
{
    const std::size_t n = x.size();
    double best = -1.0, best_f = 0.0;
    for (std::size_t k = 1; k < n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            re += x[t] * std::cos(2.0 * std::numbers::pi * k * t / n);
            im -= x[t] * std::sin(2.0 * std::numbers::pi * k * t / n);
        }
        const double power = re * re + im * im;
        if (power > best) {
            best = power;
            best_f = static_cast<double>(k) / n;
        }
    }
    return best_f;
}

TEST(SineRegression, SpectralPeakMatchesFrequency)
{
    SineOptions opt;
    opt.freq_min = opt.freq_max = 8.0 / 128.0;
    const auto ds = gen_sine_regression(20, 128, 0.1, SeededRng(1), opt);
    for (const auto& s : ds.samples)
        EXPECT_NEAR(dft_peak_frequency(s.values), 8.0 / 128.0, 1.0 / 128.0);
}

TEST(SineRegression, NoiselessTargetIsNextValue)
{
    SineOptions opt;
    opt.freq_min = opt.freq_max = 0.05;
    const auto ds = gen_sine_regression(5, 32, 0.0, SeededRng(2), opt);
    for (const auto& s : ds.samples) {
        ASSERT_TRUE(s.label.has_value());
        // Recover the phase from x_0 and x_1, then extrapolate.
        const double w = 2.0 * std::numbers::pi * 0.05;
        const double phase = std::atan2(s.values[0] * std::sin(w), s.values[1] - s.values[0] * std::cos(w));
        EXPECT_NEAR(*s.label, std::sin(w * 32 + phase), 1e-9);
    }
}

TEST(SineRegression, SeedDeterminism)
{
    const auto a = gen_sine_regression(10, 16, 0.1, SeededRng(9));
    const auto b = gen_sine_regression(10, 16, 0.1, SeededRng(9));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.samples[i].values, b.samples[i].values);
        EXPECT_EQ(a.samples[i].label, b.samples[i].label);
    }
}

TEST(DriftClassification, StationaryClassesAreSeparable)
{
    const auto ds = gen_drift_classification(2000, 32, 0.0, 0.0, SeededRng(3));
    std::vector<std::pair<double, int>> stat;
    for (const auto& s : ds.samples)
        stat.emplace_back(std::accumulate(s.values.begin(), s.values.end(), 0.0) / s.values.size(),
                          static_cast<int>(*s.label));
    std::sort(stat.begin(), stat.end());
    // Threshold sweep on the series mean.
    std::size_t ones_above = 0;
    for (auto& p : stat)
        ones_above += p.second == 1;
    std::size_t zeros_below = 0, best = 0;
    for (std::size_t k = 0; k <= stat.size(); ++k) {
        best = std::max(best, zeros_below + ones_above);
        if (k < stat.size()) {
            if (stat[k].second == 0)
                ++zeros_below;
            else
                --ones_above;
        }
    }
    EXPECT_GE(static_cast<double>(best) / stat.size(), 0.9);
}

TEST(DriftClassification, LabelNoiseFlipsRecordedFraction)
{
    const auto clean = gen_drift_classification(1000, 8, 0.1, 0.0, SeededRng(4));
    const auto noisy = gen_drift_classification(1000, 8, 0.1, 0.2, SeededRng(4));
    EXPECT_TRUE(clean.flipped.empty());
    ASSERT_EQ(noisy.flipped.size(), 200u);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < 1000; ++i)
        differ += *clean.samples[i].label != *noisy.samples[i].label;
    EXPECT_EQ(differ, 200u);
    EXPECT_THROW(gen_drift_classification(10, 8, 0.1, 0.5, SeededRng(0)), std::invalid_argument);
}

TEST(DriftClassification, MeansMoveWithDrift)
{
    const auto ds = gen_drift_classification(4000, 20, 0.2, 0.0, SeededRng(5));
    double first = 0.0, last = 0.0;
    for (const auto& s : ds.samples) {
        first += s.values.front();
        last += s.values.back();
    }
    EXPECT_NEAR((last - first) / ds.size(), 0.2 * 19, 0.1);
}

TEST(Csv, RoundTripIsExact)
{
    const auto ds = gen_sine_regression(7, 12, 0.3, SeededRng(6));
    std::stringstream ss;
    write_csv(ss, ds);
    const auto back = parse_csv(ss, {CsvSchema::Label::Real, 12});
    EXPECT_TRUE(back.rejected.empty());
    ASSERT_EQ(back.data.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(back.data.samples[i].values, ds.samples[i].values);
        EXPECT_EQ(back.data.samples[i].label, ds.samples[i].label);
        EXPECT_EQ(back.data.samples[i].id, ds.samples[i].id);
    }
}

TEST(Csv, MultivariateRoundTrip)
{
    Dataset ds;
    ds.dims = 2;
    TimeSeriesSample s;
    s.dims = 2;
    s.values = {1, 2, 3, 4, 5, 6};
    s.label = 1;
    ds.samples.push_back(s);
    std::stringstream ss;
    write_csv(ss, ds);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "id,label,v1_d1,v1_d2,v2_d1,v2_d2,v3_d1,v3_d2");
    const auto back = parse_csv(ss);
    EXPECT_EQ(back.data.dims, 2u);
    EXPECT_EQ(back.data.samples[0].length(), 3u);
    EXPECT_EQ(back.data.samples[0].values, s.values);
}

TEST(Csv, RejectsExactlyTheMalformedRows)
{
    std::stringstream ss("id,label,v1,v2,v3\n"
                         "0,1,0.1,0.2,0.3\n"
                         "1,0,0.1,0.2\n"
                         "2,1,0.1,abc,0.3\n"
                         "3,0,0.1,nan,0.3\n"
                         "4,0,0.1,,0.3\n"
                         "5,0.5,1,2,3\n"
                         "6,,1,2,3\n"
                         "7,1,1e-3,2,3\r\n");
    const auto r = parse_csv(ss, {CsvSchema::Label::Class, std::nullopt});
    ASSERT_EQ(r.rejected.size(), 6u);
    EXPECT_EQ(r.data.size(), 2u);
    std::vector<std::size_t> lines;
    for (const auto& d : r.rejected)
        lines.push_back(d.line);
    EXPECT_EQ(lines, (std::vector<std::size_t>{3, 4, 5, 6, 7, 8}));
    EXPECT_EQ(r.data.samples[1].values[0], 1e-3);
}

TEST(Csv, HeaderMismatchIsFatal)
{
    std::stringstream bad1("id,lbl,v1,v2\n0,1,1,2\n");
    EXPECT_THROW(parse_csv(bad1), CsvError);
    std::stringstream bad2("id,label,v1,v3\n");
    EXPECT_THROW(parse_csv(bad2), CsvError);
    std::stringstream too_short("id,label,v1\n");
    EXPECT_THROW(parse_csv(too_short), CsvError);
    std::stringstream wrong_len("id,label,v1,v2\n");
    EXPECT_THROW(parse_csv(wrong_len, {CsvSchema::Label::Any, 3}), CsvError);
    std::stringstream empty("");
    EXPECT_THROW(parse_csv(empty), CsvError);
}

TEST(Csv, StrictLoadNamesTheRow)
{
    const std::string path = ::testing::TempDir() + "/strict.csv";
    {
        std::ofstream out(path);
        out << "id,label,v1,v2\n0,1,1,2\n1,0,1\n";
    }
    try {
        load_csv(path);
        FAIL() << "expected CsvError";
    } catch (const CsvError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
        EXPECT_EQ(e.rows().size(), 1u);
    }
    EXPECT_EQ(load_csv(path, {}, false).rejected.size(), 1u);
}

TEST(Prefixes, NestedViews)
{
    auto ds = std::make_shared<const Dataset>(gen_sine_regression(4, 20, 0.1, SeededRng(7)));
    const std::vector<std::size_t> cuts{5, 10, 20};
    const auto ps = make_prefixes(ds, cuts);
    ASSERT_EQ(ps.size(), 3u);
    for (std::size_t k = 1; k < ps.size(); ++k)
        for (std::size_t i = 0; i < ds->size(); ++i) {
            const auto a = ps[k - 1].values(i), b = ps[k].values(i);
            EXPECT_EQ(a.size(), cuts[k - 1]);
            EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
            EXPECT_EQ(a.data(), b.data());
        }
}

TEST(Prefixes, RejectsBadCuts)
{
    auto ds = std::make_shared<const Dataset>(gen_sine_regression(4, 20, 0.1, SeededRng(7)));
    EXPECT_THROW(make_prefixes(ds, std::vector<std::size_t>{5, 21}), std::invalid_argument);
    EXPECT_THROW(make_prefixes(ds, std::vector<std::size_t>{5, 5}), std::invalid_argument);
    EXPECT_THROW(make_prefixes(ds, std::vector<std::size_t>{0}), std::invalid_argument);
    EXPECT_THROW(make_prefixes(ds, std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(WindowFeatures, PadsShortPrefixes)
{
    const std::vector<double> v{1, 2, 3};
    EXPECT_EQ(window_features(v, 1, 5), (std::vector<double>{0, 0, 1, 2, 3}));
    EXPECT_EQ(window_features(v, 1, 2), (std::vector<double>{2, 3}));
}

} // namespace
