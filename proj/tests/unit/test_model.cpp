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

#include "crucial/model.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace crucial;
using namespace crucial::model;

namespace {

struct Case
{
    Architecture arch;
    BaseLoss loss;
    std::size_t dims;
};

class GradientCheck : public ::testing::TestWithParam<Case>
{
};

TEST_P(GradientCheck, MatchesDirectionalFiniteDifference)
{
    const auto c = GetParam();
    ModelSpec spec;
    spec.arch = c.arch;
    spec.window = 6;
    spec.dims = c.dims;
    spec.hidden = {5, 4};
    if (c.arch == Architecture::Rnn)
        spec.hidden = {5};
    spec.outputs = c.loss == BaseLoss::Mse ? 1 : 3;
    SeededRng rng(100 + static_cast<int>(c.arch) * 10 + static_cast<int>(c.loss));

    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        Model m(spec);
        m.initialize(rng.fork(static_cast<std::uint64_t>(draw)));
        std::vector<double> x(spec.input_size()), dir(m.parameter_count());
        for (double& v : x)
            v = rng.normal();
        for (double& v : dir)
            v = rng.normal();
        const double target = c.loss == BaseLoss::Mse ? rng.normal() : static_cast<double>(rng.below(3));

        std::vector<double> g(m.parameter_count(), 0.0);
        m.loss_and_gradient(x, target, c.loss, g);
        double analytic = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k)
            analytic += g[k] * dir[k];

        const std::vector<double> base(m.parameters().begin(), m.parameters().end());
        auto along = [&](double s) {
            for (std::size_t k = 0; k < base.size(); ++k)
                m.parameters()[k] = base[k] + s * dir[k];
            return m.loss(x, target, c.loss);
        };
        const double fd = oracle::central_difference(along, 0.0, 1e-5);
        const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
        worst = std::max(worst, rel);
    }
    EXPECT_LE(worst, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllModels, GradientCheck,
                         ::testing::Values(Case{Architecture::Linear, BaseLoss::Mse, 1},
                                           Case{Architecture::Linear, BaseLoss::CrossEntropy, 2},
                                           Case{Architecture::Mlp, BaseLoss::Mse, 1},
                                           Case{Architecture::Mlp, BaseLoss::CrossEntropy, 1},
                                           Case{Architecture::Rnn, BaseLoss::Mse, 2},
                                           Case{Architecture::Rnn, BaseLoss::CrossEntropy, 1}));

TEST(Model, MseGradientOfLinearModel)
{
    ModelSpec spec;
    spec.arch = Architecture::Linear;
    spec.window = 2;
    Model m(spec);
    auto p = m.parameters();
    p[0] = 0.5;
    p[1] = -1.0;
    p[2] = 0.25;
    const std::vector<double> x{2.0, 1.0};
    std::vector<double> g(3, 0.0);
    const double l = m.loss_and_gradient(x, 1.0, BaseLoss::Mse, g);
    // y = 1 - 1 + 0.25 = 0.25, residual -0.75
    EXPECT_DOUBLE_EQ(l, 0.5625);
    EXPECT_DOUBLE_EQ(g[0], 2.0 * -0.75 * 2.0);
    EXPECT_DOUBLE_EQ(g[1], 2.0 * -0.75 * 1.0);
    EXPECT_DOUBLE_EQ(g[2], 2.0 * -0.75);
}

TEST(Model, CrossEntropyOfUniformLogits)
{
    ModelSpec spec;
    spec.arch = Architecture::Linear;
    spec.window = 3;
    spec.outputs = 2;
    Model m(spec);
    EXPECT_DOUBLE_EQ(m.loss(std::vector<double>{1, 2, 3}, 1.0, BaseLoss::CrossEntropy), std::log(2.0));
    EXPECT_DOUBLE_EQ(m.positive_probability(std::vector<double>{1, 2, 3}), 0.5);
    EXPECT_THROW(m.loss(std::vector<double>{1, 2, 3}, 2.0, BaseLoss::CrossEntropy), std::invalid_argument);
}

TEST(Model, RejectsWrongInputSize)
{
    Model m(ModelSpec{});
    EXPECT_THROW(m.forward(std::vector<double>(3)), std::invalid_argument);
}

TEST(Model, InitializationIsSeeded)
{
    Model a(ModelSpec{}), b(ModelSpec{});
    a.initialize(SeededRng(1));
    b.initialize(SeededRng(1));
    EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}

} // namespace
