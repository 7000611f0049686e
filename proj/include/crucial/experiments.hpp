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

// Desk-scale end-to-end runs shared by the CLI and the acceptance binary.

#include "crucial/data.hpp"
#include "crucial/trainer.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace crucial::experiments {

using train::EpochTrace;
using train::TaskSpec;

/// Wrapper setting used by the training presets.
inline CrucialConfig default_wrapper(Variant v)
{
    CrucialConfig c;
    c.variant = v;
    c.lambda = 0.1;
    return c;
}

struct TrainingSetup
{
    model::ModelSpec model;
    std::size_t epochs = 60;
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    double train_fraction = 0.75;
    unsigned workers = 1;
};

struct SineSetup
{
    std::size_t n = 512;
    std::size_t length = 64;
    double noise_sd = 0.1;
    data::SineOptions sine;
};

struct DriftSetup
{
    std::size_t n = 512;
    std::size_t length = 64;
    double drift_rate = 0.05;
    double label_noise = 0.1;
    std::vector<std::size_t> cuts{16, 32, 48, 64};
};

inline TrainingSetup regression_defaults()
{
    TrainingSetup s;
    s.model.arch = model::Architecture::Mlp;
    s.model.window = 16;
    s.model.hidden = {16};
    s.model.outputs = 1;
    return s;
}

inline TrainingSetup classification_defaults()
{
    TrainingSetup s;
    s.model.arch = model::Architecture::Mlp;
    s.model.window = 8;
    s.model.hidden = {16};
    s.model.outputs = 2;
    s.epochs = 20;
    s.learning_rate = 0.1;
    return s;
}

/// Called after every epoch with the stage index (0 outside the continuous task)
/// and, when the split exists, the held-out metric.
using EpochObserver = std::function<void(std::size_t stage, const EpochTrace&, std::optional<double> test_metric)>;

struct RegressionResult
{
    double final_test_mse = 0.0;
    std::vector<double> test_mse;
    std::vector<double> train_loss;
};

inline RegressionResult run_regression(const data::Dataset& ds, const TrainingSetup& setup,
                                       std::optional<CrucialConfig> wrapper, std::uint64_t seed,
                                       const EpochObserver& observe = {})
{
    auto [tr, te] = train::split_indices(ds.size(), setup.train_fraction, SeededRng(derive_seed(seed, "split")));
    if (tr.empty() || te.empty())
        throw std::invalid_argument("run_regression: train and test splits must be non-empty");
    auto spec = setup.model;
    spec.dims = ds.dims;
    const auto train_set = train::make_examples(ds, spec.window, tr);
    const auto test_set = train::make_examples(ds, spec.window, te);

    model::Model m(spec);
    m.initialize(SeededRng(derive_seed(seed, "model")));
    TaskSpec task;
    task.task = train::Task::Regression;
    task.base_loss = model::BaseLoss::Mse;
    task.epochs = setup.epochs;
    task.learning_rate = setup.learning_rate;
    task.batch_size = setup.batch_size;
    task.workers = setup.workers;
    task.loss_wrapper = wrapper;
    train::Trainer trainer(m, task, derive_seed(seed, "trainer"));

    RegressionResult r;
    for (std::size_t e = 0; e < setup.epochs; ++e) {
        const auto trace = trainer.train_epoch(train_set);
        r.train_loss.push_back(trace.mean_loss);
        r.test_mse.push_back(train::mean_squared_error(m, test_set));
        if (observe)
            observe(0, trace, r.test_mse.back());
    }
    r.final_test_mse = r.test_mse.empty() ? train::mean_squared_error(m, test_set) : r.test_mse.back();
    return r;
}

struct ClassificationResult
{
    double final_accuracy = 0.0;
    std::vector<double> kappa_counts;
};

/// Single-shot classification on full-length series.
inline ClassificationResult run_classification(const data::Dataset& ds, const TrainingSetup& setup,
                                               std::optional<CrucialConfig> wrapper, std::uint64_t seed,
                                               const EpochObserver& observe = {})
{
    auto [tr, te] = train::split_indices(ds.size(), setup.train_fraction, SeededRng(derive_seed(seed, "split")));
    if (tr.empty() || te.empty())
        throw std::invalid_argument("run_classification: train and test splits must be non-empty");
    auto spec = setup.model;
    spec.dims = ds.dims;
    const auto train_set = train::make_examples(ds, spec.window, tr);
    const auto test_set = train::make_examples(ds, spec.window, te);

    model::Model m(spec);
    m.initialize(SeededRng(derive_seed(seed, "model")));
    TaskSpec task;
    task.task = train::Task::SingleShotClassification;
    task.base_loss = model::BaseLoss::CrossEntropy;
    task.epochs = setup.epochs;
    task.learning_rate = setup.learning_rate;
    task.batch_size = setup.batch_size;
    task.workers = setup.workers;
    task.loss_wrapper = wrapper;
    train::Trainer trainer(m, task, derive_seed(seed, "trainer"));

    ClassificationResult r;
    for (std::size_t e = 0; e < setup.epochs; ++e) {
        const auto trace = trainer.train_epoch(train_set);
        r.kappa_counts.push_back(static_cast<double>(trace.kappa_at_least_one));
        if (observe)
            observe(0, trace, train::task_accuracy(m, test_set));
    }
    r.final_accuracy = train::task_accuracy(m, test_set);
    return r;
}

inline train::TransferMatrix run_continuous(std::shared_ptr<const data::Dataset> ds, std::span<const std::size_t> cuts,
                                            const TrainingSetup& setup, std::optional<CrucialConfig> wrapper,
                                            std::uint64_t seed, bool accumulate_across_stages = false,
                                            const EpochObserver& observe = {})
{
    auto [tr, te] = train::split_indices(ds->size(), setup.train_fraction, SeededRng(derive_seed(seed, "split")));
    if (tr.empty() || te.empty())
        throw std::invalid_argument("run_continuous: train and test splits must be non-empty");
    auto spec = setup.model;
    spec.dims = ds->dims;
    std::vector<train::Stage> stages;
    for (const auto& p : data::make_prefixes(ds, cuts))
        stages.push_back({train::make_examples(p, spec.window, tr), train::make_examples(p, spec.window, te)});

    TaskSpec task;
    task.task = train::Task::ContinuousClassification;
    task.base_loss = model::BaseLoss::CrossEntropy;
    task.epochs = setup.epochs;
    task.learning_rate = setup.learning_rate;
    task.batch_size = setup.batch_size;
    task.workers = setup.workers;
    task.loss_wrapper = wrapper;
    task.accumulate_across_stages = accumulate_across_stages;
    train::EpochCallback cb;
    if (observe)
        cb = [&](std::size_t stage, const EpochTrace& t) { observe(stage, t, std::nullopt); };
    return train::run_continuous(spec, stages, task, seed, cb);
}

inline data::Dataset sine_data(const SineSetup& s, std::uint64_t seed)
{
    return data::gen_sine_regression(s.n, s.length, s.noise_sd, SeededRng(derive_seed(seed, "data")), s.sine);
}

inline data::Dataset drift_data(const DriftSetup& s, std::uint64_t seed)
{
    return data::gen_drift_classification(s.n, s.length, s.drift_rate, s.label_noise,
                                          SeededRng(derive_seed(seed, "data")));
}

} // namespace crucial::experiments
