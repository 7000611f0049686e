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

#include "crucial/data.hpp"
#include "crucial/loss.hpp"
#include "crucial/model.hpp"
#include "crucial/numerics.hpp"
#include "crucial/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crucial::train {

using model::BaseLoss;
using model::Model;
using model::ModelSpec;

enum class Task { Regression, SingleShotClassification, ContinuousClassification };

inline const char* task_name(Task t)
{
    switch (t) {
    case Task::Regression:
        return "regression";
    case Task::SingleShotClassification:
        return "classification";
    case Task::ContinuousClassification:
        return "continuous";
    }
    return "?";
}

inline Task parse_task(const std::string& s)
{
    if (s == "regression")
        return Task::Regression;
    if (s == "classification")
        return Task::SingleShotClassification;
    if (s == "continuous")
        return Task::ContinuousClassification;
    throw std::invalid_argument("unknown task: " + s);
}

struct TaskSpec
{
    Task task = Task::Regression;
    BaseLoss base_loss = BaseLoss::Mse;
    std::size_t epochs = 30;
    double learning_rate = 0.05;
    /// Empty: plain base loss.
    std::optional<CrucialConfig> loss_wrapper;
    /// Mini-batch size; 0 means full batch.
    std::size_t batch_size = 32;
    unsigned workers = 1;
    /// Continuous task: keep the wrapper's epoch statistics across stages
    /// instead of restarting them for every new prefix.
    bool accumulate_across_stages = false;

    void validate() const
    {
        if ((task == Task::Regression) != (base_loss == BaseLoss::Mse))
            throw std::invalid_argument("TaskSpec: regression requires MSE, classification cross-entropy");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("TaskSpec: learning rate must be > 0");
        if (loss_wrapper)
            loss_wrapper->validate();
    }
};

struct Example
{
    std::vector<double> input;
    double target = 0.0;
};

using ExampleSet = std::vector<Example>;

class DivergenceError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double divergence_limit = 1e6;

/// Examples from the last `window` steps of every selected sample.
inline ExampleSet make_examples(const data::Dataset& ds, std::size_t window, std::span<const std::size_t> indices)
{
    ExampleSet out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto& s = ds.samples.at(i);
        if (!s.label)
            throw std::invalid_argument("make_examples: sample " + std::to_string(s.id) + " has no label");
        out.push_back({data::window_features(s.values, s.dims, window), *s.label});
    }
    return out;
}

inline ExampleSet make_examples(const data::PrefixDataset& p, std::size_t window,
                                std::span<const std::size_t> indices)
{
    ExampleSet out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto& label = p.label(i);
        if (!label)
            throw std::invalid_argument("make_examples: unlabeled sample");
        out.push_back({data::window_features(p.values(i), p.source().dims, window), *label});
    }
    return out;
}

/// Deterministic split: the first ceil(train_fraction * n) indices of a seeded permutation train.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                                  double train_fraction,
                                                                                  SeededRng rng)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng.below(i)]);
    const auto cut = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n)));
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(cut, n)));
    std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(std::min(cut, n)), idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

struct ForwardBackward
{
    std::vector<double> losses;
    std::vector<std::vector<double>> gradients;
};

/// Per-sample base losses and parameter gradients.
inline ForwardBackward forward_backward(const Model& m, std::span<const Example> batch, BaseLoss loss,
                                        unsigned workers = 1)
{
    if (batch.empty())
        throw std::invalid_argument("forward_backward: empty batch");
    ForwardBackward out;
    out.losses.resize(batch.size());
    out.gradients.assign(batch.size(), std::vector<double>(m.parameter_count(), 0.0));
    parallel_for(batch.size(), workers, [&](std::size_t i) {
        out.losses[i] = m.loss_and_gradient(batch[i].input, batch[i].target, loss, out.gradients[i]);
    });
    return out;
}

struct EpochTrace
{
    std::size_t epoch = 0;
    /// Raw base losses by example index, measured when each sample was visited.
    std::vector<double> raw_losses;
    std::vector<ModulatedLoss> modulated;
    double mean_loss = 0.0;
    double threshold = 0.0;
    std::size_t kappa_at_least_one = 0;
    std::size_t selected = 0;
};

/// Mini-batch gradient descent with an optional loss wrapper.
class Trainer
{
public:
    Trainer(Model& model, TaskSpec task, std::uint64_t seed) : model_(model), task_(std::move(task)), seed_(seed)
    {
        task_.validate();
        if (task_.loss_wrapper)
            schedule_.emplace(*task_.loss_wrapper);
    }

    const TaskSpec& task() const { return task_; }
    std::size_t epochs_run() const { return global_epoch_; }

    /// Starts a new stage: the wrapper's epoch counter and statistics restart.
    void reset_schedule()
    {
        stage_epoch_ = 0;
        prev_losses_.clear();
    }

    EpochTrace train_epoch(const ExampleSet& examples)
    {
        if (examples.empty())
            throw std::invalid_argument("train_epoch: no examples");
        const std::size_t n = examples.size();

        if (schedule_) {
            if (stage_epoch_ == 0 && schedule_->config().variant == Variant::Sin
                && schedule_->config().mu_policy.kind == MuPolicy::Kind::EpochMean && prev_losses_.empty())
                prev_losses_ = evaluate_losses(examples);
            schedule_->begin_epoch(stage_epoch_, prev_losses_);
        }

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        SeededRng rng(derive_seed(derive_seed(seed_, "shuffle"), global_epoch_));
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);

        EpochTrace trace;
        trace.epoch = global_epoch_;
        trace.raw_losses.assign(n, 0.0);
        trace.modulated.assign(n, {});
        if (schedule_)
            trace.threshold = schedule_->state().threshold;

        const std::size_t batch = task_.batch_size == 0 ? n : std::min(task_.batch_size, n);
        const std::size_t p = model_.parameter_count();
        std::vector<std::vector<double>> grads(batch, std::vector<double>(p));
        std::vector<double> losses(batch);
        std::vector<double> total(p);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t b = std::min(batch, n - start);
            parallel_for(b, task_.workers, [&](std::size_t k) {
                const auto& ex = examples[order[start + k]];
                std::fill(grads[k].begin(), grads[k].end(), 0.0);
                losses[k] = model_.loss_and_gradient(ex.input, ex.target, task_.base_loss, grads[k]);
            });
            std::fill(total.begin(), total.end(), 0.0);
            for (std::size_t k = 0; k < b; ++k) {
                const std::size_t idx = order[start + k];
                trace.raw_losses[idx] = losses[k];
                double factor = 1.0;
                if (schedule_) {
                    const auto m = schedule_->apply(losses[k]);
                    trace.modulated[idx] = m;
                    factor = loss_gradient_factor(m);
                } else {
                    trace.modulated[idx] = {losses[k], 1.0, 0.0, 0.0, losses[k], true};
                }
                if (factor == 0.0)
                    continue;
                for (std::size_t j = 0; j < p; ++j)
                    total[j] += factor * grads[k][j];
            }
            const double step = task_.learning_rate / static_cast<double>(b);
            auto params = model_.parameters();
            for (std::size_t j = 0; j < p; ++j)
                params[j] -= step * total[j];
        }

        for (const auto& m : trace.modulated) {
            trace.kappa_at_least_one += m.selected && m.kappa >= 1.0;
            trace.selected += m.selected;
        }
        trace.mean_loss = std::accumulate(trace.raw_losses.begin(), trace.raw_losses.end(), 0.0)
                          / static_cast<double>(n);
        if (!(trace.mean_loss <= divergence_limit))
            throw DivergenceError("training diverged at epoch " + std::to_string(global_epoch_)
                                  + ": mean loss " + format_real(trace.mean_loss));
        prev_losses_ = trace.raw_losses;
        ++stage_epoch_;
        ++global_epoch_;
        return trace;
    }

    std::vector<double> evaluate_losses(const ExampleSet& examples) const
    {
        std::vector<double> out(examples.size());
        parallel_for(examples.size(), task_.workers, [&](std::size_t i) {
            out[i] = model_.loss(examples[i].input, examples[i].target, task_.base_loss);
        });
        return out;
    }

private:
    Model& model_;
    TaskSpec task_;
    std::uint64_t seed_;
    std::optional<CrucialSchedule> schedule_;
    std::vector<double> prev_losses_;
    std::size_t stage_epoch_ = 0;
    std::size_t global_epoch_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation

inline double mean_squared_error(const Model& m, const ExampleSet& examples)
{
    if (examples.empty())
        throw std::invalid_argument("mean_squared_error: no examples");
    double s = 0.0;
    for (const auto& ex : examples)
        s += m.loss(ex.input, ex.target, BaseLoss::Mse);
    return s / static_cast<double>(examples.size());
}

inline double classification_accuracy(const Model& m, const ExampleSet& examples)
{
    if (examples.empty())
        throw std::invalid_argument("classification_accuracy: no examples");
    std::size_t hits = 0;
    for (const auto& ex : examples) {
        const auto out = m.forward(ex.input);
        const auto best = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
        hits += best == static_cast<std::size_t>(ex.target);
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

/// Area under the ROC curve via the Mann-Whitney rank statistic (ties share ranks).
inline double auc(std::span<const double> scores, std::span<const int> labels)
{
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: size mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]])
            ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) {
                rank_sum += rank;
                ++positives;
            }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0)
        throw std::invalid_argument("auc: both classes must be present");
    const double np = static_cast<double>(positives);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

/// AUC for binary problems, accuracy otherwise.
inline double task_accuracy(const Model& m, const ExampleSet& examples)
{
    if (m.spec().outputs != 2)
        return classification_accuracy(m, examples);
    std::vector<double> scores;
    std::vector<int> labels;
    // Logit margin ranks like the softmax probability but does not saturate.
    for (const auto& ex : examples) {
        const auto out = m.forward(ex.input);
        scores.push_back(out[1] - out[0]);
        labels.push_back(static_cast<int>(ex.target));
    }
    return auc(scores, labels);
}

// ---------------------------------------------------------------------------
// Continuous task

struct TransferMatrix
{
    /// R[i][j]: accuracy on stage j after learning stage i.
    std::vector<std::vector<double>> R;
    /// Accuracy of an untrained model on each stage.
    std::vector<double> baseline;
    std::uint64_t baseline_seed = 0;

    std::size_t size() const { return R.size(); }
};

inline double bwt(const TransferMatrix& t)
{
    const std::size_t d = t.size();
    if (d < 2)
        throw std::invalid_argument("bwt: needs at least two stages");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < d; ++i)
        s += t.R[d - 1][i] - t.R[i][i];
    return s / static_cast<double>(d - 1);
}

inline double fwt(const TransferMatrix& t)
{
    const std::size_t d = t.size();
    if (d < 2)
        throw std::invalid_argument("fwt: needs at least two stages");
    if (t.baseline.size() != d)
        throw std::invalid_argument("fwt: baseline accuracies missing");
    double s = 0.0;
    for (std::size_t i = 1; i < d; ++i)
        s += t.R[i - 1][i] - t.baseline[i];
    return s / static_cast<double>(d - 1);
}

struct Stage
{
    ExampleSet train;
    ExampleSet test;
};

using EpochCallback = std::function<void(std::size_t stage, const EpochTrace&)>;

/// Learns the stages in order and fills one row of R after each.
inline TransferMatrix run_continuous(const ModelSpec& spec, std::span<const Stage> stages, const TaskSpec& task,
                                     std::uint64_t seed, const EpochCallback& on_epoch = {})
{
    if (stages.empty())
        throw std::invalid_argument("run_continuous: no stages");
    TransferMatrix out;
    out.baseline_seed = derive_seed(seed, "baseline-model");
    Model fresh(spec);
    fresh.initialize(SeededRng(out.baseline_seed));
    for (const auto& s : stages)
        out.baseline.push_back(task_accuracy(fresh, s.test));

    Model m(spec);
    m.initialize(SeededRng(derive_seed(seed, "model")));
    Trainer trainer(m, task, derive_seed(seed, "trainer"));
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (!task.accumulate_across_stages)
            trainer.reset_schedule();
        for (std::size_t e = 0; e < task.epochs; ++e) {
            const auto trace = trainer.train_epoch(stages[i].train);
            if (on_epoch)
                on_epoch(i, trace);
        }
        std::vector<double> row;
        for (const auto& s : stages)
            row.push_back(task_accuracy(m, s.test));
        out.R.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricRow
{
    std::string run_id;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::string split;
    std::string metric;
    double value = 0.0;
};

inline void write_metrics_header(std::ostream& os) { os << "run_id,seed,epoch,split,metric_name,value\n"; }

inline void write_metrics_row(std::ostream& os, const MetricRow& r)
{
    os << r.run_id << ',' << r.seed << ',' << r.epoch << ',' << r.split << ',' << r.metric << ','
       << format_real(r.value) << '\n';
}

/// Interior peaks of a sequence; a plateau counts once.
inline std::size_t count_local_maxima(std::span<const double> xs)
{
    std::size_t peaks = 0;
    std::size_t i = 1;
    while (i + 1 < xs.size()) {
        if (xs[i] > xs[i - 1]) {
            std::size_t j = i;
            while (j + 1 < xs.size() && xs[j + 1] == xs[i])
                ++j;
            if (j + 1 < xs.size() && xs[j + 1] < xs[i])
                ++peaks;
            i = j + 1;
        } else {
            ++i;
        }
    }
    return peaks;
}

inline double median(std::vector<double> xs)
{
    if (xs.empty())
        throw std::invalid_argument("median: empty");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

} // namespace crucial::train
