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

#include "crucial/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crucial::model {

enum class Architecture { Linear, Mlp, Rnn };
enum class BaseLoss { Mse, CrossEntropy };

inline Architecture parse_architecture(const std::string& s)
{
    if (s == "linear")
        return Architecture::Linear;
    if (s == "mlp")
        return Architecture::Mlp;
    if (s == "rnn")
        return Architecture::Rnn;
    throw std::invalid_argument("unknown architecture: " + s);
}

inline const char* architecture_name(Architecture a)
{
    switch (a) {
    case Architecture::Linear:
        return "linear";
    case Architecture::Mlp:
        return "mlp";
    case Architecture::Rnn:
        return "rnn";
    }
    return "?";
}

struct ModelSpec
{
    Architecture arch = Architecture::Mlp;
    /// Number of trailing time steps fed to the model.
    std::size_t window = 16;
    std::size_t dims = 1;
    /// Hidden widths (Mlp: one per layer; Rnn: first entry is the state size).
    std::vector<std::size_t> hidden{16};
    /// 1 for regression, number of classes for classification.
    std::size_t outputs = 1;

    std::size_t input_size() const { return window * dims; }

    void validate() const
    {
        if (window == 0 || dims == 0 || outputs == 0)
            throw std::invalid_argument("ModelSpec: window, dims and outputs must be >= 1");
        if (arch != Architecture::Linear && (hidden.empty() || hidden.front() == 0))
            throw std::invalid_argument("ModelSpec: hidden size must be >= 1");
    }
};

/// Differentiable model over a flat parameter vector.
class Model
{
public:
    explicit Model(ModelSpec spec) : spec_(std::move(spec))
    {
        spec_.validate();
        params_.assign(count_parameters(), 0.0);
    }

    const ModelSpec& spec() const { return spec_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    /// Glorot-uniform weights, zero biases.
    void initialize(SeededRng rng)
    {
        std::fill(params_.begin(), params_.end(), 0.0);
        auto fill = [&](std::size_t offset, std::size_t rows, std::size_t cols, double gain = 1.0) {
            const double a = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
            for (std::size_t k = 0; k < rows * cols; ++k)
                params_[offset + k] = rng.uniform(-a, a);
        };
        std::size_t off = 0;
        if (spec_.arch == Architecture::Rnn) {
            const std::size_t h = spec_.hidden.front(), d = spec_.dims, o = spec_.outputs;
            fill(off, h, d);
            off += h * d;
            fill(off, h, h, 0.5);
            off += h * h + h;
            fill(off, o, h);
            return;
        }
        const auto sizes = layer_sizes();
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            fill(off, sizes[l + 1], sizes[l]);
            off += sizes[l + 1] * sizes[l] + sizes[l + 1];
        }
    }

    /// Raw outputs (regression value or class logits).
    std::vector<double> forward(std::span<const double> input) const
    {
        Workspace ws;
        return run_forward(input, ws);
    }

    /// Base loss for one sample; adds d(loss)/d(params) into `grad` when non-empty.
    double loss_and_gradient(std::span<const double> input, double target, BaseLoss loss,
                             std::span<double> grad) const
    {
        Workspace ws;
        const auto out = run_forward(input, ws);
        std::vector<double> d_out(out.size());
        const double l = base_loss(out, target, loss, d_out);
        if (!grad.empty())
            run_backward(input, ws, d_out, grad);
        return l;
    }

    double loss(std::span<const double> input, double target, BaseLoss loss) const
    {
        return loss_and_gradient(input, target, loss, {});
    }

    /// Squared error, or softmax cross-entropy with `target` as class index.
    static double base_loss(std::span<const double> out, double target, BaseLoss loss, std::span<double> d_out)
    {
        if (loss == BaseLoss::Mse) {
            const double r = out[0] - target;
            if (!d_out.empty())
                d_out[0] = 2.0 * r;
            return r * r;
        }
        const auto cls = static_cast<std::size_t>(target);
        if (cls >= out.size())
            throw std::invalid_argument("class index out of range");
        const double m = *std::max_element(out.begin(), out.end());
        double z = 0.0;
        for (double v : out)
            z += std::exp(v - m);
        const double log_z = m + std::log(z);
        if (!d_out.empty())
            for (std::size_t k = 0; k < out.size(); ++k)
                d_out[k] = std::exp(out[k] - log_z) - (k == cls ? 1.0 : 0.0);
        return log_z - out[cls];
    }

    /// Softmax probability of class 1 (binary classifiers).
    double positive_probability(std::span<const double> input) const
    {
        const auto out = forward(input);
        if (out.size() < 2)
            throw std::logic_error("positive_probability needs at least two outputs");
        const double m = *std::max_element(out.begin(), out.end());
        double z = 0.0;
        for (double v : out)
            z += std::exp(v - m);
        return std::exp(out[1] - m) / z;
    }

private:
    struct Workspace
    {
        std::vector<std::vector<double>> acts;  // post-activation per layer / per step
    };

    std::vector<std::size_t> layer_sizes() const
    {
        std::vector<std::size_t> s{spec_.input_size()};
        if (spec_.arch == Architecture::Mlp)
            s.insert(s.end(), spec_.hidden.begin(), spec_.hidden.end());
        s.push_back(spec_.outputs);
        return s;
    }

    std::size_t count_parameters() const
    {
        if (spec_.arch == Architecture::Rnn) {
            const std::size_t h = spec_.hidden.front();
            return h * spec_.dims + h * h + h + spec_.outputs * h + spec_.outputs;
        }
        const auto sizes = layer_sizes();
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
            n += sizes[l + 1] * sizes[l] + sizes[l + 1];
        return n;
    }

    // y = W x + b with W row-major (rows x cols) at params_[off].
    void affine(std::size_t off, std::size_t rows, std::size_t cols, std::span<const double> x,
                std::span<double> y) const
    {
        const double* w = params_.data() + off;
        const double* b = w + rows * cols;
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = b[r];
            for (std::size_t c = 0; c < cols; ++c)
                acc += w[r * cols + c] * x[c];
            y[r] = acc;
        }
    }

    std::vector<double> run_forward(std::span<const double> input, Workspace& ws) const
    {
        if (input.size() != spec_.input_size())
            throw std::invalid_argument("Model: input size " + std::to_string(input.size()) + ", expected "
                                        + std::to_string(spec_.input_size()));
        if (spec_.arch == Architecture::Rnn)
            return rnn_forward(input, ws);

        const auto sizes = layer_sizes();
        ws.acts.assign(1, std::vector<double>(input.begin(), input.end()));
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            std::vector<double> y(sizes[l + 1]);
            affine(off, sizes[l + 1], sizes[l], ws.acts.back(), y);
            off += sizes[l + 1] * sizes[l] + sizes[l + 1];
            if (l + 2 < sizes.size())
                for (double& v : y)
                    v = std::tanh(v);
            ws.acts.push_back(std::move(y));
        }
        return ws.acts.back();
    }

    void run_backward(std::span<const double> input, const Workspace& ws, std::span<const double> d_out,
                      std::span<double> grad) const
    {
        if (spec_.arch == Architecture::Rnn) {
            rnn_backward(input, ws, d_out, grad);
            return;
        }
        const auto sizes = layer_sizes();
        std::vector<std::size_t> offsets;
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            offsets.push_back(off);
            off += sizes[l + 1] * sizes[l] + sizes[l + 1];
        }
        std::vector<double> delta(d_out.begin(), d_out.end());
        for (std::size_t l = sizes.size() - 1; l-- > 0;) {
            const std::size_t rows = sizes[l + 1], cols = sizes[l];
            const auto& x = ws.acts[l];
            double* gw = grad.data() + offsets[l];
            double* gb = gw + rows * cols;
            for (std::size_t r = 0; r < rows; ++r) {
                gb[r] += delta[r];
                for (std::size_t c = 0; c < cols; ++c)
                    gw[r * cols + c] += delta[r] * x[c];
            }
            if (l == 0)
                break;
            const double* w = params_.data() + offsets[l];
            std::vector<double> prev(cols, 0.0);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c)
                    prev[c] += w[r * cols + c] * delta[r];
            for (std::size_t c = 0; c < cols; ++c)
                prev[c] *= 1.0 - x[c] * x[c];
            delta = std::move(prev);
        }
    }

    // Elman layout: Wx (h x d), Wh (h x h), bh (h), Wo (o x h), bo (o).
    std::vector<double> rnn_forward(std::span<const double> input, Workspace& ws) const
    {
        const std::size_t h = spec_.hidden.front(), d = spec_.dims, o = spec_.outputs;
        const double* wx = params_.data();
        const double* wh = wx + h * d;
        const double* bh = wh + h * h;
        ws.acts.assign(1, std::vector<double>(h, 0.0));
        for (std::size_t t = 0; t < spec_.window; ++t) {
            const auto& prev = ws.acts.back();
            std::vector<double> next(h);
            for (std::size_t i = 0; i < h; ++i) {
                double acc = bh[i];
                for (std::size_t j = 0; j < d; ++j)
                    acc += wx[i * d + j] * input[t * d + j];
                for (std::size_t j = 0; j < h; ++j)
                    acc += wh[i * h + j] * prev[j];
                next[i] = std::tanh(acc);
            }
            ws.acts.push_back(std::move(next));
        }
        std::vector<double> out(o);
        affine(h * d + h * h + h, o, h, ws.acts.back(), out);
        return out;
    }

    void rnn_backward(std::span<const double> input, const Workspace& ws, std::span<const double> d_out,
                      std::span<double> grad) const
    {
        const std::size_t h = spec_.hidden.front(), d = spec_.dims, o = spec_.outputs;
        const std::size_t off_wh = h * d, off_bh = off_wh + h * h, off_wo = off_bh + h, off_bo = off_wo + o * h;
        const double* wh = params_.data() + off_wh;
        const double* wo = params_.data() + off_wo;

        std::vector<double> dh(h, 0.0);
        const auto& last = ws.acts.back();
        for (std::size_t r = 0; r < o; ++r) {
            grad[off_bo + r] += d_out[r];
            for (std::size_t c = 0; c < h; ++c) {
                grad[off_wo + r * h + c] += d_out[r] * last[c];
                dh[c] += wo[r * h + c] * d_out[r];
            }
        }
        for (std::size_t t = spec_.window; t-- > 0;) {
            const auto& cur = ws.acts[t + 1];
            const auto& prev = ws.acts[t];
            std::vector<double> da(h);
            for (std::size_t i = 0; i < h; ++i)
                da[i] = dh[i] * (1.0 - cur[i] * cur[i]);
            std::vector<double> next_dh(h, 0.0);
            for (std::size_t i = 0; i < h; ++i) {
                grad[off_bh + i] += da[i];
                for (std::size_t j = 0; j < d; ++j)
                    grad[i * d + j] += da[i] * input[t * d + j];
                for (std::size_t j = 0; j < h; ++j) {
                    grad[off_wh + i * h + j] += da[i] * prev[j];
                    next_dh[j] += wh[i * h + j] * da[i];
                }
            }
            dh = std::move(next_dh);
        }
    }

    ModelSpec spec_;
    std::vector<double> params_;
};

} // namespace crucial::model
