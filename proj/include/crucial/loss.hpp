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

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>

namespace crucial {

enum class Variant { Baseline, Sin, Adp };

/// Closed form used for the confidence coefficient.
///
/// Argmin is the exact minimizer exp(-W0(max(-2/e, beta) / 2)). MainText is
/// exp(-W0(max(-2/e, beta)) / 2), kept for comparison only; its W argument is
/// clamped at -1/e because W0 is undefined below it.
enum class KappaForm { Argmin, MainText };

struct MuPolicy
{
    enum class Kind { EpochMean, FixedValue };
    Kind kind = Kind::EpochMean;
    double value = 0.0;

    static MuPolicy epoch_mean() { return {}; }
    static MuPolicy fixed(double v) { return {Kind::FixedValue, v}; }
};

struct CrucialConfig
{
    Variant variant = Variant::Adp;
    /// Regularization coefficient; Sin derives its own per epoch.
    double lambda = 0.01;
    /// Angular frequency (radians per epoch) and phase of the Sin schedule.
    double omega = std::numbers::pi / 4.0;
    double phase = 0.0;
    MuPolicy mu_policy;
    /// Constant threshold for the Baseline variant.
    double baseline_threshold = std::numbers::ln2;
    KappaForm kappa_form = KappaForm::Argmin;
    /// Enforce lambda <= 0.01, the regime in which the sampling analysis applies.
    bool theorem_mode = false;
    /// Pin kappa to 1 and the threshold to 0 (plain base loss, for neutrality checks).
    bool force_unit_kappa = false;

    void validate() const
    {
        if (variant != Variant::Sin && !(lambda > 0.0))
            throw std::invalid_argument("CrucialConfig: lambda must be > 0");
        if (theorem_mode && lambda > 0.01)
            throw std::invalid_argument("CrucialConfig: theorem mode requires lambda <= 0.01");
        if (variant == Variant::Sin && omega == 0.0)
            throw std::invalid_argument("CrucialConfig: omega must be nonzero for Sin");
        if (!std::isfinite(omega) || !std::isfinite(phase))
            throw std::invalid_argument("CrucialConfig: omega and phase must be finite");
    }
};

/// Per-sample output of the loss wrapper.
struct ModulatedLoss
{
    double input_loss = 0.0;
    double kappa = 0.0;
    double threshold = 0.0;
    /// Selection gate of the Sin variant; 0 for the other variants.
    double epoch_threshold = 0.0;
    double value = 0.0;
    bool selected = false;
};

struct EpochState
{
    std::size_t epoch_index = 0;
    std::optional<LossStats> prev_stats;
    double threshold = 0.0;
};

/// L = kappa * phi_d(l, eps) + phi_c(kappa): the wrapper's general shape.
template <class Differentiation, class Constraint>
double general_form(double kappa, double loss, double threshold, Differentiation&& phi_d,
                    Constraint&& phi_c)
{
    return kappa * phi_d(loss, threshold) + phi_c(kappa);
}

namespace detail {

/// log(kappa*) for a given scaled margin beta = (l - eps) / lambda.
inline double log_kappa_from_beta(double beta, KappaForm form)
{
    constexpr double cap = -2.0 / std::numbers::e;
    const double b = beta < cap ? cap : beta;
    if (form == KappaForm::Argmin)
        return -lambert_w0(b / 2.0);
    const double arg = b < -1.0 / std::numbers::e ? -1.0 / std::numbers::e : b;
    return -0.5 * lambert_w0(arg);
}

struct KappaValue
{
    double kappa;
    double value;
};

inline KappaValue modulate(double loss, double threshold, double lambda, KappaForm form)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("kappa_star: lambda must be > 0");
    const double margin = loss - threshold;
    const double log_kappa = log_kappa_from_beta(margin / lambda, form);
    const double kappa = std::exp(log_kappa);
    const double value = general_form(
        kappa, loss, threshold, [](double l, double eps) { return l - eps; },
        [&](double) { return lambda * log_kappa * log_kappa; });
    return {kappa, value};
}

} // namespace detail

/// Confidence coefficient minimizing kappa * (loss - threshold) + lambda * log(kappa)^2.
/// Equals e once (loss - threshold) / lambda <= -2/e.
inline double kappa_star(double loss, double threshold, double lambda,
                         KappaForm form = KappaForm::Argmin)
{
    return detail::modulate(loss, threshold, lambda, form).kappa;
}

inline ModulatedLoss baseline_confidence_loss(double loss, double threshold, double lambda,
                                              KappaForm form = KappaForm::Argmin)
{
    const auto kv = detail::modulate(loss, threshold, lambda, form);
    return {loss, kv.kappa, threshold, 0.0, kv.value, true};
}

inline EpochState initial_epoch_state() { return {}; }

/// Threshold for the epoch after `completed_epoch`, from that epoch's raw losses:
/// skewness times mean loss.
inline EpochState advance_epoch_adp(std::span<const double> prev_losses, const CrucialConfig& cfg,
                                    std::size_t completed_epoch = 0)
{
    if (prev_losses.empty())
        throw std::invalid_argument("advance_epoch_adp: empty loss list");
    EpochState state;
    state.epoch_index = completed_epoch + 1;
    state.prev_stats = loss_stats(prev_losses);
    const double mu = cfg.mu_policy.kind == MuPolicy::Kind::FixedValue ? cfg.mu_policy.value
                                                                         : state.prev_stats->mean;
    state.threshold = state.prev_stats->skewness * mu;
    return state;
}

inline ModulatedLoss crucial_adp(double loss, const EpochState& state, const CrucialConfig& cfg)
{
    if (cfg.force_unit_kappa)
        return {loss, 1.0, 0.0, 0.0, loss, true};
    const auto kv = detail::modulate(loss, state.threshold, cfg.lambda, cfg.kappa_form);
    return {loss, kv.kappa, state.threshold, 0.0, kv.value, true};
}

/// F = sin^2(omega * epoch + phase), reduced in half-turns so that omega / pi
/// values with short binary expansions give bit-exact periodicity.
inline double sin_schedule(std::size_t epoch, double omega, double phase)
{
    const double half_turns = static_cast<double>(epoch) * (omega / std::numbers::pi)
                              + phase / std::numbers::pi;
    double r = std::fmod(half_turns, 1.0);
    if (r < 0.0)
        r += 1.0;
    const double s = std::sin(std::numbers::pi * r);
    return s * s;
}

/// Manual-cycle variant. Samples below the gate F * mu / 2 are dropped; the
/// rest are modulated around (1 - F) * mu with lambda = -log(F).
inline ModulatedLoss crucial_sin(double loss, std::size_t epoch, double mu_l, const CrucialConfig& cfg)
{
    if (cfg.mu_policy.kind == MuPolicy::Kind::EpochMean && !(mu_l > 0.0))
        throw std::invalid_argument("crucial_sin: mean loss must be > 0");
    if (!std::isfinite(mu_l))
        throw std::invalid_argument("crucial_sin: non-finite mean loss");

    ModulatedLoss m;
    m.input_loss = loss;
    if (cfg.force_unit_kappa) {
        m.kappa = 1.0;
        m.value = loss;
        m.selected = true;
        return m;
    }

    const double f = sin_schedule(epoch, cfg.omega, cfg.phase);
    m.epoch_threshold = 0.5 * f * mu_l;
    m.threshold = mu_l - 2.0 * m.epoch_threshold;
    if (loss < m.epoch_threshold)
        return m;
    m.selected = true;

    if (f == 0.0) {
        // lambda -> infinity
        m.kappa = 1.0;
        m.value = loss - m.threshold;
    } else if (f == 1.0) {
        // lambda -> 0: kappa collapses to 0 above the threshold and caps below it
        if (loss > m.threshold) {
            m.kappa = 0.0;
            m.value = 0.0;
        } else if (loss == m.threshold) {
            m.kappa = 1.0;
            m.value = 0.0;
        } else {
            m.kappa = std::numbers::e;
            m.value = std::numbers::e * (loss - m.threshold);
        }
    } else {
        const auto kv = detail::modulate(loss, m.threshold, -std::log(f), cfg.kappa_form);
        m.kappa = kv.kappa;
        m.value = kv.value;
    }
    return m;
}

/// Weight applied to d(loss)/dw; at the minimizing kappa, dL/dl = kappa.
inline double loss_gradient_factor(const ModulatedLoss& m) { return m.selected ? m.kappa : 0.0; }

/// Per-epoch driver: holds the threshold state of the configured variant.
class CrucialSchedule
{
public:
    explicit CrucialSchedule(CrucialConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    const CrucialConfig& config() const { return cfg_; }
    const EpochState& state() const { return state_; }
    double mu() const { return mu_; }

    /// `prev_losses` are the raw losses of the previous epoch; for epoch 0
    /// the caller passes losses from a forward pre-pass (used by Sin only).
    void begin_epoch(std::size_t epoch, std::span<const double> prev_losses)
    {
        epoch_ = epoch;
        switch (cfg_.variant) {
        case Variant::Adp:
            if (epoch == 0 || prev_losses.empty())
                state_ = initial_epoch_state();
            else
                state_ = advance_epoch_adp(prev_losses, cfg_, epoch - 1);
            state_.epoch_index = epoch;
            break;
        case Variant::Sin:
            if (cfg_.mu_policy.kind == MuPolicy::Kind::FixedValue)
                mu_ = cfg_.mu_policy.value;
            else
                mu_ = loss_stats(prev_losses).mean;
            state_.epoch_index = epoch;
            state_.threshold = mu_ * (1.0 - sin_schedule(epoch, cfg_.omega, cfg_.phase));
            break;
        case Variant::Baseline:
            state_.epoch_index = epoch;
            state_.threshold = cfg_.baseline_threshold;
            break;
        }
    }

    ModulatedLoss apply(double loss) const
    {
        switch (cfg_.variant) {
        case Variant::Adp:
            return crucial_adp(loss, state_, cfg_);
        case Variant::Sin:
            return crucial_sin(loss, epoch_, mu_, cfg_);
        case Variant::Baseline:
            if (cfg_.force_unit_kappa)
                return {loss, 1.0, 0.0, 0.0, loss, true};
            return baseline_confidence_loss(loss, cfg_.baseline_threshold, cfg_.lambda,
                                            cfg_.kappa_form);
        }
        return {};
    }

private:
    CrucialConfig cfg_;
    EpochState state_;
    std::size_t epoch_ = 0;
    double mu_ = 0.0;
};

inline const char* variant_name(Variant v)
{
    switch (v) {
    case Variant::Baseline:
        return "baseline";
    case Variant::Sin:
        return "sin";
    case Variant::Adp:
        return "adp";
    }
    return "?";
}

inline Variant parse_variant(const std::string& name)
{
    if (name == "baseline")
        return Variant::Baseline;
    if (name == "sin")
        return Variant::Sin;
    if (name == "adp")
        return Variant::Adp;
    throw std::invalid_argument("unknown loss variant: " + name);
}

/// 17 significant digits: enough for an exact round trip of any double.
inline std::string format_real(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_loss_trace_header(std::ostream& os)
{
    os << "epoch,sample_id,input_loss,kappa,threshold,value,selected\n";
}

inline void write_loss_trace_row(std::ostream& os, std::size_t epoch, std::size_t sample_id,
                                 const ModulatedLoss& m)
{
    os << epoch << ',' << sample_id << ',' << format_real(m.input_loss) << ','
       << format_real(m.kappa) << ',' << format_real(m.threshold) << ',' << format_real(m.value)
       << ',' << (m.selected ? 1 : 0) << '\n';
}

} // namespace crucial
