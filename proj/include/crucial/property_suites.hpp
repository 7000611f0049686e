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

// Self-checking invariant suites. Each suite draws its own random cases from
// a named substream of the run seed and reports the worst observed error.

#include "crucial/data.hpp"
#include "crucial/loss.hpp"
#include "crucial/model.hpp"
#include "crucial/numerics.hpp"
#include "crucial/parallel.hpp"
#include "crucial/sampler_sim.hpp"
#include "crucial/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace crucial::suites {

struct SuiteOptions
{
    KappaForm kappa_form = KappaForm::Argmin;
    std::uint64_t seed = 0;
    std::size_t draws = 1000;
};

struct SuiteResult
{
    SuiteResult() = default;
    explicit SuiteResult(std::string n) : name(std::move(n)) {}

    std::string name;
    bool passed = true;
    std::size_t checks = 0;
    std::size_t failures = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    /// First failing case, if any.
    std::string first_failure;

    void record(bool ok, double error, const std::function<std::string()>& describe = {})
    {
        ++checks;
        if (std::isfinite(error))
            max_error = std::max(max_error, error);
        if (!ok) {
            ++failures;
            passed = false;
            if (first_failure.empty() && describe)
                first_failure = describe();
        }
    }
};

namespace detail {

inline std::string fmt(std::initializer_list<std::pair<const char*, double>> kv)
{
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, v] : kv) {
        os << (first ? "" : " ") << k << '=' << format_real(v);
        first = false;
    }
    return os.str();
}

/// Golden-section minimum of f over [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi)
{
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// argmin over kappa in (0, e] of kappa * (l - eps) + lambda * log(kappa)^2, searched in log space.
inline double argmin_kappa(double loss, double threshold, double lambda)
{
    const double d = loss - threshold;
    const double x = golden_min([&](double s) { return std::exp(s) * d + lambda * s * s; }, -60.0, 1.0);
    return std::exp(x);
}

} // namespace detail

inline SuiteResult lambert_residual(const SuiteOptions&)
{
    SuiteResult r{"lambert_w_residual"};
    r.tolerance = 1e-12;
    const int n = 10000;
    const double lo = -1.0 / std::numbers::e;
    for (int i = 0; i < n; ++i) {
        const double x = lo + (10.0 - lo) * i / (n - 1);
        const double w = lambert_w0(x);
        const double err = std::abs(w * std::exp(w) - x);
        r.record(err <= r.tolerance, err, [&] { return detail::fmt({{"x", x}, {"w", w}}); });
    }
    return r;
}

inline SuiteResult kappa_argmin(const SuiteOptions& opt)
{
    SuiteResult r{"kappa_argmin_oracle"};
    r.tolerance = 1e-6;
    SeededRng rng = SeededRng(opt.seed).fork("kappa_argmin");
    for (std::size_t i = 0; i < opt.draws; ++i) {
        const double l = rng.uniform(0.0, 3.0);
        const double eps = rng.uniform(-1.0, 3.0);
        const double lambda = std::exp(rng.uniform(std::log(1e-3), 0.0));
        const double k = kappa_star(l, eps, lambda, opt.kappa_form);
        const double ref = detail::argmin_kappa(l, eps, lambda);
        const double err = std::abs(k - ref);
        r.record(err <= r.tolerance, err,
                 [&] { return detail::fmt({{"loss", l}, {"threshold", eps}, {"lambda", lambda}, {"kappa", k},
                                           {"oracle", ref}}); });
    }
    const double at = kappa_star(0.4, 0.4, 0.05, opt.kappa_form);
    r.record(at == 1.0, std::abs(at - 1.0), [&] { return detail::fmt({{"kappa_at_threshold", at}}); });
    const double cap = kappa_star(-1.0, 1.0, 0.05, opt.kappa_form);
    r.record(cap == std::numbers::e, std::abs(cap - std::numbers::e),
             [&] { return detail::fmt({{"kappa_cap", cap}}); });
    return r;
}

inline SuiteResult kappa_bounds(const SuiteOptions& opt)
{
    SuiteResult r{"kappa_bounds"};
    SeededRng rng = SeededRng(opt.seed).fork("kappa_bounds");
    for (std::size_t i = 0; i < opt.draws; ++i) {
        const double l = rng.uniform(-50.0, 50.0), eps = rng.uniform(-50.0, 50.0);
        const double lambda = std::exp(rng.uniform(-7.0, 3.0));
        const double k = kappa_star(l, eps, lambda, opt.kappa_form);
        r.record(k > 0.0 && k <= std::numbers::e, 0.0, [&] { return detail::fmt({{"kappa", k}}); });
    }
    return r;
}

/// Property 1: adding C to loss and threshold leaves kappa and value unchanged.
inline SuiteResult translation_invariance(const SuiteOptions& opt)
{
    SuiteResult r{"property1_translation"};
    r.tolerance = 1e-12;
    SeededRng rng = SeededRng(opt.seed).fork("property1");
    for (std::size_t i = 0; i < opt.draws; ++i) {
        const double l = rng.uniform(0.0, 5.0), eps = rng.uniform(0.0, 5.0);
        const double lambda = std::exp(rng.uniform(std::log(1e-3), 0.0));
        const double c = rng.uniform(-10.0, 10.0);
        const auto a = baseline_confidence_loss(l, eps, lambda, opt.kappa_form);
        const auto b = baseline_confidence_loss(l + c, eps + c, lambda, opt.kappa_form);
        const double err = std::max(std::abs(a.kappa - b.kappa), std::abs(a.value - b.value));
        r.record(err <= r.tolerance, err,
                 [&] { return detail::fmt({{"loss", l}, {"threshold", eps}, {"lambda", lambda}, {"C", c}}); });
    }
    return r;
}

/// Property 2: (C l, C eps, C lambda) scales the value by C.
inline SuiteResult homogeneity(const SuiteOptions& opt)
{
    SuiteResult r{"property2_homogeneity"};
    r.tolerance = 1e-10;
    SeededRng rng = SeededRng(opt.seed).fork("property2");
    for (std::size_t i = 0; i < opt.draws; ++i) {
        const double l = rng.uniform(0.0, 5.0), eps = rng.uniform(0.0, 5.0);
        const double lambda = std::exp(rng.uniform(std::log(1e-3), 0.0));
        const double c = std::exp(rng.uniform(-4.0, 4.0));
        const double base = c * baseline_confidence_loss(l, eps, lambda, opt.kappa_form).value;
        const double scaled = baseline_confidence_loss(c * l, c * eps, c * lambda, opt.kappa_form).value;
        const double err = std::abs(scaled - base) / std::max(std::abs(base), 1e-300);
        r.record(err <= r.tolerance || std::abs(scaled - base) <= 1e-300, err,
                 [&] { return detail::fmt({{"loss", l}, {"threshold", eps}, {"lambda", lambda}, {"C", c}}); });
    }
    return r;
}

/// Property 3: kappa = 1 reduces the loss to l - eps.
inline SuiteResult generalization(const SuiteOptions& opt)
{
    SuiteResult r{"property3_generalization"};
    SeededRng rng = SeededRng(opt.seed).fork("property3");
    for (std::size_t i = 0; i < opt.draws; ++i) {
        const double l = rng.uniform(0.0, 5.0), eps = rng.uniform(-2.0, 5.0);
        const double lambda = std::exp(rng.uniform(std::log(1e-3), 0.0));
        const double v = general_form(
            1.0, l, eps, [](double a, double b) { return a - b; },
            [&](double k) { return lambda * std::log(k) * std::log(k); });
        r.record(v == l - eps, std::abs(v - (l - eps)));
        CrucialConfig cfg;
        cfg.force_unit_kappa = true;
        EpochState st;
        st.threshold = eps;
        const auto m = crucial_adp(l, st, cfg);
        r.record(m.kappa == 1.0 && m.value == l, std::abs(m.value - l));
    }
    return r;
}

/// Property 4: easy samples are amplified relative to hard ones.
inline SuiteResult differentiated_scaling(const SuiteOptions& opt)
{
    SuiteResult r{"property4_differentiated_scaling"};
    SeededRng rng = SeededRng(opt.seed).fork("property4");
    const double lambda = 0.01;
    for (std::size_t i = 0; i < opt.draws; ++i) {
        const double eps = rng.uniform(0.0, 2.0);
        const double li = eps - rng.uniform(1e-6, 1.0);
        const double lj = eps + rng.uniform(1e-6, 1.0);
        const auto mi = baseline_confidence_loss(li, eps, lambda, opt.kappa_form);
        const auto mj = baseline_confidence_loss(lj, eps, lambda, opt.kappa_form);
        const double ri = mi.value / (li - eps), rj = mj.value / (lj - eps);
        r.record(ri > rj && mi.kappa > 1.0 && mj.kappa < 1.0, 0.0, [&] {
            return detail::fmt({{"l_i", li}, {"l_j", lj}, {"threshold", eps}, {"ratio_i", ri}, {"ratio_j", rj}});
        });
    }
    return r;
}

inline SuiteResult sin_period_four(const SuiteOptions& opt)
{
    SuiteResult r{"sin_period_4"};
    SeededRng rng = SeededRng(opt.seed).fork("sin_period");
    CrucialConfig cfg;
    cfg.variant = Variant::Sin;
    cfg.kappa_form = opt.kappa_form;
    for (std::size_t i = 0; i < opt.draws; ++i) {
        const double l = rng.uniform(0.0, 3.0), mu = rng.uniform(0.1, 2.0);
        const std::size_t t = rng.below(1000);
        const auto a = crucial_sin(l, t, mu, cfg);
        const auto b = crucial_sin(l, t + 4, mu, cfg);
        r.record(a.value == b.value && a.kappa == b.kappa && a.selected == b.selected,
                 std::abs(a.value - b.value));
    }
    // Period table at omega = pi/4.
    const double mu = 0.8;
    for (std::size_t n = 0; n < 3; ++n) {
        r.record(crucial_sin(0.5, 4 * n, mu, cfg).value == 0.5 - mu, 0.0);
        r.record(crucial_sin(0.5, 4 * n + 2, mu, cfg).value == 0.0, 0.0);
        r.record(!crucial_sin(0.1, 4 * n + 1, mu, cfg).selected, 0.0);
    }
    return r;
}

inline SuiteResult adp_threshold(const SuiteOptions& opt)
{
    SuiteResult r{"adp_threshold"};
    r.tolerance = 1e-9;
    CrucialConfig cfg;
    cfg.kappa_form = opt.kappa_form;
    const std::vector<double> skewed{0.2, 0.2, 0.2, 1.0};
    const double eps = advance_epoch_adp(skewed, cfg).threshold;
    r.record(std::abs(eps - 0.461880215352) <= r.tolerance, std::abs(eps - 0.461880215352));
    const std::vector<double> symmetric{1.0, 2.0, 3.0};
    r.record(std::abs(advance_epoch_adp(symmetric, cfg).threshold) <= 1e-15, 0.0);
    SeededRng rng = SeededRng(opt.seed).fork("adp_threshold");
    for (std::size_t i = 0; i < opt.draws; ++i) {
        std::vector<double> xs(3 + rng.below(30));
        for (double& x : xs)
            x = std::exp(rng.normal());
        const auto st = advance_epoch_adp(xs, cfg);
        const auto s = loss_stats(xs);
        r.record(st.threshold == s.skewness * s.mean && ((st.threshold > 0) == (s.skewness > 0)), 0.0);
    }
    return r;
}

inline SuiteResult gradient_factor(const SuiteOptions& opt)
{
    SuiteResult r{"gradient_factor_envelope"};
    r.tolerance = 1e-6;
    SeededRng rng = SeededRng(opt.seed).fork("gradient_factor");
    CrucialConfig cfg;
    cfg.kappa_form = opt.kappa_form;
    for (std::size_t i = 0; i < opt.draws; ++i) {
        EpochState st;
        st.threshold = rng.uniform(-0.5, 1.5);
        cfg.lambda = std::exp(rng.uniform(std::log(1e-3), 0.0));
        const double l = rng.uniform(0.0, 2.0);
        const double h = 1e-6 * cfg.lambda;
        const double fd = (crucial_adp(l + h, st, cfg).value - crucial_adp(l - h, st, cfg).value) / (2.0 * h);
        const double err = std::abs(loss_gradient_factor(crucial_adp(l, st, cfg)) - fd);
        r.record(err <= r.tolerance, err,
                 [&] { return detail::fmt({{"loss", l}, {"threshold", st.threshold}, {"lambda", cfg.lambda}}); });
    }
    return r;
}

inline SuiteResult skewness_invariance(const SuiteOptions& opt)
{
    SuiteResult r{"loss_stats_shift_scale"};
    r.tolerance = 1e-9;
    SeededRng rng = SeededRng(opt.seed).fork("loss_stats");
    for (std::size_t i = 0; i < opt.draws / 5; ++i) {
        std::vector<double> xs(3 + rng.below(50)), shifted, scaled;
        for (double& x : xs)
            x = std::exp(rng.normal());
        const double c = rng.uniform(-100.0, 100.0), s = std::exp(rng.uniform(-5.0, 5.0));
        for (double x : xs) {
            shifted.push_back(x + c);
            scaled.push_back(x * s);
        }
        const double base = loss_stats(xs).skewness;
        const double err = std::max(std::abs(loss_stats(shifted).skewness - base),
                                    std::abs(loss_stats(scaled).skewness - base))
                           / std::max(1.0, std::abs(base));
        r.record(err <= r.tolerance, err);
    }
    return r;
}

inline SuiteResult model_gradients(const SuiteOptions& opt)
{
    SuiteResult r{"model_gradient_check"};
    r.tolerance = 1e-4;
    SeededRng rng = SeededRng(opt.seed).fork("model_gradients");
    for (auto arch : {model::Architecture::Linear, model::Architecture::Mlp, model::Architecture::Rnn}) {
        for (auto loss : {model::BaseLoss::Mse, model::BaseLoss::CrossEntropy}) {
            model::ModelSpec spec;
            spec.arch = arch;
            spec.window = 5;
            spec.hidden = {4};
            spec.outputs = loss == model::BaseLoss::Mse ? 1 : 3;
            for (int draw = 0; draw < 100; ++draw) {
                model::Model m(spec);
                m.initialize(rng.fork(static_cast<std::uint64_t>(draw)));
                std::vector<double> x(spec.input_size()), dir(m.parameter_count()), g(m.parameter_count(), 0.0);
                for (double& v : x)
                    v = rng.normal();
                for (double& v : dir)
                    v = rng.normal();
                const double target = loss == model::BaseLoss::Mse ? rng.normal() : static_cast<double>(rng.below(3));
                m.loss_and_gradient(x, target, loss, g);
                double analytic = 0.0;
                for (std::size_t k = 0; k < g.size(); ++k)
                    analytic += g[k] * dir[k];
                const std::vector<double> base(m.parameters().begin(), m.parameters().end());
                auto at = [&](double s) {
                    for (std::size_t k = 0; k < base.size(); ++k)
                        m.parameters()[k] = base[k] + s * dir[k];
                    return m.loss(x, target, loss);
                };
                const double h = 1e-5;
                const double fd = (at(h) - at(-h)) / (2.0 * h);
                const double err = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
                r.record(err <= r.tolerance, err, [&] {
                    return std::string(model::architecture_name(arch)) + " draw " + std::to_string(draw);
                });
            }
        }
    }
    return r;
}

inline SuiteResult wrapper_neutrality(const SuiteOptions& opt)
{
    SuiteResult r{"wrapper_neutrality_and_thread_determinism"};
    const auto ds = data::gen_sine_regression(48, 12, 0.1, SeededRng(opt.seed).fork("neutrality-data"));
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    model::ModelSpec spec;
    spec.window = 6;
    spec.hidden = {5};
    const auto examples = train::make_examples(ds, spec.window, all);
    auto run = [&](std::optional<CrucialConfig> w, unsigned workers) {
        model::Model m(spec);
        m.initialize(SeededRng(opt.seed).fork("neutrality-model"));
        train::TaskSpec t;
        t.batch_size = 16;
        t.workers = workers;
        t.loss_wrapper = w;
        train::Trainer trainer(m, t, derive_seed(opt.seed, "neutrality-trainer"));
        for (int e = 0; e < 3; ++e)
            trainer.train_epoch(examples);
        return std::vector<double>(m.parameters().begin(), m.parameters().end());
    };
    const auto plain = run(std::nullopt, 1);
    for (auto v : {Variant::Adp, Variant::Sin, Variant::Baseline}) {
        CrucialConfig c;
        c.variant = v;
        c.force_unit_kappa = true;
        c.kappa_form = opt.kappa_form;
        r.record(run(c, 1) == plain, 0.0, [&] { return std::string("variant ") + variant_name(v); });
    }
    CrucialConfig adp;
    adp.kappa_form = opt.kappa_form;
    r.record(run(adp, 1) == run(adp, 3), 0.0, [] { return std::string("thread count changed parameters"); });
    return r;
}

inline SuiteResult data_invariants(const SuiteOptions& opt)
{
    SuiteResult r{"data_prefix_and_csv"};
    auto ds = std::make_shared<const data::Dataset>(
        data::gen_drift_classification(30, 20, 0.1, 0.2, SeededRng(opt.seed).fork("data-suite")));
    const std::vector<std::size_t> cuts{3, 7, 12, 20};
    const auto ps = data::make_prefixes(ds, cuts);
    for (std::size_t k = 0; k + 1 < ps.size(); ++k)
        for (std::size_t i = 0; i < ds->size(); ++i) {
            const auto a = ps[k].values(i), b = ps[k + 1].values(i);
            r.record(a.size() == cuts[k] && std::equal(a.begin(), a.end(), b.begin()), 0.0);
        }
    std::stringstream ss;
    data::write_csv(ss, *ds);
    const auto back = data::parse_csv(ss);
    bool same = back.rejected.empty() && back.data.size() == ds->size();
    for (std::size_t i = 0; same && i < ds->size(); ++i)
        same = back.data.samples[i].values == ds->samples[i].values && back.data.samples[i].label == ds->samples[i].label;
    r.record(same, 0.0, [] { return std::string("csv round trip"); });
    std::stringstream bad("id,label,v1,v2\n0,1,1,2\n1,0,1\n2,0,x,1\n3,1,1,2\n");
    const auto parsed = data::parse_csv(bad);
    r.record(parsed.rejected.size() == 2 && parsed.data.size() == 2, 0.0,
             [] { return std::string("malformed rows not counted exactly"); });
    return r;
}

inline SuiteResult simulator_orderings(const SuiteOptions&)
{
    SuiteResult r{"normal_population_ordering"};
    for (double sigma : {0.1, 0.5, 1.0, 2.0})
        for (double rate : {0.5, 1.0, 2.0}) {
            const auto a = sim::analytic_expected_errors(sim::LossPopulation::normal(0.0, sigma), rate);
            r.record(a.expected_u < a.expected_p, a.expected_u - a.expected_p);
        }
    return r;
}

using Suite = SuiteResult (*)(const SuiteOptions&);

inline const std::vector<Suite>& all_suites()
{
    static const std::vector<Suite> suites{
        lambert_residual,   kappa_argmin,    kappa_bounds,        translation_invariance, homogeneity,
        generalization,     differentiated_scaling, sin_period_four, adp_threshold,       gradient_factor,
        skewness_invariance, model_gradients, wrapper_neutrality,  data_invariants,       simulator_orderings,
    };
    return suites;
}

/// Runs every suite; results are in a fixed order regardless of `workers`.
inline std::vector<SuiteResult> run_all(const SuiteOptions& opt, unsigned workers = 1)
{
    const auto& suites = all_suites();
    std::vector<SuiteResult> out(suites.size());
    parallel_for(suites.size(), workers, [&](std::size_t i) { out[i] = suites[i](opt); });
    return out;
}

} // namespace crucial::suites
