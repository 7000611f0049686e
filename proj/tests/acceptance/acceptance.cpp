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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include "crucial/experiments.hpp"
#include "crucial/property_suites.hpp"
#include "crucial/sampler_sim.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#ifndef CRUCIAL_CLI_PATH
#error "CRUCIAL_CLI_PATH must point at the CLI executable"
#endif

using namespace crucial;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool ok, const std::string& detail)
{
    std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string suite_line(const suites::SuiteResult& r)
{
    return fmt("%s %s (%zu checks, max err %.3g)", r.name.c_str(), r.passed ? "ok" : "FAILED", r.checks,
               r.max_error);
}

void criterion_1()
{
    const auto t0 = Clock::now();
    const auto r = suites::lambert_residual({});
    const double t = seconds_since(t0);
    verdict(1, r.passed && r.checks == 10000 && t < 1.0,
            fmt("max residual %.3g over %zu points, %.3f s", r.max_error, r.checks, t));
}

void criterion_2()
{
    suites::SuiteOptions opt;
    opt.draws = 1000;
    const auto r = suites::kappa_argmin(opt);
    verdict(2, r.passed, fmt("max |kappa - oracle| %.3g over %zu checks (incl. kappa(l=eps)=1, cap=e)",
                             r.max_error, r.checks));
}

void criterion_3()
{
    suites::SuiteOptions opt;
    opt.draws = 1000;
    bool ok = true;
    std::string detail;
    for (auto suite : {suites::translation_invariance, suites::homogeneity, suites::generalization,
                       suites::differentiated_scaling, suites::sin_period_four}) {
        const auto r = suite(opt);
        ok = ok && r.passed;
        detail += (detail.empty() ? "" : "; ") + suite_line(r);
    }
    verdict(3, ok, detail);
}

void criterion_4()
{
    const auto t0 = Clock::now();
    bool ok = true;
    std::size_t points = 0;
    double worst_z = 0.0;
    for (double sigma : {0.1, 0.5, 1.0, 2.0})
        for (double rate : {0.5, 1.0, 2.0}) {
            const auto pop = sim::LossPopulation::normal(0.0, sigma);
            const auto r = sim::evaluate_grid_point(pop, rate, 1000000, derive_seed(4, points++));
            const double want_p = rate * rate * std::pow(sigma, 4) + sigma * sigma;
            const bool exact_u = std::abs(r.analytic_eu - sigma * sigma) <= 1e-12 * sigma * sigma;
            const bool exact_p = std::abs(r.analytic_ep - want_p) <= 1e-12 * want_p;
            const double zu = std::abs(r.mc_eu - r.analytic_eu) / r.stderr_eu;
            const double zp = std::abs(r.mc_ep - r.analytic_ep) / r.stderr_ep;
            worst_z = std::max({worst_z, zu, zp});
            const bool point_ok = exact_u && exact_p && zu <= 3.0 && zp <= 3.0 && r.analytic_eu < r.analytic_ep;
            if (!point_ok)
                std::printf("    grid point sigma=%g lambda=%g failed (z_U %.2f, z_P %.2f)\n", sigma, rate, zu, zp);
            ok = ok && point_ok;
        }
    const double t = seconds_since(t0);
    verdict(4, ok && t < 30.0, fmt("%zu grid points, worst |MC - analytic| = %.2f stderr, %.2f s", points,
                                   worst_z, t));
}

void criterion_5()
{
    const auto r = sim::evaluate_grid_point(sim::LossPopulation::half_normal(0.0, 0.5), 1.0, 1000000,
                                            derive_seed(5, 0));
    const bool ok = r.stderr_eu < 0.01 * r.mc_eu && r.stderr_ep < 0.01 * r.mc_ep;
    verdict(5, ok,
            fmt("E_U %.6g (se %.2g), E_P %.6g (se %.2g); analytic ordering %s, MC ordering %s -> %s", r.mc_eu,
                r.stderr_eu, r.mc_ep, r.stderr_ep, sim::ordering_name(r.analytic_ordering),
                sim::ordering_name(r.mc_ordering), r.orderings_agree() ? "agree" : "disagree"));
}

void criterion_6()
{
    suites::SuiteOptions opt;
    opt.draws = 100;
    const auto r = suites::model_gradients(opt);
    verdict(6, r.passed, fmt("%zu gradient comparisons over linear/mlp/rnn, max rel err %.3g (tol %.0e)", r.checks,
                             r.max_error, r.tolerance));
}

void criterion_7()
{
    const experiments::SineSetup data;
    const auto setup = experiments::regression_defaults();
    std::vector<double> plain, adp, sin;
    double slowest = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ds = experiments::sine_data(data, seed);
        auto timed = [&](std::optional<CrucialConfig> w) {
            const auto t0 = Clock::now();
            const double mse = experiments::run_regression(ds, setup, w, seed).final_test_mse;
            slowest = std::max(slowest, seconds_since(t0));
            return mse;
        };
        plain.push_back(timed(std::nullopt));
        adp.push_back(timed(experiments::default_wrapper(Variant::Adp)));
        auto s = experiments::default_wrapper(Variant::Sin);
        s.omega = std::numbers::pi / 4.0;
        sin.push_back(timed(s));
    }
    const double mp = train::median(plain), ma = train::median(adp), ms = train::median(sin);
    verdict(7, ma <= 1.05 * mp && ms <= 1.05 * mp && slowest < 60.0,
            fmt("median test MSE plain %.5g, ADP %.5g (ratio %.4f), SIN %.5g (ratio %.4f); slowest run %.2f s", mp,
                ma, ma / mp, ms, ms / mp, slowest));
}

void criterion_8()
{
    const experiments::DriftSetup data;
    const auto setup = experiments::classification_defaults();
    std::vector<double> bwt_plain, bwt_adp, fwt_plain, fwt_adp;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto ds = std::make_shared<const data::Dataset>(experiments::drift_data(data, seed));
        const auto p = experiments::run_continuous(ds, data.cuts, setup, std::nullopt, seed);
        const auto a = experiments::run_continuous(ds, data.cuts, setup, experiments::default_wrapper(Variant::Adp),
                                                   seed);
        bwt_plain.push_back(train::bwt(p));
        fwt_plain.push_back(train::fwt(p));
        bwt_adp.push_back(train::bwt(a));
        fwt_adp.push_back(train::fwt(a));
    }
    const double bp = train::median(bwt_plain), ba = train::median(bwt_adp);
    const double fp = train::median(fwt_plain), fa = train::median(fwt_adp);
    verdict(8, ba >= bp && fa >= fp,
            fmt("median BWT plain %.5f vs ADP %.5f (%s); median FWT plain %.5f vs ADP %.5f (%s)", bp, ba,
                ba >= bp ? "ok" : "worse", fp, fa, fa >= fp ? "ok" : "worse"));
}

void criterion_9()
{
    const experiments::DriftSetup data;
    auto setup = experiments::classification_defaults();
    setup.epochs = 40;
    std::size_t min_maxima = SIZE_MAX;
    std::string counts;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ds = experiments::drift_data(data, seed);
        const auto r =
            experiments::run_classification(ds, setup, experiments::default_wrapper(Variant::Adp), seed);
        const auto m = train::count_local_maxima(r.kappa_counts);
        min_maxima = std::min(min_maxima, m);
        counts += (counts.empty() ? "" : ",") + std::to_string(m);
    }
    const auto trace = sim::distribution_cycle_sim(2000, 100, SeededRng(derive_seed(9, "cycle")));
    const auto flips = sim::skewness_sign_changes(trace);
    verdict(9, min_maxima >= 3 && flips >= 10,
            fmt("local maxima of the kappa>=1 count per seed {%s}; skewness sign changes %zu over 100 epochs",
                counts.c_str(), flips));
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

/// Compares every file of `a` and `b` except the resolved config, whose
/// `workers` entry legitimately differs.
bool same_outputs(const fs::path& a, const fs::path& b, bool include_config, std::string& why)
{
    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(a))
        names.push_back(e.path().filename());
    std::size_t nb = std::distance(fs::directory_iterator(b), fs::directory_iterator{});
    if (names.empty() || names.size() != nb) {
        why = "file sets differ";
        return false;
    }
    for (const auto& n : names) {
        if (!include_config && n == "resolved_config.ini")
            continue;
        if (!fs::exists(b / n) || slurp(a / n) != slurp(b / n)) {
            why = n.string() + " differs";
            return false;
        }
    }
    return true;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + CRUCIAL_CLI_PATH + "\" " + args + " > /dev/null";
    return std::system(cmd.c_str());
}

void criterion_10()
{
    const fs::path root = fs::temp_directory_path() / "crucial_acceptance_determinism";
    fs::remove_all(root);
    bool ok = true;
    std::string detail;
    for (const std::string command : {"properties", "simulate"}) {
        const std::string extra = command == "simulate" ? " --sigmas 0.1,0.5,1,2 --rates 0.5,1,2 --n 1000000" : "";
        std::vector<fs::path> dirs;
        int status = 0;
        for (const auto& [tag, workers] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 1}, {"c", 4}}) {
            dirs.push_back(root / (command + "_" + tag));
            status |= run_cli(command + " --seed 7 --workers " + std::to_string(workers) + " --output-dir "
                              + dirs.back().string() + extra);
        }
        std::string why;
        const bool runs_match = same_outputs(dirs[0], dirs[1], true, why);
        std::string why_workers;
        const bool workers_match = same_outputs(dirs[0], dirs[2], false, why_workers);
        const bool cmd_ok = status == 0 && runs_match && workers_match;
        ok = ok && cmd_ok;
        detail += (detail.empty() ? "" : "; ") + command + ": "
                  + (status != 0 ? "non-zero exit"
                                 : !runs_match ? "repeat " + why
                                               : !workers_match ? "1 vs 4 workers " + why_workers
                                                                : "byte-identical");
    }
    fs::remove_all(root);
    verdict(10, ok, detail);
}

} // namespace

int main()
{
    const auto t0 = Clock::now();
    const std::vector<std::function<void()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                      criterion_5, criterion_6, criterion_7, criterion_8,
                                                      criterion_9, criterion_10};
    for (const auto& c : criteria) {
        try {
            c();
        } catch (const std::exception& e) {
            std::printf("criterion error: %s\n", e.what());
            ++failures;
        }
    }
    std::printf("%d criteria failed (%.1f s total)\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
