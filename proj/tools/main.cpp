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

#include "cli_support.hpp"

#include "crucial/data.hpp"
#include "crucial/experiments.hpp"
#include "crucial/property_suites.hpp"
#include "crucial/sampler_sim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>

using namespace crucial;
using namespace crucial::cli;
namespace fs = std::filesystem;

namespace {

struct Common
{
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string output_dir;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", "Key=value configuration file (flags take precedence)");
    cmd->add_option("--seed", c.seed, "Root seed")->capture_default_str();
    cmd->add_option("--workers", c.workers, "Worker threads")->capture_default_str()->check(CLI::Range(1u, 256u));
    cmd->add_option("--output-dir", c.output_dir, "Directory for output files");
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs
{
    Common common;
    std::string population = "normal";
    double mu = 0.0;
    std::string sigmas = "0.1,0.5,1,2";
    std::string rates = "0.5,1,2";
    std::size_t n = 1000000;
    std::string proposal = "tilted";
    std::size_t chunks = 64;
    std::size_t cycle_epochs = 0;
    std::size_t cycle_samples = 2000;
};

int cmd_simulate(const SimulateArgs& a)
{
    const auto sigmas = parse_list<double>(a.sigmas, "sigmas");
    const auto rates = parse_list<double>(a.rates, "rates");
    if (sigmas.empty() || rates.empty())
        throw ConfigError("empty population/rate grid");
    if (a.population != "normal" && a.population != "half-normal")
        throw ConfigError("population must be normal or half-normal");
    if (a.proposal != "tilted" && a.proposal != "population")
        throw ConfigError("proposal must be tilted or population");
    if (a.n < 2)
        throw ConfigError("n must be >= 2");
    const auto out = prepare_output_dir(a.common.output_dir);

    ResolvedConfig rc;
    rc.set("command", "simulate");
    rc.set("seed", a.common.seed);
    rc.set("workers", a.common.workers);
    rc.set("population", a.population);
    rc.set("mu", a.mu);
    rc.set("sigmas", a.sigmas);
    rc.set("rates", a.rates);
    rc.set("n", a.n);
    rc.set("proposal", a.proposal);
    rc.set("chunks", a.chunks);
    rc.set("cycle_epochs", a.cycle_epochs);
    rc.set("cycle_samples", a.cycle_samples);
    rc.write(out / "resolved_config.ini");

    sim::McOptions opt;
    opt.workers = a.common.workers;
    opt.chunks = a.chunks;
    opt.proposal = a.proposal == "tilted" ? sim::Proposal::TiltedMode : sim::Proposal::Population;

    Json summary;
    summary["seed"] = a.common.seed;
    summary["n"] = a.n;
    Json points = Json::array();
    std::ostringstream table;
    table << "population,mu,sigma,lambda,analytic_E_U,analytic_E_P,mc_E_U,mc_E_P,stderr_E_U,stderr_E_P,"
             "analytic_ordering,mc_ordering,passed\n";
    bool all_passed = true;
    std::size_t index = 0;
    for (double sigma : sigmas)
        for (double rate : rates) {
            const auto pop = a.population == "normal" ? sim::LossPopulation::normal(a.mu, sigma)
                                                      : sim::LossPopulation::half_normal(a.mu, sigma);
            sim::ErrorReport r;
            try {
                r = sim::evaluate_grid_point(pop, rate, a.n, derive_seed(a.common.seed, index), opt);
            } catch (const std::domain_error& e) {
                throw ConfigError(std::string("grid point sigma=") + format_real(sigma) + " lambda="
                                  + format_real(rate) + ": " + e.what());
            }
            const auto name = "report_" + std::to_string(index) + ".json";
            write_json(out / name, to_json(r));
            all_passed = all_passed && r.passed();
            points.push_back({{"file", name}, {"sigma", sigma}, {"lambda", rate}, {"passed", r.passed()},
                              {"analytic_ordering", sim::ordering_name(r.analytic_ordering)},
                              {"mc_ordering", sim::ordering_name(r.mc_ordering)}});
            table << pop.name() << ',' << format_real(a.mu) << ',' << format_real(sigma) << ','
                  << format_real(rate) << ',' << format_real(r.analytic_eu) << ',' << format_real(r.analytic_ep)
                  << ',' << format_real(r.mc_eu) << ',' << format_real(r.mc_ep) << ','
                  << format_real(r.stderr_eu) << ',' << format_real(r.stderr_ep) << ','
                  << sim::ordering_name(r.analytic_ordering) << ',' << sim::ordering_name(r.mc_ordering) << ','
                  << (r.passed() ? "true" : "false") << '\n';
            std::printf("%-11s sigma=%-6g lambda=%-6g E_U %.6g (mc %.6g)  E_P %.6g (mc %.6g)  %s\n",
                        pop.name().c_str(), sigma, rate, r.analytic_eu, r.mc_eu, r.analytic_ep, r.mc_ep,
                        r.passed() ? "PASS" : "FAIL");
            ++index;
        }
    summary["points"] = points;
    summary["passed"] = all_passed;

    if (a.cycle_epochs > 0) {
        if (a.cycle_samples < 1000)
            throw ConfigError("cycle_samples must be >= 1000");
        const auto trace = sim::distribution_cycle_sim(a.cycle_samples, a.cycle_epochs,
                                                       SeededRng(derive_seed(a.common.seed, "cycle")));
        std::ostringstream csv;
        csv << "epoch,mean,std_dev,skewness\n";
        for (std::size_t e = 0; e < trace.size(); ++e)
            csv << e << ',' << format_real(trace[e].mean) << ',' << format_real(trace[e].std_dev) << ','
                << format_real(trace[e].skewness) << '\n';
        write_text(out / "cycle_skewness.csv", csv.str());
        summary["cycle"] = {{"epochs", a.cycle_epochs}, {"sign_changes", sim::skewness_sign_changes(trace)}};
    }
    write_json(out / "summary.json", summary);
    write_text(out / "summary.csv", table.str());
    return all_passed ? Ok : CheckFailed;
}

// ---------------------------------------------------------------------------
// properties

struct PropertiesArgs
{
    Common common;
    std::string kappa_form = "argmin";
    std::size_t draws = 1000;
};

int cmd_properties(const PropertiesArgs& a)
{
    suites::SuiteOptions opt;
    opt.kappa_form = parse_kappa_form(a.kappa_form);
    opt.seed = a.common.seed;
    opt.draws = a.draws;
    if (a.draws == 0)
        throw ConfigError("draws must be >= 1");
    const auto out = prepare_output_dir(a.common.output_dir);
    ResolvedConfig rc;
    rc.set("command", "properties");
    rc.set("seed", a.common.seed);
    rc.set("workers", a.common.workers);
    rc.set("kappa_form", a.kappa_form);
    rc.set("draws", a.draws);
    rc.write(out / "resolved_config.ini");

    const auto results = suites::run_all(opt, a.common.workers);
    Json j;
    j["seed"] = a.common.seed;
    j["kappa_form"] = a.kappa_form;
    Json arr = Json::array();
    bool ok = true;
    for (const auto& r : results) {
        arr.push_back({{"name", r.name}, {"passed", r.passed}, {"checks", r.checks}, {"failures", r.failures},
                       {"max_error", r.max_error}, {"tolerance", r.tolerance}, {"first_failure", r.first_failure}});
        ok = ok && r.passed;
        std::printf("%-44s %s  (%zu checks, %zu failures)\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.checks,
                    r.failures);
    }
    j["suites"] = arr;
    j["passed"] = ok;
    write_json(out / "properties.json", j);
    return ok ? Ok : CheckFailed;
}

// ---------------------------------------------------------------------------
// trace-loss

struct TraceArgs
{
    Common common;
    std::string variant = "baseline";
    double lambda = 0.1;
    double threshold = std::numbers::ln2;
    double easy_loss = 0.3;
    double hard_loss = 2.0;
    double decay = 0.15;
    std::size_t epochs = 30;
    std::string kappa_form = "argmin";
};

int cmd_trace_loss(const TraceArgs& a)
{
    CrucialConfig cfg;
    try {
        cfg.variant = parse_variant(a.variant);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    cfg.lambda = a.lambda;
    cfg.baseline_threshold = a.threshold;
    cfg.kappa_form = parse_kappa_form(a.kappa_form);
    if (!(a.easy_loss >= 0.0) || !(a.hard_loss >= 0.0) || !(a.decay >= 0.0))
        throw ConfigError("losses and decay must be >= 0");
    CrucialSchedule schedule(cfg);
    const auto out = prepare_output_dir(a.common.output_dir);
    ResolvedConfig rc;
    rc.set("command", "trace-loss");
    rc.set("seed", a.common.seed);
    rc.set("variant", a.variant);
    rc.set("lambda", a.lambda);
    rc.set("threshold", a.threshold);
    rc.set("easy_loss", a.easy_loss);
    rc.set("hard_loss", a.hard_loss);
    rc.set("decay", a.decay);
    rc.set("epochs", a.epochs);
    rc.set("kappa_form", a.kappa_form);
    rc.write(out / "resolved_config.ini");

    // Both losses decay geometrically; the hard one starts higher and so
    // crosses the threshold later.
    std::ostringstream csv;
    csv << "epoch,sample,input_loss,kappa,log_kappa,threshold,value,selected\n";
    std::vector<double> prev;
    for (std::size_t e = 0; e < a.epochs; ++e) {
        const double shrink = std::exp(-a.decay * static_cast<double>(e));
        const std::vector<double> losses{a.easy_loss * shrink, a.hard_loss * shrink};
        schedule.begin_epoch(e, prev.empty() ? std::span<const double>(losses) : std::span<const double>(prev));
        const char* names[] = {"easy", "hard"};
        for (std::size_t i = 0; i < 2; ++i) {
            const auto m = schedule.apply(losses[i]);
            csv << e << ',' << names[i] << ',' << format_real(m.input_loss) << ',' << format_real(m.kappa) << ','
                << format_real(m.kappa > 0.0 ? std::log(m.kappa) : -INFINITY) << ',' << format_real(m.threshold)
                << ',' << format_real(m.value) << ',' << (m.selected ? 1 : 0) << '\n';
        }
        prev = losses;
    }
    write_text(out / "loss_trace.csv", csv.str());
    return Ok;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenArgs
{
    Common common;
    std::string kind = "sine";
    experiments::SineSetup sine;
    experiments::DriftSetup drift;
};

void write_dataset(const fs::path& out, const data::Dataset& ds)
{
    data::save_csv((out / "dataset.csv").string(), ds);
    if (!ds.flipped.empty()) {
        std::ostringstream os;
        os << "index,id\n";
        for (auto i : ds.flipped)
            os << i << ',' << ds.samples[i].id << '\n';
        write_text(out / "flipped_labels.csv", os.str());
    }
}

int cmd_gen_data(const GenArgs& a)
{
    if (a.kind != "sine" && a.kind != "drift")
        throw ConfigError("kind must be sine or drift");
    const auto out = prepare_output_dir(a.common.output_dir);
    ResolvedConfig rc;
    rc.set("command", "gen-data");
    rc.set("seed", a.common.seed);
    rc.set("kind", a.kind);
    data::Dataset ds;
    try {
        if (a.kind == "sine") {
            rc.set("n", a.sine.n);
            rc.set("length", a.sine.length);
            rc.set("noise", a.sine.noise_sd);
            rc.set("freq_min", a.sine.sine.freq_min);
            rc.set("freq_max", a.sine.sine.freq_max);
            ds = experiments::sine_data(a.sine, a.common.seed);
        } else {
            rc.set("n", a.drift.n);
            rc.set("length", a.drift.length);
            rc.set("drift", a.drift.drift_rate);
            rc.set("label_noise", a.drift.label_noise);
            ds = experiments::drift_data(a.drift, a.common.seed);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    rc.write(out / "resolved_config.ini");
    write_dataset(out, ds);
    std::printf("wrote %zu series of length %zu to %s\n", ds.size(), ds.min_length(),
                (out / "dataset.csv").string().c_str());
    return Ok;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs
{
    Common common;
    std::string task = "regression";
    std::string wrapper = "adp";
    double lambda = 0.1;
    double omega = std::numbers::pi / 4.0;
    double phase = 0.0;
    std::string mu_policy = "mean";
    double baseline_threshold = std::numbers::ln2;
    std::string kappa_form = "argmin";
    bool theorem_mode = false;

    std::optional<std::string> arch;
    std::optional<std::string> hidden;
    std::optional<std::size_t> window;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> batch_size;
    double train_fraction = 0.75;

    std::string data_csv;
    experiments::SineSetup sine;
    experiments::DriftSetup drift;
    std::string cuts = "16,32,48,64";
    bool accumulate_stats = false;
    std::size_t seeds = 1;
};

std::optional<CrucialConfig> build_wrapper(const TrainArgs& a)
{
    if (a.wrapper == "none")
        return std::nullopt;
    CrucialConfig c;
    try {
        c.variant = parse_variant(a.wrapper);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(e.what()) + " (none|adp|sin|baseline)");
    }
    c.lambda = a.lambda;
    c.omega = a.omega;
    c.phase = a.phase;
    if (a.mu_policy == "mean") {
        c.mu_policy = MuPolicy::epoch_mean();
    } else {
        const auto v = parse_list<double>(a.mu_policy, "mu_policy");
        if (v.size() != 1)
            throw ConfigError("mu_policy must be `mean` or a number");
        c.mu_policy = MuPolicy::fixed(v[0]);
    }
    c.baseline_threshold = a.baseline_threshold;
    c.kappa_form = parse_kappa_form(a.kappa_form);
    c.theorem_mode = a.theorem_mode;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

int cmd_train(const TrainArgs& a)
{
    train::Task task;
    try {
        task = train::parse_task(a.task);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto wrapper = build_wrapper(a);
    auto setup = task == train::Task::Regression ? experiments::regression_defaults()
                                                 : experiments::classification_defaults();
    try {
        if (a.arch)
            setup.model.arch = model::parse_architecture(*a.arch);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (a.hidden)
        setup.model.hidden = parse_list<std::size_t>(*a.hidden, "hidden");
    if (a.window)
        setup.model.window = *a.window;
    if (a.epochs)
        setup.epochs = *a.epochs;
    if (a.lr)
        setup.learning_rate = *a.lr;
    if (a.batch_size)
        setup.batch_size = *a.batch_size;
    setup.train_fraction = a.train_fraction;
    setup.workers = a.common.workers;
    if (!(setup.learning_rate > 0.0))
        throw ConfigError("lr must be > 0");
    if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0))
        throw ConfigError("train_fraction must be in (0, 1)");
    if (a.seeds < 1)
        throw ConfigError("seeds must be >= 1");
    try {
        setup.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto cuts = parse_list<std::size_t>(a.cuts, "cuts");
    if (task == train::Task::ContinuousClassification && cuts.empty())
        throw ConfigError("continuous task needs at least one cut");

    std::optional<data::Dataset> csv_data;
    if (!a.data_csv.empty()) {
        data::CsvSchema schema;
        schema.label = task == train::Task::Regression ? data::CsvSchema::Label::Real : data::CsvSchema::Label::Class;
        try {
            csv_data = data::load_csv(a.data_csv, schema).data;
        } catch (const data::CsvError& e) {
            throw ConfigError(e.what());
        }
    }

    const auto out = prepare_output_dir(a.common.output_dir);
    ResolvedConfig rc;
    rc.set("command", "train");
    rc.set("seed", a.common.seed);
    rc.set("seeds", a.seeds);
    rc.set("workers", a.common.workers);
    rc.set("task", a.task);
    rc.set("wrapper", a.wrapper);
    rc.set("lambda", a.lambda);
    rc.set("omega", a.omega);
    rc.set("phase", a.phase);
    rc.set("mu_policy", a.mu_policy);
    rc.set("baseline_threshold", a.baseline_threshold);
    rc.set("kappa_form", a.kappa_form);
    rc.set("theorem_mode", a.theorem_mode);
    rc.set("arch", model::architecture_name(setup.model.arch));
    std::string hidden;
    for (auto h : setup.model.hidden)
        hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
    rc.set("hidden", hidden);
    rc.set("window", setup.model.window);
    rc.set("epochs", setup.epochs);
    rc.set("lr", setup.learning_rate);
    rc.set("batch_size", setup.batch_size);
    rc.set("train_fraction", setup.train_fraction);
    if (!a.data_csv.empty()) {
        rc.set("data_csv", a.data_csv);
    } else if (task == train::Task::Regression) {
        rc.set("n", a.sine.n);
        rc.set("length", a.sine.length);
        rc.set("noise", a.sine.noise_sd);
        rc.set("freq_min", a.sine.sine.freq_min);
        rc.set("freq_max", a.sine.sine.freq_max);
    } else {
        rc.set("n", a.drift.n);
        rc.set("length", a.drift.length);
        rc.set("drift", a.drift.drift_rate);
        rc.set("label_noise", a.drift.label_noise);
    }
    if (task == train::Task::ContinuousClassification) {
        rc.set("cuts", a.cuts);
        rc.set("accumulate_stats", a.accumulate_stats);
    }
    rc.write(out / "resolved_config.ini");

    Json summary;
    summary["task"] = a.task;
    summary["wrapper"] = a.wrapper;
    Json runs = Json::array();
    std::ostringstream aggregate;
    aggregate << "run_id,seed,metric_name,value\n";
    for (std::size_t k = 0; k < a.seeds; ++k) {
        const std::uint64_t seed = a.common.seed + k;
        const std::string run_id = a.task + "-" + a.wrapper + "-s" + std::to_string(seed);
        std::ostringstream metrics, trace;
        train::write_metrics_header(metrics);
        write_loss_trace_header(trace);
        auto observe = [&](std::size_t stage, const train::EpochTrace& t, std::optional<double> test) {
            const std::string split = task == train::Task::ContinuousClassification
                                          ? "train_stage" + std::to_string(stage + 1)
                                          : std::string("train");
            train::write_metrics_row(metrics, {run_id, seed, t.epoch, split, "loss", t.mean_loss});
            train::write_metrics_row(metrics, {run_id, seed, t.epoch, split, "threshold", t.threshold});
            train::write_metrics_row(metrics, {run_id, seed, t.epoch, split, "kappa_ge_1",
                                               static_cast<double>(t.kappa_at_least_one)});
            if (test)
                train::write_metrics_row(metrics, {run_id, seed, t.epoch, "test",
                                                   task == train::Task::Regression ? "mse" : "accuracy", *test});
            for (std::size_t i = 0; i < t.modulated.size(); ++i)
                write_loss_trace_row(trace, t.epoch, i, t.modulated[i]);
        };

        Json run;
        run["run_id"] = run_id;
        run["seed"] = seed;
        double headline = 0.0;
        std::string headline_name;
        if (task == train::Task::Regression) {
            const auto ds = csv_data ? *csv_data : experiments::sine_data(a.sine, seed);
            const auto r = experiments::run_regression(ds, setup, wrapper, seed, observe);
            headline = r.final_test_mse;
            headline_name = "final_test_mse";
        } else if (task == train::Task::SingleShotClassification) {
            const auto ds = csv_data ? *csv_data : experiments::drift_data(a.drift, seed);
            const auto r = experiments::run_classification(ds, setup, wrapper, seed, observe);
            headline = r.final_accuracy;
            headline_name = "final_test_accuracy";
        } else {
            auto ds = std::make_shared<const data::Dataset>(csv_data ? *csv_data
                                                                     : experiments::drift_data(a.drift, seed));
            train::TransferMatrix t;
            try {
                t = experiments::run_continuous(ds, cuts, setup, wrapper, seed, a.accumulate_stats, observe);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            const auto tj = to_json(t);
            write_json(out / ("transfer_" + run_id + ".json"), tj);
            run["transfer"] = "transfer_" + run_id + ".json";
            if (t.size() >= 2) {
                run["bwt"] = train::bwt(t);
                run["fwt"] = train::fwt(t);
                aggregate << run_id << ',' << seed << ",bwt," << format_real(train::bwt(t)) << '\n';
                aggregate << run_id << ',' << seed << ",fwt," << format_real(train::fwt(t)) << '\n';
            }
            headline = t.R.back().back();
            headline_name = "final_stage_accuracy";
        }
        run[headline_name] = headline;
        aggregate << run_id << ',' << seed << ',' << headline_name << ',' << format_real(headline) << '\n';
        write_text(out / ("metrics_" + run_id + ".csv"), metrics.str());
        write_text(out / ("loss_trace_" + run_id + ".csv"), trace.str());
        runs.push_back(run);
        std::printf("%s  %s=%.6g\n", run_id.c_str(), headline_name.c_str(), headline);
    }
    summary["runs"] = runs;
    if (a.seeds > 1)
        write_text(out / "aggregate.csv", aggregate.str());
    write_json(out / "summary.json", summary);
    return Ok;
}

/// Splices the entries of a `--config FILE` into the argument list ahead of
/// the explicit flags, which therefore take precedence.
std::vector<std::string> expand_config(int argc, char** argv)
{
    std::vector<std::string> in(argv + 1, argv + argc);
    std::optional<std::string> path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == "--config") {
            if (i + 1 >= in.size())
                throw ConfigError("--config needs a file");
            path = in[++i];
        } else if (in[i].rfind("--config=", 0) == 0) {
            path = in[i].substr(9);
        } else {
            rest.push_back(in[i]);
        }
    }
    if (!path)
        return rest;
    std::ifstream f(*path);
    if (!f)
        throw ConfigError("cannot read config file " + *path);
    std::vector<std::string> injected;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#' || line[b] == ';' || line[b] == '[')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(*path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string v) {
            const auto s = v.find_first_not_of(" \t");
            if (s == std::string::npos)
                return std::string();
            v = v.substr(s, v.find_last_not_of(" \t") - s + 1);
            if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
                v = v.substr(1, v.size() - 2);
            return v;
        };
        auto key = trim(line.substr(b, eq - b));
        std::replace(key.begin(), key.end(), '_', '-');
        injected.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
    // Options belong to the subcommand, so they go right after its name.
    if (rest.empty())
        throw ConfigError("--config given without a subcommand");
    std::vector<std::string> out{rest.front()};
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), rest.begin() + 1, rest.end());
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return UsageError;
    }

    CLI::App app{"Curricular and cyclical loss toolkit"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Analytic vs Monte-Carlo selection-error grid");
    add_common(sim_cmd, sim_args.common);
    sim_cmd->add_option("--population", sim_args.population, "normal | half-normal")->capture_default_str();
    sim_cmd->add_option("--mu", sim_args.mu, "Population location")->capture_default_str();
    sim_cmd->add_option("--sigmas", sim_args.sigmas, "Comma-separated sigma grid")->capture_default_str();
    sim_cmd->add_option("--rates", sim_args.rates, "Comma-separated selection-rate grid")->capture_default_str();
    sim_cmd->add_option("--n", sim_args.n, "Monte-Carlo draws per estimate")->capture_default_str();
    sim_cmd->add_option("--proposal", sim_args.proposal, "tilted | population")->capture_default_str();
    sim_cmd->add_option("--chunks", sim_args.chunks, "Fixed RNG partitions")->capture_default_str()->check(
        CLI::PositiveNumber);
    sim_cmd->add_option("--cycle-epochs", sim_args.cycle_epochs, "Also run the skewness-cycle toy (0 = off)")
        ->capture_default_str();
    sim_cmd->add_option("--cycle-samples", sim_args.cycle_samples, "Population size of the cycle toy")
        ->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a desk-scale model with or without the loss wrapper");
    add_common(train_cmd, tr.common);
    train_cmd->add_option("--task", tr.task, "regression | classification | continuous")->capture_default_str();
    train_cmd->add_option("--wrapper", tr.wrapper, "none | adp | sin | baseline")->capture_default_str();
    train_cmd->add_option("--lambda", tr.lambda)->capture_default_str();
    train_cmd->add_option("--omega", tr.omega)->capture_default_str();
    train_cmd->add_option("--phase", tr.phase)->capture_default_str();
    train_cmd->add_option("--mu-policy", tr.mu_policy, "mean | <value>")->capture_default_str();
    train_cmd->add_option("--baseline-threshold", tr.baseline_threshold)->capture_default_str();
    train_cmd->add_option("--kappa-form", tr.kappa_form, "argmin | main-text")->capture_default_str();
    train_cmd->add_flag("--theorem-mode", tr.theorem_mode, "Require lambda <= 0.01");
    train_cmd->add_option("--arch", tr.arch, "linear | mlp | rnn");
    train_cmd->add_option("--hidden", tr.hidden, "Comma-separated hidden sizes");
    train_cmd->add_option("--window", tr.window, "Input window length");
    train_cmd->add_option("--epochs", tr.epochs, "Epochs (per stage for continuous)");
    train_cmd->add_option("--lr", tr.lr, "Learning rate");
    train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size (0 = full batch)");
    train_cmd->add_option("--train-fraction", tr.train_fraction)->capture_default_str();
    train_cmd->add_option("--data-csv", tr.data_csv, "Dataset CSV instead of generated data");
    train_cmd->add_option("--n", tr.sine.n, "Generated series count")->capture_default_str();
    train_cmd->add_option("--length", tr.sine.length, "Generated series length")->capture_default_str();
    train_cmd->add_option("--noise", tr.sine.noise_sd, "Sine noise sd")->capture_default_str();
    train_cmd->add_option("--freq-min", tr.sine.sine.freq_min)->capture_default_str();
    train_cmd->add_option("--freq-max", tr.sine.sine.freq_max)->capture_default_str();
    train_cmd->add_option("--drift", tr.drift.drift_rate, "Class-mean drift per step")->capture_default_str();
    train_cmd->add_option("--label-noise", tr.drift.label_noise)->capture_default_str();
    train_cmd->add_option("--cuts", tr.cuts, "Prefix cut points for the continuous task")->capture_default_str();
    train_cmd->add_flag("--accumulate-stats", tr.accumulate_stats, "Keep wrapper statistics across stages");
    train_cmd->add_option("--seeds", tr.seeds, "Number of consecutive seeds to sweep")->capture_default_str();

    PropertiesArgs pr;
    auto* prop_cmd = app.add_subcommand("properties", "Run every invariant suite");
    add_common(prop_cmd, pr.common);
    prop_cmd->add_option("--kappa-form", pr.kappa_form, "argmin | main-text")->capture_default_str();
    prop_cmd->add_option("--draws", pr.draws, "Random draws per suite")->capture_default_str();

    TraceArgs ta;
    auto* trace_cmd = app.add_subcommand("trace-loss", "Per-epoch kappa and loss for an easy and a hard sample");
    add_common(trace_cmd, ta.common);
    trace_cmd->add_option("--variant", ta.variant, "baseline | adp | sin")->capture_default_str();
    trace_cmd->add_option("--lambda", ta.lambda)->capture_default_str();
    trace_cmd->add_option("--threshold", ta.threshold, "Baseline threshold")->capture_default_str();
    trace_cmd->add_option("--easy-loss", ta.easy_loss)->capture_default_str();
    trace_cmd->add_option("--hard-loss", ta.hard_loss)->capture_default_str();
    trace_cmd->add_option("--decay", ta.decay, "Per-epoch log decay of both losses")->capture_default_str();
    trace_cmd->add_option("--epochs", ta.epochs)->capture_default_str();
    trace_cmd->add_option("--kappa-form", ta.kappa_form)->capture_default_str();

    GenArgs ga;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
    add_common(gen_cmd, ga.common);
    gen_cmd->add_option("--kind", ga.kind, "sine | drift")->capture_default_str();
    gen_cmd->add_option("--n", ga.sine.n)->capture_default_str();
    gen_cmd->add_option("--length", ga.sine.length)->capture_default_str();
    gen_cmd->add_option("--noise", ga.sine.noise_sd)->capture_default_str();
    gen_cmd->add_option("--freq-min", ga.sine.sine.freq_min)->capture_default_str();
    gen_cmd->add_option("--freq-max", ga.sine.sine.freq_max)->capture_default_str();
    gen_cmd->add_option("--drift", ga.drift.drift_rate)->capture_default_str();
    gen_cmd->add_option("--label-noise", ga.drift.label_noise)->capture_default_str();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return UsageError;
    }

    try {
        if (*sim_cmd)
            return cmd_simulate(sim_args);
        if (*train_cmd) {
            // n and length are shared between the two generators.
            tr.drift.n = tr.sine.n;
            tr.drift.length = tr.sine.length;
            return cmd_train(tr);
        }
        if (*prop_cmd)
            return cmd_properties(pr);
        if (*trace_cmd)
            return cmd_trace_loss(ta);
        if (*gen_cmd) {
            ga.drift.n = ga.sine.n;
            ga.drift.length = ga.sine.length;
            return cmd_gen_data(ga);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return UsageError;
    } catch (const train::DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return CheckFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return CheckFailed;
    }
    return UsageError;
}
