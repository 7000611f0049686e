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
#include "crucial/sampler_sim.hpp"
#include "crucial/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crucial::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { Ok = 0, CheckFailed = 1, UsageError = 2 };

/// Raised for invalid configuration values; maps to exit code 2.
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos)
            continue;
        item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof())
            throw ConfigError(std::string("invalid entry `") + item + "` in " + what);
        out.push_back(v);
    }
    return out;
}

/// Ordered key=value record of every effective setting of a run.
class ResolvedConfig
{
public:
    template <class T>
    void set(const std::string& key, const T& value)
    {
        std::ostringstream os;
        if constexpr (std::is_floating_point_v<T>)
            os << format_real(value);
        else if constexpr (std::is_same_v<T, bool>)
            os << (value ? "true" : "false");
        else
            os << value;
        entries_.emplace_back(key, os.str());
    }

    void write(const std::filesystem::path& path) const
    {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("cannot write " + path.string());
        out << "# resolved configuration\n";
        for (const auto& [k, v] : entries_)
            out << k << '=' << v << '\n';
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::filesystem::path prepare_output_dir(const std::string& dir)
{
    if (dir.empty())
        throw ConfigError("--output-dir is required");
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline Json to_json(const sim::ErrorReport& r)
{
    Json j;
    j["population"] = {{"kind", r.population.name()}, {"mu", r.population.mu}, {"sigma", r.population.sigma}};
    j["lambda"] = r.rate;
    j["analytic"] = {{"E_U", r.analytic_eu}, {"E_P", r.analytic_ep}};
    if (r.diamond)
        j["analytic"]["diamond"] = *r.diamond;
    j["mc"] = {{"E_U", r.mc_eu}, {"E_P", r.mc_ep}, {"effective_samples_P", r.ess_p}};
    j["stderr"] = {{"E_U", r.stderr_eu}, {"E_P", r.stderr_ep}};
    j["ordering"] = {{"analytic", sim::ordering_name(r.analytic_ordering)},
                     {"mc", sim::ordering_name(r.mc_ordering)},
                     {"agree", r.orderings_agree()}};
    j["n"] = r.n;
    j["seed"] = r.seed;
    Json checks = Json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"gating", c.gating}});
    j["checks"] = checks;
    j["passed"] = r.passed();
    return j;
}

inline Json to_json(const train::TransferMatrix& t)
{
    Json j;
    j["R"] = t.R;
    j["baseline"] = t.baseline;
    j["baseline_seed"] = t.baseline_seed;
    if (t.size() >= 2) {
        j["bwt"] = train::bwt(t);
        j["fwt"] = train::fwt(t);
    } else {
        j["bwt"] = nullptr;
        j["fwt"] = nullptr;
    }
    return j;
}

inline KappaForm parse_kappa_form(const std::string& s)
{
    if (s == "argmin")
        return KappaForm::Argmin;
    if (s == "main-text")
        return KappaForm::MainText;
    throw ConfigError("unknown kappa form: " + s + " (argmin|main-text)");
}

} // namespace crucial::cli
