// Command-line front end: load a scenario, run it, write per-activation records.

#include "dcsim/dcsim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kInvalidScenario = 2,
    kRuntimeError = 3,
    kDeadlineMissed = 4,
    kEmptyRun = 5,
};

struct Options {
    std::string scenarioPath;
    std::optional<std::uint64_t> seed;
    std::string outputPath;
    std::string format = "csv";
    bool validateOnly = false;
    bool oracle = false;
    bool failOnMiss = false;
    std::string placement;
    std::string virt;
    std::optional<std::int64_t> payload;
    std::optional<int> count;
    bool noOverhead = false;
};

int writeOutput(const std::string& path, const std::string& bytes)
{
    if (path.empty() || path == "-") {
        std::cout << bytes << std::flush;
        return kOk;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "error: cannot open '" << path << "' for writing\n";
        return kRuntimeError;
    }
    out << bytes;
    return out ? kOk : kRuntimeError;
}

/// Closed-form makespan for every deployment, placement and payload cell.
std::string oracleTable(const std::vector<double>& lengths)
{
    struct Deployment {
        const char* name;
        double overhead;
    };
    const Deployment deployments[] = {{"none", 0.0}, {"V", 5.0}, {"C", 3.0}, {"N", 8.0}};
    const std::pair<const char*, int> placements[] = {{"I", 0}, {"II", 1}, {"III", 2}};
    const std::int64_t payloads[] = {1, 1000000000};
    const double mips = dcsim::mipsFromClock(2.6e9, 3.0);

    std::string out = "virt_config,placement_config,payload_bytes,switch_count,makespan_s\n";
    for (const auto& d : deployments) {
        for (const auto& [pname, switches] : placements) {
            for (auto bytes : payloads) {
                const double m = dcsim::theoreticalMakespan(lengths, mips, d.overhead, switches, bytes, 1e9);
                out += std::string(d.name) + ',' + pname + ',' + std::to_string(bytes) + ',' +
                       std::to_string(switches) + ',' + dcsim::fixed6(m) + '\n';
            }
        }
    }
    return out;
}

void applyOverrides(dcsim::Scenario& sc, const Options& opt)
{
    if (!opt.placement.empty() || !opt.virt.empty()) {
        if (!sc.deployment) {
            sc.deployment = dcsim::DeploymentDef{};
            sc.guests.clear();
            sc.placement.clear();
        }
        if (!opt.placement.empty()) {
            sc.deployment->placement = opt.placement;
        }
        if (!opt.virt.empty()) {
            sc.deployment->virt = opt.virt;
        }
    }
    if (opt.payload) {
        for (auto& e : sc.workflow.edges) {
            e.payloadBytes = *opt.payload;
        }
    }
    if (opt.count) {
        sc.arrivals.count = *opt.count;
    }
    if (opt.noOverhead) {
        sc.overheadEnabled = false;
    }
}

int run(const Options& opt)
{
    dcsim::ReportFormat format;
    try {
        format = dcsim::parseReportFormat(opt.format);
    } catch (const dcsim::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }

    std::optional<dcsim::Scenario> scenario;
    if (!opt.scenarioPath.empty()) {
        try {
            scenario = dcsim::loadScenario(opt.scenarioPath);
            applyOverrides(*scenario, opt);
            if (auto errs = dcsim::validateScenario(*scenario); !errs.empty()) {
                throw dcsim::ScenarioError(std::move(errs));
            }
        } catch (const dcsim::ScenarioError& e) {
            for (const auto& msg : e.errors()) {
                std::cerr << opt.scenarioPath << ": " << msg << '\n';
            }
            return kInvalidScenario;
        } catch (const std::exception& e) {
            std::cerr << opt.scenarioPath << ": " << e.what() << '\n';
            return kInvalidScenario;
        }
    }

    if (opt.oracle) {
        std::vector<double> lengths{10000.0, 10000.0};
        if (scenario) {
            lengths.clear();
            for (const auto& t : scenario->workflow.tasks) {
                lengths.push_back(t.lengthMI);
            }
        }
        return writeOutput(opt.outputPath, oracleTable(lengths));
    }
    if (!scenario) {
        std::cerr << "error: --scenario is required unless --oracle is given\n";
        return kUsage;
    }
    if (opt.validateOnly) {
        std::cerr << opt.scenarioPath << ": ok\n";
        return kOk;
    }

    const std::uint64_t seed = opt.seed ? *opt.seed : scenario->arrivals.seed.value_or(1);
    dcsim::RunOutput result;
    try {
        result = dcsim::runScenario(*scenario, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: simulation failed: " << e.what() << '\n';
        return kRuntimeError;
    }

    const auto doc = dcsim::makeResultsDocument(*scenario, seed, result);
    if (int rc = writeOutput(opt.outputPath, dcsim::reportResults(doc, format)); rc != kOk) {
        return rc;
    }
    if (doc.results.records.empty()) {
        std::cerr << "warning: no activation finished\n";
        return kEmptyRun;
    }
    const bool missed = std::any_of(doc.results.records.begin(), doc.results.records.end(),
                                    [](const auto& r) { return r.deadlineOutcome == dcsim::DeadlineOutcome::Missed; });
    return opt.failOnMiss && missed ? kDeadlineMissed : kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Discrete-event datacenter simulator"};
    Options opt;
    app.add_option("--scenario", opt.scenarioPath, "Scenario file (JSON)");
    app.add_option("--seed", opt.seed, "Random seed; overrides the scenario's seed (default 1)");
    app.add_option("--output", opt.outputPath, "Output file (default stdout)");
    app.add_option("--format", opt.format, "csv or json")->default_val("csv");
    app.add_flag("--validate", opt.validateOnly, "Validate the scenario and exit");
    app.add_flag("--oracle", opt.oracle, "Print the closed-form makespan grid and exit");
    app.add_flag("--fail-on-miss", opt.failOnMiss, "Exit 4 when any activation misses its deadline");
    app.add_option("--placement", opt.placement, "Override placement shorthand (I, II, III)")
        ->check(CLI::IsMember({"I", "II", "III"}));
    app.add_option("--virt", opt.virt, "Override virtualization shorthand (V, C, N)")
        ->check(CLI::IsMember({"V", "C", "N"}));
    app.add_option("--payload", opt.payload, "Override every edge payload, in bytes")->check(CLI::NonNegativeNumber);
    app.add_option("--count", opt.count, "Override the number of activations")->check(CLI::PositiveNumber);
    app.add_flag("--no-overhead", opt.noOverhead, "Disable virtualization overhead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    return run(opt);
}
