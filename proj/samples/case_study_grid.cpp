// Prints the single-activation makespan grid for every deployment, placement
// and payload, followed by median makespans under 20 contending activations.

#include "dcsim/dcsim.hpp"

#include <cstdio>

int main()
{
    using namespace dcsim;
    std::printf("%-5s %-4s %12s %12s %12s\n", "virt", "plc", "payload_B", "overhead", "makespan_s");
    for (const char* virt : {"V", "C", "N"}) {
        for (const char* placement : {"I", "II", "III"}) {
            for (std::int64_t bytes : {std::int64_t{1}, std::int64_t{1000000000}}) {
                for (bool overhead : {false, true}) {
                    const auto run = runScenario(caseStudyScenario(virt, placement, bytes, 1, overhead), 1);
                    std::printf("%-5s %-4s %12lld %12s %12.6f\n", virt, placement, static_cast<long long>(bytes),
                                overhead ? "on" : "off", run.results.records.at(0).makespanSeconds);
                }
            }
        }
    }

    std::printf("\n20 activations, 1 B payload, no overhead, seed 42\n");
    for (const char* placement : {"I", "II", "III"}) {
        const auto run = runScenario(caseStudyScenario("V", placement, 1, 20, false), 42);
        const auto& s = run.results.summary;
        std::printf("%-4s median %.6f  min %.6f  max %.6f\n", placement, s.median, s.min, s.max);
    }
}
