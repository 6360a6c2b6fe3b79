#include "dcsim/scenario.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef DCSIM_CLI_PATH
#define DCSIM_CLI_PATH "dcsim_cli"
#endif
#ifndef DCSIM_SCENARIO_DIR
#define DCSIM_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int exitCode = -1;
    std::string out;
};

// stderr is discarded; the tests look at exit codes and stdout only.
Outcome runCli(const std::string& args)
{
    const std::string cmd = std::string("\"") + DCSIM_CLI_PATH + "\" " + args + " 2>/dev/null";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return o;
    }
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        o.out.append(buf.data(), n);
    }
    const int status = pclose(pipe);
    o.exitCode = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string caseStudyPath() { return std::string(DCSIM_SCENARIO_DIR) + "/case_study.json"; }

std::size_t lineCount(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class TempFile {
public:
    explicit TempFile(const std::string& name, const std::string& content = {})
        : path_(fs::temp_directory_path() / ("dcsim_cli_test_" + std::to_string(::getpid()) + "_" + name))
    {
        if (!content.empty()) {
            std::ofstream(path_) << content;
        }
    }
    ~TempFile() { std::error_code ec; fs::remove(path_, ec); }
    std::string str() const { return path_.string(); }

private:
    fs::path path_;
};

} // namespace

TEST(Cli, CaseStudyProducesTwentyRecords)
{
    const auto o = runCli("--scenario " + caseStudyPath() + " --seed 42");
    EXPECT_EQ(o.exitCode, 0);
    EXPECT_EQ(lineCount(o.out), 21u);
    EXPECT_EQ(o.out.rfind("activation_id,", 0), 0u);
}

TEST(Cli, OutputFileMatchesStdout)
{
    TempFile out("out.csv");
    const auto a = runCli("--scenario " + caseStudyPath() + " --seed 5");
    const auto b = runCli("--scenario " + caseStudyPath() + " --seed 5 --output " + out.str());
    ASSERT_EQ(b.exitCode, 0);
    std::ifstream in(out.str());
    std::stringstream buf;
    buf << in.rdbuf();
    EXPECT_EQ(buf.str(), a.out);
}

TEST(Cli, JsonFormat)
{
    const auto o = runCli("--scenario " + caseStudyPath() + " --format json");
    ASSERT_EQ(o.exitCode, 0);
    const auto j = nlohmann::json::parse(o.out);
    EXPECT_EQ(j["records"].size(), 20u);
    EXPECT_EQ(j["metadata"]["seed"], 42);
}

TEST(Cli, ValidateOnly)
{
    const auto o = runCli("--scenario " + caseStudyPath() + " --validate");
    EXPECT_EQ(o.exitCode, 0);
    EXPECT_TRUE(o.out.empty());
}

TEST(Cli, OracleGrid)
{
    const auto o = runCli("--oracle");
    ASSERT_EQ(o.exitCode, 0);
    EXPECT_EQ(lineCount(o.out), 1u + 4 * 3 * 2);
    EXPECT_NE(o.out.find("V,I,1000000000,0,2.564103"), std::string::npos);
    EXPECT_NE(o.out.find("N,III,1000000000,2,50.564103"), std::string::npos);
    EXPECT_NE(o.out.find("C,II,1,1,8.564103"), std::string::npos);
}

TEST(Cli, InvalidScenarioExitsTwo)
{
    TempFile bad("bad.json", "{ \"name\": ");
    EXPECT_EQ(runCli("--scenario " + bad.str()).exitCode, 2);
    dcsim::Scenario sc = dcsim::caseStudyScenario();
    sc.links.push_back({"host0", "nowhere", 1e9});
    TempFile semantic("semantic.json", dcsim::writeScenario(sc));
    EXPECT_EQ(runCli("--scenario " + semantic.str()).exitCode, 2);
    EXPECT_EQ(runCli("--scenario /nonexistent/file.json").exitCode, 2);
}

TEST(Cli, DeadlineMissWithFlagExitsFour)
{
    dcsim::Scenario sc = dcsim::caseStudyScenario("N", "III", 1000000000, 3);
    sc.workflow.deadlineSeconds = 10.0;
    TempFile tight("tight.json", dcsim::writeScenario(sc));
    const auto plain = runCli("--scenario " + tight.str());
    EXPECT_EQ(plain.exitCode, 0);
    EXPECT_NE(plain.out.find("MISSED"), std::string::npos);
    EXPECT_EQ(runCli("--scenario " + tight.str() + " --fail-on-miss").exitCode, 4);
}

TEST(Cli, UsageErrorsExitOne)
{
    EXPECT_EQ(runCli("--scenario " + caseStudyPath() + " --format xml").exitCode, 1);
    EXPECT_EQ(runCli("").exitCode, 1);
    EXPECT_EQ(runCli("--bogus-flag").exitCode, 1);
    EXPECT_EQ(runCli("--scenario " + caseStudyPath() + " --placement IV").exitCode, 1);
}

TEST(Cli, OverridesApplyToTheRun)
{
    const auto o = runCli("--scenario " + caseStudyPath() + " --placement III --virt C --payload 1 --count 2");
    ASSERT_EQ(o.exitCode, 0);
    EXPECT_EQ(lineCount(o.out), 3u);
    EXPECT_NE(o.out.find(",III,C,1,42"), std::string::npos);
}
