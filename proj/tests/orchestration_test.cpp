#include "dcsim/orchestration.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <vector>

using namespace dcsim;

namespace {

WorkflowDag chain(std::int64_t payload = 1, std::optional<double> deadline = 90.0)
{
    WorkflowDag dag;
    dag.tasks = {{"T0", 10000.0, 1}, {"T1", 10000.0, 1}};
    dag.edges = {{0, 1, payload}};
    dag.deadlineSeconds = deadline;
    return dag;
}

/// One host, one single-PE VM at 7800 MIPS, both tasks on that VM.
struct SingleVm {
    Simulation sim;
    Datacenter* dc = nullptr;
    Broker* broker = nullptr;

    SingleVm(std::vector<SimTime> releases, WorkflowDag dag = chain(), std::vector<int> taskGuest = {0, 0})
    {
        const auto dcTags = DatacenterTags::registerIn(sim.tags());
        const auto brokerTags = BrokerTags::registerIn(sim.tags());
        dc = &sim.emplaceEntity<Datacenter>("dc", dcTags);
        auto& host = dc->addHost(HostSpec::fromClock(0, 2.6e9, 3.0, 4, 16384, 4e9), PowerModel(100.0, 250.0));
        auto& vm = dc->addVm(GuestSpec{0, GuestKind::Vm, CoreAttributes{1, 7800.0, 1024, 1e9}, 5.0});
        EXPECT_TRUE(placeGuest(host, vm));
        broker = &sim.emplaceEntity<Broker>("broker", brokerTags, dcTags, *dc, std::move(dag), std::move(taskGuest),
                                            std::move(releases));
    }
};

} // namespace

TEST(Workflow, ValidateRejectsCyclesAndBadEdges)
{
    WorkflowDag dag = chain();
    EXPECT_NO_THROW(dag.validate());
    dag.edges.push_back({1, 0, 1});
    EXPECT_THROW(dag.validate(), ConfigurationError);
    dag = chain();
    dag.edges.push_back({0, 5, 1});
    EXPECT_THROW(dag.validate(), ConfigurationError);
    dag = chain();
    dag.edges[0].payloadBytes = -1;
    EXPECT_THROW(dag.validate(), ConfigurationError);
    EXPECT_THROW(WorkflowDag{}.validate(), ConfigurationError);
}

TEST(Workflow, EdgesBecomeSendAndReceiveStages)
{
    const WorkflowDag dag = chain(42);
    auto idOf = [](std::size_t t) { return static_cast<int>(t) + 100; };
    const auto src = dag.stagesFor(0, idOf);
    const auto dst = dag.stagesFor(1, idOf);
    ASSERT_EQ(src.size(), 2u);
    EXPECT_EQ(src[0], Stage::execution(10000.0));
    EXPECT_EQ(src[1], Stage::send(101, 42));
    ASSERT_EQ(dst.size(), 2u);
    EXPECT_EQ(dst[0], Stage::receive(100));
    EXPECT_EQ(dst[1], Stage::execution(10000.0));
    EXPECT_EQ(dag.sinks(), std::vector<std::size_t>{1});
    EXPECT_EQ(dag.totalPayloadBytes(), 42);
}

TEST(Arrivals, FixedPeriod)
{
    const auto r = sampleArrivals({ArrivalKind::Fixed, 10.0, 1, 3});
    EXPECT_EQ(r, (std::vector<SimTime>{0.0, 10.0, 20.0}));
}

TEST(Arrivals, RejectsBadParameters)
{
    EXPECT_THROW(sampleArrivals({ArrivalKind::Fixed, 10.0, 1, 0}), std::invalid_argument);
    EXPECT_THROW(sampleArrivals({ArrivalKind::Exponential, 0.0, 1, 3}), std::invalid_argument);
}

TEST(ArrivalsProperty, SameSeedSameTrace)
{
    for (std::uint64_t seed : {1ULL, 42ULL, 123456789ULL}) {
        const ArrivalProcess p{ArrivalKind::Exponential, 2.564, seed, 50};
        const auto a = sampleArrivals(p);
        EXPECT_EQ(a, sampleArrivals(p));
        EXPECT_EQ(a.front(), 0.0);
        for (std::size_t i = 1; i < a.size(); ++i) {
            EXPECT_GT(a[i], a[i - 1]);
        }
    }
    EXPECT_NE(sampleArrivals({ArrivalKind::Exponential, 2.564, 1, 5}),
              sampleArrivals({ArrivalKind::Exponential, 2.564, 2, 5}));
}

TEST(ArrivalsProperty, SampleMeanMatchesScale)
{
    const int n = 100000;
    const auto r = sampleArrivals({ArrivalKind::Exponential, 2.564, 2024, n});
    const double mean = r.back() / static_cast<double>(n - 1);
    EXPECT_NEAR(mean, 2.564, 0.02 * 2.564);
}

TEST(TheoreticalMakespan, Examples)
{
    const std::vector<double> lengths{10000.0, 10000.0};
    EXPECT_NEAR(theoreticalMakespan(lengths, 7800.0, 5.0, 0, 1000000000, 1e9), 2.5641, 1e-4);
    EXPECT_NEAR(theoreticalMakespan(lengths, 7800.0, 0.0, 1, 1000000000, 1e9), 18.564, 1e-3);
    EXPECT_NEAR(theoreticalMakespan(lengths, 7800.0, 8.0, 2, 1000000000, 1e9), 50.564, 1e-3);
}

TEST(TheoreticalMakespan, DomainErrors)
{
    const std::vector<double> lengths{1.0};
    EXPECT_THROW(theoreticalMakespan(lengths, 0.0, 0.0, 0, 1, 1e9), std::domain_error);
    EXPECT_THROW(theoreticalMakespan(lengths, 1.0, 0.0, 0, 1, 0.0), std::domain_error);
    EXPECT_THROW(theoreticalMakespan(lengths, 1.0, -1.0, 0, 1, 1.0), std::domain_error);
}

TEST(Deadline, InclusiveComparison)
{
    ActivationRecord r;
    r.finished = true;
    r.makespanSeconds = 44.564;
    EXPECT_EQ(checkDeadline(r, 90.0), DeadlineOutcome::Met);
    EXPECT_EQ(checkDeadline(r, 44.564), DeadlineOutcome::Met);
    EXPECT_EQ(checkDeadline(r, 30.0), DeadlineOutcome::Missed);
    r.finished = false;
    EXPECT_THROW(checkDeadline(r, 90.0), std::logic_error);
    EXPECT_STREQ(toString(DeadlineOutcome::NotApplicable), "N/A");
}

TEST(CollectResults, SinglePointEcdf)
{
    ActivationRecord r{0, 0.0, 3.0, 3.0, DeadlineOutcome::Met, true, false};
    const auto res = collectResults({r});
    ASSERT_EQ(res.summary.ecdf.size(), 1u);
    EXPECT_EQ(res.summary.ecdf[0], (std::pair<double, double>{3.0, 1.0}));
    EXPECT_EQ(res.summary.median, 3.0);
}

TEST(CollectResults, SortsByReleaseAndDropsUnfinished)
{
    std::vector<ActivationRecord> recs;
    for (int i = 0; i < 20; ++i) {
        const double release = static_cast<double>((i * 7) % 20);
        const double makespan = 1.0 + static_cast<double>((i * 13) % 20);
        recs.push_back({i, release, release + makespan, makespan, DeadlineOutcome::Met, true, false});
    }
    recs.push_back({99, 0.5, 0.0, 0.0, DeadlineOutcome::NotApplicable, false, false});
    const auto res = collectResults(recs);
    ASSERT_EQ(res.records.size(), 20u);
    for (std::size_t i = 1; i < res.records.size(); ++i) {
        EXPECT_LE(res.records[i - 1].releaseTime, res.records[i].releaseTime);
        EXPECT_LE(res.summary.ecdf[i - 1].first, res.summary.ecdf[i].first);
    }
    EXPECT_EQ(res.summary.ecdf.back().second, 1.0);
    EXPECT_EQ(res.summary.min, 1.0);
    EXPECT_EQ(res.summary.max, 20.0);
    EXPECT_EQ(res.summary.median, 10.5);
}

TEST(CollectResults, EmptyRun)
{
    const auto res = collectResults({});
    EXPECT_EQ(res.summary.count, 0u);
    EXPECT_TRUE(res.summary.ecdf.empty());
}

TEST(Broker, SingleActivationOnOneVm)
{
    SingleVm w({0.0});
    const double end = w.sim.run();
    ASSERT_EQ(w.broker->records().size(), 1u);
    const auto& r = w.broker->records()[0];
    EXPECT_TRUE(r.finished);
    EXPECT_NEAR(r.makespanSeconds, 20000.0 / 7800.0, 1e-9);
    EXPECT_EQ(r.deadlineOutcome, DeadlineOutcome::Met);
    EXPECT_DOUBLE_EQ(end, r.finishTime);
}

TEST(Broker, NoDeadlineGivesNotApplicable)
{
    SingleVm w({0.0}, chain(1, std::nullopt));
    w.sim.run();
    EXPECT_EQ(w.broker->records().at(0).deadlineOutcome, DeadlineOutcome::NotApplicable);
}

TEST(Broker, UnmappedTaskIsConfigurationError)
{
    SingleVm w({0.0}, chain(), {0, 7});
    EXPECT_THROW(w.sim.run(), ConfigurationError);
}

TEST(Broker, MismatchedMapIsRejectedUpFront)
{
    Simulation sim;
    const auto dcTags = DatacenterTags::registerIn(sim.tags());
    const auto brokerTags = BrokerTags::registerIn(sim.tags());
    auto& dc = sim.emplaceEntity<Datacenter>("dc", dcTags);
    EXPECT_THROW(Broker("b", brokerTags, dcTags, dc, chain(), {0}, {0.0}), ConfigurationError);
}

// More simultaneous activations on one guest never make the slowest faster.
TEST(OrchestrationProperty, ContentionIsMonotone)
{
    double previous = 0.0;
    for (int k = 1; k <= 8; ++k) {
        SingleVm w(std::vector<SimTime>(static_cast<std::size_t>(k), 0.0));
        w.sim.run();
        double worst = 0.0;
        for (const auto& r : w.broker->records()) {
            ASSERT_TRUE(r.finished);
            worst = std::max(worst, r.makespanSeconds);
        }
        EXPECT_GE(worst, previous - 1e-9) << k;
        // All work is serialized on one 7800 MIPS PE.
        EXPECT_NEAR(worst, k * 20000.0 / 7800.0, 1e-6);
        previous = worst;
    }
}

TEST(Datacenter, EnergyFollowsHostUtilization)
{
    SingleVm w({0.0});
    const double end = w.sim.run();
    // One of four PEs busy for the whole run: utilization 0.25.
    const double expected = (100.0 + 150.0 * 0.25) * end;
    EXPECT_NEAR(w.dc->energyJoules(0.0, end), expected, 1e-9 * expected);
}
