#include "dcsim/engine.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace dcsim;

namespace {

/// Records (time, seq, tag) of every event it receives; optionally runs a
/// callback so tests can schedule from inside the dispatch loop.
class Recorder : public SimEntity {
public:
    using SimEntity::SimEntity;

    struct Seen {
        SimTime time;
        std::uint64_t seq;
        EventTag tag;
        SimTime clockDuring;
    };

    std::vector<Seen> seen;
    std::function<void(Recorder&, const Event&)> onEvent;
    std::function<void(Recorder&)> onStart;

    Simulation& simulation() const { return sim(); }
    void stop() { finish(); }

protected:
    void startEntity() override
    {
        if (onStart) {
            onStart(*this);
        }
    }

    void processEvent(const Event& ev) override
    {
        seen.push_back({ev.time, ev.seq, ev.tag, sim().clock()});
        if (onEvent) {
            onEvent(*this, ev);
        }
    }
};

} // namespace

TEST(TagRegistry, NamespaceReturnsDistinctTags)
{
    TagRegistry reg;
    auto tags = reg.registerNamespace("net", {"PKT_ARRIVE", "PKT_FORWARD"});
    ASSERT_EQ(tags.size(), 2u);
    EXPECT_NE(tags[0], tags[1]);
    EXPECT_EQ(reg.name(tags[1]), "net.PKT_FORWARD");
}

TEST(TagRegistry, DuplicateNamespaceIsCollision)
{
    TagRegistry reg;
    reg.registerNamespace("net", {"PKT_ARRIVE"});
    EXPECT_THROW(reg.registerNamespace("net", {"OTHER"}), TagCollisionError);
}

TEST(TagRegistry, DuplicateNameWithinNamespaceIsCollision)
{
    TagRegistry reg;
    EXPECT_THROW(reg.registerNamespace("x", {"A", "A"}), TagCollisionError);
    EXPECT_FALSE(reg.contains("x"));
}

TEST(TagRegistry, SameSymbolInDifferentNamespacesIsUnequal)
{
    TagRegistry reg;
    auto net = reg.registerNamespace("net", {"UPDATE"});
    auto power = reg.registerNamespace("power", {"UPDATE"});
    EXPECT_NE(net[0], power[0]);
}

TEST(Simulation, RegistersCoreNamespace)
{
    Simulation sim;
    EXPECT_TRUE(sim.tags().contains("core"));
    EXPECT_THROW(sim.tags().registerNamespace("core", {"X"}), TagCollisionError);
}

TEST(Simulation, EqualDelaysAreServedFifo)
{
    Simulation sim;
    const auto tag = sim.tags().registerNamespace("t", {"A"}).front();
    auto& r = sim.emplaceEntity<Recorder>("r");
    const auto s1 = sim.schedule(r.id(), 2.0, r.id(), tag);
    const auto s2 = sim.schedule(r.id(), 1.0, r.id(), tag);
    const auto s3 = sim.schedule(r.id(), 1.0, r.id(), tag);
    EXPECT_DOUBLE_EQ(sim.run(), 2.0);
    ASSERT_EQ(r.seen.size(), 3u);
    EXPECT_EQ(r.seen[0].seq, s2);
    EXPECT_EQ(r.seen[1].seq, s3);
    EXPECT_EQ(r.seen[2].seq, s1);
}

TEST(Simulation, ZeroDelayRunsAfterQueuedEventsAtSameTime)
{
    Simulation sim;
    const auto tags = sim.tags().registerNamespace("t", {"FIRST", "LATER", "ZERO"});
    auto& r = sim.emplaceEntity<Recorder>("r");
    r.onEvent = [&](Recorder& self, const Event& ev) {
        if (ev.tag == tags[0]) {
            self.simulation().schedule(self.id(), 0.0, self.id(), tags[2]);
        }
    };
    sim.schedule(r.id(), 5.0, r.id(), tags[0]);
    sim.schedule(r.id(), 5.0, r.id(), tags[1]);
    sim.run();
    ASSERT_EQ(r.seen.size(), 3u);
    EXPECT_EQ(r.seen[1].tag, tags[1]);
    EXPECT_EQ(r.seen[2].tag, tags[2]);
    EXPECT_DOUBLE_EQ(r.seen[2].time, 5.0);
}

TEST(Simulation, RejectsNegativeDelayAndUnknownDestination)
{
    Simulation sim;
    const auto tag = sim.tags().registerNamespace("t", {"A"}).front();
    auto& r = sim.emplaceEntity<Recorder>("r");
    EXPECT_THROW(sim.schedule(r.id(), -1.0, r.id(), tag), SimulationError);
    EXPECT_THROW(sim.schedule(r.id(), 1.0, 42, tag), SimulationError);
    EXPECT_THROW(sim.schedule(r.id(), std::nan(""), r.id(), tag), SimulationError);
}

TEST(Simulation, RunWithoutEntitiesIsAnError)
{
    Simulation sim;
    EXPECT_THROW(sim.run(), SimulationError);
}

TEST(Simulation, EmptyQueueReturnsZero)
{
    Simulation sim;
    sim.emplaceEntity<Recorder>("idle");
    EXPECT_EQ(sim.clock(), 0.0);
    EXPECT_EQ(sim.run(), 0.0);
}

TEST(Simulation, SingleEventSetsFinalClock)
{
    Simulation sim;
    const auto tag = sim.tags().registerNamespace("t", {"A"}).front();
    auto& r = sim.emplaceEntity<Recorder>("r");
    sim.schedule(r.id(), 2.564, r.id(), tag);
    EXPECT_DOUBLE_EQ(sim.run(), 2.564);
    EXPECT_DOUBLE_EQ(r.seen.at(0).clockDuring, 2.564);
    EXPECT_DOUBLE_EQ(sim.clock(), 2.564);
}

TEST(Simulation, EventsForFinishedEntitiesAreDroppedAndLogged)
{
    Simulation sim;
    const auto tag = sim.tags().registerNamespace("t", {"A"}).front();
    auto& r = sim.emplaceEntity<Recorder>("r");
    r.onEvent = [](Recorder& self, const Event&) { self.stop(); };
    sim.schedule(r.id(), 1.0, r.id(), tag);
    sim.schedule(r.id(), 2.0, r.id(), tag);
    std::ostringstream log;
    sim.setLog(&log);
    EXPECT_DOUBLE_EQ(sim.run(), 2.0);
    EXPECT_EQ(r.seen.size(), 1u);
    EXPECT_EQ(sim.droppedEvents(), 1u);
    EXPECT_NE(log.str().find("dropped t.A"), std::string::npos);
}

TEST(Simulation, EndTagDrainsTheQueue)
{
    Simulation sim;
    const auto tag = sim.tags().registerNamespace("t", {"A"}).front();
    auto& r = sim.emplaceEntity<Recorder>("r");
    sim.schedule(r.id(), 1.0, r.id(), tag);
    sim.schedule(r.id(), 3.0, r.id(), sim.endTag());
    sim.schedule(r.id(), 5.0, r.id(), tag);
    EXPECT_DOUBLE_EQ(sim.run(), 3.0);
    EXPECT_EQ(r.seen.size(), 1u);
    EXPECT_EQ(sim.pendingEvents(), 0u);
}

TEST(Simulation, StartEntityMaySchedule)
{
    Simulation sim;
    const auto tag = sim.tags().registerNamespace("t", {"A"}).front();
    auto& r = sim.emplaceEntity<Recorder>("r");
    r.onStart = [&](Recorder& self) { self.simulation().schedule(self.id(), 4.0, self.id(), tag); };
    EXPECT_DOUBLE_EQ(sim.run(), 4.0);
}

TEST(Simulation, SchedulingIntoThePastIsRejected)
{
    Simulation sim;
    const auto tag = sim.tags().registerNamespace("t", {"A"}).front();
    auto& r = sim.emplaceEntity<Recorder>("r");
    bool threw = false;
    r.onEvent = [&](Recorder& self, const Event&) {
        try {
            self.simulation().scheduleAt(self.id(), 1.0, self.id(), tag);
        } catch (const SimulationError&) {
            threw = true;
        }
    };
    sim.schedule(r.id(), 2.0, r.id(), tag);
    sim.run();
    EXPECT_TRUE(threw);
}

// Property: for random schedules issued from inside the loop, dispatch order is
// strictly increasing in (time, seq) and identical across two runs.
TEST(SimulationProperty, DispatchOrderIsTotalAndDeterministic)
{
    auto runOnce = [](std::uint64_t seed) {
        Simulation sim;
        const auto tag = sim.tags().registerNamespace("t", {"A"}).front();
        auto& r = sim.emplaceEntity<Recorder>("r");
        std::mt19937_64 rng(seed);
        int budget = 5000;
        r.onEvent = [&](Recorder& self, const Event&) {
            const int fanout = static_cast<int>(rng() % 3);
            for (int k = 0; k < fanout && budget > 0; ++k, --budget) {
                const double delay = static_cast<double>(rng() % 8) * 0.25;
                self.simulation().schedule(self.id(), delay, self.id(), tag);
            }
        };
        for (int i = 0; i < 50; ++i) {
            sim.schedule(r.id(), static_cast<double>(rng() % 10), r.id(), tag);
        }
        sim.run();
        return r.seen;
    };
    const auto a = runOnce(7);
    const auto b = runOnce(7);
    ASSERT_GT(a.size(), 1000u);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].time, b[i].time);
        EXPECT_EQ(a[i].seq, b[i].seq);
        if (i > 0) {
            const bool increasing =
                a[i - 1].time < a[i].time || (a[i - 1].time == a[i].time && a[i - 1].seq < a[i].seq);
            ASSERT_TRUE(increasing) << "at " << i;
        }
    }
}

// Comparisons per operation grow like log n: the ratio of total comparisons
// for n = 10^4 vs 10^3 (and 10^5 vs 10^4) is within 2x of the n log n ratio.
TEST(FutureEventQueueProperty, ComparisonsGrowLikeNLogN)
{
    auto comparisonsFor = [](std::size_t n) {
        FutureEventQueue q;
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> t(0.0, 1000.0);
        for (std::size_t i = 0; i < n; ++i) {
            q.push(Event{t(rng), 0, 0, {}, {}, i});
        }
        while (!q.empty()) {
            q.pop();
        }
        return static_cast<double>(q.comparisons());
    };
    const double sizes[] = {1e3, 1e4, 1e5};
    double counts[3];
    for (int i = 0; i < 3; ++i) {
        counts[i] = comparisonsFor(static_cast<std::size_t>(sizes[i]));
    }
    for (int i = 0; i + 1 < 3; ++i) {
        const double observed = counts[i + 1] / counts[i];
        const double expected = (sizes[i + 1] * std::log2(sizes[i + 1])) / (sizes[i] * std::log2(sizes[i]));
        EXPECT_LT(observed, 2.0 * expected);
        EXPECT_GT(observed, expected / 2.0);
    }
}

TEST(FutureEventQueue, PopOnEmptyThrows)
{
    FutureEventQueue q;
    EXPECT_THROW(q.pop(), SimulationError);
}
