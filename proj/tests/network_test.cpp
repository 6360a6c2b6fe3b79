#include "dcsim/network.hpp"

#include <gtest/gtest.h>

#include <memory>
#include <vector>

using namespace dcsim;

namespace {

constexpr std::int64_t kGigabyte = 1000000000;

/// Two racks of two hosts under one aggregate switch, 1 Gb/s everywhere.
struct Fabric {
    Topology topo;
    int tor0 = -1;
    int tor1 = -1;
    int agg = -1;

    explicit Fabric(double forwardingDelay = 0.0)
    {
        for (int h = 0; h < 4; ++h) {
            topo.addHost(h);
        }
        tor0 = topo.addSwitch({"tor0", SwitchLevel::Tor, forwardingDelay});
        tor1 = topo.addSwitch({"tor1", SwitchLevel::Tor, forwardingDelay});
        agg = topo.addSwitch({"agg", SwitchLevel::Aggregate, forwardingDelay});
        topo.addLink(topo.nodeOfHost(0), tor0, 1e9);
        topo.addLink(topo.nodeOfHost(1), tor0, 1e9);
        topo.addLink(topo.nodeOfHost(2), tor1, 1e9);
        topo.addLink(topo.nodeOfHost(3), tor1, 1e9);
        topo.addLink(tor0, agg, 1e9);
        topo.addLink(tor1, agg, 1e9);
    }
};

class Sink : public SimEntity {
public:
    using SimEntity::SimEntity;
    std::vector<std::pair<SimTime, Delivery>> got;

protected:
    void processEvent(const Event& ev) override { got.emplace_back(ev.time, std::any_cast<Delivery>(ev.payload)); }
};

/// Simulation with four physical hosts, one VM per host, and a network.
struct Bench {
    Simulation sim;
    std::vector<std::unique_ptr<PhysicalHost>> hosts;
    std::vector<std::unique_ptr<VirtualEntity>> vms;
    Network* net = nullptr;
    Sink* sink = nullptr;

    explicit Bench(double overhead, bool overheadEnabled = true, double forwardingDelay = 0.0)
    {
        const auto tags = NetworkTags::registerIn(sim.tags());
        const auto deliverTag = sim.tags().registerNamespace("test", {"DELIVER"}).front();
        for (int h = 0; h < 4; ++h) {
            hosts.push_back(std::make_unique<PhysicalHost>(HostSpec::fromClock(h, 2.6e9, 3.0, 4, 16384, 4e9)));
            vms.push_back(std::make_unique<VirtualEntity>(
                GuestSpec{h, GuestKind::Vm, CoreAttributes{1, 7800.0, 1024, 1e9}, overhead}));
            EXPECT_TRUE(placeGuest(*hosts.back(), *vms.back()));
        }
        net = &sim.emplaceEntity<Network>("net", Fabric(forwardingDelay).topo, tags, overheadEnabled);
        sink = &sim.emplaceEntity<Sink>("sink");
        net->setReceiver(sink->id(), deliverTag);
    }
};

} // namespace

TEST(Route, SameHostIsEmpty)
{
    Fabric f;
    const auto r = route(f.topo, 1, 1);
    EXPECT_TRUE(r.hops.empty());
    EXPECT_EQ(r.switchCount, 0);
}

TEST(Route, SameRackCrossesOneSwitch)
{
    Fabric f;
    const auto r = route(f.topo, 0, 1);
    EXPECT_EQ(r.hops.size(), 2u);
    EXPECT_EQ(r.switchCount, 1);
    EXPECT_EQ(r.hops[0].to, f.tor0);
}

TEST(Route, CrossRackCrossesTwoSwitches)
{
    Fabric f;
    const auto r = route(f.topo, 0, 2);
    EXPECT_EQ(r.hops.size(), 4u);
    EXPECT_EQ(r.switchCount, 2);
}

TEST(Route, DisconnectedHostsAreRoutingErrors)
{
    Topology t;
    t.addHost(0);
    t.addHost(1);
    EXPECT_THROW(t.route(0, 1), RoutingError);
    EXPECT_FALSE(t.connected());
    EXPECT_THROW(t.route(0, 7), RoutingError);
}

TEST(Route, HostsDoNotForward)
{
    Topology t;
    const int a = t.addHost(0);
    const int b = t.addHost(1);
    const int c = t.addHost(2);
    t.addLink(a, b, 1e9);
    t.addLink(b, c, 1e9);
    EXPECT_EQ(t.route(0, 1).hops.size(), 1u);
    EXPECT_THROW(t.route(0, 2), RoutingError);
}

TEST(TopologyBuild, RejectsBadInput)
{
    Topology t;
    const int a = t.addHost(0);
    EXPECT_THROW(t.addHost(0), std::invalid_argument);
    EXPECT_THROW(t.addLink(a, a, 1e9), std::invalid_argument);
    EXPECT_THROW(t.addLink(a, 5, 1e9), std::invalid_argument);
    const int s = t.addSwitch({"s", SwitchLevel::Tor, 0.0});
    EXPECT_THROW(t.addLink(a, s, 0.0), std::invalid_argument);
    EXPECT_THROW(t.addSwitch({"bad", SwitchLevel::Tor, -1.0}), std::invalid_argument);
}

TEST(FairShare, EqualSplit)
{
    const Link l{0, 1, 1e9};
    EXPECT_EQ(fairShareRecompute(l, 1), 1e9);
    EXPECT_EQ(fairShareRecompute(l, 2), 5e8);
    EXPECT_THROW(fairShareRecompute(l, 0), std::invalid_argument);
}

TEST(Transfer, OneGigabyteSameRackTakesSixteenSeconds)
{
    Bench b(0.0);
    b.net->startTransfer(*b.vms[0], *b.vms[1], kGigabyte, 7, 8);
    b.sim.run();
    ASSERT_EQ(b.sink->got.size(), 1u);
    EXPECT_NEAR(b.sink->got[0].first, 16.0, 1e-9);
    EXPECT_EQ(b.sink->got[0].second.srcCloudletId, 7);
    EXPECT_EQ(b.sink->got[0].second.dstCloudletId, 8);
}

TEST(Transfer, OneGigabyteCrossRackTakesThirtyTwoSeconds)
{
    Bench b(0.0);
    b.net->startTransfer(*b.vms[0], *b.vms[3], kGigabyte);
    b.sim.run();
    EXPECT_NEAR(b.sink->got.at(0).first, 32.0, 1e-9);
}

TEST(Transfer, CoLocatedIsImmediateAndFreeOfOverhead)
{
    Bench b(5.0);
    b.net->startTransfer(*b.vms[2], *b.vms[2], kGigabyte);
    b.sim.run();
    EXPECT_EQ(b.sink->got.at(0).first, 0.0);
}

TEST(Transfer, OverheadChargedAtBothEndsWhenSwitched)
{
    Bench b(5.0);
    b.net->startTransfer(*b.vms[0], *b.vms[1], 1);
    b.sim.run();
    EXPECT_NEAR(b.sink->got.at(0).first, 10.0 + 2 * 8.0 / 1e9, 1e-12);
}

TEST(Transfer, OverheadCanBeDisabled)
{
    Bench b(5.0, false);
    b.net->startTransfer(*b.vms[0], *b.vms[1], kGigabyte);
    b.sim.run();
    EXPECT_NEAR(b.sink->got.at(0).first, 16.0, 1e-9);
}

TEST(Transfer, ForwardingDelayAddsPerSwitch)
{
    Bench b(0.0, true, 0.25);
    b.net->startTransfer(*b.vms[0], *b.vms[2], kGigabyte);
    b.sim.run();
    EXPECT_NEAR(b.sink->got.at(0).first, 32.0 + 3 * 0.25, 1e-9);
}

TEST(Transfer, NegativePayloadAndUnplacedGuestsAreRejected)
{
    Bench b(0.0);
    EXPECT_THROW(b.net->startTransfer(*b.vms[0], *b.vms[1], -1), std::invalid_argument);
    VirtualEntity loose(GuestSpec{9, GuestKind::Vm, CoreAttributes{1, 1.0, 0, 0.0}, 0.0});
    EXPECT_THROW(b.net->startTransfer(loose, *b.vms[1], 1), PlacementStateError);
}

namespace {

/// Starts one transfer when its timer fires.
class LateSender : public SimEntity {
public:
    LateSender(Network& net, const GuestEntity& src, const GuestEntity& dst, std::int64_t bytes)
        : SimEntity("late"), net_(net), src_(src), dst_(dst), bytes_(bytes)
    {
    }

protected:
    void processEvent(const Event&) override { net_.startTransfer(src_, dst_, bytes_, 2, -1); }

private:
    Network& net_;
    const GuestEntity& src_;
    const GuestEntity& dst_;
    std::int64_t bytes_;
};

} // namespace

// A enters a link alone; B joins half-way through. Shares drop to 1/2 and come
// back to full when A leaves; A's earlier completion event is superseded.
TEST(Transfer, StaggeredFlowsShareAndRecompute)
{
    Bench b(0.0);
    const std::int64_t bytes = 125000000; // 1e9 bits, one second alone on a link
    const auto timer = b.sim.tags().registerNamespace("timer", {"FIRE"}).front();
    auto& late = b.sim.emplaceEntity<LateSender>(*b.net, *b.vms[0], *b.vms[1], bytes);
    b.net->startTransfer(*b.vms[0], *b.vms[1], bytes, 1, -1);
    b.sim.schedule(late.id(), 0.5, late.id(), timer);
    b.sim.run();
    // A: 0.5 s alone + 1 s shared on hop 1, 0.5 s alone + 1 s shared on hop 2.
    // B: trails A by 0.5 s on each hop.
    ASSERT_EQ(b.sink->got.size(), 2u);
    EXPECT_EQ(b.sink->got[0].second.srcCloudletId, 1);
    EXPECT_NEAR(b.sink->got[0].first, 3.0, 1e-9);
    EXPECT_NEAR(b.sink->got[1].first, 3.5, 1e-9);
    for (const auto& t : b.net->transfers()) {
        EXPECT_EQ(t.deliveredBits, 8.0 * static_cast<double>(t.payloadBytes));
    }
    EXPECT_EQ(b.net->activeOn(0, b.net->topology().nodeOfHost(0)), 0u);
}

TEST(NetworkProperty, NoOverheadRacksDifferByTwoTraversals)
{
    for (std::int64_t bytes : {std::int64_t{1}, std::int64_t{1000}, kGigabyte, 3 * kGigabyte}) {
        Bench same(0.0);
        same.net->startTransfer(*same.vms[0], *same.vms[1], bytes);
        same.sim.run();
        Bench cross(0.0);
        cross.net->startTransfer(*cross.vms[0], *cross.vms[2], bytes);
        cross.sim.run();
        const double traversal = 8.0 * static_cast<double>(bytes) / 1e9;
        EXPECT_NEAR(cross.sink->got.at(0).first - same.sink->got.at(0).first, 2.0 * traversal, 1e-9 * (1 + traversal));
    }
}
