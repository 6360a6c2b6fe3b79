#pragma once

#include "dcsim/engine.hpp"
#include "dcsim/resources.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dcsim {

class RoutingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SwitchLevel { Tor, Aggregate };

struct Switch {
    std::string name;
    SwitchLevel level = SwitchLevel::Tor;
    double forwardingDelaySeconds = 0.0;
};

/// Bidirectional link; each direction carries bandwidthBps independently.
struct Link {
    int nodeA = -1;
    int nodeB = -1;
    double bandwidthBps = 0.0;
};

/// One directed traversal of a link.
struct Hop {
    std::size_t link = 0;
    int from = -1;
    int to = -1;

    friend bool operator==(const Hop&, const Hop&) = default;
};

struct Route {
    std::vector<Hop> hops;
    /// Switch tiers crossed (0 local, 1 within a rack, 2 across racks).
    int switchCount = 0;
};

/// Hosts and switches joined by links. Host nodes are keyed by host id.
class Topology {
public:
    int addHost(int hostId)
    {
        if (hostNode_.count(hostId) != 0) {
            throw std::invalid_argument("host " + std::to_string(hostId) + " already in topology");
        }
        const int node = addNode(Node{false, hostId, {}});
        hostNode_[hostId] = node;
        return node;
    }

    int addSwitch(Switch sw)
    {
        if (!(sw.forwardingDelaySeconds >= 0.0)) {
            throw std::invalid_argument("switch forwarding delay must be non-negative");
        }
        return addNode(Node{true, -1, std::move(sw)});
    }

    std::size_t addLink(int nodeA, int nodeB, double bandwidthBps)
    {
        checkNode(nodeA);
        checkNode(nodeB);
        if (nodeA == nodeB) {
            throw std::invalid_argument("self-loop link");
        }
        if (!(bandwidthBps > 0.0)) {
            throw std::invalid_argument("link bandwidth must be positive");
        }
        links_.push_back(Link{nodeA, nodeB, bandwidthBps});
        const std::size_t index = links_.size() - 1;
        adjacency_[static_cast<std::size_t>(nodeA)].push_back(index);
        adjacency_[static_cast<std::size_t>(nodeB)].push_back(index);
        return index;
    }

    int nodeOfHost(int hostId) const
    {
        auto it = hostNode_.find(hostId);
        if (it == hostNode_.end()) {
            throw RoutingError("host " + std::to_string(hostId) + " is not in the topology");
        }
        return it->second;
    }

    bool hasHost(int hostId) const { return hostNode_.count(hostId) != 0; }
    bool isSwitch(int node) const { return nodes_.at(static_cast<std::size_t>(node)).isSwitch; }
    const Switch& switchAt(int node) const { return nodes_.at(static_cast<std::size_t>(node)).sw; }
    const std::vector<Link>& links() const noexcept { return links_; }
    std::size_t nodeCount() const noexcept { return nodes_.size(); }

    /// Shortest path between two hosts (BFS, ties to the earliest-added link).
    Route route(int srcHostId, int dstHostId) const
    {
        const int src = nodeOfHost(srcHostId);
        const int dst = nodeOfHost(dstHostId);
        Route r;
        if (src == dst) {
            return r;
        }
        std::vector<std::optional<Hop>> via(nodes_.size());
        std::vector<bool> seen(nodes_.size(), false);
        std::deque<int> frontier{src};
        seen[static_cast<std::size_t>(src)] = true;
        while (!frontier.empty() && !seen[static_cast<std::size_t>(dst)]) {
            const int n = frontier.front();
            frontier.pop_front();
            for (std::size_t li : adjacency_[static_cast<std::size_t>(n)]) {
                const Link& l = links_[li];
                const int other = l.nodeA == n ? l.nodeB : l.nodeA;
                if (seen[static_cast<std::size_t>(other)]) {
                    continue;
                }
                // Only switches forward traffic; hosts are endpoints.
                if (other != dst && !isSwitch(other)) {
                    continue;
                }
                seen[static_cast<std::size_t>(other)] = true;
                via[static_cast<std::size_t>(other)] = Hop{li, n, other};
                frontier.push_back(other);
            }
        }
        if (!seen[static_cast<std::size_t>(dst)]) {
            throw RoutingError("no route from host " + std::to_string(srcHostId) + " to host " +
                               std::to_string(dstHostId));
        }
        for (int n = dst; n != src;) {
            const Hop h = *via[static_cast<std::size_t>(n)];
            r.hops.push_back(h);
            n = h.from;
        }
        std::reverse(r.hops.begin(), r.hops.end());
        // Count tiers rather than switch nodes: a cross-rack path in a two-tier
        // tree passes ToR, aggregate, ToR and counts as 2.
        bool tierSeen[2] = {false, false};
        for (std::size_t i = 0; i + 1 < r.hops.size(); ++i) {
            if (isSwitch(r.hops[i].to)) {
                tierSeen[switchAt(r.hops[i].to).level == SwitchLevel::Tor ? 0 : 1] = true;
            }
        }
        r.switchCount = static_cast<int>(tierSeen[0]) + static_cast<int>(tierSeen[1]);
        return r;
    }

    /// Every host reaches every other host.
    bool connected() const
    {
        for (const auto& [a, na] : hostNode_) {
            for (const auto& [b, nb] : hostNode_) {
                if (a < b) {
                    try {
                        route(a, b);
                    } catch (const RoutingError&) {
                        return false;
                    }
                }
            }
        }
        return true;
    }

private:
    struct Node {
        bool isSwitch = false;
        int hostId = -1;
        Switch sw;
    };

    int addNode(Node n)
    {
        nodes_.push_back(std::move(n));
        adjacency_.emplace_back();
        return static_cast<int>(nodes_.size() - 1);
    }

    void checkNode(int node) const
    {
        if (node < 0 || static_cast<std::size_t>(node) >= nodes_.size()) {
            throw std::invalid_argument("unknown topology node " + std::to_string(node));
        }
    }

    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<std::size_t>> adjacency_;
    std::map<int, int> hostNode_;
};

/// Route between the physical hosts of two guests.
inline Route route(const Topology& topology, int srcHostId, int dstHostId)
{
    return topology.route(srcHostId, dstHostId);
}

/// Equal split of a link direction's bandwidth among its active transfers.
inline double fairShareRecompute(const Link& link, std::size_t activeTransfers)
{
    if (activeTransfers == 0) {
        throw std::invalid_argument("fair share needs at least one active transfer");
    }
    return link.bandwidthBps / static_cast<double>(activeTransfers);
}

struct Transfer {
    int id = -1;
    int srcCloudletId = -1;
    int dstCloudletId = -1;
    const GuestEntity* src = nullptr;
    const GuestEntity* dst = nullptr;
    std::int64_t payloadBytes = 0;
    double sizeBits = 0.0;
    Route route;
    std::size_t currentHop = 0;
    double remainingBits = 0.0; ///< on the current hop
    double shareBps = 0.0;
    SimTime lastProgress = 0.0;
    std::uint64_t version = 0;
    SimTime startTime = 0.0;
    SimTime deliveryTime = -1.0;
    double deliveredBits = 0.0;

    int hopCount() const noexcept { return route.switchCount; }
    bool delivered() const noexcept { return deliveryTime >= 0.0; }
};

/// Payload of the delivery event sent to the receiving side.
struct Delivery {
    int transferId = -1;
    int srcCloudletId = -1;
    int dstCloudletId = -1;
};

struct NetworkTags {
    EventTag enterLink;
    EventTag linkDone;
    EventTag deliverLocal;

    static NetworkTags registerIn(TagRegistry& tags)
    {
        auto t = tags.registerNamespace("net", {"ENTER_LINK", "LINK_DONE", "DELIVER_LOCAL"});
        return NetworkTags{t[0], t[1], t[2]};
    }
};

/// Store-and-forward flow network. Every hop serializes the whole payload at
/// the transfer's fair share of that link direction. Virtualization overhead
/// of the sending and receiving stacks is charged only when the route crosses
/// at least one switch.
class Network final : public SimEntity {
public:
    Network(std::string name, Topology topology, NetworkTags tags, bool overheadEnabled = true)
        : SimEntity(std::move(name)), topology_(std::move(topology)), tags_(tags), overheadEnabled_(overheadEnabled)
    {
    }

    /// Where deliveries go: entity id and tag, payload is a Delivery.
    void setReceiver(EntityId receiver, EventTag deliverTag)
    {
        receiver_ = receiver;
        deliverTag_ = deliverTag;
    }

    const Topology& topology() const noexcept { return topology_; }
    bool overheadEnabled() const noexcept { return overheadEnabled_; }

    const Transfer& startTransfer(const GuestEntity& src, const GuestEntity& dst, std::int64_t payloadBytes,
                                  int srcCloudletId = -1, int dstCloudletId = -1)
    {
        if (payloadBytes < 0) {
            throw std::invalid_argument("negative payload");
        }
        const PhysicalHost& srcHost = physicalHostOf(src);
        const PhysicalHost& dstHost = physicalHostOf(dst);
        Transfer t;
        t.id = static_cast<int>(transfers_.size());
        t.srcCloudletId = srcCloudletId;
        t.dstCloudletId = dstCloudletId;
        t.src = &src;
        t.dst = &dst;
        t.payloadBytes = payloadBytes;
        t.sizeBits = 8.0 * static_cast<double>(payloadBytes);
        t.route = topology_.route(srcHost.hostId(), dstHost.hostId());
        t.startTime = sim().clock();
        transfers_.push_back(std::move(t));
        Transfer& added = transfers_.back();

        if (added.route.hops.empty()) {
            sim().schedule(id(), 0.0, id(), tags_.deliverLocal, added.id);
        } else {
            sim().schedule(id(), overheadFor(src, added), id(), tags_.enterLink, added.id);
        }
        return added;
    }

    const std::deque<Transfer>& transfers() const noexcept { return transfers_; }

    /// Transfers currently occupying a link direction.
    std::size_t activeOn(std::size_t link, int fromNode) const
    {
        auto it = channels_.find(ChannelKey{link, fromNode});
        return it == channels_.end() ? 0 : it->second.size();
    }

protected:
    void processEvent(const Event& ev) override
    {
        if (ev.tag == tags_.enterLink) {
            enterHop(transfers_.at(static_cast<std::size_t>(std::any_cast<int>(ev.payload))));
        } else if (ev.tag == tags_.linkDone) {
            const auto [tid, version] = std::any_cast<std::pair<int, std::uint64_t>>(ev.payload);
            Transfer& t = transfers_.at(static_cast<std::size_t>(tid));
            if (t.version == version) {
                finishHop(t);
            }
        } else if (ev.tag == tags_.deliverLocal) {
            deliver(transfers_.at(static_cast<std::size_t>(std::any_cast<int>(ev.payload))), 0.0);
        }
    }

private:
    using ChannelKey = std::pair<std::size_t, int>;

    double overheadFor(const GuestEntity& guest, const Transfer& t) const
    {
        if (!overheadEnabled_ || t.route.switchCount == 0) {
            return 0.0;
        }
        return stackOverhead(guest);
    }

    void enterHop(Transfer& t)
    {
        const Hop& hop = t.route.hops[t.currentHop];
        const ChannelKey key{hop.link, hop.from};
        auto& members = channels_[key];
        advance(members);
        t.remainingBits = t.sizeBits;
        t.lastProgress = sim().clock();
        members.push_back(t.id);
        reshare(key, members);
    }

    void finishHop(Transfer& t)
    {
        const Hop hop = t.route.hops[t.currentHop];
        const ChannelKey key{hop.link, hop.from};
        auto& members = channels_[key];
        advance(members);
        t.remainingBits = 0.0;
        ++t.version;
        members.erase(std::find(members.begin(), members.end(), t.id));
        reshare(key, members);

        ++t.currentHop;
        if (t.currentHop < t.route.hops.size()) {
            const double forward = topology_.isSwitch(hop.to) ? topology_.switchAt(hop.to).forwardingDelaySeconds : 0.0;
            sim().schedule(id(), forward, id(), tags_.enterLink, t.id);
        } else {
            deliver(t, overheadFor(*t.dst, t));
        }
    }

    void deliver(Transfer& t, double delay)
    {
        t.deliveredBits = t.sizeBits;
        t.deliveryTime = sim().clock() + delay;
        if (receiver_ >= 0) {
            sim().scheduleAt(id(), t.deliveryTime, receiver_, deliverTag_,
                             Delivery{t.id, t.srcCloudletId, t.dstCloudletId});
        }
    }

    /// Accrues progress up to now at the shares that held since the last change.
    void advance(const std::vector<int>& members)
    {
        const SimTime now = sim().clock();
        for (int tid : members) {
            Transfer& o = transfers_[static_cast<std::size_t>(tid)];
            o.remainingBits = std::max(0.0, o.remainingBits - o.shareBps * (now - o.lastProgress));
            o.lastProgress = now;
        }
    }

    void reshare(const ChannelKey& key, const std::vector<int>& members)
    {
        if (members.empty()) {
            return;
        }
        const double share = fairShareRecompute(topology_.links()[key.first], members.size());
        const SimTime now = sim().clock();
        for (int tid : members) {
            Transfer& o = transfers_[static_cast<std::size_t>(tid)];
            o.shareBps = share;
            ++o.version;
            sim().scheduleAt(id(), now + o.remainingBits / share, id(), tags_.linkDone,
                             std::pair<int, std::uint64_t>{o.id, o.version});
        }
    }

    Topology topology_;
    NetworkTags tags_;
    bool overheadEnabled_;
    EntityId receiver_ = -1;
    EventTag deliverTag_;
    std::deque<Transfer> transfers_;
    std::map<ChannelKey, std::vector<int>> channels_;
};

} // namespace dcsim
