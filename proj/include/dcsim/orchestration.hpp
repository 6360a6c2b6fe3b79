#pragma once

#include "dcsim/cloudlet.hpp"
#include "dcsim/engine.hpp"
#include "dcsim/network.hpp"
#include "dcsim/resources.hpp"
#include "dcsim/scheduling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcsim {

class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Workflow model

struct TaskTemplate {
    std::string name;
    double lengthMI = 0.0;
    int pes = 1;

    friend bool operator==(const TaskTemplate&, const TaskTemplate&) = default;
};

struct DataEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    std::int64_t payloadBytes = 0;

    friend bool operator==(const DataEdge&, const DataEdge&) = default;
};

/// Tasks connected by data dependencies. Each edge becomes a SEND stage on
/// its source task and a RECEIVE stage on its sink task.
struct WorkflowDag {
    std::vector<TaskTemplate> tasks;
    std::vector<DataEdge> edges;
    std::optional<double> deadlineSeconds;

    void validate() const
    {
        if (tasks.empty()) {
            throw ConfigurationError("workflow has no tasks");
        }
        for (const auto& t : tasks) {
            if (!(t.lengthMI >= 0.0) || t.pes < 1) {
                throw ConfigurationError("task '" + t.name + "' needs length >= 0 and at least one PE");
            }
        }
        for (const auto& e : edges) {
            if (e.from >= tasks.size() || e.to >= tasks.size() || e.from == e.to) {
                throw ConfigurationError("workflow edge references an unknown task or itself");
            }
            if (e.payloadBytes < 0) {
                throw ConfigurationError("workflow edge payload must be non-negative");
            }
        }
        if (deadlineSeconds && !(*deadlineSeconds >= 0.0)) {
            throw ConfigurationError("deadline must be non-negative");
        }
        // Kahn's algorithm; leftovers mean a cycle.
        std::vector<int> indeg(tasks.size(), 0);
        for (const auto& e : edges) {
            ++indeg[e.to];
        }
        std::vector<std::size_t> ready;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (indeg[i] == 0) {
                ready.push_back(i);
            }
        }
        std::size_t visited = 0;
        while (!ready.empty()) {
            const std::size_t n = ready.back();
            ready.pop_back();
            ++visited;
            for (const auto& e : edges) {
                if (e.from == n && --indeg[e.to] == 0) {
                    ready.push_back(e.to);
                }
            }
        }
        if (visited != tasks.size()) {
            throw ConfigurationError("workflow contains a cycle");
        }
    }

    /// Tasks without outgoing edges.
    std::vector<std::size_t> sinks() const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const bool hasOut = std::any_of(edges.begin(), edges.end(), [&](const auto& e) { return e.from == i; });
            if (!hasOut) {
                out.push_back(i);
            }
        }
        return out;
    }

    /// Receive from every predecessor, execute, then send to every successor.
    std::vector<Stage> stagesFor(std::size_t task, const std::function<int(std::size_t)>& cloudletIdOf) const
    {
        std::vector<Stage> stages;
        for (const auto& e : edges) {
            if (e.to == task) {
                stages.push_back(Stage::receive(cloudletIdOf(e.from)));
            }
        }
        stages.push_back(Stage::execution(tasks[task].lengthMI));
        for (const auto& e : edges) {
            if (e.from == task) {
                stages.push_back(Stage::send(cloudletIdOf(e.to), e.payloadBytes));
            }
        }
        return stages;
    }

    std::int64_t totalPayloadBytes() const
    {
        std::int64_t total = 0;
        for (const auto& e : edges) {
            total += e.payloadBytes;
        }
        return total;
    }

    friend bool operator==(const WorkflowDag&, const WorkflowDag&) = default;
};

// ---------------------------------------------------------------------------
// Arrivals

enum class ArrivalKind { Exponential, Fixed };

struct ArrivalProcess {
    ArrivalKind kind = ArrivalKind::Fixed;
    double scaleSeconds = 1.0; ///< mean (exponential) or period (fixed)
    std::uint64_t seed = 1;
    int count = 1;
};

/// Release times starting at 0. Exponential gaps use the inverse transform on
/// 53-bit uniforms drawn from mt19937_64, so the stream is portable.
inline std::vector<SimTime> sampleArrivals(const ArrivalProcess& process)
{
    if (process.count < 1) {
        throw std::invalid_argument("arrival count must be at least 1");
    }
    if (!(process.scaleSeconds > 0.0)) {
        throw std::invalid_argument("arrival scale must be positive");
    }
    std::vector<SimTime> releases;
    releases.reserve(static_cast<std::size_t>(process.count));
    std::mt19937_64 rng(process.seed);
    SimTime t = 0.0;
    releases.push_back(t);
    for (int k = 1; k < process.count; ++k) {
        double gap = process.scaleSeconds;
        if (process.kind == ArrivalKind::Exponential) {
            // Strictly inside (0, 1), so the gap is finite and positive.
            const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
            gap = -process.scaleSeconds * std::log(u);
        }
        t += gap;
        releases.push_back(t);
    }
    return releases;
}

// ---------------------------------------------------------------------------
// Closed-form makespan

/// Uncontended makespan of one activation:
///   sum_i (L_i / mips + rho * O) + switches * sum_i (8 * payload / bw),
/// with rho = 1 iff the data path crosses a switch.
inline double theoreticalMakespan(std::span<const double> lengthsMI, double mips, double overheadSeconds,
                                  int switchCount, std::int64_t payloadBytes, double bwBps)
{
    if (!(mips > 0.0) || !(bwBps > 0.0)) {
        throw std::domain_error("mips and bandwidth must be positive");
    }
    if (!(overheadSeconds >= 0.0) || switchCount < 0 || payloadBytes < 0) {
        throw std::domain_error("makespan inputs must be non-negative");
    }
    const double rho = switchCount > 0 ? 1.0 : 0.0;
    double compute = 0.0;
    double transmit = 0.0;
    for (double l : lengthsMI) {
        if (!(l >= 0.0)) {
            throw std::domain_error("task lengths must be non-negative");
        }
        compute += l / mips + rho * overheadSeconds;
        transmit += 8.0 * static_cast<double>(payloadBytes) / bwBps;
    }
    return compute + static_cast<double>(switchCount) * transmit;
}

// ---------------------------------------------------------------------------
// Activation records

enum class DeadlineOutcome { Met, Missed, NotApplicable };

inline const char* toString(DeadlineOutcome d)
{
    switch (d) {
    case DeadlineOutcome::Met: return "MET";
    case DeadlineOutcome::Missed: return "MISSED";
    case DeadlineOutcome::NotApplicable: break;
    }
    return "N/A";
}

struct ActivationRecord {
    int activationId = -1;
    SimTime releaseTime = 0.0;
    SimTime finishTime = 0.0;
    double makespanSeconds = 0.0;
    DeadlineOutcome deadlineOutcome = DeadlineOutcome::NotApplicable;
    bool finished = false;
    bool failed = false;
};

/// MET iff the makespan does not exceed the deadline.
inline DeadlineOutcome checkDeadline(const ActivationRecord& activation, double deadlineSeconds)
{
    if (!activation.finished) {
        throw std::logic_error("activation " + std::to_string(activation.activationId) + " has not finished");
    }
    return activation.makespanSeconds <= deadlineSeconds ? DeadlineOutcome::Met : DeadlineOutcome::Missed;
}

struct MakespanSummary {
    std::size_t count = 0;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
    /// (makespan, cumulative fraction k/n), makespans ascending.
    std::vector<std::pair<double, double>> ecdf;
};

struct ResultSet {
    std::vector<ActivationRecord> records;
    MakespanSummary summary;
};

/// Sorts finished records by release time and summarizes their makespans.
inline ResultSet collectResults(std::vector<ActivationRecord> records)
{
    ResultSet out;
    std::erase_if(records, [](const auto& r) { return !r.finished; });
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.releaseTime < b.releaseTime; });
    out.records = std::move(records);
    std::vector<double> m;
    m.reserve(out.records.size());
    for (const auto& r : out.records) {
        m.push_back(r.makespanSeconds);
    }
    std::sort(m.begin(), m.end());
    auto& s = out.summary;
    s.count = m.size();
    if (m.empty()) {
        return out;
    }
    s.min = m.front();
    s.max = m.back();
    const std::size_t n = m.size();
    s.median = n % 2 == 1 ? m[n / 2] : 0.5 * (m[n / 2 - 1] + m[n / 2]);
    for (std::size_t k = 0; k < n; ++k) {
        s.ecdf.emplace_back(m[k], static_cast<double>(k + 1) / static_cast<double>(n));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Entities

struct DatacenterTags {
    EventTag submit;
    EventTag update;
    EventTag deliver;
    EventTag cloudletReturn;

    static DatacenterTags registerIn(TagRegistry& tags)
    {
        auto t = tags.registerNamespace("dc", {"CLOUDLET_SUBMIT", "UPDATE_PROCESSING", "PKT_DELIVER", "CLOUDLET_RETURN"});
        return DatacenterTags{t[0], t[1], t[2], t[3]};
    }
};

struct BrokerTags {
    EventTag activate;

    static BrokerTags registerIn(TagRegistry& tags)
    {
        return BrokerTags{tags.registerNamespace("broker", {"ACTIVATE"}).front()};
    }
};

struct SubmitItem {
    CloudletPtr cloudlet;
    int guestId = -1;
};

/// Payload of a submission event; the batch is registered before any member
/// runs so that sends always find their peer.
struct SubmitBatch {
    EntityId owner = -1;
    std::vector<SubmitItem> items;
};

/// Owns hosts and guests, drives every guest's cloudlet scheduler and hands
/// SEND stages to the network.
class Datacenter final : public SimEntity {
public:
    Datacenter(std::string name, DatacenterTags tags) : SimEntity(std::move(name)), tags_(tags) {}

    PhysicalHost& addHost(HostSpec spec, PowerModel power = {})
    {
        if (hostById_.count(spec.id) != 0) {
            throw ConfigurationError("duplicate host id " + std::to_string(spec.id));
        }
        hosts_.push_back(std::make_unique<PhysicalHost>(spec, power));
        PhysicalHost& h = *hosts_.back();
        hostById_[spec.id] = &h;
        meters_.push_back(Meter{{UtilizationPiece{0.0, std::numeric_limits<double>::infinity(), 0.0}}});
        return h;
    }

    VirtualEntity& addVm(GuestSpec spec, std::unique_ptr<CloudletScheduler> scheduler = nullptr)
    {
        auto vm = std::make_unique<VirtualEntity>(spec, std::move(scheduler));
        VirtualEntity& ref = *vm;
        registerGuest(std::move(vm));
        return ref;
    }

    Container& addContainer(GuestSpec spec, std::unique_ptr<CloudletScheduler> scheduler = nullptr)
    {
        auto c = std::make_unique<Container>(spec, std::move(scheduler));
        Container& ref = *c;
        registerGuest(std::move(c));
        return ref;
    }

    void attachNetwork(Network& network)
    {
        network_ = &network;
        network.setReceiver(id(), tags_.deliver);
    }

    PhysicalHost& host(int hostId) const
    {
        auto it = hostById_.find(hostId);
        if (it == hostById_.end()) {
            throw ConfigurationError("unknown host id " + std::to_string(hostId));
        }
        return *it->second;
    }

    GuestEntity& guest(int guestId) const
    {
        auto it = guestById_.find(guestId);
        if (it == guestById_.end()) {
            throw ConfigurationError("unknown guest id " + std::to_string(guestId));
        }
        return *it->second;
    }

    bool hasGuest(int guestId) const { return guestById_.count(guestId) != 0; }

    std::vector<HostEntity*> hostEntities() const
    {
        std::vector<HostEntity*> out;
        for (const auto& h : hosts_) {
            out.push_back(h.get());
        }
        return out;
    }

    const std::vector<std::unique_ptr<PhysicalHost>>& hosts() const noexcept { return hosts_; }
    const std::vector<std::unique_ptr<GuestEntity>>& guests() const noexcept { return guests_; }

    /// Utilization trace of a host, pieces ordered in time; the last piece is open-ended.
    const std::vector<UtilizationPiece>& utilizationTrace(std::size_t hostIndex) const
    {
        return meters_.at(hostIndex).pieces;
    }

    /// Energy of all hosts over [t0, t1].
    double energyJoules(SimTime t0, SimTime t1) const
    {
        double total = 0.0;
        for (std::size_t i = 0; i < hosts_.size(); ++i) {
            total += energyBetween(hosts_[i]->powerModel(), t0, t1, meters_[i].pieces);
        }
        return total;
    }

protected:
    void processEvent(const Event& ev) override
    {
        const SimTime now = sim().clock();
        if (ev.tag == tags_.update) {
            pendingUpdates_.erase(now);
            scheduleNextUpdate(updateAll(now));
            return;
        }
        updateAll(now);
        if (ev.tag == tags_.submit) {
            const auto& batch = std::any_cast<const SubmitBatch&>(ev.payload);
            for (const auto& item : batch.items) {
                GuestEntity& g = guest(item.guestId);
                if (!g.placed()) {
                    throw ConfigurationError("guest " + std::to_string(item.guestId) + " is not placed");
                }
                if (!cloudlets_.emplace(item.cloudlet->id(), Tracked{item.cloudlet, &g, batch.owner}).second) {
                    throw ConfigurationError("duplicate cloudlet id " + std::to_string(item.cloudlet->id()));
                }
            }
            for (const auto& item : batch.items) {
                GuestEntity& g = guest(item.guestId);
                g.scheduler().submitCloudlet(item.cloudlet, now, g.mipsShare());
            }
        } else if (ev.tag == tags_.deliver) {
            const auto& d = std::any_cast<const Delivery&>(ev.payload);
            auto it = cloudlets_.find(d.dstCloudletId);
            if (it != cloudlets_.end()) {
                if (auto* nc = dynamic_cast<NetworkCloudlet*>(it->second.cloudlet.get())) {
                    nc->deliver(d.srcCloudletId);
                }
            }
        }
        scheduleNextUpdate(updateAll(now));
    }

private:
    struct Tracked {
        CloudletPtr cloudlet;
        GuestEntity* guest;
        EntityId owner;
    };

    struct Meter {
        std::vector<UtilizationPiece> pieces;
    };

    void registerGuest(std::unique_ptr<GuestEntity> g)
    {
        if (guestById_.count(g->guestId()) != 0) {
            throw ConfigurationError("duplicate guest id " + std::to_string(g->guestId()));
        }
        guestById_[g->guestId()] = g.get();
        guests_.push_back(std::move(g));
    }

    /// Brings every guest up to `now`; returns the earliest self-predicted event.
    SimTime updateAll(SimTime now)
    {
        SimTime next = kNoProgress;
        std::vector<std::pair<GuestEntity*, SendRequest>> sends;
        for (const auto& g : guests_) {
            if (!g->placed()) {
                continue;
            }
            UpdateContext ctx;
            const SimTime t = g->scheduler().updateProcessing(now, g->mipsShare(), ctx);
            if (t > 0.0 && t < next) {
                next = t;
            }
            for (const auto& s : ctx.sends) {
                sends.emplace_back(g.get(), s);
            }
            for (auto& done : g->scheduler().takeCompleted()) {
                auto it = cloudlets_.find(done->id());
                const EntityId owner = it == cloudlets_.end() ? -1 : it->second.owner;
                if (owner >= 0) {
                    sim().schedule(id(), 0.0, owner, tags_.cloudletReturn, CloudletPtr(done));
                }
            }
        }
        for (const auto& [src, s] : sends) {
            auto it = cloudlets_.find(s.dstCloudletId);
            if (it == cloudlets_.end()) {
                throw ConfigurationError("send to unknown cloudlet " + std::to_string(s.dstCloudletId));
            }
            if (network_ != nullptr) {
                network_->startTransfer(*src, *it->second.guest, s.payloadBytes, s.srcCloudletId, s.dstCloudletId);
            } else {
                sim().schedule(id(), 0.0, id(), tags_.deliver, Delivery{-1, s.srcCloudletId, s.dstCloudletId});
            }
        }
        recordUtilization(now);
        return next;
    }

    void scheduleNextUpdate(SimTime next)
    {
        if (next == kNoProgress || next <= 0.0) {
            return;
        }
        if (pendingUpdates_.insert(next).second) {
            sim().scheduleAt(id(), next, id(), tags_.update);
        }
    }

    void recordUtilization(SimTime now)
    {
        std::vector<double> used(hosts_.size(), 0.0);
        for (const auto& g : guests_) {
            if (!g->placed() || g->scheduler().execList().empty()) {
                continue;
            }
            const PhysicalHost& h = physicalHostOf(*g);
            for (std::size_t i = 0; i < hosts_.size(); ++i) {
                if (hosts_[i].get() == &h) {
                    used[i] += g->scheduler().usedMips(g->mipsShare());
                }
            }
        }
        for (std::size_t i = 0; i < hosts_.size(); ++i) {
            const double u = std::min(1.0, used[i] / hosts_[i]->capacity().totalMips());
            auto& pieces = meters_[i].pieces;
            if (pieces.back().utilization == u) {
                continue;
            }
            if (pieces.back().from == now) {
                pieces.back().utilization = u;
            } else {
                pieces.back().to = now;
                pieces.push_back(UtilizationPiece{now, std::numeric_limits<double>::infinity(), u});
            }
        }
    }

    DatacenterTags tags_;
    Network* network_ = nullptr;
    std::vector<std::unique_ptr<PhysicalHost>> hosts_;
    std::vector<std::unique_ptr<GuestEntity>> guests_;
    std::map<int, PhysicalHost*> hostById_;
    std::map<int, GuestEntity*> guestById_;
    std::map<int, Tracked> cloudlets_;
    std::set<SimTime> pendingUpdates_;
    std::vector<Meter> meters_;
};

/// Releases workflow activations and records their makespans.
class Broker final : public SimEntity {
public:
    Broker(std::string name, BrokerTags tags, DatacenterTags dcTags, Datacenter& datacenter, WorkflowDag dag,
           std::vector<int> taskGuest, std::vector<SimTime> releases)
        : SimEntity(std::move(name)),
          tags_(tags),
          dcTags_(dcTags),
          datacenter_(&datacenter),
          dag_(std::move(dag)),
          taskGuest_(std::move(taskGuest)),
          releases_(std::move(releases))
    {
        dag_.validate();
        if (taskGuest_.size() != dag_.tasks.size()) {
            throw ConfigurationError("every workflow task needs a guest");
        }
        sinks_ = dag_.sinks();
    }

    /// Instantiates and submits one activation at the current clock.
    int activateWorkflow()
    {
        for (std::size_t t = 0; t < taskGuest_.size(); ++t) {
            if (!datacenter_->hasGuest(taskGuest_[t]) || !datacenter_->guest(taskGuest_[t]).placed()) {
                throw ConfigurationError("task '" + dag_.tasks[t].name + "' is not mapped to a placed guest");
            }
        }
        const int activation = static_cast<int>(records_.size());
        const std::size_t n = dag_.tasks.size();
        auto cloudletId = [&](std::size_t task) { return activation * static_cast<int>(n) + static_cast<int>(task); };

        SubmitBatch batch;
        batch.owner = id();
        for (std::size_t t = 0; t < n; ++t) {
            auto cl = std::make_shared<NetworkCloudlet>(cloudletId(t), dag_.stagesFor(t, cloudletId), dag_.tasks[t].pes);
            cl->setDeadlineSeconds(dag_.deadlineSeconds);
            batch.items.push_back(SubmitItem{std::move(cl), taskGuest_[t]});
        }
        ActivationRecord rec;
        rec.activationId = activation;
        rec.releaseTime = sim().clock();
        records_.push_back(rec);
        sinksLeft_.push_back(sinks_.size());
        sim().schedule(id(), 0.0, datacenter_->id(), dcTags_.submit, std::move(batch));
        return activation;
    }

    const std::vector<ActivationRecord>& records() const noexcept { return records_; }
    const WorkflowDag& workflow() const noexcept { return dag_; }

protected:
    void startEntity() override
    {
        for (SimTime t : releases_) {
            sim().scheduleAt(id(), t, id(), tags_.activate);
        }
    }

    void processEvent(const Event& ev) override
    {
        if (ev.tag == tags_.activate) {
            activateWorkflow();
        } else if (ev.tag == dcTags_.cloudletReturn) {
            onReturn(*std::any_cast<const CloudletPtr&>(ev.payload));
        }
    }

private:
    void onReturn(const Cloudlet& cl)
    {
        const auto n = static_cast<int>(dag_.tasks.size());
        const auto activation = static_cast<std::size_t>(cl.id() / n);
        const auto task = static_cast<std::size_t>(cl.id() % n);
        ActivationRecord& rec = records_.at(activation);
        if (cl.status() == CloudletStatus::Failed) {
            rec.failed = true;
            return;
        }
        if (std::find(sinks_.begin(), sinks_.end(), task) == sinks_.end()) {
            return;
        }
        rec.finishTime = std::max(rec.finishTime, cl.finishTime());
        if (--sinksLeft_[activation] == 0 && !rec.failed) {
            rec.finished = true;
            rec.makespanSeconds = rec.finishTime - rec.releaseTime;
            rec.deadlineOutcome =
                dag_.deadlineSeconds ? checkDeadline(rec, *dag_.deadlineSeconds) : DeadlineOutcome::NotApplicable;
        }
    }

    BrokerTags tags_;
    DatacenterTags dcTags_;
    Datacenter* datacenter_;
    WorkflowDag dag_;
    std::vector<int> taskGuest_;
    std::vector<SimTime> releases_;
    std::vector<std::size_t> sinks_;
    std::vector<ActivationRecord> records_;
    std::vector<std::size_t> sinksLeft_;
};

} // namespace dcsim
