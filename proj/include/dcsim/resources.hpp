#pragma once

#include "dcsim/engine.hpp"
#include "dcsim/scheduling.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcsim {

/// MIPS of one core from its clock rate and instructions per cycle.
inline double mipsFromClock(double clkRateHz, double ipc)
{
    if (!(clkRateHz > 0.0) || !(ipc > 0.0)) {
        throw std::domain_error("clock rate and IPC must be positive");
    }
    return clkRateHz * ipc / 1e6;
}

/// Capacity shared by host and guest entities.
struct CoreAttributes {
    int numPes = 1;
    double mipsPerPe = 0.0;
    std::int64_t ramMB = 0;
    double bwBps = 0.0;

    double totalMips() const noexcept { return static_cast<double>(numPes) * mipsPerPe; }

    void validate() const
    {
        if (numPes < 1 || !(mipsPerPe > 0.0)) {
            throw std::invalid_argument("an entity needs at least one PE with positive MIPS");
        }
        if (ramMB < 0 || !(bwBps >= 0.0)) {
            throw std::invalid_argument("RAM and bandwidth must be non-negative");
        }
    }

    friend bool operator==(const CoreAttributes&, const CoreAttributes&) = default;
};

struct HostSpec {
    int id = 0;
    double clkRateHz = 0.0;
    double ipc = 0.0;
    CoreAttributes core;

    /// Host whose per-PE MIPS follow from its clock rate and IPC.
    static HostSpec fromClock(int id, double clkRateHz, double ipc, int pes, std::int64_t ramMB, double bwBps)
    {
        return HostSpec{id, clkRateHz, ipc, CoreAttributes{pes, mipsFromClock(clkRateHz, ipc), ramMB, bwBps}};
    }
};

enum class GuestKind { Vm, Container };

struct GuestSpec {
    int id = 0;
    GuestKind kind = GuestKind::Vm;
    CoreAttributes core;
    /// Delay charged each time a network payload crosses this guest's stack.
    double virtOverheadSeconds = 0.0;
};

/// Linear utilization-to-power model.
struct PowerModel {
    double idleWatts = 0.0;
    double maxWatts = 0.0;

    PowerModel() = default;
    PowerModel(double idle, double max) : idleWatts(idle), maxWatts(max)
    {
        if (!(idle >= 0.0) || !(max >= idle)) {
            throw std::domain_error("power model needs 0 <= idle <= max");
        }
    }

    double power(double utilization) const
    {
        if (!(utilization >= 0.0 && utilization <= 1.0)) {
            throw std::domain_error("utilization must lie in [0, 1]");
        }
        return idleWatts + (maxWatts - idleWatts) * utilization;
    }
};

/// Constant utilization over [from, to).
struct UtilizationPiece {
    SimTime from = 0.0;
    SimTime to = 0.0;
    double utilization = 0.0;
};

/// Energy in joules over [t0, t1] for a piecewise-constant utilization trace.
/// Pieces must be ordered and contiguous; they may extend past either end.
inline double energyBetween(const PowerModel& model, SimTime t0, SimTime t1, std::span<const UtilizationPiece> pieces)
{
    if (!(t1 >= t0)) {
        throw std::domain_error("energy interval must have t1 >= t0");
    }
    if (t1 == t0) {
        return 0.0;
    }
    double joules = 0.0;
    SimTime covered = t0;
    for (const auto& p : pieces) {
        if (p.to <= covered) {
            continue;
        }
        if (p.from > covered) {
            throw std::domain_error("utilization trace has a gap");
        }
        const SimTime end = std::min(p.to, t1);
        joules += model.power(p.utilization) * (end - covered);
        covered = end;
        if (covered >= t1) {
            break;
        }
    }
    if (covered < t1) {
        throw std::domain_error("utilization trace does not cover the interval");
    }
    return joules;
}

enum class PlacementStatus { Ok, InsufficientCapacity, AlreadyPlaced, Cycle };
enum class ResourceDimension { None, PeMips, Ram, Bw };

inline const char* toString(ResourceDimension d)
{
    switch (d) {
    case ResourceDimension::PeMips: return "PE-MIPS";
    case ResourceDimension::Ram: return "RAM";
    case ResourceDimension::Bw: return "BW";
    case ResourceDimension::None: break;
    }
    return "none";
}

struct PlacementResult {
    PlacementStatus status = PlacementStatus::Ok;
    ResourceDimension dimension = ResourceDimension::None;
    std::string message;

    explicit operator bool() const noexcept { return status == PlacementStatus::Ok; }
};

/// Free/allocated totals per resource dimension.
struct LedgerSnapshot {
    std::vector<double> peFreeMips;
    double freeMips = 0.0;
    double allocatedMips = 0.0;
    std::int64_t freeRam = 0;
    std::int64_t allocatedRam = 0;
    double freeBw = 0.0;
    double allocatedBw = 0.0;

    friend bool operator==(const LedgerSnapshot&, const LedgerSnapshot&) = default;
};

class GuestEntity;

/// Anything guests can be placed on: a physical host or a VirtualEntity.
class HostEntity {
public:
    explicit HostEntity(CoreAttributes capacity) : capacity_(capacity), peFree_(capacity.numPes, capacity.mipsPerPe)
    {
        capacity_.validate();
        ramFree_ = capacity_.ramMB;
        bwFree_ = capacity_.bwBps;
    }
    virtual ~HostEntity() = default;

    HostEntity(const HostEntity&) = delete;
    HostEntity& operator=(const HostEntity&) = delete;

    virtual int hostId() const noexcept = 0;
    virtual bool isPhysical() const noexcept = 0;
    /// Non-null when this host is itself a guest.
    virtual GuestEntity* asGuest() noexcept { return nullptr; }
    virtual const GuestEntity* asGuest() const noexcept { return nullptr; }

    const CoreAttributes& capacity() const noexcept { return capacity_; }
    const std::vector<GuestEntity*>& guests() const noexcept { return guests_; }

    /// Debits the guest's guaranteed capacity and links it here. Atomic: on
    /// failure nothing changes.
    PlacementResult place(GuestEntity& guest);

    /// Releases a placed guest's capacity.
    void remove(GuestEntity& guest);

    /// Could `core` be placed right now?
    PlacementResult fits(const CoreAttributes& core) const
    {
        if (pickPes(core).empty()) {
            return {PlacementStatus::InsufficientCapacity, ResourceDimension::PeMips,
                    "insufficient PE-MIPS on host " + std::to_string(hostId())};
        }
        if (core.ramMB > ramFree_) {
            return {PlacementStatus::InsufficientCapacity, ResourceDimension::Ram,
                    "insufficient RAM on host " + std::to_string(hostId())};
        }
        if (core.bwBps > bwFree_) {
            return {PlacementStatus::InsufficientCapacity, ResourceDimension::Bw,
                    "insufficient BW on host " + std::to_string(hostId())};
        }
        return {};
    }

    LedgerSnapshot ledger() const
    {
        LedgerSnapshot s;
        s.peFreeMips = peFree_;
        s.freeMips = std::accumulate(peFree_.begin(), peFree_.end(), 0.0);
        s.freeRam = ramFree_;
        s.freeBw = bwFree_;
        for (const auto& a : allocations_) {
            s.allocatedMips += a.mipsPerPe * static_cast<double>(a.pes.size());
            s.allocatedRam += a.ramMB;
            s.allocatedBw += a.bwBps;
        }
        return s;
    }

    double allocatedMips() const { return ledger().allocatedMips; }

private:
    struct Allocation {
        const GuestEntity* guest;
        std::vector<std::size_t> pes;
        double mipsPerPe;
        std::int64_t ramMB;
        double bwBps;
    };

    /// Distinct PEs with enough free MIPS, preferring the emptiest; empty if none.
    std::vector<std::size_t> pickPes(const CoreAttributes& core) const
    {
        std::vector<std::size_t> order(peFree_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return peFree_[a] > peFree_[b]; });
        std::vector<std::size_t> chosen;
        for (auto pe : order) {
            if (chosen.size() == static_cast<std::size_t>(core.numPes)) {
                break;
            }
            if (peFree_[pe] >= core.mipsPerPe) {
                chosen.push_back(pe);
            }
        }
        if (chosen.size() != static_cast<std::size_t>(core.numPes)) {
            return {};
        }
        std::sort(chosen.begin(), chosen.end());
        return chosen;
    }

    CoreAttributes capacity_;
    std::vector<double> peFree_;
    std::int64_t ramFree_ = 0;
    double bwFree_ = 0.0;
    std::vector<GuestEntity*> guests_;
    std::vector<Allocation> allocations_;
};

/// A VM or container: runs cloudlets through its own scheduler.
class GuestEntity {
public:
    GuestEntity(GuestSpec spec, std::unique_ptr<CloudletScheduler> scheduler)
        : spec_(spec), scheduler_(std::move(scheduler)), share_(spec.core.numPes, spec.core.mipsPerPe)
    {
        spec_.core.validate();
        if (!(spec_.virtOverheadSeconds >= 0.0)) {
            throw std::invalid_argument("virtualization overhead must be non-negative");
        }
        if (!scheduler_) {
            scheduler_ = std::make_unique<TimeSharedScheduler>();
        }
    }
    virtual ~GuestEntity() = default;

    GuestEntity(const GuestEntity&) = delete;
    GuestEntity& operator=(const GuestEntity&) = delete;

    const GuestSpec& spec() const noexcept { return spec_; }
    int guestId() const noexcept { return spec_.id; }

    CloudletScheduler& scheduler() noexcept { return *scheduler_; }
    const CloudletScheduler& scheduler() const noexcept { return *scheduler_; }

    HostEntity* host() noexcept { return host_; }
    const HostEntity* host() const noexcept { return host_; }
    bool placed() const noexcept { return host_ != nullptr; }

    /// Per-PE MIPS guaranteed to this guest.
    std::span<const double> mipsShare() const noexcept { return share_; }

    /// Non-null when this guest can host further guests.
    virtual HostEntity* asHost() noexcept { return nullptr; }
    virtual const HostEntity* asHost() const noexcept { return nullptr; }

private:
    friend class HostEntity;

    GuestSpec spec_;
    std::unique_ptr<CloudletScheduler> scheduler_;
    std::vector<double> share_;
    HostEntity* host_ = nullptr;
};

class PhysicalHost final : public HostEntity {
public:
    explicit PhysicalHost(HostSpec spec, PowerModel power = {}) : HostEntity(spec.core), spec_(spec), power_(power) {}

    int hostId() const noexcept override { return spec_.id; }
    bool isPhysical() const noexcept override { return true; }

    const HostSpec& spec() const noexcept { return spec_; }
    const PowerModel& powerModel() const noexcept { return power_; }

private:
    HostSpec spec_;
    PowerModel power_;
};

/// Plain guest; cannot host.
class Container final : public GuestEntity {
public:
    explicit Container(GuestSpec spec, std::unique_ptr<CloudletScheduler> scheduler = nullptr)
        : GuestEntity(withKind(spec), std::move(scheduler))
    {
    }

private:
    static GuestSpec withKind(GuestSpec s)
    {
        s.kind = GuestKind::Container;
        return s;
    }
};

/// Guest that is also a host; the building block of nested virtualization.
class VirtualEntity final : public GuestEntity, public HostEntity {
public:
    explicit VirtualEntity(GuestSpec spec, std::unique_ptr<CloudletScheduler> scheduler = nullptr)
        : GuestEntity(spec, std::move(scheduler)), HostEntity(spec.core)
    {
    }

    int hostId() const noexcept override { return guestId(); }
    bool isPhysical() const noexcept override { return false; }
    GuestEntity* asGuest() noexcept override { return this; }
    const GuestEntity* asGuest() const noexcept override { return this; }
    HostEntity* asHost() noexcept override { return this; }
    const HostEntity* asHost() const noexcept override { return this; }
};

inline PlacementResult HostEntity::place(GuestEntity& guest)
{
    if (guest.placed()) {
        return {PlacementStatus::AlreadyPlaced, ResourceDimension::None,
                "guest " + std::to_string(guest.guestId()) + " is already placed"};
    }
    // Walk up from this host; meeting the guest means the placement closes a loop.
    const HostEntity* self = guest.asHost();
    for (const HostEntity* h = this; h != nullptr;) {
        if (h == self) {
            return {PlacementStatus::Cycle, ResourceDimension::None,
                    "placing guest " + std::to_string(guest.guestId()) + " would create a virtualization cycle"};
        }
        const GuestEntity* g = h->asGuest();
        h = g == nullptr ? nullptr : g->host();
    }
    const CoreAttributes& want = guest.spec().core;
    if (auto r = fits(want); !r) {
        return r;
    }
    auto pes = pickPes(want);
    for (auto pe : pes) {
        peFree_[pe] -= want.mipsPerPe;
    }
    ramFree_ -= want.ramMB;
    bwFree_ -= want.bwBps;
    allocations_.push_back(Allocation{&guest, std::move(pes), want.mipsPerPe, want.ramMB, want.bwBps});
    guests_.push_back(&guest);
    guest.host_ = this;
    return {};
}

inline void HostEntity::remove(GuestEntity& guest)
{
    auto it = std::find_if(allocations_.begin(), allocations_.end(), [&](const auto& a) { return a.guest == &guest; });
    if (it == allocations_.end()) {
        throw std::logic_error("guest " + std::to_string(guest.guestId()) + " is not placed here");
    }
    for (auto pe : it->pes) {
        peFree_[pe] += it->mipsPerPe;
    }
    ramFree_ += it->ramMB;
    bwFree_ += it->bwBps;
    allocations_.erase(it);
    guests_.erase(std::find(guests_.begin(), guests_.end(), &guest));
    guest.host_ = nullptr;
}

/// Free-function form of HostEntity::place.
inline PlacementResult placeGuest(HostEntity& host, GuestEntity& guest) { return host.place(guest); }

class PlacementStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Physical host at the bottom of the guest's virtualization chain.
inline const PhysicalHost& physicalHostOf(const GuestEntity& guest)
{
    const GuestEntity* g = &guest;
    while (true) {
        const HostEntity* h = g->host();
        if (h == nullptr) {
            throw PlacementStateError("guest " + std::to_string(guest.guestId()) + " is not placed on a physical host");
        }
        if (h->isPhysical()) {
            return static_cast<const PhysicalHost&>(*h);
        }
        g = h->asGuest();
    }
}

/// Number of host links from the guest down to its physical host.
inline int chainLength(const GuestEntity& guest)
{
    int n = 0;
    const GuestEntity* g = &guest;
    while (true) {
        const HostEntity* h = g->host();
        if (h == nullptr) {
            throw PlacementStateError("guest " + std::to_string(guest.guestId()) + " is not placed on a physical host");
        }
        ++n;
        if (h->isPhysical()) {
            return n;
        }
        g = h->asGuest();
    }
}

/// Virtualization overhead of the whole stack from the guest down to, but
/// excluding, its physical host.
inline double stackOverhead(const GuestEntity& guest)
{
    double total = 0.0;
    const GuestEntity* g = &guest;
    while (true) {
        total += g->spec().virtOverheadSeconds;
        const HostEntity* h = g->host();
        if (h == nullptr) {
            throw PlacementStateError("guest " + std::to_string(guest.guestId()) + " is not placed on a physical host");
        }
        if (h->isPhysical()) {
            return total;
        }
        g = h->asGuest();
    }
}

} // namespace dcsim
