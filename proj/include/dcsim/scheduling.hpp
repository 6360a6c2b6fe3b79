#pragma once

#include "dcsim/cloudlet.hpp"
#include "dcsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace dcsim {

using CloudletPtr = std::shared_ptr<Cloudlet>;

enum class SchedulingPolicy { TimeShared, SpaceShared };

class SchedulerStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Returned by updateProcessing when cloudlets are pending but none can make
/// progress on its own (zero share, or every executing cloudlet blocked).
/// The owner is expected to call again when capacity or inputs change.
inline constexpr SimTime kNoProgress = std::numeric_limits<double>::max();

/// Per-guest cloudlet lifecycle. updateProcessing is the fixed template; the
/// three handlers cloudletUpdate, cloudletIsFinished and unpauseCloudlets are
/// the customization points, together with the MIPS allocation rule.
class CloudletScheduler {
public:
    virtual ~CloudletScheduler() = default;

    virtual SchedulingPolicy policy() const noexcept = 0;

    /// Advances every executing cloudlet to `now` and returns the predicted
    /// completion time of the earliest finishing one, 0 when no cloudlets are
    /// left, or kNoProgress.
    SimTime updateProcessing(SimTime now, std::span<const double> mipsShare, UpdateContext& ctx)
    {
        if (now < previousTime_) {
            throw SchedulerStateError("scheduler time went backwards");
        }
        ctx.now = now;
        const double timeSpan = now - previousTime_;

        // Allocations are those that held over [previousTime, now]; they are
        // taken before any cloudlet leaves the list or changes blocking state.
        std::vector<double> alloc;
        alloc.reserve(execList_.size());
        for (const auto& cl : execList_) {
            alloc.push_back(allocatedMips(mipsShare, *cl));
        }

        std::vector<CloudletPtr> stillRunning;
        stillRunning.reserve(execList_.size());
        for (std::size_t i = 0; i < execList_.size(); ++i) {
            const CloudletPtr& cl = execList_[i];
            bool done = false;
            try {
                cloudletUpdate(*cl, ctx);
                cl->addProgress(timeSpan * alloc[i]);
                done = cloudletIsFinished(*cl);
            } catch (...) {
                cl->markFailed(now);
                completed_.push_back(cl);
                releaseResources(*cl);
                continue;
            }
            if (done) {
                cl->markFinished(now);
                completed_.push_back(cl);
                releaseResources(*cl);
            } else {
                stillRunning.push_back(cl);
            }
        }
        execList_ = std::move(stillRunning);
        previousTime_ = now;

        if (execList_.empty() && waitList_.empty()) {
            return 0.0;
        }

        const std::vector<CloudletPtr> unpaused = unpauseCloudlets(waitList_, mipsShare);
        for (const auto& cl : unpaused) {
            auto it = std::find(waitList_.begin(), waitList_.end(), cl);
            if (it == waitList_.end()) {
                throw SchedulerStateError("unpause handler returned a cloudlet that is not waiting");
            }
            waitList_.erase(it);
            execList_.push_back(cl);
            cl->markExecuting(now);
            acquireResources(*cl, mipsShare);
        }

        SimTime nextEvent = kNoProgress;
        for (const auto& cl : execList_) {
            if (cl->isBlocked()) {
                continue;
            }
            const double remaining = cl->remainingMI();
            SimTime est;
            if (remaining <= 0.0) {
                est = now;
            } else {
                const double mips = allocatedMips(mipsShare, *cl);
                if (mips <= 0.0) {
                    continue;
                }
                est = now + remaining / mips;
                if (est <= now) {
                    est = std::nextafter(now, kNoProgress);
                }
            }
            nextEvent = std::min(nextEvent, est);
        }
        return nextEvent;
    }

    double currentlyAllocatedMipsForCloudlet(SimTime, std::span<const double> mipsShare, const Cloudlet& cl) const
    {
        if (!isExecuting(cl)) {
            throw SchedulerStateError("cloudlet " + std::to_string(cl.id()) + " is not executing");
        }
        return allocatedMips(mipsShare, cl);
    }

    /// Adds a cloudlet and returns its estimated finish time under the current
    /// shares. Callers bring the scheduler up to `now` first.
    SimTime submitCloudlet(CloudletPtr cl, SimTime now, std::span<const double> mipsShare)
    {
        if (!cl) {
            throw std::invalid_argument("null cloudlet");
        }
        if (contains(*cl) || cl->status() != CloudletStatus::Queued || cl->hasStarted()) {
            throw SchedulerStateError("cloudlet " + std::to_string(cl->id()) + " already submitted");
        }
        validateSubmission(*cl, mipsShare);
        cl->markSubmitted(now);
        if (admitOnSubmit(*cl, mipsShare)) {
            execList_.push_back(cl);
            cl->markExecuting(now);
            acquireResources(*cl, mipsShare);
        } else {
            waitList_.push_back(cl);
        }
        return estimateFinish(*cl, now, mipsShare);
    }

    /// Finished and failed cloudlets since the previous call.
    std::vector<CloudletPtr> takeCompleted() { return std::exchange(completed_, {}); }

    const std::vector<CloudletPtr>& execList() const noexcept { return execList_; }
    const std::vector<CloudletPtr>& waitList() const noexcept { return waitList_; }
    SimTime previousTime() const noexcept { return previousTime_; }
    bool idle() const noexcept { return execList_.empty() && waitList_.empty(); }

    bool isExecuting(const Cloudlet& cl) const
    {
        return std::any_of(execList_.begin(), execList_.end(), [&](const auto& p) { return p.get() == &cl; });
    }

    /// Sum of MIPS currently granted to executing cloudlets.
    double usedMips(std::span<const double> mipsShare) const
    {
        double used = 0.0;
        for (const auto& cl : execList_) {
            used += allocatedMips(mipsShare, *cl);
        }
        return used;
    }

protected:
    virtual void cloudletUpdate(Cloudlet& cl, UpdateContext& ctx) { cl.update(ctx); }
    virtual bool cloudletIsFinished(const Cloudlet& cl) { return cl.isFinished(); }
    virtual std::vector<CloudletPtr> unpauseCloudlets(const std::vector<CloudletPtr>& waiting,
                                                      std::span<const double> mipsShare) = 0;

    virtual double allocatedMips(std::span<const double> mipsShare, const Cloudlet& cl) const = 0;
    virtual bool admitOnSubmit(const Cloudlet& cl, std::span<const double> mipsShare) const = 0;
    virtual SimTime estimateFinish(const Cloudlet& cl, SimTime now, std::span<const double> mipsShare) const = 0;
    virtual void validateSubmission(const Cloudlet&, std::span<const double>) const {}
    virtual void acquireResources(const Cloudlet&, std::span<const double>) {}
    virtual void releaseResources(const Cloudlet&) {}

    bool contains(const Cloudlet& cl) const
    {
        auto same = [&](const auto& p) { return p.get() == &cl; };
        return std::any_of(execList_.begin(), execList_.end(), same) ||
               std::any_of(waitList_.begin(), waitList_.end(), same);
    }

    std::vector<CloudletPtr> execList_;
    std::vector<CloudletPtr> waitList_;
    std::vector<CloudletPtr> completed_;
    SimTime previousTime_ = 0.0;
};

/// Capacity is divided equally among executing, non-blocked cloudlets, each
/// capped at pesRequired x the fastest PE. Cloudlets never wait.
class TimeSharedScheduler : public CloudletScheduler {
public:
    SchedulingPolicy policy() const noexcept override { return SchedulingPolicy::TimeShared; }

protected:
    std::vector<CloudletPtr> unpauseCloudlets(const std::vector<CloudletPtr>&, std::span<const double>) override
    {
        return {};
    }

    double allocatedMips(std::span<const double> mipsShare, const Cloudlet& cl) const override
    {
        if (cl.isBlocked()) {
            return 0.0;
        }
        const auto active = std::count_if(execList_.begin(), execList_.end(),
                                          [](const auto& p) { return !p->isBlocked(); });
        if (active == 0 || mipsShare.empty()) {
            return 0.0;
        }
        const double total = std::accumulate(mipsShare.begin(), mipsShare.end(), 0.0);
        const double maxPe = *std::max_element(mipsShare.begin(), mipsShare.end());
        return std::min(total / static_cast<double>(active), static_cast<double>(cl.pesRequired()) * maxPe);
    }

    bool admitOnSubmit(const Cloudlet&, std::span<const double>) const override { return true; }

    SimTime estimateFinish(const Cloudlet& cl, SimTime now, std::span<const double> mipsShare) const override
    {
        const double mips = allocatedMips(mipsShare, cl);
        const double remaining = cl.remainingMI();
        if (remaining <= 0.0) {
            return now;
        }
        return mips > 0.0 ? now + remaining / mips : kNoProgress;
    }
};

/// Cloudlets hold pesRequired PEs exclusively and run at the sum of those PEs'
/// MIPS; the rest wait FIFO. With strictSerial only one cloudlet executes at a
/// time regardless of free PEs.
class SpaceSharedScheduler : public CloudletScheduler {
public:
    explicit SpaceSharedScheduler(bool strictSerial = false) : strictSerial_(strictSerial) {}

    SchedulingPolicy policy() const noexcept override { return SchedulingPolicy::SpaceShared; }
    bool strictSerial() const noexcept { return strictSerial_; }

    /// PE indices held by an executing cloudlet.
    const std::vector<int>& assignedPes(const Cloudlet& cl) const
    {
        static const std::vector<int> none;
        auto it = pesOf_.find(cl.id());
        return it == pesOf_.end() ? none : it->second;
    }

protected:
    std::vector<CloudletPtr> unpauseCloudlets(const std::vector<CloudletPtr>& waiting,
                                              std::span<const double> mipsShare) override
    {
        std::vector<CloudletPtr> out;
        int free = freePes(mipsShare);
        std::size_t running = execList_.size();
        for (const auto& cl : waiting) {
            if (strictSerial_ && running > 0) {
                break;
            }
            if (cl->pesRequired() > free) {
                break;
            }
            free -= cl->pesRequired();
            ++running;
            out.push_back(cl);
        }
        return out;
    }

    double allocatedMips(std::span<const double> mipsShare, const Cloudlet& cl) const override
    {
        if (cl.isBlocked()) {
            return 0.0;
        }
        double mips = 0.0;
        for (int pe : assignedPes(cl)) {
            if (static_cast<std::size_t>(pe) < mipsShare.size()) {
                mips += mipsShare[static_cast<std::size_t>(pe)];
            }
        }
        return mips;
    }

    bool admitOnSubmit(const Cloudlet& cl, std::span<const double> mipsShare) const override
    {
        if (!waitList_.empty()) {
            return false;
        }
        if (strictSerial_ && !execList_.empty()) {
            return false;
        }
        return cl.pesRequired() <= freePes(mipsShare);
    }

    void validateSubmission(const Cloudlet& cl, std::span<const double> mipsShare) const override
    {
        if (static_cast<std::size_t>(cl.pesRequired()) > mipsShare.size()) {
            throw std::invalid_argument("cloudlet " + std::to_string(cl.id()) + " needs more PEs than the guest has");
        }
    }

    void acquireResources(const Cloudlet& cl, std::span<const double> mipsShare) override
    {
        std::vector<bool> taken(mipsShare.size(), false);
        for (const auto& [id, pes] : pesOf_) {
            for (int pe : pes) {
                if (static_cast<std::size_t>(pe) < taken.size()) {
                    taken[static_cast<std::size_t>(pe)] = true;
                }
            }
        }
        std::vector<int> pes;
        for (std::size_t i = 0; i < taken.size() && pes.size() < static_cast<std::size_t>(cl.pesRequired()); ++i) {
            if (!taken[i]) {
                pes.push_back(static_cast<int>(i));
            }
        }
        if (pes.size() != static_cast<std::size_t>(cl.pesRequired())) {
            throw SchedulerStateError("not enough free PEs for cloudlet " + std::to_string(cl.id()));
        }
        pesOf_[cl.id()] = std::move(pes);
    }

    void releaseResources(const Cloudlet& cl) override { pesOf_.erase(cl.id()); }

    /// List-schedules the waiting queue on top of the running set.
    SimTime estimateFinish(const Cloudlet& target, SimTime now, std::span<const double> mipsShare) const override
    {
        const std::size_t nPes = mipsShare.size();
        std::vector<SimTime> peFree(nPes, now);
        SimTime lastRunningEnd = now;
        for (const auto& cl : execList_) {
            const double mips = allocatedMips(mipsShare, *cl);
            const double remaining = cl->remainingMI();
            SimTime end = remaining <= 0.0 ? now : (mips > 0.0 ? now + remaining / mips : kNoProgress);
            if (cl.get() == &target) {
                return end;
            }
            for (int pe : assignedPes(*cl)) {
                peFree[static_cast<std::size_t>(pe)] = end;
            }
            lastRunningEnd = std::max(lastRunningEnd, end);
        }
        SimTime earliestStart = now;
        for (const auto& cl : waitList_) {
            std::vector<std::size_t> order(nPes);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return peFree[a] < peFree[b]; });
            const auto need = static_cast<std::size_t>(cl->pesRequired());
            SimTime start = std::max(earliestStart, peFree[order[need - 1]]);
            if (strictSerial_) {
                start = std::max(start, lastRunningEnd);
            }
            double mips = 0.0;
            for (std::size_t k = 0; k < need; ++k) {
                mips += mipsShare[order[k]];
            }
            const double remaining = cl->remainingMI();
            const SimTime end = remaining <= 0.0 ? start : (mips > 0.0 ? start + remaining / mips : kNoProgress);
            if (cl.get() == &target) {
                return end;
            }
            for (std::size_t k = 0; k < need; ++k) {
                peFree[order[k]] = end;
            }
            earliestStart = start;
            lastRunningEnd = std::max(lastRunningEnd, end);
        }
        return kNoProgress;
    }

private:
    int freePes(std::span<const double> mipsShare) const
    {
        std::size_t used = 0;
        for (const auto& [id, pes] : pesOf_) {
            used += pes.size();
        }
        return used >= mipsShare.size() ? 0 : static_cast<int>(mipsShare.size() - used);
    }

    bool strictSerial_;
    std::map<int, std::vector<int>> pesOf_;
};

inline std::unique_ptr<CloudletScheduler> makeScheduler(SchedulingPolicy policy, bool strictSerial = false)
{
    if (policy == SchedulingPolicy::SpaceShared) {
        return std::make_unique<SpaceSharedScheduler>(strictSerial);
    }
    return std::make_unique<TimeSharedScheduler>();
}

} // namespace dcsim
