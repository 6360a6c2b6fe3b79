#pragma once

#include "dcsim/engine.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dcsim {

enum class CloudletStatus { Queued, Exec, Paused, Finished, Failed };

/// Progress closer than this to a milestone snaps onto it (MI).
inline constexpr double kProgressSnapMI = 1e-6;

/// Outgoing payload emitted by a SEND stage, picked up by the datacenter.
struct SendRequest {
    int srcCloudletId = -1;
    int dstCloudletId = -1;
    std::int64_t payloadBytes = 0;
};

/// Passed to the per-cloudlet update handler.
struct UpdateContext {
    SimTime now = 0.0;
    std::vector<SendRequest> sends;

    void emitSend(SendRequest req) { sends.push_back(req); }
};

/// Unit of work measured in millions of instructions.
class Cloudlet {
public:
    Cloudlet(int id, double lengthMI, int pesRequired = 1) : id_(id), lengthMI_(lengthMI), pes_(pesRequired)
    {
        if (!(lengthMI >= 0.0)) {
            throw std::invalid_argument("cloudlet length must be non-negative");
        }
        if (pesRequired < 1) {
            throw std::invalid_argument("cloudlet needs at least one PE");
        }
    }
    virtual ~Cloudlet() = default;

    int id() const noexcept { return id_; }
    double lengthMI() const noexcept { return lengthMI_; }
    double lengthSoFarMI() const noexcept { return soFarMI_; }
    int pesRequired() const noexcept { return pes_; }

    CloudletStatus status() const noexcept { return status_; }
    SimTime submitTime() const noexcept { return submitTime_; }
    SimTime startTime() const noexcept { return startTime_; }
    SimTime finishTime() const noexcept { return finishTime_; }
    bool hasStarted() const noexcept { return started_; }

    std::optional<double> deadlineSeconds() const noexcept { return deadline_; }
    void setDeadlineSeconds(std::optional<double> d) { deadline_ = d; }

    /// Handler invoked before each progress increment. No-op for plain cloudlets.
    virtual void update(UpdateContext&) {}

    virtual bool isFinished() const { return soFarMI_ >= lengthMI_; }

    /// A blocked cloudlet consumes no MIPS and is not counted when sharing.
    virtual bool isBlocked() const { return false; }

    /// MI left before the next point at which the cloudlet needs attention.
    virtual double remainingMI() const { return std::max(0.0, progressLimitMI() - soFarMI_); }

    void addProgress(double mi)
    {
        const double limit = progressLimitMI();
        double next = soFarMI_ + mi;
        if (next >= limit - kProgressSnapMI) {
            next = std::max(soFarMI_, limit);
        }
        soFarMI_ = next;
    }

    // Lifecycle bookkeeping, driven by the scheduler.
    void markSubmitted(SimTime t)
    {
        status_ = CloudletStatus::Queued;
        submitTime_ = t;
    }
    void markExecuting(SimTime t)
    {
        status_ = CloudletStatus::Exec;
        if (!started_) {
            started_ = true;
            startTime_ = t;
        }
    }
    void markPaused() noexcept { status_ = CloudletStatus::Paused; }
    void markFinished(SimTime t)
    {
        status_ = CloudletStatus::Finished;
        finishTime_ = t;
    }
    void markFailed(SimTime t)
    {
        status_ = CloudletStatus::Failed;
        finishTime_ = t;
    }

protected:
    /// Progress may not exceed this value until the cloudlet's state changes.
    virtual double progressLimitMI() const { return lengthMI_; }

private:
    int id_;
    double lengthMI_;
    int pes_;
    double soFarMI_ = 0.0;
    CloudletStatus status_ = CloudletStatus::Queued;
    SimTime submitTime_ = 0.0;
    SimTime startTime_ = 0.0;
    SimTime finishTime_ = 0.0;
    bool started_ = false;
    std::optional<double> deadline_;
};

enum class StageKind { Execution, Send, Receive };

struct Stage {
    StageKind kind = StageKind::Execution;
    double lengthMI = 0.0;
    std::int64_t payloadBytes = 0;
    int peerCloudletId = -1;

    static Stage execution(double mi) { return Stage{StageKind::Execution, mi, 0, -1}; }
    static Stage send(int peer, std::int64_t bytes) { return Stage{StageKind::Send, 0.0, bytes, peer}; }
    static Stage receive(int peer) { return Stage{StageKind::Receive, 0.0, 0, peer}; }

    friend bool operator==(const Stage&, const Stage&) = default;
};

/// Cloudlet made of execute / send / receive stages. Stages advance from the
/// update handler; a RECEIVE stage blocks until the matching payload arrives.
class NetworkCloudlet : public Cloudlet {
public:
    NetworkCloudlet(int id, std::vector<Stage> stages, int pesRequired = 1)
        : Cloudlet(id, totalExecution(stages), pesRequired), stages_(std::move(stages))
    {
        double acc = 0.0;
        stageEndMI_.reserve(stages_.size());
        for (const auto& s : stages_) {
            if (s.kind == StageKind::Execution) {
                acc += s.lengthMI;
            }
            if (s.kind == StageKind::Send && s.payloadBytes < 0) {
                throw std::invalid_argument("negative payload");
            }
            stageEndMI_.push_back(acc);
        }
    }

    const std::vector<Stage>& stages() const noexcept { return stages_; }
    std::size_t currentStageIndex() const noexcept { return current_; }

    /// Payload from `fromCloudletId` has arrived.
    void deliver(int fromCloudletId) { inbox_.push_back(fromCloudletId); }

    void update(UpdateContext& ctx) override
    {
        while (current_ < stages_.size()) {
            const Stage& s = stages_[current_];
            switch (s.kind) {
            case StageKind::Execution:
                if (lengthSoFarMI() < stageEndMI_[current_]) {
                    return;
                }
                break;
            case StageKind::Send:
                ctx.emitSend(SendRequest{id(), s.peerCloudletId, s.payloadBytes});
                break;
            case StageKind::Receive: {
                auto it = std::find(inbox_.begin(), inbox_.end(), s.peerCloudletId);
                if (it == inbox_.end()) {
                    return;
                }
                inbox_.erase(it);
                break;
            }
            }
            ++current_;
        }
    }

    /// True once every stage is complete. Trailing execution stages whose MI
    /// budget is met count as complete without another update.
    bool isFinished() const override
    {
        for (std::size_t i = current_; i < stages_.size(); ++i) {
            if (stages_[i].kind != StageKind::Execution || lengthSoFarMI() < stageEndMI_[i]) {
                return false;
            }
        }
        return true;
    }

    bool isBlocked() const override
    {
        if (current_ >= stages_.size() || stages_[current_].kind != StageKind::Receive) {
            return false;
        }
        return std::find(inbox_.begin(), inbox_.end(), stages_[current_].peerCloudletId) == inbox_.end();
    }

    double remainingMI() const override
    {
        if (current_ >= stages_.size() || stages_[current_].kind != StageKind::Execution) {
            return 0.0;
        }
        return std::max(0.0, stageEndMI_[current_] - lengthSoFarMI());
    }

protected:
    double progressLimitMI() const override
    {
        if (current_ < stages_.size() && stages_[current_].kind == StageKind::Execution) {
            return stageEndMI_[current_];
        }
        return lengthSoFarMI();
    }

private:
    static double totalExecution(const std::vector<Stage>& stages)
    {
        double total = 0.0;
        for (const auto& s : stages) {
            if (s.kind == StageKind::Execution) {
                if (!(s.lengthMI >= 0.0)) {
                    throw std::invalid_argument("execution stage length must be non-negative");
                }
                total += s.lengthMI;
            }
        }
        return total;
    }

    std::vector<Stage> stages_;
    std::vector<double> stageEndMI_;
    std::size_t current_ = 0;
    std::vector<int> inbox_;
};

} // namespace dcsim
