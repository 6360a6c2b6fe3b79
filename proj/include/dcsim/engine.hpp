#pragma once

#include <algorithm>
#include <any>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dcsim {

/// Simulated time in seconds.
using SimTime = double;
using EntityId = int;

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TagCollisionError : public SimulationError {
public:
    using SimulationError::SimulationError;
};

/// Enumerated event tag scoped by the namespace that registered it.
struct EventTag {
    std::uint32_t space = 0;
    std::uint32_t code = 0;

    friend constexpr bool operator==(EventTag, EventTag) = default;
    friend constexpr auto operator<=>(EventTag, EventTag) = default;
};

/// Registry of tag namespaces. Each module registers its own symbol list once;
/// tags from distinct namespaces never compare equal.
class TagRegistry {
public:
    std::vector<EventTag> registerNamespace(std::string space, std::vector<std::string> names)
    {
        for (const auto& ns : spaces_) {
            if (ns.name == space) {
                throw TagCollisionError("event tag namespace '" + space + "' is already registered");
            }
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            for (std::size_t j = i + 1; j < names.size(); ++j) {
                if (names[i] == names[j]) {
                    throw TagCollisionError("duplicate tag '" + names[i] + "' in namespace '" + space + "'");
                }
            }
        }
        const auto spaceIndex = static_cast<std::uint32_t>(spaces_.size());
        std::vector<EventTag> tags;
        tags.reserve(names.size());
        for (std::size_t i = 0; i < names.size(); ++i) {
            tags.push_back(EventTag{spaceIndex, static_cast<std::uint32_t>(i)});
        }
        spaces_.push_back(Namespace{std::move(space), std::move(names)});
        return tags;
    }

    bool contains(std::string_view space) const
    {
        return std::any_of(spaces_.begin(), spaces_.end(), [&](const auto& ns) { return ns.name == space; });
    }

    /// "namespace.NAME", for logs.
    std::string name(EventTag tag) const
    {
        if (tag.space >= spaces_.size() || tag.code >= spaces_[tag.space].names.size()) {
            return "<unregistered>";
        }
        const auto& ns = spaces_[tag.space];
        return ns.name + "." + ns.names[tag.code];
    }

private:
    struct Namespace {
        std::string name;
        std::vector<std::string> names;
    };
    std::vector<Namespace> spaces_;
};

struct Event {
    SimTime time = 0.0;
    EntityId source = -1;
    EntityId dest = -1;
    EventTag tag;
    std::any payload;
    std::uint64_t seq = 0;
};

/// Binary heap of events ordered by (time, seq). Comparisons are counted so
/// that the logarithmic cost can be checked from tests.
class FutureEventQueue {
public:
    void push(Event ev)
    {
        heap_.push_back(std::move(ev));
        std::push_heap(heap_.begin(), heap_.end(), later());
    }

    Event pop()
    {
        if (heap_.empty()) {
            throw SimulationError("pop from empty event queue");
        }
        std::pop_heap(heap_.begin(), heap_.end(), later());
        Event ev = std::move(heap_.back());
        heap_.pop_back();
        return ev;
    }

    const Event& top() const { return heap_.front(); }
    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }
    void clear() noexcept { heap_.clear(); }

    std::uint64_t comparisons() const noexcept { return comparisons_; }
    void resetComparisons() noexcept { comparisons_ = 0; }

private:
    struct Later {
        std::uint64_t* counter;
        bool operator()(const Event& a, const Event& b) const
        {
            ++*counter;
            if (a.time != b.time) {
                return a.time > b.time;
            }
            return a.seq > b.seq;
        }
    };

    Later later() noexcept { return Later{&comparisons_}; }

    std::vector<Event> heap_;
    std::uint64_t comparisons_ = 0;
};

class Simulation;

class SimEntity {
public:
    enum class State { Created, Running, Finished };

    explicit SimEntity(std::string name) : name_(std::move(name)) {}
    virtual ~SimEntity() = default;

    SimEntity(const SimEntity&) = delete;
    SimEntity& operator=(const SimEntity&) = delete;

    EntityId id() const noexcept { return id_; }
    const std::string& name() const noexcept { return name_; }
    State state() const noexcept { return state_; }

protected:
    virtual void startEntity() {}
    virtual void processEvent(const Event& ev) = 0;
    virtual void shutdownEntity() {}

    Simulation& sim() const { return *sim_; }

    /// Stop receiving events; anything addressed here afterwards is dropped.
    void finish() noexcept { state_ = State::Finished; }

private:
    friend class Simulation;

    std::string name_;
    EntityId id_ = -1;
    State state_ = State::Created;
    Simulation* sim_ = nullptr;
};

/// Single-threaded discrete-event kernel. Events are dispatched in (time, seq)
/// order; equal timestamps are served FIFO.
class Simulation {
public:
    Simulation() { endTag_ = tags_.registerNamespace("core", {"END"}).front(); }

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    EntityId addEntity(std::unique_ptr<SimEntity> entity)
    {
        if (!entity) {
            throw SimulationError("null entity");
        }
        entity->id_ = static_cast<EntityId>(entities_.size());
        entity->sim_ = this;
        entities_.push_back(std::move(entity));
        SimEntity& added = *entities_.back();
        if (running_) {
            added.state_ = SimEntity::State::Running;
            added.startEntity();
        }
        return added.id_;
    }

    template <class E, class... Args>
    E& emplaceEntity(Args&&... args)
    {
        auto owned = std::make_unique<E>(std::forward<Args>(args)...);
        E& ref = *owned;
        addEntity(std::move(owned));
        return ref;
    }

    SimEntity& entity(EntityId id) const
    {
        if (id < 0 || static_cast<std::size_t>(id) >= entities_.size()) {
            throw SimulationError("unknown entity id " + std::to_string(id));
        }
        return *entities_[static_cast<std::size_t>(id)];
    }

    std::size_t entityCount() const noexcept { return entities_.size(); }

    std::uint64_t schedule(EntityId source, SimTime delay, EntityId dest, EventTag tag, std::any payload = {})
    {
        if (!(delay >= 0.0) || std::isinf(delay)) {
            throw SimulationError("event delay must be a finite non-negative number");
        }
        return scheduleAt(source, clock_ + delay, dest, tag, std::move(payload));
    }

    /// Absolute-time variant; avoids the rounding of clock + (t - clock).
    std::uint64_t scheduleAt(EntityId source, SimTime time, EntityId dest, EventTag tag, std::any payload = {})
    {
        if (!(time >= clock_) || std::isinf(time)) {
            throw SimulationError("event time lies in the past");
        }
        entity(dest);
        const std::uint64_t seq = nextSeq_++;
        queue_.push(Event{time, source, dest, tag, std::move(payload), seq});
        return seq;
    }

    SimTime run()
    {
        if (entities_.empty()) {
            throw SimulationError("no entities registered");
        }
        running_ = true;
        for (std::size_t i = 0; i < entities_.size(); ++i) {
            auto& e = *entities_[i];
            if (e.state_ == SimEntity::State::Created) {
                e.state_ = SimEntity::State::Running;
                e.startEntity();
            }
        }
        while (!queue_.empty() && !stopRequested_) {
            Event ev = queue_.pop();
            clock_ = ev.time;
            if (ev.tag == endTag_) {
                queue_.clear();
                break;
            }
            SimEntity& dest = *entities_[static_cast<std::size_t>(ev.dest)];
            if (dest.state_ != SimEntity::State::Running) {
                ++dropped_;
                if (log_ != nullptr) {
                    *log_ << "t=" << clock_ << " dropped " << tags_.name(ev.tag) << " for finished entity "
                          << dest.name_ << '\n';
                }
                continue;
            }
            if (trace_) {
                trace_(ev);
            }
            ++dispatched_;
            dest.processEvent(ev);
        }
        queue_.clear();
        for (auto& e : entities_) {
            if (e->state_ == SimEntity::State::Running) {
                e->shutdownEntity();
            }
        }
        running_ = false;
        return clock_;
    }

    /// Time of the event being dispatched; 0 before the run starts.
    SimTime clock() const noexcept { return clock_; }

    /// Stop after the current event; pending events are discarded.
    void terminate() noexcept { stopRequested_ = true; }

    TagRegistry& tags() noexcept { return tags_; }
    const TagRegistry& tags() const noexcept { return tags_; }
    EventTag endTag() const noexcept { return endTag_; }

    const FutureEventQueue& queue() const noexcept { return queue_; }
    std::size_t pendingEvents() const noexcept { return queue_.size(); }
    std::uint64_t dispatchedEvents() const noexcept { return dispatched_; }
    std::uint64_t droppedEvents() const noexcept { return dropped_; }

    void setLog(std::ostream* log) noexcept { log_ = log; }
    void setTrace(std::function<void(const Event&)> trace) { trace_ = std::move(trace); }

private:
    std::vector<std::unique_ptr<SimEntity>> entities_;
    FutureEventQueue queue_;
    TagRegistry tags_;
    EventTag endTag_;
    SimTime clock_ = 0.0;
    std::uint64_t nextSeq_ = 0;
    std::uint64_t dispatched_ = 0;
    std::uint64_t dropped_ = 0;
    bool running_ = false;
    bool stopRequested_ = false;
    std::ostream* log_ = nullptr;
    std::function<void(const Event&)> trace_;
};

} // namespace dcsim
