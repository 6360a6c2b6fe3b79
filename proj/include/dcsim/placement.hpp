#pragma once

#include "dcsim/resources.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dcsim {

/// Immutable view of one selectable entity (host or guest).
struct Candidate {
    std::size_t index = 0; ///< position in the caller's list
    int id = 0;
    double demandMips = 0.0;
    int group = -1; ///< e.g. rack; -1 when unknown
};

struct SelectionContext {
    /// Extra admissibility criterion; all candidates admissible when empty.
    std::function<bool(const Candidate&)> admissible;
};

/// Chooses one candidate from a list. The same select() path serves guest
/// placement and migration.
class SelectionPolicy {
public:
    virtual ~SelectionPolicy() = default;
    virtual std::string_view name() const noexcept = 0;

    std::optional<Candidate> select(std::span<const Candidate> candidates, const SelectionContext& ctx,
                                    const std::set<int>& excluded = {})
    {
        ++selectCalls_;
        std::vector<Candidate> admissible;
        admissible.reserve(candidates.size());
        for (const auto& c : candidates) {
            if (excluded.count(c.id) != 0) {
                continue;
            }
            if (ctx.admissible && !ctx.admissible(c)) {
                continue;
            }
            admissible.push_back(c);
        }
        if (admissible.empty()) {
            return std::nullopt;
        }
        return choose(admissible);
    }

    std::uint64_t selectCalls() const noexcept { return selectCalls_; }

protected:
    /// `admissible` is non-empty and keeps the caller's order.
    virtual Candidate choose(std::span<const Candidate> admissible) = 0;

private:
    std::uint64_t selectCalls_ = 0;
};

class FirstFitSelection final : public SelectionPolicy {
public:
    std::string_view name() const noexcept override { return "first_fit"; }

protected:
    Candidate choose(std::span<const Candidate> admissible) override { return admissible.front(); }
};

/// Uniform pick among admissible candidates from a seeded stream.
class SeededRandomSelection final : public SelectionPolicy {
public:
    explicit SeededRandomSelection(std::uint64_t seed) : rng_(seed) {}
    std::string_view name() const noexcept override { return "seeded_random"; }

protected:
    Candidate choose(std::span<const Candidate> admissible) override
    {
        // Modulo keeps the stream portable; the bias is negligible for small lists.
        return admissible[static_cast<std::size_t>(rng_() % admissible.size())];
    }

private:
    std::mt19937_64 rng_;
};

/// Argmax (or argmin) of a score; ties go to the lowest candidate id.
class ScoredSelection : public SelectionPolicy {
public:
    using Score = std::function<double(const Candidate&)>;

    ScoredSelection(std::string name, Score score, bool maximize)
        : name_(std::move(name)), score_(std::move(score)), maximize_(maximize)
    {
    }

    std::string_view name() const noexcept override { return name_; }

protected:
    Candidate choose(std::span<const Candidate> admissible) override
    {
        const Candidate* best = &admissible.front();
        double bestScore = score_(*best);
        for (const auto& c : admissible.subspan(1)) {
            const double s = score_(c);
            const bool better = maximize_ ? s > bestScore : s < bestScore;
            if (better || (s == bestScore && c.id < best->id)) {
                best = &c;
                bestScore = s;
            }
        }
        return *best;
    }

private:
    std::string name_;
    Score score_;
    bool maximize_;
};

class MostDemandingSelection final : public ScoredSelection {
public:
    MostDemandingSelection() : ScoredSelection("most_demanding", [](const Candidate& c) { return c.demandMips; }, true) {}
};

class LeastDemandingSelection final : public ScoredSelection {
public:
    LeastDemandingSelection()
        : ScoredSelection("least_demanding", [](const Candidate& c) { return c.demandMips; }, false)
    {
    }
};

/// Factory for the policy names accepted in scenario files.
inline std::unique_ptr<SelectionPolicy> makeSelectionPolicy(std::string_view name, std::uint64_t seed = 1)
{
    if (name == "first_fit") {
        return std::make_unique<FirstFitSelection>();
    }
    if (name == "seeded_random") {
        return std::make_unique<SeededRandomSelection>(seed);
    }
    if (name == "most_demanding") {
        return std::make_unique<MostDemandingSelection>();
    }
    if (name == "least_demanding") {
        return std::make_unique<LeastDemandingSelection>();
    }
    throw std::invalid_argument("unknown selection policy '" + std::string(name) + "'");
}

inline bool isKnownSelectionPolicy(std::string_view name)
{
    return name == "first_fit" || name == "seeded_random" || name == "most_demanding" || name == "least_demanding";
}

/// Host selection with capacity fit as the admissibility rule.
class AllocationPolicy {
public:
    AllocationPolicy(SelectionPolicy& selection, std::vector<HostEntity*> hosts, std::vector<int> groups = {})
        : selection_(&selection), hosts_(std::move(hosts)), groups_(std::move(groups))
    {
    }

    /// Places `guest` on the selected host. `extra` narrows the admissible set
    /// further, e.g. an anti-affinity rule on Candidate::group.
    PlacementResult allocateGuest(GuestEntity& guest, const std::function<bool(const Candidate&)>& extra = {},
                                  const std::set<int>& excluded = {})
    {
        if (guest.placed()) {
            return {PlacementStatus::AlreadyPlaced, ResourceDimension::None,
                    "guest " + std::to_string(guest.guestId()) + " is already placed"};
        }
        std::vector<Candidate> candidates;
        candidates.reserve(hosts_.size());
        for (std::size_t i = 0; i < hosts_.size(); ++i) {
            candidates.push_back(Candidate{i, hosts_[i]->hostId(), hosts_[i]->allocatedMips(),
                                           i < groups_.size() ? groups_[i] : -1});
        }
        SelectionContext ctx;
        const CoreAttributes want = guest.spec().core;
        ctx.admissible = [&](const Candidate& c) {
            if (!hosts_[c.index]->fits(want)) {
                return false;
            }
            return !extra || extra(c);
        };
        auto chosen = selection_->select(candidates, ctx, excluded);
        if (!chosen) {
            return {PlacementStatus::InsufficientCapacity, ResourceDimension::None,
                    "no admissible host for guest " + std::to_string(guest.guestId())};
        }
        lastHost_ = hosts_[chosen->index];
        return hosts_[chosen->index]->place(guest);
    }

    HostEntity* lastHost() const noexcept { return lastHost_; }
    const std::vector<HostEntity*>& hosts() const noexcept { return hosts_; }

private:
    SelectionPolicy* selection_;
    std::vector<HostEntity*> hosts_;
    std::vector<int> groups_;
    HostEntity* lastHost_ = nullptr;
};

/// Picks the guest to move off `host`, using the same select() as placement.
inline GuestEntity* selectForMigration(SelectionPolicy& policy, HostEntity& host, const std::set<int>& excluded = {})
{
    const auto& guests = host.guests();
    std::vector<Candidate> candidates;
    candidates.reserve(guests.size());
    for (std::size_t i = 0; i < guests.size(); ++i) {
        candidates.push_back(Candidate{i, guests[i]->guestId(), guests[i]->spec().core.totalMips(), -1});
    }
    auto chosen = policy.select(candidates, SelectionContext{}, excluded);
    return chosen ? guests[chosen->index] : nullptr;
}

} // namespace dcsim
